//! Exact Rauzy–Veech machinery for interval exchange maps.

pub mod accel;
pub mod birkhoff;
pub mod error;
pub mod families;
pub mod iem;
pub mod linalg;
pub mod matrix;
pub mod mc;
pub mod num;
pub mod rauzy;
pub mod roth;
pub mod suspension;

pub use accel::{accelerate, accelerate_iem, AccelOrbit, MatrixNorms};
pub use birkhoff::{solve_cohomological, PiecewiseBV, SolveOptions, SolveReport};
pub use error::{ConnexionHalt, Error, Result};
pub use iem::{CombinatorialData, Connexion, ConnexionSearch, Iem, IemSpec};
pub use matrix::IntMatrix;
pub use num::Q;
pub use rauzy::{
    build_diagram, iterate, path_by_names, path_by_runs, rauzy_step, CocycleOrbit, RauzyArrow, RauzyDiagram, Run,
};
pub use roth::{diagnose, RothDiagnostics, Thresholds};
pub use suspension::{surface_summary, Suspension};
