use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use iet_core::accel::{accelerate, accelerate_iem, AccelOrbit};
use iet_core::birkhoff::{solve_cohomological, PieceSpec, PiecewiseBV, SolveOptions};
use iet_core::families::{appendix_a, appendix_b};
use iet_core::iem::IemSpec;
use iet_core::mc::{mc_full_measure, mc_lyapunov, probe_q47, probe_q47_family_b, McConfig, Q47Row};
use iet_core::num::{fmt_q, parse_q};
use iet_core::roth::{diagnose, Thresholds};
use iet_core::suspension::{surface_summary, Suspension};
use iet_core::{build_diagram, iterate, CombinatorialData, Error, Iem};

const EXIT_INVALID: u8 = 2;
const EXIT_CONNEXION: u8 = 3;
const EXIT_DIVERGING: u8 = 4;

#[derive(Parser)]
#[command(name = "iet", version, about = "Interval exchange maps: induction, diagnostics, cohomological equation")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write <command>.json (and <command>.csv when the command has a table) into this directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Random lengths live on the grid 2^-bits.
    #[arg(long, global = true, default_value_t = 256)]
    precision: u32,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rauzy diagram of the base combinatorial data.
    Diagram {
        #[arg(long)]
        base: PathBuf,
        /// Identify vertices with the same reduced key.
        #[arg(long)]
        reduced: bool,
    },
    /// Rauzy-Veech orbit: arrow names and the final lengths.
    Orbit {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        steps: u128,
    },
    /// D-accelerated norms of Z(k) and Q(k).
    Accel {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        steps: u128,
        #[arg(long = "D", default_value_t = 1)]
        d_accel: usize,
    },
    /// Finite-horizon diagnostics for conditions (a), (b), (c).
    Roth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        steps: u128,
    },
    /// Solve Ψ − Ψ∘T = Φ − χ.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        /// Accelerated levels to build.
        #[arg(long, default_value_t = 40)]
        levels: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Surface data of a suspension.
    Suspend {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        tau: PathBuf,
    },
    /// Teichmüller flow Uᵗ, optionally followed by normalized steps.
    Flow {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        tau: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, default_value_t = 0)]
        normalized_steps: usize,
    },
    /// Certificates for the two explicit families.
    Family {
        #[command(subcommand)]
        which: Family,
    },
    /// Monte Carlo probes over random lengths.
    Mc {
        #[arg(long, default_value = "ABCD")]
        top: String,
        #[arg(long, default_value = "DCBA")]
        bottom: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        /// Exponents and Z-norm tails instead of verdict fractions.
        #[arg(long)]
        lyapunov: bool,
        #[arg(long, default_value_t = 4)]
        tail_from: u32,
        #[arg(long, default_value_t = 10)]
        tail_to: u32,
    },
    /// Exploratory growth table C_hat = log‖Z‖ / log log‖Q‖.
    #[command(name = "probe-q47")]
    ProbeQ47 {
        #[arg(long, default_value = "ABCD")]
        top: String,
        #[arg(long, default_value = "DCBA")]
        bottom: String,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 30)]
        depth: usize,
        /// Use the non uniquely ergodic family with this n₀ instead of random samples.
        #[arg(long)]
        family_b: Option<u64>,
    },
}

#[derive(Subcommand)]
enum Family {
    /// Constant or varying loop counts n_k.
    A {
        #[arg(long, default_value_t = 5)]
        n: u64,
        #[arg(long, default_value_t = 20)]
        loops: usize,
        /// Explicit comma-separated n_k, overriding --n/--loops.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<u64>>,
    },
    B {
        #[arg(long, default_value_t = 10)]
        n0: u64,
        #[arg(long, default_value_t = 6)]
        k: usize,
    },
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

struct Output {
    name: &'static str,
    json: Value,
    table: Option<Table>,
    /// Exit code after a successful emit; nonzero for a connexion halt.
    code: u8,
}

impl Output {
    fn new(name: &'static str, json: impl Serialize) -> anyhow::Result<Self> {
        Ok(Output { name, json: serde_json::to_value(json)?, table: None, code: 0 })
    }

    fn table(mut self, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        self.table = Some(Table { header, rows });
        self
    }
}

fn read_spec(path: &Path) -> anyhow::Result<IemSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = IemSpec::parse(&text)?;
    if !spec.combo()?.is_admissible() {
        bail!(Error::NotAdmissible);
    }
    Ok(spec)
}

fn read_iem(path: &Path) -> anyhow::Result<Iem> {
    Ok(read_spec(path)?.iem()?)
}

fn read_tau(path: &Path, c: &CombinatorialData) -> anyhow::Result<Vec<iet_core::Q>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|e| Error::Invalid(e.to_string()))?;
    c.alphabet()
        .iter()
        .map(|s| {
            let v = m.get(s).ok_or_else(|| Error::Invalid(format!("missing τ for {s}")))?;
            Ok(parse_q(v)?)
        })
        .collect()
}

fn by_symbol(c: &CombinatorialData, v: &[iet_core::Q]) -> BTreeMap<String, String> {
    c.alphabet().iter().cloned().zip(v.iter().map(fmt_q)).collect()
}

fn vertex_json(c: &CombinatorialData) -> Value {
    json!({ "top": c.row_string(0), "bottom": c.row_string(1) })
}

fn halt_json(a: &iet_core::CocycleOrbit) -> Value {
    match a.halt() {
        Some(h) => json!({ "step": h.step, "alpha": h.alpha, "beta": h.beta }),
        None => Value::Null,
    }
}

/// Acceleration of a finished orbit; a connexion that left no complete block is reported as such.
fn accelerate_or_halt(o: &iet_core::CocycleOrbit, d_accel: usize) -> anyhow::Result<AccelOrbit> {
    match (accelerate(o, d_accel), o.halt()) {
        (Err(Error::InsufficientOrbit), Some(h)) => Err(Error::Connexion(h.clone()).into()),
        (r, _) => Ok(r?),
    }
}

fn halted_code(o: &iet_core::CocycleOrbit) -> u8 {
    if o.halt().is_some() {
        EXIT_CONNEXION
    } else {
        0
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn diagram(base: &Path, reduced: bool) -> anyhow::Result<Output> {
    let c = read_spec(base)?.combo()?;
    let g = build_diagram(&c)?;
    if reduced {
        let classes = g.reduced_vertices();
        let arrows: Vec<Value> =
            g.reduced_arrows().iter().map(|&(s, d, e)| json!({ "src": s, "dst": d, "type": e })).collect();
        let rows =
            g.reduced_arrows().iter().map(|&(s, d, e)| vec![s.to_string(), d.to_string(), e.to_string()]).collect();
        let vertices: Vec<Value> =
            classes.iter().map(|m| json!({ "members": m, "representative": vertex_json(&g.vertices[m[0]]) })).collect();
        return Ok(Output::new("diagram", json!({ "vertices": vertices, "arrows": arrows }))?
            .table(vec!["src", "dst", "type"], rows));
    }
    let vertices: Vec<Value> = g.vertices.iter().map(vertex_json).collect();
    let rows = g
        .arrows
        .iter()
        .map(|a| vec![a.src.to_string(), a.dst.to_string(), a.eps.to_string(), a.name.clone(), a.secondary.clone()])
        .collect();
    Ok(Output::new("diagram", json!({ "vertices": vertices, "arrows": g.arrows }))?
        .table(vec!["src", "dst", "type", "name", "secondary"], rows))
}

fn orbit(spec: &Path, steps: u128) -> anyhow::Result<Output> {
    let t = read_iem(spec)?;
    let o = iterate(&t, steps);
    let lam = o.lambda_at(o.len()).ok_or_else(|| anyhow!("lengths lost"))?;
    let c = o.end_vertex();
    let rows = c.alphabet().iter().zip(&lam).map(|(s, l)| vec![s.clone(), fmt_q(l)]).collect();
    let mut out = Output::new(
        "orbit",
        json!({
            "steps": o.len().to_string(),
            "names": o.name_runs(),
            "vertex": vertex_json(c),
            "lambda": by_symbol(c, &lam),
            "halt": halt_json(&o),
        }),
    )?
    .table(vec!["symbol", "lambda"], rows);
    out.code = halted_code(&o);
    Ok(out)
}

fn accel(spec: &Path, steps: u128, d_accel: usize) -> anyhow::Result<Output> {
    let o = iterate(&read_iem(spec)?, steps);
    let a = accelerate_or_halt(&o, d_accel)?;
    let norms = a.norms();
    let rows = norms
        .iter()
        .map(|n| {
            vec![
                n.k.to_string(),
                n.n_d.clone(),
                n.z_norm1.clone().unwrap_or_default(),
                n.z_norm_inf.clone().unwrap_or_default(),
                n.q_norm1.clone(),
            ]
        })
        .collect();
    let mut out = Output::new("accel", &norms)?.table(vec!["k", "nD", "Z_norm1", "Z_normInf", "Q_norm1"], rows);
    out.code = halted_code(&o);
    Ok(out)
}

fn roth(spec: &Path, steps: u128) -> anyhow::Result<Output> {
    let t = read_iem(spec)?;
    let o = iterate(&t, steps);
    let a = accelerate_or_halt(&o, t.d() - 1)?;
    let r = diagnose(&a, &Thresholds::default())?;
    let levels = r.a.ratios.len().max(r.theta.theta.len());
    let rows = (0..levels)
        .map(|k| {
            vec![
                k.to_string(),
                opt(r.a.ratios.get(k).copied()),
                opt(k.checked_sub(1).and_then(|i| r.theta.theta.get(i).copied())),
                opt(r.balance.iter().find(|b| b.k == k).map(|b| b.ratio)),
            ]
        })
        .collect();
    let mut out = Output::new(
        "roth",
        json!({ "a": r.a, "theta": r.theta, "c": r.c, "c_error": r.c_error, "balance": r.balance, "verdicts": r.verdicts }),
    )?
    .table(vec!["k", "a_ratio", "theta", "balance_ratio"], rows);
    out.code = halted_code(&o);
    Ok(out)
}

fn solve(spec: &Path, phi: &Path, depth: Option<usize>, levels: usize, samples: usize) -> anyhow::Result<Output> {
    let t = read_iem(spec)?;
    let a = match accelerate_iem(&t, t.d() - 1, levels, 1_000_000) {
        // rational lengths always end in a connexion, so the full orbit is finite
        Err(Error::InsufficientOrbit) => accelerate_or_halt(&iterate(&t, u128::MAX), t.d() - 1)?,
        r => r?,
    };
    let text = fs::read_to_string(phi).with_context(|| format!("reading {}", phi.display()))?;
    let pieces: BTreeMap<String, Vec<PieceSpec>> =
        serde_json::from_str(&text).map_err(|e| Error::Invalid(e.to_string()))?;
    let f = PiecewiseBV::from_spec(t.combo(), t.lengths(), &pieces)?;
    let r = solve_cohomological(&a, &f, &SolveOptions { depth, samples, ..SolveOptions::default() })?;
    // S_N(Φ−χ)(x₀) = Ψ(x₀) − Ψ(T^N x₀) with Ψ(x₀) = 0
    let rows = r.psi.iter().enumerate().map(|(n, p)| vec![n.to_string(), (0.0 - p).to_string()]).collect();
    Ok(Output::new("solve", &r)?.table(vec!["N", "S_N"], rows))
}

fn suspension_json(s: &Suspension) -> anyhow::Result<Value> {
    let sum = surface_summary(s.combo())?;
    Ok(json!({
        "genus": sum.genus,
        "nu": sum.nu,
        "singularities": sum.singularities,
        "area": fmt_q(&s.area()),
        "cell": s.cell(),
        "vertex": vertex_json(s.combo()),
        "lambda": by_symbol(s.combo(), s.lambda()),
        "tau": by_symbol(s.combo(), s.tau()),
        "time": s.time(),
    }))
}

fn suspension_row(s: &Suspension) -> anyhow::Result<Vec<String>> {
    let sum = surface_summary(s.combo())?;
    let orders: Vec<String> = sum.singularities.iter().map(|x| x.to_string()).collect();
    Ok(vec![
        sum.genus.to_string(),
        sum.nu.to_string(),
        orders.join(";"),
        fmt_q(&s.area()),
        serde_json::to_value(s.cell())?.as_str().unwrap_or_default().to_string(),
        s.time().to_string(),
    ])
}

const SUSPENSION_HEADER: [&str; 6] = ["genus", "nu", "singularities", "area", "cell", "time"];

fn suspend(spec: &Path, tau: &Path) -> anyhow::Result<Output> {
    let t = read_iem(spec)?;
    let s = Suspension::new(&t, read_tau(tau, t.combo())?)?;
    Ok(Output::new("suspend", suspension_json(&s)?)?.table(SUSPENSION_HEADER.to_vec(), vec![suspension_row(&s)?]))
}

fn flow(spec: &Path, tau: &Path, t: f64, steps: usize) -> anyhow::Result<Output> {
    let it = read_iem(spec)?;
    let mut s = Suspension::new(&it, read_tau(tau, it.combo())?)?.flow(t)?;
    let mut path = vec![suspension_json(&s)?];
    let mut rows = vec![suspension_row(&s)?];
    for _ in 0..steps {
        s = s.normalized_step()?;
        path.push(suspension_json(&s)?);
        rows.push(suspension_row(&s)?);
    }
    Ok(Output::new("flow", path)?.table(SUSPENSION_HEADER.to_vec(), rows))
}

fn family(which: &Family) -> anyhow::Result<Output> {
    let th = Thresholds::default();
    match which {
        Family::A { n, loops, ns } => {
            let ns = ns.clone().unwrap_or_else(|| vec![*n; *loops]);
            if ns.is_empty() || ns.contains(&0) {
                bail!(Error::Invalid("loop counts must be positive".into()));
            }
            let r = appendix_a(&ns, &th)?;
            let rows = r.criterion.iter().enumerate().map(|(k, c)| vec![(k + 1).to_string(), c.to_string()]).collect();
            Ok(Output::new("family-a", &r)?.table(vec!["k", "criterion"], rows))
        }
        Family::B { n0, k } => {
            if *k == 0 {
                bail!(Error::Invalid("k must be positive".into()));
            }
            let r = appendix_b(*n0, *k, &th)?;
            let rows = r.growth.iter().map(|(k, g)| vec![k.to_string(), g.to_string()]).collect();
            Ok(Output::new("family-b", &r)?.table(vec!["k", "growth"], rows))
        }
    }
}

fn q47_table(rows: &[Q47Row]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![r.sample.clone(), r.k.to_string(), r.z_norm.to_string(), r.q_norm.to_string(), r.c_hat.to_string()]
        })
        .collect()
}

const Q47_HEADER: [&str; 5] = ["sample", "k", "Znorm", "Qnorm", "C_hat"];

fn run(cli: &Cli) -> anyhow::Result<Output> {
    let config = |top: &str, bottom: &str, samples: usize, depth: usize| McConfig {
        seed: cli.seed,
        precision: cli.precision,
        ..McConfig::new(top, bottom, samples, depth)
    };
    if cli.precision == 0 {
        bail!(Error::Invalid("precision must be at least one bit".into()));
    }
    match &cli.cmd {
        Cmd::Diagram { base, reduced } => diagram(base, *reduced),
        Cmd::Orbit { spec, steps } => orbit(spec, *steps),
        Cmd::Accel { spec, steps, d_accel } => accel(spec, *steps, *d_accel),
        Cmd::Roth { spec, steps } => roth(spec, *steps),
        Cmd::Solve { spec, phi, depth, levels, samples } => solve(spec, phi, *depth, *levels, *samples),
        Cmd::Suspend { spec, tau } => suspend(spec, tau),
        Cmd::Flow { spec, tau, t, normalized_steps } => flow(spec, tau, *t, *normalized_steps),
        Cmd::Family { which } => family(which),
        Cmd::Mc { top, bottom, samples, depth, lyapunov, tail_from, tail_to } => {
            let cfg = config(top, bottom, *samples, *depth);
            if *lyapunov {
                let r = mc_lyapunov(&cfg, (*tail_from, *tail_to))?;
                let rows = r
                    .records
                    .iter()
                    .map(|x| {
                        vec![
                            x.sample.to_string(),
                            serde_json::to_value(x.status)
                                .map(|v| v.as_str().unwrap_or_default().to_string())
                                .unwrap_or_default(),
                            opt(x.top),
                            opt(x.second),
                            opt(x.gap),
                        ]
                    })
                    .collect();
                Ok(Output::new("mc-lyapunov", &r)?.table(vec!["sample", "status", "top", "second", "gap"], rows))
            } else {
                let r = mc_full_measure(&cfg)?;
                let flag = |b: Option<bool>| b.map(|v| v.to_string()).unwrap_or_default();
                let rows = r
                    .records
                    .iter()
                    .map(|x| {
                        vec![
                            x.sample.to_string(),
                            serde_json::to_value(x.status)
                                .map(|v| v.as_str().unwrap_or_default().to_string())
                                .unwrap_or_default(),
                            opt(x.a_fit),
                            opt(x.theta_fit),
                            flag(x.a),
                            flag(x.b),
                            flag(x.c),
                        ]
                    })
                    .collect();
                Ok(Output::new("mc", &r)?.table(vec!["sample", "status", "a_fit", "theta_fit", "a", "b", "c"], rows))
            }
        }
        Cmd::ProbeQ47 { top, bottom, samples, depth, family_b } => match family_b {
            Some(n0) => {
                let rows = probe_q47_family_b(*n0, *depth)?;
                let table = q47_table(&rows);
                Ok(Output::new("probe-q47", json!({ "label": "exploratory", "rows": rows }))?
                    .table(Q47_HEADER.to_vec(), table))
            }
            None => {
                let r = probe_q47(&config(top, bottom, *samples, *depth))?;
                let table = q47_table(&r.rows);
                Ok(Output::new("probe-q47", &r)?.table(Q47_HEADER.to_vec(), table))
            }
        },
    }
}

fn csv_bytes(t: &Table) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

fn emit(cli: &Cli, out: &Output) -> anyhow::Result<()> {
    let mut json = serde_json::to_vec_pretty(&out.json)?;
    json.push(b'\n');
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(format!("{}.json", out.name)), &json)?;
        if let Some(t) = &out.table {
            fs::write(dir.join(format!("{}.csv", out.name)), csv_bytes(t)?)?;
        }
        return Ok(());
    }
    let bytes = match cli.format {
        Format::Json => json,
        Format::Csv => {
            let t = out.table.as_ref().ok_or_else(|| Error::Invalid(format!("{} has no CSV form", out.name)))?;
            csv_bytes(t)?
        }
    };
    std::io::stdout().lock().write_all(&bytes)?;
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Connexion(_)) => EXIT_CONNEXION,
        Some(Error::SeriesDiverging(_)) => EXIT_DIVERGING,
        _ => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|out| emit(&cli, &out).map(|_| out.code)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
