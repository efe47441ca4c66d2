//! Fixed inputs shared by the benchmarks.

use iet_core::accel::{accelerate_iem, AccelOrbit};
use iet_core::birkhoff::{PiecewiseBV, Poly};
use iet_core::iem::lengths_from_ints;
use iet_core::{CombinatorialData, Iem};

/// Reversal on d letters with lengths taken from the digits of π.
pub fn reversal_iem(d: usize) -> Iem {
    const DIGITS: [i64; 8] = [314159265, 358979323, 846264338, 327950288, 419716939, 937510582, 97494459, 230781640];
    let top: String = (b'A'..).take(d).map(char::from).collect();
    let bottom: String = top.chars().rev().collect();
    let c = CombinatorialData::from_words(&top, &bottom).expect("letters");
    let total: i64 = DIGITS[..d].iter().sum();
    Iem::new(c, lengths_from_ints(&DIGITS[..d], total)).expect("positive lengths")
}

pub fn reversal_orbit(d: usize, levels: usize) -> AccelOrbit {
    accelerate_iem(&reversal_iem(d), d - 1, levels, 1_000_000).expect("orbit")
}

/// Φ(x) = x − 1/2 on every interval.
pub fn sawtooth(a: &AccelOrbit) -> PiecewiseBV {
    let lam = a.lambda(0).expect("length-driven");
    let polys = lam.iter().map(|_| Poly::from_ints(&[0, 1]).sub(&Poly::constant(iet_core::num::q(1, 2)))).collect();
    PiecewiseBV::from_polys(&lam, polys)
}
