//! Finite-horizon diagnostics for the three Roth conditions.
//!
//! Verdicts use least-squares tail slopes over the second half of the horizon;
//! the raw per-level ratios and their tail sups are reported alongside.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::accel::AccelOrbit;
use crate::error::{Error, Result};
use crate::linalg::{column, frobenius, int_scaled, inverse, scaled_f64, svd, FMat};
use crate::matrix::IntMatrix;
use crate::num::{from_f64, ls_slope, to_f64, Q};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub a: f64,
    pub theta: f64,
    pub c: f64,
    pub sigma0: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { a: 0.25, theta: 0.05, c: 0.25, sigma0: 0.1 }
    }
}

/// ᵗQ(k,l): the special Birkhoff sum operator on piecewise constant functions.
pub fn gamma_cocycle(a: &AccelOrbit, k: usize, l: usize) -> Result<IntMatrix> {
    Ok(a.q(k, l)?.transpose())
}

/// I_k(v) = Σ λ_α⁽ᵏ⁾ v_α
pub fn mean_form(lambda: &[Q], v: &[Q]) -> Q {
    lambda.iter().zip(v).fold(Q::zero(), |s, (l, x)| s + l * x)
}

fn ln_norm(m: &IntMatrix) -> f64 {
    m.ln_sum_norm()
}

/// Slope over the second half of the index range, as (x, y) pairs.
fn tail_fit(pts: &[(f64, f64)]) -> f64 {
    let h = &pts[pts.len() / 2..];
    let (x, y): (Vec<f64>, Vec<f64>) = h.iter().copied().unzip();
    ls_slope(&x, &y)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionA {
    /// a_ratio(k) = log‖Z(k+1)‖₁ / log‖Q(k)‖₁ for k = 0..K−1.
    pub ratios: Vec<f64>,
    pub tail_sup: f64,
    pub fit_exponent: f64,
    pub consistent: bool,
}

pub fn condition_a(a: &AccelOrbit, th: &Thresholds) -> Result<ConditionA> {
    let kk = a.levels();
    if kk < 3 {
        return Err(Error::InsufficientOrbit);
    }
    let pts: Vec<(f64, f64)> = (0..kk).map(|k| (ln_norm(a.q0(k)), ln_norm(a.z(k + 1)))).collect();
    let ratios: Vec<f64> = pts.iter().map(|(x, y)| y / x).collect();
    let tail_sup = ratios[kk / 2..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // blocks of one loop can alternate between large and small; fit the running max over d−1 levels
    let w = a.d().saturating_sub(1).max(1);
    let windowed: Vec<(f64, f64)> = (0..kk)
        .map(|k| (pts[k].0, pts[k + 1 - w.min(k + 1)..=k].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    let fit_exponent = tail_fit(&windowed);
    Ok(ConditionA { ratios, tail_sup, fit_exponent, consistent: fit_exponent < th.a })
}

/// Exact basis w_i = λ_j e_i − λ_i e_j (i ≠ j) of the hyperplane Γ_*.
fn hyperplane_basis(lambda: &[Q]) -> Vec<Vec<Q>> {
    let d = lambda.len();
    let j = (0..d).max_by(|&x, &y| lambda[x].cmp(&lambda[y])).unwrap();
    (0..d)
        .filter(|&i| i != j)
        .map(|i| {
            let mut w = vec![Q::zero(); d];
            w[i] = lambda[j].clone();
            w[j] = -lambda[i].clone();
            w
        })
        .collect()
}

/// Operator norm (Euclidean) of ᵗQ(0,k) restricted to Γ⁽⁰⁾_*, returned as a natural log.
pub fn ln_restricted_norm(a: &AccelOrbit, k: usize) -> Result<f64> {
    let lambda = a.lambda(0).ok_or_else(|| Error::Invalid("condition (b) needs lengths".into()))?;
    let d = lambda.len();
    let w = hyperplane_basis(&lambda);
    let qt = a.q0(k).transpose();
    let img: Vec<Vec<Q>> = w.iter().map(|c| qt.mul_vec_q(c)).collect();
    // columns of QᵀW, stored row-major
    let mut entries = Vec::with_capacity(d * (d - 1));
    for r in 0..d {
        for c in &img {
            entries.push(c[r].clone());
        }
    }
    let (m, e) = scaled_f64(d, d - 1, &entries);
    let wf = FMat::from_fn(d, d - 1, |r, c| to_f64(&w[c][r]));
    // W = U R with U orthonormal, so QᵀU = (QᵀW) R⁻¹
    let r = wf.qr().thin_R().to_owned();
    let (s, _, _) = svd(&(m * inverse(&r)));
    Ok(s[0].ln() + e as f64 * std::f64::consts::LN_2)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionB {
    /// θ̂(k) for k = 1..K.
    pub theta: Vec<f64>,
    pub tail_min: f64,
    pub fit_theta: f64,
    pub consistent: bool,
}

pub fn condition_b(a: &AccelOrbit, th: &Thresholds) -> Result<ConditionB> {
    let kk = a.levels();
    if kk < 2 {
        return Err(Error::InsufficientOrbit);
    }
    let mut pts = Vec::new();
    let mut theta = Vec::new();
    for k in 1..=kk {
        let lq = ln_norm(a.q0(k));
        let ln = ln_restricted_norm(a, k)?.max(0.0);
        theta.push(1.0 - ln / lq);
        pts.push((lq, ln));
    }
    let tail_min = theta[theta.len() / 2..].iter().copied().fold(f64::INFINITY, f64::min);
    let fit_theta = 1.0 - tail_fit(&pts);
    Ok(ConditionB { theta, tail_min, fit_theta, consistent: fit_theta > th.theta })
}

/// Orthonormal stable bases per level 0..=L, as columns.
#[derive(Clone, Debug)]
pub struct StableSpaces {
    pub horizon: usize,
    pub dim: usize,
    pub bases: Vec<FMat>,
    /// Orthonormal complements.
    pub complements: Vec<FMat>,
    /// Growth exponents of Q(0,L)⁻ᵀ along the frame, as natural logs, nonincreasing in practice.
    pub ln_singular_values: Vec<f64>,
    // per step j: R_j with Z(j+1)⁻ᵀ F_{j+1} = F_j R_j (R scaled by 2^{-e_j}), and e_j·ln 2
    steps: Vec<(FMat, f64)>,
    step_residual: Vec<f64>,
}

fn generic_frame(d: usize) -> FMat {
    let g = FMat::from_fn(d, d, |i, j| {
        let x = ((i * d + j + 1) as f64 * 0.754_877_666_246_692_8).fract() - 0.5;
        if i == j {
            x + 1.0
        } else {
            x
        }
    });
    g.qr().compute_thin_Q()
}

/// ln of the spectral norm of a product of small matrices, renormalizing as it goes.
fn ln_product_norm<'a>(mats: impl Iterator<Item = FMat>) -> f64 {
    let mut acc: Option<FMat> = None;
    let mut ln = 0.0;
    for m in mats {
        let p = match acc {
            None => m,
            Some(a) => a * m,
        };
        let n = frobenius(&p);
        ln += n.ln();
        acc = Some(p / faer::Scale(n));
    }
    match acc {
        None => 0.0,
        Some(a) => ln + svd(&a).0[0].ln(),
    }
}

/// Finite-horizon surrogate for Γ_s at every level k ≤ L: span of Q(k,L)⁻ᵀ applied to a
/// generic frame, obtained by backward QR iteration so that small directions stay resolved.
/// The dimension keeps the directions growing at least like ‖Q(L)‖₁^σ₀ under Q(0,L)⁻ᵀ.
pub fn stable_spaces(a: &AccelOrbit, horizon: usize, sigma0: f64) -> Result<StableSpaces> {
    if horizon > a.levels() || horizon == 0 {
        return Err(Error::Range(0, horizon));
    }
    let d = a.d();
    let mut f = generic_frame(d);
    let mut frames = vec![f.clone()];
    let mut steps = Vec::with_capacity(horizon);
    let mut growth = vec![0.0; d];
    for j in (0..horizon).rev() {
        let (m, e) = int_scaled(&a.z(j + 1).inverse_unimodular().transpose());
        let shift = e as f64 * std::f64::consts::LN_2;
        let qr = (m * &f).qr();
        let r = qr.thin_R().to_owned();
        f = qr.compute_thin_Q();
        for (i, g) in growth.iter_mut().enumerate() {
            *g += r[(i, i)].abs().ln() + shift;
        }
        frames.push(f.clone());
        steps.push((r, shift));
    }
    frames.reverse();
    steps.reverse();
    let cut = sigma0 * ln_norm(a.q0(horizon));
    let dim = growth.iter().filter(|&&x| x >= cut).count();
    if dim == 0 || dim == d {
        return Err(Error::EmptyStable);
    }
    let bases: Vec<FMat> = frames.iter().map(|f| f.subcols(0, dim).to_owned()).collect();
    let complements: Vec<FMat> = frames.iter().map(|f| f.subcols(dim, d - dim).to_owned()).collect();
    let step_residual = (0..horizon).map(|j| invariance_defect(a.z(j + 1), &bases[j], &complements[j + 1])).collect();
    Ok(StableSpaces { horizon, dim, bases, complements, ln_singular_values: growth, steps, step_residual })
}

impl StableSpaces {
    /// The w ⊥ Γs⁽⁰⁾ with ᵗQ(0,l)·w ≡ v mod Γs⁽ˡ⁾.
    pub fn pull_back(&self, l: usize, v: &[f64]) -> Result<Vec<f64>> {
        if l > self.horizon {
            return Err(Error::Range(0, l));
        }
        let s = self.dim;
        let d = v.len();
        let mut w = self.complements[l].transpose() * column(v);
        let mut shift = 0.0;
        for (r, e) in self.steps[..l].iter().rev() {
            w = r.submatrix(s, s, d - s, d - s) * &w;
            shift += e;
        }
        let out = &self.complements[0] * w * faer::Scale(shift.exp());
        Ok((0..d).map(|i| out[(i, 0)]).collect())
    }

    /// Removes the Γs⁽ᵏ⁾ component of v.
    pub fn project_off(&self, k: usize, v: &[f64]) -> Vec<f64> {
        let c = &self.complements[k];
        let out = c * (c.transpose() * column(v));
        (0..v.len()).map(|i| out[(i, 0)]).collect()
    }
}

/// ‖C_{j+1}ᵀ Zᵀ B_j‖ / ‖Zᵀ B_j‖ with the product taken exactly on the float basis.
fn invariance_defect(z: &IntMatrix, b: &FMat, c_next: &FMat) -> f64 {
    let zt = z.transpose();
    let (d, s) = (b.nrows(), b.ncols());
    let cols: Vec<Vec<Q>> =
        (0..s).map(|c| zt.mul_vec_q(&(0..d).map(|r| from_f64(b[(r, c)])).collect::<Vec<_>>())).collect();
    let entries: Vec<Q> = (0..d).flat_map(|r| cols.iter().map(move |c| c[r].clone())).collect();
    let (img, _) = scaled_f64(d, s, &entries);
    let n = frobenius(&img);
    if n > 0.0 {
        frobenius(&(c_next.transpose() * &img)) / n
    } else {
        0.0
    }
}

pub fn qt_f64(a: &AccelOrbit, k: usize, l: usize) -> Result<(FMat, i64)> {
    Ok(int_scaled(&a.q(k, l)?.transpose()))
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientNorms {
    pub k: usize,
    pub l: usize,
    /// ln‖S_♭(k,l)⁻¹‖
    pub ln_inv_quotient: f64,
    /// ln‖S(k,l)|Γs‖
    pub ln_stable: f64,
    /// Relative size of the image of Γs⁽ʲ⁾ outside Γs⁽ʲ⁺¹⁾, worst step j in [k,l).
    pub residual: f64,
}

/// In the level frames ᵗZ(j+1) acts as R_j⁻¹, which is block upper triangular, so the
/// quotient and the restriction are products of diagonal blocks.
pub fn quotient_norms(_a: &AccelOrbit, sp: &StableSpaces, k: usize, l: usize) -> Result<QuotientNorms> {
    if k > l || l > sp.horizon {
        return Err(Error::Range(k, l));
    }
    if k == l {
        return Ok(QuotientNorms { k, l, ln_inv_quotient: 0.0, ln_stable: 0.0, residual: 0.0 });
    }
    let s = sp.dim;
    let c = sp.bases[0].nrows() - s;
    let shift: f64 = sp.steps[k..l].iter().map(|x| x.1).sum();
    let ln_inv_quotient =
        ln_product_norm(sp.steps[k..l].iter().map(|(r, _)| r.submatrix(s, s, c, c).to_owned())) + shift;
    let ln_stable =
        ln_product_norm(sp.steps[k..l].iter().rev().map(|(r, _)| inverse(&r.submatrix(0, 0, s, s).to_owned()))) - shift;
    let residual = sp.step_residual[k..l].iter().copied().fold(0.0, f64::max);
    Ok(QuotientNorms { k, l, ln_inv_quotient, ln_stable, residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionC {
    pub stable_dim: usize,
    pub horizon: usize,
    pub pairs: Vec<QuotientNorms>,
    pub fit_inv_quotient: f64,
    pub fit_stable: f64,
    pub max_residual: f64,
    pub consistent: bool,
}

/// Pairs (k,l) with 0 ≤ k < l ≤ 3L/4, where the stable spaces are still well resolved.
/// For each l the worst k is fitted against log‖Q(l)‖₁ over the second half.
pub fn condition_c(a: &AccelOrbit, sp: &StableSpaces, th: &Thresholds) -> Result<ConditionC> {
    let top = (3 * sp.horizon) / 4;
    if top < 2 {
        return Err(Error::InsufficientOrbit);
    }
    let mut pairs = Vec::new();
    let mut inv_pts = Vec::new();
    let mut st_pts = Vec::new();
    for l in 1..=top {
        let mut worst = (0.0f64, 0.0f64);
        for k in 0..l {
            let qn = quotient_norms(a, sp, k, l)?;
            worst.0 = worst.0.max(qn.ln_inv_quotient);
            worst.1 = worst.1.max(qn.ln_stable);
            pairs.push(qn);
        }
        let x = ln_norm(a.q0(l));
        inv_pts.push((x, worst.0));
        st_pts.push((x, worst.1));
    }
    let fit_inv_quotient = tail_fit(&inv_pts);
    let fit_stable = tail_fit(&st_pts);
    let max_residual = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    Ok(ConditionC {
        stable_dim: sp.dim,
        horizon: sp.horizon,
        consistent: fit_inv_quotient < th.c && fit_stable < th.c,
        pairs,
        fit_inv_quotient,
        fit_stable,
        max_residual,
    })
}

/// Angle between δ⁽⁰⁾ and the level-0 stable span, in radians.
pub fn delta_angle(a: &AccelOrbit, sp: &StableSpaces) -> Option<f64> {
    let l = a.lambda(0)?;
    let delta = a.vertex(0).omega().mul_vec_q(&l);
    let v = column(&delta.iter().map(to_f64).collect::<Vec<_>>());
    let b = &sp.bases[0];
    let off = &v - b * (b.transpose() * &v);
    Some((frobenius(&off) / frobenius(&v)).min(1.0).asin())
}

#[derive(Clone, Debug, Serialize)]
pub struct BalancePoint {
    pub k: usize,
    pub ratio: f64,
    pub exponent: f64,
    /// ε with Min_{αβ} Q_{αβ}(k) = ‖Q(k)‖₁^{1−ε}; Remark-1 probe.
    pub min_entry_eps: f64,
}

pub fn balance_series(a: &AccelOrbit) -> Vec<BalancePoint> {
    (1..=a.levels())
        .filter_map(|k| {
            let l = a.lambda(k)?;
            let max = l.iter().max()?;
            let min = l.iter().min()?;
            let r = to_f64(&(max / min));
            let lq = ln_norm(a.q0(k));
            let me = a.q0(k).min_entry();
            let eps = if me.is_positive() { 1.0 - crate::num::ln_big(&me) / lq } else { f64::INFINITY };
            Some(BalancePoint { k, ratio: r, exponent: r.ln() / lq, min_entry_eps: eps })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdicts {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RothDiagnostics {
    pub levels: usize,
    pub a: ConditionA,
    pub theta: ConditionB,
    pub c: Option<ConditionC>,
    pub c_error: Option<String>,
    pub balance: Vec<BalancePoint>,
    pub verdicts: Verdicts,
}

/// All three diagnostics on one accelerated orbit (lengths required for (b) and (c)).
pub fn diagnose(a: &AccelOrbit, th: &Thresholds) -> Result<RothDiagnostics> {
    let ca = condition_a(a, th)?;
    let cb = condition_b(a, th)?;
    let (c, c_error) = match stable_spaces(a, a.levels(), th.sigma0).and_then(|sp| condition_c(a, &sp, th)) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let verdicts = Verdicts { a: ca.consistent, b: cb.consistent, c: c.as_ref().is_some_and(|c| c.consistent) };
    Ok(RothDiagnostics { levels: a.levels(), a: ca, theta: cb, c, c_error, balance: balance_series(a), verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::{accelerate, accelerate_iem};
    use crate::iem::{lengths_from_ints, CombinatorialData, Iem};
    use crate::num::{q, qi};
    use crate::rauzy::{parse_name_word, path_by_runs};

    fn family_a(n: u64, loops: usize) -> AccelOrbit {
        let c = CombinatorialData::from_words("ABCD", "DCBA").unwrap();
        let word = format!("D2CDA2B{n}A").repeat(loops);
        let o = path_by_runs(&c, &parse_name_word(&word).unwrap()).unwrap();
        accelerate(&o, 3).unwrap().with_proxy_lengths().unwrap()
    }

    fn golden(levels: usize) -> AccelOrbit {
        let c = CombinatorialData::from_words("AB", "BA").unwrap();
        let o = path_by_runs(&c, &vec![("A", 1u64), ("B", 1)].repeat(levels / 2 + 1)).unwrap();
        accelerate(&o, 1).unwrap().with_proxy_lengths().unwrap()
    }

    #[test]
    fn gamma_cocycle_preserves_mean_form() {
        let c = CombinatorialData::from_words("ABCD", "DCBA").unwrap();
        let t = Iem::new(c, lengths_from_ints(&[977, 1213, 1517, 1873], 5580)).unwrap();
        let a = accelerate_iem(&t, 3, 5, 10_000).unwrap();
        let l = a.levels();
        let g = gamma_cocycle(&a, 0, l).unwrap();
        for i in 0..20i64 {
            let v: Vec<Q> = (0..4).map(|j| q((i * 7 + j * 13) % 11 - 5, 1 + j)).collect();
            assert_eq!(mean_form(&a.lambda(l).unwrap(), &g.mul_vec_q(&v)), mean_form(&a.lambda(0).unwrap(), &v));
        }
        assert_eq!(gamma_cocycle(&a, 2, 2).unwrap(), IntMatrix::identity(4));
    }

    #[test]
    fn golden_theta_is_one_and_stable_is_delta() {
        let a = golden(24);
        let th = Thresholds::default();
        let b = condition_b(&a, &th).unwrap();
        assert!(b.theta.iter().skip(2).all(|t| (t - 1.0).abs() < 1e-9), "{:?}", b.theta);
        let sp = stable_spaces(&a, a.levels(), 0.1).unwrap();
        assert_eq!(sp.dim, 1);
        assert!(delta_angle(&a, &sp).unwrap() < 1e-6);
    }

    #[test]
    fn constant_family_is_roth_consistent() {
        let a = family_a(5, 30);
        let r = diagnose(&a, &Thresholds::default()).unwrap();
        assert!(
            r.verdicts.a && r.verdicts.b && r.verdicts.c,
            "{:?}",
            (r.a.fit_exponent, r.theta.fit_theta, r.c.as_ref().map(|c| (c.fit_inv_quotient, c.fit_stable)))
        );
        let c = r.c.unwrap();
        assert_eq!(c.stable_dim, 2);
        let sp = stable_spaces(&a, a.levels(), 0.1).unwrap();
        assert!(delta_angle(&a, &sp).unwrap() < 1e-6);
        // θ̂ limit 1 − log λ_u⁻ / log λ_u⁺
        let n = 5.0f64;
        let root = |u: f64| (u + (u * u - 4.0).sqrt()) / 2.0;
        let up = root((n + 6.0 + (n * n + 4.0).sqrt()) / 2.0);
        let um = root((n + 6.0 - (n * n + 4.0).sqrt()) / 2.0);
        let want = 1.0 - um.ln() / up.ln();
        assert!((r.theta.fit_theta - want).abs() < 0.02, "{} vs {want}", r.theta.fit_theta);
    }

    #[test]
    fn stable_basis_is_orthonormal_and_in_hyperplane() {
        let a = family_a(6, 20);
        let sp = stable_spaces(&a, a.levels(), 0.1).unwrap();
        let b = &sp.bases[0];
        assert!(frobenius(&(b.transpose() * b - FMat::identity(2, 2))) < 1e-10);
        let l: Vec<f64> = a.lambda(0).unwrap().iter().map(to_f64).collect();
        for j in 0..b.ncols() {
            let m: f64 = (0..4).map(|i| b[(i, j)] * l[i]).sum();
            assert!(m.abs() < 1e-8);
        }
        // push-forward norm equals the direct restricted norm
        let (qt, e) = qt_f64(&a, 0, 8).unwrap();
        let (s, _, _) = svd(&(qt * b));
        let direct = quotient_norms(&a, &sp, 0, 8).unwrap().ln_stable;
        assert!((s[0].ln() + e as f64 * std::f64::consts::LN_2 - direct).abs() < 1e-8);
        let same = quotient_norms(&a, &sp, 3, 3).unwrap();
        assert_eq!((same.ln_inv_quotient, same.ln_stable), (0.0, 0.0));
    }

    #[test]
    fn random_orbit_quotient_is_finite_with_small_residual() {
        let c = CombinatorialData::from_words("ABCD", "DCBA").unwrap();
        let l = lengths_from_ints(&[314159265358979, 271828182845904, 161803398874989, 141421356237309], 1 << 50);
        let a = accelerate_iem(&Iem::new(c, l).unwrap(), 3, 14, 100_000).unwrap();
        let sp = stable_spaces(&a, a.levels(), 0.1).unwrap();
        let qn = quotient_norms(&a, &sp, 0, 10).unwrap();
        assert!(qn.ln_inv_quotient.is_finite() && qn.ln_stable.is_finite());
        assert!(qn.residual < 1e-8, "{qn:?}");
    }

    #[test]
    fn doubly_exponential_family_fails_a() {
        let c = CombinatorialData::from_words("ABCD", "DCBA").unwrap();
        let runs: Vec<(String, u64)> = (1..=5u32)
            .flat_map(|i| {
                let mut w = parse_name_word("D2CDA2").unwrap();
                w.push(("B".into(), 1u64 << (1u32 << i)));
                w.push(("A".into(), 1));
                w
            })
            .collect();
        let a = accelerate(&path_by_runs(&c, &runs).unwrap(), 3).unwrap();
        let ca = condition_a(&a, &Thresholds::default()).unwrap();
        assert!(!ca.consistent, "{ca:?}");
    }

    #[test]
    fn diagnostics_are_scale_invariant() {
        let c = CombinatorialData::from_words("ABCD", "DCBA").unwrap();
        let l = lengths_from_ints(&[314159265358979, 271828182845904, 161803398874989, 141421356237309], 1 << 50);
        let t = Iem::new(c, l).unwrap();
        let a = accelerate_iem(&t, 3, 8, 100_000).unwrap();
        let b = accelerate_iem(&t.scaled(&qi(7)), 3, 8, 100_000).unwrap();
        let th = Thresholds::default();
        assert_eq!(condition_a(&a, &th).unwrap().ratios, condition_a(&b, &th).unwrap().ratios);
        let (ta, tb) = (condition_b(&a, &th).unwrap().theta, condition_b(&b, &th).unwrap().theta);
        for (x, y) in ta.iter().zip(&tb) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
