//! Suspension data (λ, τ), the surface they build, the induction on suspensions and the
//! Teichmüller flow.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{ConnexionHalt, Error, Result};
use crate::iem::{CombinatorialData, Iem};
use crate::num::{fmt_q, from_f64, sum, to_f64, Q};
use crate::rauzy::{inverse_step_combo, step_combo};

/// Length and suspension data on fixed combinatorics, with the accumulated Teichmüller time.
#[derive(Clone, Debug, PartialEq)]
pub struct Suspension {
    combo: CombinatorialData,
    lambda: Vec<Q>,
    tau: Vec<Q>,
    /// Σ t over applied flows: λ has been scaled by e^{t/2} in total.
    time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZorichCell {
    Zero,
    One,
    /// λ_{α₀} = λ_{α₁} or Im ξ⁰_{α₀} = 0.
    Boundary,
    Outside,
}

impl Suspension {
    /// Checks the suspension inequalities exactly.
    pub fn new(iem: &Iem, tau: Vec<Q>) -> Result<Self> {
        if tau.len() != iem.d() {
            return Err(Error::Invalid(format!("τ has {} entries for d = {}", tau.len(), iem.d())));
        }
        let s = Suspension { combo: iem.combo().clone(), lambda: iem.lengths().to_vec(), tau, time: 0.0 };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        let c = &self.combo;
        for eps in 0..2 {
            let im = self.im_xi(eps);
            let skip = c.last(eps);
            for a in (0..c.d()).filter(|&a| a != skip) {
                let ok = if eps == 0 { im[a].is_positive() } else { im[a].is_negative() };
                if !ok {
                    let rel = if eps == 0 { "> 0" } else { "< 0" };
                    return Err(Error::InvalidSuspension(format!(
                        "Im ξ{}_{} = {} violates {rel}",
                        eps,
                        c.name(a),
                        fmt_q(&im[a])
                    )));
                }
            }
        }
        if let Some(a) = self.h().iter().position(|x| !x.is_positive()) {
            return Err(Error::InvalidSuspension(format!("h_{} ≤ 0", c.name(a))));
        }
        Ok(())
    }

    pub fn combo(&self) -> &CombinatorialData {
        &self.combo
    }

    pub fn lambda(&self) -> &[Q] {
        &self.lambda
    }

    pub fn tau(&self) -> &[Q] {
        &self.tau
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn iem(&self) -> Iem {
        Iem::new(self.combo.clone(), self.lambda.clone()).expect("lengths stay positive")
    }

    fn partial(&self, v: &[Q], eps: usize) -> Vec<Q> {
        let pi = self.combo.pi(eps);
        (0..self.combo.d())
            .map(|a| (0..self.combo.d()).filter(|&b| pi[b] <= pi[a]).fold(Q::zero(), |s, b| s + &v[b]))
            .collect()
    }

    /// Re ξ^ε_α.
    pub fn re_xi(&self, eps: usize) -> Vec<Q> {
        self.partial(&self.lambda, eps)
    }

    /// Im ξ^ε_α.
    pub fn im_xi(&self, eps: usize) -> Vec<Q> {
        self.partial(&self.tau, eps)
    }

    /// θ = Ωζ as (Re, Im); Re θ = δ.
    pub fn theta(&self) -> (Vec<Q>, Vec<Q>) {
        let om = self.combo.omega();
        (om.mul_vec_q(&self.lambda), om.mul_vec_q(&self.tau))
    }

    /// h = −Ωτ.
    pub fn h(&self) -> Vec<Q> {
        self.combo.omega().mul_vec_q(&self.tau).into_iter().map(|x| -x).collect()
    }

    /// A = Σ λ_α h_α.
    pub fn area(&self) -> Q {
        self.lambda.iter().zip(self.h()).fold(Q::zero(), |s, (l, h)| s + l * h)
    }

    fn connexion(&self) -> Error {
        Error::Connexion(ConnexionHalt {
            step: 0,
            alpha: self.combo.name(self.combo.last(0)).to_string(),
            beta: self.combo.name(self.combo.last(1)).to_string(),
        })
    }

    /// Type of the next basic step, from the lengths of the two last symbols.
    pub fn step_type(&self) -> Result<usize> {
        let (a0, a1) = (self.combo.last(0), self.combo.last(1));
        match self.lambda[a0].cmp(&self.lambda[a1]) {
            std::cmp::Ordering::Greater => Ok(0),
            std::cmp::Ordering::Less => Ok(1),
            std::cmp::Ordering::Equal => Err(self.connexion()),
        }
    }

    /// ζ̂_{α_ε} = ζ_{α_ε} − ζ_{α_{1−ε}}. Returns the step type with the new data.
    pub fn step(&self) -> Result<(Suspension, usize)> {
        let eps = self.step_type()?;
        let (combo, win, lose) = step_combo(&self.combo, eps);
        let mut out = Suspension { combo, ..self.clone() };
        out.lambda[win] = &self.lambda[win] - &self.lambda[lose];
        out.tau[win] = &self.tau[win] - &self.tau[lose];
        debug_assert!(out.check().is_ok());
        Ok((out, eps))
    }

    /// Undoes the last basic step; its type is read off the sign of Im ξ⁰_{α₀}.
    pub fn inverse_step(&self) -> Result<(Suspension, usize)> {
        let im = &self.im_xi(0)[self.combo.last(0)];
        let eps = if im.is_negative() {
            0
        } else if im.is_positive() {
            1
        } else {
            return Err(Error::InvalidSuspension("Im ξ⁰_{α₀} = 0: the inverse step is undefined".into()));
        };
        let (combo, win, lose) = inverse_step_combo(&self.combo, eps);
        let mut out = Suspension { combo, ..self.clone() };
        out.lambda[win] = &self.lambda[win] + &self.lambda[lose];
        out.tau[win] = &self.tau[win] + &self.tau[lose];
        Ok((out, eps))
    }

    pub fn cell(&self) -> ZorichCell {
        let (a0, a1) = (self.combo.last(0), self.combo.last(1));
        let im = &self.im_xi(0)[a0];
        if self.lambda[a0] == self.lambda[a1] || im.is_zero() {
            return ZorichCell::Boundary;
        }
        match (self.lambda[a0] > self.lambda[a1], im.is_positive()) {
            (true, true) => ZorichCell::Zero,
            (false, false) => ZorichCell::One,
            _ => ZorichCell::Outside,
        }
    }

    /// First return to 𝒵 under basic steps (at least one step). Returns the step count.
    pub fn zorich_step(&self) -> Result<(Suspension, usize)> {
        let mut s = self.step()?.0;
        let mut n = 1;
        while !matches!(s.cell(), ZorichCell::Zero | ZorichCell::One) {
            s = s.step()?.0;
            n += 1;
        }
        Ok((s, n))
    }

    /// U with e^{t/2} = factor: λ ↦ factor·λ, τ ↦ τ/factor.
    pub fn flow_by_factor(&self, factor: &Q) -> Result<Suspension> {
        if !factor.is_positive() {
            return Err(Error::Invalid("flow factor must be positive".into()));
        }
        Ok(Suspension {
            combo: self.combo.clone(),
            lambda: self.lambda.iter().map(|x| x * factor).collect(),
            tau: self.tau.iter().map(|x| x / factor).collect(),
            time: self.time + 2.0 * to_f64(factor).ln(),
        })
    }

    /// Uᵗ, with e^{t/2} rounded to the nearest double and then applied exactly.
    pub fn flow(&self, t: f64) -> Result<Suspension> {
        if !t.is_finite() {
            return Err(Error::Invalid("t must be finite".into()));
        }
        let mut s = self.flow_by_factor(&from_f64((t / 2.0).exp()))?;
        s.time = self.time + t;
        Ok(s)
    }

    /// λ̂** = λ* − λ_{α_{1−ε}}: total length after the next basic step.
    pub fn next_total(&self) -> Result<Q> {
        let eps = self.step_type()?;
        Ok(sum(&self.lambda) - &self.lambda[self.combo.last(1 - eps)])
    }

    /// Ḡ: the Zorich step followed by the flow that restores λ̂**.
    pub fn normalized_step(&self) -> Result<Suspension> {
        let before = self.next_total()?;
        let (s, _) = self.zorich_step()?;
        let after = s.next_total()?;
        s.flow_by_factor(&(before / after))
    }
}

/// The canonical valid choice τ_α = π₁(α) − π₀(α).
pub fn canonical_tau(c: &CombinatorialData) -> Vec<Q> {
    (0..c.d()).map(|a| Q::from_integer((c.pi(1)[a] as i64 - c.pi(0)[a] as i64).into())).collect()
}

/// Rejection sampling of τ ∈ [−1, 1]^𝒜 on the dyadic grid 2^-bits. Returns τ and the number of
/// draws used, or None after `max_draws` rejections.
pub fn random_tau<R: rand::Rng + ?Sized>(
    rng: &mut R,
    iem: &Iem,
    bits: u32,
    max_draws: usize,
) -> Option<(Suspension, usize)> {
    let top = 1i64 << bits;
    for n in 1..=max_draws {
        let tau: Vec<Q> = (0..iem.d()).map(|_| Q::new(rng.random_range(-top..=top).into(), top.into())).collect();
        if let Ok(s) = Suspension::new(iem, tau) {
            return Some((s, n));
        }
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceSummary {
    /// σ as (source, image) pairs; elements are written "α:L" / "α:R".
    pub sigma: Vec<(String, String)>,
    pub cycles: Vec<Vec<String>>,
    pub nu: usize,
    /// n_C, half the length of each cycle.
    pub half_lengths: Vec<usize>,
    pub genus: usize,
    /// Order n_C − 1 of the zero at each marked point.
    pub singularities: Vec<usize>,
}

/// σ on the 2d − 2 element set Ā, its cycles, the genus and the singularity orders.
pub fn surface_summary(c: &CombinatorialData) -> Result<SurfaceSummary> {
    if !c.is_admissible() {
        return Err(Error::NotAdmissible);
    }
    let d = c.d();
    let at = |eps: usize, p: usize| (0..d).find(|&a| c.pi(eps)[a] == p).unwrap();
    let (a0, a1) = (c.last(0), c.last(1));
    let (f0, f1) = (c.first(0), c.first(1));
    // sides: 0 = L, 1 = R; (α₀,R) ~ (α₁,R) and (α₁′,L) ~ (α₀′,L)
    let canon = |a: usize, side: usize| match (a, side) {
        (a, 1) if a == a0 => (a1, 1),
        (a, 0) if a == f1 => (f0, 0),
        x => x,
    };
    let sigma = |a: usize, side: usize| {
        if side == 1 {
            canon(at(0, c.pi(0)[a] + 1), 0)
        } else {
            canon(at(1, c.pi(1)[a] - 1), 1)
        }
    };
    let mut nodes: Vec<(usize, usize)> =
        (0..d).flat_map(|a| [(a, 0), (a, 1)]).filter(|&(a, s)| canon(a, s) == (a, s)).collect();
    nodes.sort();
    let label = |(a, s): (usize, usize)| format!("{}:{}", c.name(a), if s == 0 { "L" } else { "R" });
    let pairs: Vec<(String, String)> = nodes.iter().map(|&n| (label(n), label(sigma(n.0, n.1)))).collect();
    let mut seen = vec![false; nodes.len()];
    let mut cycles = Vec::new();
    for i in 0..nodes.len() {
        if seen[i] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut n = nodes[i];
        loop {
            let j = nodes.binary_search(&n).unwrap();
            if seen[j] {
                break;
            }
            seen[j] = true;
            cyc.push(label(n));
            n = sigma(n.0, n.1);
        }
        cycles.push(cyc);
    }
    let half_lengths: Vec<usize> = cycles.iter().map(|c| c.len() / 2).collect();
    let singularities: Vec<usize> = half_lengths.iter().map(|n| n - 1).collect();
    let genus = (singularities.iter().sum::<usize>() + 2) / 2;
    Ok(SurfaceSummary { sigma: pairs, nu: cycles.len(), cycles, half_lengths, genus, singularities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iem::random_lengths;
    use crate::num::{q, qi};
    use crate::rauzy::build_diagram;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_interval_heights() {
        let c = CombinatorialData::from_words("AB", "BA").unwrap();
        let t = Iem::new(c, vec![q(3, 5), q(2, 5)]).unwrap();
        let s = Suspension::new(&t, vec![qi(1), qi(-1)]).unwrap();
        assert_eq!(s.h(), vec![qi(1), qi(1)]);
        assert_eq!(s.area(), qi(1));
        assert_eq!(s.theta().0, t.delta());
        assert!(matches!(Suspension::new(&t, vec![qi(0), qi(0)]), Err(Error::InvalidSuspension(_))));
    }

    #[test]
    fn reversal_surfaces() {
        let s = surface_summary(&CombinatorialData::from_words("ABCD", "DCBA").unwrap()).unwrap();
        assert_eq!((s.genus, s.nu, s.singularities.clone()), (2, 1, vec![2]));
        assert_eq!(s.cycles[0].len(), 6);
        let s = surface_summary(&CombinatorialData::from_words("ABCDE", "EDCBA").unwrap()).unwrap();
        assert_eq!((s.genus, s.nu, s.singularities.clone()), (2, 2, vec![1, 1]));
        assert!(s.cycles.iter().all(|c| c.len() == 4));
        let s = surface_summary(&CombinatorialData::from_words("AB", "BA").unwrap()).unwrap();
        assert_eq!((s.genus, s.nu, s.singularities), (1, 1, vec![0]));
    }

    #[test]
    fn summary_is_constant_on_a_rauzy_class() {
        let base = CombinatorialData::from_words("ABCDE", "EDCBA").unwrap();
        let diag = build_diagram(&base).unwrap();
        for v in &diag.vertices {
            let s = surface_summary(v).unwrap();
            assert_eq!((s.genus, s.nu), (2, 2));
            assert_eq!(s.half_lengths.iter().sum::<usize>(), 4);
        }
    }

    #[test]
    fn step_inverse_and_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = CombinatorialData::from_words("ABCD", "DCBA").unwrap();
        for _ in 0..50 {
            let t = Iem::new(c.clone(), random_lengths(&mut rng, 4, 30)).unwrap();
            let (s, _) = random_tau(&mut rng, &t, 20, 100_000).unwrap();
            let im = &s.im_xi(0)[c.last(0)];
            let h = s.h();
            assert!(*im >= -h[c.last(1)].clone() && *im <= h[c.last(0)]);
            let (n, eps) = s.step().unwrap();
            n.check().unwrap();
            assert_eq!(n.area(), s.area());
            let (a0, a1) = (c.last(0), c.last(1));
            let (win, lose) = if eps == 0 { (a0, a1) } else { (a1, a0) };
            let nh = n.h();
            assert_eq!(nh[lose], &h[a0] + &h[a1]);
            assert_eq!(nh[win], h[win]);
            assert_eq!(n.inverse_step().unwrap(), (s.clone(), eps));
            assert_eq!(surface_summary(n.combo()).unwrap().genus, 2);
        }
    }

    #[test]
    fn zorich_return_matches_run_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = CombinatorialData::from_words("ABC", "CBA").unwrap();
        let mut checked = 0;
        while checked < 20 {
            let t = Iem::new(c.clone(), random_lengths(&mut rng, 3, 40)).unwrap();
            let (s, _) = random_tau(&mut rng, &t, 20, 100_000).unwrap();
            if !matches!(s.cell(), ZorichCell::Zero | ZorichCell::One) {
                continue;
            }
            let (z, n) = s.zorich_step().unwrap();
            let a = crate::accel::accelerate_iem(&t, 1, 1, 1000).unwrap();
            assert_eq!(n as u128, a.breakpoints()[1]);
            assert_eq!(z.lambda(), a.lambda(1).unwrap().as_slice());
            checked += 1;
        }
    }

    #[test]
    fn flow_laws() {
        let c = CombinatorialData::from_words("ABCD", "DCBA").unwrap();
        let t = Iem::new(c.clone(), vec![q(1, 3), q(1, 5), q(1, 7), q(34, 105)]).unwrap();
        let s = Suspension::new(&t, canonical_tau(&c)).unwrap();
        assert_eq!(s.flow_by_factor(&qi(1)).unwrap(), s);
        let (a, b) = (q(3, 2), q(5, 7));
        assert_eq!(
            s.flow_by_factor(&a).unwrap().flow_by_factor(&b).unwrap().lambda(),
            s.flow_by_factor(&(&a * &b)).unwrap().lambda()
        );
        let f = s.flow(0.7).unwrap();
        assert_eq!(f.area(), s.area());
        assert!(f.check().is_ok());
        assert_eq!(f.time(), 0.7);
        let g = s.normalized_step().unwrap();
        assert_eq!(g.next_total().unwrap(), s.next_total().unwrap());
        assert_eq!(g.area(), s.area());
    }

    #[test]
    fn cells() {
        let c = CombinatorialData::from_words("ABC", "CBA").unwrap();
        let t = Iem::new(c.clone(), vec![q(1, 3), q(1, 3), q(1, 3)]).unwrap();
        let s = Suspension::new(&t, canonical_tau(&c)).unwrap();
        assert_eq!(s.cell(), ZorichCell::Boundary);
        // λ_C > λ_A and Im ξ⁰_C = Σ τ = 0 on the boundary; tilt τ_C up
        let t = Iem::new(c.clone(), vec![q(1, 6), q(1, 3), q(1, 2)]).unwrap();
        let s = Suspension::new(&t, vec![qi(2), qi(0), q(-3, 2)]).unwrap();
        assert_eq!(s.cell(), ZorichCell::Zero);
    }
}
