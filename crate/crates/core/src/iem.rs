//! Combinatorial data, lengths and the interval exchange map itself.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::IntMatrix;
use crate::num::{fmt_q, parse_q, sum, Q};

/// Alphabet plus the pair of bijections (π₀, π₁) onto {1..d}.
///
/// Positions are 1-based as in the usual notation; symbols are referred to
/// by their index in the alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CombinatorialData {
    alphabet: Arc<Vec<String>>,
    pi: [Vec<usize>; 2],
}

impl CombinatorialData {
    pub fn new(alphabet: Vec<String>, pi0: Vec<usize>, pi1: Vec<usize>) -> Result<Self> {
        let d = alphabet.len();
        if d < 2 {
            return Err(Error::Invalid("alphabet needs at least two symbols".into()));
        }
        let mut names = alphabet.clone();
        names.sort();
        names.dedup();
        if names.len() != d {
            return Err(Error::Invalid("alphabet symbols must be distinct".into()));
        }
        for p in [&pi0, &pi1] {
            let mut s = p.clone();
            s.sort_unstable();
            if p.len() != d || s != (1..=d).collect::<Vec<_>>() {
                return Err(Error::Invalid("pi0/pi1 must be bijections onto 1..d".into()));
            }
        }
        Ok(CombinatorialData { alphabet: Arc::new(alphabet), pi: [pi0, pi1] })
    }

    /// Builds data from the left-to-right orders of the top and bottom rows,
    /// each character being a symbol: `from_words("ABCD", "DCBA")`.
    pub fn from_words(top: &str, bottom: &str) -> Result<Self> {
        let alphabet: Vec<String> = top.chars().map(String::from).collect();
        let bottom: Vec<String> = bottom.chars().map(String::from).collect();
        Self::from_orders(alphabet.clone(), &alphabet, &bottom)
    }

    pub fn from_orders(alphabet: Vec<String>, top: &[String], bottom: &[String]) -> Result<Self> {
        let d = alphabet.len();
        let pos = |row: &[String]| -> Result<Vec<usize>> {
            let mut p = vec![0; d];
            if row.len() != d {
                return Err(Error::Invalid("row length differs from alphabet".into()));
            }
            for (k, s) in row.iter().enumerate() {
                let i = alphabet
                    .iter()
                    .position(|a| a == s)
                    .ok_or_else(|| Error::Invalid(format!("unknown symbol {s}")))?;
                p[i] = k + 1;
            }
            Ok(p)
        };
        let (p0, p1) = (pos(top)?, pos(bottom)?);
        Self::new(alphabet, p0, p1)
    }

    pub(crate) fn with_pi(&self, pi0: Vec<usize>, pi1: Vec<usize>) -> Self {
        CombinatorialData { alphabet: self.alphabet.clone(), pi: [pi0, pi1] }
    }

    pub fn d(&self) -> usize {
        self.alphabet.len()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn name(&self, a: usize) -> &str {
        &self.alphabet[a]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == name)
    }

    pub fn pi(&self, eps: usize) -> &[usize] {
        &self.pi[eps]
    }

    /// Symbols of row ε listed left to right.
    pub fn order(&self, eps: usize) -> Vec<usize> {
        let mut o = vec![0; self.d()];
        for (a, &p) in self.pi[eps].iter().enumerate() {
            o[p - 1] = a;
        }
        o
    }

    pub fn row_string(&self, eps: usize) -> String {
        let o = self.order(eps);
        let sep = if self.alphabet.iter().all(|s| s.chars().count() == 1) { "" } else { " " };
        o.iter().map(|&a| self.alphabet[a].as_str()).collect::<Vec<_>>().join(sep)
    }

    /// α_ε: the symbol in last position of row ε.
    pub fn last(&self, eps: usize) -> usize {
        self.pi[eps].iter().position(|&p| p == self.d()).unwrap()
    }

    /// α'_ε: the symbol in first position of row ε.
    pub fn first(&self, eps: usize) -> usize {
        self.pi[eps].iter().position(|&p| p == 1).unwrap()
    }

    pub fn is_admissible(&self) -> bool {
        let d = self.d();
        let o0 = self.order(0);
        // prefix sets agree at k iff the top prefix is mapped into the bottom prefix
        let mut max_bottom = 0;
        for k in 0..d - 1 {
            max_bottom = max_bottom.max(self.pi[1][o0[k]]);
            if max_bottom == k + 1 {
                return false;
            }
        }
        true
    }

    /// Ω_{αβ} = +1 if β is right of α on top and left of α on the bottom, −1 in the mirrored case.
    pub fn omega(&self) -> IntMatrix {
        let d = self.d();
        let (p0, p1) = (&self.pi[0], &self.pi[1]);
        let mut m = IntMatrix::zeros(d);
        for a in 0..d {
            for b in 0..d {
                let v = if p0[b] > p0[a] && p1[b] < p1[a] {
                    1
                } else if p0[b] < p0[a] && p1[b] > p1[a] {
                    -1
                } else {
                    0
                };
                m.set(a, b, BigInt::from(v));
            }
        }
        m
    }

    /// Canonical involution: exchange the two rows.
    pub fn inverse(&self) -> Self {
        self.with_pi(self.pi[1].clone(), self.pi[0].clone())
    }

    /// π = π₁∘π₀⁻¹ as a list indexed by top position − 1; the reduced-diagram key.
    pub fn reduced_key(&self) -> Vec<usize> {
        self.order(0).iter().map(|&a| self.pi[1][a]).collect()
    }

    /// Renames symbols; `map` must be a bijection of the alphabet onto new names.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Result<Self> {
        let alphabet: Vec<String> = self
            .alphabet
            .iter()
            .map(|s| map.get(s).cloned().ok_or_else(|| Error::Invalid(format!("no new name for {s}"))))
            .collect::<Result<_>>()?;
        Self::new(alphabet, self.pi[0].clone(), self.pi[1].clone())
    }
}

/// Interval exchange map with exact positive lengths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Iem {
    combo: CombinatorialData,
    lengths: Vec<Q>,
}

impl Iem {
    pub fn new(combo: CombinatorialData, lengths: Vec<Q>) -> Result<Self> {
        if lengths.len() != combo.d() {
            return Err(Error::Invalid("one length per symbol required".into()));
        }
        if lengths.iter().any(|l| !l.is_positive()) {
            return Err(Error::Invalid("lengths must be positive".into()));
        }
        Ok(Iem { combo, lengths })
    }

    pub fn combo(&self) -> &CombinatorialData {
        &self.combo
    }

    pub fn lengths(&self) -> &[Q] {
        &self.lengths
    }

    pub fn d(&self) -> usize {
        self.combo.d()
    }

    pub fn total(&self) -> Q {
        sum(&self.lengths)
    }

    /// Left endpoints j_ε(0, α) of the intervals in row ε.
    pub fn left_endpoints(&self, eps: usize) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.d()];
        let mut acc = Q::zero();
        for a in self.combo.order(eps) {
            out[a] = acc.clone();
            acc += &self.lengths[a];
        }
        out
    }

    pub fn delta(&self) -> Vec<Q> {
        self.combo.omega().mul_vec_q(&self.lengths)
    }

    /// Symbol α with x ∈ j₀(I_α).
    pub fn locate(&self, x: &Q) -> Result<usize> {
        if x.is_negative() || *x >= self.total() {
            return Err(Error::Domain(fmt_q(x)));
        }
        let mut acc = Q::zero();
        for a in self.combo.order(0) {
            acc += &self.lengths[a];
            if *x < acc {
                return Ok(a);
            }
        }
        unreachable!()
    }

    pub fn evaluate(&self, x: &Q) -> Result<Q> {
        Ok(self.stepper().apply(x)?.1)
    }

    /// Precomputed layout for repeated evaluation.
    pub fn stepper(&self) -> Stepper {
        Stepper::new(self)
    }

    pub fn inverse(&self) -> Iem {
        Iem { combo: self.combo.inverse(), lengths: self.lengths.clone() }
    }

    pub fn find_connexion(&self, max_steps: usize) -> ConnexionSearch {
        find_connexion(self, max_steps, false)
    }

    pub fn scaled(&self, c: &Q) -> Iem {
        Iem { combo: self.combo.clone(), lengths: self.lengths.iter().map(|l| l * c).collect() }
    }
}

/// Evaluation of T with the interval layout computed once.
#[derive(Clone, Debug)]
pub struct Stepper {
    starts: Vec<Q>,
    syms: Vec<usize>,
    delta: Vec<Q>,
    total: Q,
}

impl Stepper {
    fn new(t: &Iem) -> Self {
        let order = t.combo.order(0);
        let j0 = t.left_endpoints(0);
        Stepper {
            starts: order.iter().map(|&a| j0[a].clone()).collect(),
            syms: order,
            delta: t.delta(),
            total: t.total(),
        }
    }

    pub fn locate(&self, x: &Q) -> Result<usize> {
        if x.is_negative() || *x >= self.total {
            return Err(Error::Domain(fmt_q(x)));
        }
        let k = self.starts.partition_point(|s| s <= x) - 1;
        Ok(self.syms[k])
    }

    /// Returns (α, T(x)).
    pub fn apply(&self, x: &Q) -> Result<(usize, Q)> {
        let a = self.locate(x)?;
        Ok((a, x + &self.delta[a]))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Connexion {
    pub alpha: String,
    pub beta: String,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ConnexionSearch {
    Found(Connexion),
    NoneWithin(usize),
    /// Rationally independent lengths: Keane's property holds, nothing to iterate.
    KeaneByIndependence,
}

/// Iterates every singularity orbit T^m(j₀(0,α)) in exact arithmetic.
/// `rationally_independent` is a caller-supplied claim about the lengths.
pub fn find_connexion(t: &Iem, max_steps: usize, rationally_independent: bool) -> ConnexionSearch {
    if rationally_independent {
        return ConnexionSearch::KeaneByIndependence;
    }
    let st = t.stepper();
    let j0 = t.left_endpoints(0);
    let targets: BTreeMap<Q, usize> =
        (0..t.d()).filter(|&b| t.combo.pi(0)[b] > 1).map(|b| (j0[b].clone(), b)).collect();
    let mut pts = j0.clone();
    for m in 1..=max_steps {
        for a in 0..t.d() {
            pts[a] = st.apply(&pts[a]).expect("orbit stays in the interval").1;
        }
        for a in 0..t.d() {
            if let Some(&b) = targets.get(&pts[a]) {
                return ConnexionSearch::Found(Connexion {
                    alpha: t.combo.name(a).to_string(),
                    beta: t.combo.name(b).to_string(),
                    m,
                });
            }
        }
    }
    ConnexionSearch::NoneWithin(max_steps)
}

/// JSON form: {"alphabet":[..],"pi0":{"A":1,..},"pi1":{..},"lengths":{"A":"3/5",..}}.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IemSpec {
    pub alphabet: Vec<String>,
    pub pi0: BTreeMap<String, usize>,
    pub pi1: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<BTreeMap<String, String>>,
}

impl IemSpec {
    pub fn combo(&self) -> Result<CombinatorialData> {
        let get = |m: &BTreeMap<String, usize>| -> Result<Vec<usize>> {
            self.alphabet
                .iter()
                .map(|s| m.get(s).copied().ok_or_else(|| Error::Invalid(format!("missing position for {s}"))))
                .collect()
        };
        if self.pi0.len() != self.alphabet.len() || self.pi1.len() != self.alphabet.len() {
            return Err(Error::Invalid("pi0/pi1 must list exactly the alphabet".into()));
        }
        CombinatorialData::new(self.alphabet.clone(), get(&self.pi0)?, get(&self.pi1)?)
    }

    pub fn iem(&self) -> Result<Iem> {
        let combo = self.combo()?;
        let lengths = self.lengths.as_ref().ok_or_else(|| Error::Invalid("lengths missing".into()))?;
        let l = self
            .alphabet
            .iter()
            .map(|s| parse_q(lengths.get(s).ok_or_else(|| Error::Invalid(format!("missing length for {s}")))?))
            .collect::<Result<Vec<_>>>()?;
        Iem::new(combo, l)
    }

    pub fn from_combo(c: &CombinatorialData, lengths: Option<&[Q]>) -> Self {
        let names = c.alphabet().to_vec();
        let pos = |eps: usize| names.iter().cloned().zip(c.pi(eps).iter().copied()).collect();
        IemSpec {
            alphabet: names.clone(),
            pi0: pos(0),
            pi1: pos(1),
            lengths: lengths.map(|l| names.iter().cloned().zip(l.iter().map(fmt_q)).collect()),
        }
    }

    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Invalid(e.to_string()))
    }
}

pub fn lengths_from_ints(v: &[i64], denom: i64) -> Vec<Q> {
    v.iter().map(|&x| BigRational::new(BigInt::from(x), BigInt::from(denom))).collect()
}

/// Uniform point of the open simplex {λ > 0, Σλ = 1}, rounded to the dyadic grid 2^-bits
/// by the spacings of d − 1 sorted uniform draws. Degenerate draws are repeated.
pub fn random_lengths<R: rand::Rng + ?Sized>(rng: &mut R, d: usize, bits: u32) -> Vec<Q> {
    assert!(bits >= 1, "precision must be at least one bit");
    let top = BigInt::one() << bits;
    let draw = |rng: &mut R| {
        let words = bits.div_ceil(64);
        let mut x = BigInt::zero();
        for _ in 0..words {
            x = (x << 64) + rng.next_u64();
        }
        x >> (words * 64 - bits)
    };
    loop {
        let mut cuts: Vec<BigInt> = (0..d.saturating_sub(1)).map(|_| draw(rng)).collect();
        cuts.push(BigInt::zero());
        cuts.push(top.clone());
        cuts.sort_unstable();
        if cuts.windows(2).all(|w| w[0] < w[1]) {
            return cuts.windows(2).map(|w| BigRational::new(&w[1] - &w[0], top.clone())).collect();
        }
    }
}

/// Uniformly random admissible pair on the letters A, B, …, with π₀ the identity order.
pub fn random_admissible<R: rand::Rng + ?Sized>(rng: &mut R, d: usize) -> CombinatorialData {
    use rand::seq::SliceRandom;
    assert!((2..=26).contains(&d), "d must lie in 2..=26");
    let top: Vec<char> = (b'A'..b'A' + d as u8).map(char::from).collect();
    let top_word: String = top.iter().collect();
    loop {
        let mut bottom = top.clone();
        bottom.shuffle(rng);
        let c = CombinatorialData::from_words(&top_word, &bottom.iter().collect::<String>()).expect("permutation");
        if c.is_admissible() {
            return c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::q;

    fn abcd() -> CombinatorialData {
        CombinatorialData::from_words("ABCD", "DCBA").unwrap()
    }

    #[test]
    fn admissibility_examples() {
        assert!(abcd().is_admissible());
        assert!(!CombinatorialData::from_words("ABCD", "BADC").unwrap().is_admissible());
        assert!(CombinatorialData::from_words("AB", "BA").unwrap().is_admissible());
        assert!(!CombinatorialData::from_words("AB", "AB").unwrap().is_admissible());
    }

    #[test]
    fn omega_of_reversal_is_upper_plus_lower_minus() {
        let om = abcd().omega();
        for a in 0..4 {
            for b in 0..4 {
                let want = (b > a) as i64 - (b < a) as i64;
                assert_eq!(om.get(a, b), &BigInt::from(want));
            }
        }
        let two = CombinatorialData::from_words("AB", "BA").unwrap().omega();
        assert_eq!(two, IntMatrix::from_rows(&[vec![0, 1], vec![-1, 0]]));
    }

    #[test]
    fn evaluate_two_intervals() {
        let t = Iem::new(CombinatorialData::from_words("AB", "BA").unwrap(), vec![q(3, 5), q(2, 5)]).unwrap();
        assert_eq!(t.evaluate(&q(0, 1)).unwrap(), q(2, 5));
        assert_eq!(t.delta(), vec![q(2, 5), q(-3, 5)]);
        assert!(t.evaluate(&q(1, 1)).is_err());
        assert!(t.evaluate(&q(-1, 7)).is_err());
    }

    #[test]
    fn interval_starts_map_to_bottom_starts() {
        let t = Iem::new(abcd(), lengths_from_ints(&[3, 1, 4, 2], 10)).unwrap();
        let (j0, j1) = (t.left_endpoints(0), t.left_endpoints(1));
        for a in 0..4 {
            assert_eq!(t.evaluate(&j0[a]).unwrap(), j1[a]);
        }
    }

    #[test]
    fn inverse_negates_omega() {
        let c = abcd();
        let i = c.inverse();
        assert_eq!(i.row_string(0), "DCBA");
        let (o, oi) = (c.omega(), i.omega());
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(o.get(a, b), &-oi.get(a, b));
            }
        }
    }

    #[test]
    fn connexion_examples() {
        let ab = CombinatorialData::from_words("AB", "BA").unwrap();
        let half = Iem::new(ab.clone(), vec![q(1, 2), q(1, 2)]).unwrap();
        assert_eq!(
            half.find_connexion(10),
            ConnexionSearch::Found(Connexion { alpha: "A".into(), beta: "B".into(), m: 1 })
        );
        let fib = Iem::new(ab.clone(), vec![q(2584, 4181), q(1597, 4181)]).unwrap();
        assert_eq!(fib.find_connexion(1000), ConnexionSearch::NoneWithin(1000));
        // m·1597 ≡ 2584 (mod 4181) first holds at m = 4180
        match fib.find_connexion(5000) {
            ConnexionSearch::Found(c) => assert_eq!((c.alpha.as_str(), c.m), ("A", 4180)),
            other => panic!("{other:?}"),
        }
        assert_eq!(find_connexion(&fib, 1, true), ConnexionSearch::KeaneByIndependence);
    }

    #[test]
    fn json_round_trip() {
        let js = r#"{"alphabet":["A","B"],"pi0":{"A":1,"B":2},"pi1":{"A":2,"B":1},"lengths":{"A":"3/5","B":"2/5"}}"#;
        let t = IemSpec::parse(js).unwrap().iem().unwrap();
        assert_eq!(t.lengths(), &[q(3, 5), q(2, 5)]);
        let back = IemSpec::from_combo(t.combo(), Some(t.lengths()));
        assert_eq!(back.iem().unwrap(), t);
        assert!(IemSpec::parse(r#"{"alphabet":["A","B"],"pi0":{"A":1,"B":1},"pi1":{"A":2,"B":1}}"#)
            .unwrap()
            .combo()
            .is_err());
    }

    #[test]
    fn rename_keeps_positions() {
        let map: BTreeMap<String, String> = [("A", "x"), ("B", "y"), ("C", "z"), ("D", "w")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let r = abcd().rename(&map).unwrap();
        assert_eq!(r.row_string(1), "wzyx");
        assert_eq!(r.omega(), abcd().omega());
    }
}
