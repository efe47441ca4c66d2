//! Piecewise polynomial functions on ⊔I_α, special Birkhoff sums and the cohomological equation.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::accel::AccelOrbit;
use crate::error::{Error, Result};
use crate::iem::{CombinatorialData, Iem};
use crate::num::{fmt_q, from_f64, ls_slope, parse_q, to_f64, Q};
use crate::roth::{quotient_norms, stable_spaces};

/// c₀ + c₁t + c₂t² + …
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly(pub Vec<Q>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: Q) -> Self {
        Poly(vec![c]).trimmed()
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Poly(c.iter().map(|&x| Q::from_integer(x.into())).collect()).trimmed()
    }

    fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, t: &Q) -> Q {
        self.0.iter().rev().fold(Q::zero(), |acc, c| acc * t + c)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + to_f64(c))
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        let z = Q::zero();
        Poly((0..n).map(|i| self.0.get(i).unwrap_or(&z) + o.0.get(i).unwrap_or(&z)).collect()).trimmed()
    }

    pub fn scale(&self, c: &Q) -> Poly {
        Poly(self.0.iter().map(|x| x * c).collect()).trimmed()
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(&-Q::from_integer(1.into())))
    }

    pub fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(i, c)| c * Q::from_integer(i.into())).collect()).trimmed()
    }

    /// Primitive vanishing at 0.
    pub fn primitive(&self) -> Poly {
        let mut v = vec![Q::zero()];
        v.extend(self.0.iter().enumerate().map(|(i, c)| c / Q::from_integer((i + 1).into())));
        Poly(v).trimmed()
    }

    /// t ↦ p(t + a)
    pub fn shift(&self, a: &Q) -> Poly {
        let mut out: Vec<Q> = Vec::new();
        for c in self.0.iter().rev() {
            // out ← out·(t + a) + c
            let mut next = vec![Q::zero(); out.len() + 1];
            for (i, x) in out.iter().enumerate() {
                next[i] += x * a;
                next[i + 1] += x;
            }
            next[0] += c;
            out = next;
        }
        Poly(out).trimmed()
    }

    pub fn integral(&self, a: &Q, b: &Q) -> Q {
        let p = self.primitive();
        p.eval(b) - p.eval(a)
    }

    /// Points of (a,b) where the derivative may vanish, in floating point.
    fn critical_points(&self, a: f64, b: f64) -> Vec<f64> {
        let d: Vec<f64> = self.derivative().0.iter().map(to_f64).collect();
        let mut pts = match d.len() {
            0 | 1 => vec![],
            2 => vec![-d[0] / d[1]],
            3 => {
                let disc = d[1] * d[1] - 4.0 * d[2] * d[0];
                if disc < 0.0 {
                    vec![]
                } else {
                    let r = disc.sqrt();
                    vec![(-d[1] - r) / (2.0 * d[2]), (-d[1] + r) / (2.0 * d[2])]
                }
            }
            _ => (1..64).map(|i| a + (b - a) * i as f64 / 64.0).collect(),
        };
        pts.retain(|&t| t > a && t < b);
        pts
    }

    /// (min, max) over [a, b].
    pub fn range_f64(&self, a: &Q, b: &Q) -> (f64, f64) {
        let (fa, fb) = (to_f64(a), to_f64(b));
        let mut vals = vec![to_f64(&self.eval(a)), to_f64(&self.eval(b))];
        for t in self.critical_points(fa, fb) {
            vals.push(to_f64(&self.eval(&from_f64(t))));
        }
        vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Total variation over [a, b]; exact when the degree is at most 2.
    pub fn variation(&self, a: &Q, b: &Q) -> Q {
        let mut pts = vec![a.clone()];
        if self.degree() <= 2 {
            let d = self.derivative();
            if d.degree() == 1 && !d.0[1].is_zero() {
                let r = -&d.0[0] / &d.0[1];
                if &r > a && &r < b {
                    pts.push(r);
                }
            }
        } else {
            pts.extend(self.critical_points(to_f64(a), to_f64(b)).into_iter().map(from_f64));
        }
        pts.push(b.clone());
        pts.windows(2).fold(Q::zero(), |s, w| s + (self.eval(&w[1]) - self.eval(&w[0])).abs())
    }
}

/// A polynomial on [from, to) in the local coordinate of its interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub from: Q,
    pub to: Q,
    pub poly: Poly,
}

/// A function on ⊔I_α given on each interval by polynomial pieces in the local coordinate
/// t ∈ [0, λ_α). Jumps at piece boundaries are allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiecewiseBV {
    lengths: Vec<Q>,
    pieces: Vec<Vec<Piece>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PieceSpec {
    pub from: String,
    pub to: String,
    pub poly: Vec<String>,
}

impl PiecewiseBV {
    pub fn new(lengths: Vec<Q>, pieces: Vec<Vec<Piece>>) -> Result<Self> {
        if lengths.len() != pieces.len() {
            return Err(Error::Invalid("one piece list per symbol".into()));
        }
        for (a, ps) in pieces.iter().enumerate() {
            let mut at = Q::zero();
            for p in ps {
                if p.from != at || p.to <= p.from {
                    return Err(Error::Invalid(format!("pieces of symbol {a} must tile [0, λ) in order")));
                }
                at = p.to.clone();
            }
            if at != lengths[a] {
                return Err(Error::Invalid(format!("pieces of symbol {a} do not reach the interval end")));
            }
        }
        Ok(PiecewiseBV { lengths, pieces })
    }

    /// One polynomial per interval.
    pub fn from_polys(lengths: &[Q], polys: Vec<Poly>) -> Self {
        let pieces =
            lengths.iter().zip(polys).map(|(l, p)| vec![Piece { from: Q::zero(), to: l.clone(), poly: p }]).collect();
        PiecewiseBV { lengths: lengths.to_vec(), pieces }
    }

    /// Element of Γ: constant c_α on each interval.
    pub fn constants(lengths: &[Q], c: &[Q]) -> Self {
        Self::from_polys(lengths, c.iter().map(|x| Poly::constant(x.clone())).collect())
    }

    /// Restriction of a polynomial in the global coordinate x ∈ [0, λ*).
    pub fn from_global(t: &Iem, f: &Poly) -> Self {
        let j0 = t.left_endpoints(0);
        Self::from_polys(t.lengths(), j0.iter().map(|a| f.shift(a)).collect())
    }

    /// Restriction of a piecewise polynomial in the global coordinate, given by its
    /// breakpoints 0 = b₀ < b₁ < … < b_m = λ* and one polynomial per gap.
    pub fn from_global_pieces(t: &Iem, breaks: &[Q], polys: &[Poly]) -> Result<Self> {
        Self::restrict(t, &t.left_endpoints(0), breaks, polys)
    }

    /// g∘T for g piecewise polynomial in the global coordinate.
    pub fn compose_with_map(t: &Iem, breaks: &[Q], polys: &[Poly]) -> Result<Self> {
        Self::restrict(t, &t.left_endpoints(1), breaks, polys)
    }

    fn restrict(t: &Iem, starts: &[Q], breaks: &[Q], polys: &[Poly]) -> Result<Self> {
        if breaks.len() != polys.len() + 1 || breaks[0] != Q::zero() || *breaks.last().unwrap() != t.total() {
            return Err(Error::Invalid("breakpoints must run from 0 to the total length".into()));
        }
        let pieces = (0..t.d())
            .map(|a| {
                let (lo, hi) = (&starts[a], &starts[a] + &t.lengths()[a]);
                let mut cuts = vec![lo.clone()];
                cuts.extend(breaks.iter().filter(|b| *b > lo && **b < hi).cloned());
                cuts.push(hi);
                cuts.windows(2)
                    .map(|w| {
                        let g = breaks.partition_point(|b| b <= &w[0]) - 1;
                        Piece { from: &w[0] - lo, to: &w[1] - lo, poly: polys[g].shift(lo) }
                    })
                    .collect()
            })
            .collect();
        PiecewiseBV::new(t.lengths().to_vec(), pieces)
    }

    pub fn from_spec(c: &CombinatorialData, lengths: &[Q], spec: &BTreeMap<String, Vec<PieceSpec>>) -> Result<Self> {
        let mut pieces = Vec::new();
        for name in c.alphabet() {
            let list = spec.get(name).ok_or_else(|| Error::Invalid(format!("no pieces for {name}")))?;
            let mut ps = Vec::new();
            for p in list {
                let poly = Poly(p.poly.iter().map(|s| parse_q(s)).collect::<Result<_>>()?).trimmed();
                ps.push(Piece { from: parse_q(&p.from)?, to: parse_q(&p.to)?, poly });
            }
            pieces.push(ps);
        }
        if spec.len() != c.d() {
            return Err(Error::Invalid("function lists a symbol outside the alphabet".into()));
        }
        PiecewiseBV::new(lengths.to_vec(), pieces)
    }

    pub fn to_spec(&self, c: &CombinatorialData) -> BTreeMap<String, Vec<PieceSpec>> {
        (0..self.d())
            .map(|a| {
                let ps = self.pieces[a]
                    .iter()
                    .map(|p| PieceSpec {
                        from: fmt_q(&p.from),
                        to: fmt_q(&p.to),
                        poly: p.poly.0.iter().map(fmt_q).collect(),
                    })
                    .collect();
                (c.name(a).to_string(), ps)
            })
            .collect()
    }

    pub fn d(&self) -> usize {
        self.lengths.len()
    }

    /// Merges neighbouring pieces carrying the same polynomial.
    pub fn normalized(mut self) -> Self {
        for ps in &mut self.pieces {
            let mut out: Vec<Piece> = Vec::with_capacity(ps.len());
            for p in ps.drain(..) {
                match out.last_mut() {
                    Some(last) if last.poly == p.poly => last.to = p.to,
                    _ => out.push(p),
                }
            }
            *ps = out;
        }
        self
    }

    pub fn lengths(&self) -> &[Q] {
        &self.lengths
    }

    pub fn pieces(&self, a: usize) -> &[Piece] {
        &self.pieces[a]
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.iter().map(Vec::len).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().flatten().map(|p| p.poly.degree()).max().unwrap_or(0)
    }

    fn piece_at(&self, a: usize, t: &Q) -> &Piece {
        let ps = &self.pieces[a];
        let i = ps.partition_point(|p| &p.to <= t).min(ps.len() - 1);
        &ps[i]
    }

    /// Value at local coordinate t of interval α.
    pub fn eval(&self, a: usize, t: &Q) -> Q {
        self.piece_at(a, t).poly.eval(t)
    }

    fn map(&self, f: impl Fn(usize, &Piece) -> Poly) -> Self {
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .map(|(a, ps)| ps.iter().map(|p| Piece { from: p.from.clone(), to: p.to.clone(), poly: f(a, p) }).collect())
            .collect();
        PiecewiseBV { lengths: self.lengths.clone(), pieces }
    }

    pub fn derivative(&self) -> Self {
        self.map(|_, p| p.poly.derivative())
    }

    /// Continuous primitive on each interval, vanishing at its left end.
    pub fn primitive(&self) -> Self {
        let mut out = self.clone();
        for ps in &mut out.pieces {
            let mut acc = Q::zero();
            for p in ps.iter_mut() {
                let prim = p.poly.primitive();
                let shift = &acc - prim.eval(&p.from);
                p.poly = prim.add(&Poly::constant(shift));
                acc = p.poly.eval(&p.to);
            }
        }
        out
    }

    pub fn add(&self, o: &PiecewiseBV) -> Result<Self> {
        self.combine(o, |x, y| x.add(y))
    }

    pub fn sub(&self, o: &PiecewiseBV) -> Result<Self> {
        self.combine(o, |x, y| x.sub(y))
    }

    fn combine(&self, o: &PiecewiseBV, f: impl Fn(&Poly, &Poly) -> Poly) -> Result<Self> {
        if self.lengths != o.lengths {
            return Err(Error::Invalid("functions live on different partitions".into()));
        }
        let mut pieces = Vec::with_capacity(self.d());
        for a in 0..self.d() {
            let mut cuts: Vec<Q> = self.pieces[a].iter().chain(&o.pieces[a]).map(|p| p.from.clone()).collect();
            cuts.push(self.lengths[a].clone());
            cuts.sort();
            cuts.dedup();
            pieces.push(
                cuts.windows(2)
                    .map(|w| Piece {
                        from: w[0].clone(),
                        to: w[1].clone(),
                        poly: f(&self.piece_at(a, &w[0]).poly, &o.piece_at(a, &w[0]).poly),
                    })
                    .collect(),
            );
        }
        Ok(PiecewiseBV { lengths: self.lengths.clone(), pieces }.normalized())
    }

    pub fn add_constants(&self, c: &[Q]) -> Self {
        self.map(|a, p| p.poly.add(&Poly::constant(c[a].clone())))
    }

    pub fn scale(&self, c: &Q) -> Self {
        self.map(|_, p| p.poly.scale(c))
    }

    pub fn integral(&self, a: usize) -> Q {
        self.pieces[a].iter().fold(Q::zero(), |s, p| s + p.poly.integral(&p.from, &p.to))
    }

    pub fn total_integral(&self) -> Q {
        (0..self.d()).fold(Q::zero(), |s, a| s + self.integral(a))
    }

    /// Mean on each interval: the Γ component.
    pub fn means(&self) -> Vec<Q> {
        (0..self.d()).map(|a| self.integral(a) / &self.lengths[a]).collect()
    }

    /// (part of mean zero on each interval, means)
    pub fn split_means(&self) -> (Self, Vec<Q>) {
        let m = self.means();
        let neg: Vec<Q> = m.iter().map(|x| -x).collect();
        (self.add_constants(&neg), m)
    }

    /// Var φ = Σ_α Var φ|_{I_α}, jumps inside intervals included.
    pub fn variation(&self) -> Q {
        let mut v = Q::zero();
        for ps in &self.pieces {
            for p in ps {
                v += p.poly.variation(&p.from, &p.to);
            }
            for w in ps.windows(2) {
                v += (w[1].poly.eval(&w[1].from) - w[0].poly.eval(&w[0].to)).abs();
            }
        }
        v
    }

    /// Continuous inside every interval.
    pub fn is_continuous_inside(&self) -> bool {
        self.pieces.iter().all(|ps| ps.windows(2).all(|w| w[1].poly.eval(&w[1].from) == w[0].poly.eval(&w[0].to)))
    }

    pub fn range_f64(&self) -> (f64, f64) {
        self.pieces
            .iter()
            .flatten()
            .map(|p| p.poly.range_f64(&p.from, &p.to))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)))
    }

    pub fn interval_range_f64(&self, a: usize) -> (f64, f64) {
        self.pieces[a]
            .iter()
            .map(|p| p.poly.range_f64(&p.from, &p.to))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)))
    }

    pub fn sup_norm_f64(&self) -> f64 {
        let (lo, hi) = self.range_f64();
        lo.abs().max(hi.abs())
    }

    /// Value at a point x of the whole interval, given the left endpoints of the layout.
    pub fn eval_global(&self, t: &Iem, x: &Q) -> Result<Q> {
        let a = t.locate(x)?;
        Ok(self.eval(a, &(x - &t.left_endpoints(0)[a])))
    }
}

/// Fast evaluation of a level-0 function along orbits of T.
struct Evaluator<'a> {
    f: &'a PiecewiseBV,
    starts: Vec<Q>,
    syms: Vec<usize>,
    j0: Vec<Q>,
    delta: Vec<Q>,
    total: Q,
}

impl<'a> Evaluator<'a> {
    fn new(t: &Iem, f: &'a PiecewiseBV) -> Self {
        let order = t.combo().order(0);
        let j0 = t.left_endpoints(0);
        Evaluator {
            f,
            starts: order.iter().map(|&a| j0[a].clone()).collect(),
            syms: order,
            j0,
            delta: t.delta(),
            total: t.total(),
        }
    }

    /// (φ(x), T(x))
    fn step(&self, x: &Q) -> Result<(Q, Q)> {
        if x.is_negative() || *x >= self.total {
            return Err(Error::Domain(fmt_q(x)));
        }
        let a = self.syms[self.starts.partition_point(|s| s <= x) - 1];
        Ok((self.f.eval(a, &(x - &self.j0[a])), x + &self.delta[a]))
    }
}

/// S(k,l)φ(x) by iterating T⁽ᵏ⁾ Q_β(k,l) times from x ∈ j₀(I_β⁽ˡ⁾); φ lives on level k.
pub fn special_birkhoff_sum(a: &AccelOrbit, k: usize, l: usize, f: &PiecewiseBV, x: &Q) -> Result<Q> {
    let tl = a.level_iem(l)?;
    let tk = a.level_iem(k)?;
    let beta = tl.locate(x)?;
    let q = a.q(k, l)?;
    let count: BigInt = (0..a.d()).map(|r| q.get(r, beta)).sum();
    let ev = Evaluator::new(&tk, f);
    let mut y = x.clone();
    let mut s = Q::zero();
    let mut i = BigInt::zero();
    while i < count {
        let (v, next) = ev.step(&y)?;
        s += v;
        y = next;
        i += 1;
    }
    Ok(s)
}

/// S(k,l)φ materialized on level l; φ lives on level k.
pub fn sum_operator(a: &AccelOrbit, k: usize, l: usize, f: &PiecewiseBV) -> Result<PiecewiseBV> {
    let lk = a.lambda(k).ok_or_else(|| Error::Invalid("orbit has no lengths".into()))?;
    if f.lengths() != lk.as_slice() {
        return Err(Error::Invalid("function does not live on the level-k partition".into()));
    }
    let ll = a.lambda(l).ok_or_else(|| Error::Invalid("orbit has no lengths".into()))?;
    let mut pieces = Vec::with_capacity(a.d());
    for (beta, len) in ll.iter().enumerate() {
        let it = a.return_itinerary(k, l, beta)?;
        let mut cuts = vec![Q::zero(), len.clone()];
        for (al, o) in &it {
            let hi = o + len;
            for p in &f.pieces[*al][1..] {
                if &p.from > o && p.from < hi {
                    cuts.push(&p.from - o);
                }
            }
        }
        cuts.sort();
        cuts.dedup();
        let ps = cuts
            .windows(2)
            .map(|w| {
                let poly =
                    it.iter().fold(Poly::zero(), |acc, (al, o)| acc.add(&f.piece_at(*al, &(o + &w[0])).poly.shift(o)));
                Piece { from: w[0].clone(), to: w[1].clone(), poly }
            })
            .collect();
        pieces.push(ps);
    }
    Ok(PiecewiseBV { lengths: ll, pieces }.normalized())
}

/// S(0,k)φ for k = 0..=upto, level by level.
pub fn cascade(a: &AccelOrbit, f: &PiecewiseBV, upto: usize) -> Result<Vec<PiecewiseBV>> {
    let mut out = vec![f.clone()];
    for j in 0..upto.min(a.levels()) {
        let next = sum_operator(a, j, j + 1, &out[j])?;
        out.push(next);
    }
    Ok(out)
}

/// S(k,k+1)φ = φ_{k+1} + χ_{k+1}: the part of mean zero on each interval and the per-interval means.
pub fn project_mean_zero(a: &AccelOrbit, k: usize, f: &PiecewiseBV) -> Result<(PiecewiseBV, Vec<Q>)> {
    Ok(sum_operator(a, k, k + 1, f)?.split_means())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecompTerm {
    pub level: usize,
    pub count: u64,
    #[serde(serialize_with = "ser_q")]
    pub base: Q,
}

fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(x))
}

/// The point T^j(x), 0 ≤ j < n, closest to 0, with its index.
pub fn closest_to_zero(t: &Iem, x: &Q, n: usize) -> Result<(usize, Q)> {
    let st = t.stepper();
    let mut best = (0, x.clone());
    let mut y = x.clone();
    for j in 1..n {
        y = st.apply(&y)?.1;
        if y < best.1 {
            best = (j, y.clone());
        }
    }
    Ok(best)
}

/// Splits S_N φ(x) into special sums. The orbit segment is cut at its point y closest to 0; the
/// forward part from y and the backward part ending just before y are each reduced top level
/// first. Every count is checked against Max_β Σ_α Z_αβ(l+1).
pub fn decompose_birkhoff(a: &AccelOrbit, x: &Q, n: u64) -> Result<Vec<DecompTerm>> {
    if n == 0 {
        return Err(Error::Invalid("N must be at least 1".into()));
    }
    let n_usize = usize::try_from(n).map_err(|_| Error::Invalid("N too large".into()))?;
    let t0 = a.level_iem(0)?;
    let (j, y) = closest_to_zero(&t0, x, n_usize)?;
    let levels = a.levels();
    let iems: Vec<Iem> = (0..=levels).map(|k| a.level_iem(k)).collect::<Result<_>>()?;
    let times: Vec<Vec<BigInt>> = (0..=levels).map(|k| a.q0(k).column_sums()).collect();
    let bounds: Vec<u64> = (0..levels).map(|l| a.z(l + 1).max_column_sum().try_into().unwrap_or(u64::MAX)).collect();
    let top = (0..=levels).rev().find(|&k| y < iems[k].total()).unwrap_or(0);
    let mut terms = Vec::new();
    for backward in [false, true] {
        let mut left = BigInt::from(if backward { j as u64 } else { n - j as u64 });
        let mut z = y.clone();
        for l in (0..=top).rev() {
            let st = if backward { iems[l].inverse().stepper() } else { iems[l].stepper() };
            let mut b = 0u64;
            let mut base = z.clone();
            while !left.is_zero() {
                let (beta, next) = st.apply(&z)?;
                if times[l][beta] > left {
                    break;
                }
                left -= &times[l][beta];
                z = next;
                if backward {
                    base = z.clone();
                }
                b += 1;
            }
            if l < levels && b >= bounds[l] {
                return Err(Error::DecompositionBound { level: l, count: b, bound: bounds[l] });
            }
            if b > 0 {
                terms.push(DecompTerm { level: l, count: b, base });
            }
        }
    }
    Ok(terms)
}

/// Σ_l Σ_{i<b(l)} S(l)φ((T⁽ˡ⁾)ⁱ x_l), with S(l)φ taken from a cascade.
pub fn evaluate_decomposition(a: &AccelOrbit, sums: &[PiecewiseBV], terms: &[DecompTerm]) -> Result<Q> {
    let mut s = Q::zero();
    for t in terms {
        let ti = a.level_iem(t.level)?;
        let ev = Evaluator::new(&ti, &sums[t.level]);
        let mut y = t.base.clone();
        for _ in 0..t.count {
            let (v, next) = ev.step(&y)?;
            s += v;
            y = next;
        }
    }
    Ok(s)
}

/// Σ_{i<N} φ(Tⁱx) by direct iteration.
pub fn birkhoff_sum(t: &Iem, f: &PiecewiseBV, x: &Q, n: u64) -> Result<Q> {
    let ev = Evaluator::new(t, f);
    let mut y = x.clone();
    let mut s = Q::zero();
    for _ in 0..n {
        let (v, next) = ev.step(&y)?;
        s += v;
        y = next;
    }
    Ok(s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Level of the base point and of the min-max cross-check; defaults to the series depth.
    pub depth: Option<usize>,
    /// Series truncation L; defaults to the largest level with ‖Q(L)‖₁ < 10¹⁸.
    pub series_depth: Option<usize>,
    /// Orbit length for Ψ sampling.
    pub samples: usize,
    pub sigma0: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { depth: None, series_depth: None, samples: 100_000, sigma0: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayPoint {
    pub k: usize,
    pub ln_q: f64,
    /// ‖S(k)(Φ−χ)‖∞
    pub sup: f64,
    /// ‖Q(k)‖₁ times the error of χ: below this the sup is rounding noise.
    pub noise: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub chi_minmax: Vec<f64>,
    /// |χ_series − χ_minmax| after removing the Γs⁽⁰⁾ component.
    pub distance: f64,
    pub tolerance: f64,
    pub agree: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub chi: Vec<f64>,
    #[serde(skip)]
    pub chi_exact: Vec<Q>,
    /// Size of the last series term: the depth-L vs depth-(L−1) difference.
    pub chi_uncertainty: f64,
    pub series_terms: Vec<f64>,
    pub series_depth: usize,
    pub depth: usize,
    pub stable_dim: usize,
    pub decay: Vec<DecayPoint>,
    pub omega_hat: f64,
    pub x0: String,
    /// Ψ(Tⁿx₀) for n = 0..N, with Ψ(x₀) = 0.
    pub psi: Vec<f64>,
    pub sup_bound: f64,
    /// sup_n |S_nΦ(x₀)|, for comparison.
    pub raw_sup: f64,
    pub var_derivative: f64,
    pub cross_check: CrossCheck,
    pub warnings: Vec<String>,
}

fn default_series_depth(a: &AccelOrbit) -> usize {
    let cap = 18.0 * std::f64::consts::LN_10;
    (1..=a.levels()).take_while(|&k| a.q0(k).ln_sum_norm() < cap).last().unwrap_or(1)
}

fn tail_slope(pts: &[(f64, f64)]) -> f64 {
    let h = &pts[pts.len() / 2..];
    let (x, y): (Vec<f64>, Vec<f64>) = h.iter().copied().unzip();
    ls_slope(&x, &y)
}

/// Solves Ψ − Ψ∘T = Φ − χ with χ ∈ Γ for Φ ∈ BV¹_* given on level 0.
///
/// χ is the per-interval mean of Φ plus the series Σ_l S♭(0,l)⁻¹ Λ(l−1,l) S(0,l−1)DΦ, where the
/// defects Λ are the means picked up by the mean-zero parts at each step. The representative
/// returned has no Γs⁽⁰⁾ component.
pub fn solve_cohomological(a: &AccelOrbit, phi: &PiecewiseBV, opts: &SolveOptions) -> Result<SolveReport> {
    let t0 = a.level_iem(0)?;
    if phi.lengths() != t0.lengths() {
        return Err(Error::Invalid("Φ does not live on the level-0 partition".into()));
    }
    if !phi.is_continuous_inside() {
        return Err(Error::Invalid("Φ must be continuous inside each interval".into()));
    }
    let dphi = phi.derivative();
    if !dphi.total_integral().is_zero() {
        return Err(Error::Invalid("DΦ must have mean zero".into()));
    }
    let d = a.d();
    let mut warnings = Vec::new();
    let series_depth = opts.series_depth.unwrap_or_else(|| default_series_depth(a)).min(a.levels());
    let depth = opts.depth.unwrap_or(series_depth).min(a.levels());
    let horizon = a.levels();
    let sp = stable_spaces(a, horizon, opts.sigma0)?;
    let upto = series_depth.max(depth);
    let sums = cascade(a, phi, upto)?;
    let means: Vec<Vec<Q>> = sums.iter().map(|f| f.means()).collect();

    // Λ_j = c_{j+1} − ᵗZ(j+1)·c_j
    let mut chi: Vec<f64> = means[0].iter().map(to_f64).collect();
    let mut series_terms = Vec::new();
    let mut term_pts = Vec::new();
    let mut worst_residual: f64 = 0.0;
    for j in 0..series_depth {
        let pushed = a.z(j + 1).transpose().mul_vec_q(&means[j]);
        let lam: Vec<f64> = means[j + 1].iter().zip(&pushed).map(|(c, p)| to_f64(&(c - p))).collect();
        let w = sp.pull_back(j + 1, &lam)?;
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (c, x) in chi.iter_mut().zip(&w) {
            *c += x;
        }
        series_terms.push(n);
        if n > 0.0 {
            term_pts.push((a.q0(j + 1).ln_sum_norm(), n.ln()));
        }
        worst_residual = worst_residual.max(quotient_norms(a, &sp, j, j + 1)?.residual);
    }
    if worst_residual > 1e-6 {
        return Err(Error::IllConditioned(worst_residual));
    }
    let chi_uncertainty = series_terms.last().copied().unwrap_or(0.0);
    if term_pts.len() >= 4 && tail_slope(&term_pts) >= 0.0 {
        return Err(Error::SeriesDiverging(chi_uncertainty));
    }
    let chi = sp.project_off(0, &chi);
    // rounding moves χ off the affine hyperplane ⟨χ, λ⟩ = ∫Φ; put it back exactly
    let lam = t0.lengths();
    let mut chi_exact: Vec<Q> = chi.iter().map(|&x| from_f64(x)).collect();
    let defect = phi.total_integral() - chi_exact.iter().zip(lam).fold(Q::zero(), |s, (c, l)| s + c * l);
    let ll = lam.iter().fold(Q::zero(), |s, l| s + l * l);
    for (c, l) in chi_exact.iter_mut().zip(lam) {
        *c += &defect * l / &ll;
    }
    let chi: Vec<f64> = chi_exact.iter().map(to_f64).collect();

    let chi_err =
        chi_uncertainty + f64::EPSILON * (phi.sup_norm_f64() + chi.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let mut decay = Vec::new();
    for (k, f) in sums.iter().enumerate().take(series_depth + 1).skip(1) {
        let c = a.q0(k).transpose().mul_vec_q(&chi_exact);
        let neg: Vec<Q> = c.iter().map(|x| -x).collect();
        let ln_q = a.q0(k).ln_sum_norm();
        decay.push(DecayPoint { k, ln_q, sup: f.add_constants(&neg).sup_norm_f64(), noise: ln_q.exp() * chi_err });
    }
    let pts: Vec<(f64, f64)> = decay
        .iter()
        .take_while(|p| p.noise < 0.1 * p.sup)
        .filter(|p| p.sup > 0.0)
        .map(|p| (p.ln_q, p.sup.ln()))
        .collect();
    let omega_hat = if pts.len() >= 2 { -tail_slope(&pts) } else { f64::NAN };

    // min-max cross-check at level K: v_β = midrange of S(K)Φ on I_β⁽ᴷ⁾, χ = Q(K)⁻ᵀ v
    let fk = &sums[depth];
    let mut v = Vec::with_capacity(d);
    let mut half = 0.0f64;
    for b in 0..d {
        let (lo, hi) = fk.interval_range_f64(b);
        v.push(from_f64((lo + hi) / 2.0));
        half = half.max((hi - lo) / 2.0);
    }
    let chi_mm: Vec<f64> = a.q0(depth).inverse_unimodular().transpose().mul_vec_q(&v).iter().map(to_f64).collect();
    let diff: Vec<f64> = chi.iter().zip(&chi_mm).map(|(x, y)| x - y).collect();
    let distance = sp.project_off(0, &diff).iter().map(|x| x * x).sum::<f64>().sqrt();
    let inv_q = if depth > 0 { quotient_norms(a, &sp, 0, depth)?.ln_inv_quotient.exp() } else { 1.0 };
    let mm_norm = chi_mm.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tolerance = chi_uncertainty + inv_q * half * (d as f64).sqrt() + 1e-12 * mm_norm + 1e-9;
    let cross_check = CrossCheck { chi_minmax: chi_mm, distance, tolerance, agree: distance <= tolerance };
    if !cross_check.agree {
        warnings.push("series and min-max obstructions disagree modulo the stable space".into());
    }

    // Ψ on the orbit of x₀, the midpoint of the shortest level-K interval
    let tk = a.level_iem(depth)?;
    let jk = tk.left_endpoints(0);
    let short = (0..d).min_by(|&x, &y| tk.lengths()[x].cmp(&tk.lengths()[y])).unwrap();
    let x0 = &jk[short] + &tk.lengths()[short] / Q::from_integer(2.into());
    let neg: Vec<Q> = chi_exact.iter().map(|x| -x).collect();
    let target = phi.add_constants(&neg);
    let ev_t = Evaluator::new(&t0, &target);
    let ev_p = Evaluator::new(&t0, phi);
    let mut psi = Vec::with_capacity(opts.samples + 1);
    let mut y = x0.clone();
    let mut s = Q::zero();
    let mut raw = Q::zero();
    let mut sup_bound = 0.0f64;
    let mut raw_sup = 0.0f64;
    psi.push(0.0);
    for _ in 0..opts.samples {
        let (v, next) = ev_t.step(&y)?;
        let (r, _) = ev_p.step(&y)?;
        s -= v;
        raw += r;
        y = next;
        let pf = to_f64(&s);
        sup_bound = sup_bound.max(pf.abs());
        raw_sup = raw_sup.max(to_f64(&raw).abs());
        psi.push(pf);
    }
    Ok(SolveReport {
        chi,
        chi_exact,
        chi_uncertainty,
        series_terms,
        series_depth,
        depth,
        stable_dim: sp.dim,
        decay,
        omega_hat,
        x0: fmt_q(&x0),
        psi,
        sup_bound,
        raw_sup,
        var_derivative: to_f64(&dphi.variation()),
        cross_check,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HigherReport {
    pub r: usize,
    /// χ ∈ Γ_*(r), one polynomial of degree < r per interval.
    #[serde(skip)]
    pub chi: PiecewiseBV,
    pub chi_coefficients: Vec<Vec<f64>>,
    pub base: SolveReport,
    /// (h, sup |Ψ(x) − Ψ(y)|) over orbit points with |x − y| < h.
    pub modulus: Vec<(f64, f64)>,
}

/// Φ = χ + Ψ − Ψ∘T with χ ∈ Γ_*(r), by induction on r: solve for DΦ, integrate the obstruction,
/// and absorb what is left into Γ with the r = 1 solver.
pub fn solve_higher(a: &AccelOrbit, phi: &PiecewiseBV, r: usize, opts: &SolveOptions) -> Result<HigherReport> {
    if !(1..=3).contains(&r) {
        return Err(Error::Invalid("r must be 1, 2 or 3".into()));
    }
    let (chi0, base) = if r == 1 {
        let base = solve_cohomological(a, phi, opts)?;
        (PiecewiseBV::constants(phi.lengths(), &vec![Q::zero(); phi.d()]), base)
    } else {
        let lower = solve_higher(a, &phi.derivative(), r - 1, opts)?;
        let chi0 = lower.chi.primitive();
        let base = solve_cohomological(a, &phi.sub(&chi0)?, opts)?;
        (chi0, base)
    };
    let chi = chi0.add_constants(&base.chi_exact);
    let chi_coefficients = (0..chi.d()).map(|a| chi.pieces(a)[0].poly.0.iter().map(to_f64).collect()).collect();
    let modulus = continuity_modulus(a, &base)?;
    Ok(HigherReport { r, chi, chi_coefficients, base, modulus })
}

fn continuity_modulus(a: &AccelOrbit, rep: &SolveReport) -> Result<Vec<(f64, f64)>> {
    let t = a.level_iem(0)?;
    let st = t.stepper();
    let mut x = parse_q(&rep.x0)?;
    let mut pts = Vec::with_capacity(rep.psi.len());
    for p in &rep.psi {
        pts.push((to_f64(&x), *p));
        x = st.apply(&x)?.1;
    }
    pts.sort_by(|u, v| u.0.total_cmp(&v.0));
    Ok([1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&h| {
            let m = pts.windows(2).filter(|w| w[1].0 - w[0].0 < h).map(|w| (w[1].1 - w[0].1).abs()).fold(0.0, f64::max);
            (h, m)
        })
        .collect())
}
