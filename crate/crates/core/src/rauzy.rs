//! Rauzy–Veech induction: single steps, diagrams and run-length encoded orbits.
//!
//! Consecutive arrows with the same name always have the same type, and the
//! losers of such a run cycle through the tail of the other row. Orbits are
//! therefore stored as maximal runs, so that paths like `B^(2^32)` stay cheap.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{ConnexionHalt, Error, Result};
use crate::iem::{CombinatorialData, Iem};
use crate::matrix::IntMatrix;
use crate::num::Q;

/// Combinatorial part of R_ε. Returns (target, winner, loser).
pub fn step_combo(c: &CombinatorialData, eps: usize) -> (CombinatorialData, usize, usize) {
    let d = c.d();
    let win = c.last(eps);
    let lose = c.last(1 - eps);
    let other = c.pi(1 - eps);
    let pw = other[win];
    let moved: Vec<usize> = other
        .iter()
        .map(|&p| {
            if p <= pw {
                p
            } else if p < d {
                p + 1
            } else {
                pw + 1
            }
        })
        .collect();
    let target = if eps == 0 { c.with_pi(c.pi(0).to_vec(), moved) } else { c.with_pi(moved, c.pi(1).to_vec()) };
    (target, win, lose)
}

/// R_ε⁻¹: the unique source whose type-ε arrow lands on `c`. Returns (source, winner, loser).
pub fn inverse_step_combo(c: &CombinatorialData, eps: usize) -> (CombinatorialData, usize, usize) {
    let d = c.d();
    let win = c.last(eps);
    let other = c.pi(1 - eps);
    let pl = other[win] + 1;
    let lose = other.iter().position(|&p| p == pl).expect("winner is never last in the other row");
    let moved: Vec<usize> = other
        .iter()
        .map(|&p| {
            if p < pl {
                p
            } else if p == pl {
                d
            } else {
                p - 1
            }
        })
        .collect();
    let source = if eps == 0 { c.with_pi(c.pi(0).to_vec(), moved) } else { c.with_pi(moved, c.pi(1).to_vec()) };
    (source, win, lose)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RauzyArrow {
    pub source: CombinatorialData,
    pub target: CombinatorialData,
    pub eps: usize,
    /// α_ε, the winner.
    pub name: usize,
    /// α_{1−ε}, the loser.
    pub secondary: usize,
}

impl RauzyArrow {
    pub fn from_source(source: &CombinatorialData, eps: usize) -> Self {
        let (target, name, secondary) = step_combo(source, eps);
        RauzyArrow { source: source.clone(), target, eps, name, secondary }
    }

    /// V = I + E_{α_ε α_{1−ε}}
    pub fn v(&self) -> IntMatrix {
        IntMatrix::elementary(self.source.d(), self.name, self.secondary)
    }

    pub fn name_str(&self) -> &str {
        self.source.name(self.name)
    }
}

/// One basic step in exact arithmetic.
pub fn rauzy_step(t: &Iem) -> Result<(Iem, RauzyArrow)> {
    let c = t.combo();
    let (a0, a1) = (c.last(0), c.last(1));
    let l = t.lengths();
    if l[a0] == l[a1] {
        return Err(Error::Connexion(ConnexionHalt {
            step: 1,
            alpha: c.name(a0).to_string(),
            beta: c.name(a1).to_string(),
        }));
    }
    let eps = if l[a0] > l[a1] { 0 } else { 1 };
    let arrow = RauzyArrow::from_source(c, eps);
    let mut nl = l.to_vec();
    nl[arrow.name] = &nl[arrow.name] - &nl[arrow.secondary];
    Ok((Iem::new(arrow.target.clone(), nl)?, arrow))
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagramArrow {
    pub src: usize,
    pub dst: usize,
    #[serde(rename = "type")]
    pub eps: usize,
    pub name: String,
    pub secondary: String,
}

/// Connected component of a vertex under R₀ and R₁.
#[derive(Clone, Debug)]
pub struct RauzyDiagram {
    pub vertices: Vec<CombinatorialData>,
    pub arrows: Vec<DiagramArrow>,
    index: HashMap<CombinatorialData, usize>,
}

impl RauzyDiagram {
    pub fn index_of(&self, c: &CombinatorialData) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// (in-degree, out-degree) per vertex, each split by type.
    pub fn degrees(&self) -> Vec<([usize; 2], [usize; 2])> {
        let mut deg = vec![([0; 2], [0; 2]); self.vertices.len()];
        for a in &self.arrows {
            deg[a.dst].0[a.eps] += 1;
            deg[a.src].1[a.eps] += 1;
        }
        deg
    }

    /// Vertices of the reduced diagram, keyed by π₁∘π₀⁻¹, in order of first appearance.
    pub fn reduced_vertices(&self) -> Vec<Vec<usize>> {
        let mut seen = Vec::new();
        for v in &self.vertices {
            let k = v.reduced_key();
            if !seen.contains(&k) {
                seen.push(k);
            }
        }
        seen
    }

    /// Arrows of the reduced diagram as (src, dst, type) on reduced indices.
    pub fn reduced_arrows(&self) -> Vec<(usize, usize, usize)> {
        let red = self.reduced_vertices();
        let pos = |c: &CombinatorialData| red.iter().position(|k| *k == c.reduced_key()).unwrap();
        let mut out: Vec<(usize, usize, usize)> =
            self.arrows.iter().map(|a| (pos(&self.vertices[a.src]), pos(&self.vertices[a.dst]), a.eps)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The reduced vertex set is closed under the canonical involution (π ↦ π⁻¹).
    pub fn involution_closed(&self) -> bool {
        let red = self.reduced_vertices();
        red.iter().all(|k| {
            let mut inv = vec![0; k.len()];
            for (i, &p) in k.iter().enumerate() {
                inv[p - 1] = i + 1;
            }
            red.contains(&inv)
        })
    }
}

pub fn build_diagram(base: &CombinatorialData) -> Result<RauzyDiagram> {
    if !base.is_admissible() {
        return Err(Error::NotAdmissible);
    }
    let mut vertices = vec![base.clone()];
    let mut index = HashMap::from([(base.clone(), 0)]);
    let mut arrows = Vec::new();
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for eps in 0..2 {
            let a = RauzyArrow::from_source(&vertices[i], eps);
            debug_assert!(a.target.is_admissible());
            let j = *index.entry(a.target.clone()).or_insert_with(|| {
                vertices.push(a.target.clone());
                queue.push_back(vertices.len() - 1);
                vertices.len() - 1
            });
            arrows.push(DiagramArrow {
                src: i,
                dst: j,
                eps,
                name: a.name_str().to_string(),
                secondary: a.source.name(a.secondary).to_string(),
            });
        }
    }
    Ok(RauzyDiagram { vertices, arrows, index })
}

/// A maximal block of consecutive arrows sharing name (hence type).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Run {
    pub eps: usize,
    pub winner: usize,
    pub count: u64,
}

/// Losers met by a type-ε run from `c`, in order; they repeat with this period.
pub fn loser_cycle(c: &CombinatorialData, eps: usize) -> Vec<usize> {
    let w = c.last(eps);
    let order = c.order(1 - eps);
    let q = c.pi(1 - eps)[w];
    order[q..].iter().rev().copied().collect()
}

fn advance(c: &CombinatorialData, eps: usize, count: u64) -> CombinatorialData {
    let p = loser_cycle(c, eps).len() as u64;
    let mut v = c.clone();
    for _ in 0..count % p {
        v = step_combo(&v, eps).0;
    }
    v
}

/// How often each loser is hit in a run of `count` arrows.
fn loser_tally(cycle: &[usize], count: u64) -> Vec<(usize, u64)> {
    let p = cycle.len() as u64;
    cycle.iter().enumerate().map(|(j, &l)| (l, count / p + u64::from((j as u64) < count % p))).collect()
}

/// Lengths sharing one denominator; induction only subtracts, so it never changes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthTrack {
    pub nums: Vec<BigInt>,
    pub den: BigInt,
}

impl LengthTrack {
    pub fn from_lengths(l: &[Q]) -> Self {
        let den = l.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let nums = l.iter().map(|x| x.numer() * (&den / x.denom())).collect();
        LengthTrack { nums, den }
    }

    pub fn to_lengths(&self) -> Vec<Q> {
        self.nums.iter().map(|n| Q::new(n.clone(), self.den.clone())).collect()
    }

    pub fn total(&self) -> Q {
        Q::new(self.nums.iter().sum(), self.den.clone())
    }

    fn apply_run(&mut self, winner: usize, tally: &[(usize, u64)]) {
        for &(l, k) in tally {
            let dec = &self.nums[l] * BigInt::from(k);
            self.nums[winner] -= dec;
        }
    }
}

/// A path in a Rauzy diagram, optionally carrying the length data that drove it.
#[derive(Clone, Debug)]
pub struct CocycleOrbit {
    /// starts[i] is the vertex where run i begins; the last entry is the current end.
    starts: Vec<CombinatorialData>,
    runs: Vec<Run>,
    /// ends[i] = number of arrows through run i.
    ends: Vec<u128>,
    /// Lengths at each run boundary (length-driven mode).
    lengths: Option<Vec<LengthTrack>>,
    halt: Option<ConnexionHalt>,
}

impl CocycleOrbit {
    pub fn empty(base: &CombinatorialData) -> Self {
        CocycleOrbit { starts: vec![base.clone()], runs: Vec::new(), ends: Vec::new(), lengths: None, halt: None }
    }

    pub fn from_iem(t: &Iem) -> Self {
        let mut o = Self::empty(t.combo());
        o.lengths = Some(vec![LengthTrack::from_lengths(t.lengths())]);
        o
    }

    pub fn base(&self) -> &CombinatorialData {
        &self.starts[0]
    }

    pub fn end_vertex(&self) -> &CombinatorialData {
        self.starts.last().unwrap()
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn run_start(&self, i: usize) -> &CombinatorialData {
        &self.starts[i]
    }

    /// Arrow count at the end of each run.
    pub fn run_ends(&self) -> &[u128] {
        &self.ends
    }

    pub fn len(&self) -> u128 {
        self.ends.last().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn halt(&self) -> Option<&ConnexionHalt> {
        self.halt.as_ref()
    }

    pub fn is_length_driven(&self) -> bool {
        self.lengths.is_some()
    }

    pub fn d(&self) -> usize {
        self.base().d()
    }

    fn push_run(&mut self, eps: usize, count: u64) {
        let start = self.end_vertex().clone();
        let winner = start.last(eps);
        let prev = self.len();
        match self.runs.last_mut() {
            Some(r) if r.eps == eps => {
                // same name continues the previous run
                r.count += count;
                *self.ends.last_mut().unwrap() += count as u128;
                let st = &self.starts[self.starts.len() - 2];
                let end = advance(st, eps, r.count);
                *self.starts.last_mut().unwrap() = end;
            }
            _ => {
                self.runs.push(Run { eps, winner, count });
                self.ends.push(prev + count as u128);
                self.starts.push(advance(&start, eps, count));
            }
        }
    }

    /// λ⁽ⁿ⁾ for any n ≤ len(), exact.
    pub fn lambda_at(&self, n: u128) -> Option<Vec<Q>> {
        let lens = self.lengths.as_ref()?;
        let i = self.ends.partition_point(|&e| e < n);
        if i == self.runs.len() || n == 0 {
            let j = if n == 0 { 0 } else { self.runs.len() };
            return Some(lens[j].to_lengths());
        }
        let before = if i == 0 { 0 } else { self.ends[i - 1] };
        let r = &self.runs[i];
        let mut tr = lens[i].clone();
        tr.apply_run(r.winner, &loser_tally(&loser_cycle(&self.starts[i], r.eps), (n - before) as u64));
        Some(tr.to_lengths())
    }

    /// λ at run boundary i (0 = input lengths).
    pub fn lambda_at_run(&self, i: usize) -> Option<Vec<Q>> {
        self.lengths.as_ref().map(|l| l[i].to_lengths())
    }

    pub fn current_lengths(&self) -> Option<&LengthTrack> {
        self.lengths.as_ref().and_then(|l| l.last())
    }

    /// I + Σ_ℓ n_ℓ E_{w,ℓ}: the V-product of run i (the elementary factors commute).
    pub fn run_matrix(&self, i: usize) -> IntMatrix {
        let r = &self.runs[i];
        let mut m = IntMatrix::identity(self.d());
        for (l, k) in loser_tally(&loser_cycle(&self.starts[i], r.eps), r.count) {
            m.set(r.winner, l, BigInt::from(k));
        }
        m
    }

    /// Right-multiplies `m` by the product of runs a..b.
    pub fn mul_runs(&self, m: &mut IntMatrix, a: usize, b: usize) {
        for i in a..b {
            let r = &self.runs[i];
            for (l, k) in loser_tally(&loser_cycle(&self.starts[i], r.eps), r.count) {
                if k == 0 {
                    continue;
                }
                for row in 0..self.d() {
                    let add = m.get(row, r.winner) * BigInt::from(k);
                    if !add.is_zero() {
                        let v = m.get(row, l) + add;
                        m.set(row, l, v);
                    }
                }
            }
        }
    }

    /// V⁽¹⁾⋯V⁽ᴺ⁾ over the whole path.
    pub fn product(&self) -> IntMatrix {
        let mut m = IntMatrix::identity(self.d());
        self.mul_runs(&mut m, 0, self.runs.len());
        m
    }

    /// Arrow names, one per step. Only sensible for short paths.
    pub fn name_string(&self) -> String {
        let c = self.base();
        let sep = if c.alphabet().iter().all(|s| s.chars().count() == 1) { "" } else { " " };
        let mut parts = Vec::new();
        for r in &self.runs {
            for _ in 0..r.count {
                parts.push(c.name(r.winner));
            }
        }
        parts.join(sep)
    }

    /// Run-length form such as "D^2 C D A^2 B^5 A".
    pub fn name_runs(&self) -> String {
        self.runs
            .iter()
            .map(|r| {
                let s = self.base().name(r.winner);
                if r.count == 1 {
                    s.to_string()
                } else {
                    format!("{s}^{}", r.count)
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Every arrow, expanded. Panics on paths longer than 10⁷.
    pub fn arrows(&self) -> Vec<RauzyArrow> {
        assert!(self.len() <= 10_000_000, "path too long to expand");
        let mut out = Vec::with_capacity(self.len() as usize);
        for (i, r) in self.runs.iter().enumerate() {
            let mut v = self.starts[i].clone();
            for _ in 0..r.count {
                let a = RauzyArrow::from_source(&v, r.eps);
                v = a.target.clone();
                out.push(a);
            }
        }
        out
    }

    /// Runs the length-driven induction for up to `steps` more arrows or `max_runs` more runs,
    /// whichever comes first. Stops at a connexion and records it.
    pub fn extend(&mut self, steps: u128, max_runs: usize) -> Result<()> {
        let mut left = steps;
        let mut runs = 0;
        while left > 0 && runs < max_runs && self.halt.is_none() {
            let v = self.end_vertex().clone();
            let track = self
                .lengths
                .as_ref()
                .ok_or_else(|| Error::Invalid("orbit has no lengths".into()))?
                .last()
                .unwrap()
                .clone();
            let (a0, a1) = (v.last(0), v.last(1));
            let (x0, x1) = (&track.nums[a0], &track.nums[a1]);
            if x0 == x1 {
                self.halt = Some(ConnexionHalt {
                    step: (self.len() + 1) as usize,
                    alpha: v.name(a0).to_string(),
                    beta: v.name(a1).to_string(),
                });
                break;
            }
            let eps = if x0 > x1 { 0 } else { 1 };
            let w = v.last(eps);
            let cycle = loser_cycle(&v, eps);
            let p = cycle.len();
            let mut pre = vec![BigInt::zero(); p + 1];
            for j in 0..p {
                pre[j + 1] = &pre[j] + &track.nums[cycle[j]];
            }
            let lw = &track.nums[w];
            let full = (lw - 1u32) / &pre[p];
            let rem = lw - &full * &pre[p];
            let j = (0..p).find(|&j| rem <= pre[j + 1]).unwrap();
            let total = full * BigInt::from(p) + BigInt::from(j);
            let total = total.to_u128().ok_or_else(|| Error::Invalid("run length overflows".into()))?;
            let halts = rem == pre[j + 1];
            let count = total.min(left);
            let count_u64 = u64::try_from(count).map_err(|_| Error::Invalid("run length overflows".into()))?;
            if count_u64 > 0 {
                let mut tr = track;
                tr.apply_run(w, &loser_tally(&cycle, count_u64));
                // keep the boundary list aligned with runs: merge replaces the last entry
                let merging = matches!(self.runs.last(), Some(r) if r.eps == eps);
                self.push_run(eps, count_u64);
                let lens = self.lengths.as_mut().unwrap();
                if merging {
                    *lens.last_mut().unwrap() = tr;
                } else {
                    lens.push(tr);
                }
                left -= count;
            }
            runs += 1;
            if halts && count == total {
                let v = self.end_vertex();
                self.halt = Some(ConnexionHalt {
                    step: (self.len() + 1) as usize,
                    alpha: v.name(v.last(0)).to_string(),
                    beta: v.name(v.last(1)).to_string(),
                });
            }
        }
        Ok(())
    }

    /// Appends a run of `count` arrows named `name` (path-driven mode only).
    pub fn push_name(&mut self, name: &str, count: u64) -> Result<()> {
        if self.lengths.is_some() {
            return Err(Error::Invalid("cannot append names to a length-driven orbit".into()));
        }
        if count == 0 {
            return Ok(());
        }
        let v = self.end_vertex();
        let eps = match v.index(name) {
            Some(a) if a == v.last(0) => 0,
            Some(a) if a == v.last(1) => 1,
            _ => {
                return Err(Error::NameNotAvailable { vertex: self.len() as usize, name: name.to_string() });
            }
        };
        self.push_run(eps, count);
        Ok(())
    }

    /// Attaches length data λ⁽⁰⁾ to a path-driven orbit after checking it really drives this path.
    pub fn with_lengths(&self, l: &[Q]) -> Result<CocycleOrbit> {
        let mut o = CocycleOrbit::from_iem(&Iem::new(self.base().clone(), l.to_vec())?);
        for r in &self.runs {
            let before = o.len();
            o.extend(r.count as u128, 1)?;
            if o.len() - before != r.count as u128 || o.runs.last().map(|x| x.winner) != Some(r.winner) {
                return Err(Error::Invalid("lengths do not follow the path".into()));
            }
        }
        Ok(o)
    }
}

/// Path-driven orbit from a list of arrow names.
pub fn path_by_names<S: AsRef<str>>(base: &CombinatorialData, names: &[S]) -> Result<CocycleOrbit> {
    let mut o = CocycleOrbit::empty(base);
    for n in names {
        o.push_name(n.as_ref(), 1)?;
    }
    Ok(o)
}

/// Path-driven orbit from (name, repetition) pairs.
pub fn path_by_runs<S: AsRef<str>>(base: &CombinatorialData, runs: &[(S, u64)]) -> Result<CocycleOrbit> {
    let mut o = CocycleOrbit::empty(base);
    for (n, k) in runs {
        o.push_name(n.as_ref(), *k)?;
    }
    Ok(o)
}

/// Splits "D2CDA2B5A" style words: a symbol optionally followed by a repeat count.
/// Only for single-character alphabets.
pub fn parse_name_word(word: &str) -> Result<Vec<(String, u64)>> {
    let mut out: Vec<(String, u64)> = Vec::new();
    let mut chars = word.chars().filter(|c| !c.is_whitespace() && *c != '^').peekable();
    while let Some(c) = chars.next() {
        if c.is_ascii_digit() {
            return Err(Error::Invalid(format!("unexpected digit in {word:?}")));
        }
        let mut digits = String::new();
        while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
            digits.push(*d);
            chars.next();
        }
        let k = if digits.is_empty() { 1 } else { digits.parse().map_err(|_| Error::Invalid(word.into()))? };
        out.push((c.to_string(), k));
    }
    Ok(out)
}

/// Length-driven induction for `steps` arrows (stops early at a connexion).
pub fn iterate(t: &Iem, steps: u128) -> CocycleOrbit {
    let mut o = CocycleOrbit::from_iem(t);
    o.extend(steps, usize::MAX).expect("length-driven orbit");
    o
}
