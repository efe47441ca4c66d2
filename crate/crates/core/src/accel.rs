//! Zorich-type accelerations: blocks of arrows using at most D names.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::iem::{CombinatorialData, Iem};
use crate::matrix::IntMatrix;
use crate::num::{sum, Q};
use crate::rauzy::CocycleOrbit;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixNorms {
    pub sum_norm: String,
    pub sup_norm: String,
    pub column_sums: Vec<String>,
}

impl MatrixNorms {
    pub fn of(m: &IntMatrix) -> Self {
        MatrixNorms {
            sum_norm: m.sum_norm().to_string(),
            sup_norm: m.sup_norm().to_string(),
            column_sums: m.column_sums().iter().map(|x| x.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AccelOrbit {
    orbit: CocycleOrbit,
    d_accel: usize,
    /// Block k (1-based) covers runs block_runs[k-1]..block_runs[k].
    block_runs: Vec<usize>,
    breakpoints: Vec<u128>,
    z: Vec<IntMatrix>,
    prefix: Vec<IntMatrix>,
}

/// Greedy block boundaries (as run indices) for the D-acceleration of `orbit`.
fn block_boundaries(orbit: &CocycleOrbit, d_accel: usize) -> Vec<usize> {
    let runs = orbit.runs();
    let mut out = vec![0];
    let mut names: Vec<usize> = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        if !names.contains(&r.winner) {
            if names.len() == d_accel {
                out.push(i);
                names.clear();
            }
            names.push(r.winner);
        }
    }
    out
}

impl AccelOrbit {
    pub fn d_accel(&self) -> usize {
        self.d_accel
    }

    pub fn d(&self) -> usize {
        self.orbit.d()
    }

    /// Number of complete blocks K; levels are 0..=K.
    pub fn levels(&self) -> usize {
        self.z.len()
    }

    pub fn orbit(&self) -> &CocycleOrbit {
        &self.orbit
    }

    /// n_D(k), k = 0..=K.
    pub fn breakpoints(&self) -> &[u128] {
        &self.breakpoints
    }

    /// Z(k) for k = 1..=K.
    pub fn z(&self, k: usize) -> &IntMatrix {
        &self.z[k - 1]
    }

    /// Q(k) = Q(0,k), memoized.
    pub fn q0(&self, k: usize) -> &IntMatrix {
        &self.prefix[k]
    }

    pub fn q(&self, k: usize, l: usize) -> Result<IntMatrix> {
        if k > l || l > self.levels() {
            return Err(Error::Range(k, l));
        }
        if k == 0 {
            return Ok(self.prefix[l].clone());
        }
        let mut m = IntMatrix::identity(self.d());
        for j in k + 1..=l {
            m = m.mul(&self.z[j - 1]);
        }
        Ok(m)
    }

    /// Vertex at the start of level k.
    pub fn vertex(&self, k: usize) -> &CombinatorialData {
        self.orbit.run_start(self.block_runs[k])
    }

    /// λ⁽ᵏ⁾, exact.
    pub fn lambda(&self, k: usize) -> Option<Vec<Q>> {
        self.orbit.lambda_at_run(self.block_runs[k])
    }

    pub fn is_length_driven(&self) -> bool {
        self.orbit.is_length_driven()
    }

    /// T⁽ᵏ⁾ as an i.e.m. on [0, λ*⁽ᵏ⁾).
    pub fn level_iem(&self, k: usize) -> Result<Iem> {
        let l = self.lambda(k).ok_or_else(|| Error::Invalid("orbit has no lengths".into()))?;
        Iem::new(self.vertex(k).clone(), l)
    }

    /// Same blocks, with λ⁽ᴷ⁾ ∝ (1,…,1) pulled back to level 0 (normalized to total length 1).
    /// The resulting i.e.m. follows the path exactly through all K blocks.
    pub fn with_proxy_lengths(&self) -> Result<AccelOrbit> {
        let k = self.levels();
        let ones = vec![BigInt::one(); self.d()];
        let top = self.prefix[k].mul_vec_int(&ones);
        let total: BigInt = top.iter().sum();
        let l: Vec<Q> = top.into_iter().map(|x| Q::new(x, total.clone())).collect();
        let mut path = CocycleOrbit::empty(self.orbit.base());
        for r in &self.orbit.runs()[..self.block_runs[k]] {
            path.push_name(self.orbit.base().name(r.winner), r.count)?;
        }
        let orbit = path.with_lengths(&l)?;
        Ok(AccelOrbit { orbit, ..self.clone() })
    }

    /// Q(k, k+2d−3) (k+2 when d = 2) is entrywise positive.
    pub fn check_positivity(&self, k: usize) -> Result<PositivityReport> {
        let d = self.d();
        let gap = if d == 2 { 2 } else { 2 * d - 3 };
        self.positivity_between(k, k + gap)
    }

    pub fn positivity_between(&self, k: usize, l: usize) -> Result<PositivityReport> {
        let m = self.q(k, l)?;
        Ok(PositivityReport { k, l, positive: m.is_positive(), min_entry: m.min_entry().to_string() })
    }

    /// Itinerary of the left end of j₀(I_β⁽ˡ⁾) under T⁽ᵏ⁾ until its first return to I⁽ˡ⁾:
    /// for each visit, the symbol α at level k and the offset inside j₀(I_α⁽ᵏ⁾).
    /// The whole interval I_β⁽ˡ⁾ travels rigidly along these offsets.
    pub fn return_itinerary(&self, k: usize, l: usize, beta: usize) -> Result<Vec<(usize, Q)>> {
        if k > l || l > self.levels() {
            return Err(Error::Range(k, l));
        }
        let tk = self.level_iem(k)?;
        let tl = self.level_iem(l)?;
        let top = tl.total();
        let st = tk.stepper();
        let starts = tk.left_endpoints(0);
        let mut x = tl.left_endpoints(0)[beta].clone();
        let mut out = Vec::new();
        loop {
            let (a, y) = st.apply(&x)?;
            out.push((a, &x - &starts[a]));
            x = y;
            if x < top {
                break;
            }
        }
        Ok(out)
    }

    /// Visit counts of one point of each I_β⁽ˡ⁾ in each I_α⁽ᵏ⁾ before returning; column β of Q(k,l).
    pub fn return_words(&self, k: usize, l: usize) -> Result<IntMatrix> {
        let d = self.d();
        let mut m = IntMatrix::zeros(d);
        for b in 0..d {
            for (a, _) in self.return_itinerary(k, l, b)? {
                let v = m.get(a, b) + 1;
                m.set(a, b, v);
            }
        }
        Ok(m)
    }

    pub fn norms(&self) -> Vec<LevelNorms> {
        (0..=self.levels())
            .map(|k| LevelNorms {
                k,
                n_d: self.breakpoints[k].to_string(),
                z_norm1: if k == 0 { None } else { Some(self.z[k - 1].sum_norm().to_string()) },
                z_norm_inf: if k == 0 { None } else { Some(self.z[k - 1].sup_norm().to_string()) },
                q_norm1: self.prefix[k].sum_norm().to_string(),
            })
            .collect()
    }

    /// Truncates to the first `k` levels.
    pub fn truncated(&self, k: usize) -> AccelOrbit {
        let k = k.min(self.levels());
        AccelOrbit {
            orbit: self.orbit.clone(),
            d_accel: self.d_accel,
            block_runs: self.block_runs[..=k].to_vec(),
            breakpoints: self.breakpoints[..=k].to_vec(),
            z: self.z[..k].to_vec(),
            prefix: self.prefix[..=k].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PositivityReport {
    pub k: usize,
    pub l: usize,
    pub positive: bool,
    pub min_entry: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelNorms {
    pub k: usize,
    #[serde(rename = "nD")]
    pub n_d: String,
    #[serde(rename = "Z_norm1")]
    pub z_norm1: Option<String>,
    #[serde(rename = "Z_normInf")]
    pub z_norm_inf: Option<String>,
    #[serde(rename = "Q_norm1")]
    pub q_norm1: String,
}

/// Groups the arrows of `orbit` into complete D-blocks.
pub fn accelerate(orbit: &CocycleOrbit, d_accel: usize) -> Result<AccelOrbit> {
    let d = orbit.d();
    if d_accel == 0 || d_accel >= d {
        return Err(Error::Invalid(format!("D must lie in 1..{}", d - 1)));
    }
    let block_runs = block_boundaries(orbit, d_accel);
    if block_runs.len() < 2 {
        return Err(Error::InsufficientOrbit);
    }
    let ends = orbit.run_ends();
    let breakpoints: Vec<u128> = block_runs.iter().map(|&i| if i == 0 { 0 } else { ends[i - 1] }).collect();
    let mut z = Vec::with_capacity(block_runs.len() - 1);
    let mut prefix = vec![IntMatrix::identity(d)];
    for w in block_runs.windows(2) {
        let mut m = IntMatrix::identity(d);
        orbit.mul_runs(&mut m, w[0], w[1]);
        prefix.push(prefix.last().unwrap().mul(&m));
        z.push(m);
    }
    Ok(AccelOrbit { orbit: orbit.clone(), d_accel, block_runs, breakpoints, z, prefix })
}

/// Runs the induction on `t` until `levels` complete D-blocks exist, a connexion halts it,
/// or `max_runs` runs have been generated.
pub fn accelerate_iem(t: &Iem, d_accel: usize, levels: usize, max_runs: usize) -> Result<AccelOrbit> {
    let mut o = CocycleOrbit::from_iem(t);
    let mut names: Vec<usize> = Vec::new();
    let mut complete = 0;
    let mut seen = 0;
    while complete < levels && o.halt().is_none() && o.runs().len() < max_runs {
        o.extend(u128::MAX, 1)?;
        let runs = o.runs();
        if runs.len() == seen {
            break;
        }
        for r in &runs[seen..] {
            if !names.contains(&r.winner) {
                if names.len() == d_accel {
                    complete += 1;
                    names.clear();
                }
                names.push(r.winner);
            }
        }
        seen = runs.len();
    }
    accelerate(&o, d_accel)
}

/// Exact check of Max λ⁽ᵏ⁾ ≥ λ*‖Q(k)‖₁⁻¹ ≥ Min λ⁽ᵏ⁾.
pub fn balance_holds(a: &AccelOrbit, k: usize) -> Option<bool> {
    let l = a.lambda(k)?;
    let l0 = a.lambda(0)?;
    let mid = sum(&l0) / Q::from_integer(a.q0(k).sum_norm());
    let max = l.iter().max()?;
    let min = l.iter().min()?;
    Some(*max >= mid && mid >= *min)
}

/// Max λ⁽ᵏ⁾ / Min λ⁽ᵏ⁾.
pub fn balance_ratio(a: &AccelOrbit, k: usize) -> Option<Q> {
    let l = a.lambda(k)?;
    let max = l.iter().max()?.clone();
    let min = l.iter().min()?.clone();
    if min.is_zero() || min.is_negative() {
        return None;
    }
    Some(max / min)
}
