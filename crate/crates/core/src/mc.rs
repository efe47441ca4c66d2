//! Seeded Monte Carlo probes over Lebesgue-random lengths.
//!
//! Sample i draws from a ChaCha8 stream (seed, i), so records do not depend on thread count or
//! completion order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accel::{accelerate_iem, AccelOrbit};
use crate::error::{Error, Result};
use crate::families::{appendix_b_orbit, b_params};
use crate::iem::{random_lengths, CombinatorialData, Iem};
use crate::num::{fmt_q, ln_big, ls_slope};
use crate::roth::{diagnose, ln_restricted_norm, Thresholds};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub samples: usize,
    pub top: String,
    pub bottom: String,
    /// Acceleration levels (blocks) per sample.
    pub depth: usize,
    /// Lengths live on the grid 2^-precision.
    pub precision: u32,
    /// Cap on Rauzy runs per sample.
    pub max_runs: usize,
    pub thresholds: Thresholds,
}

impl McConfig {
    pub fn new(top: &str, bottom: &str, samples: usize, depth: usize) -> Self {
        McConfig {
            seed: 0,
            samples,
            top: top.into(),
            bottom: bottom.into(),
            depth,
            precision: 256,
            max_runs: 1_000_000,
            thresholds: Thresholds::default(),
        }
    }

    fn combo(&self) -> Result<CombinatorialData> {
        let c = CombinatorialData::from_words(&self.top, &self.bottom)?;
        if !c.is_admissible() {
            return Err(Error::NotAdmissible);
        }
        Ok(c)
    }

    fn rng(&self, sample: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample as u64);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    /// The rational lengths hit a connexion before `depth` levels.
    Connexion,
    /// `max_runs` ran out, or a diagnostic could not be evaluated.
    Incomplete,
}

/// Runs the exact induction for one sample; connexions and short orbits become a status.
fn sample_orbit(
    cfg: &McConfig,
    c: &CombinatorialData,
    d_accel: usize,
    sample: usize,
) -> Result<(Vec<String>, std::result::Result<AccelOrbit, SampleStatus>)> {
    let mut rng = cfg.rng(sample);
    let lengths = random_lengths(&mut rng, c.d(), cfg.precision);
    let shown = lengths.iter().map(fmt_q).collect();
    let t = Iem::new(c.clone(), lengths)?;
    let a = match accelerate_iem(&t, d_accel, cfg.depth, cfg.max_runs) {
        Ok(a) => a,
        Err(Error::InsufficientOrbit) => return Ok((shown, Err(SampleStatus::Connexion))),
        Err(e) => return Err(e),
    };
    if a.levels() < cfg.depth {
        let status = if a.orbit().halt().is_some() { SampleStatus::Connexion } else { SampleStatus::Incomplete };
        return Ok((shown, Err(status)));
    }
    Ok((shown, Ok(a.truncated(cfg.depth))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullMeasureRecord {
    pub sample: usize,
    pub lengths: Vec<String>,
    pub status: SampleStatus,
    pub a_fit: Option<f64>,
    pub theta_fit: Option<f64>,
    pub a: Option<bool>,
    pub b: Option<bool>,
    pub c: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullMeasureReport {
    pub config: McConfig,
    pub records: Vec<FullMeasureRecord>,
    pub evaluated: usize,
    pub connexions: usize,
    pub incomplete: usize,
    pub fraction_a: f64,
    pub fraction_b: f64,
    pub fraction_c: f64,
    pub theta_median: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn fraction(records: &[FullMeasureRecord], f: impl Fn(&FullMeasureRecord) -> Option<bool>) -> f64 {
    let ok: Vec<bool> = records.iter().filter(|r| r.status == SampleStatus::Ok).filter_map(f).collect();
    if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().filter(|&&x| x).count() as f64 / ok.len() as f64
    }
}

impl FullMeasureReport {
    /// Recomputes the aggregates from the records.
    pub fn from_records(config: McConfig, records: Vec<FullMeasureRecord>) -> Self {
        let count = |s: SampleStatus| records.iter().filter(|r| r.status == s).count();
        FullMeasureReport {
            evaluated: count(SampleStatus::Ok),
            connexions: count(SampleStatus::Connexion),
            incomplete: count(SampleStatus::Incomplete),
            fraction_a: fraction(&records, |r| r.a),
            fraction_b: fraction(&records, |r| r.b),
            fraction_c: fraction(&records, |r| r.c),
            theta_median: median(records.iter().filter_map(|r| r.theta_fit).collect()),
            config,
            records,
        }
    }
}

/// Roth verdict fractions over random lengths, with D = d − 1 blocks.
pub fn mc_full_measure(cfg: &McConfig) -> Result<FullMeasureReport> {
    let c = cfg.combo()?;
    let d_accel = c.d() - 1;
    let records = (0..cfg.samples)
        .into_par_iter()
        .map(|i| -> Result<FullMeasureRecord> {
            let (lengths, orbit) = sample_orbit(cfg, &c, d_accel, i)?;
            let mut rec = FullMeasureRecord {
                sample: i,
                lengths,
                status: SampleStatus::Ok,
                a_fit: None,
                theta_fit: None,
                a: None,
                b: None,
                c: None,
            };
            match orbit.map(|a| diagnose(&a, &cfg.thresholds)) {
                Err(s) => rec.status = s,
                Ok(Err(_)) => rec.status = SampleStatus::Incomplete,
                Ok(Ok(dg)) => {
                    rec.a_fit = Some(dg.a.fit_exponent);
                    rec.theta_fit = Some(dg.theta.fit_theta);
                    rec.a = Some(dg.verdicts.a);
                    rec.b = Some(dg.verdicts.b);
                    // d = 2 has no stable directions to test; the verdict is vacuous there
                    rec.c = if dg.c.is_some() { Some(dg.verdicts.c) } else { None };
                }
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FullMeasureReport::from_records(cfg.clone(), records))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRecord {
    pub sample: usize,
    pub status: SampleStatus,
    /// ln‖Q(K)‖₁ / K along D = 1 blocks.
    pub top: Option<f64>,
    /// Growth rate of ᵗQ(K) on the mean-zero hyperplane Γ_*.
    pub second: Option<f64>,
    pub gap: Option<f64>,
    /// log₂‖Z₍₁₎(k)‖∞ for the blocks k > 2.
    pub z_log2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub n: u32,
    pub exceed: usize,
    pub total: usize,
    /// None when nothing exceeds 2^n.
    pub log2_p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, count: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { f64::NAN };
        Estimate { mean, stderr: (var / n as f64).sqrt(), count: n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub config: McConfig,
    pub records: Vec<LyapunovRecord>,
    pub top: Estimate,
    pub second: Estimate,
    pub gap: Estimate,
    pub tail: Vec<TailPoint>,
    /// Least-squares slope of log₂P(‖Z₍₁₎‖∞ > 2^N) over `tail_range`.
    pub tail_slope: f64,
    pub tail_range: (u32, u32),
    pub connexions: usize,
    pub incomplete: usize,
}

/// Blocks skipped at the start of each orbit before tail sampling.
pub const TAIL_BURN_IN: usize = 2;

impl LyapunovReport {
    pub fn from_records(config: McConfig, records: Vec<LyapunovRecord>, tail_range: (u32, u32)) -> Self {
        let ok: Vec<&LyapunovRecord> = records.iter().filter(|r| r.status == SampleStatus::Ok).collect();
        let pick = |f: fn(&LyapunovRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
        let norms: Vec<f64> = ok.iter().flat_map(|r| r.z_log2.iter().copied()).collect();
        let total = norms.len();
        let tail: Vec<TailPoint> = (0..=tail_range.1 + 2)
            .map(|n| {
                let exceed = norms.iter().filter(|&&x| x > n as f64).count();
                let log2_p = (exceed > 0).then(|| (exceed as f64 / total as f64).log2());
                TailPoint { n, exceed, total, log2_p }
            })
            .collect();
        let fit: Vec<&TailPoint> =
            tail.iter().filter(|p| (tail_range.0..=tail_range.1).contains(&p.n) && p.exceed > 0).collect();
        let xs: Vec<f64> = fit.iter().map(|p| p.n as f64).collect();
        let ys: Vec<f64> = fit.iter().filter_map(|p| p.log2_p).collect();
        let count = |s: SampleStatus| records.iter().filter(|r| r.status == s).count();
        LyapunovReport {
            top: Estimate::of(&pick(|r| r.top)),
            second: Estimate::of(&pick(|r| r.second)),
            gap: Estimate::of(&pick(|r| r.gap)),
            tail,
            tail_slope: ls_slope(&xs, &ys),
            tail_range,
            connexions: count(SampleStatus::Connexion),
            incomplete: count(SampleStatus::Incomplete),
            config,
            records,
        }
    }
}

/// Exponent and tail estimates along Zorich (D = 1) blocks.
pub fn mc_lyapunov(cfg: &McConfig, tail_range: (u32, u32)) -> Result<LyapunovReport> {
    let c = cfg.combo()?;
    let records = (0..cfg.samples)
        .into_par_iter()
        .map(|i| -> Result<LyapunovRecord> {
            let (_, orbit) = sample_orbit(cfg, &c, 1, i)?;
            let mut rec = LyapunovRecord {
                sample: i,
                status: SampleStatus::Ok,
                top: None,
                second: None,
                gap: None,
                z_log2: Vec::new(),
            };
            let a = match orbit {
                Ok(a) => a,
                Err(s) => {
                    rec.status = s;
                    return Ok(rec);
                }
            };
            let k = a.levels();
            let top = ln_big(&a.q0(k).sum_norm()) / k as f64;
            let second = ln_restricted_norm(&a, k)? / k as f64;
            rec.top = Some(top);
            rec.second = Some(second);
            rec.gap = Some(top - second);
            rec.z_log2 = (TAIL_BURN_IN + 1..=k).map(|j| ln_big(&a.z(j).sup_norm()) / std::f64::consts::LN_2).collect();
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LyapunovReport::from_records(cfg.clone(), records, tail_range))
}

/// Row of the growth-comparison table; norms are natural logs of ‖·‖₁.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Q47Row {
    pub sample: String,
    pub k: usize,
    #[serde(rename = "Znorm")]
    pub z_norm: f64,
    #[serde(rename = "Qnorm")]
    pub q_norm: f64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Q47Report {
    pub config: McConfig,
    /// Exploratory: no claim is tested.
    pub label: String,
    pub rows: Vec<Q47Row>,
    /// Per sample: sup of C_hat over the second half of the levels.
    pub tail_sups: Vec<(String, f64)>,
    pub tail_sup_median: f64,
}

/// Rows for levels whose ln‖Q(k)‖₁ exceeds e, so that log log‖Q‖ > 0.
pub fn q47_rows(name: &str, a: &AccelOrbit) -> Vec<Q47Row> {
    (1..=a.levels())
        .filter_map(|k| {
            let q_norm = ln_big(&a.q0(k).sum_norm());
            (q_norm > std::f64::consts::E).then(|| {
                let z_norm = ln_big(&a.z(k).sum_norm());
                Q47Row { sample: name.to_string(), k, z_norm, q_norm, c_hat: z_norm / q_norm.ln() }
            })
        })
        .collect()
}

fn tail_sup(rows: &[Q47Row], levels: usize) -> Option<f64> {
    rows.iter().filter(|r| r.k > levels / 2).map(|r| r.c_hat).reduce(f64::max)
}

/// C_hat(k) = log‖Z₍d−1₎(k)‖ / log log‖Q(k)‖ over random samples.
pub fn probe_q47(cfg: &McConfig) -> Result<Q47Report> {
    let c = cfg.combo()?;
    let per: Vec<Option<Vec<Q47Row>>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| -> Result<Option<Vec<Q47Row>>> {
            let (_, orbit) = sample_orbit(cfg, &c, c.d() - 1, i)?;
            Ok(orbit.ok().map(|a| q47_rows(&i.to_string(), &a)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut tail_sups = Vec::new();
    for (i, r) in per.into_iter().enumerate() {
        if let Some(r) = r {
            if let Some(s) = tail_sup(&r, cfg.depth) {
                tail_sups.push((i.to_string(), s));
            }
            rows.extend(r);
        }
    }
    Ok(Q47Report {
        config: cfg.clone(),
        label: "exploratory".into(),
        tail_sup_median: median(tail_sups.iter().map(|x| x.1).collect()),
        rows,
        tail_sups,
    })
}

/// The same table along the non uniquely ergodic family with parameter n₀.
pub fn probe_q47_family_b(n0: u64, k: usize) -> Result<Vec<Q47Row>> {
    let pr = b_params(n0, k + 2);
    let a = appendix_b_orbit(&pr, k + 1)?;
    Ok(q47_rows(&format!("B{n0}"), &a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(top: &str, bottom: &str, samples: usize, depth: usize) -> McConfig {
        McConfig { seed: 7, precision: 128, ..McConfig::new(top, bottom, samples, depth) }
    }

    #[test]
    fn identical_configs_give_identical_bytes() {
        let cfg = small("ABC", "CBA", 12, 6);
        let one = serde_json::to_string(&mc_full_measure(&cfg).unwrap()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let two = pool.install(|| serde_json::to_string(&mc_full_measure(&cfg).unwrap()).unwrap());
        assert_eq!(one, two);
        let other = serde_json::to_string(&mc_full_measure(&McConfig { seed: 8, ..cfg }).unwrap()).unwrap();
        assert_ne!(one, other);
    }

    #[test]
    fn records_round_trip_and_rebuild_aggregates() {
        let r = mc_full_measure(&small("ABCD", "DCBA", 6, 6)).unwrap();
        let back: FullMeasureReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(FullMeasureReport::from_records(r.config.clone(), r.records.clone()), r);
        let l = mc_lyapunov(&small("ABC", "CBA", 6, 10), (2, 4)).unwrap();
        let back: LyapunovReport = serde_json::from_str(&serde_json::to_string(&l).unwrap()).unwrap();
        assert_eq!(LyapunovReport::from_records(back.config.clone(), back.records.clone(), (2, 4)), l);
    }

    #[test]
    fn empty_run() {
        let r = mc_full_measure(&small("AB", "BA", 0, 5)).unwrap();
        assert!(r.records.is_empty() && r.evaluated == 0 && r.fraction_a.is_nan());
        assert!(mc_full_measure(&small("AB", "AB", 1, 5)).is_err());
    }

    #[test]
    fn short_precision_reports_connexions() {
        // 8-bit lengths run out of continued-fraction digits long before depth 40
        let r = mc_full_measure(&McConfig { precision: 8, ..small("AB", "BA", 20, 40) }).unwrap();
        assert_eq!(r.connexions, 20);
        assert_eq!(r.records.len(), 20);
    }

    #[test]
    fn levy_constant_anchor() {
        let r = mc_lyapunov(&small("AB", "BA", 200, 30), (2, 6)).unwrap();
        let levy = std::f64::consts::PI.powi(2) / (12.0 * 2f64.ln());
        assert!((r.top.mean / levy - 1.0).abs() < 0.1, "{:?}", r.top);
        // on d = 2 the mean-zero line is the contracted direction
        assert!((r.second.mean + r.top.mean).abs() < 0.1, "{:?}", r.second);
    }

    #[test]
    fn q47_schema_and_family_b_trend() {
        let r = probe_q47(&small("ABCD", "DCBA", 4, 10)).unwrap();
        let row = serde_json::to_string(&r.rows[0]).unwrap();
        let at: Vec<usize> = ["\"sample\"", "\"k\"", "\"Znorm\"", "\"Qnorm\"", "\"C_hat\""]
            .iter()
            .map(|k| row.find(k).unwrap())
            .collect();
        assert!(at.windows(2).all(|w| w[0] < w[1]), "{row}");
        assert_eq!(r.label, "exploratory");
        // ‖Z(k)‖ ≈ (n₀+3k)¹² and ‖Q(k)‖ ≈ c_{3k−2} give C_hat ≈ 12 log(n₀+3k) / log log c_{3k−2},
        // which tends to 12 only logarithmically slowly
        let rows = probe_q47_family_b(10, 12).unwrap();
        for r in rows.iter().filter(|r| r.k >= 4) {
            let z = |j: usize| 12.0 * ((10 + 3 * (j - 1)) as f64).ln();
            let pred = z(r.k) / ln_big(&crate::families::c_k(10, 3 * r.k as i64 - 2)).ln();
            assert!((r.c_hat / pred - 1.0).abs() < 0.1, "{r:?} vs {pred}");
        }
    }
}
