// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Success probabilities, time-to-solution, bootstrap statistics and
//! speedup-exponent fits.

use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::bv::ShotTable;
use crate::circuit::{Bitstring, DurationModel};
use crate::error::{invalid, Result};

/// How the centre of the exponent confidence interval is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaCenter {
    /// The point estimate from the observed data.
    Point,
    /// Mean of the bootstrap replicates.
    BootstrapMean,
    /// Point estimate minus the bootstrap estimate of its bias.
    #[default]
    BiasCorrected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Desired probability of having seen the answer.
    pub p_d: f64,
    pub bootstrap_b: usize,
    pub tts_ci_sigma: f64,
    pub lambda_ci_sigma: f64,
    /// Smallest left window end used by the exponent fits.
    pub n_min: usize,
    /// Weight fits by the inverse bootstrap variance of log2 TTS.
    pub weighted: bool,
    pub lambda_center: LambdaCenter,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            p_d: 0.99,
            bootstrap_b: 100,
            tts_ci_sigma: 5.0,
            lambda_ci_sigma: 2.0,
            n_min: 3,
            weighted: false,
            lambda_center: LambdaCenter::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_d > 0.0 && self.p_d < 1.0) {
            return invalid(format!("p_d = {} must lie in (0, 1)", self.p_d));
        }
        if self.bootstrap_b < 2 {
            return invalid("bootstrap needs at least two resamples");
        }
        if !(self.tts_ci_sigma > 0.0 && self.lambda_ci_sigma > 0.0) {
            return invalid("confidence widths must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessProb {
    pub p_s: f64,
    pub sigma: f64,
    pub terminated: bool,
}

/// Fraction of shots that returned the hidden string.
pub fn success_prob(table: &ShotTable) -> Result<SuccessProb> {
    let total = table.total_shots();
    if total == 0 {
        return invalid("shot table is empty");
    }
    let p = table.successes() as f64 / total as f64;
    Ok(SuccessProb {
        p_s: p,
        sigma: (p * (1.0 - p) / total as f64).sqrt(),
        terminated: p == 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Repetitions {
    /// Real-valued repetition count; infinite when `p_s = 0`.
    pub r: f64,
    /// Whole repetitions, at least 1.
    pub ceil: f64,
}

/// `R = log(1 - p_d) / log(1 - p_s)`, with `R = 1` at `p_s = 1`.
pub fn repetitions(p_s: f64, p_d: f64) -> Repetitions {
    assert!((0.0..=1.0).contains(&p_s), "p_s = {p_s} outside [0, 1]");
    let r = if p_s >= 1.0 {
        1.0
    } else if p_s <= 0.0 {
        f64::INFINITY
    } else {
        (1.0 - p_d).ln() / (-p_s).ln_1p()
    };
    Repetitions {
        r,
        ceil: r.ceil().max(1.0),
    }
}

pub fn tts_quantum(n: usize, p_s: f64, model: &DurationModel, p_d: f64) -> f64 {
    model.run_time(n) * repetitions(p_s, p_d).r
}

/// Query one bit per run and guess the other `n - 1`, with run time `a n`.
pub fn tts_classical(n: usize, a: f64, p_d: f64) -> f64 {
    assert!(n >= 1, "problem size must be at least 1");
    a * n as f64 * repetitions(crate::bv::classical_success_prob(n), p_d).r
}

/// TTS averaged over the oracles of one problem size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtsPoint {
    pub n: usize,
    /// `None` when the point is terminated.
    pub tts_mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub num_oracles: usize,
    pub terminated: bool,
    /// Retained bootstrap replicates of the mean TTS.
    #[serde(skip)]
    pub replicates: Vec<f64>,
}

impl TtsPoint {
    /// A point with a known value and no uncertainty.
    pub fn exact(n: usize, tts: f64) -> Self {
        let finite = tts.is_finite();
        Self {
            n,
            tts_mean: finite.then_some(tts),
            ci_low: finite.then_some(tts),
            ci_high: finite.then_some(tts),
            num_oracles: 1,
            terminated: !finite,
            replicates: Vec::new(),
        }
    }
}

/// Arithmetic mean over oracles; any infinite value terminates the point.
pub fn mean_tts(n: usize, values: &[f64]) -> Result<TtsPoint> {
    if values.is_empty() {
        return invalid("no oracle TTS values");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Ok(TtsPoint {
            num_oracles: values.len(),
            ..TtsPoint::exact(n, f64::INFINITY)
        });
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(TtsPoint {
        num_oracles: values.len(),
        ..TtsPoint::exact(n, mean)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapResult {
    pub replicates: Vec<f64>,
    pub discarded: usize,
    pub mean: f64,
    pub sigma: f64,
}

fn mean_sigma(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Resamples each oracle's success count at its original shot total.
/// Replicates in which an oracle that succeeded at least once draws zero
/// successes are discarded. Returns `None` when every replicate is
/// discarded.
pub fn bootstrap_counts<R: Rng + ?Sized>(
    counts: &[(u64, u64)],
    b: usize,
    rng: &mut R,
    mut statistic: impl FnMut(&[f64]) -> f64,
) -> Option<BootstrapResult> {
    let mut replicates = Vec::with_capacity(b);
    let mut discarded = 0;
    let mut p = vec![0.0; counts.len()];
    'outer: for _ in 0..b {
        for (slot, &(succ, total)) in p.iter_mut().zip(counts) {
            let p_hat = succ as f64 / total as f64;
            let draw = Binomial::new(total, p_hat)
                .expect("valid binomial")
                .sample(rng);
            if succ > 0 && draw == 0 {
                discarded += 1;
                continue 'outer;
            }
            *slot = draw as f64 / total as f64;
        }
        replicates.push(statistic(&p));
    }
    if replicates.is_empty() {
        return None;
    }
    let (mean, sigma) = mean_sigma(&replicates);
    Some(BootstrapResult {
        replicates,
        discarded,
        mean,
        sigma,
    })
}

/// Mean TTS of one problem size with its bootstrap interval.
pub fn tts_point<R: Rng + ?Sized>(
    n: usize,
    tables: &[ShotTable],
    model: &DurationModel,
    config: &AnalysisConfig,
    rng: &mut R,
) -> Result<TtsPoint> {
    let counts: Vec<(u64, u64)> = tables
        .iter()
        .map(|t| (t.successes(), t.total_shots()))
        .collect();
    if counts.iter().any(|&(_, t)| t == 0) {
        return invalid(format!("empty shot table at n = {n}"));
    }
    let t_r = model.run_time(n);
    let avg = |ps: &[f64]| {
        ps.iter()
            .map(|&p| t_r * repetitions(p, config.p_d).r)
            .sum::<f64>()
            / ps.len() as f64
    };
    let observed: Vec<f64> = counts.iter().map(|&(s, t)| s as f64 / t as f64).collect();
    let base = mean_tts(
        n,
        &observed
            .iter()
            .map(|&p| t_r * repetitions(p, config.p_d).r)
            .collect::<Vec<_>>(),
    )?;
    if base.terminated {
        return Ok(base);
    }
    let point = base.tts_mean.expect("finite point");
    match bootstrap_counts(&counts, config.bootstrap_b, rng, avg) {
        None => Ok(TtsPoint {
            tts_mean: None,
            ci_low: None,
            ci_high: None,
            terminated: true,
            ..base
        }),
        Some(bs) => {
            let half = config.tts_ci_sigma * bs.sigma;
            Ok(TtsPoint {
                ci_low: Some((bs.mean - half).min(point)),
                ci_high: Some((bs.mean + half).max(point)),
                replicates: bs.replicates,
                ..base
            })
        }
    }
}

/// Weighted least squares line `y = slope x + intercept`.
pub fn ols(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..xs.len()).map(w).sum();
    let mx = (0..xs.len()).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let my = (0..xs.len()).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let sxy: f64 = (0..xs.len())
        .map(|i| w(i) * (xs[i] - mx) * (ys[i] - my))
        .sum();
    let sxx: f64 = (0..xs.len()).map(|i| w(i) * (xs[i] - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub l: usize,
    pub u: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambda: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sigma: f64,
    /// Window `[l, u]` attaining the maximum.
    pub window: (usize, usize),
    pub windows: Vec<WindowFit>,
    pub replicates: usize,
}

/// Slopes of `log2 TTS` over `[l, u]` for every admissible `l`.
fn window_fits(
    curve: &[(usize, f64)],
    u: usize,
    l_min: usize,
    weights: Option<&[f64]>,
) -> Vec<WindowFit> {
    let l_min = l_min.max(1);
    if u < l_min + 2 {
        return Vec::new();
    }
    (l_min..=u - 2)
        .filter_map(|l| {
            let idx: Vec<usize> = (0..curve.len())
                .filter(|&i| curve[i].0 >= l && curve[i].0 <= u)
                .collect();
            if idx.len() < 3 {
                return None;
            }
            let xs: Vec<f64> = idx.iter().map(|&i| curve[i].0 as f64).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| curve[i].1.log2()).collect();
            let ws: Option<Vec<f64>> = weights.map(|w| idx.iter().map(|&i| w[i]).collect());
            let (slope, _) = ols(&xs, &ys, ws.as_deref());
            Some(WindowFit {
                l,
                u,
                lambda: slope,
            })
        })
        .collect()
}

/// The finite prefix of a TTS curve, stopping at the first terminated point.
pub fn finite_prefix(points: &[TtsPoint]) -> Vec<&TtsPoint> {
    let mut sorted: Vec<&TtsPoint> = points.iter().collect();
    sorted.sort_by_key(|p| p.n);
    sorted
        .into_iter()
        .take_while(|p| p.tts_mean.is_some())
        .collect()
}

fn max_window(
    curve: &[(usize, f64)],
    u: usize,
    l_min: usize,
    weights: Option<&[f64]>,
) -> Option<(f64, usize, Vec<WindowFit>)> {
    let fits = window_fits(curve, u, l_min, weights);
    let best = fits
        .iter()
        .max_by(|a, b| a.lambda.total_cmp(&b.lambda))?
        .clone();
    Some((best.lambda, best.l, fits))
}

/// Worst-case exponent up to `h_max`: the steepest window `[l, h_max]`.
pub fn local_lambda(points: &[TtsPoint], h_max: usize, config: &AnalysisConfig) -> Result<f64> {
    let curve: Vec<(usize, f64)> = finite_prefix(points)
        .into_iter()
        .filter(|p| p.n <= h_max)
        .map(|p| (p.n, p.tts_mean.expect("finite")))
        .collect();
    if curve.last().map(|c| c.0) != Some(h_max) {
        return invalid(format!("no finite TTS at n = {h_max}"));
    }
    max_window(&curve, h_max, config.n_min, None)
        .map(|r| r.0)
        .ok_or_else(|| {
            crate::error::Error::InvalidArgument("fewer than three points in range".into())
        })
}

/// Worst-case speedup exponent `max_l lambda_{l,u}` with `u` the largest
/// size before the curve terminates, and a bootstrap confidence interval.
pub fn worst_case_lambda(points: &[TtsPoint], config: &AnalysisConfig) -> Result<FitResult> {
    let finite = finite_prefix(points);
    let curve: Vec<(usize, f64)> = finite
        .iter()
        .map(|p| (p.n, p.tts_mean.expect("finite")))
        .collect();
    let Some(&(u, _)) = curve.last() else {
        return invalid("no finite TTS points");
    };
    let weights: Option<Vec<f64>> = config.weighted.then(|| {
        finite
            .iter()
            .map(|p| {
                let (_, s) = if p.replicates.len() > 1 {
                    mean_sigma(&p.replicates)
                } else {
                    (0.0, 0.0)
                };
                let rel = s / (p.tts_mean.expect("finite") * std::f64::consts::LN_2);
                if rel > 0.0 {
                    1.0 / (rel * rel)
                } else {
                    1.0
                }
            })
            .collect()
    });
    let (lambda, l_best, windows) = max_window(&curve, u, config.n_min, weights.as_deref())
        .ok_or_else(|| {
            crate::error::Error::InvalidArgument(
                "need at least three finite points in a window".into(),
            )
        })?;

    let reps = finite.iter().map(|p| p.replicates.len()).min().unwrap_or(0);
    let lambdas: Vec<f64> = (0..reps)
        .filter_map(|b| {
            let c: Vec<(usize, f64)> = finite.iter().map(|p| (p.n, p.replicates[b])).collect();
            max_window(&c, u, config.n_min, weights.as_deref()).map(|r| r.0)
        })
        .collect();
    let (bmean, sigma) = if lambdas.len() > 1 {
        mean_sigma(&lambdas)
    } else {
        (lambda, 0.0)
    };
    let center = match config.lambda_center {
        LambdaCenter::Point => lambda,
        LambdaCenter::BootstrapMean => bmean,
        LambdaCenter::BiasCorrected => 2.0 * lambda - bmean,
    };
    let half = config.lambda_ci_sigma * sigma;
    Ok(FitResult {
        lambda,
        ci_low: center - half,
        ci_high: center + half,
        sigma,
        window: (l_best, u),
        windows,
        replicates: lambdas.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupCurve {
    pub points: Vec<(usize, f64)>,
    /// Least-squares slope of `log2 S(n)`, i.e. `1 - lambda`.
    pub exponent: Option<f64>,
}

/// `S(n) = TTS_C(n) / TTS_Q(n)` where both are finite.
pub fn speedup_ratio(quantum: &[TtsPoint], classical: &[TtsPoint]) -> SpeedupCurve {
    let points: Vec<(usize, f64)> = quantum
        .iter()
        .filter_map(|q| {
            let c = classical.iter().find(|c| c.n == q.n)?;
            Some((q.n, c.tts_mean? / q.tts_mean?))
        })
        .collect();
    let exponent = (points.len() >= 2).then(|| {
        let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
        ols(&xs, &ys, None).0
    });
    SpeedupCurve { points, exponent }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessMatrix {
    pub n: usize,
    pub oracles: Vec<Bitstring>,
    /// Normalized output frequencies per oracle.
    pub rows: Vec<Vec<(Bitstring, f64)>>,
    pub diagonal: Vec<f64>,
}

impl SuccessMatrix {
    /// Every oracle answered correctly more than half the time.
    pub fn bqp_verdict(&self) -> bool {
        self.diagonal.iter().all(|&p| p > 0.5)
    }
}

pub fn success_matrix(tables: &[ShotTable]) -> Result<SuccessMatrix> {
    let Some(first) = tables.first() else {
        return invalid("no tables");
    };
    let n = first.oracle().n();
    let mut out = SuccessMatrix {
        n,
        oracles: Vec::new(),
        rows: Vec::new(),
        diagonal: Vec::new(),
    };
    for t in tables {
        if t.oracle().n() != n {
            return invalid("tables of different sizes");
        }
        let total = t.total_shots() as f64;
        if total == 0.0 {
            return invalid(format!("empty table for oracle {}", t.oracle().b));
        }
        out.oracles.push(t.oracle().b);
        out.rows.push(
            t.counts()
                .iter()
                .map(|(&b, &c)| (b, c as f64 / total))
                .collect(),
        );
        out.diagonal.push(t.successes() as f64 / total);
    }
    Ok(out)
}
