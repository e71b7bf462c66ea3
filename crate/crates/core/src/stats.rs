//! Estimators for correlated Monte Carlo series and the bound checks built
//! on them.

use serde::{Deserialize, Serialize};

use crate::action::CouplingParams;
use crate::error::{Error, Result};
use crate::group::GroupKind;
use crate::lattice::Lattice;

/// Two-sided 95% normal quantile; also the one-sided 97.5% limit.
pub const Z95: f64 = 1.96;
pub const MIN_SERIES_LEN: usize = 100;
pub const BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    /// Larger of the batch-means and the naive standard error.
    pub stderr: f64,
    pub naive_stderr: f64,
    /// Integrated autocorrelation time, 0.5 for independent samples.
    pub tau_int: f64,
    pub n_effective: f64,
    pub n: usize,
}

impl EstimatorResult {
    pub fn upper(&self) -> f64 {
        self.mean + Z95 * self.stderr
    }

    pub fn lower(&self) -> f64 {
        self.mean - Z95 * self.stderr
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mean, batch-means standard error over 32 batches, and the integrated
/// autocorrelation time from Geyer's initial positive sequence.
pub fn estimate(series: &[f64]) -> Result<EstimatorResult> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { len: n, min: MIN_SERIES_LEN });
    }
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("series contains non-finite value {bad}")));
    }
    let m = mean(series);
    let c0 = series.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    let naive = (c0 / (n - 1) as f64).sqrt();

    let size = n / BATCHES;
    let batch_means: Vec<f64> = (0..BATCHES).map(|b| mean(&series[b * size..(b + 1) * size])).collect();
    let bm = mean(&batch_means);
    let bvar = batch_means.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (BATCHES - 1) as f64;
    let batch = (bvar / BATCHES as f64).sqrt();

    let tau = if c0 > 0.0 { geyer_tau(series, m, c0) } else { 0.5 };
    let stderr = batch.max(naive);
    Ok(EstimatorResult {
        mean: m,
        stderr,
        naive_stderr: naive,
        tau_int: tau,
        n_effective: (n as f64 / (2.0 * tau)).min(n as f64),
        n,
    })
}

fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// `sigma^2 / (2 gamma_0)` with the asymptotic variance summed over pairs
/// `gamma_{2k} + gamma_{2k+1}` while they stay positive and decreasing.
fn geyer_tau(x: &[f64], m: f64, c0: f64) -> f64 {
    let n = x.len();
    let mut sigma2 = -c0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n / 2 {
        let pair = autocov(x, m, 2 * k) + autocov(x, m, 2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sigma2 += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    (sigma2 / (2.0 * c0)).max(0.5 * f64::EPSILON)
}

/// Estimate of a variance as the mean of squared deviations, with the
/// uncertainty of that mean.
pub fn variance_estimate(series: &[f64]) -> Result<EstimatorResult> {
    let m = mean(series);
    let sq: Vec<f64> = series.iter().map(|v| (v - m) * (v - m)).collect();
    estimate(&sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Comparison of an estimated quantity's upper confidence limit with an
/// analytic upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub estimate: EstimatorResult,
    pub upper: f64,
    pub bound: f64,
    pub k_s: f64,
    pub n: usize,
    pub verdict: Verdict,
}

fn bound_report(name: &str, estimate: EstimatorResult, bound: f64, params: &CouplingParams) -> BoundReport {
    let upper = estimate.upper();
    BoundReport {
        name: name.to_string(),
        estimate,
        upper,
        bound,
        k_s: params.k_s,
        n: params.group.n(),
        verdict: if upper <= bound { Verdict::Pass } else { Verdict::Fail },
    }
}

/// `n(n-3) / (K_S N)` for SO and four times that for SU.
pub fn wilson_variance_bound(params: &CouplingParams, loop_len: usize) -> Result<f64> {
    params.require_admissible("the Wilson-loop variance bound")?;
    if loop_len < 4 {
        return Err(Error::InvalidArgument(format!("the variance bound needs a loop of length at least 4, got {loop_len}")));
    }
    let n = params.group.n() as f64;
    let l = loop_len as f64;
    let c = match params.group.kind() {
        GroupKind::SO => 1.0,
        GroupKind::SU => 4.0,
    };
    Ok(c * l * (l - 3.0) / (params.k_s * n))
}

/// Checks `Var(W / N)` against the variance bound. Each entry of `values`
/// holds the normalised loop values `Re W / N` of one sample, typically
/// every translate of the loop; the deviations are taken from the global
/// mean and averaged within a sample.
pub fn variance_bound_check(values: &[Vec<f64>], loop_len: usize, params: &CouplingParams) -> Result<BoundReport> {
    let bound = wilson_variance_bound(params, loop_len)?;
    let est = translate_averaged_variance(values)?;
    let mut r = bound_report("wilson_loop_variance", est, bound, params);
    r.name = format!("wilson_loop_variance(n={loop_len})");
    Ok(r)
}

pub fn translate_averaged_variance(values: &[Vec<f64>]) -> Result<EstimatorResult> {
    let count: usize = values.iter().map(Vec::len).sum();
    if count == 0 {
        return Err(Error::SeriesTooShort { len: 0, min: MIN_SERIES_LEN });
    }
    let m = values.iter().flatten().sum::<f64>() / count as f64;
    let per_sample: Vec<f64> = values
        .iter()
        .map(|v| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64)
        .collect();
    estimate(&per_sample)
}

/// The two susceptibility sums: edge entries `<Q_e, E>` and plaquette
/// traces `Re Tr Q_p`, each estimated as `Var(sum) / count`.
pub fn susceptibility_sums(
    edge_values: &[Vec<f64>],
    plaquette_values: &[Vec<f64>],
    params: &CouplingParams,
) -> Result<(BoundReport, BoundReport)> {
    params.require_admissible("the susceptibility bounds")?;
    let (c_edge, c_plaq) = match params.group.kind() {
        GroupKind::SO => (1.0, 8.0),
        GroupKind::SU => (2.0, 16.0),
    };
    let n = params.group.n() as f64;
    let dm1 = (params.d - 1) as f64;
    let edge = bound_report(
        "edge_susceptibility",
        sum_variance(edge_values)?,
        c_edge / params.k_s,
        params,
    );
    let plaq = bound_report(
        "plaquette_susceptibility",
        sum_variance(plaquette_values)?,
        c_plaq * n * dm1 / params.k_s,
        params,
    );
    Ok((edge, plaq))
}

/// `Var(sum_i x_i) / count`, which for translation-invariant samples is
/// `sum_j Cov(x_0, x_j)`.
fn sum_variance(values: &[Vec<f64>]) -> Result<EstimatorResult> {
    let count = values.first().map_or(0, Vec::len);
    if count == 0 {
        return Err(Error::SeriesTooShort { len: 0, min: MIN_SERIES_LEN });
    }
    let totals: Vec<f64> = values.iter().map(|v| v.iter().sum()).collect();
    let mut est = variance_estimate(&totals)?;
    let scale = 1.0 / count as f64;
    est.mean *= scale;
    est.stderr *= scale;
    est.naive_stderr *= scale;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub separations: Vec<usize>,
    pub covariances: Vec<EstimatorResult>,
    /// Separations that entered the fit.
    pub fitted: Vec<usize>,
    pub rate: Option<f64>,
    pub rate_stderr: Option<f64>,
    pub verdict: Verdict,
}

/// `Cov(Re Tr Q_{p_0}, Re Tr Q_{p_r})` for plaquettes in the `(0, 1)` plane
/// translated by `r` along either axis, averaged over base points and both
/// axes, followed by a weighted log-linear fit over the separations whose
/// estimate exceeds three standard errors. Each entry of `traces` holds the
/// plaquette traces of one sample in plaquette order, as returned by
/// [`crate::observables::plaquette_traces`].
pub fn covariance_decay(traces: &[Vec<f64>], lattice: &Lattice, separations: &[usize]) -> Result<DecayReport> {
    let l = lattice.l();
    if separations.is_empty() || separations.iter().any(|&r| r == 0 || r > l / 2) {
        return Err(Error::InvalidArgument(format!(
            "separations must lie in 1..={} for L = {l}",
            l / 2
        )));
    }
    let plane: Vec<usize> = lattice
        .positive_plaquettes()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.plane == (0, 1))
        .map(|(i, _)| i)
        .collect();
    let base_index: std::collections::HashMap<usize, usize> = plane
        .iter()
        .map(|&i| (lattice.positive_plaquettes()[i].base, i))
        .collect();
    let count = (traces.len() * plane.len()) as f64;
    let m = traces.iter().map(|t| plane.iter().map(|&i| t[i]).sum::<f64>()).sum::<f64>() / count;

    let mut covariances = Vec::with_capacity(separations.len());
    for &r in separations {
        let partners: Vec<(usize, usize)> = plane
            .iter()
            .flat_map(|&i| {
                let b = lattice.positive_plaquettes()[i].base;
                [0usize, 1].map(|axis| (i, base_index[&lattice.shift(b, axis, r as isize)]))
            })
            .collect();
        let products: Vec<f64> = traces
            .iter()
            .map(|t| partners.iter().map(|&(i, j)| (t[i] - m) * (t[j] - m)).sum::<f64>() / partners.len() as f64)
            .collect();
        covariances.push(estimate(&products)?);
    }

    let fitted: Vec<usize> = separations
        .iter()
        .zip(&covariances)
        .filter(|(_, c)| c.mean.abs() > 3.0 * c.stderr && c.stderr > 0.0)
        .map(|(&r, _)| r)
        .collect();
    if fitted.len() < 2 {
        return Ok(DecayReport {
            separations: separations.to_vec(),
            covariances,
            fitted,
            rate: None,
            rate_stderr: None,
            verdict: Verdict::Inconclusive,
        });
    }
    // log|C| = a - rate * r, weights 1 / var(log|C|) = (C / se)^2
    let pts: Vec<(f64, f64, f64)> = separations
        .iter()
        .zip(&covariances)
        .filter(|(r, _)| fitted.contains(r))
        .map(|(&r, c)| (r as f64, c.mean.abs().ln(), (c.mean / c.stderr).powi(2)))
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let rate = -sxy / sxx;
    let rate_se = (1.0 / sxx).sqrt();
    let verdict = if rate - Z95 * rate_se > 0.0 {
        Verdict::Pass
    } else if rate + Z95 * rate_se < 0.0 {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(DecayReport {
        separations: separations.to_vec(),
        covariances,
        fitted,
        rate: Some(rate),
        rate_stderr: Some(rate_se),
        verdict,
    })
}

/// Kendall's tau between two sequences and the exact one-sided p-value for
/// a decreasing trend under the permutation null (all orderings of `y`).
pub fn kendall_tau_decreasing(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::InvalidArgument("Kendall tau needs two equal-length sequences of length at least 2".into()));
    }
    if n > 10 {
        return Err(Error::InvalidArgument("exact Kendall p-value is limited to 10 points".into()));
    }
    let score = |y: &[f64]| -> i64 {
        let mut s = 0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = (x[j] - x[i]).signum();
                let dy = (y[j] - y[i]).signum();
                s += (dx * dy) as i64;
            }
        }
        s
    };
    let observed = score(y);
    let pairs = (n * (n - 1) / 2) as f64;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut at_most = 0u64;
    let mut total = 0u64;
    loop {
        let py: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        if score(&py) <= observed {
            at_most += 1;
        }
        total += 1;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok((observed as f64 / pairs, at_most as f64 / total as f64))
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub ns: Vec<usize>,
    pub discrepancies: Vec<EstimatorResult>,
    pub kendall_tau: f64,
    pub p_value: f64,
    pub verdict: Verdict,
}

/// Trend test for `|E[W_1 W_2] - E[W_1] E[W_2]| / N^2` across a sweep of
/// `N`. Each inner slice pairs the normalised values `(W_1/N, W_2/N)` of
/// one sample.
pub fn factorization_check(ns: &[usize], samples: &[Vec<(f64, f64)>]) -> Result<FactorizationReport> {
    if ns.len() != samples.len() {
        return Err(Error::InvalidArgument("one sample set per N is required".into()));
    }
    let mut discrepancies = Vec::with_capacity(ns.len());
    for s in samples {
        let m1 = mean(&s.iter().map(|p| p.0).collect::<Vec<_>>());
        let m2 = mean(&s.iter().map(|p| p.1).collect::<Vec<_>>());
        let prod: Vec<f64> = s.iter().map(|p| (p.0 - m1) * (p.1 - m2)).collect();
        let mut est = estimate(&prod)?;
        est.mean = est.mean.abs();
        discrepancies.push(est);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = discrepancies.iter().map(|d| d.mean).collect();
    let (tau, p) = kendall_tau_decreasing(&x, &y)?;
    Ok(FactorizationReport {
        ns: ns.to_vec(),
        discrepancies,
        kendall_tau: tau,
        p_value: p,
        verdict: if p < 0.05 && tau < 0.0 { Verdict::Pass } else { Verdict::Fail },
    })
}
