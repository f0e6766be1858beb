//! Variance estimates and confidence intervals for the subset estimators.
//!
//! The Monte Carlo estimator has a closed-form variance in three pair
//! moments. The importance sampling variance is approximated with the delta
//! method, which also needs the triplet moments `D_t`. Both sets of moments
//! are estimated from the labeled subset itself.

mod moments;

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub use moments::{
    configuration_counts, estimate_moments_is, estimate_pair_moments_is, estimate_pair_moments_mc,
    estimate_triplet_moments_is, exact_pair_moments, exact_triplet_moments, inclusion_probability,
    triplet_multiplicity, PairMoments, TripletMoments,
};

use crate::binning::BinnedPairGraph;
use crate::combin::inclusion_ratio;
use crate::estimators::{EdgeScoreModel, LabelLookup, SubsetState};
use crate::exec::Execution;
use crate::{Error, Result};

/// Coefficients `c_t` with `M_t = c_t C(n, t)`.
const TRIPLET_COEFFS: [f64; 5] = [1.0, 24.0, 114.0, 180.0, 90.0];

fn check_sizes(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("subset size {k} outside 2..={n}")));
    }
    Ok(())
}

/// Exact variance of the Monte Carlo estimator for a uniform `k`-subset.
pub fn mc_variance_exact(e: &PairMoments, n: usize, k: usize) -> Result<f64> {
    check_sizes(n, k)?;
    let (nf, kf) = (n as f64, k as f64);
    let lead = nf * (nf - 1.0) * (nf - kf) / (2.0 * kf * (kf - 1.0));
    let inner = 2.0 * (e.e_share - e.e_disj) * kf * nf
        + (e.e_ident - 4.0 * e.e_share + 3.0 * e.e_disj) * (nf + kf - 1.0);
    Ok(lead * inner)
}

/// Uniform-subset expectation of `h(S_k)^2` given the three configuration
/// sums of `h * h` over the population (pair, ordered triple, ordered
/// disjoint pair).
fn second_moment(sums: [f64; 3], n: usize, k: usize) -> f64 {
    inclusion_ratio(k, n, 2) * sums[0] + inclusion_ratio(k, n, 3) * sums[1] + inclusion_ratio(k, n, 4) * sums[2]
}

/// `E[f(S_k)^2]` under uniform subsets.
pub fn expected_f_squared(e: &PairMoments, n: usize, k: usize) -> f64 {
    let [n2, n3, n4] = configuration_counts(n);
    second_moment([e.e_ident * n2, e.e_share * n3, e.e_disj * n4], n, k)
}

/// `E[f(S_k)]^2` under uniform subsets.
pub fn expected_f_all_squared(e: &PairMoments, n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    kf * kf * (kf - 1.0) * (kf - 1.0) / (nf * (nf - 1.0))
        * (0.5 * e.e_ident + (nf - 2.0) * e.e_share + (nf - 2.0) * (nf - 3.0) / 4.0 * e.e_disj)
}

/// `E[f(S_k)^2 g(S_k)]` under uniform subsets.
pub fn expected_f2_g(d: &TripletMoments, k: usize) -> f64 {
    (2..=6)
        .map(|t| TRIPLET_COEFFS[t - 2] * crate::combin::binomial_f64(k as i64, t as i64) * d.get(t))
        .sum()
}

/// Exact mean and variance of `g(S_k)` under uniform subsets.
pub fn score_mean_var(model: &EdgeScoreModel, bin: usize, k: usize) -> (f64, f64) {
    let n = model.num_vertices();
    let s = model.summary(bin);
    let share = (s.vertex_sum_sq - 2.0 * s.sum_sq).max(0.0);
    let disj = (s.total * s.total - s.sum_sq - share).max(0.0);
    let mean = inclusion_ratio(k, n, 2) * s.total;
    let second = second_moment([s.sum_sq, share, disj], n, k);
    (mean, (second - mean * mean).max(0.0))
}

/// Delta-method variance of the importance sampling estimator, without
/// clamping.
pub fn is_variance_delta_unclamped(
    e: &PairMoments,
    d: &TripletMoments,
    model: &EdgeScoreModel,
    bin: usize,
    k: usize,
) -> Result<f64> {
    let n = model.num_vertices();
    check_sizes(n, k)?;
    if k == n {
        return Ok(0.0);
    }
    let total = model.total(bin);
    let (eg, var_g) = score_mean_var(model, bin, k);
    if !(eg > 0.0) {
        return Err(Error::ZeroSubsetScore);
    }
    let ef2 = expected_f_squared(e, n, k);
    let ef_sq = expected_f_all_squared(e, n, k);
    let ef2g = expected_f2_g(d, k);
    let ratio_term = 2.0 * ef2 / eg - ef2g / (eg * eg) + ef2 * var_g / (eg * eg * eg);
    let r = (n as f64 * (n as f64 - 1.0)) / (k as f64 * (k as f64 - 1.0));
    Ok(total * r * ratio_term - r * r * ef_sq)
}

/// Delta-method variance of the importance sampling estimator, clamped at 0.
pub fn is_variance_delta(
    e: &PairMoments,
    d: &TripletMoments,
    model: &EdgeScoreModel,
    bin: usize,
    k: usize,
) -> Result<f64> {
    Ok(is_variance_delta_unclamped(e, d, model, bin, k)?.max(0.0))
}

/// Standard normal quantile for a two-sided interval at `level`.
pub fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Normal interval `estimate +- z sqrt(v_hat)` with the lower end clamped at 0.
pub fn confidence_interval(estimate: f64, v_hat: f64, level: f64) -> Result<(f64, f64)> {
    if !(v_hat >= 0.0) {
        return Err(Error::invalid(format!("variance {v_hat} is negative")));
    }
    let half = z_value(level)? * v_hat.sqrt();
    Ok(((estimate - half).max(0.0), estimate + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "IS")]
    Is,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Mc => "MC",
            EstimatorKind::Is => "IS",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Variance estimate and interval for one bin at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub bin: usize,
    pub labels_used: usize,
    pub estimator: EstimatorKind,
    pub k: usize,
    pub estimate: f64,
    pub v_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The raw variance estimate was negative and was set to 0.
    pub clamped: bool,
    pub pair_moments: PairMoments,
    pub triplet_moments: Option<TripletMoments>,
}

/// Variance report for a subset grown by a session or sampler. The
/// estimator kind follows the model: uniform scores give the Monte Carlo
/// estimator, product scores importance sampling.
pub fn variance_report<L: LabelLookup + ?Sized>(
    state: &SubsetState,
    labels: &L,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
    labels_used: usize,
    level: f64,
    exec: Execution,
) -> Result<VarianceReport> {
    let n = state.n();
    let k = state.k();
    let estimate = model.estimate(state)?;
    let (kind, raw, pair_moments, triplet_moments) = if model.is_uniform() {
        let e = estimate_pair_moments_mc(state, labels, graph)?;
        (EstimatorKind::Mc, mc_variance_exact(&e, n, k)?, e, None)
    } else {
        let (e, d) = estimate_moments_is(state, labels, graph, model, exec)?;
        let v = is_variance_delta_unclamped(&e, &d, model, state.bin(), k)?;
        (EstimatorKind::Is, v, e, Some(d))
    };
    let clamped = raw < 0.0;
    let v_hat = raw.max(0.0);
    let (ci_low, ci_high) = confidence_interval(estimate, v_hat, level)?;
    Ok(VarianceReport {
        bin: state.bin(),
        labels_used,
        estimator: kind,
        k,
        estimate,
        v_hat,
        ci_low,
        ci_high,
        clamped,
        pair_moments,
        triplet_moments,
    })
}

/// Write reports as CSV with header
/// `bin,labels_used,estimator,estimate,v_hat,ci_low,ci_high,clamped`.
pub fn write_variance_csv<W: Write>(reports: &[VarianceReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "labels_used", "estimator", "estimate", "v_hat", "ci_low", "ci_high", "clamped"])?;
    for r in reports {
        w.write_record([
            r.bin.to_string(),
            r.labels_used.to_string(),
            r.estimator.to_string(),
            r.estimate.to_string(),
            r.v_hat.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.clamped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
