//! Simulated-annotator trials and their metrics.
//!
//! Each trial draws fresh classifier probabilities (optionally), runs one
//! labeling session per estimator against the known labels, and records the
//! per-bin estimate, error and interval at a list of labeled fractions.

pub mod synthetic;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::binning::{bin_pair_counts, build_pair_graph, true_edge_counts, BinConfig, BinnedPairGraph, PairCounts};
use crate::catalog::{generate_random_catalog, simulate_classifier, Catalog, ClassifierSimConfig};
use crate::estimators::EdgeScoreModel;
use crate::exec::{map_range, Execution};
use crate::rng::derive_seed;
use crate::sampler::Session;
use crate::variance::variance_report;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "IS")]
    Is,
    #[serde(rename = "classifier")]
    Classifier,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "MC",
            Method::Is => "IS",
            Method::Classifier => "classifier",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Method::Mc => 1,
            Method::Is => 2,
            Method::Classifier => 3,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mc" => Ok(Method::Mc),
            "is" => Ok(Method::Is),
            "classifier" | "baseline" => Ok(Method::Classifier),
            _ => Err(Error::invalid(format!("unknown method {s:?}"))),
        }
    }
}

/// Where vertex probabilities come from in each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClassifierMode {
    /// Use the catalog's `prob` column in every trial.
    File,
    /// Draw fresh Beta probabilities per trial.
    Beta {
        alpha_pos: f64,
        beta_pos: f64,
        alpha_neg: f64,
        beta_neg: f64,
    },
}

impl ClassifierMode {
    pub fn standard_beta() -> Self {
        let c = ClassifierSimConfig::standard(0);
        ClassifierMode::Beta {
            alpha_pos: c.alpha_pos,
            beta_pos: c.beta_pos,
            alpha_neg: c.alpha_neg,
            beta_neg: c.beta_neg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub classifier: ClassifierMode,
    pub methods: Vec<Method>,
    /// Labeled fractions at which estimates are recorded.
    pub stop_fractions: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Fractions at which variances and intervals are computed. `None`
    /// means every stop fraction.
    pub variance_fractions: Option<Vec<f64>>,
    pub level: f64,
    /// Also record `DD/RR - 1` from the estimated counts.
    pub omega: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            classifier: ClassifierMode::standard_beta(),
            methods: vec![Method::Mc, Method::Is, Method::Classifier],
            stop_fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            trials: 200,
            base_seed: 0,
            variance_fractions: None,
            level: 0.95,
            omega: false,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.stop_fractions.is_empty() {
            return Err(Error::invalid("at least one stop fraction is required"));
        }
        let all = self.stop_fractions.iter().chain(self.variance_fractions.iter().flatten());
        for &f in all {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("stop fraction {f} outside (0, 1]")));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(format!("confidence level {} outside (0, 1)", self.level)));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods selected"));
        }
        Ok(())
    }

    fn wants_variance(&self, fraction: f64) -> bool {
        match &self.variance_fractions {
            None => true,
            Some(v) => v.contains(&fraction),
        }
    }
}

/// One estimate of one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub bin: usize,
    pub stop_fraction: f64,
    pub labels_used: usize,
    pub method: Method,
    pub k: usize,
    pub estimate: f64,
    pub truth: u64,
    pub frac_error: Option<f64>,
    pub v_hat: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub covered: Option<bool>,
    pub radius_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCountRecord {
    pub trial: usize,
    pub method: Method,
    pub stop_fraction: f64,
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaRecord {
    pub trial: usize,
    pub method: Method,
    pub stop_fraction: f64,
    pub bin: usize,
    pub dd: f64,
    pub rr: f64,
    pub omega: Option<f64>,
    pub rr_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub n: usize,
    pub targets: usize,
    /// Candidate edges per bin.
    pub edge_counts: Vec<usize>,
    /// True edges per bin.
    pub truth: Vec<u64>,
    pub records: Vec<TrialRecord>,
    pub target_counts: Vec<TargetCountRecord>,
    pub omega: Vec<OmegaRecord>,
}

/// `|estimate - truth| / truth`, undefined when `truth == 0`.
pub fn fractional_error(estimate: f64, truth: f64) -> Option<f64> {
    (truth > 0.0).then(|| (estimate - truth).abs() / truth)
}

/// Labels, truth and pair graph shared by all trials on one catalog.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    catalog: Catalog,
    bins: BinConfig,
    graph: Arc<BinnedPairGraph>,
    labels: Vec<bool>,
    truth: Vec<u64>,
}

impl TrialSetup {
    pub fn new(catalog: Catalog, bins: BinConfig, exec: Execution) -> Result<Self> {
        let labels = catalog.labels()?;
        let graph = Arc::new(build_pair_graph(&catalog, &bins, exec)?);
        let truth = true_edge_counts(&graph, &labels);
        Ok(TrialSetup {
            catalog,
            bins,
            graph,
            labels,
            truth,
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn graph(&self) -> &Arc<BinnedPairGraph> {
        &self.graph
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn truth(&self) -> &[u64] {
        &self.truth
    }

    /// Run `cfg.trials` independent trials. Trial `i` depends only on
    /// `cfg.base_seed` and `i`, so the report is the same for any execution
    /// mode or thread count.
    pub fn run(&self, cfg: &TrialConfig, exec: Execution) -> Result<TrialReport> {
        cfg.validate()?;
        let mut fractions = cfg.stop_fractions.clone();
        fractions.sort_by(f64::total_cmp);
        fractions.dedup();
        let uniform = Arc::new(EdgeScoreModel::uniform(&self.graph, 1.0)?);
        let outputs = map_range(exec, cfg.trials, |i| self.run_one(i, cfg, &fractions, &uniform, exec));
        let mut report = TrialReport {
            n: self.catalog.len(),
            targets: self.catalog.target_count(),
            edge_counts: self.graph.edge_counts(),
            truth: self.truth.clone(),
            records: Vec::new(),
            target_counts: Vec::new(),
            omega: Vec::new(),
        };
        for out in outputs {
            let out = out?;
            report.records.extend(out.records);
            report.target_counts.extend(out.target_counts);
            report.omega.extend(out.omega);
        }
        Ok(report)
    }

    fn probabilities(&self, cfg: &TrialConfig, trial: usize) -> Result<Vec<f64>> {
        match cfg.classifier {
            ClassifierMode::File => Ok(self.catalog.probs()),
            ClassifierMode::Beta {
                alpha_pos,
                beta_pos,
                alpha_neg,
                beta_neg,
            } => {
                let sim = ClassifierSimConfig {
                    alpha_pos,
                    beta_pos,
                    alpha_neg,
                    beta_neg,
                    seed: derive_seed(cfg.base_seed, &[trial as u64, 0]),
                };
                Ok(simulate_classifier(&self.catalog, &sim)?.probs())
            }
        }
    }

    fn run_one(
        &self,
        trial: usize,
        cfg: &TrialConfig,
        fractions: &[f64],
        uniform: &Arc<EdgeScoreModel>,
        exec: Execution,
    ) -> Result<TrialOutput> {
        let n = self.catalog.len();
        // fresh random catalog per trial, built on first use
        let rr_seed = derive_seed(cfg.base_seed, &[trial as u64, 9]);
        let mut rr_counts: Option<Vec<u64>> = None;
        let product = Arc::new(EdgeScoreModel::product(&self.graph, self.probabilities(cfg, trial)?)?);
        let mut out = TrialOutput::default();

        for &method in &cfg.methods {
            if method == Method::Classifier {
                for b in 0..self.graph.num_bins() {
                    let estimate = product.total(b);
                    let truth = self.truth[b];
                    out.records.push(TrialRecord {
                        trial,
                        bin: b,
                        stop_fraction: 0.0,
                        labels_used: 0,
                        method,
                        k: 0,
                        estimate,
                        truth,
                        frac_error: fractional_error(estimate, truth as f64),
                        v_hat: None,
                        ci_low: None,
                        ci_high: None,
                        covered: None,
                        radius_rel: None,
                    });
                }
                continue;
            }
            let model = if method == Method::Mc { uniform.clone() } else { product.clone() };
            let seed = derive_seed(cfg.base_seed, &[trial as u64, method.tag()]);
            let mut session = match Session::new(self.graph.clone(), model.clone(), seed) {
                Ok(s) => s,
                Err(Error::NoActiveBins) => continue,
                Err(e) => return Err(e),
            };
            for &fraction in fractions {
                let target = ((fraction * n as f64).ceil() as usize).clamp(1, n);
                session.run_until(&self.labels, target)?;
                while session.in_initial_phase() && session.step_with(|v| self.labels[v as usize])? {}
                let labels_used = session.labels_used();
                let mut estimates = vec![0.0; self.graph.num_bins()];
                for t in session.tracks() {
                    let Some(point) = t.latest() else { continue };
                    estimates[t.bin] = point.estimate;
                    let truth = self.truth[t.bin];
                    let mut rec = TrialRecord {
                        trial,
                        bin: t.bin,
                        stop_fraction: fraction,
                        labels_used,
                        method,
                        k: point.k,
                        estimate: point.estimate,
                        truth,
                        frac_error: fractional_error(point.estimate, truth as f64),
                        v_hat: None,
                        ci_low: None,
                        ci_high: None,
                        covered: None,
                        radius_rel: None,
                    };
                    if cfg.wants_variance(fraction) && t.state.k() >= 4 {
                        let r = variance_report(
                            &t.state,
                            session.labels(),
                            &self.graph,
                            &model,
                            labels_used,
                            cfg.level,
                            exec,
                        )?;
                        let tf = truth as f64;
                        rec.v_hat = Some(r.v_hat);
                        rec.ci_low = Some(r.ci_low);
                        rec.ci_high = Some(r.ci_high);
                        rec.covered = Some(r.ci_low <= tf && tf <= r.ci_high);
                        rec.radius_rel = (truth > 0).then(|| (r.ci_high - r.ci_low) / 2.0 / tf);
                    }
                    out.records.push(rec);
                }
                let n_d = session.estimate_target_count();
                out.target_counts.push(TargetCountRecord {
                    trial,
                    method,
                    stop_fraction: fraction,
                    estimate: n_d,
                });
                if cfg.omega {
                    if rr_counts.is_none() {
                        let random = generate_random_catalog(self.catalog.bounds(), n, rr_seed)?;
                        rr_counts = Some(bin_pair_counts(&random, &self.bins, exec));
                    }
                    let rr = rr_counts.as_deref().unwrap_or_default();
                    if let Some(n_d) = n_d.filter(|&x| x >= 1.0) {
                        let pc = PairCounts::new(&estimates, n_d, rr, n)?;
                        for b in 0..estimates.len() {
                            out.omega.push(OmegaRecord {
                                trial,
                                method,
                                stop_fraction: fraction,
                                bin: b,
                                dd: pc.dd[b],
                                rr: pc.rr[b],
                                omega: pc.omega[b],
                                rr_seed,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Default)]
struct TrialOutput {
    records: Vec<TrialRecord>,
    target_counts: Vec<TargetCountRecord>,
    omega: Vec<OmegaRecord>,
}

/// Build the pair graph and run trials in one call.
pub fn run_trials(catalog: &Catalog, bins: &BinConfig, cfg: &TrialConfig, exec: Execution) -> Result<TrialReport> {
    TrialSetup::new(catalog.clone(), bins.clone(), exec)?.run(cfg, exec)
}

fn matches(r: &TrialRecord, method: Method, fraction: f64) -> bool {
    r.method == method && (method == Method::Classifier || r.stop_fraction == fraction)
}

/// Mean fractional error per bin (over trials) for bins with nonzero truth.
pub fn per_bin_mean_error(report: &TrialReport, method: Method, fraction: f64) -> Vec<(usize, f64)> {
    let nb = report.truth.len();
    let mut sum = vec![0.0; nb];
    let mut count = vec![0usize; nb];
    for r in report.records.iter().filter(|r| matches(r, method, fraction)) {
        if let Some(e) = r.frac_error {
            sum[r.bin] += e;
            count[r.bin] += 1;
        }
    }
    (0..nb)
        .filter(|&b| count[b] > 0)
        .map(|b| (b, sum[b] / count[b] as f64))
        .collect()
}

/// Mean fractional error averaged over trials, then over bins.
pub fn mean_fractional_error(report: &TrialReport, method: Method, fraction: f64) -> Option<f64> {
    let per_bin = per_bin_mean_error(report, method, fraction);
    (!per_bin.is_empty()).then(|| per_bin.iter().map(|p| p.1).sum::<f64>() / per_bin.len() as f64)
}

/// Fraction of trials whose interval covers the truth, and the mean
/// relative radius, for one bin.
pub fn coverage_and_radius(report: &TrialReport, method: Method, bin: usize, fraction: f64) -> Option<(f64, f64)> {
    let rows: Vec<&TrialRecord> = report
        .records
        .iter()
        .filter(|r| r.bin == bin && matches(r, method, fraction) && r.covered.is_some())
        .collect();
    if rows.is_empty() {
        return None;
    }
    let covered = rows.iter().filter(|r| r.covered == Some(true)).count() as f64 / rows.len() as f64;
    let radii: Vec<f64> = rows.iter().filter_map(|r| r.radius_rel).collect();
    let radius = if radii.is_empty() {
        f64::NAN
    } else {
        radii.iter().sum::<f64>() / radii.len() as f64
    };
    Some((covered, radius))
}

/// Smallest labeled fraction at which the mean fractional error drops to
/// `threshold`, interpolating linearly between recorded fractions.
pub fn fraction_to_reach(report: &TrialReport, method: Method, threshold: f64) -> Option<f64> {
    let mut fractions: Vec<f64> = report
        .records
        .iter()
        .filter(|r| r.method == method)
        .map(|r| r.stop_fraction)
        .collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let curve: Vec<(f64, f64)> = fractions
        .into_iter()
        .filter_map(|f| mean_fractional_error(report, method, f).map(|e| (f, e)))
        .collect();
    let first = curve.iter().position(|&(_, e)| e <= threshold)?;
    if first == 0 {
        return Some(curve[0].0);
    }
    let (f0, e0) = curve[first - 1];
    let (f1, e1) = curve[first];
    Some(f0 + (f1 - f0) * (e0 - threshold) / (e0 - e1))
}

/// One row of the aggregate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub stop_fraction: f64,
    pub bin: usize,
    pub truth: u64,
    pub mean_frac_error: f64,
    pub coverage: Option<f64>,
    pub mean_radius_rel: Option<f64>,
}

pub fn summarize(report: &TrialReport) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, f64)> = report.records.iter().map(|r| (r.method, r.stop_fraction)).collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys.dedup();
    let mut rows = Vec::new();
    for (method, fraction) in keys {
        for (bin, err) in per_bin_mean_error(report, method, fraction) {
            let cov = coverage_and_radius(report, method, bin, fraction);
            rows.push(SummaryRow {
                method,
                stop_fraction: fraction,
                bin,
                truth: report.truth[bin],
                mean_frac_error: err,
                coverage: cov.map(|c| c.0),
                mean_radius_rel: cov.map(|c| c.1).filter(|r| r.is_finite()),
            });
        }
    }
    rows
}

fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv<W: Write>(report: &TrialReport, out: W) -> Result<()> {
    write_rows(&report.records, out)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn write_omega_csv<W: Write>(report: &TrialReport, out: W) -> Result<()> {
    write_rows(&report.omega, out)
}

pub fn write_target_counts_csv<W: Write>(report: &TrialReport, out: W) -> Result<()> {
    write_rows(&report.target_counts, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors() {
        assert!((fractional_error(110.0, 100.0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(fractional_error(100.0, 100.0), Some(0.0));
        assert_eq!(fractional_error(3.0, 0.0), None);
    }

    #[test]
    fn coverage_extremes() {
        let rec = |covered: bool| TrialRecord {
            trial: 0,
            bin: 0,
            stop_fraction: 0.5,
            labels_used: 5,
            method: Method::Mc,
            k: 5,
            estimate: 12.0,
            truth: 10,
            frac_error: Some(0.2),
            v_hat: Some(0.0),
            ci_low: Some(12.0),
            ci_high: Some(12.0),
            covered: Some(covered),
            radius_rel: Some(0.0),
        };
        let mut report = TrialReport {
            n: 10,
            targets: 5,
            edge_counts: vec![20],
            truth: vec![10],
            records: vec![rec(false), rec(false)],
            target_counts: vec![],
            omega: vec![],
        };
        assert_eq!(coverage_and_radius(&report, Method::Mc, 0, 0.5), Some((0.0, 0.0)));
        report.records = vec![rec(true); 3];
        assert_eq!(coverage_and_radius(&report, Method::Mc, 0, 0.5).unwrap().0, 1.0);
        assert_eq!(coverage_and_radius(&report, Method::Is, 0, 0.5), None);
    }

    #[test]
    fn config_validation() {
        let mut c = TrialConfig::default();
        c.validate().unwrap();
        c.stop_fractions = vec![0.0];
        assert!(c.validate().is_err());
        c.stop_fractions = vec![0.5];
        c.trials = 0;
        assert!(c.validate().is_err());
    }
}
