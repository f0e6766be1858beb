use std::collections::BTreeMap;

use activecorr::binning::BinConfig;
use activecorr::catalog::Catalog;
use activecorr::sampler::Session;
use activecorr::variance::variance_report;
use activecorr::{Execution, VertexId};
use serde::{Deserialize, Serialize};

use crate::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Estimator {
    /// Importance sampling with the catalog's classifier probabilities.
    #[default]
    #[serde(rename = "IS")]
    Is,
    /// Uniform subsets, ignoring the classifier.
    #[serde(rename = "MC")]
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOptions {
    pub estimator: Estimator,
    /// Confidence level of the intervals.
    pub level: f64,
    /// Compute intervals whenever `labels_used` is a multiple of this.
    pub ci_every: usize,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            estimator: Estimator::Is,
            level: 0.95,
            ci_every: 1,
        }
    }
}

impl SessionOptions {
    pub(crate) fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(("options.level", format!("level must be in (0, 1), got {}", self.level)));
        }
        if self.ci_every == 0 {
            return Err(("options.ci_every", "ci_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    AwaitingLabel,
    Complete,
    Stopped,
}

/// One entry of a bin's estimate history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    /// Index of the session event that produced the estimate.
    pub step: usize,
    pub labels_used: usize,
    pub k: usize,
    pub estimate: f64,
    pub v_hat: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Latest state of one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStatus {
    pub bin: usize,
    pub edge_lo: f64,
    pub edge_hi: f64,
    pub k: usize,
    pub estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// A session with its per-bin estimate history.
#[derive(Debug)]
pub struct LiveSession {
    catalog_name: String,
    catalog: Catalog,
    bins: BinConfig,
    session: Session,
    options: SessionOptions,
    history: BTreeMap<usize, Vec<HistoryPoint>>,
    stopped: bool,
}

impl LiveSession {
    pub fn new(catalog_name: String, catalog: Catalog, bins: BinConfig, session: Session, options: SessionOptions) -> Self {
        let history = session.tracks().iter().map(|t| (t.bin, Vec::new())).collect();
        LiveSession {
            catalog_name,
            catalog,
            bins,
            session,
            options,
            history,
            stopped: false,
        }
    }

    pub fn catalog_name(&self) -> &str {
        &self.catalog_name
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn options(&self) -> &SessionOptions {
        &self.options
    }

    pub fn history(&self) -> &BTreeMap<usize, Vec<HistoryPoint>> {
        &self.history
    }

    pub fn status(&self) -> Status {
        if self.stopped {
            Status::Stopped
        } else if self.session.is_complete() {
            Status::Complete
        } else {
            Status::AwaitingLabel
        }
    }

    pub fn pending_vertex(&self) -> Option<VertexId> {
        if self.stopped {
            None
        } else {
            self.session.pending_vertex()
        }
    }

    pub fn stop(&mut self) {
        self.stopped = true;
    }

    /// Apply a label for the pending vertex. Anything else is a conflict.
    pub fn submit(&mut self, vertex: VertexId, label: bool) -> Result<(), ApiError> {
        match self.status() {
            Status::Stopped => return Err(ApiError::Conflict("session is stopped".into())),
            Status::Complete => return Err(ApiError::Conflict("session is complete".into())),
            Status::AwaitingLabel => {}
        }
        if self.session.labels().get(vertex as usize).copied().flatten().is_some() {
            return Err(ApiError::Conflict(format!("vertex {vertex} is already labeled")));
        }
        let events = self.session.submit_label(vertex, label).map_err(|e| match e {
            activecorr::Error::UnexpectedVertex { .. } => ApiError::Conflict(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        })?;
        let mut grown = Vec::new();
        let mut new_points = Vec::new();
        for ev in events {
            for u in &ev.bins {
                new_points.push((
                    u.bin,
                    HistoryPoint {
                        step: ev.step,
                        labels_used: ev.labels_used,
                        k: u.k,
                        estimate: u.estimate,
                        v_hat: None,
                        ci_low: None,
                        ci_high: None,
                    },
                ));
                grown.push(u.bin);
            }
        }
        grown.sort_unstable();
        grown.dedup();
        for (bin, p) in new_points {
            self.history.entry(bin).or_default().push(p);
        }
        let labels_used = self.session.labels_used();
        if labels_used % self.options.ci_every == 0 {
            for bin in grown {
                self.attach_interval(bin)?;
            }
        }
        Ok(())
    }

    /// Interval for the current subset of `bin`, stored on its latest point.
    fn attach_interval(&mut self, bin: usize) -> Result<(), ApiError> {
        let Some(track) = self.session.track(bin) else { return Ok(()) };
        if track.state.k() < 4 {
            return Ok(());
        }
        let r = variance_report(
            &track.state,
            self.session.labels(),
            self.session.graph(),
            self.session.model(),
            self.session.labels_used(),
            self.options.level,
            Execution::Parallel,
        )
        .map_err(|e| ApiError::Internal(e.to_string()))?;
        if let Some(p) = self.history.get_mut(&bin).and_then(|h| h.last_mut()) {
            p.v_hat = Some(r.v_hat);
            p.ci_low = Some(r.ci_low);
            p.ci_high = Some(r.ci_high);
        }
        Ok(())
    }

    pub fn bin_status(&self) -> Vec<BinStatus> {
        self.session
            .tracks()
            .iter()
            .map(|t| {
                let (edge_lo, edge_hi) = self.bins.range(t.bin);
                let last = self.history.get(&t.bin).and_then(|h| h.last());
                BinStatus {
                    bin: t.bin,
                    edge_lo,
                    edge_hi,
                    k: t.state.k(),
                    estimate: last.map(|p| p.estimate),
                    ci_low: last.and_then(|p| p.ci_low),
                    ci_high: last.and_then(|p| p.ci_high),
                }
            })
            .collect()
    }
}
