//! Edge scores and the subset pair-count estimators.
//!
//! For one bin, `f(u, v)` is 1 when `{u, v}` is a bin edge joining two
//! targets. A subset `S_k` of `k` labeled vertices yields
//!
//! * the Monte Carlo estimate `n(n-1) / (k(k-1)) * f(S_k)` for uniform subsets,
//! * the importance sampling estimate `G * f(S_k) / g(S_k)` for subsets drawn
//!   proportionally to their predicted score `g(S_k)`.

use serde::Serialize;

use crate::binning::BinnedPairGraph;
use crate::combin::{compensated_sum, CompensatedSum};
use crate::{Error, Result, VertexId};

/// Score of a candidate edge from its endpoint probabilities.
#[inline]
pub fn edge_score(prob_u: f64, prob_v: f64) -> f64 {
    prob_u * prob_v
}

/// Read access to (possibly partial) vertex labels.
pub trait LabelLookup {
    fn label(&self, v: VertexId) -> Option<bool>;
}

impl LabelLookup for [bool] {
    #[inline]
    fn label(&self, v: VertexId) -> Option<bool> {
        self.get(v as usize).copied()
    }
}

impl LabelLookup for [Option<bool>] {
    #[inline]
    fn label(&self, v: VertexId) -> Option<bool> {
        self.get(v as usize).copied().flatten()
    }
}

impl LabelLookup for Vec<bool> {
    fn label(&self, v: VertexId) -> Option<bool> {
        self.as_slice().label(v)
    }
}

impl LabelLookup for Vec<Option<bool>> {
    fn label(&self, v: VertexId) -> Option<bool> {
        self.as_slice().label(v)
    }
}

/// How pair scores are assigned.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreKind {
    /// `g(u, v) = p_u p_v` on the bin's candidate edges, 0 elsewhere.
    Product { probs: Vec<f64> },
    /// `g(u, v) = c` on every pair of vertices. The induced subset law is
    /// uniform, which turns the sampler into the Monte Carlo baseline.
    Uniform { value: f64 },
}

/// Exact sums of the score function over one bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreSummary {
    /// `G = sum g(u, v)` over unordered pairs.
    pub total: f64,
    /// `sum g(u, v)^2` over unordered pairs.
    pub sum_sq: f64,
    /// `sum_v s_v^2` where `s_v` is the score sum of pairs containing `v`.
    pub vertex_sum_sq: f64,
}

#[derive(Debug, Clone)]
pub struct EdgeScoreModel {
    n: usize,
    kind: ScoreKind,
    summaries: Vec<ScoreSummary>,
    /// Per bin, per vertex score sums (product kind only).
    vertex_sums: Vec<Vec<f64>>,
}

impl EdgeScoreModel {
    /// Product scores over each bin's candidate edges.
    pub fn product(graph: &BinnedPairGraph, probs: Vec<f64>) -> Result<Self> {
        let n = graph.num_vertices();
        if probs.len() != n {
            return Err(Error::invalid(format!("expected {n} probabilities, got {}", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::invalid(format!("probability {p} is not in (0, 1]")));
        }
        let mut summaries = Vec::with_capacity(graph.num_bins());
        let mut vertex_sums = Vec::with_capacity(graph.num_bins());
        for b in 0..graph.num_bins() {
            let mut sums = vec![CompensatedSum::new(); n];
            let mut total = CompensatedSum::new();
            let mut sum_sq = CompensatedSum::new();
            for &(u, v) in graph.bin(b).edges() {
                let g = edge_score(probs[u as usize], probs[v as usize]);
                total.add(g);
                sum_sq.add(g * g);
                sums[u as usize].add(g);
                sums[v as usize].add(g);
            }
            let sums: Vec<f64> = sums.iter().map(CompensatedSum::value).collect();
            summaries.push(ScoreSummary {
                total: total.value(),
                sum_sq: sum_sq.value(),
                vertex_sum_sq: compensated_sum(sums.iter().map(|s| s * s)),
            });
            vertex_sums.push(sums);
        }
        Ok(EdgeScoreModel {
            n,
            kind: ScoreKind::Product { probs },
            summaries,
            vertex_sums,
        })
    }

    /// Constant score `value` on every pair, for every bin of `graph`.
    pub fn uniform(graph: &BinnedPairGraph, value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::invalid(format!("uniform score must be positive, got {value}")));
        }
        let n = graph.num_vertices();
        let nf = n as f64;
        let pairs = nf * (nf - 1.0) / 2.0;
        let summary = ScoreSummary {
            total: value * pairs,
            sum_sq: value * value * pairs,
            vertex_sum_sq: nf * (value * (nf - 1.0)).powi(2),
        };
        Ok(EdgeScoreModel {
            n,
            kind: ScoreKind::Uniform { value },
            summaries: vec![summary; graph.num_bins()],
            vertex_sums: Vec::new(),
        })
    }

    pub fn kind(&self) -> &ScoreKind {
        &self.kind
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, ScoreKind::Uniform { .. })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_bins(&self) -> usize {
        self.summaries.len()
    }

    /// `G_b`, the predicted total of bin `b`.
    pub fn total(&self, b: usize) -> f64 {
        self.summaries[b].total
    }

    pub fn summary(&self, b: usize) -> ScoreSummary {
        self.summaries[b]
    }

    /// Score sum over all pairs of bin `b` containing `v`.
    #[inline]
    pub fn vertex_sum(&self, b: usize, v: VertexId) -> f64 {
        match &self.kind {
            ScoreKind::Product { .. } => self.vertex_sums[b][v as usize],
            ScoreKind::Uniform { value } => value * (self.n as f64 - 1.0),
        }
    }

    /// Score of a pair already known to be a candidate edge of its bin (or
    /// any pair, for the uniform kind).
    #[inline]
    pub fn edge_score_of(&self, u: VertexId, v: VertexId) -> f64 {
        match &self.kind {
            ScoreKind::Product { probs } => edge_score(probs[u as usize], probs[v as usize]),
            ScoreKind::Uniform { value } => *value,
        }
    }

    /// `g(u, v)` in bin `b` for an arbitrary pair.
    #[inline]
    pub fn pair_score(&self, graph: &BinnedPairGraph, b: usize, u: VertexId, v: VertexId) -> f64 {
        if u == v {
            return 0.0;
        }
        match &self.kind {
            ScoreKind::Product { probs } => {
                if graph.bin(b).contains(u, v) {
                    edge_score(probs[u as usize], probs[v as usize])
                } else {
                    0.0
                }
            }
            ScoreKind::Uniform { value } => *value,
        }
    }

    /// The importance sampling or Monte Carlo estimate for `state`, whichever
    /// matches this model's subset law.
    pub fn estimate(&self, state: &SubsetState) -> Result<f64> {
        match self.kind {
            ScoreKind::Uniform { .. } => mc_estimate(state, self.n),
            ScoreKind::Product { .. } => is_estimate(state, self.total(state.bin)),
        }
    }
}

/// Predicted total of bin `b`; the classifier-only baseline.
pub fn classifier_baseline(model: &EdgeScoreModel, b: usize) -> f64 {
    model.total(b)
}

/// The labeled subset of one bin with its running true-edge count and score.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetState {
    bin: usize,
    members: Vec<VertexId>,
    in_subset: Vec<bool>,
    f_k: u64,
    g_k: CompensatedSum,
}

impl SubsetState {
    pub fn empty(bin: usize, n: usize) -> Self {
        SubsetState {
            bin,
            members: Vec::new(),
            in_subset: vec![false; n],
            f_k: 0,
            g_k: CompensatedSum::new(),
        }
    }

    pub fn from_members<L: LabelLookup + ?Sized>(
        bin: usize,
        members: &[VertexId],
        labels: &L,
        graph: &BinnedPairGraph,
        model: &EdgeScoreModel,
    ) -> Result<Self> {
        let mut s = SubsetState::empty(bin, graph.num_vertices());
        for &v in members {
            s.insert(v, labels, graph, model)?;
        }
        Ok(s)
    }

    pub fn bin(&self) -> usize {
        self.bin
    }

    pub fn members(&self) -> &[VertexId] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn n(&self) -> usize {
        self.in_subset.len()
    }

    #[inline]
    pub fn contains(&self, v: VertexId) -> bool {
        self.in_subset[v as usize]
    }

    pub fn f_k(&self) -> u64 {
        self.f_k
    }

    pub fn g_k(&self) -> f64 {
        self.g_k.value()
    }

    /// Add `v`, updating `f_k` and `g_k` from the bin edges joining `v` to
    /// current members.
    pub fn insert<L: LabelLookup + ?Sized>(
        &mut self,
        v: VertexId,
        labels: &L,
        graph: &BinnedPairGraph,
        model: &EdgeScoreModel,
    ) -> Result<()> {
        if v as usize >= self.in_subset.len() {
            return Err(Error::invalid(format!("vertex {v} out of range")));
        }
        if self.in_subset[v as usize] {
            return Err(Error::DuplicateVertex(v));
        }
        let lv = labels.label(v).ok_or(Error::MissingLabel(v))?;
        let mut df = 0u64;
        let mut dg = CompensatedSum::new();
        for &u in graph.bin(self.bin).neighbors(v) {
            if !self.in_subset[u as usize] {
                continue;
            }
            let lu = labels.label(u).ok_or(Error::MissingLabel(u))?;
            if lu && lv {
                df += 1;
            }
            if let ScoreKind::Product { probs } = &model.kind {
                dg.add(edge_score(probs[u as usize], probs[v as usize]));
            }
        }
        if let ScoreKind::Uniform { value } = model.kind {
            dg.add(value * self.members.len() as f64);
        }
        self.f_k += df;
        self.g_k.add(dg.value());
        self.members.push(v);
        self.in_subset[v as usize] = true;
        Ok(())
    }
}

/// Apply one insertion and return the updated state.
pub fn incremental_update<L: LabelLookup + ?Sized>(
    mut state: SubsetState,
    v: VertexId,
    labels: &L,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
) -> Result<SubsetState> {
    state.insert(v, labels, graph, model)?;
    Ok(state)
}

/// Subset Monte Carlo estimate `n(n-1) / (k(k-1)) * f(S_k)`.
pub fn mc_estimate(state: &SubsetState, n: usize) -> Result<f64> {
    let k = state.k();
    if k < 2 {
        return Err(Error::invalid(format!("Monte Carlo estimate needs k >= 2, got {k}")));
    }
    let scale = (n as f64 * (n as f64 - 1.0)) / (k as f64 * (k as f64 - 1.0));
    Ok(scale * state.f_k as f64)
}

/// Importance sampling estimate `G * f(S_k) / g(S_k)`.
pub fn is_estimate(state: &SubsetState, total: f64) -> Result<f64> {
    let g = state.g_k();
    if !(g > 0.0) {
        return Err(Error::ZeroSubsetScore);
    }
    if state.k() == state.n() {
        // g(S) = G on the full vertex set.
        return Ok(state.f_k as f64);
    }
    Ok(total * state.f_k as f64 / g)
}
