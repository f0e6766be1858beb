//! Subset sampling proportional to predicted edge count.
//!
//! A subset is grown by drawing its first two vertices as a pair with
//! probability `g(u, v) / G`, then adding vertices uniformly without
//! replacement. The resulting `k`-subset has probability proportional to
//! `g(S_k)`, and growing it one uniform vertex at a time keeps that law at
//! every size.

mod session;

pub use session::{BinTrack, BinUpdate, EstimatePoint, Phase, Session, SessionEvent};

use rand::seq::index;
use rand::Rng as _;

use crate::binning::BinnedPairGraph;
use crate::combin::CompensatedSum;
use crate::estimators::{EdgeScoreModel, LabelLookup, ScoreKind, SubsetState};
use crate::rng::Rng;
use crate::{Error, Result, VertexId};

#[derive(Debug, Clone)]
enum PairSupport<'a> {
    /// Cumulative scores over the bin's edge list.
    Weighted {
        edges: &'a [(VertexId, VertexId)],
        cumulative: Vec<f64>,
    },
    /// Every pair of `n` vertices with equal mass.
    AllPairs { n: usize },
}

/// `q_0(u, v) = g(u, v) / G_b` over one bin.
#[derive(Debug, Clone)]
pub struct InitialPairDistribution<'a> {
    bin: usize,
    support: PairSupport<'a>,
}

impl<'a> InitialPairDistribution<'a> {
    pub fn new(graph: &'a BinnedPairGraph, model: &EdgeScoreModel, bin: usize) -> Result<Self> {
        let support = match model.kind() {
            ScoreKind::Uniform { .. } => {
                if graph.num_vertices() < 2 {
                    return Err(Error::EmptyBin(bin));
                }
                PairSupport::AllPairs {
                    n: graph.num_vertices(),
                }
            }
            ScoreKind::Product { .. } => {
                let edges = graph.bin(bin).edges();
                if edges.is_empty() {
                    return Err(Error::EmptyBin(bin));
                }
                let mut acc = CompensatedSum::new();
                let cumulative = edges
                    .iter()
                    .map(|&(u, v)| {
                        acc.add(model.edge_score_of(u, v));
                        acc.value()
                    })
                    .collect();
                PairSupport::Weighted { edges, cumulative }
            }
        };
        Ok(InitialPairDistribution { bin, support })
    }

    pub fn bin(&self) -> usize {
        self.bin
    }

    /// Number of pairs with positive mass.
    pub fn support_len(&self) -> usize {
        match &self.support {
            PairSupport::Weighted { edges, .. } => edges.len(),
            PairSupport::AllPairs { n } => n * (n - 1) / 2,
        }
    }

    /// Probability of the `i`-th edge of the bin's edge list.
    pub fn probability(&self, i: usize) -> f64 {
        match &self.support {
            PairSupport::Weighted { cumulative, .. } => {
                let total = cumulative[cumulative.len() - 1];
                let lo = if i == 0 { 0.0 } else { cumulative[i - 1] };
                (cumulative[i] - lo) / total
            }
            PairSupport::AllPairs { .. } => 1.0 / self.support_len() as f64,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> (VertexId, VertexId) {
        match &self.support {
            PairSupport::Weighted { edges, cumulative } => {
                let total = cumulative[cumulative.len() - 1];
                let x = rng.random::<f64>() * total;
                let i = cumulative.partition_point(|&c| c <= x).min(edges.len() - 1);
                edges[i]
            }
            PairSupport::AllPairs { n } => {
                let u = rng.random_range(0..*n);
                let mut v = rng.random_range(0..*n - 1);
                if v >= u {
                    v += 1;
                }
                let (a, b) = (u.min(v), u.max(v));
                (a as VertexId, b as VertexId)
            }
        }
    }
}

pub fn sample_initial_pair(dist: &InitialPairDistribution<'_>, rng: &mut Rng) -> (VertexId, VertexId) {
    dist.sample(rng)
}

/// Draw a `k`-subset of bin `bin` from the proposal and evaluate it.
pub fn sample_subset<L: LabelLookup + ?Sized>(
    bin: usize,
    k: usize,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
    labels: &L,
    rng: &mut Rng,
) -> Result<SubsetState> {
    let n = graph.num_vertices();
    if k < 2 || k > n {
        return Err(Error::invalid(format!("subset size {k} outside 2..={n}")));
    }
    let members = sample_members(bin, k, graph, model, rng)?;
    SubsetState::from_members(bin, &members, labels, graph, model)
}

/// Vertex ids of a proposal draw, initial pair first.
pub fn sample_members(
    bin: usize,
    k: usize,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
    rng: &mut Rng,
) -> Result<Vec<VertexId>> {
    let n = graph.num_vertices();
    if k < 2 || k > n {
        return Err(Error::invalid(format!("subset size {k} outside 2..={n}")));
    }
    let dist = InitialPairDistribution::new(graph, model, bin)?;
    let (a, b) = dist.sample(rng);
    let rest: Vec<VertexId> = (0..n as VertexId).filter(|&v| v != a && v != b).collect();
    let mut members = Vec::with_capacity(k);
    members.extend([a, b]);
    members.extend(index::sample(rng, n - 2, k - 2).into_iter().map(|i| rest[i]));
    Ok(members)
}
