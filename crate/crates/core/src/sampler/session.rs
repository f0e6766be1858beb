use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::InitialPairDistribution;
use crate::binning::BinnedPairGraph;
use crate::estimators::{EdgeScoreModel, SubsetState};
use crate::rng::{rng_from_seed, Rng};
use crate::{Error, Result, VertexId};

/// One point of a bin's estimate stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatePoint {
    pub labels_used: usize,
    pub k: usize,
    pub estimate: f64,
}

/// Sampling state of one active bin.
#[derive(Debug, Clone)]
pub struct BinTrack {
    pub bin: usize,
    pub initial_pair: (VertexId, VertexId),
    pub state: SubsetState,
    pub stream: Vec<EstimatePoint>,
}

impl BinTrack {
    pub fn latest(&self) -> Option<&EstimatePoint> {
        self.stream.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinUpdate {
    pub bin: usize,
    pub k: usize,
    pub f_k: u64,
    pub g_k: f64,
    pub estimate: f64,
}

/// One line of the session event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub step: usize,
    pub phase: Phase,
    pub vertex: VertexId,
    pub label: bool,
    pub labels_used: usize,
    /// Bins whose subset grew at this step.
    pub bins: Vec<BinUpdate>,
}

/// Multi-bin labeling session.
///
/// Each non-empty bin draws its own initial pair from its proposal. After
/// those vertices are labeled, one shared stream draws vertices uniformly
/// without replacement from the whole catalog; a drawn vertex joins every
/// bin that does not already hold it. Labels are requested once per vertex.
///
/// The session is driven either by an annotator callback
/// ([`step_with`](Self::step_with)) or interactively through
/// [`pending_vertex`](Self::pending_vertex) and
/// [`submit_label`](Self::submit_label). Both paths consume the generator
/// identically, so a replayed label stream reproduces the same events.
#[derive(Debug, Clone)]
pub struct Session {
    graph: Arc<BinnedPairGraph>,
    model: Arc<EdgeScoreModel>,
    tracks: Vec<BinTrack>,
    excluded_bins: Vec<usize>,
    labels: Vec<Option<bool>>,
    labels_used: usize,
    init_queue: VecDeque<VertexId>,
    initialized: bool,
    pool: Vec<VertexId>,
    draws: Vec<VertexId>,
    uniform_labeled: usize,
    uniform_targets: usize,
    pending: Option<VertexId>,
    rng: Rng,
    events: Vec<SessionEvent>,
}

impl Session {
    /// Draw every active bin's initial pair. Bins without candidate edges
    /// are excluded and listed in [`excluded_bins`](Self::excluded_bins).
    pub fn new(graph: Arc<BinnedPairGraph>, model: Arc<EdgeScoreModel>, seed: u64) -> Result<Self> {
        if model.num_vertices() != graph.num_vertices() || model.num_bins() != graph.num_bins() {
            return Err(Error::invalid("score model does not match the pair graph"));
        }
        let n = graph.num_vertices();
        let mut rng = rng_from_seed(seed);
        let mut tracks = Vec::new();
        let mut excluded_bins = Vec::new();
        let mut init_queue = VecDeque::new();
        let mut queued = vec![false; n];
        for b in 0..graph.num_bins() {
            if graph.bin(b).is_empty() {
                excluded_bins.push(b);
                continue;
            }
            let dist = InitialPairDistribution::new(&graph, &model, b)?;
            let pair = dist.sample(&mut rng);
            for v in [pair.0, pair.1] {
                if !std::mem::replace(&mut queued[v as usize], true) {
                    init_queue.push_back(v);
                }
            }
            tracks.push(BinTrack {
                bin: b,
                initial_pair: pair,
                state: SubsetState::empty(b, n),
                stream: Vec::new(),
            });
        }
        if tracks.is_empty() {
            return Err(Error::NoActiveBins);
        }
        let pending = init_queue.front().copied();
        Ok(Session {
            tracks,
            excluded_bins,
            labels: vec![None; n],
            labels_used: 0,
            init_queue,
            initialized: false,
            pool: (0..n as VertexId).collect(),
            draws: Vec::new(),
            uniform_labeled: 0,
            uniform_targets: 0,
            pending,
            rng,
            events: Vec::new(),
            graph,
            model,
        })
    }

    pub fn graph(&self) -> &Arc<BinnedPairGraph> {
        &self.graph
    }

    pub fn model(&self) -> &Arc<EdgeScoreModel> {
        &self.model
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn tracks(&self) -> &[BinTrack] {
        &self.tracks
    }

    /// Track of catalog bin `bin`, if that bin is active.
    pub fn track(&self, bin: usize) -> Option<&BinTrack> {
        self.tracks.iter().find(|t| t.bin == bin)
    }

    pub fn excluded_bins(&self) -> &[usize] {
        &self.excluded_bins
    }

    pub fn labels(&self) -> &[Option<bool>] {
        &self.labels
    }

    /// Number of distinct vertices labeled so far.
    pub fn labels_used(&self) -> usize {
        self.labels_used
    }

    /// Vertices drawn by the uniform stream, in draw order.
    pub fn draw_log(&self) -> &[VertexId] {
        &self.draws
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    /// The vertex whose label is needed next.
    pub fn pending_vertex(&self) -> Option<VertexId> {
        self.pending
    }

    pub fn is_complete(&self) -> bool {
        self.pending.is_none()
    }

    pub fn in_initial_phase(&self) -> bool {
        !self.initialized
    }

    /// Apply the label of the pending vertex and advance until another
    /// label is needed. Returns the events produced.
    pub fn submit_label(&mut self, vertex: VertexId, label: bool) -> Result<&[SessionEvent]> {
        if self.pending != Some(vertex) {
            return Err(Error::UnexpectedVertex {
                expected: self.pending,
                got: vertex,
            });
        }
        let first_event = self.events.len();
        self.labels[vertex as usize] = Some(label);
        self.labels_used += 1;
        self.pending = None;

        if !self.initialized {
            self.init_queue.pop_front();
            if self.init_queue.is_empty() {
                let bins = self.start_tracks()?;
                self.push_event(Phase::Initial, vertex, label, bins);
                self.initialized = true;
                self.advance()?;
            } else {
                self.push_event(Phase::Initial, vertex, label, Vec::new());
                self.pending = self.init_queue.front().copied();
            }
        } else {
            self.count_uniform(label);
            let bins = self.apply_draw(vertex)?;
            self.push_event(Phase::Uniform, vertex, label, bins);
            self.advance()?;
        }
        Ok(&self.events[first_event..])
    }

    /// Label the pending vertex with `annotator`. Returns `false` once the
    /// session is complete.
    pub fn step_with<F: FnMut(VertexId) -> bool>(&mut self, mut annotator: F) -> Result<bool> {
        match self.pending {
            None => Ok(false),
            Some(v) => {
                let label = annotator(v);
                self.submit_label(v, label)?;
                Ok(true)
            }
        }
    }

    /// Drive the session with known labels until `labels_used >= target` or
    /// completion.
    pub fn run_until(&mut self, truth: &[bool], target: usize) -> Result<()> {
        while self.labels_used < target && self.step_with(|v| truth[v as usize])? {}
        Ok(())
    }

    /// Unbiased estimate of the number of targets from the uniform stream.
    pub fn estimate_target_count(&self) -> Option<f64> {
        (self.uniform_labeled > 0).then(|| {
            self.num_vertices() as f64 * self.uniform_targets as f64 / self.uniform_labeled as f64
        })
    }

    fn count_uniform(&mut self, label: bool) {
        self.uniform_labeled += 1;
        if label {
            self.uniform_targets += 1;
        }
    }

    fn start_tracks(&mut self) -> Result<Vec<BinUpdate>> {
        let labels_used = self.labels_used;
        let mut updates = Vec::with_capacity(self.tracks.len());
        for t in &mut self.tracks {
            let (a, b) = t.initial_pair;
            t.state.insert(a, &self.labels, &self.graph, &self.model)?;
            t.state.insert(b, &self.labels, &self.graph, &self.model)?;
            updates.push(record(t, &self.model, labels_used)?);
        }
        Ok(updates)
    }

    fn apply_draw(&mut self, v: VertexId) -> Result<Vec<BinUpdate>> {
        let labels_used = self.labels_used;
        let mut updates = Vec::new();
        for t in &mut self.tracks {
            if t.state.contains(v) {
                continue;
            }
            t.state.insert(v, &self.labels, &self.graph, &self.model)?;
            updates.push(record(t, &self.model, labels_used)?);
        }
        Ok(updates)
    }

    /// Draw from the uniform stream, applying already-labeled vertices
    /// directly, until an unlabeled vertex is drawn or the pool is empty.
    fn advance(&mut self) -> Result<()> {
        while !self.pool.is_empty() {
            let i = self.rng.random_range(0..self.pool.len());
            let v = self.pool.swap_remove(i);
            self.draws.push(v);
            match self.labels[v as usize] {
                None => {
                    self.pending = Some(v);
                    return Ok(());
                }
                Some(label) => {
                    self.count_uniform(label);
                    let bins = self.apply_draw(v)?;
                    self.push_event(Phase::Uniform, v, label, bins);
                }
            }
        }
        self.pending = None;
        Ok(())
    }

    fn push_event(&mut self, phase: Phase, vertex: VertexId, label: bool, bins: Vec<BinUpdate>) {
        self.events.push(SessionEvent {
            step: self.events.len(),
            phase,
            vertex,
            label,
            labels_used: self.labels_used,
            bins,
        });
    }
}

fn record(track: &mut BinTrack, model: &EdgeScoreModel, labels_used: usize) -> Result<BinUpdate> {
    let estimate = model.estimate(&track.state)?;
    let k = track.state.k();
    track.stream.push(EstimatePoint {
        labels_used,
        k,
        estimate,
    });
    Ok(BinUpdate {
        bin: track.bin,
        k,
        f_k: track.state.f_k(),
        g_k: track.state.g_k(),
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::is_estimate;

    fn arcs(g: BinnedPairGraph, probs: Vec<f64>) -> (Arc<BinnedPairGraph>, Arc<EdgeScoreModel>) {
        let m = EdgeScoreModel::product(&g, probs).unwrap();
        (Arc::new(g), Arc::new(m))
    }

    #[test]
    fn one_bin_one_edge() {
        let (g, m) = arcs(
            BinnedPairGraph::from_edge_lists(4, vec![vec![(1, 2)]]).unwrap(),
            vec![0.5, 0.4, 0.8, 0.5],
        );
        let mut s = Session::new(g, m.clone(), 3).unwrap();
        assert_eq!(s.tracks()[0].initial_pair, (1, 2));
        assert_eq!(s.pending_vertex(), Some(1));
        s.submit_label(1, true).unwrap();
        assert_eq!(s.labels_used(), 1);
        assert!(s.tracks()[0].stream.is_empty());
        s.submit_label(2, true).unwrap();
        assert_eq!(s.labels_used(), 2);
        let first = s.tracks()[0].stream[0];
        assert_eq!(first.k, 2);
        assert_eq!(first.estimate, m.total(0) * 1.0 / (0.4 * 0.8));
    }

    #[test]
    fn wrong_vertex_is_rejected() {
        let (g, m) = arcs(BinnedPairGraph::complete(4), vec![0.5; 4]);
        let mut s = Session::new(g, m, 1).unwrap();
        let p = s.pending_vertex().unwrap();
        let other = (p + 1) % 4;
        assert!(matches!(s.submit_label(other, true), Err(Error::UnexpectedVertex { .. })));
        s.submit_label(p, true).unwrap();
        assert!(s.submit_label(p, true).is_err());
    }

    #[test]
    fn shared_initial_vertex_is_labeled_once() {
        // Both bins have a single edge through vertex 1.
        let (g, m) = arcs(
            BinnedPairGraph::from_edge_lists(5, vec![vec![(0, 1)], vec![(1, 2)], vec![]]).unwrap(),
            vec![0.5; 5],
        );
        let mut s = Session::new(g, m, 0).unwrap();
        assert_eq!(s.excluded_bins(), &[2]);
        assert_eq!(s.tracks().len(), 2);
        let truth = vec![true; 5];
        while s.in_initial_phase() {
            s.step_with(|v| truth[v as usize]).unwrap();
        }
        assert_eq!(s.labels_used(), 3);
        // first point of every stream comes after all initial labels
        assert!(s.tracks().iter().all(|t| t.stream[0].labels_used == 3 && t.stream[0].k == 2));
    }

    #[test]
    fn all_bins_empty() {
        let (g, m) = arcs(BinnedPairGraph::from_edge_lists(3, vec![vec![], vec![]]).unwrap(), vec![0.5; 3]);
        assert!(matches!(Session::new(g, m, 0), Err(Error::NoActiveBins)));
    }

    #[test]
    fn full_run_reaches_truth_and_labels_everything() {
        let n = 12;
        let lists = vec![
            (0..n as VertexId).flat_map(|u| (u + 1..n as VertexId).map(move |v| (u, v))).filter(|(u, v)| (u + v) % 3 == 0).collect(),
            (0..n as VertexId).flat_map(|u| (u + 1..n as VertexId).map(move |v| (u, v))).filter(|(u, v)| (u + v) % 3 == 1).collect(),
        ];
        let probs: Vec<f64> = (0..n).map(|i| 0.1 + 0.07 * i as f64).collect();
        let (g, m) = arcs(BinnedPairGraph::from_edge_lists(n, lists).unwrap(), probs);
        let truth: Vec<bool> = (0..n).map(|i| i % 3 != 1).collect();
        let mut s = Session::new(g.clone(), m.clone(), 17).unwrap();
        s.run_until(&truth, n).unwrap();
        assert!(s.is_complete());
        assert_eq!(s.labels_used(), n);
        assert_eq!(s.draw_log().len(), n);
        for t in s.tracks() {
            let want = crate::binning::true_edge_count(&g, &truth, t.bin) as f64;
            assert_eq!(t.latest().unwrap().estimate, want);
            assert_eq!(t.state.k(), n);
            // estimate stream is one initial point plus one per accepted draw
            assert_eq!(t.stream.len(), n - 1);
        }
        let expected_targets = truth.iter().filter(|&&t| t).count() as f64;
        assert_eq!(s.estimate_target_count(), Some(expected_targets));
    }

    #[test]
    fn interactive_and_callback_paths_agree() {
        let n = 15;
        let lists = vec![(0..n as VertexId).flat_map(|u| (u + 1..n as VertexId).map(move |v| (u, v))).filter(|(u, v)| (u * v) % 4 != 1).collect()];
        let (g, m) = arcs(BinnedPairGraph::from_edge_lists(n, lists).unwrap(), (0..n).map(|i| 0.05 + 0.06 * i as f64).collect());
        let truth: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();

        let mut a = Session::new(g.clone(), m.clone(), 99).unwrap();
        a.run_until(&truth, n).unwrap();

        let mut b = Session::new(g, m, 99).unwrap();
        while let Some(v) = b.pending_vertex() {
            b.submit_label(v, truth[v as usize]).unwrap();
        }
        assert_eq!(a.events(), b.events());
        assert_eq!(a.draw_log(), b.draw_log());
    }

    #[test]
    fn estimates_follow_state() {
        let n = 10;
        let (g, m) = arcs(BinnedPairGraph::complete(n), (0..n).map(|i| 0.1 + 0.08 * i as f64).collect());
        let truth: Vec<bool> = (0..n).map(|i| i < 6).collect();
        let mut s = Session::new(g, m.clone(), 5).unwrap();
        s.run_until(&truth, 6).unwrap();
        let t = &s.tracks()[0];
        let direct = is_estimate(&t.state, m.total(0)).unwrap();
        assert_eq!(t.latest().unwrap().estimate, direct);
        // stream is append-only with non-decreasing label counts
        assert!(t.stream.windows(2).all(|w| w[0].labels_used <= w[1].labels_used && w[0].k < w[1].k));
    }
}
