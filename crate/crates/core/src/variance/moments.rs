//! Pair and triplet moment estimators and inclusion probabilities.

use serde::{Deserialize, Serialize};

use crate::binning::BinnedPairGraph;
use crate::combin::{binomial, binomial_f64, inclusion_ratio, CompensatedSum};
use crate::estimators::{EdgeScoreModel, LabelLookup, SubsetState};
use crate::exec::{map_chunks, Execution};
use crate::{Error, Result, VertexId};

/// Population means of `f * f` over pair-of-pair configurations.
///
/// | field     | configuration                          | count                    |
/// |-----------|----------------------------------------|--------------------------|
/// | `e_ident` | one unordered pair                     | `n(n-1)/2`               |
/// | `e_share` | ordered triple `(u, v, w)`, `f(u,v) f(v,w)` | `n(n-1)(n-2)`       |
/// | `e_disj`  | ordered pair of disjoint pairs         | `n(n-1)(n-2)(n-3)/4`     |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMoments {
    pub e_ident: f64,
    pub e_share: f64,
    pub e_disj: f64,
}

/// `D_t`: mean of `f(e1) f(e2) g(e3)` over ordered triplets of pairs whose
/// vertex union has exactly `t` vertices, `t = 2..=6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletMoments {
    pub d: [f64; 5],
}

impl TripletMoments {
    pub fn get(&self, t: usize) -> f64 {
        self.d[t - 2]
    }
}

/// Population configuration counts `N_ident, N_share, N_disj`.
pub fn configuration_counts(n: usize) -> [f64; 3] {
    let n = n as f64;
    [
        n * (n - 1.0) / 2.0,
        n * (n - 1.0) * (n - 2.0),
        n * (n - 1.0) * (n - 2.0) * (n - 3.0) / 4.0,
    ]
}

/// Number of ordered triplets of unordered pairs over `n` vertices whose
/// union has exactly `t` vertices.
pub fn triplet_multiplicity(n: u64, t: u64) -> Result<u128> {
    if !(2..=6).contains(&t) {
        return Err(Error::invalid(format!("triplet union size {t} outside 2..=6")));
    }
    Ok(binomial(n, t) * triplet_coefficient(t))
}

/// `sum_i (-1)^i C(t, i) C(t - i, 2)^3`: triplets covering a fixed `t`-set.
fn triplet_coefficient(t: u64) -> u128 {
    let mut acc: i128 = 0;
    for i in 0..=t.saturating_sub(2) {
        let c = binomial(t - i, 2) as i128;
        let term = binomial(t, i) as i128 * c * c * c;
        if i % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc as u128
}

fn multiplicity_f64(n: usize, t: usize) -> f64 {
    binomial_f64(n as i64, t as i64) * triplet_coefficient(t as u64) as f64
}

/// Probability that a `k`-subset drawn from bin `bin`'s proposal contains
/// every vertex of `r`.
pub fn inclusion_probability(
    r: &[VertexId],
    bin: usize,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
    k: usize,
) -> Result<f64> {
    let n = graph.num_vertices();
    let t = r.len();
    if t == 0 {
        return Err(Error::invalid("inclusion probability needs at least one vertex"));
    }
    if k < 2 || k > n {
        return Err(Error::invalid(format!("subset size {k} outside 2..={n}")));
    }
    for (i, &v) in r.iter().enumerate() {
        if v as usize >= n || r[..i].contains(&v) {
            return Err(Error::invalid(format!("vertex set {r:?} is not a set of catalog vertices")));
        }
    }
    let total = model.total(bin);
    if !(total > 0.0) {
        return Err(Error::EmptyBin(bin));
    }
    let mut inside = CompensatedSum::new();
    let mut touch = CompensatedSum::new();
    for (i, &u) in r.iter().enumerate() {
        touch.add(model.vertex_sum(bin, u));
        for &v in &r[i + 1..] {
            inside.add(model.pair_score(graph, bin, u, v));
        }
    }
    let ratios = Ratios::new(n, k);
    Ok(ratios.pi(t, split(inside.value(), touch.value(), total), total))
}

/// `(A, B, C)`: score inside `R`, between `R` and the rest, outside `R`.
#[inline]
fn split(inside: f64, vertex_sums: f64, total: f64) -> (f64, f64, f64) {
    let cross = (vertex_sums - 2.0 * inside).max(0.0);
    let outside = (total - inside - cross).max(0.0);
    (inside, cross, outside)
}

/// `C(n - m - 2, k - m - 2) / C(n - 2, k - 2)` for `m = 0..=4`.
#[derive(Debug, Clone, Copy)]
struct Ratios([f64; 5]);

impl Ratios {
    fn new(n: usize, k: usize) -> Self {
        let mut r = [0.0; 5];
        for (m, slot) in r.iter_mut().enumerate() {
            *slot = inclusion_ratio(k - 2, n - 2, m);
        }
        Ratios(r)
    }

    fn ratio(&self, m: usize) -> f64 {
        if m < self.0.len() {
            self.0[m]
        } else {
            0.0
        }
    }

    #[inline]
    fn pi(&self, t: usize, (a, b, c): (f64, f64, f64), total: f64) -> f64 {
        let inside = if t >= 2 { self.ratio(t - 2) * a } else { 0.0 };
        (inside + self.ratio(t - 1) * b + self.ratio(t) * c) / total
    }
}

fn check_k(k: usize, need: usize, name: &'static str) -> Result<()> {
    if k < need {
        Err(Error::MomentUnavailable(name))
    } else {
        Ok(())
    }
}

/// True edges of the subset's bin with both endpoints inside it.
fn subset_true_edges<L: LabelLookup + ?Sized>(
    state: &SubsetState,
    labels: &L,
    graph: &BinnedPairGraph,
) -> Result<Vec<(VertexId, VertexId)>> {
    let bin = graph.bin(state.bin());
    let mut edges = Vec::new();
    for &u in state.members() {
        if !labels.label(u).ok_or(Error::MissingLabel(u))? {
            continue;
        }
        for &v in bin.neighbors(u) {
            if v > u && state.contains(v) && labels.label(v).ok_or(Error::MissingLabel(v))? {
                edges.push((u, v));
            }
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

/// Unordered configuration sums from an edge list: `(|T|, share, disj)`
/// where `share` counts ordered edge pairs sharing one vertex and `disj`
/// ordered pairs of disjoint edges.
fn degree_sums(edges: &[(VertexId, VertexId)], n: usize) -> (f64, f64, f64) {
    let mut deg = vec![0u64; n];
    for &(u, v) in edges {
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    let t = edges.len() as f64;
    let share: f64 = deg.iter().map(|&d| (d * d.saturating_sub(1)) as f64).sum();
    (t, share, t * t - t - share)
}

/// Unbiased moment estimates from a uniformly drawn subset. Needs `k >= 4`.
pub fn estimate_pair_moments_mc<L: LabelLookup + ?Sized>(
    state: &SubsetState,
    labels: &L,
    graph: &BinnedPairGraph,
) -> Result<PairMoments> {
    let k = state.k();
    check_k(k, 3, "E_share")?;
    check_k(k, 4, "E_disj")?;
    let edges = subset_true_edges(state, labels, graph)?;
    let (ident, share, disj) = degree_sums(&edges, state.n());
    let [n2, n3, n4] = configuration_counts(k);
    Ok(PairMoments {
        e_ident: ident / n2,
        e_share: share / n3,
        e_disj: disj / n4,
    })
}

/// Exact population moments of bin `bin` from full labels.
pub fn exact_pair_moments(graph: &BinnedPairGraph, labels: &[bool], bin: usize) -> Result<PairMoments> {
    let n = graph.num_vertices();
    if n < 4 {
        return Err(Error::MomentUnavailable("E_disj"));
    }
    if labels.len() != n {
        return Err(Error::invalid("label count does not match the graph"));
    }
    let edges: Vec<_> = graph
        .bin(bin)
        .edges()
        .iter()
        .copied()
        .filter(|&(u, v)| labels[u as usize] && labels[v as usize])
        .collect();
    let (ident, share, disj) = degree_sums(&edges, n);
    let [n2, n3, n4] = configuration_counts(n);
    Ok(PairMoments {
        e_ident: ident / n2,
        e_share: share / n3,
        e_disj: disj / n4,
    })
}

/// Horvitz-Thompson sums over ordered pairs of observed true edges.
#[derive(Debug, Clone, Copy, Default)]
struct HtSums {
    ident: f64,
    share: f64,
    disj: f64,
    /// Indexed by union size `t`.
    d: [f64; 7],
}

/// Scores among the vertices touched by observed true edges.
struct LocalScores {
    index: Vec<u32>,
    dense: Vec<f64>,
    m: usize,
    vertex_sums: Vec<f64>,
}

impl LocalScores {
    const NONE: u32 = u32::MAX;

    fn new(edges: &[(VertexId, VertexId)], bin: usize, graph: &BinnedPairGraph, model: &EdgeScoreModel) -> Self {
        let n = graph.num_vertices();
        let mut index = vec![Self::NONE; n];
        let mut verts = Vec::new();
        for &(u, v) in edges {
            for w in [u, v] {
                if index[w as usize] == Self::NONE {
                    index[w as usize] = verts.len() as u32;
                    verts.push(w);
                }
            }
        }
        let m = verts.len();
        let mut dense = vec![0.0; m * m];
        if model.is_uniform() {
            let c = model.edge_score_of(0, 1);
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        dense[i * m + j] = c;
                    }
                }
            }
        } else {
            for (i, &u) in verts.iter().enumerate() {
                for &v in graph.bin(bin).neighbors(u) {
                    let j = index[v as usize];
                    if j != Self::NONE {
                        dense[i * m + j as usize] = model.edge_score_of(u, v);
                    }
                }
            }
        }
        let vertex_sums = verts.iter().map(|&v| model.vertex_sum(bin, v)).collect();
        LocalScores {
            index,
            dense,
            m,
            vertex_sums,
        }
    }

    #[inline]
    fn local(&self, v: VertexId) -> usize {
        self.index[v as usize] as usize
    }

    #[inline]
    fn g(&self, i: usize, j: usize) -> f64 {
        self.dense[i * self.m + j]
    }
}

const EDGE_CHUNK: usize = 64;

/// Sum `f(e1) f(e2) / pi(e1 u e2)` (and the D-type extensions) over ordered
/// pairs of `edges`. Unordered pairs are visited once and doubled.
fn ht_sums(
    edges: &[(VertexId, VertexId)],
    bin: usize,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
    k: usize,
    exec: Execution,
) -> Result<HtSums> {
    let n = graph.num_vertices();
    let total = model.total(bin);
    if !(total > 0.0) {
        return Err(Error::EmptyBin(bin));
    }
    let ratios = Ratios::new(n, k);
    let local = LocalScores::new(edges, bin, graph, model);
    let loc: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (local.local(u), local.local(v))).collect();
    let starts: Vec<usize> = (0..loc.len()).collect();

    let partials = map_chunks(exec, &starts, EDGE_CHUNK, |chunk| -> Result<HtSums> {
        let mut s = HtSums::default();
        for &i in chunk {
            let (a, b) = loc[i];
            let gab = local.g(a, b);
            let sa = local.vertex_sums[a];
            let sb = local.vertex_sums[b];
            {
                let parts = split(gab, sa + sb, total);
                let pi = ratios.pi(2, parts, total);
                if !(pi > 0.0) {
                    return Err(Error::ZeroInclusion);
                }
                let w = 1.0 / pi;
                s.ident += w;
                s.d[2] += w * parts.0;
                s.d[3] += w * parts.1;
                s.d[4] += w * parts.2;
            }
            for &(c, d) in &loc[i + 1..] {
                let shared = (c == a) as u8 + (c == b) as u8 + (d == a) as u8 + (d == b) as u8;
                let (t, parts) = if shared == 1 {
                    let x = if c == a || c == b { d } else { c };
                    let inside = gab + local.g(a, x) + local.g(b, x);
                    (3, split(inside, sa + sb + local.vertex_sums[x], total))
                } else {
                    let inside = gab + local.g(c, d) + local.g(a, c) + local.g(a, d) + local.g(b, c) + local.g(b, d);
                    let sums = sa + sb + local.vertex_sums[c] + local.vertex_sums[d];
                    (4, split(inside, sums, total))
                };
                let pi = ratios.pi(t, parts, total);
                if !(pi > 0.0) {
                    return Err(Error::ZeroInclusion);
                }
                let w = 2.0 / pi;
                if t == 3 {
                    s.share += w;
                } else {
                    s.disj += w;
                }
                s.d[t] += w * parts.0;
                s.d[t + 1] += w * parts.1;
                s.d[t + 2] += w * parts.2;
            }
        }
        Ok(s)
    });

    // ident, share, disj, then d[2..7]
    let mut acc = [CompensatedSum::new(); 8];
    for p in partials {
        let p = p?;
        acc[0].add(p.ident);
        acc[1].add(p.share);
        acc[2].add(p.disj);
        for t in 2..7 {
            acc[t + 1].add(p.d[t]);
        }
    }
    let mut out = HtSums {
        ident: acc[0].value(),
        share: acc[1].value(),
        disj: acc[2].value(),
        d: [0.0; 7],
    };
    for t in 2..7 {
        out.d[t] = acc[t + 1].value();
    }
    Ok(out)
}

fn pair_moments_from(s: &HtSums, n: usize) -> PairMoments {
    let [n2, n3, n4] = configuration_counts(n);
    PairMoments {
        e_ident: s.ident / n2,
        e_share: s.share / n3,
        e_disj: s.disj / n4,
    }
}

fn triplet_moments_from(s: &HtSums, n: usize) -> TripletMoments {
    let mut d = [0.0; 5];
    for (i, slot) in d.iter_mut().enumerate() {
        let t = i + 2;
        let m = multiplicity_f64(n, t);
        *slot = if m > 0.0 { s.d[t] / m } else { 0.0 };
    }
    TripletMoments { d }
}

/// Horvitz-Thompson moment estimates from a subset drawn from the proposal.
/// Needs `k >= 4`.
pub fn estimate_pair_moments_is<L: LabelLookup + ?Sized>(
    state: &SubsetState,
    labels: &L,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
    exec: Execution,
) -> Result<PairMoments> {
    Ok(estimate_moments_is(state, labels, graph, model, exec)?.0)
}

/// Horvitz-Thompson estimates of `D_2..D_6`. Needs `k >= 4`.
pub fn estimate_triplet_moments_is<L: LabelLookup + ?Sized>(
    state: &SubsetState,
    labels: &L,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
    exec: Execution,
) -> Result<TripletMoments> {
    Ok(estimate_moments_is(state, labels, graph, model, exec)?.1)
}

/// Both estimates from one pass over the observed edge pairs.
pub fn estimate_moments_is<L: LabelLookup + ?Sized>(
    state: &SubsetState,
    labels: &L,
    graph: &BinnedPairGraph,
    model: &EdgeScoreModel,
    exec: Execution,
) -> Result<(PairMoments, TripletMoments)> {
    let k = state.k();
    check_k(k, 3, "E_share")?;
    check_k(k, 4, "E_disj")?;
    let edges = subset_true_edges(state, labels, graph)?;
    let s = ht_sums(&edges, state.bin(), graph, model, k, exec)?;
    let n = state.n();
    Ok((pair_moments_from(&s, n), triplet_moments_from(&s, n)))
}

/// Exact `D_t` of bin `bin` from full labels.
pub fn exact_triplet_moments(
    graph: &BinnedPairGraph,
    labels: &[bool],
    model: &EdgeScoreModel,
    bin: usize,
    exec: Execution,
) -> Result<TripletMoments> {
    let n = graph.num_vertices();
    if n < 4 {
        return Err(Error::MomentUnavailable("D_t"));
    }
    let edges: Vec<_> = graph
        .bin(bin)
        .edges()
        .iter()
        .copied()
        .filter(|&(u, v)| labels[u as usize] && labels[v as usize])
        .collect();
    // With k = n every inclusion probability is 1.
    let s = ht_sums(&edges, bin, graph, model, n, exec)?;
    Ok(triplet_moments_from(&s, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities() {
        assert_eq!(triplet_multiplicity(10, 2).unwrap(), 45);
        assert_eq!(triplet_multiplicity(6, 6).unwrap(), 90);
        let coeffs: Vec<u128> = (2..=6).map(triplet_coefficient).collect();
        assert_eq!(coeffs, vec![1, 24, 114, 180, 90]);
        for n in 6..20u64 {
            let s: u128 = (2..=6).map(|t| triplet_multiplicity(n, t).unwrap()).sum();
            assert_eq!(s, binomial(n, 2).pow(3));
        }
        assert!(triplet_multiplicity(10, 7).is_err());
        assert!(triplet_multiplicity(10, 1).is_err());
    }

    #[test]
    fn uniform_pair_inclusion() {
        let g = BinnedPairGraph::complete(6);
        let m = EdgeScoreModel::uniform(&g, 1.0).unwrap();
        let p = inclusion_probability(&[0, 3], 0, &g, &m, 4).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
        assert_eq!(inclusion_probability(&[0, 1, 2, 3], 0, &g, &m, 3).unwrap(), 0.0);
        let full = inclusion_probability(&[0, 1, 2, 5], 0, &g, &m, 6).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_ones_moments() {
        let n = 7;
        let g = BinnedPairGraph::complete(n);
        let labels = vec![true; n];
        let e = exact_pair_moments(&g, &labels, 0).unwrap();
        assert_eq!((e.e_ident, e.e_share, e.e_disj), (1.0, 1.0, 1.0));
        let m = EdgeScoreModel::uniform(&g, 1.0).unwrap();
        let d = exact_triplet_moments(&g, &labels, &m, 0, Execution::Sequential).unwrap();
        for x in d.d {
            assert!((x - 1.0).abs() < 1e-12, "{x}");
        }
        let s = SubsetState::from_members(0, &[4, 1, 6, 2, 0], &labels, &g, &m).unwrap();
        let (pm, tm) = estimate_moments_is(&s, &labels, &g, &m, Execution::Sequential).unwrap();
        for x in [pm.e_ident, pm.e_share, pm.e_disj].into_iter().chain(tm.d) {
            assert!((x - 1.0).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn small_subsets_are_unavailable() {
        let g = BinnedPairGraph::complete(6);
        let m = EdgeScoreModel::uniform(&g, 1.0).unwrap();
        let labels = vec![true; 6];
        let s = SubsetState::from_members(0, &[0, 1, 2], &labels, &g, &m).unwrap();
        assert!(matches!(
            estimate_pair_moments_mc(&s, &labels, &g),
            Err(Error::MomentUnavailable("E_disj"))
        ));
    }
}
