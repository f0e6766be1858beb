//! Separation bins, per-bin pair graphs and `DD/RR - 1` correlation estimates.
//!
//! Bins are half-open, `[edges[b], edges[b + 1])`. Pairs whose separation
//! falls outside `[edges[0], edges[B])` belong to no bin.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{Bounds, Catalog};
use crate::exec::{map_chunks, Execution};
use crate::{Error, Result, VertexId};

/// Catalogs larger than this are paired through a uniform grid instead of the
/// all-pairs loop.
pub const GRID_THRESHOLD: usize = 10_000;

const ROW_BLOCK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinConfig {
    edges: Vec<f64>,
}

impl BinConfig {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("bin edges need at least two values"));
        }
        if edges.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::invalid("bin edges must be finite and positive"));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("bin edges must be strictly increasing"));
        }
        Ok(BinConfig { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn range(&self, b: usize) -> (f64, f64) {
        (self.edges[b], self.edges[b + 1])
    }

    pub fn min_separation(&self) -> f64 {
        self.edges[0]
    }

    pub fn max_separation(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Bin containing separation `d`, if any.
    #[inline]
    pub fn bin_of(&self, d: f64) -> Option<usize> {
        if !(d >= self.edges[0] && d < self.max_separation()) {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= d) - 1)
    }

    /// Squared-distance variant of [`bin_of`](Self::bin_of), comparing against
    /// squared edges to avoid a square root per pair.
    #[inline]
    fn bin_of_sq(&self, sq_edges: &[f64], d2: f64) -> Option<usize> {
        if !(d2 >= sq_edges[0] && d2 < sq_edges[sq_edges.len() - 1]) {
            return None;
        }
        Some(sq_edges.partition_point(|&e| e <= d2) - 1)
    }

    /// Read a TOML or JSON bin file with either `edges = [...]` or
    /// `theta_min`, `theta_max`, `num_bins`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let spec: BinSpec = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
        };
        spec.build()
    }
}

/// Serialized form of a bin configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<f64>>,
}

impl BinSpec {
    pub fn build(&self) -> Result<BinConfig> {
        match (&self.edges, self.theta_min, self.theta_max, self.num_bins) {
            (Some(edges), None, None, None) => BinConfig::from_edges(edges.clone()),
            (None, Some(lo), Some(hi), Some(b)) => make_log_bins(lo, hi, b),
            _ => Err(Error::Schema(
                "bin config needs either `edges` or all of `theta_min`, `theta_max`, `num_bins`".into(),
            )),
        }
    }
}

impl From<&BinConfig> for BinSpec {
    fn from(cfg: &BinConfig) -> Self {
        BinSpec {
            edges: Some(cfg.edges.clone()),
            ..BinSpec::default()
        }
    }
}

/// `bins` logarithmically spaced bins from `theta_min` to `theta_max`.
pub fn make_log_bins(theta_min: f64, theta_max: f64, bins: usize) -> Result<BinConfig> {
    if !(theta_min > 0.0 && theta_min < theta_max && theta_max.is_finite()) {
        return Err(Error::invalid(format!(
            "need 0 < theta_min < theta_max, got {theta_min}, {theta_max}"
        )));
    }
    if bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    let ratio = theta_max / theta_min;
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| theta_min * ratio.powf(i as f64 / bins as f64))
        .collect();
    edges[bins] = theta_max;
    BinConfig::from_edges(edges)
}

/// Edges of one bin: a sorted `(u, v)` list with `u < v` plus a CSR
/// adjacency with sorted neighbor lists.
#[derive(Debug, Clone, Default)]
pub struct BinEdges {
    edges: Vec<(VertexId, VertexId)>,
    offsets: Vec<usize>,
    neighbors: Vec<VertexId>,
}

impl BinEdges {
    fn from_sorted(n: usize, edges: Vec<(VertexId, VertexId)>) -> Self {
        let mut degree = vec![0usize; n + 1];
        for &(u, v) in &edges {
            degree[u as usize + 1] += 1;
            degree[v as usize + 1] += 1;
        }
        for i in 1..=n {
            degree[i] += degree[i - 1];
        }
        let offsets = degree;
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0; 2 * edges.len()];
        // Lexicographic edge order fills each list in ascending order.
        for &(u, v) in &edges {
            neighbors[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        BinEdges {
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    #[inline]
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    #[inline]
    pub fn contains(&self, u: VertexId, v: VertexId) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) { (u, v) } else { (v, u) };
        self.neighbors(a).binary_search(&b).is_ok()
    }
}

/// One graph per bin over the same vertex set.
#[derive(Debug, Clone)]
pub struct BinnedPairGraph {
    n: usize,
    bins: Vec<BinEdges>,
}

impl BinnedPairGraph {
    /// Build from explicit per-bin edge lists. Pairs may be given in either
    /// orientation; a pair may appear in at most one bin.
    pub fn from_edge_lists(n: usize, lists: Vec<Vec<(VertexId, VertexId)>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut bins = Vec::with_capacity(lists.len());
        for list in lists {
            let mut edges: Vec<(VertexId, VertexId)> = list
                .into_iter()
                .map(|(u, v)| (u.min(v), u.max(v)))
                .collect();
            for &(u, v) in &edges {
                if u == v || v as usize >= n {
                    return Err(Error::invalid(format!("invalid edge ({u}, {v}) for n = {n}")));
                }
                if !seen.insert((u, v)) {
                    return Err(Error::invalid(format!("edge ({u}, {v}) listed twice")));
                }
            }
            edges.sort_unstable();
            bins.push(BinEdges::from_sorted(n, edges));
        }
        Ok(BinnedPairGraph { n, bins })
    }

    /// Every pair of `n` vertices in a single bin.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n as VertexId)
            .flat_map(|u| (u + 1..n as VertexId).map(move |v| (u, v)))
            .collect();
        BinnedPairGraph {
            n,
            bins: vec![BinEdges::from_sorted(n, edges)],
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn bin(&self, b: usize) -> &BinEdges {
        &self.bins[b]
    }

    pub fn edge_counts(&self) -> Vec<usize> {
        self.bins.iter().map(BinEdges::len).collect()
    }

    pub fn total_edges(&self) -> usize {
        self.bins.iter().map(BinEdges::len).sum()
    }

    /// Relabel vertices: vertex `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[VertexId]) -> Result<Self> {
        let lists = self
            .bins
            .iter()
            .map(|bin| {
                bin.edges
                    .iter()
                    .map(|&(u, v)| (perm[u as usize], perm[v as usize]))
                    .collect()
            })
            .collect();
        Self::from_edge_lists(self.n, lists)
    }
}

/// Uniform grid for candidate pairs within `reach` of each other.
struct NeighborGrid {
    origin: (f64, f64),
    cell: f64,
    nx: usize,
    ny: usize,
    /// Point indices sorted by cell; `starts[c]..starts[c+1]` is cell `c`.
    order: Vec<u32>,
    starts: Vec<usize>,
}

impl NeighborGrid {
    fn new(points: &[(f64, f64)], bounds: Bounds, reach: f64) -> Self {
        let side = (points.len() as f64).sqrt().ceil().max(1.0);
        let cell = reach.max(bounds.width().max(bounds.height()) / side).max(f64::MIN_POSITIVE);
        let nx = ((bounds.width() / cell).floor() as usize + 1).max(1);
        let ny = ((bounds.height() / cell).floor() as usize + 1).max(1);
        let origin = (bounds.x_min, bounds.y_min);
        let mut grid = NeighborGrid {
            origin,
            cell,
            nx,
            ny,
            order: Vec::new(),
            starts: Vec::new(),
        };
        let mut keyed: Vec<(usize, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, &p)| (grid.cell_of(p), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut starts = vec![0usize; nx * ny + 1];
        for &(c, _) in &keyed {
            starts[c + 1] += 1;
        }
        for c in 1..starts.len() {
            starts[c] += starts[c - 1];
        }
        grid.order = keyed.into_iter().map(|(_, i)| i).collect();
        grid.starts = starts;
        grid
    }

    fn coords(&self, (x, y): (f64, f64)) -> (usize, usize) {
        let cx = (((x - self.origin.0) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = (((y - self.origin.1) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    fn cell_of(&self, p: (f64, f64)) -> usize {
        let (cx, cy) = self.coords(p);
        cy * self.nx + cx
    }

    /// Indices of points in the 3x3 cell block around `p`.
    fn candidates(&self, p: (f64, f64), out: &mut Vec<u32>) {
        out.clear();
        let (cx, cy) = self.coords(p);
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.ny - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.nx - 1) {
                let c = y * self.nx + x;
                out.extend_from_slice(&self.order[self.starts[c]..self.starts[c + 1]]);
            }
        }
    }
}

/// Pair enumeration shared by graph construction and counting.
struct PairScanner<'a> {
    points: Vec<(f64, f64)>,
    bins: &'a BinConfig,
    sq_edges: Vec<f64>,
    grid: Option<NeighborGrid>,
}

impl<'a> PairScanner<'a> {
    fn new(catalog: &Catalog, bins: &'a BinConfig) -> Self {
        let points: Vec<(f64, f64)> = catalog.points().iter().map(|p| (p.x, p.y)).collect();
        let grid = (points.len() > GRID_THRESHOLD)
            .then(|| NeighborGrid::new(&points, catalog.bounds(), bins.max_separation()));
        PairScanner {
            points,
            bins,
            sq_edges: bins.edges().iter().map(|e| e * e).collect(),
            grid,
        }
    }

    /// Binned partners `v > u` of `u`, sorted by `v`.
    fn row(&self, u: usize, scratch: &mut Vec<u32>, out: &mut Vec<(u32, u16)>) {
        out.clear();
        let (x, y) = self.points[u];
        let mut visit = |v: usize| {
            let (vx, vy) = self.points[v];
            let d2 = (x - vx) * (x - vx) + (y - vy) * (y - vy);
            if let Some(b) = self.bins.bin_of_sq(&self.sq_edges, d2) {
                out.push((v as u32, b as u16));
            }
        };
        match &self.grid {
            None => (u + 1..self.points.len()).for_each(&mut visit),
            Some(grid) => {
                grid.candidates((x, y), scratch);
                scratch.retain(|&v| v as usize > u);
                scratch.sort_unstable();
                scratch.iter().for_each(|&v| visit(v as usize));
            }
        }
    }

    fn blocks(&self) -> Vec<usize> {
        (0..self.points.len()).step_by(ROW_BLOCK).collect()
    }
}

/// Per-bin edge lists for `catalog`.
pub fn build_pair_graph(catalog: &Catalog, bins: &BinConfig, exec: Execution) -> Result<BinnedPairGraph> {
    let n = catalog.len();
    if n < 2 {
        return Err(Error::invalid("pair graph needs at least two points"));
    }
    let scanner = PairScanner::new(catalog, bins);
    let blocks = scanner.blocks();
    let nb = bins.num_bins();
    let partial: Vec<Vec<Vec<(VertexId, VertexId)>>> = map_chunks(exec, &blocks, 1, |chunk| {
        let start = chunk[0];
        let mut lists = vec![Vec::new(); nb];
        let mut scratch = Vec::new();
        let mut row = Vec::new();
        for u in start..(start + ROW_BLOCK).min(n) {
            scanner.row(u, &mut scratch, &mut row);
            for &(v, b) in &row {
                lists[b as usize].push((u as VertexId, v));
            }
        }
        lists
    });
    let mut lists: Vec<Vec<(VertexId, VertexId)>> = vec![Vec::new(); nb];
    for block in partial {
        for (b, mut edges) in block.into_iter().enumerate() {
            lists[b].append(&mut edges);
        }
    }
    let bins = lists.into_iter().map(|e| BinEdges::from_sorted(n, e)).collect();
    Ok(BinnedPairGraph { n, bins })
}

/// Per-bin unordered pair counts without storing edges.
pub fn bin_pair_counts(catalog: &Catalog, bins: &BinConfig, exec: Execution) -> Vec<u64> {
    let n = catalog.len();
    let nb = bins.num_bins();
    if n < 2 {
        return vec![0; nb];
    }
    let scanner = PairScanner::new(catalog, bins);
    let blocks = scanner.blocks();
    let partial = map_chunks(exec, &blocks, 1, |chunk| {
        let start = chunk[0];
        let mut counts = vec![0u64; nb];
        let mut scratch = Vec::new();
        let mut row = Vec::new();
        for u in start..(start + ROW_BLOCK).min(n) {
            scanner.row(u, &mut scratch, &mut row);
            for &(_, b) in &row {
                counts[b as usize] += 1;
            }
        }
        counts
    });
    partial.into_iter().fold(vec![0u64; nb], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(a, x)| *a += x);
        acc
    })
}

/// Number of edges of bin `b` whose endpoints are both targets.
pub fn true_edge_count(graph: &BinnedPairGraph, labels: &[bool], b: usize) -> u64 {
    graph
        .bin(b)
        .edges()
        .iter()
        .filter(|&&(u, v)| labels[u as usize] && labels[v as usize])
        .count() as u64
}

pub fn true_edge_counts(graph: &BinnedPairGraph, labels: &[bool]) -> Vec<u64> {
    (0..graph.num_bins())
        .map(|b| true_edge_count(graph, labels, b))
        .collect()
}

/// Normalized pair counts and the simple correlation estimate per bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCounts {
    pub dd: Vec<f64>,
    pub rr: Vec<f64>,
    /// `dd / rr - 1`; `None` where the random catalog has no pairs.
    pub omega: Vec<Option<f64>>,
}

impl PairCounts {
    /// `data_counts` may be estimates (fractional), as may `n_d`.
    pub fn new(data_counts: &[f64], n_d: f64, rr_counts: &[u64], n_r: usize) -> Result<Self> {
        if data_counts.len() != rr_counts.len() {
            return Err(Error::invalid("data and random counts have different bin counts"));
        }
        if !(n_d >= 1.0) {
            return Err(Error::invalid(format!("need at least one data point, got {n_d}")));
        }
        if n_r < 2 {
            return Err(Error::invalid("random catalog needs at least two points"));
        }
        let dd: Vec<f64> = data_counts.iter().map(|&c| c / (n_d * n_d)).collect();
        let nr = n_r as f64;
        let rr: Vec<f64> = rr_counts.iter().map(|&c| c as f64 / (nr * nr)).collect();
        let omega = dd
            .iter()
            .zip(&rr)
            .map(|(&d, &r)| (r > 0.0).then(|| d / r - 1.0))
            .collect();
        Ok(PairCounts { dd, rr, omega })
    }
}

pub fn pair_counts_and_omega(
    data_counts: &[f64],
    n_d: f64,
    random_graph: &BinnedPairGraph,
    n_r: usize,
) -> Result<PairCounts> {
    let rr: Vec<u64> = random_graph.edge_counts().into_iter().map(|c| c as u64).collect();
    PairCounts::new(data_counts, n_d, &rr, n_r)
}

/// Correlation estimate with a delete-one-cell jackknife error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JackknifeOmega {
    pub omega: f64,
    pub sigma: f64,
}

/// Per-bin pair counts with the count of pairs touching each grid cell.
struct CellCounts {
    total: Vec<u64>,
    /// `touch[b * cells + c]`: pairs in bin `b` with an endpoint in cell `c`.
    touch: Vec<u64>,
    per_cell_points: Vec<u64>,
}

fn cell_counts(catalog: &Catalog, bins: &BinConfig, field: Bounds, side: usize, exec: Execution) -> CellCounts {
    let cells = side * side;
    let nb = bins.num_bins();
    let cell_of = |x: f64, y: f64| {
        let cx = (((x - field.x_min) / field.width() * side as f64) as usize).min(side - 1);
        let cy = (((y - field.y_min) / field.height() * side as f64) as usize).min(side - 1);
        cy * side + cx
    };
    let cell: Vec<usize> = catalog.points().iter().map(|p| cell_of(p.x, p.y)).collect();
    let mut per_cell_points = vec![0u64; cells];
    cell.iter().for_each(|&c| per_cell_points[c] += 1);

    let n = catalog.len();
    let scanner = PairScanner::new(catalog, bins);
    let blocks = scanner.blocks();
    let partial = map_chunks(exec, &blocks, 1, |chunk| {
        let start = chunk[0];
        let mut total = vec![0u64; nb];
        let mut touch = vec![0u64; nb * cells];
        let mut scratch = Vec::new();
        let mut row = Vec::new();
        for u in start..(start + ROW_BLOCK).min(n) {
            scanner.row(u, &mut scratch, &mut row);
            for &(v, b) in &row {
                let b = b as usize;
                total[b] += 1;
                let (cu, cv) = (cell[u], cell[v as usize]);
                touch[b * cells + cu] += 1;
                if cv != cu {
                    touch[b * cells + cv] += 1;
                }
            }
        }
        (total, touch)
    });
    let mut total = vec![0u64; nb];
    let mut touch = vec![0u64; nb * cells];
    for (t, h) in partial {
        total.iter_mut().zip(t).for_each(|(a, x)| *a += x);
        touch.iter_mut().zip(h).for_each(|(a, x)| *a += x);
    }
    CellCounts {
        total,
        touch,
        per_cell_points,
    }
}

/// `DD/RR - 1` for `data` against `random`, with a jackknife standard error
/// from deleting one of `side * side` equal cells of `field` at a time.
pub fn jackknife_omega(
    data: &Catalog,
    random: &Catalog,
    bins: &BinConfig,
    field: Bounds,
    side: usize,
    exec: Execution,
) -> Result<Vec<Option<JackknifeOmega>>> {
    if side == 0 {
        return Err(Error::invalid("jackknife needs at least one cell"));
    }
    let cells = side * side;
    let d = cell_counts(data, bins, field, side, exec);
    let r = cell_counts(random, bins, field, side, exec);
    let (nd, nr) = (data.len() as f64, random.len() as f64);
    let omega = |dd: f64, nd: f64, rr: f64, nr: f64| {
        (rr > 0.0 && nd > 0.0).then(|| (dd / (nd * nd)) / (rr / (nr * nr)) - 1.0)
    };
    let out = (0..bins.num_bins())
        .map(|b| {
            let full = omega(d.total[b] as f64, nd, r.total[b] as f64, nr)?;
            let leave_out: Vec<f64> = (0..cells)
                .filter_map(|c| {
                    omega(
                        (d.total[b] - d.touch[b * cells + c]) as f64,
                        nd - d.per_cell_points[c] as f64,
                        (r.total[b] - r.touch[b * cells + c]) as f64,
                        nr - r.per_cell_points[c] as f64,
                    )
                })
                .collect();
            let k = leave_out.len() as f64;
            let sigma = if leave_out.len() < 2 {
                f64::NAN
            } else {
                let mean = leave_out.iter().sum::<f64>() / k;
                ((k - 1.0) / k * leave_out.iter().map(|w| (w - mean).powi(2)).sum::<f64>()).sqrt()
            };
            Some(JackknifeOmega { omega: full, sigma })
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{generate_random_catalog, SourcePoint};

    fn line_catalog(xs: &[f64]) -> Catalog {
        let points = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| SourcePoint {
                id: i as VertexId,
                x,
                y: 0.0,
                label: Some(true),
                prob: 0.5,
            })
            .collect();
        Catalog::new(points, None).unwrap()
    }

    #[test]
    fn log_bins() {
        let b = make_log_bins(1.0, 100.0, 2).unwrap();
        assert_eq!(b.edges().len(), 3);
        for (got, want) in b.edges().iter().zip([1.0, 10.0, 100.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(make_log_bins(1.0, 100.0, 1).unwrap().edges(), &[1.0, 100.0]);

        let b = make_log_bins(3.0, 1500.0, 14).unwrap();
        assert_eq!(b.edges().len(), 15);
        let ratios: Vec<f64> = b.edges().windows(2).map(|w| w[1] / w[0]).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-12);
        }

        assert!(make_log_bins(0.0, 1.0, 3).is_err());
        assert!(make_log_bins(2.0, 1.0, 3).is_err());
        assert!(make_log_bins(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn half_open_bins() {
        let b = BinConfig::from_edges(vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(b.bin_of(0.999), None);
        assert_eq!(b.bin_of(1.0), Some(0));
        assert_eq!(b.bin_of(2.0), Some(1));
        assert_eq!(b.bin_of(3.999), Some(1));
        assert_eq!(b.bin_of(4.0), None);
        assert!(BinConfig::from_edges(vec![1.0, 1.0]).is_err());
        assert!(BinConfig::from_edges(vec![-1.0, 1.0]).is_err());
    }

    #[test]
    fn collinear_points() {
        let c = line_catalog(&[0.0, 1.0, 2.0]);
        let bins = BinConfig::from_edges(vec![0.5, 1.5, 2.5]).unwrap();
        let g = build_pair_graph(&c, &bins, Execution::Sequential).unwrap();
        assert_eq!(g.bin(0).edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.bin(1).edges(), &[(0, 2)]);
        assert_eq!(g.bin(0).neighbors(1), &[0, 2]);
        assert!(g.bin(1).contains(2, 0));
        assert!(!g.bin(1).contains(0, 1));
        assert_eq!(bin_pair_counts(&c, &bins, Execution::Sequential), vec![2, 1]);
    }

    #[test]
    fn true_edges_need_both_targets() {
        let c = line_catalog(&[0.0, 1.0, 2.0]);
        let bins = BinConfig::from_edges(vec![0.5, 1.5, 2.5]).unwrap();
        let g = build_pair_graph(&c, &bins, Execution::Sequential).unwrap();
        assert_eq!(true_edge_counts(&g, &[false, false, false]), vec![0, 0]);
        assert_eq!(true_edge_counts(&g, &[true, true, false]), vec![1, 0]);
        assert_eq!(true_edge_counts(&g, &[true, false, true]), vec![0, 1]);
    }

    #[test]
    fn grid_matches_brute_force() {
        let c = generate_random_catalog(Bounds::new(0.0, 50.0, 0.0, 20.0).unwrap(), GRID_THRESHOLD + 500, 5).unwrap();
        let bins = make_log_bins(0.05, 1.5, 4).unwrap();
        let g = build_pair_graph(&c, &bins, Execution::Parallel).unwrap();
        let pts: Vec<(f64, f64)> = c.points().iter().map(|p| (p.x, p.y)).collect();
        let mut want = vec![0usize; 4];
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
                if let Some(b) = bins.bin_of(d) {
                    want[b] += 1;
                }
            }
        }
        assert_eq!(g.edge_counts(), want);
    }

    #[test]
    fn omega_identities() {
        let pc = PairCounts::new(&[4.0, 0.0], 2.0, &[1, 0], 1).err();
        assert!(pc.is_some());
        // dd = rr exactly
        let pc = PairCounts::new(&[9.0, 3.0], 3.0, &[4, 0], 2).unwrap();
        assert_eq!(pc.dd, vec![1.0, 1.0 / 3.0]);
        assert_eq!(pc.rr, vec![1.0, 0.0]);
        assert_eq!(pc.omega, vec![Some(0.0), None]);
    }

    #[test]
    fn edge_lists_reject_duplicates() {
        assert!(BinnedPairGraph::from_edge_lists(3, vec![vec![(0, 1)], vec![(1, 0)]]).is_err());
        assert!(BinnedPairGraph::from_edge_lists(3, vec![vec![(0, 3)]]).is_err());
        assert!(BinnedPairGraph::from_edge_lists(3, vec![vec![(1, 1)]]).is_err());
        let g = BinnedPairGraph::from_edge_lists(3, vec![vec![(2, 0), (1, 0)]]).unwrap();
        assert_eq!(g.bin(0).edges(), &[(0, 1), (0, 2)]);
    }
}
