//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use activecorr::binning::BinnedPairGraph;
use activecorr::estimators::{is_estimate, EdgeScoreModel, SubsetState};
use activecorr::variance::{is_variance_delta_unclamped, PairMoments, TripletMoments};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small single-bin problem with explicit adjacency, labels and scores.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub n: usize,
    /// `adj[u][v]`: the pair is a candidate edge of bin 0.
    pub adj: Vec<Vec<bool>>,
    pub labels: Vec<bool>,
    pub probs: Vec<f64>,
    pub graph: BinnedPairGraph,
    pub model: EdgeScoreModel,
}

impl Fixture {
    /// Random fixture. Each pair is an edge with probability `density`.
    /// At least one edge joins two targets.
    pub fn random(n: usize, density: f64, seed: u64) -> Fixture {
        Fixture::random_with(n, density, (0.05, 0.95), 0.6, seed)
    }

    /// Probabilities uniform on `probs`, each vertex a target with
    /// probability `target_rate`.
    pub fn random_with(n: usize, density: f64, probs: (f64, f64), target_rate: f64, seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(target_rate)).collect();
            let probs: Vec<f64> = (0..n).map(|_| rng.random_range(probs.0..probs.1)).collect();
            let mut adj = vec![vec![false; n]; n];
            for u in 0..n {
                for v in u + 1..n {
                    let e = rng.random_bool(density);
                    adj[u][v] = e;
                    adj[v][u] = e;
                }
            }
            let fx = Fixture::from_parts(adj, labels, probs);
            if fx.f_total() > 0 {
                return fx;
            }
        }
    }

    pub fn from_parts(adj: Vec<Vec<bool>>, labels: Vec<bool>, probs: Vec<f64>) -> Fixture {
        let n = labels.len();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if adj[u][v] {
                    edges.push((u as u32, v as u32));
                }
            }
        }
        let graph = BinnedPairGraph::from_edge_lists(n, vec![edges]).unwrap();
        let model = EdgeScoreModel::product(&graph, probs.clone()).unwrap();
        Fixture {
            n,
            adj,
            labels,
            probs,
            graph,
            model,
        }
    }

    pub fn f(&self, u: usize, v: usize) -> f64 {
        if u != v && self.adj[u][v] && self.labels[u] && self.labels[v] {
            1.0
        } else {
            0.0
        }
    }

    pub fn g(&self, u: usize, v: usize) -> f64 {
        if u != v && self.adj[u][v] {
            self.probs[u] * self.probs[v]
        } else {
            0.0
        }
    }

    pub fn f_total(&self) -> u64 {
        let mut t = 0;
        for u in 0..self.n {
            for v in u + 1..self.n {
                t += self.f(u, v) as u64;
            }
        }
        t
    }

    pub fn f_subset(&self, s: &[u32]) -> f64 {
        pair_sum(s, |u, v| self.f(u, v))
    }

    pub fn g_subset(&self, s: &[u32]) -> f64 {
        pair_sum(s, |u, v| self.g(u, v))
    }

    /// Proposal law over all `k`-subsets: `g(S) / sum g`, by enumeration.
    pub fn proposal(&self, k: usize) -> Vec<(Vec<u32>, f64)> {
        let subsets = subsets(self.n, k);
        let weights: Vec<f64> = subsets.iter().map(|s| self.g_subset(s)).collect();
        let z: f64 = weights.iter().sum();
        subsets.into_iter().zip(weights).map(|(s, w)| (s, w / z)).collect()
    }

    /// Exact `(E_ident, E_share, E_disj)` by looping over configurations.
    pub fn exact_moments(&self) -> (f64, f64, f64) {
        let n = self.n;
        let mut ident = 0.0;
        for u in 0..n {
            for v in u + 1..n {
                ident += self.f(u, v) * self.f(u, v);
            }
        }
        let mut share = 0.0;
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    if u != v && v != w && u != w {
                        share += self.f(u, v) * self.f(v, w);
                    }
                }
            }
        }
        let pairs = all_pairs(n);
        let mut disj = 0.0;
        let mut disj_count = 0.0;
        for &(a, b) in &pairs {
            for &(c, d) in &pairs {
                if a != c && a != d && b != c && b != d {
                    disj += self.f(a, b) * self.f(c, d);
                    disj_count += 1.0;
                }
            }
        }
        let nf = n as f64;
        (
            ident / (nf * (nf - 1.0) / 2.0),
            share / (nf * (nf - 1.0) * (nf - 2.0)),
            disj / disj_count,
        )
    }

    /// Exact `D_2..D_6` by bucketing every ordered triplet of pairs.
    pub fn exact_triplets(&self) -> [f64; 5] {
        let pairs = all_pairs(self.n);
        let mut sum = [0.0; 7];
        let mut count = [0u64; 7];
        for &(a, b) in &pairs {
            for &(c, d) in &pairs {
                let ff = self.f(a, b) * self.f(c, d);
                for &(x, y) in &pairs {
                    let t = union_size(&[a, b, c, d, x, y]);
                    count[t] += 1;
                    sum[t] += ff * self.g(x, y);
                }
            }
        }
        let mut out = [0.0; 5];
        for t in 2..=6 {
            out[t - 2] = if count[t] > 0 { sum[t] / count[t] as f64 } else { 0.0 };
        }
        out
    }
}

pub fn pair_sum(s: &[u32], h: impl Fn(usize, usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for (i, &u) in s.iter().enumerate() {
        for &v in &s[i + 1..] {
            acc += h(u as usize, v as usize);
        }
    }
    acc
}

pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
}

pub fn union_size(vs: &[usize]) -> usize {
    let mut seen: Vec<usize> = vs.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// All `k`-subsets of `0..n` in increasing bitmask order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<u32>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n as u32).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(1e-300)
    }
}

/// `|a - b| <= tol * max(|a|, |b|)`, with values below `1e-12` in both
/// treated as zero.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale < 1e-12 || (a - b).abs() <= tol * scale
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn state(fx: &Fixture, s: &[u32]) -> SubsetState {
    SubsetState::from_members(0, s, &fx.labels, &fx.graph, &fx.model).unwrap()
}

/// Exact pair and triplet moments by enumeration.
pub fn exact(fx: &Fixture) -> (PairMoments, TripletMoments) {
    let (a, b, c) = fx.exact_moments();
    (
        PairMoments {
            e_ident: a,
            e_share: b,
            e_disj: c,
        },
        TripletMoments { d: fx.exact_triplets() },
    )
}

/// Relative gap between the delta variance (exact moments) and the exact
/// proposal variance, for each `k` in `4..n`.
pub fn delta_gaps(fx: &Fixture) -> Vec<(usize, f64)> {
    let (e, d) = exact(fx);
    let truth = fx.f_total() as f64;
    let total = fx.model.total(0);
    (4..fx.n)
        .map(|k| {
            let var: f64 = fx
                .proposal(k)
                .iter()
                .filter(|(_, q)| *q > 0.0)
                .map(|(s, q)| q * (is_estimate(&state(fx, s), total).unwrap() - truth).powi(2))
                .sum();
            let delta = is_variance_delta_unclamped(&e, &d, &fx.model, 0, k).unwrap();
            (k, rel_err(delta, var))
        })
        .collect()
}
