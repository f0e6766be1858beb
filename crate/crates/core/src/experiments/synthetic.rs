//! Synthetic catalogs for experiments and tests.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::binning::{make_log_bins, BinConfig};
use crate::catalog::{simulate_classifier, Bounds, Catalog, ClassifierSimConfig, SourcePoint};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::{Error, Result, VertexId};

/// Targets in Gaussian blobs over a uniform background on the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredConfig {
    pub n: usize,
    pub n_targets: usize,
    pub blobs: usize,
    pub blob_sigma: f64,
    /// No two points are closer than this, except the planted close pairs.
    pub min_separation: f64,
    /// Number of planted pairs at half `min_separation`.
    pub close_pairs: usize,
    /// How many planted pairs join two targets. The rest alternate between
    /// target-background and background-background.
    pub close_target_pairs: usize,
    pub seed: u64,
}

impl ClusteredConfig {
    /// 659 sources with 260 targets, shaped after a nearby dwarf galaxy
    /// field. With [`galaxy_bins`] every pair except 13 planted close pairs
    /// is binned, giving 216,798 candidate and 33,664 true edges.
    pub fn galaxy(seed: u64) -> Self {
        ClusteredConfig {
            n: 659,
            n_targets: 260,
            blobs: 6,
            blob_sigma: 0.07,
            min_separation: GALAXY_THETA_MIN,
            close_pairs: 13,
            close_target_pairs: 6,
            seed,
        }
    }
}

const GALAXY_THETA_MIN: f64 = 0.003;

/// 13 log bins from the minimum separation to beyond the field diagonal.
pub fn galaxy_bins() -> BinConfig {
    make_log_bins(GALAXY_THETA_MIN, 1.5, 13).expect("valid bin range")
}

fn sample_in_unit(rng: &mut Rng, target: bool, centers: &[(f64, f64)], spread: &Normal<f64>) -> (f64, f64) {
    if !target {
        return (rng.random::<f64>(), rng.random::<f64>());
    }
    loop {
        let (cx, cy) = centers[rng.random_range(0..centers.len())];
        let x = cx + spread.sample(rng);
        let y = cy + spread.sample(rng);
        if (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) {
            return (x, y);
        }
    }
}

fn far_from_all(points: &[(f64, f64, bool)], x: f64, y: f64, min_sq: f64) -> bool {
    points.iter().all(|&(px, py, _)| (px - x).powi(2) + (py - y).powi(2) >= min_sq)
}

const MAX_TRIES: usize = 100_000;

/// Generate a labeled clustered catalog. Probabilities come from the
/// standard Beta classifier simulation.
pub fn clustered_catalog(cfg: &ClusteredConfig) -> Result<Catalog> {
    if cfg.n_targets > cfg.n || cfg.n < 2 {
        return Err(Error::invalid("need 2 <= n and n_targets <= n"));
    }
    if cfg.blobs == 0 || !(cfg.blob_sigma > 0.0) || !(cfg.min_separation >= 0.0) {
        return Err(Error::invalid("blobs and blob_sigma must be positive"));
    }
    let planted_targets = 2 * cfg.close_target_pairs + (cfg.close_pairs - cfg.close_target_pairs).div_ceil(2);
    if cfg.close_target_pairs > cfg.close_pairs
        || 2 * cfg.close_pairs > cfg.n
        || planted_targets > cfg.n_targets
        || 2 * cfg.close_pairs - planted_targets > cfg.n - cfg.n_targets
    {
        return Err(Error::invalid("too many planted close pairs for the catalog size"));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let centers: Vec<(f64, f64)> = (0..cfg.blobs)
        .map(|_| (rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)))
        .collect();
    let spread = Normal::new(0.0, cfg.blob_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let min_sq = cfg.min_separation * cfg.min_separation;
    let close = cfg.min_separation / 2.0;

    let mut points: Vec<(f64, f64, bool)> = Vec::with_capacity(cfg.n);
    for i in 0..cfg.close_pairs {
        let labels = if i < cfg.close_target_pairs {
            (true, true)
        } else if (i - cfg.close_target_pairs) % 2 == 0 {
            (true, false)
        } else {
            (false, false)
        };
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let (x, y) = sample_in_unit(&mut rng, labels.0, &centers, &spread);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let (x2, y2) = (x + close * angle.cos(), y + close * angle.sin());
            if !(0.0..1.0).contains(&x2) || !(0.0..1.0).contains(&y2) {
                continue;
            }
            // both ends keep the full separation from everything else
            if far_from_all(&points, x, y, min_sq) && far_from_all(&points, x2, y2, min_sq) {
                points.push((x, y, labels.0));
                points.push((x2, y2, labels.1));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::invalid("could not place close pairs; field too crowded"));
        }
    }
    let have_targets = points.iter().filter(|p| p.2).count();
    let mut remaining: Vec<bool> = std::iter::repeat_n(true, cfg.n_targets - have_targets)
        .chain(std::iter::repeat_n(false, cfg.n - cfg.n_targets - (points.len() - have_targets)))
        .collect();
    remaining.shuffle(&mut rng);
    for target in remaining {
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let (x, y) = sample_in_unit(&mut rng, target, &centers, &spread);
            if far_from_all(&points, x, y, min_sq) {
                points.push((x, y, target));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::invalid("could not place point; minimum separation too large"));
        }
    }
    points.shuffle(&mut rng);
    let sources = points
        .into_iter()
        .enumerate()
        .map(|(i, (x, y, label))| SourcePoint {
            id: i as VertexId,
            x,
            y,
            label: Some(label),
            prob: 0.5,
        })
        .collect();
    let catalog = Catalog::new(sources, Some(Bounds::unit()))?;
    simulate_classifier(&catalog, &ClassifierSimConfig::standard(derive_seed(cfg.seed, &[1])))
}

/// `n` uniform points on `bounds`, each a target with probability
/// `target_fraction`, with simulated classifier probabilities.
pub fn uniform_catalog(n: usize, target_fraction: f64, bounds: Bounds, seed: u64) -> Result<Catalog> {
    if !(0.0..=1.0).contains(&target_fraction) {
        return Err(Error::invalid(format!("target fraction {target_fraction} outside [0, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let sources = (0..n)
        .map(|i| SourcePoint {
            id: i as VertexId,
            x: rng.random_range(bounds.x_min..bounds.x_max),
            y: rng.random_range(bounds.y_min..bounds.y_max),
            label: Some(rng.random_bool(target_fraction)),
            prob: 0.5,
        })
        .collect();
    let catalog = Catalog::new(sources, Some(bounds))?;
    simulate_classifier(&catalog, &ClassifierSimConfig::standard(derive_seed(seed, &[1])))
}
