//! Source catalogs: loading, validation, simulated classifier output and
//! uniform random catalogs.
//!
//! The on-disk format is a UTF-8 CSV with header `id,x,y,label,prob`. The
//! `label` column may be empty (unlabeled deployment data). An optional
//! leading comment line `# bounds: x_min,x_max,y_min,y_max` overrides the
//! field rectangle, which otherwise defaults to the tight bounding box.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::{Error, Result, VertexId};

/// Classifier probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` so every
/// candidate edge keeps a strictly positive score.
pub const PROB_EPS: f64 = 1e-4;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Axis-aligned field rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = Bounds {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        if !(b.width() > 0.0 && b.height() > 0.0) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("degenerate bounds {b:?}")));
        }
        Ok(b)
    }

    pub fn unit() -> Self {
        Bounds {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Parse `x_min,x_max,y_min,y_max`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("bounds `{s}`: {e}")))?;
        match parts.as_slice() {
            &[a, b, c, d] => Bounds::new(a, b, c, d),
            _ => Err(Error::invalid(format!(
                "bounds `{s}`: expected x_min,x_max,y_min,y_max"
            ))),
        }
    }

    fn tight(points: &[SourcePoint]) -> Option<Self> {
        let first = points.first()?;
        let mut b = Bounds {
            x_min: first.x,
            x_max: first.x,
            y_min: first.y,
            y_max: first.y,
        };
        for p in &points[1..] {
            b.x_min = b.x_min.min(p.x);
            b.x_max = b.x_max.max(p.x);
            b.y_min = b.y_min.min(p.y);
            b.y_max = b.y_max.max(p.y);
        }
        Some(b)
    }
}

impl std::fmt::Display for Bounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x_min, self.x_max, self.y_min, self.y_max)
    }
}

/// One detected source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePoint {
    pub id: VertexId,
    pub x: f64,
    pub y: f64,
    /// `Some(true)` for a target, `Some(false)` for background.
    pub label: Option<bool>,
    /// Classifier probability that the source is a target.
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    points: Vec<SourcePoint>,
    bounds: Bounds,
}

impl Catalog {
    /// Build a catalog, checking dense ids, probability range and that every
    /// point lies inside `bounds` (tight bounding box when `None`).
    pub fn new(mut points: Vec<SourcePoint>, bounds: Option<Bounds>) -> Result<Self> {
        points.sort_by_key(|p| p.id);
        for (i, p) in points.iter().enumerate() {
            if p.id as usize != i {
                return Err(Error::Schema(format!(
                    "ids must be exactly 0..{} without gaps or duplicates (found id {} at position {i})",
                    points.len(),
                    p.id
                )));
            }
            if !(0.0..=1.0).contains(&p.prob) {
                return Err(Error::invalid(format!("point {}: prob {} outside [0,1]", p.id, p.prob)));
            }
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::invalid(format!("point {}: non-finite coordinate", p.id)));
            }
        }
        let bounds = match bounds {
            Some(b) => {
                if let Some(p) = points.iter().find(|p| !b.contains(p.x, p.y)) {
                    return Err(Error::invalid(format!(
                        "point {} at ({}, {}) lies outside bounds {b}",
                        p.id, p.x, p.y
                    )));
                }
                b
            }
            None => Bounds::tight(&points)
                .ok_or_else(|| Error::invalid("catalog has no points"))?,
        };
        Ok(Catalog { points, bounds })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SourcePoint] {
        &self.points
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn probs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.prob).collect()
    }

    pub fn has_all_labels(&self) -> bool {
        self.points.iter().all(|p| p.label.is_some())
    }

    /// Full label vector, or the first unlabeled vertex as an error.
    pub fn labels(&self) -> Result<Vec<bool>> {
        self.points
            .iter()
            .map(|p| p.label.ok_or(Error::MissingLabel(p.id)))
            .collect()
    }

    pub fn target_count(&self) -> usize {
        self.points.iter().filter(|p| p.label == Some(true)).count()
    }

    /// The labeled targets as their own catalog, renumbered in id order.
    /// Bounds are kept.
    pub fn targets(&self) -> Result<Catalog> {
        let points = self
            .points
            .iter()
            .filter(|p| p.label == Some(true))
            .enumerate()
            .map(|(i, p)| SourcePoint {
                id: i as VertexId,
                ..p.clone()
            })
            .collect::<Vec<_>>();
        if points.is_empty() {
            return Err(Error::invalid("catalog has no labeled targets"));
        }
        Catalog::new(points, Some(self.bounds))
    }

    /// Copy of the catalog with probabilities replaced (and clamped).
    pub fn with_probs(&self, probs: &[f64]) -> Result<Catalog> {
        if probs.len() != self.len() {
            return Err(Error::invalid(format!(
                "expected {} probabilities, got {}",
                self.len(),
                probs.len()
            )));
        }
        let mut out = self.clone();
        for (p, &q) in out.points.iter_mut().zip(probs) {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::invalid(format!("prob {q} outside [0,1]")));
            }
            p.prob = clamp_prob(q);
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    x: String,
    y: String,
    label: Option<String>,
    prob: String,
}

fn parse_field<T: std::str::FromStr>(raw: &str, name: &str, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse::<T>().map_err(|e| Error::Value {
        line,
        message: format!("{name} `{raw}`: {e}"),
    })
}

/// Parse catalog CSV text. `origin` names the source in parse errors.
pub fn parse_catalog(text: &str, origin: &Path, require_labels: bool) -> Result<Catalog> {
    let mut bounds = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(rest) = line.trim_start_matches('#').trim().strip_prefix("bounds:") {
            bounds = Some(Bounds::parse(rest)?);
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    for col in ["id", "x", "y", "prob"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Schema(format!("missing column `{col}`")));
        }
    }
    let has_label = headers.iter().any(|h| h == "label");
    if require_labels && !has_label {
        return Err(Error::Schema("missing column `label`".into()));
    }

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                path: origin.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CsvRow = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let id: VertexId = parse_field(&row.id, "id", line)?;
        let x: f64 = parse_field(&row.x, "x", line)?;
        let y: f64 = parse_field(&row.y, "y", line)?;
        let prob: f64 = parse_field(&row.prob, "prob", line)?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::Value {
                line,
                message: format!("prob {prob} outside [0,1]"),
            });
        }
        let label = match row.label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some(other) => {
                return Err(Error::Value {
                    line,
                    message: format!("label `{other}` is not 0, 1 or empty"),
                })
            }
        };
        if require_labels && label.is_none() {
            return Err(Error::Value {
                line,
                message: "label required but empty".into(),
            });
        }
        points.push(SourcePoint {
            id,
            x,
            y,
            label,
            prob: clamp_prob(prob),
        });
    }
    Catalog::new(points, bounds)
}

pub fn load_catalog(path: impl AsRef<Path>, require_labels: bool) -> Result<Catalog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_catalog(&text, path, require_labels)
}

pub fn write_catalog<W: Write>(catalog: &Catalog, mut out: W) -> Result<()> {
    writeln!(out, "# bounds: {}", catalog.bounds)?;
    writeln!(out, "id,x,y,label,prob")?;
    for p in &catalog.points {
        let label = match p.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        writeln!(out, "{},{},{},{},{}", p.id, p.x, p.y, label, p.prob)?;
    }
    Ok(())
}

pub fn save_catalog(catalog: &Catalog, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_catalog(catalog, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Beta-distribution shapes for simulated classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSimConfig {
    pub alpha_pos: f64,
    pub beta_pos: f64,
    pub alpha_neg: f64,
    pub beta_neg: f64,
    pub seed: u64,
}

impl ClassifierSimConfig {
    /// Beta(3,1) for targets and Beta(1,3) for background: about 87.5%
    /// accuracy at a 0.5 threshold.
    pub fn standard(seed: u64) -> Self {
        ClassifierSimConfig {
            alpha_pos: 3.0,
            beta_pos: 1.0,
            alpha_neg: 1.0,
            beta_neg: 3.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let shapes = [self.alpha_pos, self.beta_pos, self.alpha_neg, self.beta_neg];
        if shapes.iter().all(|&s| s > 0.0 && s.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid(format!("beta shape parameters must be positive: {shapes:?}")))
        }
    }
}

/// Replace every probability with an independent Beta draw conditioned on the
/// true label. Deterministic in `cfg.seed`.
pub fn simulate_classifier(catalog: &Catalog, cfg: &ClassifierSimConfig) -> Result<Catalog> {
    cfg.validate()?;
    let labels = catalog.labels()?;
    let pos = Beta::new(cfg.alpha_pos, cfg.beta_pos).map_err(|e| Error::invalid(e.to_string()))?;
    let neg = Beta::new(cfg.alpha_neg, cfg.beta_neg).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = rng_from_seed(cfg.seed);
    let probs: Vec<f64> = labels
        .iter()
        .map(|&is_target| {
            if is_target {
                pos.sample(&mut rng)
            } else {
                neg.sample(&mut rng)
            }
        })
        .collect();
    catalog.with_probs(&probs)
}

/// `n_r` points uniform on `bounds`, all labeled target with probability 1.
pub fn generate_random_catalog(bounds: Bounds, n_r: usize, seed: u64) -> Result<Catalog> {
    if n_r < 2 {
        return Err(Error::invalid(format!("random catalog needs at least 2 points, got {n_r}")));
    }
    let bounds = Bounds::new(bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max)?;
    let mut rng = rng_from_seed(seed);
    let points = (0..n_r)
        .map(|i| SourcePoint {
            id: i as VertexId,
            x: rng.random_range(bounds.x_min..bounds.x_max),
            y: rng.random_range(bounds.y_min..bounds.y_max),
            label: Some(true),
            prob: 1.0,
        })
        .collect();
    Catalog::new(points, Some(bounds))
}
