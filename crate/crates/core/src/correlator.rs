//! Sparse cross-correlation of a tile's recent activity against the blink
//! model.
//!
//! Only the activity values recorded at event times take part:
//!
//! ```text
//! C_p = Σ_i Â_p(t_i) · B_p(t_i - t_now + T)
//! C   = α · C_on + (1 - α) · C_off
//! ```
//!
//! where the window `[t_now - T, t_now]` is aligned so that its start maps
//! onto the first model sample. In normalized mode each `C_p` is divided by
//! `√(Σ Â²) · √(E_p · n_p / L)`, with `E_p` the model energy, `n_p` the
//! number of ring events of polarity `p` and `L` the lattice length, and
//! clamped to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::activity::{GridId, TileActivity, TileRef};
use crate::error::{Error, Result};
use crate::event_io::Polarity;
use crate::model::BlinkModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorConfig {
    pub threshold: f64,
    pub gate_beta: f64,
    pub refractory_us: u64,
    /// Overrides the model's ON/OFF weight when set.
    pub alpha: Option<f64>,
    pub raw_score: bool,
}

impl Default for CorrelatorConfig {
    fn default() -> Self {
        CorrelatorConfig {
            threshold: 0.75,
            gate_beta: 0.5,
            refractory_us: 200_000,
            alpha: None,
            raw_score: false,
        }
    }
}

impl CorrelatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && (self.raw_score || self.threshold <= 1.0)) {
            return Err(Error::Config("corr.threshold must lie in (0, 1]".into()));
        }
        if !(self.gate_beta > 0.0) {
            return Err(Error::Config("corr.gate_beta must be > 0".into()));
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config("corr.alpha must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlinkCandidate {
    pub grid: GridId,
    pub r: u16,
    pub c: u16,
    /// Pixel centre of the tile.
    pub x: f64,
    pub y: f64,
    pub t: u64,
    pub score: f64,
}

impl BlinkCandidate {
    pub fn tile(&self) -> TileRef {
        TileRef {
            grid: self.grid,
            r: self.r,
            c: self.c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    NotGated,
    Value(f64),
}

/// Unnormalized per-polarity correlation terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarityTerms {
    /// `Σ Â·B`
    pub dot: f64,
    /// `Σ Â²`
    pub activity_sq: f64,
    pub count: usize,
}

/// Sparse correlation sums for both polarities, indexed by `Polarity::index`.
pub fn sparse_terms(tile: &TileActivity, model: &BlinkModel, t_now: u64) -> [PolarityTerms; 2] {
    let mut terms = [PolarityTerms::default(); 2];
    let base = model.duration_us() as i64 - t_now as i64;
    for e in tile.ring() {
        let lag = e.t as i64 + base;
        // entries that slid out of the window since the last prune
        if lag < 0 {
            continue;
        }
        let k = e.p.index();
        let b = model.evaluate(lag, e.p);
        terms[k].dot += e.activity * b;
        terms[k].activity_sq += e.activity * e.activity;
        terms[k].count += 1;
    }
    terms
}

fn weight(alpha: f64, p: Polarity) -> f64 {
    match p {
        Polarity::On => alpha,
        Polarity::Off => 1.0 - alpha,
    }
}

/// Combine per-polarity terms into a score.
pub fn combine(
    terms: &[PolarityTerms; 2],
    model: &BlinkModel,
    alpha: f64,
    raw: bool,
) -> Result<f64> {
    let mut total = 0.0;
    for p in Polarity::BOTH {
        let w = weight(alpha, p);
        let term = &terms[p.index()];
        if w == 0.0 || term.count == 0 {
            continue;
        }
        let energy = model.energy(p);
        if energy <= 0.0 {
            return Err(Error::Model(format!(
                "model has zero {p:?} energy but the tile has {p:?} events"
            )));
        }
        let c = if raw {
            term.dot
        } else {
            let expected = (energy * term.count as f64 / model.len() as f64).sqrt();
            let norm = term.activity_sq.sqrt() * expected;
            if norm > 0.0 {
                (term.dot / norm).clamp(0.0, 1.0)
            } else {
                0.0
            }
        };
        total += w * c;
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct Correlator {
    cfg: CorrelatorConfig,
    last_emit: Vec<Option<u64>>,
    score_calls: u64,
    gate_rejections: u64,
}

impl Correlator {
    pub fn new(cfg: CorrelatorConfig, tiles: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Correlator {
            cfg,
            last_emit: vec![None; tiles],
            score_calls: 0,
            gate_rejections: 0,
        })
    }

    pub fn config(&self) -> &CorrelatorConfig {
        &self.cfg
    }

    pub fn alpha(&self, model: &BlinkModel) -> f64 {
        self.cfg.alpha.unwrap_or(model.alpha())
    }

    /// Number of times a correlation was actually computed.
    pub fn score_calls(&self) -> u64 {
        self.score_calls
    }

    pub fn gate_rejections(&self) -> u64 {
        self.gate_rejections
    }

    pub fn score_tile(
        &mut self,
        tile: &TileActivity,
        model: &BlinkModel,
        t_now: u64,
        scale: f64,
    ) -> Result<Score> {
        if (tile.ring_len() as f64) < self.cfg.gate_beta * model.typical_count(scale) {
            self.gate_rejections += 1;
            return Ok(Score::NotGated);
        }
        self.score_calls += 1;
        let terms = sparse_terms(tile, model, t_now);
        combine(&terms, model, self.alpha(model), self.cfg.raw_score).map(Score::Value)
    }

    /// Score the tile after an event at `t` and emit a candidate if the
    /// score clears the threshold. A tile stays silent for the refractory
    /// period after emitting.
    #[allow(clippy::too_many_arguments)]
    pub fn maybe_emit_candidate(
        &mut self,
        tile_ref: TileRef,
        flat_index: usize,
        center: (f64, f64),
        tile: &TileActivity,
        model: &BlinkModel,
        t: u64,
        scale: f64,
    ) -> Result<Option<BlinkCandidate>> {
        if let Some(last) = self.last_emit[flat_index] {
            if t.saturating_sub(last) < self.cfg.refractory_us {
                return Ok(None);
            }
        }
        match self.score_tile(tile, model, t, scale)? {
            Score::NotGated => Ok(None),
            Score::Value(score) if score >= self.cfg.threshold => {
                self.last_emit[flat_index] = Some(t);
                Ok(Some(BlinkCandidate {
                    grid: tile_ref.grid,
                    r: tile_ref.r,
                    c: tile_ref.c,
                    x: center.0,
                    y: center.1,
                    t,
                    score,
                }))
            }
            Score::Value(_) => Ok(None),
        }
    }
}
