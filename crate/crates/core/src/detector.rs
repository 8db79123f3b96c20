//! Pairs blink candidates into two-eye blink detections.
//!
//! A new candidate is matched against buffered candidates no older than
//! `dt_max`. Distances are measured between tile pixel centres so that
//! candidates from different grids compare directly. A pair is accepted when
//!
//! * `t_new - t_old < dt_max`,
//! * `|y_new - y_old| < dv_max · s` and `|x_new - x_old| < dh_max · s`,
//! * `|x_new - x_old| > min_sep_tiles · tile_w` (one eye lighting up two
//!   neighbouring tiles is not a pair), and
//! * the two candidates come from different tiles,
//!
//! where `s` is the scale of the face whose region contains the pair's
//! midpoint, or 1 if there is none.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::correlator::BlinkCandidate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub dt_max_us: u64,
    pub dh_max_px: f64,
    pub dv_max_px: f64,
    pub min_sep_tiles: f64,
    /// Face circles are enlarged by this factor when deciding whether a
    /// pair belongs to an existing face.
    pub face_margin: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            dt_max_us: 50_000,
            dh_max_px: 60.0,
            dv_max_px: 20.0,
            min_sep_tiles: 1.0,
            face_margin: 1.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt_max_us == 0 || !(self.dh_max_px > 0.0) || !(self.dv_max_px > 0.0) {
            return Err(Error::Config(
                "detect.dt_max_us, detect.dh_max_px and detect.dv_max_px must be > 0".into(),
            ));
        }
        if !(self.min_sep_tiles >= 0.0) || !(self.face_margin > 0.0) {
            return Err(Error::Config(
                "detect.min_sep_tiles must be >= 0 and detect.face_margin > 0".into(),
            ));
        }
        Ok(())
    }
}

/// What the detector needs to know about an existing face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceRegion {
    pub id: u64,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlinkDetection {
    pub left: (f64, f64),
    pub right: (f64, f64),
    pub t: u64,
    /// Scale used for the spatial constraints.
    pub scale: f64,
    pub face_id: Option<u64>,
    /// The consumed pair, older candidate first.
    pub pair: [BlinkCandidate; 2],
}

impl BlinkDetection {
    pub fn midpoint(&self) -> (f64, f64) {
        (
            (self.left.0 + self.right.0) / 2.0,
            (self.left.1 + self.right.1) / 2.0,
        )
    }
}

/// Face whose enlarged circle contains `(x, y)`; nearest centre wins.
pub fn face_at(faces: &[FaceRegion], x: f64, y: f64, margin: f64) -> Option<&FaceRegion> {
    faces
        .iter()
        .filter(|f| (x - f.cx).hypot(y - f.cy) <= f.radius * margin)
        .min_by(|a, b| {
            let da = (x - a.cx).hypot(y - a.cy);
            let db = (x - b.cx).hypot(y - b.cy);
            da.total_cmp(&db).then(a.id.cmp(&b.id))
        })
}

/// Check one pair against the constraints. Returns the scale and matched
/// face on success.
pub fn pair_constraints(
    newer: &BlinkCandidate,
    older: &BlinkCandidate,
    faces: &[FaceRegion],
    cfg: &DetectorConfig,
    tile_w: f64,
) -> Option<(f64, Option<u64>)> {
    if newer.t < older.t || newer.t - older.t >= cfg.dt_max_us {
        return None;
    }
    if newer.tile() == older.tile() {
        return None;
    }
    let dx = (newer.x - older.x).abs();
    let dy = (newer.y - older.y).abs();
    if dx <= cfg.min_sep_tiles * tile_w {
        return None;
    }
    let mid = ((newer.x + older.x) / 2.0, (newer.y + older.y) / 2.0);
    let face = face_at(faces, mid.0, mid.1, cfg.face_margin);
    let scale = face.map_or(1.0, |f| f.scale);
    (dy < cfg.dv_max_px * scale && dx < cfg.dh_max_px * scale).then(|| (scale, face.map(|f| f.id)))
}

pub fn make_detection(
    newer: &BlinkCandidate,
    older: &BlinkCandidate,
    scale: f64,
    face_id: Option<u64>,
) -> BlinkDetection {
    let (a, b) = ((older.x, older.y), (newer.x, newer.y));
    let (left, right) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    BlinkDetection {
        left,
        right,
        t: newer.t,
        scale,
        face_id,
        pair: [*older, *newer],
    }
}

/// Partner preference: higher score, then earlier time, then earlier arrival.
pub fn better_partner(a: &BlinkCandidate, b: &BlinkCandidate) -> bool {
    a.score > b.score || (a.score == b.score && a.t < b.t)
}

#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    tile_w: f64,
    buffer: VecDeque<BlinkCandidate>,
}

impl Detector {
    pub fn new(cfg: DetectorConfig, tile_w: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Detector {
            cfg,
            tile_w,
            buffer: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn push_candidate(
        &mut self,
        eb: BlinkCandidate,
        faces: &[FaceRegion],
    ) -> Option<BlinkDetection> {
        while self
            .buffer
            .front()
            .is_some_and(|old| eb.t.saturating_sub(old.t) >= self.cfg.dt_max_us)
        {
            self.buffer.pop_front();
        }
        let mut best: Option<(usize, f64, Option<u64>)> = None;
        for (i, old) in self.buffer.iter().enumerate() {
            if let Some((scale, face)) = pair_constraints(&eb, old, faces, &self.cfg, self.tile_w) {
                let take = match best {
                    None => true,
                    Some((j, _, _)) => better_partner(old, &self.buffer[j]),
                };
                if take {
                    best = Some((i, scale, face));
                }
            }
        }
        match best {
            Some((i, scale, face)) => {
                let partner = self.buffer.remove(i).expect("index from enumeration");
                Some(make_detection(&eb, &partner, scale, face))
            }
            None => {
                self.buffer.push_back(eb);
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::GridId;

    fn cand(c: u16, x: f64, y: f64, t: u64, score: f64) -> BlinkCandidate {
        BlinkCandidate {
            grid: GridId::G0,
            r: (y / 15.0) as u16,
            c,
            x,
            y,
            t,
            score,
        }
    }

    fn det() -> Detector {
        Detector::new(DetectorConfig::default(), 19.0).unwrap()
    }

    #[test]
    fn pair_within_bounds_is_detected_at_scale_one() {
        let mut d = det();
        assert!(d.push_candidate(cand(3, 60.0, 100.0, 1_000_000, 0.9), &[]).is_none());
        let hit = d
            .push_candidate(cand(5, 100.0, 105.0, 1_030_000, 0.8), &[])
            .unwrap();
        assert_eq!(hit.scale, 1.0);
        assert_eq!(hit.face_id, None);
        assert_eq!(hit.left, (60.0, 100.0));
        assert_eq!(hit.right, (100.0, 105.0));
        assert_eq!(hit.t, 1_030_000);
        assert_eq!(d.buffered(), 0);
    }

    #[test]
    fn too_far_apart_in_time() {
        let mut d = det();
        d.push_candidate(cand(3, 60.0, 100.0, 1_000_000, 0.9), &[]);
        assert!(d.push_candidate(cand(5, 100.0, 105.0, 1_070_000, 0.9), &[]).is_none());
        // the stale candidate was pruned
        assert_eq!(d.buffered(), 1);
    }

    #[test]
    fn spatial_limits_and_min_separation() {
        let pairs = |x: f64, y: f64| {
            let mut d = det();
            d.push_candidate(cand(3, 60.0, 100.0, 0, 0.9), &[]);
            d.push_candidate(cand(9, x, y, 1, 0.9), &[]).is_some()
        };
        assert!(!pairs(130.0, 100.0));
        assert!(!pairs(100.0, 125.0));
        // one tile width apart: same eye seen by neighbouring tiles
        assert!(!pairs(79.0, 100.0));
        assert!(pairs(98.5, 100.0));
        assert!(pairs(119.0, 80.5));
    }

    #[test]
    fn same_tile_never_pairs() {
        let mut d = det();
        d.push_candidate(cand(3, 60.0, 100.0, 0, 0.9), &[]);
        let mut twin = cand(3, 60.0, 100.0, 10, 0.9);
        twin.x = 100.0;
        assert!(d.push_candidate(twin, &[]).is_none());
    }

    #[test]
    fn face_scale_widens_limits() {
        let face = FaceRegion {
            id: 7,
            cx: 100.0,
            cy: 130.0,
            radius: 100.0,
            scale: 2.0,
        };
        let mut d = det();
        d.push_candidate(cand(2, 50.0, 100.0, 0, 0.9), &[face]);
        let hit = d.push_candidate(cand(8, 150.0, 110.0, 1, 0.9), &[face]).unwrap();
        assert_eq!(hit.scale, 2.0);
        assert_eq!(hit.face_id, Some(7));
    }

    #[test]
    fn best_partner_by_score_then_time() {
        let mut d = det();
        assert!(d.push_candidate(cand(2, 50.0, 90.0, 0, 0.8), &[]).is_none());
        assert!(d.push_candidate(cand(3, 60.0, 100.0, 1, 0.95), &[]).is_none());
        assert!(d.push_candidate(cand(7, 140.0, 100.0, 2, 0.95), &[]).is_none());
        let hit = d.push_candidate(cand(5, 100.0, 100.0, 3, 0.9), &[]).unwrap();
        assert_eq!(hit.pair[0].c, 3);
        assert_eq!(d.buffered(), 2);
    }
}
