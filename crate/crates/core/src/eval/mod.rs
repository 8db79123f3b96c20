//! Scoring track logs against synthetic ground truth.
//!
//! A truth blink counts as detected when some DETECTION lies within the
//! matching window and both of its eye positions are within one tile (per
//! axis) of the true eyes. Tracking error at a truth sample is the distance
//! between the tracked and true face centres, divided by the width of the
//! true face box `γ·2·d_eyes`, in percent. Matching is purely geometric, so
//! face ids in the log and the truth need not agree.
//!
//! The true face boxes come from the generator's ground truth, not from a
//! frame-based face detector; every report says so.

pub mod bench;
pub mod render;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_io::SensorGeometry;
use crate::pipeline::{TrackLog, TrackLogRecord};
use crate::synth::{GroundTruth, TruthBlink, TruthSample};

pub const REPORT_NOTE: &str =
    "reference face boxes come from synthetic ground truth (width = radius_ratio * 2 * d_eyes), not from a frame-based detector";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub window_us: u64,
    /// Eye tolerance per axis, in pixels (one tile by default).
    pub tol_x: f64,
    pub tol_y: f64,
    pub radius_ratio: f64,
    /// A log sample older than this no longer describes the face.
    pub max_sample_age_us: u64,
}

impl EvalConfig {
    pub fn for_geometry(geometry: SensorGeometry) -> Self {
        let g = crate::activity::DualGrid::new(geometry);
        EvalConfig {
            window_us: 100_000,
            tol_x: g.tile_w() as f64,
            tol_y: g.tile_h() as f64,
            radius_ratio: 1.2,
            max_sample_age_us: 10_000,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig::for_geometry(SensorGeometry::ATIS)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaceEval {
    pub face_id: u64,
    pub blinks: usize,
    pub detected: usize,
    pub detected_pct: Option<f64>,
    /// Time of the first detected blink of this face.
    pub first_detection_us: Option<u64>,
    pub samples: usize,
    pub tracked: usize,
    pub mean_error_pct: Option<f64>,
    pub median_error_pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub truth_blinks: usize,
    pub detected_blinks: usize,
    pub blinks_detected_pct: Option<f64>,
    pub detections: usize,
    pub false_detections: usize,
    pub truth_samples: usize,
    pub tracked_samples: usize,
    pub coverage_pct: Option<f64>,
    pub mean_error_pct: Option<f64>,
    pub median_error_pct: Option<f64>,
    pub max_error_pct: Option<f64>,
    /// Delay from blink centre to its first matching DETECTION.
    pub latency_mean_us: Option<f64>,
    pub latency_median_us: Option<f64>,
    pub latency_max_us: Option<i64>,
    pub per_face: Vec<FaceEval>,
}

pub fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn pct(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

/// Whether a DETECTION record matches a truth blink.
pub fn detection_matches(det: &TrackLogRecord, blink: &TruthBlink, cfg: &EvalConfig) -> bool {
    let dt = det.t_us.abs_diff(blink.t_us);
    let near = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;
    dt <= cfg.window_us
        && near(det.lx, blink.lx, cfg.tol_x)
        && near(det.ly, blink.ly, cfg.tol_y)
        && near(det.rx, blink.rx, cfg.tol_x)
        && near(det.ry, blink.ry, cfg.tol_y)
}

/// Tracking error of the log face closest to the truth centre at `t`.
fn sample_error(
    ticks: &BTreeMap<u64, Vec<&TrackLogRecord>>,
    t: u64,
    cx: f64,
    cy: f64,
    d_eyes: f64,
    cfg: &EvalConfig,
) -> Option<f64> {
    let (&tick, recs) = ticks.range(..=t).next_back()?;
    if t - tick > cfg.max_sample_age_us {
        return None;
    }
    let dist = recs
        .iter()
        .map(|r| (r.cx - cx).hypot(r.cy - cy))
        .min_by(f64::total_cmp)?;
    Some(100.0 * dist / (cfg.radius_ratio * 2.0 * d_eyes))
}

fn ticks_of(log: &TrackLog) -> BTreeMap<u64, Vec<&TrackLogRecord>> {
    let mut ticks: BTreeMap<u64, Vec<&TrackLogRecord>> = BTreeMap::new();
    for r in log.samples() {
        ticks.entry(r.t_us).or_default().push(r);
    }
    ticks
}

/// Per-sample tracking error over the trajectory, `None` where no recent
/// log sample exists.
pub fn error_series(log: &TrackLog, truth: &GroundTruth, cfg: &EvalConfig) -> Vec<(TruthSample, Option<f64>)> {
    let ticks = ticks_of(log);
    truth
        .trajectory
        .iter()
        .map(|s| (*s, sample_error(&ticks, s.t_us, s.cx, s.cy, s.d_eyes, cfg)))
        .collect()
}

pub fn evaluate(log: &TrackLog, truth: &GroundTruth, cfg: &EvalConfig) -> Result<EvalReport> {
    if truth.blinks.is_empty() && truth.trajectory.is_empty() {
        return Err(Error::Eval("ground truth is empty".into()));
    }
    if !(cfg.radius_ratio > 0.0) {
        return Err(Error::Eval("radius ratio must be > 0".into()));
    }
    let detections: Vec<&TrackLogRecord> = log.detections().collect();
    let ticks = ticks_of(log);

    let mut faces: BTreeMap<u64, FaceEval> = BTreeMap::new();
    let mut face_errors: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut det_used = vec![false; detections.len()];
    let mut latencies = Vec::new();
    let mut detected = 0;
    for b in &truth.blinks {
        let fe = faces.entry(b.face_id).or_insert_with(|| FaceEval {
            face_id: b.face_id,
            ..FaceEval::default()
        });
        fe.blinks += 1;
        let lo = b.t_us.saturating_sub(cfg.window_us);
        let start = detections.partition_point(|d| d.t_us < lo);
        let mut first = None;
        for (k, d) in detections.iter().enumerate().skip(start) {
            if d.t_us > b.t_us + cfg.window_us {
                break;
            }
            if detection_matches(d, b, cfg) {
                det_used[k] = true;
                first.get_or_insert(d.t_us);
            }
        }
        if let Some(t) = first {
            detected += 1;
            fe.detected += 1;
            fe.first_detection_us = Some(fe.first_detection_us.map_or(t, |f: u64| f.min(t)));
            latencies.push(t as i64 - b.t_us as i64);
        }
    }

    let mut errors = Vec::new();
    for s in &truth.trajectory {
        let fe = faces.entry(s.face_id).or_insert_with(|| FaceEval {
            face_id: s.face_id,
            ..FaceEval::default()
        });
        fe.samples += 1;
        if let Some(e) = sample_error(&ticks, s.t_us, s.cx, s.cy, s.d_eyes, cfg) {
            fe.tracked += 1;
            errors.push(e);
            face_errors.entry(s.face_id).or_default().push(e);
        }
    }

    for fe in faces.values_mut() {
        fe.detected_pct = pct(fe.detected, fe.blinks);
        if let Some(errs) = face_errors.get_mut(&fe.face_id) {
            errs.sort_by(f64::total_cmp);
            fe.mean_error_pct = mean(errs);
            fe.median_error_pct = median(errs);
        }
    }
    errors.sort_by(f64::total_cmp);
    let mut lat: Vec<f64> = latencies.iter().map(|&l| l as f64).collect();
    lat.sort_by(f64::total_cmp);

    Ok(EvalReport {
        truth_blinks: truth.blinks.len(),
        detected_blinks: detected,
        blinks_detected_pct: pct(detected, truth.blinks.len()),
        detections: detections.len(),
        false_detections: det_used.iter().filter(|u| !**u).count(),
        truth_samples: truth.trajectory.len(),
        tracked_samples: errors.len(),
        coverage_pct: pct(errors.len(), truth.trajectory.len()),
        mean_error_pct: mean(&errors),
        median_error_pct: median(&errors),
        max_error_pct: errors.last().copied(),
        latency_mean_us: mean(&lat),
        latency_median_us: median(&lat),
        latency_max_us: latencies.iter().copied().max(),
        per_face: faces.into_values().collect(),
    })
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

impl EvalReport {
    /// `key = value` text, one field per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {REPORT_NOTE}");
        let _ = writeln!(s, "# tracking error is normalised by box width only");
        let rows: [(&str, String); 14] = [
            ("truth_blinks", self.truth_blinks.to_string()),
            ("detected_blinks", self.detected_blinks.to_string()),
            ("blinks_detected_pct", opt(self.blinks_detected_pct)),
            ("detections", self.detections.to_string()),
            ("false_detections", self.false_detections.to_string()),
            ("truth_samples", self.truth_samples.to_string()),
            ("tracked_samples", self.tracked_samples.to_string()),
            ("coverage_pct", opt(self.coverage_pct)),
            ("mean_error_pct", opt(self.mean_error_pct)),
            ("median_error_pct", opt(self.median_error_pct)),
            ("max_error_pct", opt(self.max_error_pct)),
            ("latency_mean_us", opt(self.latency_mean_us)),
            ("latency_median_us", opt(self.latency_median_us)),
            ("latency_max_us", opt(self.latency_max_us)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        for f in &self.per_face {
            let p = format!("face.{}", f.face_id);
            let _ = writeln!(s, "{p}.blinks = {}", f.blinks);
            let _ = writeln!(s, "{p}.detected = {}", f.detected);
            let _ = writeln!(s, "{p}.first_detection_us = {}", opt(f.first_detection_us));
            let _ = writeln!(s, "{p}.tracked = {}/{}", f.tracked, f.samples);
            let _ = writeln!(s, "{p}.median_error_pct = {}", opt(f.median_error_pct));
        }
        s
    }

    /// Per-face breakdown as CSV.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(
            sink,
            "face_id,blinks,detected,detected_pct,first_detection_us,samples,tracked,mean_error_pct,median_error_pct"
        )?;
        let c = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for f in &self.per_face {
            writeln!(
                sink,
                "{},{},{},{},{},{},{},{},{}",
                f.face_id,
                f.blinks,
                f.detected,
                c(f.detected_pct),
                f.first_detection_us.map_or(String::new(), |v| v.to_string()),
                f.samples,
                f.tracked,
                c(f.mean_error_pct),
                c(f.median_error_pct)
            )?;
        }
        sink.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::RecordKind;

    fn rec(t: u64, kind: RecordKind, id: u64, (cx, cy): (f64, f64), eyes: [f64; 4]) -> TrackLogRecord {
        TrackLogRecord {
            t_us: t,
            face_id: id,
            kind,
            lx: eyes[0],
            ly: eyes[1],
            rx: eyes[2],
            ry: eyes[3],
            cx,
            cy,
            radius: 1.0,
            scale: 1.0,
        }
    }

    fn truth() -> GroundTruth {
        GroundTruth {
            blinks: vec![TruthBlink {
                t_us: 500_000,
                face_id: 0,
                lx: 100.0,
                ly: 100.0,
                rx: 140.0,
                ry: 100.0,
            }],
            trajectory: (0..=10)
                .map(|k| TruthSample {
                    t_us: 500_000 + k * 1_000,
                    face_id: 0,
                    cx: 120.0,
                    cy: 100.0 + 40.0 / 3.0,
                    d_eyes: 100.0 / 2.4,
                })
                .collect(),
        }
    }

    fn perfect_log(shift: f64) -> TrackLog {
        let eyes = [100.0, 100.0, 140.0, 100.0];
        let c = (120.0 + shift, 100.0 + 40.0 / 3.0);
        let mut records = vec![rec(500_000, RecordKind::Detection, 0, c, eyes)];
        for k in 0..=10 {
            records.push(rec(500_000 + k * 1_000, RecordKind::TrackSample, 0, c, eyes));
        }
        TrackLog { records }
    }

    #[test]
    fn perfect_log_scores_perfectly() {
        let r = evaluate(&perfect_log(0.0), &truth(), &EvalConfig::default()).unwrap();
        assert_eq!(r.blinks_detected_pct, Some(100.0));
        assert_eq!(r.false_detections, 0);
        assert_eq!(r.median_error_pct, Some(0.0));
        assert_eq!(r.coverage_pct, Some(100.0));
        assert_eq!(r.latency_max_us, Some(0));
    }

    #[test]
    fn ten_pixel_shift_on_hundred_pixel_box() {
        let r = evaluate(&perfect_log(10.0), &truth(), &EvalConfig::default()).unwrap();
        assert!((r.median_error_pct.unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn far_detection_is_false() {
        let mut log = perfect_log(0.0);
        log.records[0].lx += 25.0;
        let r = evaluate(&log, &truth(), &EvalConfig::default()).unwrap();
        assert_eq!(r.detected_blinks, 0);
        assert_eq!(r.false_detections, 1);
        assert_eq!(r.blinks_detected_pct, Some(0.0));
    }

    #[test]
    fn face_ids_do_not_matter() {
        let mut log = perfect_log(3.0);
        for r in &mut log.records {
            r.face_id = 42;
        }
        let a = evaluate(&perfect_log(3.0), &truth(), &EvalConfig::default()).unwrap();
        let b = evaluate(&log, &truth(), &EvalConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stale_samples_are_untracked() {
        let log = TrackLog {
            records: vec![rec(400_000, RecordKind::TrackSample, 0, (120.0, 113.0), [0.0; 4])],
        };
        let r = evaluate(&log, &truth(), &EvalConfig::default()).unwrap();
        assert_eq!(r.tracked_samples, 0);
        assert_eq!(r.median_error_pct, None);
    }

    #[test]
    fn empty_truth_is_an_error() {
        let err = evaluate(&TrackLog::default(), &GroundTruth::default(), &EvalConfig::default());
        assert!(matches!(err, Err(Error::Eval(_))));
    }

    #[test]
    fn text_report_mentions_reference_boxes() {
        let r = evaluate(&perfect_log(0.0), &truth(), &EvalConfig::default()).unwrap();
        let text = r.to_text();
        assert!(text.contains("synthetic ground truth"));
        assert!(text.contains("blinks_detected_pct = 100"));
    }
}
