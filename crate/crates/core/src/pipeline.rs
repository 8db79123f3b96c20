//! Event-by-event face detection and tracking.
//!
//! Every kept event first feeds the eye trackers of existing faces, then the
//! tile activity, the correlator and the pair detector. Detections create new
//! faces or pull the trackers of a known face back onto its eyes. Tracker
//! state is sampled into the log at a fixed tick.

use std::io::{BufRead, Write};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityConfig, ActivityGrid};
use crate::correlator::{BlinkCandidate, Correlator, CorrelatorConfig};
use crate::detector::{BlinkDetection, Detector, DetectorConfig, FaceRegion};
use crate::error::{Error, Result};
use crate::event_io::{Event, SensorGeometry};
use crate::model::BlinkModel;
use crate::noise_filter::{Decision, FilterConfig, FilterState};
use crate::tracker::{assign_and_update, FaceTrack, TrackerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub geometry: SensorGeometry,
    pub filter: FilterConfig,
    pub activity: ActivityConfig,
    pub correlator: CorrelatorConfig,
    pub detector: DetectorConfig,
    pub tracker: TrackerConfig,
    pub tick_us: u64,
    /// Run detection only while no face exists.
    pub literal_alg2: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            geometry: SensorGeometry::ATIS,
            filter: FilterConfig::default(),
            activity: ActivityConfig::default(),
            correlator: CorrelatorConfig::default(),
            detector: DetectorConfig::default(),
            tracker: TrackerConfig::default(),
            tick_us: 1_000,
            literal_alg2: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.activity.validate()?;
        self.correlator.validate()?;
        self.detector.validate()?;
        self.tracker.validate()?;
        if self.tick_us == 0 {
            return Err(Error::Config("pipeline.tick_us must be > 0".into()));
        }
        Ok(())
    }

    /// The activity window and time constant must match the model's.
    pub fn check_model(&self, model: &BlinkModel) -> Result<()> {
        if self.activity.tau_us != model.tau_us() || self.activity.window_us != model.duration_us() {
            return Err(Error::Config(format!(
                "activity tau/window {}/{} µs do not match the model's {}/{} µs",
                self.activity.tau_us,
                self.activity.window_us,
                model.tau_us(),
                model.duration_us()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordKind {
    Detection,
    TrackSample,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Detection => "DETECTION",
            RecordKind::TrackSample => "TRACK_SAMPLE",
        }
    }
}

impl std::str::FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DETECTION" => Ok(RecordKind::Detection),
            "TRACK_SAMPLE" => Ok(RecordKind::TrackSample),
            other => Err(Error::Format(format!("unknown record kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackLogRecord {
    pub t_us: u64,
    pub face_id: u64,
    pub kind: RecordKind,
    pub lx: f64,
    pub ly: f64,
    pub rx: f64,
    pub ry: f64,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub scale: f64,
}

impl TrackLogRecord {
    pub fn from_face(t_us: u64, kind: RecordKind, face: &FaceTrack) -> Self {
        TrackLogRecord {
            t_us,
            face_id: face.id,
            kind,
            lx: face.left.mu[0],
            ly: face.left.mu[1],
            rx: face.right.mu[0],
            ry: face.right.mu[1],
            cx: face.circle.cx,
            cy: face.circle.cy,
            radius: face.circle.radius,
            scale: face.scale,
        }
    }
}

pub const LOG_CSV_HEADER: &str = "t_us,face_id,kind,lx,ly,rx,ry,cx,cy,radius,scale";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackLog {
    pub records: Vec<TrackLogRecord>,
}

impl TrackLog {
    pub fn detections(&self) -> impl Iterator<Item = &TrackLogRecord> {
        self.records.iter().filter(|r| r.kind == RecordKind::Detection)
    }

    pub fn samples(&self) -> impl Iterator<Item = &TrackLogRecord> {
        self.records.iter().filter(|r| r.kind == RecordKind::TrackSample)
    }

    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{LOG_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                sink,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t_us,
                r.face_id,
                r.kind.as_str(),
                r.lx,
                r.ly,
                r.rx,
                r.ry,
                r.cx,
                r.cy,
                r.radius,
                r.scale
            )?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut sink: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut sink, r).map_err(|e| Error::Format(e.to_string()))?;
            sink.write_all(b"\n")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(source: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (line_no == 1 && line.starts_with("t_us")) {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 11 {
                return Err(Error::parse_line(line_no, format!("expected 11 fields, found {}", f.len())));
            }
            let int = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| Error::parse_line(line_no, format!("bad integer `{s}`")))
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse_line(line_no, format!("bad number `{s}`")))
            };
            records.push(TrackLogRecord {
                t_us: int(f[0])?,
                face_id: int(f[1])?,
                kind: f[2]
                    .parse()
                    .map_err(|_| Error::parse_line(line_no, format!("bad kind `{}`", f[2])))?,
                lx: num(f[3])?,
                ly: num(f[4])?,
                rx: num(f[5])?,
                ry: num(f[6])?,
                cx: num(f[7])?,
                cy: num(f[8])?,
                radius: num(f[9])?,
                scale: num(f[10])?,
            });
        }
        let log = TrackLog { records };
        log.check_order()?;
        Ok(log)
    }

    pub fn read_jsonl<R: BufRead>(source: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::parse_line(i as u64 + 1, e.to_string()))?,
            );
        }
        let log = TrackLog { records };
        log.check_order()?;
        Ok(log)
    }

    /// Read either format, deciding by the first non-blank byte.
    pub fn read_any<R: BufRead>(mut source: R) -> Result<Self> {
        let first = loop {
            let buf = source.fill_buf()?;
            match buf.iter().position(|b| !b.is_ascii_whitespace()) {
                Some(i) => break Some(buf[i]),
                None if buf.is_empty() => break None,
                None => {
                    let n = buf.len();
                    source.consume(n);
                }
            }
        };
        match first {
            Some(b'{') => Self::read_jsonl(source),
            _ => Self::read_csv(source),
        }
    }

    fn check_order(&self) -> Result<()> {
        for (i, w) in self.records.windows(2).enumerate() {
            if w[1].t_us < w[0].t_us {
                return Err(Error::Order(format!(
                    "log record {} at {} µs precedes record {} at {} µs",
                    i + 2,
                    w[1].t_us,
                    i + 1,
                    w[0].t_us
                )));
            }
        }
        Ok(())
    }
}

/// Wall-clock time spent per stage, in nanoseconds. Only collected when
/// profiling is switched on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub filter_ns: u64,
    pub track_ns: u64,
    pub activity_ns: u64,
    pub correlate_ns: u64,
    pub detect_ns: u64,
}

impl StageTimes {
    pub fn total_ns(&self) -> u64 {
        self.filter_ns + self.track_ns + self.activity_ns + self.correlate_ns + self.detect_ns
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub events_in: u64,
    pub kept: u64,
    pub dropped: u64,
    pub candidates: u64,
    pub detections: u64,
    /// Detections of a face that was already detected within the
    /// refractory period.
    pub duplicate_detections: u64,
    pub faces_created: u64,
    pub tracker_calls: u64,
    pub accepted_assignments: u64,
    pub score_calls: u64,
    pub gate_rejections: u64,
    pub wall_time_s: f64,
    pub events_per_s: f64,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    model: Arc<BlinkModel>,
    filter: FilterState,
    grid: ActivityGrid,
    correlator: Correlator,
    detector: Detector,
    faces: Vec<FaceTrack>,
    last_detection: Vec<u64>,
    next_face_id: u64,
    last_t: Option<u64>,
    next_tick: Option<u64>,
    stats: RunStats,
    audit: Option<Vec<BlinkCandidate>>,
    stage: Option<StageTimes>,
}

fn elapsed_ns(start: Instant) -> u64 {
    start.elapsed().as_nanos() as u64
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, model: Arc<BlinkModel>) -> Result<Self> {
        cfg.validate()?;
        cfg.check_model(&model)?;
        let grid = ActivityGrid::new(cfg.geometry, cfg.activity)?;
        let tiles = grid.layout().total_tiles();
        let tile_w = grid.layout().tile_w() as f64;
        Ok(Pipeline {
            filter: FilterState::new(cfg.geometry, cfg.filter)?,
            correlator: Correlator::new(cfg.correlator, tiles)?,
            detector: Detector::new(cfg.detector, tile_w)?,
            grid,
            model,
            cfg,
            faces: Vec::new(),
            last_detection: Vec::new(),
            next_face_id: 0,
            last_t: None,
            next_tick: None,
            stats: RunStats::default(),
            audit: None,
            stage: None,
        })
    }

    /// Keep every emitted candidate.
    pub fn record_candidates(&mut self, on: bool) {
        self.audit = on.then(Vec::new);
    }

    pub fn candidates(&self) -> &[BlinkCandidate] {
        self.audit.as_deref().unwrap_or(&[])
    }

    pub fn set_profiling(&mut self, on: bool) {
        self.stage = on.then(StageTimes::default);
    }

    pub fn stage_times(&self) -> Option<StageTimes> {
        self.stage
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn faces(&self) -> &[FaceTrack] {
        &self.faces
    }

    pub fn stats(&self) -> RunStats {
        let mut s = self.stats;
        s.score_calls = self.correlator.score_calls();
        s.gate_rejections = self.correlator.gate_rejections();
        s
    }

    pub fn process_event(&mut self, ev: &Event) -> Result<Vec<TrackLogRecord>> {
        let mut out = Vec::new();
        self.process_event_into(ev, &mut out)?;
        Ok(out)
    }

    /// Process one event, appending any log records to `out`.
    pub fn process_event_into(&mut self, ev: &Event, out: &mut Vec<TrackLogRecord>) -> Result<()> {
        let index = self.stats.events_in;
        self.step(ev, out).map_err(|e| e.at_event(index))
    }

    fn step(&mut self, ev: &Event, out: &mut Vec<TrackLogRecord>) -> Result<()> {
        if let Some(last) = self.last_t {
            if ev.t < last {
                return Err(Error::Order(format!("t = {} µs after t = {last} µs", ev.t)));
            }
        }
        if !self.cfg.geometry.contains(ev.x, ev.y) {
            return Err(Error::Range(format!(
                "pixel ({}, {}) outside {}x{} sensor",
                ev.x, ev.y, self.cfg.geometry.width, self.cfg.geometry.height
            )));
        }
        self.emit_ticks_before(ev.t, out);
        self.last_t = Some(ev.t);
        self.stats.events_in += 1;

        let clock = self.stage.is_some().then(Instant::now);
        let decision = self.filter.filter_event(ev)?;
        if let (Some(st), Some(c)) = (self.stage.as_mut(), clock) {
            st.filter_ns += elapsed_ns(c);
        }
        if decision == Decision::Drop {
            self.stats.dropped += 1;
            return Ok(());
        }
        self.stats.kept += 1;

        let had_faces = !self.faces.is_empty();
        if had_faces {
            let clock = self.stage.is_some().then(Instant::now);
            self.stats.tracker_calls += 1;
            if let Some((i, a)) = assign_and_update(&mut self.faces, ev, &self.cfg.tracker, self.cfg.geometry)? {
                if a.accepted {
                    self.stats.accepted_assignments += 1;
                    self.faces[i].refresh_face_geometry(&self.cfg.tracker, ev.t);
                }
            }
            if let (Some(st), Some(c)) = (self.stage.as_mut(), clock) {
                st.track_ns += elapsed_ns(c);
            }
            if self.cfg.literal_alg2 {
                return Ok(());
            }
        }

        let clock = self.stage.is_some().then(Instant::now);
        let scale = self.scale_at(ev.x as f64, ev.y as f64);
        let (a, b) = self.grid.apply(ev, scale)?;
        if let (Some(st), Some(c)) = (self.stage.as_mut(), clock) {
            st.activity_ns += elapsed_ns(c);
        }

        for tile_ref in std::iter::once(a).chain(b) {
            let clock = self.stage.is_some().then(Instant::now);
            let layout = self.grid.layout();
            let flat = layout.flat_index(tile_ref);
            let center = layout.tile_center(tile_ref);
            let candidate = self.correlator.maybe_emit_candidate(
                tile_ref,
                flat,
                center,
                self.grid.tile(tile_ref),
                &self.model,
                ev.t,
                scale,
            )?;
            if let (Some(st), Some(c)) = (self.stage.as_mut(), clock) {
                st.correlate_ns += elapsed_ns(c);
            }
            let Some(candidate) = candidate else { continue };

            let clock = self.stage.is_some().then(Instant::now);
            self.stats.candidates += 1;
            if let Some(audit) = self.audit.as_mut() {
                audit.push(candidate);
            }
            let regions: Vec<FaceRegion> = self.faces.iter().map(FaceTrack::region).collect();
            if let Some(det) = self.detector.push_candidate(candidate, &regions) {
                self.handle_detection(&det, out);
            }
            if let (Some(st), Some(c)) = (self.stage.as_mut(), clock) {
                st.detect_ns += elapsed_ns(c);
            }
        }
        Ok(())
    }

    fn scale_at(&self, x: f64, y: f64) -> f64 {
        let regions = self.faces.iter().map(FaceTrack::region);
        let mut best: Option<(f64, f64)> = None;
        for r in regions {
            let dist = (x - r.cx).hypot(y - r.cy);
            if dist <= r.radius && best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, r.scale));
            }
        }
        best.map_or(1.0, |(_, s)| s)
    }

    fn handle_detection(&mut self, det: &BlinkDetection, out: &mut Vec<TrackLogRecord>) {
        let tile = (
            self.grid.layout().tile_w() as f64,
            self.grid.layout().tile_h() as f64,
        );
        let matched = det
            .face_id
            .and_then(|id| self.faces.iter().position(|f| f.id == id));
        let i = match matched {
            Some(i) => {
                if det.t.saturating_sub(self.last_detection[i]) < self.cfg.correlator.refractory_us {
                    self.stats.duplicate_detections += 1;
                    return;
                }
                self.faces[i].reanchor(det, &self.cfg.tracker, tile, det.t);
                self.last_detection[i] = det.t;
                i
            }
            None => {
                if self.cfg.tracker.max_faces > 0 && self.faces.len() >= self.cfg.tracker.max_faces {
                    return;
                }
                let face = FaceTrack::new(self.next_face_id, det, &self.cfg.tracker);
                self.next_face_id += 1;
                self.stats.faces_created += 1;
                self.faces.push(face);
                self.last_detection.push(det.t);
                self.faces.len() - 1
            }
        };
        self.stats.detections += 1;
        out.push(TrackLogRecord::from_face(det.t, RecordKind::Detection, &self.faces[i]));
    }

    /// Emit samples for every tick strictly before `t`.
    fn emit_ticks_before(&mut self, t: u64, out: &mut Vec<TrackLogRecord>) {
        let tick = self.cfg.tick_us;
        let mut next = match self.next_tick {
            Some(n) => n,
            None => t.div_ceil(tick) * tick,
        };
        while next < t {
            if self.faces.is_empty() {
                // nothing to sample; jump to the first tick not before t
                next = t.div_ceil(tick) * tick;
                break;
            }
            self.expire_idle(next);
            for face in &self.faces {
                out.push(TrackLogRecord::from_face(next, RecordKind::TrackSample, face));
            }
            next += tick;
        }
        self.next_tick = Some(next);
    }

    fn expire_idle(&mut self, now: u64) {
        let limit = self.cfg.tracker.idle_expiry_us;
        if limit == 0 {
            return;
        }
        let mut k = 0;
        while k < self.faces.len() {
            if now.saturating_sub(self.faces[k].last_activity()) > limit {
                self.faces.remove(k);
                self.last_detection.remove(k);
            } else {
                k += 1;
            }
        }
    }

    /// Flush the samples due at or before the last event.
    pub fn finish(&mut self, out: &mut Vec<TrackLogRecord>) {
        if let Some(last) = self.last_t {
            self.emit_ticks_before(last + 1, out);
        }
    }
}

/// Run a whole stream through a fresh pipeline.
pub fn run<I>(events: I, cfg: &PipelineConfig, model: Arc<BlinkModel>) -> Result<(TrackLog, RunStats)>
where
    I: IntoIterator<Item = Result<Event>>,
{
    let mut p = Pipeline::new(cfg.clone(), model)?;
    let mut records = Vec::new();
    let start = Instant::now();
    for (i, ev) in events.into_iter().enumerate() {
        let ev = ev.map_err(|e| e.at_event(i as u64))?;
        p.process_event_into(&ev, &mut records)?;
    }
    p.finish(&mut records);
    let wall = start.elapsed().as_secs_f64();
    let mut stats = p.stats();
    stats.wall_time_s = wall;
    stats.events_per_s = if wall > 0.0 { stats.events_in as f64 / wall } else { 0.0 };
    Ok((TrackLog { records }, stats))
}

/// Convenience wrapper for in-memory streams.
pub fn run_slice(events: &[Event], cfg: &PipelineConfig, model: Arc<BlinkModel>) -> Result<(TrackLog, RunStats)> {
    run(events.iter().copied().map(Ok), cfg, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_io::Polarity;

    fn flat_model() -> Arc<BlinkModel> {
        let on = vec![1.0; 2500];
        let off = vec![1.0; 2500];
        Arc::new(BlinkModel::from_samples(100, 250_000, 50_000, 0.5, 400.0 / 250_000.0, on, off).unwrap())
    }

    #[test]
    fn empty_stream() {
        let (log, stats) = run_slice(&[], &PipelineConfig::default(), flat_model()).unwrap();
        assert!(log.records.is_empty());
        assert_eq!((stats.events_in, stats.kept, stats.dropped, stats.detections), (0, 0, 0, 0));
    }

    #[test]
    fn noise_only_stream_has_no_faces_and_no_tracker_calls() {
        let events: Vec<Event> = (0..5_000u64)
            .map(|i| Event::new((i * 37 % 304) as u16, (i * 91 % 240) as u16, i * 200, Polarity::On))
            .collect();
        let (log, stats) = run_slice(&events, &PipelineConfig::default(), flat_model()).unwrap();
        assert_eq!(log.detections().count(), 0);
        assert_eq!(stats.tracker_calls, 0);
        assert_eq!(stats.events_in, stats.kept + stats.dropped);
    }

    #[test]
    fn out_of_order_event_reports_index() {
        let events = [Event::on(1, 1, 10), Event::on(1, 1, 20), Event::on(1, 1, 5)];
        let err = run_slice(&events, &PipelineConfig::default(), flat_model()).unwrap_err();
        match err {
            Error::AtEvent { index, source } => {
                assert_eq!(index, 2);
                assert!(matches!(*source, Error::Order(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatched_model_window_is_rejected() {
        let cfg = PipelineConfig {
            activity: ActivityConfig {
                tau_us: 40_000,
                ..ActivityConfig::default()
            },
            ..PipelineConfig::default()
        };
        assert!(matches!(Pipeline::new(cfg, flat_model()), Err(Error::Config(_))));
    }

    #[test]
    fn log_csv_round_trip() {
        let log = TrackLog {
            records: vec![
                TrackLogRecord {
                    t_us: 5,
                    face_id: 0,
                    kind: RecordKind::Detection,
                    lx: 1.5,
                    ly: 2.0,
                    rx: 40.25,
                    ry: 2.0,
                    cx: 20.875,
                    cy: 14.9,
                    radius: 46.5,
                    scale: 1.0,
                },
                TrackLogRecord {
                    t_us: 1000,
                    face_id: 0,
                    kind: RecordKind::TrackSample,
                    lx: 0.1 + 0.2,
                    ly: 2.0,
                    rx: 40.0,
                    ry: 2.0,
                    cx: 20.0,
                    cy: 15.0,
                    radius: 1.0 / 3.0,
                    scale: 0.97,
                },
            ],
        };
        let mut csv = Vec::new();
        log.write_csv(&mut csv).unwrap();
        assert!(csv.starts_with(LOG_CSV_HEADER.as_bytes()));
        assert_eq!(TrackLog::read_any(&csv[..]).unwrap(), log);
        let mut jsonl = Vec::new();
        log.write_jsonl(&mut jsonl).unwrap();
        assert_eq!(TrackLog::read_any(&jsonl[..]).unwrap(), log);
    }

    #[test]
    fn tick_samples_follow_faces() {
        let mut p = Pipeline::new(PipelineConfig::default(), flat_model()).unwrap();
        let det = BlinkDetection {
            left: (100.0, 100.0),
            right: (140.0, 100.0),
            t: 2_500,
            scale: 1.0,
            face_id: None,
            pair: [BlinkCandidate {
                grid: crate::activity::GridId::G0,
                r: 0,
                c: 0,
                x: 0.0,
                y: 0.0,
                t: 0,
                score: 1.0,
            }; 2],
        };
        let mut out = Vec::new();
        p.process_event_into(&Event::on(0, 0, 2_500), &mut out).unwrap();
        p.handle_detection(&det, &mut out);
        p.process_event_into(&Event::on(0, 0, 6_000), &mut out).unwrap();
        p.finish(&mut out);
        let ticks: Vec<u64> = out
            .iter()
            .filter(|r| r.kind == RecordKind::TrackSample)
            .map(|r| r.t_us)
            .collect();
        assert_eq!(ticks, vec![3_000, 4_000, 5_000, 6_000]);
        assert_eq!(out[0].kind, RecordKind::Detection);
    }
}
