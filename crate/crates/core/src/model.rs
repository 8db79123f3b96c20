//! Canonical blink signature: averaged ON/OFF activity curves sampled on a
//! uniform lattice, plus the event-count gate statistic and ON/OFF weight.
//!
//! A model is built from annotated blinks. For every annotation the events
//! inside a one-tile spatial window around the eye and a `T`-long temporal
//! window centred on the annotation time are turned into activity with the
//! same exponential decay used online, sampled exactly on the lattice,
//! averaged over annotations and smoothed with a centred moving average.
//!
//! Models are stored as `BLKM` version 1 JSON text.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::activity::{decay, DualGrid};
use crate::error::{Error, Result};
use crate::event_io::{Event, Polarity, SensorGeometry};

pub const MODEL_FORMAT: &str = "BLKM";
pub const MODEL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlinkAnnotation {
    pub t: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelBuildConfig {
    pub rt_us: u64,
    pub window_us: u64,
    pub tau_us: u64,
    pub smooth_half_width: usize,
    pub alpha: f64,
}

impl Default for ModelBuildConfig {
    fn default() -> Self {
        ModelBuildConfig {
            rt_us: 100,
            window_us: 250_000,
            tau_us: 50_000,
            smooth_half_width: 25,
            alpha: 0.5,
        }
    }
}

impl ModelBuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rt_us == 0 || self.window_us == 0 || self.tau_us == 0 {
            return Err(Error::Config(
                "model rt, window and tau must all be > 0".into(),
            ));
        }
        if self.rt_us > self.window_us {
            return Err(Error::Config("model rt exceeds the window".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Events of one recording together with its blink annotations.
#[derive(Debug, Clone, Copy)]
pub struct AnnotatedStream<'a> {
    pub events: &'a [Event],
    pub geometry: SensorGeometry,
    pub annotations: &'a [BlinkAnnotation],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlinkModel {
    rt_us: u64,
    duration_us: u64,
    tau_us: u64,
    alpha: f64,
    /// Typical events per µs in one window, per unit scale.
    n_rate: f64,
    samples_on: Vec<f64>,
    samples_off: Vec<f64>,
    energy_on: f64,
    energy_off: f64,
}

pub fn lattice_len(duration_us: u64, rt_us: u64) -> usize {
    duration_us.div_ceil(rt_us) as usize
}

impl BlinkModel {
    pub fn from_samples(
        rt_us: u64,
        duration_us: u64,
        tau_us: u64,
        alpha: f64,
        n_rate: f64,
        samples_on: Vec<f64>,
        samples_off: Vec<f64>,
    ) -> Result<Self> {
        let energy_on = samples_on.iter().map(|v| v * v).sum();
        let energy_off = samples_off.iter().map(|v| v * v).sum();
        let model = BlinkModel {
            rt_us,
            duration_us,
            tau_us,
            alpha,
            n_rate,
            samples_on,
            samples_off,
            energy_on,
            energy_off,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        if self.rt_us == 0 || self.duration_us == 0 || self.tau_us == 0 {
            return Err(Error::Model("rt, duration and tau must be > 0".into()));
        }
        let len = lattice_len(self.duration_us, self.rt_us);
        if self.samples_on.len() != len || self.samples_off.len() != len {
            return Err(Error::Model(format!(
                "expected {len} samples per polarity, found {}/{}",
                self.samples_on.len(),
                self.samples_off.len()
            )));
        }
        let finite_nonneg = |v: &f64| v.is_finite() && *v >= 0.0;
        if !self.samples_on.iter().chain(&self.samples_off).all(finite_nonneg) {
            return Err(Error::Model("samples must be finite and >= 0".into()));
        }
        if !(self.n_rate.is_finite() && self.n_rate > 0.0) {
            return Err(Error::Model("event-count statistic N must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Model("alpha must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn rt_us(&self) -> u64 {
        self.rt_us
    }

    pub fn duration_us(&self) -> u64 {
        self.duration_us
    }

    pub fn tau_us(&self) -> u64 {
        self.tau_us
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.check()?;
        Ok(self)
    }

    pub fn n_rate(&self) -> f64 {
        self.n_rate
    }

    /// Typical event count of a blink window at the given scale.
    pub fn typical_count(&self, scale: f64) -> f64 {
        self.n_rate * self.duration_us as f64 * scale
    }

    pub fn samples(&self, p: Polarity) -> &[f64] {
        match p {
            Polarity::On => &self.samples_on,
            Polarity::Off => &self.samples_off,
        }
    }

    pub fn energy(&self, p: Polarity) -> f64 {
        match p {
            Polarity::On => self.energy_on,
            Polarity::Off => self.energy_off,
        }
    }

    pub fn len(&self) -> usize {
        self.samples_on.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples_on.is_empty()
    }

    /// Lattice index for a lag, or `None` outside `[0, duration)`.
    #[inline]
    pub fn lattice_index(&self, lag_us: i64) -> Option<usize> {
        if lag_us < 0 || lag_us as u64 >= self.duration_us {
            return None;
        }
        let idx = (lag_us as u64 + self.rt_us / 2) / self.rt_us;
        Some((idx as usize).min(self.samples_on.len() - 1))
    }

    /// Nearest-sample model activity `B_p(lag)`; zero outside the support.
    #[inline]
    pub fn evaluate(&self, lag_us: i64, p: Polarity) -> f64 {
        match self.lattice_index(lag_us) {
            Some(i) => self.samples(p)[i],
            None => 0.0,
        }
    }

    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer_pretty(&mut sink, &file)
            .map_err(|e| Error::Model(format!("cannot serialize model: {e}")))?;
        sink.write_all(b"\n")?;
        sink.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Model(format!("unreadable or truncated model file: {e}")))?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(MODEL_FORMAT) {
            return Err(Error::Model(format!(
                "not a {MODEL_FORMAT} model file (format = {format:?})"
            )));
        }
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Model("missing model version".into()))?;
        if version != MODEL_VERSION {
            return Err(Error::ModelVersion {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value)
            .map_err(|e| Error::Model(format!("malformed model file: {e}")))?;
        file.model.check()?;
        Ok(file.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u64,
    #[serde(flatten)]
    model: BlinkModel,
}

/// Activity of one annotated window sampled on the lattice, and the number
/// of events that produced it.
fn window_activity(
    events: &[Event],
    ann: &BlinkAnnotation,
    start: u64,
    half_w: f64,
    half_h: f64,
    cfg: &ModelBuildConfig,
    len: usize,
) -> ([Vec<f64>; 2], usize) {
    let end = start + cfg.window_us;
    let first = events.partition_point(|e| e.t < start);
    let selected = events[first..]
        .iter()
        .take_while(|e| e.t < end)
        .filter(|e| (e.x as f64 - ann.x).abs() <= half_w && (e.y as f64 - ann.y).abs() <= half_h);

    let mut out = [vec![0.0; len], vec![0.0; len]];
    let mut value = [0.0f64; 2];
    let mut last: [Option<u64>; 2] = [None; 2];
    let mut count = 0;
    let mut k = 0usize;
    let sample = |k: usize, value: &[f64; 2], last: &[Option<u64>; 2], out: &mut [Vec<f64>; 2]| {
        let s = start + k as u64 * cfg.rt_us;
        for p in 0..2 {
            if let Some(t) = last[p] {
                out[p][k] = value[p] * decay(s - t, cfg.tau_us);
            }
        }
    };
    for ev in selected {
        // lattice points strictly before this event see the previous state
        while k < len && start + k as u64 * cfg.rt_us < ev.t {
            sample(k, &value, &last, &mut out);
            k += 1;
        }
        let p = ev.p.index();
        value[p] = match last[p] {
            Some(t) => value[p] * decay(ev.t - t, cfg.tau_us),
            None => 0.0,
        } + 1.0;
        last[p] = Some(ev.t);
        count += 1;
    }
    while k < len {
        sample(k, &value, &last, &mut out);
        k += 1;
    }
    (out, count)
}

/// Centred moving average; windows are truncated at the array ends.
pub fn smooth(samples: &[f64], half_width: usize) -> Vec<f64> {
    if half_width == 0 || samples.is_empty() {
        return samples.to_vec();
    }
    let mut prefix = Vec::with_capacity(samples.len() + 1);
    prefix.push(0.0);
    for v in samples {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..samples.len())
        .map(|k| {
            let lo = k.saturating_sub(half_width);
            let hi = (k + half_width).min(samples.len() - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect()
}

pub fn build_model(streams: &[AnnotatedStream<'_>], cfg: &ModelBuildConfig) -> Result<BlinkModel> {
    cfg.validate()?;
    let len = lattice_len(cfg.window_us, cfg.rt_us);
    let mut sum = [vec![0.0; len], vec![0.0; len]];
    let mut windows = 0usize;
    let mut total_events = 0usize;

    for (si, stream) in streams.iter().enumerate() {
        let grid = DualGrid::new(stream.geometry);
        let half_w = grid.tile_w() as f64 / 2.0;
        let half_h = grid.tile_h() as f64 / 2.0;
        let span = match (stream.events.first(), stream.events.last()) {
            (Some(a), Some(b)) => Some((a.t, b.t)),
            _ => None,
        };
        for (ai, ann) in stream.annotations.iter().enumerate() {
            let name = || format!("annotation #{ai} (t={} µs) of stream #{si}", ann.t);
            if !(ann.x >= 0.0
                && ann.y >= 0.0
                && ann.x < stream.geometry.width as f64
                && ann.y < stream.geometry.height as f64)
            {
                return Err(Error::Build(format!("{} lies outside the sensor", name())));
            }
            let half = cfg.window_us / 2;
            let inside = match span {
                Some((first, last)) => {
                    ann.t >= half && ann.t - half >= first && ann.t + (cfg.window_us - half) <= last
                }
                None => false,
            };
            if !inside {
                return Err(Error::Build(format!(
                    "{} has a window outside the stream's time span",
                    name()
                )));
            }
            let start = ann.t - half;
            let (act, count) =
                window_activity(stream.events, ann, start, half_w, half_h, cfg, len);
            for p in 0..2 {
                for (s, a) in sum[p].iter_mut().zip(&act[p]) {
                    *s += a;
                }
            }
            windows += 1;
            total_events += count;
        }
    }
    if windows == 0 {
        return Err(Error::Build("at least one annotation is required".into()));
    }
    if total_events == 0 {
        return Err(Error::Build(
            "degenerate model: no events in any annotated window".into(),
        ));
    }
    let [off, on] = sum.map(|s| {
        let mean: Vec<f64> = s.iter().map(|v| v / windows as f64).collect();
        smooth(&mean, cfg.smooth_half_width)
    });
    let n_rate = total_events as f64 / windows as f64 / cfg.window_us as f64;
    BlinkModel::from_samples(
        cfg.rt_us,
        cfg.window_us,
        cfg.tau_us,
        cfg.alpha,
        n_rate,
        on,
        off,
    )
}

/// Read annotations. Accepts `t_us,x,y` lines, or ground-truth blink lines
/// `t_us,face_id,lx,ly,rx,ry` which contribute one annotation per eye.
pub fn read_annotations<R: BufRead>(source: R) -> Result<Vec<BlinkAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line_no == 1 && !line.starts_with(|c: char| c.is_ascii_digit()) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse_line(line_no, format!("bad number `{s}`")))
        };
        let t: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse_line(line_no, format!("bad timestamp `{}`", fields[0])))?;
        match fields.len() {
            3 => out.push(BlinkAnnotation {
                t,
                x: num(fields[1])?,
                y: num(fields[2])?,
            }),
            6 => {
                out.push(BlinkAnnotation {
                    t,
                    x: num(fields[2])?,
                    y: num(fields[3])?,
                });
                out.push(BlinkAnnotation {
                    t,
                    x: num(fields[4])?,
                    y: num(fields[5])?,
                });
            }
            n => {
                return Err(Error::parse_line(
                    line_no,
                    format!("expected 3 or 6 fields, found {n}"),
                ))
            }
        }
    }
    Ok(out)
}
