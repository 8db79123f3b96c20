//! Synthetic event streams of blinking, moving faces with exact ground truth.
//!
//! A blink is a closure phase full of ON events followed by an opening phase
//! full of OFF events, each drawn from a raised-cosine rate bump. Moving faces
//! also shed events around the eyes and along the face contour, and uniform
//! background noise covers the whole sensor.
//!
//! Every face draws from its own ChaCha8 stream, so adding a face leaves the
//! events of the others untouched.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::activity::G0_TILES;
use crate::error::{Error, Result};
use crate::event_io::{Event, Polarity, SensorGeometry};

/// Refuse scenes that would produce more events than this.
pub const MAX_EVENTS: f64 = 2.0e8;

/// Blinks per minute for common activities.
pub fn blink_rate_preset(name: &str) -> Option<f64> {
    match name {
        "reading" => Some(4.5),
        "rest" => Some(17.0),
        "communicating" => Some(26.0),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlinkProfile {
    pub closure_us: u64,
    pub opening_us: u64,
    /// ON events per eye and blink at scale 1.
    pub on_budget: f64,
    /// OFF events per eye and blink at scale 1.
    pub off_budget: f64,
    /// Emit exactly the budget instead of a Poisson count.
    pub fixed_count: bool,
    /// Each eye's blink is shifted by a uniform offset in `±jitter_us`.
    pub jitter_us: u64,
    /// Spread of blink events around the eye, in tiles.
    pub sigma_tiles: f64,
}

impl Default for BlinkProfile {
    fn default() -> Self {
        BlinkProfile {
            closure_us: 100_000,
            opening_us: 150_000,
            on_budget: 400.0,
            off_budget: 400.0,
            fixed_count: false,
            jitter_us: 5_000,
            sigma_tiles: 0.25,
        }
    }
}

impl BlinkProfile {
    pub fn duration_us(&self) -> u64 {
        self.closure_us + self.opening_us
    }

    /// Start of the closure phase for a blink centred at `center`.
    pub fn start(&self, center: u64) -> i64 {
        center as i64 - (self.duration_us() / 2) as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionProfile {
    /// Events per pixel of eye displacement, per eye.
    pub eye_events_per_px: f64,
    /// Spread of eye motion events as a fraction of the eye distance.
    pub eye_sigma_ratio: f64,
    /// Events per pixel of contour displacement.
    pub contour_events_per_px: f64,
    /// Contour radius as a fraction of the eye distance.
    pub contour_radius_ratio: f64,
    /// Moving edges fire in short runs of neighbouring pixels; this is the
    /// run length.
    pub edge_run: u32,
}

impl Default for MotionProfile {
    fn default() -> Self {
        MotionProfile {
            eye_events_per_px: 45.0,
            eye_sigma_ratio: 0.1,
            contour_events_per_px: 60.0,
            contour_radius_ratio: 1.2,
            edge_run: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeSide {
    Left,
    Right,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub eye: EyeSide,
    pub start_us: u64,
    pub end_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceSpec {
    /// Eye distance at scale 1, in pixels.
    pub eye_distance: f64,
    /// Face-centre waypoints `[t_us, x, y]`, linearly interpolated.
    pub path: Vec<[f64; 3]>,
    /// Scale waypoints `[t_us, scale]`. Empty means constant scale 1.
    #[serde(default)]
    pub scale_path: Vec<[f64; 2]>,
    /// Blink centres in µs. Takes precedence over a rate.
    #[serde(default)]
    pub blink_times: Vec<u64>,
    /// Blinks per minute for Poisson scheduling.
    #[serde(default)]
    pub blink_rate: Option<f64>,
    /// Named rate: `reading`, `rest` or `communicating`.
    #[serde(default)]
    pub blink_preset: Option<String>,
    #[serde(default)]
    pub occlusions: Vec<Occlusion>,
}

impl FaceSpec {
    pub fn center_at(&self, t: f64) -> (f64, f64) {
        let p = &self.path;
        if t <= p[0][0] {
            return (p[0][1], p[0][2]);
        }
        for w in p.windows(2) {
            if t <= w[1][0] {
                let span = w[1][0] - w[0][0];
                let u = if span > 0.0 { (t - w[0][0]) / span } else { 1.0 };
                return (w[0][1] + u * (w[1][1] - w[0][1]), w[0][2] + u * (w[1][2] - w[0][2]));
            }
        }
        let last = p[p.len() - 1];
        (last[1], last[2])
    }

    pub fn scale_at(&self, t: f64) -> f64 {
        let p = &self.scale_path;
        if p.is_empty() {
            return 1.0;
        }
        if t <= p[0][0] {
            return p[0][1];
        }
        for w in p.windows(2) {
            if t <= w[1][0] {
                let span = w[1][0] - w[0][0];
                let u = if span > 0.0 { (t - w[0][0]) / span } else { 1.0 };
                return w[0][1] + u * (w[1][1] - w[0][1]);
            }
        }
        p[p.len() - 1][1]
    }

    pub fn eye_distance_at(&self, t: f64) -> f64 {
        self.eye_distance * self.scale_at(t)
    }

    /// Eye centres: the face centre sits a third of the eye distance below
    /// the eye midpoint.
    pub fn eyes_at(&self, t: f64) -> ((f64, f64), (f64, f64)) {
        let (cx, cy) = self.center_at(t);
        let d = self.eye_distance_at(t);
        let ey = cy - d / 3.0;
        ((cx - d / 2.0, ey), (cx + d / 2.0, ey))
    }

    fn occluded(&self, side: EyeSide, t: u64) -> bool {
        self.occlusions.iter().any(|o| {
            (o.eye == side || o.eye == EyeSide::Both) && t >= o.start_us && t < o.end_us
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default = "default_width")]
    pub width: u16,
    #[serde(default = "default_height")]
    pub height: u16,
    pub duration_us: u64,
    /// Background noise in events per second over the whole sensor.
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub profile: BlinkProfile,
    #[serde(default)]
    pub motion: MotionProfile,
    #[serde(default)]
    pub faces: Vec<FaceSpec>,
}

fn default_width() -> u16 {
    SensorGeometry::ATIS.width
}

fn default_height() -> u16 {
    SensorGeometry::ATIS.height
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn geometry(&self) -> Result<SensorGeometry> {
        SensorGeometry::new(self.width, self.height).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.geometry()?;
        let spec_err = |m: String| Err(Error::Spec(m));
        if self.duration_us == 0 {
            return spec_err("duration_us must be > 0".into());
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return spec_err("noise_rate must be finite and >= 0".into());
        }
        let pr = &self.profile;
        if pr.closure_us == 0 || pr.opening_us == 0 {
            return spec_err("blink closure and opening durations must be > 0".into());
        }
        if !(pr.on_budget >= 0.0 && pr.off_budget >= 0.0 && pr.sigma_tiles > 0.0) {
            return spec_err("blink budgets must be >= 0 and sigma_tiles > 0".into());
        }
        let m = &self.motion;
        if !(m.eye_events_per_px >= 0.0
            && m.contour_events_per_px >= 0.0
            && m.eye_sigma_ratio > 0.0
            && m.contour_radius_ratio > 0.0
            && m.edge_run > 0)
        {
            return spec_err("motion parameters must be >= 0 (ratios and edge_run > 0)".into());
        }
        let (w, h) = (g.width as f64, g.height as f64);
        let mut expected = self.noise_rate * self.duration_us as f64 / 1e6;
        for (i, f) in self.faces.iter().enumerate() {
            if !(f.eye_distance > 0.0) {
                return spec_err(format!("face {i}: eye_distance must be > 0"));
            }
            if f.path.is_empty() {
                return spec_err(format!("face {i}: path needs at least one waypoint"));
            }
            if f.path.windows(2).any(|p| p[1][0] < p[0][0])
                || f.scale_path.windows(2).any(|p| p[1][0] < p[0][0])
            {
                return spec_err(format!("face {i}: waypoint times must be non-decreasing"));
            }
            if f.scale_path.iter().any(|s| !(s[1] > 0.0)) {
                return spec_err(format!("face {i}: scales must be > 0"));
            }
            // eyes are piecewise linear in time, so checking breakpoints suffices
            let mut knots: Vec<f64> = f.path.iter().map(|p| p[0]).chain(f.scale_path.iter().map(|s| s[0])).collect();
            knots.extend([0.0, self.duration_us as f64]);
            for &t in &knots {
                let t = t.clamp(0.0, self.duration_us as f64);
                let (l, r) = f.eyes_at(t);
                let inside = |p: (f64, f64)| p.0 >= 0.0 && p.1 >= 0.0 && p.0 <= w - 1.0 && p.1 <= h - 1.0;
                if !inside(l) || !inside(r) {
                    return spec_err(format!("face {i}: eyes leave the sensor at t = {t} µs"));
                }
            }
            let rate = match (&f.blink_rate, &f.blink_preset) {
                (Some(r), _) => Some(*r),
                (None, Some(name)) => Some(
                    blink_rate_preset(name)
                        .ok_or_else(|| Error::Spec(format!("face {i}: unknown blink preset `{name}`")))?,
                ),
                (None, None) => None,
            };
            if let Some(r) = rate {
                if !(r >= 0.0 && r.is_finite()) {
                    return spec_err(format!("face {i}: blink rate must be >= 0"));
                }
            }
            let half = (pr.duration_us() / 2 + pr.jitter_us) as i64;
            for &b in &f.blink_times {
                if (b as i64) < half || b + half as u64 > self.duration_us {
                    return spec_err(format!(
                        "face {i}: blink at {b} µs does not fit inside the scene"
                    ));
                }
            }
            if f.occlusions.iter().any(|o| o.end_us < o.start_us) {
                return spec_err(format!("face {i}: occlusion ends before it starts"));
            }
            let max_scale = f.scale_path.iter().map(|s| s[1]).fold(1.0, f64::max);
            let blinks = f.blink_times.len() as f64
                + rate.unwrap_or(0.0) * self.duration_us as f64 / 60e6;
            expected += blinks * 2.0 * (pr.on_budget + pr.off_budget) * max_scale;
            let travel: f64 = f
                .path
                .windows(2)
                .map(|p| (p[1][1] - p[0][1]).hypot(p[1][2] - p[0][2]))
                .sum();
            expected += travel * (2.0 * m.eye_events_per_px + m.contour_events_per_px);
        }
        if expected > MAX_EVENTS {
            return spec_err(format!(
                "scene would produce about {expected:.3e} events, above the {MAX_EVENTS:.0e} limit"
            ));
        }
        Ok(())
    }

    /// Blink centres of face `i`, drawing Poisson times from `rng` if needed.
    fn schedule_blinks(&self, face: &FaceSpec, rng: &mut ChaCha8Rng) -> Vec<u64> {
        if !face.blink_times.is_empty() {
            let mut v = face.blink_times.clone();
            v.sort_unstable();
            return v;
        }
        let rate = face
            .blink_rate
            .or_else(|| face.blink_preset.as_deref().and_then(blink_rate_preset))
            .unwrap_or(0.0);
        if rate <= 0.0 {
            return Vec::new();
        }
        let pr = &self.profile;
        let half = pr.duration_us() / 2 + pr.jitter_us;
        // blinks never overlap: the gap is at least one blink plus its jitter
        let min_gap = 2 * half;
        let mean_gap = 60e6 / rate;
        let mut out = Vec::new();
        let mut t = half as f64;
        loop {
            let u: f64 = rng.random::<f64>();
            t += -mean_gap * (1.0 - u).ln();
            let c = t.round() as u64;
            if c + half > self.duration_us {
                break;
            }
            if out.last().is_none_or(|&prev: &u64| c >= prev + min_gap) {
                out.push(c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthBlink {
    pub t_us: u64,
    pub face_id: u64,
    pub lx: f64,
    pub ly: f64,
    pub rx: f64,
    pub ry: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub t_us: u64,
    pub face_id: u64,
    pub cx: f64,
    pub cy: f64,
    pub d_eyes: f64,
}

pub const BLINKS_CSV_HEADER: &str = "t_us,face_id,lx,ly,rx,ry";
pub const TRAJECTORY_CSV_HEADER: &str = "t_us,face_id,cx,cy,d_eyes";

/// Trajectory sample period.
pub const TRUTH_TICK_US: u64 = 1_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub blinks: Vec<TruthBlink>,
    pub trajectory: Vec<TruthSample>,
}

fn parse_fields<const N: usize>(line: &str, line_no: u64) -> Result<[f64; N]> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != N {
        return Err(Error::parse_line(line_no, format!("expected {N} fields, found {}", f.len())));
    }
    let mut out = [0.0; N];
    for (o, s) in out.iter_mut().zip(&f) {
        *o = s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::parse_line(line_no, format!("bad number `{s}`")))?;
    }
    Ok(out)
}

fn data_lines<R: BufRead>(source: R) -> impl Iterator<Item = Result<(u64, String)>> {
    source.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let l = l.trim().to_string();
            let header = i == 0 && l.starts_with(|c: char| c.is_ascii_alphabetic());
            (!l.is_empty() && !l.starts_with('#') && !header).then_some(Ok((i as u64 + 1, l)))
        }
    })
}

impl GroundTruth {
    pub fn write_blinks_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{BLINKS_CSV_HEADER}")?;
        for b in &self.blinks {
            writeln!(sink, "{},{},{},{},{},{}", b.t_us, b.face_id, b.lx, b.ly, b.rx, b.ry)?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn write_trajectory_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{TRAJECTORY_CSV_HEADER}")?;
        for s in &self.trajectory {
            writeln!(sink, "{},{},{},{},{}", s.t_us, s.face_id, s.cx, s.cy, s.d_eyes)?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read_blinks_csv<R: BufRead>(source: R) -> Result<Vec<TruthBlink>> {
        data_lines(source)
            .map(|l| {
                let (n, line) = l?;
                let f = parse_fields::<6>(&line, n)?;
                Ok(TruthBlink {
                    t_us: f[0] as u64,
                    face_id: f[1] as u64,
                    lx: f[2],
                    ly: f[3],
                    rx: f[4],
                    ry: f[5],
                })
            })
            .collect()
    }

    pub fn read_trajectory_csv<R: BufRead>(source: R) -> Result<Vec<TruthSample>> {
        data_lines(source)
            .map(|l| {
                let (n, line) = l?;
                let f = parse_fields::<5>(&line, n)?;
                Ok(TruthSample {
                    t_us: f[0] as u64,
                    face_id: f[1] as u64,
                    cx: f[2],
                    cy: f[3],
                    d_eyes: f[4],
                })
            })
            .collect()
    }
}

/// Draw a time in `[0, span)` from the raised-cosine density
/// `(1 - cos(2πu/span)) / span`.
fn raised_cosine(rng: &mut ChaCha8Rng, span: f64) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>();
        let accept: f64 = rng.random::<f64>();
        if accept * 2.0 < 1.0 - (2.0 * std::f64::consts::PI * u).cos() {
            return u * span;
        }
    }
}

fn event_count(rng: &mut ChaCha8Rng, mean: f64, fixed: bool) -> u64 {
    if mean <= 0.0 {
        0
    } else if fixed {
        mean.round() as u64
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng) as u64
    }
}

struct Emitter {
    geometry: SensorGeometry,
    events: Vec<Event>,
}

impl Emitter {
    fn push(&mut self, x: f64, y: f64, t: f64, p: Polarity) {
        let (xi, yi) = (x.round(), y.round());
        if t < 0.0 || xi < 0.0 || yi < 0.0 {
            return;
        }
        let (xi, yi) = (xi as u64, yi as u64);
        if xi < self.geometry.width as u64 && yi < self.geometry.height as u64 {
            self.events.push(Event::new(xi as u16, yi as u16, t as u64, p));
        }
    }
}

/// `len` events on consecutive pixels along a random axis, 50 µs apart.
fn edge_run(out: &mut Emitter, rng: &mut ChaCha8Rng, at: (f64, f64), t: f64, p: Polarity, len: u32) {
    let (dx, dy) = match rng.random_range(0..4u8) {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (1.0, 1.0),
        _ => (1.0, -1.0),
    };
    for i in 0..len {
        let i = i as f64;
        out.push(at.0 + i * dx, at.1 + i * dy, t + 50.0 * i, p);
    }
}

fn eye_side(k: usize) -> EyeSide {
    if k == 0 {
        EyeSide::Left
    } else {
        EyeSide::Right
    }
}

fn random_polarity(rng: &mut ChaCha8Rng) -> Polarity {
    if rng.random::<bool>() {
        Polarity::On
    } else {
        Polarity::Off
    }
}

/// Generate the events of a scene and its ground truth.
pub fn generate(spec: &SceneSpec) -> Result<(Vec<Event>, GroundTruth)> {
    spec.validate()?;
    let geometry = spec.geometry()?;
    let tile_w = geometry.width.div_ceil(G0_TILES) as f64;
    let tile_h = geometry.height.div_ceil(G0_TILES) as f64;
    let duration = spec.duration_us;
    let pr = &spec.profile;
    let mo = &spec.motion;
    let mut out = Emitter {
        geometry,
        events: Vec::new(),
    };
    let mut truth = GroundTruth::default();

    for (fi, face) in spec.faces.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(fi as u64 + 1);
        let blinks = spec.schedule_blinks(face, &mut rng);

        let blink_pos_x = Normal::new(0.0, pr.sigma_tiles * tile_w).expect("positive sigma");
        let blink_pos_y = Normal::new(0.0, pr.sigma_tiles * tile_h).expect("positive sigma");
        for &c in &blinks {
            let (l, r) = face.eyes_at(c as f64);
            truth.blinks.push(TruthBlink {
                t_us: c,
                face_id: fi as u64,
                lx: l.0,
                ly: l.1,
                rx: r.0,
                ry: r.1,
            });
            let scale = face.scale_at(c as f64);
            for k in 0..2 {
                let jitter = if pr.jitter_us > 0 {
                    rng.random_range(-(pr.jitter_us as i64)..=pr.jitter_us as i64)
                } else {
                    0
                };
                let start = (pr.start(c) + jitter) as f64;
                let phases = [
                    (Polarity::On, start, pr.closure_us as f64, pr.on_budget),
                    (Polarity::Off, start + pr.closure_us as f64, pr.opening_us as f64, pr.off_budget),
                ];
                for (p, t0, span, budget) in phases {
                    let n = event_count(&mut rng, budget * scale, pr.fixed_count);
                    for _ in 0..n {
                        let t = t0 + raised_cosine(&mut rng, span);
                        let (ex, ey) = if k == 0 { face.eyes_at(t).0 } else { face.eyes_at(t).1 };
                        let x = ex + blink_pos_x.sample(&mut rng);
                        let y = ey + blink_pos_y.sample(&mut rng);
                        if !face.occluded(eye_side(k), t as u64) {
                            out.push(x, y, t, p);
                        }
                    }
                }
            }
        }

        // motion, integrated in 1 ms steps; edge events scale with face size
        let step = TRUTH_TICK_US;
        let run = mo.edge_run as f64;
        let mut t = 0u64;
        while t < duration {
            let t1 = (t + step).min(duration);
            let (a, b) = (t as f64, t1 as f64);
            let eyes0 = face.eyes_at(a);
            let eyes1 = face.eyes_at(b);
            let d = face.eye_distance_at(b);
            let scale = face.scale_at(b);
            for k in 0..2 {
                let (p0, p1) = if k == 0 { (eyes0.0, eyes1.0) } else { (eyes0.1, eyes1.1) };
                let moved = (p1.0 - p0.0).hypot(p1.1 - p0.1);
                let n = event_count(&mut rng, mo.eye_events_per_px * scale * moved / run, false);
                let spread = Normal::new(0.0, mo.eye_sigma_ratio * d).expect("positive sigma");
                for _ in 0..n {
                    let te = a + rng.random::<f64>() * (b - a);
                    let x = p1.0 + spread.sample(&mut rng);
                    let y = p1.1 + spread.sample(&mut rng);
                    let p = random_polarity(&mut rng);
                    if !face.occluded(eye_side(k), te as u64) {
                        edge_run(&mut out, &mut rng, (x, y), te, p, mo.edge_run);
                    }
                }
            }
            let c0 = face.center_at(a);
            let c1 = face.center_at(b);
            let radius = mo.contour_radius_ratio * d;
            let moved = (c1.0 - c0.0).hypot(c1.1 - c0.1)
                + mo.contour_radius_ratio * (face.eye_distance_at(b) - face.eye_distance_at(a)).abs();
            let n = event_count(&mut rng, mo.contour_events_per_px * scale * moved / run, false);
            for _ in 0..n {
                let te = a + rng.random::<f64>() * (b - a);
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                let rr = radius + rng.random_range(-1.0..1.0);
                let p = random_polarity(&mut rng);
                let at = (c1.0 + rr * angle.cos(), c1.1 + rr * angle.sin());
                edge_run(&mut out, &mut rng, at, te, p, mo.edge_run);
            }
            t = t1;
        }

        let mut ts = 0u64;
        while ts <= duration {
            let (cx, cy) = face.center_at(ts as f64);
            truth.trajectory.push(TruthSample {
                t_us: ts,
                face_id: fi as u64,
                cx,
                cy,
                d_eyes: face.eye_distance_at(ts as f64),
            });
            ts += TRUTH_TICK_US;
        }
    }

    if spec.noise_rate > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(0);
        let n = event_count(&mut rng, spec.noise_rate * duration as f64 / 1e6, false);
        for _ in 0..n {
            let t = rng.random_range(0..duration);
            let x = rng.random_range(0..geometry.width);
            let y = rng.random_range(0..geometry.height);
            let p = random_polarity(&mut rng);
            out.events.push(Event::new(x, y, t, p));
        }
    }

    let mut events = out.events;
    events.retain(|e| e.t < duration);
    events.sort_by_key(|e| e.t);
    truth.trajectory.sort_by_key(|s| (s.t_us, s.face_id));
    truth.blinks.sort_by_key(|b| (b.t_us, b.face_id));
    Ok((events, truth))
}
