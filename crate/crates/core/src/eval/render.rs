//! Event accumulation frames with tracker overlays.

use std::io::{Cursor, Write};

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::event_io::{Event, Polarity, SensorGeometry};
use crate::pipeline::{RecordKind, TrackLog, TrackLogRecord};

pub const BACKGROUND: Rgb<u8> = Rgb([128, 128, 128]);
pub const ON_COLOR: Rgb<u8> = Rgb([255, 255, 255]);
pub const OFF_COLOR: Rgb<u8> = Rgb([0, 0, 0]);
pub const EYE_COLOR: Rgb<u8> = Rgb([230, 40, 40]);
pub const FACE_COLOR: Rgb<u8> = Rgb([40, 200, 60]);

fn put(img: &mut RgbImage, x: f64, y: f64, c: Rgb<u8>) {
    let (x, y) = (x.round(), y.round());
    if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn cross(img: &mut RgbImage, x: f64, y: f64, arm: i32) {
    for k in -arm..=arm {
        put(img, x + k as f64, y, EYE_COLOR);
        put(img, x, y + k as f64, EYE_COLOR);
    }
}

fn circle(img: &mut RgbImage, cx: f64, cy: f64, r: f64) {
    let steps = ((std::f64::consts::TAU * r).ceil() as usize * 2).max(16);
    for k in 0..steps {
        let a = std::f64::consts::TAU * k as f64 / steps as f64;
        put(img, cx + r * a.cos(), cy + r * a.sin(), FACE_COLOR);
    }
}

/// Records of the log time closest to `t` (any kind).
fn nearest_records(log: &TrackLog, t: u64) -> Vec<&TrackLogRecord> {
    let Some(best) = log.records.iter().map(|r| r.t_us).min_by_key(|&rt| (rt.abs_diff(t), rt)) else {
        return Vec::new();
    };
    let mut recs: Vec<&TrackLogRecord> = log.records.iter().filter(|r| r.t_us == best).collect();
    // a detection and a sample at the same time describe the same face
    recs.sort_by_key(|r| (r.face_id, r.kind == RecordKind::Detection));
    recs.dedup_by_key(|r| r.face_id);
    recs
}

/// Accumulate events in `[t - window, t + window]` on a grey frame (later
/// events overwrite earlier ones) and draw eye crosses and face circles.
pub fn render_overlay(
    events: &[Event],
    log: &TrackLog,
    geometry: SensorGeometry,
    t_center: u64,
    window_us: u64,
) -> Result<RgbImage> {
    if window_us == 0 {
        return Err(Error::Render("window must be > 0".into()));
    }
    let (first, last) = match (events.first(), events.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::Render("stream is empty".into())),
    };
    if t_center < first || t_center > last {
        return Err(Error::Render(format!(
            "t = {t_center} µs lies outside the stream span [{first}, {last}] µs"
        )));
    }
    let mut img = RgbImage::from_pixel(geometry.width as u32, geometry.height as u32, BACKGROUND);
    let lo = t_center.saturating_sub(window_us);
    let hi = t_center.saturating_add(window_us);
    let start = events.partition_point(|e| e.t < lo);
    for e in events[start..].iter().take_while(|e| e.t <= hi) {
        if geometry.contains(e.x, e.y) {
            let c = match e.p {
                Polarity::On => ON_COLOR,
                Polarity::Off => OFF_COLOR,
            };
            img.put_pixel(e.x as u32, e.y as u32, c);
        }
    }
    for r in nearest_records(log, t_center) {
        circle(&mut img, r.cx, r.cy, r.radius);
        cross(&mut img, r.lx, r.ly, 3);
        cross(&mut img, r.rx, r.ry, 3);
    }
    Ok(img)
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::Render(e.to_string()))?;
    Ok(buf.into_inner())
}

pub fn write_png<W: Write>(img: &RgbImage, mut sink: W) -> Result<()> {
    sink.write_all(&encode_png(img)?)?;
    sink.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_on_event_is_one_white_pixel() {
        let ev = [Event::on(10, 10, 1_000)];
        let img = render_overlay(&ev, &TrackLog::default(), SensorGeometry::ATIS, 1_000, 10).unwrap();
        let white = img.pixels().filter(|p| **p == ON_COLOR).count();
        assert_eq!(white, 1);
        assert_eq!(*img.get_pixel(10, 10), ON_COLOR);
        assert_eq!(img.pixels().filter(|p| **p == BACKGROUND).count(), 304 * 240 - 1);
    }

    #[test]
    fn later_event_wins() {
        let ev = [Event::on(5, 5, 100), Event::off(5, 5, 200)];
        let img = render_overlay(&ev, &TrackLog::default(), SensorGeometry::ATIS, 150, 100).unwrap();
        assert_eq!(*img.get_pixel(5, 5), OFF_COLOR);
    }

    #[test]
    fn empty_window_is_grey_plus_overlay() {
        let ev = [Event::on(5, 5, 0), Event::on(5, 5, 1_000_000)];
        let rec = TrackLogRecord {
            t_us: 500_000,
            face_id: 0,
            kind: RecordKind::TrackSample,
            lx: 100.0,
            ly: 100.0,
            rx: 140.0,
            ry: 100.0,
            cx: 120.0,
            cy: 113.0,
            radius: 48.0,
            scale: 1.0,
        };
        let log = TrackLog { records: vec![rec] };
        let img = render_overlay(&ev, &log, SensorGeometry::ATIS, 500_000, 1_000).unwrap();
        assert!(img.pixels().all(|p| *p != ON_COLOR && *p != OFF_COLOR));
        assert_eq!(*img.get_pixel(100, 100), EYE_COLOR);
        assert_eq!(*img.get_pixel(168, 113), FACE_COLOR);
    }

    #[test]
    fn time_outside_span_is_an_error() {
        let ev = [Event::on(5, 5, 100)];
        assert!(render_overlay(&ev, &TrackLog::default(), SensorGeometry::ATIS, 5_000, 10).is_err());
        assert!(render_overlay(&ev, &TrackLog::default(), SensorGeometry::ATIS, 100, 0).is_err());
    }

    #[test]
    fn png_encoding_is_deterministic() {
        let ev = [Event::on(10, 10, 1_000), Event::off(20, 30, 1_500)];
        let img = render_overlay(&ev, &TrackLog::default(), SensorGeometry::ATIS, 1_000, 1_000).unwrap();
        let a = encode_png(&img).unwrap();
        let b = encode_png(&img).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[1..4], b"PNG");
    }
}
