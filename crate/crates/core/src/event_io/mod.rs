//! Event data model, sensor geometry and the two on-disk stream formats.
//!
//! * CSV: one `t,x,y,p` record per line, `t` in decimal microseconds and
//!   `p` either `0` (OFF) or `1` (ON). A single non-numeric header line is
//!   tolerated at the top of the file.
//! * EVB1: `b"EVB1"`, width `u16` LE, height `u16` LE, followed by 13-byte
//!   records `t: u64 LE, x: u16 LE, y: u16 LE, p: u8`.

mod csv;
mod evb1;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::CsvReader;
pub use self::evb1::{Evb1Reader, EVB1_HEADER_LEN, EVB1_MAGIC, EVB1_RECORD_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub const BOTH: [Polarity; 2] = [Polarity::On, Polarity::Off];

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }

    pub(crate) fn index(self) -> usize {
        self.bit() as usize
    }
}

/// One change event: pixel column `x`, pixel row `y`, timestamp `t` in
/// microseconds and polarity `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, p: Polarity) -> Self {
        Event { x, y, t, p }
    }

    pub fn on(x: u16, y: u16, t: u64) -> Self {
        Event::new(x, y, t, Polarity::On)
    }

    pub fn off(x: u16, y: u16, t: u64) -> Self {
        Event::new(x, y, t, Polarity::Off)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub const MIN_SIDE: u16 = 32;

    /// The ATIS resolution used throughout the defaults.
    pub const ATIS: SensorGeometry = SensorGeometry {
        width: 304,
        height: 240,
    };

    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width < Self::MIN_SIDE || height < Self::MIN_SIDE {
            return Err(Error::Range(format!(
                "sensor geometry {width}x{height} is below the {m}x{m} minimum",
                m = Self::MIN_SIDE
            )));
        }
        Ok(SensorGeometry { width, height })
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub(crate) fn check(&self, ev: &Event) -> Result<()> {
        if self.contains(ev.x, ev.y) {
            Ok(())
        } else {
            Err(Error::Range(format!(
                "pixel ({}, {}) outside {}x{} sensor",
                ev.x, ev.y, self.width, self.height
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamFormat {
    Csv,
    Evb1,
}

impl std::str::FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(StreamFormat::Csv),
            "evb1" => Ok(StreamFormat::Evb1),
            other => Err(Error::Format(format!("unknown stream format `{other}`"))),
        }
    }
}

/// Peek at the first bytes of `source` and decide which format it holds.
/// Anything that does not start with the EVB1 magic is treated as CSV.
pub fn detect_format<R: BufRead>(source: &mut R) -> Result<StreamFormat> {
    let head = source.fill_buf()?;
    if head.len() >= 4 && head[..4] == EVB1_MAGIC {
        Ok(StreamFormat::Evb1)
    } else {
        Ok(StreamFormat::Csv)
    }
}

/// Lazy, single-consumer event reader over either format.
pub enum EventReader<R> {
    Csv(CsvReader<R>),
    Evb1(Evb1Reader<R>),
}

impl<R: BufRead> EventReader<R> {
    pub fn geometry(&self) -> SensorGeometry {
        match self {
            EventReader::Csv(r) => r.geometry(),
            EventReader::Evb1(r) => r.geometry(),
        }
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            EventReader::Csv(r) => r.next(),
            EventReader::Evb1(r) => r.next(),
        }
    }
}

/// Open an event stream. `format = None` auto-detects by magic. CSV carries
/// no header, so its geometry comes from `csv_geometry`.
pub fn read_events<R: BufRead>(
    mut source: R,
    format: Option<StreamFormat>,
    csv_geometry: Option<SensorGeometry>,
) -> Result<EventReader<R>> {
    let format = match format {
        Some(f) => f,
        None => detect_format(&mut source)?,
    };
    match format {
        StreamFormat::Evb1 => Ok(EventReader::Evb1(Evb1Reader::new(source)?)),
        StreamFormat::Csv => {
            let geometry = csv_geometry.ok_or_else(|| {
                Error::Format("CSV streams need an explicit sensor geometry".into())
            })?;
            Ok(EventReader::Csv(CsvReader::new(source, geometry)))
        }
    }
}

/// Read a whole stream into memory.
pub fn read_all<R: BufRead>(
    source: R,
    format: Option<StreamFormat>,
    csv_geometry: Option<SensorGeometry>,
) -> Result<(Vec<Event>, SensorGeometry)> {
    let reader = read_events(source, format, csv_geometry)?;
    let geometry = reader.geometry();
    let events = reader.collect::<Result<Vec<_>>>()?;
    Ok((events, geometry))
}

pub fn write_events<'a, W, I>(
    mut sink: W,
    events: I,
    geometry: SensorGeometry,
    format: StreamFormat,
) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Event>,
{
    match format {
        StreamFormat::Evb1 => evb1::write(&mut sink, events, geometry)?,
        StreamFormat::Csv => csv::write(&mut sink, events, geometry)?,
    }
    sink.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub events: u64,
    pub first_t: Option<u64>,
    pub last_t: Option<u64>,
    pub on_events: u64,
    pub off_events: u64,
    pub out_of_range: u64,
    pub order_violations: u64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.out_of_range == 0 && self.order_violations == 0
    }
}

/// Count events and violations in one pass. Never fails; dirty streams are
/// reported, not rejected.
pub fn validate_stream<'a, I>(events: I, geometry: SensorGeometry) -> ValidationReport
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut report = ValidationReport::default();
    let mut prev: Option<u64> = None;
    for ev in events {
        report.events += 1;
        report.first_t.get_or_insert(ev.t);
        report.last_t = Some(ev.t);
        match ev.p {
            Polarity::On => report.on_events += 1,
            Polarity::Off => report.off_events += 1,
        }
        if !geometry.contains(ev.x, ev.y) {
            report.out_of_range += 1;
        }
        if let Some(p) = prev {
            if ev.t < p {
                report.order_violations += 1;
            }
        }
        prev = Some(ev.t);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: u64) -> Vec<Event> {
        (0..n)
            .map(|i| Event::on((i % 300) as u16, (i % 200) as u16, i * 10))
            .collect()
    }

    #[test]
    fn clean_stream_has_no_violations() {
        let report = validate_stream(&ramp(100), SensorGeometry::ATIS);
        assert_eq!(report.events, 100);
        assert_eq!(report.on_events, 100);
        assert_eq!(report.first_t, Some(0));
        assert_eq!(report.last_t, Some(990));
        assert!(report.is_clean());
    }

    #[test]
    fn single_time_regression_is_counted() {
        let mut events = ramp(10);
        events[5].t = events[4].t - 1;
        let report = validate_stream(&events, SensorGeometry::ATIS);
        assert_eq!(report.order_violations, 1);
        assert_eq!(report.out_of_range, 0);
    }

    #[test]
    fn pixel_at_width_is_out_of_range() {
        let mut events = ramp(10);
        events[3].x = 304;
        let report = validate_stream(&events, SensorGeometry::ATIS);
        assert_eq!(report.out_of_range, 1);
        assert_eq!(report.order_violations, 0);
    }

    #[test]
    fn detect_format_by_magic() {
        let mut evb: &[u8] = b"EVB1\x30\x01\xf0\x00";
        assert_eq!(detect_format(&mut evb).unwrap(), StreamFormat::Evb1);
        let mut csv: &[u8] = b"1000,12,30,1\n";
        assert_eq!(detect_format(&mut csv).unwrap(), StreamFormat::Csv);
    }

    #[test]
    fn geometry_minimum() {
        assert!(SensorGeometry::new(31, 240).is_err());
        assert!(SensorGeometry::new(32, 32).is_ok());
    }

    #[test]
    fn csv_requires_geometry() {
        let src: &[u8] = b"1000,12,30,1\n";
        assert!(matches!(
            read_events(src, Some(StreamFormat::Csv), None),
            Err(Error::Format(_))
        ));
    }
}
