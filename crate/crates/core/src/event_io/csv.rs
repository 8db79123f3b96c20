use std::io::{BufRead, Write};

use super::{Event, Polarity, SensorGeometry};
use crate::error::{Error, Result};

pub struct CsvReader<R> {
    source: R,
    geometry: SensorGeometry,
    line_no: u64,
    buf: String,
    done: bool,
}

impl<R: BufRead> CsvReader<R> {
    pub fn new(source: R, geometry: SensorGeometry) -> Self {
        CsvReader {
            source,
            geometry,
            line_no: 0,
            buf: String::new(),
            done: false,
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    fn next_record(&mut self) -> Result<Option<Event>> {
        loop {
            self.buf.clear();
            let n = self
                .source
                .read_line(&mut self.buf)
                .map_err(|e| Error::parse_line(self.line_no + 1, e.to_string()))?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            if self.line_no == 1 && line.starts_with(|c: char| c.is_ascii_alphabetic()) {
                // header line
                continue;
            }
            return parse_record(line, self.line_no).map(Some);
        }
    }
}

fn parse_record(line: &str, line_no: u64) -> Result<Event> {
    let mut fields = line.split(',').map(str::trim);
    let mut next = |name: &str| {
        fields
            .next()
            .ok_or_else(|| Error::parse_line(line_no, format!("missing field `{name}`")))
    };
    let t = next("t")?;
    let x = next("x")?;
    let y = next("y")?;
    let p = next("p")?;
    if fields.next().is_some() {
        return Err(Error::parse_line(line_no, "expected 4 fields `t,x,y,p`"));
    }
    let t: u64 = t
        .parse()
        .map_err(|_| Error::parse_line(line_no, format!("bad timestamp `{t}`")))?;
    let x: u16 = x
        .parse()
        .map_err(|_| Error::parse_line(line_no, format!("bad x `{x}`")))?;
    let y: u16 = y
        .parse()
        .map_err(|_| Error::parse_line(line_no, format!("bad y `{y}`")))?;
    let p = match p {
        "0" => Polarity::Off,
        "1" => Polarity::On,
        other => return Err(Error::parse_line(line_no, format!("bad polarity `{other}`"))),
    };
    Ok(Event { x, y, t, p })
}

impl<R: BufRead> Iterator for CsvReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(ev)) => Some(Ok(ev)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub(super) fn write<'a, W, I>(sink: &mut W, events: I, geometry: SensorGeometry) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Event>,
{
    for ev in events {
        geometry.check(ev)?;
        writeln!(sink, "{},{},{},{}", ev.t, ev.x, ev.y, ev.p.bit())?;
    }
    Ok(())
}
