use std::io::{BufRead, ErrorKind, Read, Write};

use super::{Event, Polarity, SensorGeometry};
use crate::error::{Error, Result};

pub const EVB1_MAGIC: [u8; 4] = *b"EVB1";
pub const EVB1_HEADER_LEN: u64 = 8;
pub const EVB1_RECORD_LEN: u64 = 13;

pub struct Evb1Reader<R> {
    source: R,
    geometry: SensorGeometry,
    offset: u64,
    done: bool,
}

/// Fill `buf` completely, returning how many bytes were read before EOF.
fn read_full<R: Read>(source: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: BufRead> Evb1Reader<R> {
    pub fn new(mut source: R) -> Result<Self> {
        let mut header = [0u8; EVB1_HEADER_LEN as usize];
        let n = read_full(&mut source, &mut header)?;
        if n < 4 || header[..4] != EVB1_MAGIC {
            return Err(Error::Format("missing EVB1 magic".into()));
        }
        if n < header.len() {
            return Err(Error::parse_byte(n as u64, "truncated EVB1 header"));
        }
        let width = u16::from_le_bytes([header[4], header[5]]);
        let height = u16::from_le_bytes([header[6], header[7]]);
        let geometry = SensorGeometry::new(width, height)?;
        Ok(Evb1Reader {
            source,
            geometry,
            offset: EVB1_HEADER_LEN,
            done: false,
        })
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    fn next_record(&mut self) -> Result<Option<Event>> {
        let mut rec = [0u8; EVB1_RECORD_LEN as usize];
        let n = read_full(&mut self.source, &mut rec)?;
        if n == 0 {
            return Ok(None);
        }
        if n < rec.len() {
            return Err(Error::parse_byte(
                self.offset,
                format!("truncated record ({n} of {EVB1_RECORD_LEN} bytes)"),
            ));
        }
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes([rec[8], rec[9]]);
        let y = u16::from_le_bytes([rec[10], rec[11]]);
        let p = Polarity::from_bit(rec[12]).ok_or_else(|| {
            Error::parse_byte(self.offset + 12, format!("bad polarity byte {}", rec[12]))
        })?;
        self.offset += EVB1_RECORD_LEN;
        Ok(Some(Event { x, y, t, p }))
    }
}

impl<R: BufRead> Iterator for Evb1Reader<R> {
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
    let mut header = [0u8; EVB1_HEADER_LEN as usize];
    header[..4].copy_from_slice(&EVB1_MAGIC);
    header[4..6].copy_from_slice(&geometry.width.to_le_bytes());
    header[6..8].copy_from_slice(&geometry.height.to_le_bytes());
    sink.write_all(&header)?;
    let mut rec = [0u8; EVB1_RECORD_LEN as usize];
    for ev in events {
        geometry.check(ev)?;
        rec[0..8].copy_from_slice(&ev.t.to_le_bytes());
        rec[8..10].copy_from_slice(&ev.x.to_le_bytes());
        rec[10..12].copy_from_slice(&ev.y.to_le_bytes());
        rec[12] = ev.p.bit();
        sink.write_all(&rec)?;
    }
    Ok(())
}
