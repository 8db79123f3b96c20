//! Write a synthetic recording in both stream formats, read it back and
//! validate it.
//!
//!     cargo run --example stream_io [OUT_DIR]

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use blinktrack::event_io::{read_all, validate_stream, write_events, StreamFormat};
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().into());
    std::fs::create_dir_all(&dir)?;

    let spec = scenes::clean_blinks(0, 3);
    let geometry = spec.geometry()?;
    let (events, _) = synth::generate(&spec)?;

    for (name, format) in [("scene.evb", StreamFormat::Evb1), ("scene.csv", StreamFormat::Csv)] {
        let path = dir.join(name);
        write_events(BufWriter::new(File::create(&path)?), &events, geometry, format)?;
        let size = std::fs::metadata(&path)?.len();
        // EVB1 carries its geometry; CSV needs it supplied
        let (back, g) = read_all(BufReader::new(File::open(&path)?), None, Some(geometry))?;
        assert_eq!(back, events);
        let report = validate_stream(&back, g);
        println!(
            "{name}: {} events, {size} bytes, {}x{}, clean = {}",
            back.len(),
            g.width,
            g.height,
            report.is_clean()
        );
    }
    Ok(())
}
