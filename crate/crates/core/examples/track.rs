//! Detect and track a drifting face, feeding events one at a time the way
//! a live sensor would.
//!
//!     cargo run --example track [OUT_DIR]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use blinktrack::pipeline::{Pipeline, PipelineConfig, RecordKind, TrackLog};
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().into());
    std::fs::create_dir_all(&dir)?;

    let model = Arc::new(scenes::reference_model()?);
    let (events, _) = synth::generate(&scenes::noisy(1))?;

    let mut pipeline = Pipeline::new(PipelineConfig::default(), model)?;
    let mut records = Vec::new();
    for ev in &events {
        let before = records.len();
        pipeline.process_event_into(ev, &mut records)?;
        for r in &records[before..] {
            if r.kind == RecordKind::Detection {
                println!(
                    "{:>6.2} s  blink  face {}  eyes ({:.0}, {:.0}) ({:.0}, {:.0})",
                    r.t_us as f64 / 1e6,
                    r.face_id,
                    r.lx,
                    r.ly,
                    r.rx,
                    r.ry
                );
            } else if r.t_us % 5_000_000 == 0 {
                println!("{:>6.2} s  face {} at ({:.0}, {:.0}), scale {:.2}", r.t_us as f64 / 1e6, r.face_id, r.cx, r.cy, r.scale);
            }
        }
    }
    pipeline.finish(&mut records);
    let stats = pipeline.stats();
    println!(
        "{} events, {} kept, {} candidates, {} detections, {} faces",
        stats.events_in, stats.kept, stats.candidates, stats.detections, stats.faces_created
    );

    let log = TrackLog { records };
    log.write_csv(BufWriter::new(File::create(dir.join("track.csv"))?))?;
    println!("log written to {}", dir.join("track.csv").display());
    Ok(())
}
