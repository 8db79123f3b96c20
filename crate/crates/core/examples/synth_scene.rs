//! Describe a scene in TOML, generate it, and write the events and ground
//! truth to disk.
//!
//!     cargo run --example synth_scene [OUT_DIR]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use blinktrack::event_io::{write_events, StreamFormat};
use blinktrack::synth::{self, SceneSpec};

const SCENE: &str = r#"
width = 304
height = 240
duration_us = 8000000
noise_rate = 2000.0
seed = 11

[[faces]]
eye_distance = 44.0
path = [[0.0, 110.0, 120.0], [8000000.0, 190.0, 130.0]]
blink_times = [1000000, 3500000, 6000000]
"#;

fn main() -> blinktrack::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().into());
    std::fs::create_dir_all(&dir)?;

    let spec = SceneSpec::from_toml(SCENE)?;
    let (events, truth) = synth::generate(&spec)?;
    write_events(BufWriter::new(File::create(dir.join("scene.evb"))?), &events, spec.geometry()?, StreamFormat::Evb1)?;
    truth.write_blinks_csv(BufWriter::new(File::create(dir.join("blinks.csv"))?))?;
    truth.write_trajectory_csv(BufWriter::new(File::create(dir.join("trajectory.csv"))?))?;

    println!("{} events, {} blinks, {} trajectory samples", events.len(), truth.blinks.len(), truth.trajectory.len());
    for b in &truth.blinks {
        println!("blink at {:.2} s: left ({:.0}, {:.0}) right ({:.0}, {:.0})", b.t_us as f64 / 1e6, b.lx, b.ly, b.rx, b.ry);
    }
    println!("wrote scene.evb, blinks.csv, trajectory.csv to {}", dir.display());
    Ok(())
}
