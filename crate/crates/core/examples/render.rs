//! Render event frames with the tracked eyes and face drawn on top.
//!
//!     cargo run --example render [OUT_DIR]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use blinktrack::eval::render::{render_overlay, write_png};
use blinktrack::pipeline::{run_slice, PipelineConfig};
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().into());
    std::fs::create_dir_all(&dir)?;

    let spec = scenes::multi_face(0);
    let (events, _) = synth::generate(&spec)?;
    let (log, _) = run_slice(&events, &PipelineConfig::default(), Arc::new(scenes::reference_model()?))?;

    for t in [3_000_000u64, 9_000_000, 18_000_000] {
        let img = render_overlay(&events, &log, spec.geometry()?, t, 20_000)?;
        let path = dir.join(format!("frame_{:02}s.png", t / 1_000_000));
        write_png(&img, BufWriter::new(File::create(&path)?))?;
        println!("{} ({}x{})", path.display(), img.width(), img.height());
    }
    Ok(())
}
