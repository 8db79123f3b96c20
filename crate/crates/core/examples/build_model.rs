//! Build a blink model from annotated training recordings, save it and
//! print its activity profile.
//!
//!     cargo run --example build_model [OUT_DIR]

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use blinktrack::event_io::Polarity;
use blinktrack::model::{build_model, AnnotatedStream, BlinkModel, ModelBuildConfig};
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().into());
    std::fs::create_dir_all(&dir)?;

    // four subjects, five annotated blinks each
    let mut recordings = Vec::new();
    for i in 0..4 {
        let spec = scenes::training_subject(i, 5);
        let (events, truth) = synth::generate(&spec)?;
        recordings.push((events, spec.geometry()?, scenes::annotations(&truth)));
    }
    let streams: Vec<AnnotatedStream> = recordings
        .iter()
        .map(|(events, geometry, ann)| AnnotatedStream { events, geometry: *geometry, annotations: ann })
        .collect();
    let model = build_model(&streams, &ModelBuildConfig::default())?;

    let path = dir.join("model.json");
    model.save(BufWriter::new(File::create(&path)?))?;
    let back = BlinkModel::load(BufReader::new(File::open(&path)?))?;
    assert_eq!(back, model);
    println!("saved {} ({} samples every {} us)", path.display(), model.len(), model.rt_us());
    println!("typical events per window at scale 1: {:.0}", model.typical_count(1.0));

    println!("{:>8} {:>8} {:>8}", "t_ms", "on", "off");
    for k in (0..model.len()).step_by(model.len() / 25) {
        println!(
            "{:>8.1} {:>8.2} {:>8.2}",
            (k as u64 * model.rt_us()) as f64 / 1e3,
            model.samples(Polarity::On)[k],
            model.samples(Polarity::Off)[k]
        );
    }
    Ok(())
}
