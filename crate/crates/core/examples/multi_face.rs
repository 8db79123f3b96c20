//! Three faces side by side, each found by its own first blink.
//!
//!     cargo run --example multi_face

use std::sync::Arc;

use blinktrack::eval::{evaluate, EvalConfig};
use blinktrack::pipeline::{run_slice, PipelineConfig};
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let (events, truth) = synth::generate(&scenes::multi_face(2))?;
    let (log, stats) = run_slice(&events, &PipelineConfig::default(), Arc::new(scenes::reference_model()?))?;
    println!("{} faces created from {} detections", stats.faces_created, stats.detections);
    for d in log.detections() {
        println!("{:>6.2} s  face {}  centre ({:.0}, {:.0})", d.t_us as f64 / 1e6, d.face_id, d.cx, d.cy);
    }
    let r = evaluate(&log, &truth, &EvalConfig::default())?;
    for f in &r.per_face {
        println!(
            "truth face {}: {}/{} blinks, first found at {:.2} s, median error {:.2}%",
            f.face_id,
            f.detected,
            f.blinks,
            f.first_detection_us.unwrap_or(0) as f64 / 1e6,
            f.median_error_pct.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
