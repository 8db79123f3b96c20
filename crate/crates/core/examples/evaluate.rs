//! Score tracking against ground truth over several noisy scenes.
//!
//!     cargo run --example evaluate

use std::sync::Arc;

use blinktrack::eval::{evaluate, EvalConfig};
use blinktrack::pipeline::{run_slice, PipelineConfig};
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let model = Arc::new(scenes::reference_model()?);
    let cfg = PipelineConfig::default();
    for seed in 0..4 {
        let (events, truth) = synth::generate(&scenes::noisy(seed))?;
        let (log, _) = run_slice(&events, &cfg, model.clone())?;
        let r = evaluate(&log, &truth, &EvalConfig::default())?;
        println!(
            "seed {seed}: blinks {}/{}, false {}, coverage {:.1}%, median error {:.2}%, latency {:.0} ms",
            r.detected_blinks,
            r.truth_blinks,
            r.false_detections,
            r.coverage_pct.unwrap_or(0.0),
            r.median_error_pct.unwrap_or(f64::NAN),
            r.latency_median_us.unwrap_or(f64::NAN) / 1e3
        );
    }

    // the full report for one run
    let (events, truth) = synth::generate(&scenes::noisy(0))?;
    let (log, _) = run_slice(&events, &cfg, model)?;
    print!("\n{}", evaluate(&log, &truth, &EvalConfig::default())?.to_text());
    Ok(())
}
