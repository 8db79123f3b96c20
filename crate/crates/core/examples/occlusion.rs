//! One eye disappears for two seconds; the face keeps being tracked from
//! the visible eye and snaps back at the next blink.
//!
//!     cargo run --example occlusion

use std::sync::Arc;

use blinktrack::eval::{error_series, EvalConfig};
use blinktrack::pipeline::{run_slice, PipelineConfig};
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let (events, truth) = synth::generate(&scenes::occlusion(0, 10.0))?;
    let (log, _) = run_slice(&events, &PipelineConfig::default(), Arc::new(scenes::reference_model()?))?;
    let series = error_series(&log, &truth, &EvalConfig::default());

    println!("left eye hidden from 8 s to 10 s; blinks at 1, 4, 7, 11, 14 s");
    println!("{:>6} {:>10}", "t_s", "error_%");
    for (s, err) in series.iter().filter(|(s, _)| s.t_us % 500_000 == 0) {
        match err {
            Some(e) => println!("{:>6.1} {:>10.2}", s.t_us as f64 / 1e6, e),
            None => println!("{:>6.1} {:>10}", s.t_us as f64 / 1e6, "-"),
        }
    }
    Ok(())
}
