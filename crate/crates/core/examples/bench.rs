//! Measure throughput of the full pipeline and of the filter alone.
//!
//!     cargo run --release --example bench

use std::sync::Arc;

use blinktrack::eval::bench::{bench, BenchMode};
use blinktrack::pipeline::PipelineConfig;
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let model = Arc::new(scenes::reference_model()?);
    let (events, _) = synth::generate(&scenes::noisy(0))?;
    let cfg = PipelineConfig::default();
    for mode in [BenchMode::Full, BenchMode::FilterOnly] {
        let report = bench(&events, &cfg, model.clone(), 3, mode)?;
        println!("-- {mode:?}");
        print!("{}", report.to_text());
    }
    Ok(())
}
