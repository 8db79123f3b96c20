//! Run the background-activity filter over a noisy scene and report how
//! much of the noise and of the face survives.
//!
//!     cargo run --example noise_filter

use blinktrack::noise_filter::{Decision, FilterConfig, FilterState};
use blinktrack::{scenes, synth};

fn main() -> blinktrack::Result<()> {
    let spec = scenes::noisy(0);
    let (events, truth) = synth::generate(&spec)?;
    let mut filter = FilterState::new(spec.geometry()?, FilterConfig::default())?;

    // events far from the face are background noise
    let near_face = |x: u16, y: u16, t: u64| {
        let s = truth.trajectory[(t / synth::TRUTH_TICK_US) as usize % truth.trajectory.len()];
        (x as f64 - s.cx).abs() < 2.0 * s.d_eyes && (y as f64 - s.cy).abs() < 2.0 * s.d_eyes
    };
    let (mut face, mut face_kept, mut bg, mut bg_kept) = (0u64, 0u64, 0u64, 0u64);
    for ev in &events {
        let kept = filter.filter_event(ev)? == Decision::Keep;
        if near_face(ev.x, ev.y, ev.t) {
            face += 1;
            face_kept += kept as u64;
        } else {
            bg += 1;
            bg_kept += kept as u64;
        }
    }
    println!("{} events over {:.0} s", events.len(), spec.duration_us as f64 / 1e6);
    println!("near the face: kept {face_kept} of {face} ({:.1}%)", 100.0 * face_kept as f64 / face as f64);
    println!("background:    kept {bg_kept} of {bg} ({:.1}%)", 100.0 * bg_kept as f64 / bg as f64);
    Ok(())
}
