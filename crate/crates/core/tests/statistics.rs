//! Statistical checks of the scene generator and of models built from it.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use blinktrack::model::{ModelBuildConfig, BlinkModel};
use blinktrack::scenes;
use blinktrack::synth::{blink_rate_preset, generate, BlinkProfile, FaceSpec, MotionProfile, SceneSpec};
use blinktrack::event_io::Polarity;

fn empty_scene(duration_us: u64, noise_rate: f64, seed: u64) -> SceneSpec {
    SceneSpec {
        width: 304,
        height: 240,
        duration_us,
        noise_rate,
        seed,
        profile: BlinkProfile::default(),
        motion: MotionProfile::default(),
        faces: vec![],
    }
}

#[test]
fn background_noise_is_poisson() {
    let (events, truth) = generate(&empty_scene(1_000_000, 1_000.0, 5)).unwrap();
    assert!(truth.blinks.is_empty());
    let n = events.len() as f64;
    // total count: Poisson(1000), so within 4 sd
    assert!((n - 1_000.0).abs() < 4.0 * 1_000f64.sqrt(), "{n} events");

    // counts in 100 bins of 10 ms: dispersion statistic ~ chi-square(99)
    let mut bins = [0u32; 100];
    for e in &events {
        bins[(e.t / 10_000) as usize] += 1;
    }
    let mean = n / 100.0;
    let stat: f64 = bins.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
    let chi = ChiSquared::new(99.0).unwrap();
    let p_upper = 1.0 - chi.cdf(stat);
    let p_lower = chi.cdf(stat);
    assert!(p_upper > 0.01 && p_lower > 0.01, "dispersion {stat:.1}, p = {p_upper:.3}");

    // pixels are uniform over the sensor: column counts in 8 bands
    let mut bands = [0u32; 8];
    for e in &events {
        bands[e.x as usize * 8 / 304] += 1;
    }
    let expect = n / 8.0;
    let stat: f64 = bands.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    assert!(1.0 - ChiSquared::new(7.0).unwrap().cdf(stat) > 0.01, "column chi-square {stat:.1}");
}

#[test]
fn preset_blink_rates_are_honoured() {
    for (name, seed) in [("reading", 1u64), ("rest", 2), ("communicating", 3)] {
        let rate = blink_rate_preset(name).unwrap();
        let duration = 600_000_000;
        let mut s = empty_scene(duration, 0.0, seed);
        s.profile.on_budget = 1.0;
        s.profile.off_budget = 1.0;
        s.motion = MotionProfile { eye_events_per_px: 0.0, contour_events_per_px: 0.0, ..MotionProfile::default() };
        s.faces.push(FaceSpec {
            eye_distance: 40.0,
            path: vec![[0.0, 150.0, 120.0]],
            scale_path: vec![],
            blink_times: vec![],
            blink_rate: None,
            blink_preset: Some(name.into()),
            occlusions: vec![],
        });
        let (_, truth) = generate(&s).unwrap();
        let expected = rate * duration as f64 / 60e6;
        let got = truth.blinks.len() as f64;
        // the minimum gap between blinks thins the process slightly, so
        // allow 5 sd plus 10 %
        let tol = 5.0 * expected.sqrt() + 0.1 * expected;
        assert!((got - expected).abs() <= tol, "{name}: {got} blinks, expected {expected:.0}");
    }
}

/// Expected activity of one blink window for polarity `p`, from the
/// generator's rate function, on the model lattice.
fn expected_profile(profile: &BlinkProfile, cfg: &ModelBuildConfig, p: Polarity, noise_rate: f64) -> Vec<f64> {
    // share of an eye's events that land inside the annotation box
    // (half a tile either side, after rounding to pixels)
    let inside = |sigma: f64, half: f64, offset: f64| -> f64 {
        let n = Normal::new(0.0, sigma).unwrap();
        let lo = (offset - half).ceil() as i64;
        let hi = (offset + half).floor() as i64;
        (lo..=hi)
            .map(|k| n.cdf(k as f64 + 0.5 - offset) - n.cdf(k as f64 - 0.5 - offset))
            .sum()
    };
    let (tile_w, tile_h) = (19.0, 15.0);
    // the training faces' eyes sit at integer x and at y = c - 40 / 3
    let fx = inside(profile.sigma_tiles * tile_w, tile_w / 2.0, 0.0);
    let fy = inside(profile.sigma_tiles * tile_h, tile_h / 2.0, 1.0 / 3.0);
    let box_px = 19.0 * 15.0;
    let noise = noise_rate * box_px / (304.0 * 240.0) / 2.0 / 1e6;

    let (t0, span, budget) = match p {
        Polarity::On => (0.0, profile.closure_us as f64, profile.on_budget),
        Polarity::Off => (profile.closure_us as f64, profile.opening_us as f64, profile.off_budget),
    };
    let rate = |t: f64| -> f64 {
        // raised cosine, averaged over the uniform per-eye jitter
        let j = profile.jitter_us as f64;
        let steps = 101;
        let mut acc = 0.0;
        for k in 0..steps {
            let u = t - (-j + 2.0 * j * k as f64 / (steps - 1) as f64) - t0;
            if (0.0..span).contains(&u) {
                acc += budget / span * (1.0 - (std::f64::consts::TAU * u / span).cos());
            }
        }
        fx * fy * acc / steps as f64 + noise
    };
    let h = 10.0;
    let len = cfg.window_us.div_ceil(cfg.rt_us) as usize;
    let mut out = vec![0.0; len];
    let mut a = 0.0;
    let mut t = 0.0;
    let decay = (-h / cfg.tau_us as f64).exp();
    for (k, slot) in out.iter_mut().enumerate() {
        let s = k as f64 * cfg.rt_us as f64;
        while t < s {
            a = a * decay + rate(t + h / 2.0) * h;
            t += h;
        }
        *slot = a;
    }
    // same moving average as the builder
    let w = cfg.smooth_half_width;
    (0..len)
        .map(|k| {
            let lo = k.saturating_sub(w);
            let hi = (k + w).min(len - 1);
            out[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

#[test]
fn model_from_twenty_blinks_matches_generating_profile() {
    let model: BlinkModel = scenes::reference_model().unwrap();
    let cfg = ModelBuildConfig::default();
    let profile = BlinkProfile::default();
    for p in [Polarity::On, Polarity::Off] {
        let want = expected_profile(&profile, &cfg, p, 200.0);
        let got = model.samples(p);
        let peak = want.iter().cloned().fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for (g, w) in got.iter().zip(&want) {
            // relative where the profile is substantial; near zero, relative
            // to a tenth of the peak
            let err = (g - w).abs() / w.max(0.1 * peak);
            worst = worst.max(err);
        }
        assert!(worst <= 0.10, "{p:?}: worst deviation {:.1}% (peak {peak:.1})", 100.0 * worst);
    }
}
