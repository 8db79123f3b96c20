//! Ready-made synthetic scenes and model training helpers.

use crate::error::Result;
use crate::event_io::{Event, SensorGeometry};
use crate::model::{build_model, AnnotatedStream, BlinkAnnotation, BlinkModel, ModelBuildConfig};
use crate::synth::{generate, BlinkProfile, EyeSide, FaceSpec, GroundTruth, MotionProfile, Occlusion, SceneSpec};

fn face(eye_distance: f64, path: Vec<[f64; 3]>) -> FaceSpec {
    FaceSpec {
        eye_distance,
        path,
        scale_path: Vec::new(),
        blink_times: Vec::new(),
        blink_rate: None,
        blink_preset: None,
        occlusions: Vec::new(),
    }
}

fn scene(duration_us: u64, noise_rate: f64, seed: u64, faces: Vec<FaceSpec>) -> SceneSpec {
    SceneSpec {
        width: SensorGeometry::ATIS.width,
        height: SensorGeometry::ATIS.height,
        duration_us,
        noise_rate,
        seed,
        profile: BlinkProfile::default(),
        motion: MotionProfile::default(),
        faces,
    }
}

/// Waypoints that sweep back and forth between `x0` and `x1` at `speed`
/// px/s, starting at `x0`.
pub fn zigzag(x0: f64, x1: f64, y: f64, speed: f64, duration_us: u64) -> Vec<[f64; 3]> {
    let leg_us = (x1 - x0).abs() / speed * 1e6;
    let mut path = vec![[0.0, x0, y]];
    let mut t = 0.0;
    let mut k = 0;
    while t < duration_us as f64 {
        t += leg_us;
        k += 1;
        path.push([t, if k % 2 == 1 { x1 } else { x0 }, y]);
    }
    path
}

/// Evenly spaced blink centres.
pub fn blink_train(first_us: u64, period_us: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| first_us + k * period_us).collect()
}

/// One "subject" for model training: a still face blinking `blinks` times,
/// one second apart, with light background noise so the recording spans
/// every annotation window.
pub fn training_subject(index: u64, blinks: usize) -> SceneSpec {
    let positions = [(152.0, 130.0), (100.0, 110.0), (200.0, 150.0), (140.0, 90.0)];
    let (x, y) = positions[(index % 4) as usize];
    let mut f = face(40.0, vec![[0.0, x, y]]);
    f.blink_times = blink_train(1_000_000, 1_000_000, blinks);
    let duration = (blinks as u64 + 1) * 1_000_000 + 500_000;
    scene(duration, 200.0, 1_000 + index, vec![f])
}

/// Annotations (one per eye) from ground-truth blinks.
pub fn annotations(truth: &GroundTruth) -> Vec<BlinkAnnotation> {
    truth
        .blinks
        .iter()
        .flat_map(|b| {
            [
                BlinkAnnotation { t: b.t_us, x: b.lx, y: b.ly },
                BlinkAnnotation { t: b.t_us, x: b.rx, y: b.ry },
            ]
        })
        .collect()
}

/// Build a model from generated scenes, annotating each blink at both eyes.
pub fn model_from_scenes(specs: &[SceneSpec], cfg: &ModelBuildConfig) -> Result<BlinkModel> {
    let mut data: Vec<(Vec<Event>, SensorGeometry, Vec<BlinkAnnotation>)> = Vec::new();
    for s in specs {
        let (events, truth) = generate(s)?;
        data.push((events, s.geometry()?, annotations(&truth)));
    }
    let streams: Vec<AnnotatedStream> = data
        .iter()
        .map(|(e, g, a)| AnnotatedStream {
            events: e,
            geometry: *g,
            annotations: a,
        })
        .collect();
    build_model(&streams, cfg)
}

/// The reference model: 20 blinks, five from each of four subjects.
pub fn reference_model() -> Result<BlinkModel> {
    let subjects: Vec<SceneSpec> = (0..4).map(|i| training_subject(i, 5)).collect();
    model_from_scenes(&subjects, &ModelBuildConfig::default())
}

/// Noise-free still face blinking every 1.5 s; for checking detection of
/// clean blinks.
pub fn clean_blinks(seed: u64, blinks: usize) -> SceneSpec {
    let x = 80.0 + (seed % 5) as f64 * 35.0;
    let y = 90.0 + (seed % 3) as f64 * 30.0;
    let mut f = face(40.0, vec![[0.0, x, y]]);
    f.blink_times = blink_train(1_000_000, 1_500_000, blinks);
    let duration = 1_000_000 + blinks as u64 * 1_500_000;
    scene(duration, 0.0, seed, vec![f])
}

/// 30 s scene with 10 k noise events/s and a face drifting at 20 px/s,
/// blinking as a person at rest does.
pub fn noisy(seed: u64) -> SceneSpec {
    let duration = 30_000_000;
    let y = 110.0 + (seed % 4) as f64 * 10.0;
    let mut f = face(40.0, zigzag(90.0, 210.0, y, 20.0, duration));
    f.blink_preset = Some("rest".into());
    scene(duration, 10_000.0, seed, vec![f])
}

/// A face whose eye distance grows from 40 to 200 px over 20 s.
pub fn scale_sweep(seed: u64) -> SceneSpec {
    let duration = 20_000_000;
    let mut f = face(40.0, vec![[0.0, 152.0, 160.0]]);
    f.scale_path = vec![[0.0, 1.0], [duration as f64, 5.0]];
    f.blink_times = blink_train(1_000_000, 2_000_000, 10);
    scene(duration, 1_000.0, seed, vec![f])
}

/// Three faces about 100 px apart blinking at interleaved times.
pub fn multi_face(seed: u64) -> SceneSpec {
    let duration = 20_000_000;
    let centers = [(55.0, 110.0), (152.0, 140.0), (249.0, 110.0)];
    let faces = centers
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let mut f = face(40.0, zigzag(x - 5.0, x + 5.0, y, 5.0, duration));
            f.blink_times = blink_train(1_000_000 + i as u64 * 700_000, 3_000_000, 6);
            f
        })
        .collect();
    scene(duration, 2_000.0, seed, faces)
}

/// A drifting face whose left eye is hidden for 2 s in the middle.
pub fn occlusion(seed: u64, speed: f64) -> SceneSpec {
    let duration = 16_000_000;
    let mut f = face(40.0, zigzag(100.0, 200.0, 130.0, speed, duration));
    f.blink_times = vec![1_000_000, 4_000_000, 7_000_000, 11_000_000, 14_000_000];
    f.occlusions = vec![Occlusion {
        eye: EyeSide::Left,
        start_us: 8_000_000,
        end_us: 10_000_000,
    }];
    scene(duration, 2_000.0, seed, vec![f])
}
