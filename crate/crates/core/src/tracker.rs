//! Bivariate Gaussian eye trackers and the face tracks built from them.
//!
//! Each event is scored against every eye tracker with the normal density
//!
//! ```text
//! p(u) = 1/(2π) · |Σ|^(-1/2) · exp(-½ (u-μ)ᵀ Σ⁻¹ (u-μ))
//! ```
//!
//! and the most probable tracker moves toward the event, `μ ← (1-η)μ + ηu`,
//! provided the event lies within `m_max` Mahalanobis units of it.

use serde::{Deserialize, Serialize};

use crate::detector::{BlinkDetection, FaceRegion};
use crate::error::{Error, Result};
use crate::event_io::{Event, SensorGeometry};

/// Faces narrower than this (pixels between the eyes) are frozen.
pub const MIN_EYE_DISTANCE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub eta: f64,
    pub m_max: f64,
    pub sigma_ratio: f64,
    pub radius_ratio: f64,
    pub occlusion_hold_us: u64,
    /// After creation the reference eye distance follows the trackers for
    /// this long, so it is measured on converged eye positions.
    pub settle_us: u64,
    /// A blink only moves a tracker that is further than this many tiles
    /// (per axis) from the detected eye. Zero always moves it.
    pub reanchor_tiles: f64,
    /// Zero means unlimited.
    pub max_faces: usize,
    /// Zero disables expiry.
    pub idle_expiry_us: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            eta: 0.02,
            m_max: 3.0,
            sigma_ratio: 0.15,
            radius_ratio: 1.2,
            occlusion_hold_us: 2_000_000,
            settle_us: 150_000,
            reanchor_tiles: 1.0,
            max_faces: 0,
            idle_expiry_us: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config("track.eta must lie in (0, 1)".into()));
        }
        if !(self.m_max > 0.0 && self.sigma_ratio > 0.0 && self.radius_ratio > 0.0) {
            return Err(Error::Config(
                "track.m_max, track.sigma_ratio and track.radius_ratio must be > 0".into(),
            ));
        }
        if !(self.reanchor_tiles >= 0.0) {
            return Err(Error::Config("track.reanchor_tiles must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTracker {
    pub mu: [f64; 2],
    /// Symmetric covariance `[[sxx, sxy], [sxy, syy]]`.
    pub cov: [[f64; 2]; 2],
    pub last_update: u64,
}

impl GaussianTracker {
    pub fn isotropic(mu: [f64; 2], sigma: f64, t: u64) -> Self {
        let v = sigma * sigma;
        GaussianTracker {
            mu,
            cov: [[v, 0.0], [0.0, v]],
            last_update: t,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    /// Squared Mahalanobis distance from `μ` to `u`.
    pub fn mahalanobis_sq(&self, u: [f64; 2]) -> Result<f64> {
        let det = self.determinant();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::DegenerateTracker(format!(
                "covariance {:?} is not positive definite",
                self.cov
            )));
        }
        let dx = u[0] - self.mu[0];
        let dy = u[1] - self.mu[1];
        let [[a, b], [_, d]] = self.cov;
        Ok((d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det)
    }

    pub fn probability(&self, u: [f64; 2]) -> Result<f64> {
        let m2 = self.mahalanobis_sq(u)?;
        Ok((-0.5 * m2).exp() / (2.0 * std::f64::consts::PI * self.determinant().sqrt()))
    }

    fn blend_toward(&mut self, u: [f64; 2], eta: f64, t: u64) {
        self.mu[0] = (1.0 - eta) * self.mu[0] + eta * u[0];
        self.mu[1] = (1.0 - eta) * self.mu[1] + eta * u[1];
        self.last_update = t;
    }

    fn clamp_to(&mut self, geometry: SensorGeometry) {
        self.mu[0] = self.mu[0].clamp(0.0, geometry.width as f64 - 1.0);
        self.mu[1] = self.mu[1].clamp(0.0, geometry.height as f64 - 1.0);
    }

    /// Geometric blend of the covariance toward `target_var · I`.
    fn relax_covariance(&mut self, target_var: f64, gain: f64) {
        let current = (self.cov[0][0] + self.cov[1][1]) / 2.0;
        let factor = (target_var / current).powf(gain);
        for row in &mut self.cov {
            for v in row {
                *v *= factor;
            }
        }
    }
}

/// Tracker probability at pixel `u`.
pub fn tracker_probability(tr: &GaussianTracker, u: [f64; 2]) -> Result<f64> {
    tr.probability(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceTrack {
    pub id: u64,
    pub left: GaussianTracker,
    pub right: GaussianTracker,
    pub scale: f64,
    /// Scale assigned when the face was created.
    pub base_scale: f64,
    /// Eye distance that corresponds to `base_scale`.
    pub d_ref: f64,
    pub circle: Circle,
    pub created: u64,
    pub settle_until: u64,
    pub degenerate: bool,
    last_seen: [u64; 2],
}

impl FaceTrack {
    /// A new face from a blink detection, at scale 1.
    pub fn new(id: u64, det: &BlinkDetection, cfg: &TrackerConfig) -> Self {
        let d = (det.right.0 - det.left.0).abs().max(MIN_EYE_DISTANCE);
        let sigma = cfg.sigma_ratio * d;
        let mut face = FaceTrack {
            id,
            left: GaussianTracker::isotropic([det.left.0, det.left.1], sigma, det.t),
            right: GaussianTracker::isotropic([det.right.0, det.right.1], sigma, det.t),
            scale: 1.0,
            base_scale: 1.0,
            d_ref: d,
            circle: Circle {
                cx: 0.0,
                cy: 0.0,
                radius: 1.0,
            },
            created: det.t,
            settle_until: det.t + cfg.settle_us,
            degenerate: false,
            last_seen: [det.t; 2],
        };
        face.update_circle(cfg);
        face
    }

    pub fn eye(&self, side: Side) -> &GaussianTracker {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn eye_mut(&mut self, side: Side) -> &mut GaussianTracker {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn eye_distance(&self) -> f64 {
        (self.right.mu[0] - self.left.mu[0]).abs()
    }

    pub fn region(&self) -> FaceRegion {
        FaceRegion {
            id: self.id,
            cx: self.circle.cx,
            cy: self.circle.cy,
            radius: self.circle.radius,
            scale: self.scale,
        }
    }

    /// Time of the most recent accepted event on either eye.
    pub fn last_activity(&self) -> u64 {
        self.last_seen[0].max(self.last_seen[1])
    }

    fn normalize_sides(&mut self) {
        if self.left.mu[0] > self.right.mu[0] {
            std::mem::swap(&mut self.left, &mut self.right);
            self.last_seen.swap(0, 1);
        }
    }

    fn update_circle(&mut self, cfg: &TrackerConfig) {
        let d = self.eye_distance();
        self.circle = Circle {
            cx: (self.left.mu[0] + self.right.mu[0]) / 2.0,
            cy: (self.left.mu[1] + self.right.mu[1]) / 2.0 + d / 3.0,
            radius: (cfg.radius_ratio * d).max(f64::MIN_POSITIVE),
        };
    }

    /// Recompute scale, covariances and face circle from the eye positions.
    pub fn refresh_face_geometry(&mut self, cfg: &TrackerConfig, t: u64) {
        self.normalize_sides();
        let d = self.eye_distance();
        if d < MIN_EYE_DISTANCE {
            self.degenerate = true;
            return;
        }
        if t < self.settle_until {
            self.d_ref = d;
        }
        self.scale = self.base_scale * d / self.d_ref;
        let target = (cfg.sigma_ratio * d).powi(2);
        self.left.relax_covariance(target, cfg.eta);
        self.right.relax_covariance(target, cfg.eta);
        self.update_circle(cfg);
    }

    /// Pull trackers that strayed back onto the detected eyes.
    pub fn reanchor(&mut self, det: &BlinkDetection, cfg: &TrackerConfig, tile: (f64, f64), t: u64) {
        self.normalize_sides();
        let (tol_x, tol_y) = (cfg.reanchor_tiles * tile.0, cfg.reanchor_tiles * tile.1);
        for (side, target) in [(Side::Left, det.left), (Side::Right, det.right)] {
            let eye = self.eye_mut(side);
            let astray = (eye.mu[0] - target.0).abs() > tol_x || (eye.mu[1] - target.1).abs() > tol_y;
            if cfg.reanchor_tiles == 0.0 || astray {
                eye.mu = [target.0, target.1];
            }
            eye.last_update = t;
        }
        self.last_seen = [t; 2];
        self.normalize_sides();
        let d = self.eye_distance();
        if d < MIN_EYE_DISTANCE {
            self.degenerate = true;
            return;
        }
        self.degenerate = false;
        let sigma = cfg.sigma_ratio * d;
        self.left = GaussianTracker::isotropic(self.left.mu, sigma, t);
        self.right = GaussianTracker::isotropic(self.right.mu, sigma, t);
        if t < self.settle_until {
            self.d_ref = d;
        }
        self.scale = self.base_scale * d / self.d_ref;
        self.update_circle(cfg);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub face_id: u64,
    pub side: Side,
    pub accepted: bool,
    pub mahalanobis: f64,
}

/// Score `ev` against every live tracker, update the winner if it is close
/// enough, and return the assignment. `None` when no live face exists.
pub fn assign_and_update(
    faces: &mut [FaceTrack],
    ev: &Event,
    cfg: &TrackerConfig,
    geometry: SensorGeometry,
) -> Result<Option<(usize, Assignment)>> {
    let u = [ev.x as f64, ev.y as f64];
    let mut best: Option<(usize, Side, f64, f64)> = None;
    for (i, face) in faces.iter().enumerate() {
        if face.degenerate {
            continue;
        }
        for side in [Side::Left, Side::Right] {
            let tr = face.eye(side);
            let m2 = tr.mahalanobis_sq(u)?;
            let p = (-0.5 * m2).exp() / (2.0 * std::f64::consts::PI * tr.determinant().sqrt());
            if best.is_none_or(|(_, _, bp, _)| p > bp) {
                best = Some((i, side, p, m2));
            }
        }
    }
    let Some((i, side, _, m2)) = best else {
        return Ok(None);
    };
    let m = m2.sqrt();
    let accepted = m <= cfg.m_max;
    let face = &mut faces[i];
    if accepted {
        let before = face.eye(side).mu;
        let eye = face.eye_mut(side);
        eye.blend_toward(u, cfg.eta, ev.t);
        eye.clamp_to(geometry);
        let after = eye.mu;
        let k = side as usize;
        face.last_seen[k] = ev.t;
        // rigid follow for an eye that has been silent too long
        let other = 1 - k;
        if ev.t.saturating_sub(face.last_seen[other]) >= cfg.occlusion_hold_us {
            let other_side = if other == 0 { Side::Left } else { Side::Right };
            let o = face.eye_mut(other_side);
            o.mu[0] += after[0] - before[0];
            o.mu[1] += after[1] - before[1];
            o.clamp_to(geometry);
        }
    }
    Ok(Some((
        i,
        Assignment {
            face_id: face.id,
            side,
            accepted,
            mahalanobis: m,
        },
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::GridId;
    use crate::correlator::BlinkCandidate;

    fn detection(l: (f64, f64), r: (f64, f64), t: u64) -> BlinkDetection {
        let c = BlinkCandidate {
            grid: GridId::G0,
            r: 0,
            c: 0,
            x: l.0,
            y: l.1,
            t,
            score: 1.0,
        };
        BlinkDetection {
            left: l,
            right: r,
            t,
            scale: 1.0,
            face_id: None,
            pair: [c, c],
        }
    }

    #[test]
    fn density_at_mean_of_unit_gaussian() {
        let tr = GaussianTracker::isotropic([10.0, 20.0], 1.0, 0);
        let p = tracker_probability(&tr, [10.0, 20.0]).unwrap();
        assert!((p - 0.159_154_943_091_895_35).abs() < 1e-15);
    }

    #[test]
    fn density_at_mahalanobis_two() {
        let tr = GaussianTracker::isotropic([0.0, 0.0], 2.0, 0);
        let p = tr.probability([4.0, 0.0]).unwrap();
        let expect = (-2f64).exp() / (2.0 * std::f64::consts::PI * 4.0);
        assert!((p - expect).abs() < 1e-15);
        assert!((p - 0.005_385).abs() < 1e-6);
    }

    #[test]
    fn singular_covariance_is_degenerate() {
        let mut tr = GaussianTracker::isotropic([0.0, 0.0], 1.0, 0);
        tr.cov = [[1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(tr.probability([0.0, 0.0]), Err(Error::DegenerateTracker(_))));
    }

    #[test]
    fn face_circle_geometry() {
        let cfg = TrackerConfig::default();
        let face = FaceTrack::new(0, &detection((100.0, 100.0), (160.0, 100.0), 0), &cfg);
        assert_eq!((face.circle.cx, face.circle.cy), (130.0, 120.0));
        assert!((face.circle.radius - 72.0).abs() < 1e-12);
        assert_eq!(face.scale, 1.0);
    }

    #[test]
    fn scale_doubles_with_eye_distance() {
        let cfg = TrackerConfig::default();
        let mut face = FaceTrack::new(0, &detection((100.0, 100.0), (140.0, 100.0), 0), &cfg);
        face.left.mu[0] = 80.0;
        face.right.mu[0] = 160.0;
        face.refresh_face_geometry(&cfg, cfg.settle_us + 1);
        assert_eq!(face.scale, 2.0);
    }

    #[test]
    fn settling_tracks_reference_distance() {
        let cfg = TrackerConfig::default();
        let mut face = FaceTrack::new(0, &detection((100.0, 100.0), (140.0, 100.0), 0), &cfg);
        face.right.mu[0] = 135.0;
        face.refresh_face_geometry(&cfg, 1_000);
        assert_eq!((face.scale, face.d_ref), (1.0, 35.0));
    }

    #[test]
    fn narrow_face_freezes() {
        let cfg = TrackerConfig::default();
        let mut face = FaceTrack::new(0, &detection((100.0, 100.0), (140.0, 100.0), 0), &cfg);
        face.right.mu[0] = 102.0;
        face.refresh_face_geometry(&cfg, 10);
        assert!(face.degenerate);
        let mut faces = vec![face];
        let out = assign_and_update(
            &mut faces,
            &Event::on(100, 100, 20),
            &cfg,
            SensorGeometry::ATIS,
        )
        .unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn event_at_mean_is_a_fixed_point() {
        let cfg = TrackerConfig::default();
        let mut faces = vec![FaceTrack::new(
            3,
            &detection((100.0, 100.0), (140.0, 100.0), 0),
            &cfg,
        )];
        let (_, a) = assign_and_update(&mut faces, &Event::on(140, 100, 5), &cfg, SensorGeometry::ATIS)
            .unwrap()
            .unwrap();
        assert_eq!((a.face_id, a.side, a.accepted), (3, Side::Right, true));
        assert_eq!(faces[0].right.mu, [140.0, 100.0]);
    }

    #[test]
    fn far_event_is_rejected_without_state_change() {
        let cfg = TrackerConfig::default();
        // eye distance 100/3 gives σ = 5 px
        let det = detection((100.0, 100.0), (100.0 + 100.0 / 3.0, 100.0), 0);
        let mut faces = vec![FaceTrack::new(0, &det, &cfg)];
        assert!((faces[0].left.cov[0][0].sqrt() - 5.0).abs() < 1e-12);
        let before = faces.clone();
        let (_, a) = assign_and_update(&mut faces, &Event::on(250, 200, 5), &cfg, SensorGeometry::ATIS)
            .unwrap()
            .unwrap();
        assert!(!a.accepted);
        assert_eq!(faces, before);
    }

    #[test]
    fn reanchor_moves_only_stray_trackers_and_orders_sides() {
        let cfg = TrackerConfig::default();
        let tile = (19.0, 15.0);
        let mut face = FaceTrack::new(0, &detection((100.0, 100.0), (140.0, 100.0), 0), &cfg);
        face.left.mu = [60.0, 100.0];
        face.right.mu = [142.0, 101.0];
        let det = detection((100.0, 100.0), (140.0, 100.0), 1_000_000);
        face.reanchor(&det, &cfg, tile, 1_000_000);
        assert_eq!(face.left.mu, [100.0, 100.0]);
        assert_eq!(face.right.mu, [142.0, 101.0]);

        // reversed detection order still yields x_left < x_right
        let strict = TrackerConfig {
            reanchor_tiles: 0.0,
            ..cfg
        };
        let mut rev = detection((100.0, 100.0), (140.0, 100.0), 2_000_000);
        std::mem::swap(&mut rev.left, &mut rev.right);
        face.reanchor(&rev, &strict, tile, 2_000_000);
        assert!(face.left.mu[0] < face.right.mu[0]);
        assert_eq!(face.left.mu, [100.0, 100.0]);
        assert_eq!(face.right.mu, [140.0, 100.0]);
    }

    #[test]
    fn reanchor_at_same_place_only_resets_covariance() {
        let cfg = TrackerConfig::default();
        let det = detection((100.0, 100.0), (140.0, 100.0), 0);
        let mut face = FaceTrack::new(0, &det, &cfg);
        face.left.cov = [[50.0, 1.0], [1.0, 40.0]];
        face.reanchor(&det, &cfg, (19.0, 15.0), 0);
        assert_eq!(face.left.mu, [100.0, 100.0]);
        assert_eq!(face.right.mu, [140.0, 100.0]);
        assert_eq!(face.left.cov, [[36.0, 0.0], [0.0, 36.0]]);
    }

    #[test]
    fn rigid_follow_after_hold() {
        let cfg = TrackerConfig {
            occlusion_hold_us: 1_000,
            ..TrackerConfig::default()
        };
        let det = detection((100.0, 100.0), (140.0, 100.0), 0);
        let mut faces = vec![FaceTrack::new(0, &det, &cfg)];
        assign_and_update(&mut faces, &Event::on(145, 100, 5_000), &cfg, SensorGeometry::ATIS)
            .unwrap();
        let dx = faces[0].right.mu[0] - 140.0;
        assert!(dx > 0.0);
        assert!((faces[0].left.mu[0] - (100.0 + dx)).abs() < 1e-12);
    }
}
