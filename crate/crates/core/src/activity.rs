//! Dual overlapping tile grids with per-tile, per-polarity exponentially
//! decaying activity.
//!
//! Grid `G0` splits the sensor into 16×16 tiles of `⌈width/16⌉ × ⌈height/16⌉`
//! pixels (19×15 at 304×240); right and bottom tiles clip at the sensor
//! edge. Grid `G1` is a 15×15 grid of the same tile size shifted by half a
//! tile in both directions, so it leaves a half-tile frame uncovered.
//!
//! Activity is stored lazily as `(value, last time)` and decayed on access:
//!
//! ```text
//! A_p(t_i) = A_p(t_prev) · exp(-(t_i - t_prev) / τ) + 1 / scale
//! ```

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_io::{Event, Polarity, SensorGeometry};

pub const G0_TILES: u16 = 16;
pub const G1_TILES: u16 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityConfig {
    pub tau_us: u64,
    pub window_us: u64,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        ActivityConfig {
            tau_us: 50_000,
            window_us: 250_000,
        }
    }
}

impl ActivityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_us == 0 {
            return Err(Error::Config("activity.tau_us must be > 0".into()));
        }
        if self.window_us == 0 {
            return Err(Error::Config("activity.window_us must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GridId {
    G0,
    G1,
}

/// A tile address: grid plus row/column inside that grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileRef {
    pub grid: GridId,
    pub r: u16,
    pub c: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub id: GridId,
    pub rows: u16,
    pub cols: u16,
    pub tile_w: u16,
    pub tile_h: u16,
    pub offset_x: u16,
    pub offset_y: u16,
    pub width: u16,
    pub height: u16,
}

impl GridLayout {
    pub fn new(id: GridId, geometry: SensorGeometry) -> Self {
        let tile_w = geometry.width.div_ceil(G0_TILES);
        let tile_h = geometry.height.div_ceil(G0_TILES);
        let (n, ox, oy) = match id {
            GridId::G0 => (G0_TILES, 0, 0),
            GridId::G1 => (G1_TILES, tile_w / 2, tile_h / 2),
        };
        GridLayout {
            id,
            rows: n,
            cols: n,
            tile_w,
            tile_h,
            offset_x: ox,
            offset_y: oy,
            width: geometry.width,
            height: geometry.height,
        }
    }

    pub fn tile_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// Tile holding pixel `(x, y)`, if this grid covers it.
    pub fn tile_at(&self, x: u16, y: u16) -> Option<TileRef> {
        let (x, y) = (x.checked_sub(self.offset_x)?, y.checked_sub(self.offset_y)?);
        let c = x / self.tile_w;
        let r = y / self.tile_h;
        (c < self.cols && r < self.rows).then_some(TileRef {
            grid: self.id,
            r,
            c,
        })
    }

    /// Pixel span `[x0, x1) × [y0, y1)` of a tile, clipped at the sensor edge.
    pub fn tile_span(&self, r: u16, c: u16) -> (u16, u16, u16, u16) {
        let x0 = (self.offset_x + c * self.tile_w).min(self.width);
        let y0 = (self.offset_y + r * self.tile_h).min(self.height);
        let x1 = (x0 + self.tile_w).min(self.width);
        let y1 = (y0 + self.tile_h).min(self.height);
        (x0, x1, y0, y1)
    }

    /// Pixel-coordinate centre of a tile's (clipped) span.
    pub fn tile_center(&self, r: u16, c: u16) -> (f64, f64) {
        let (x0, x1, y0, y1) = self.tile_span(r, c);
        (
            (x0 as f64 + x1.max(x0 + 1) as f64 - 1.0) / 2.0,
            (y0 as f64 + y1.max(y0 + 1) as f64 - 1.0) / 2.0,
        )
    }
}

/// Both grids for one sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualGrid {
    pub g0: GridLayout,
    pub g1: GridLayout,
}

impl DualGrid {
    pub fn new(geometry: SensorGeometry) -> Self {
        DualGrid {
            g0: GridLayout::new(GridId::G0, geometry),
            g1: GridLayout::new(GridId::G1, geometry),
        }
    }

    pub fn layout(&self, id: GridId) -> &GridLayout {
        match id {
            GridId::G0 => &self.g0,
            GridId::G1 => &self.g1,
        }
    }

    pub fn tile_w(&self) -> u16 {
        self.g0.tile_w
    }

    pub fn tile_h(&self) -> u16 {
        self.g0.tile_h
    }

    pub fn tiles_of(&self, x: u16, y: u16) -> Result<(TileRef, Option<TileRef>)> {
        if x >= self.g0.width || y >= self.g0.height {
            return Err(Error::Range(format!(
                "pixel ({x}, {y}) outside {}x{} sensor",
                self.g0.width, self.g0.height
            )));
        }
        let t0 = self
            .g0
            .tile_at(x, y)
            .expect("G0 covers every in-bounds pixel");
        Ok((t0, self.g1.tile_at(x, y)))
    }

    pub fn tile_center(&self, tile: TileRef) -> (f64, f64) {
        self.layout(tile.grid).tile_center(tile.r, tile.c)
    }

    /// Dense index over both grids: G0 tiles first, then G1.
    pub fn flat_index(&self, tile: TileRef) -> usize {
        match tile.grid {
            GridId::G0 => tile.r as usize * self.g0.cols as usize + tile.c as usize,
            GridId::G1 => {
                self.g0.tile_count() + tile.r as usize * self.g1.cols as usize + tile.c as usize
            }
        }
    }

    pub fn total_tiles(&self) -> usize {
        self.g0.tile_count() + self.g1.tile_count()
    }

    pub fn tile_at_flat(&self, index: usize) -> TileRef {
        let n0 = self.g0.tile_count();
        if index < n0 {
            let cols = self.g0.cols as usize;
            TileRef {
                grid: GridId::G0,
                r: (index / cols) as u16,
                c: (index % cols) as u16,
            }
        } else {
            let i = index - n0;
            let cols = self.g1.cols as usize;
            TileRef {
                grid: GridId::G1,
                r: (i / cols) as u16,
                c: (i % cols) as u16,
            }
        }
    }
}

/// One applied event inside the correlation window. `activity` is the
/// tile's activity for `p` right after the event's increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingEntry {
    pub t: u64,
    pub p: Polarity,
    pub activity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TileActivity {
    value: [f64; 2],
    last: [Option<u64>; 2],
    ring: VecDeque<RingEntry>,
}

impl TileActivity {
    pub fn new() -> Self {
        Self::default()
    }

    /// Apply one event and return the new activity for its polarity.
    pub fn update_activity(&mut self, ev: &Event, cfg: &ActivityConfig, scale: f64) -> Result<f64> {
        let k = ev.p.index();
        if let Some(newest) = self.ring.back() {
            if ev.t < newest.t {
                return Err(Error::Order(format!(
                    "event at t={} precedes tile's newest event at t={}",
                    ev.t, newest.t
                )));
            }
        }
        if let Some(prev) = self.last[k] {
            if ev.t < prev {
                return Err(Error::Order(format!(
                    "event at t={} precedes previous {:?} event at t={prev}",
                    ev.t, ev.p
                )));
            }
        }
        let decayed = match self.last[k] {
            Some(prev) => self.value[k] * decay(ev.t - prev, cfg.tau_us),
            None => 0.0,
        };
        let value = decayed + 1.0 / scale;
        self.value[k] = value;
        self.last[k] = Some(ev.t);
        self.ring.push_back(RingEntry {
            t: ev.t,
            p: ev.p,
            activity: value,
        });
        self.prune(ev.t, cfg.window_us);
        Ok(value)
    }

    fn prune(&mut self, now: u64, window_us: u64) {
        let cutoff = now.saturating_sub(window_us);
        while self.ring.front().is_some_and(|e| e.t < cutoff) {
            self.ring.pop_front();
        }
    }

    /// Decayed activity at time `t`; no state change. Times before the last
    /// event return the stored value.
    pub fn sample_activity(&self, t: u64, p: Polarity, tau_us: u64) -> f64 {
        let k = p.index();
        match self.last[k] {
            Some(prev) => self.value[k] * decay(t.saturating_sub(prev), tau_us),
            None => 0.0,
        }
    }

    pub fn stored(&self, p: Polarity) -> (f64, Option<u64>) {
        (self.value[p.index()], self.last[p.index()])
    }

    pub fn ring(&self) -> &VecDeque<RingEntry> {
        &self.ring
    }

    pub fn ring_len(&self) -> usize {
        self.ring.len()
    }
}

#[inline]
pub fn decay(dt_us: u64, tau_us: u64) -> f64 {
    (-(dt_us as f64) / tau_us as f64).exp()
}

/// Activity state for every tile of both grids.
#[derive(Debug, Clone)]
pub struct ActivityGrid {
    grid: DualGrid,
    cfg: ActivityConfig,
    tiles: Vec<TileActivity>,
}

impl ActivityGrid {
    pub fn new(geometry: SensorGeometry, cfg: ActivityConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = DualGrid::new(geometry);
        Ok(ActivityGrid {
            grid,
            cfg,
            tiles: vec![TileActivity::new(); grid.total_tiles()],
        })
    }

    pub fn layout(&self) -> &DualGrid {
        &self.grid
    }

    pub fn config(&self) -> &ActivityConfig {
        &self.cfg
    }

    pub fn tile(&self, tile: TileRef) -> &TileActivity {
        &self.tiles[self.grid.flat_index(tile)]
    }

    /// Route an event into the one or two tiles holding its pixel. Returns
    /// the touched tiles.
    pub fn apply(&mut self, ev: &Event, scale: f64) -> Result<(TileRef, Option<TileRef>)> {
        let (t0, t1) = self.grid.tiles_of(ev.x, ev.y)?;
        let i0 = self.grid.flat_index(t0);
        self.tiles[i0].update_activity(ev, &self.cfg, scale)?;
        if let Some(t1) = t1 {
            let i1 = self.grid.flat_index(t1);
            self.tiles[i1].update_activity(ev, &self.cfg, scale)?;
        }
        Ok((t0, t1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: ActivityConfig = ActivityConfig {
        tau_us: 50_000,
        window_us: 250_000,
    };

    #[test]
    fn atis_tiles_are_19_by_15() {
        let g = DualGrid::new(SensorGeometry::ATIS);
        assert_eq!((g.tile_w(), g.tile_h()), (19, 15));
        assert_eq!((g.g1.offset_x, g.g1.offset_y), (9, 7));
    }

    #[test]
    fn corner_pixel_has_no_g1_tile() {
        let g = DualGrid::new(SensorGeometry::ATIS);
        let (t0, t1) = g.tiles_of(0, 0).unwrap();
        assert_eq!((t0.r, t0.c), (0, 0));
        assert!(t1.is_none());
    }

    #[test]
    fn integer_division_mapping() {
        let g = DualGrid::new(SensorGeometry::ATIS);
        let (t0, t1) = g.tiles_of(58, 62).unwrap();
        assert_eq!((t0.grid, t0.r, t0.c), (GridId::G0, 4, 3));
        let t1 = t1.unwrap();
        assert_eq!((t1.r, t1.c), ((62 - 7) / 15, (58 - 9) / 19));
    }

    #[test]
    fn out_of_bounds_pixel() {
        let g = DualGrid::new(SensorGeometry::ATIS);
        assert!(matches!(g.tiles_of(304, 0), Err(Error::Range(_))));
        assert!(matches!(g.tiles_of(0, 240), Err(Error::Range(_))));
    }

    #[test]
    fn tile_centers() {
        let g = DualGrid::new(SensorGeometry::ATIS);
        assert_eq!(g.g0.tile_center(0, 0), (9.0, 7.0));
        assert_eq!(g.g1.tile_center(0, 0), (18.0, 14.0));
    }

    #[test]
    fn first_increment_is_inverse_scale() {
        let mut tile = TileActivity::new();
        assert_eq!(tile.update_activity(&Event::on(0, 0, 0), &CFG, 1.0).unwrap(), 1.0);
        assert_eq!(tile.update_activity(&Event::off(0, 0, 0), &CFG, 4.0).unwrap(), 0.25);
    }

    #[test]
    fn decay_over_one_tau() {
        let mut tile = TileActivity::new();
        tile.update_activity(&Event::on(0, 0, 0), &CFG, 1.0).unwrap();
        let a = tile.update_activity(&Event::on(0, 0, 50_000), &CFG, 1.0).unwrap();
        assert!((a - 1.367_879_441_171_442_3).abs() < 1e-12);
        assert_eq!(tile.stored(Polarity::Off), (0.0, None));
    }

    #[test]
    fn sampling() {
        let mut tile = TileActivity::new();
        assert_eq!(tile.sample_activity(123, Polarity::On, 50_000), 0.0);
        tile.update_activity(&Event::on(0, 0, 1_000), &CFG, 1.0).unwrap();
        tile.update_activity(&Event::on(0, 0, 2_000), &CFG, 1.0).unwrap();
        let (stored, _) = tile.stored(Polarity::On);
        assert_eq!(tile.sample_activity(2_000, Polarity::On, 50_000), stored);
        let later = tile.sample_activity(52_000, Polarity::On, 50_000);
        assert!(((later / stored) - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn time_regression_is_order_error() {
        let mut tile = TileActivity::new();
        tile.update_activity(&Event::on(0, 0, 10), &CFG, 1.0).unwrap();
        assert!(matches!(
            tile.update_activity(&Event::on(0, 0, 9), &CFG, 1.0),
            Err(Error::Order(_))
        ));
        // equal timestamps are fine
        tile.update_activity(&Event::on(0, 0, 10), &CFG, 1.0).unwrap();
    }

    #[test]
    fn ring_is_pruned_to_window() {
        let mut tile = TileActivity::new();
        for i in 0..100u64 {
            tile.update_activity(&Event::on(0, 0, i * 10_000), &CFG, 1.0).unwrap();
        }
        let newest = tile.ring().back().unwrap().t;
        assert!(tile.ring().iter().all(|e| newest - e.t <= CFG.window_us));
        assert_eq!(tile.ring_len(), 26);
    }

    #[test]
    fn interior_pixels_touch_two_tiles() {
        let mut grid = ActivityGrid::new(SensorGeometry::ATIS, CFG).unwrap();
        let (t0, t1) = grid.apply(&Event::on(100, 100, 0), 1.0).unwrap();
        let t1 = t1.unwrap();
        assert_eq!(grid.tile(t0).ring_len(), 1);
        assert_eq!(grid.tile(t1).ring_len(), 1);
        let touched = (0..grid.layout().total_tiles())
            .filter(|&i| grid.tile(grid.layout().tile_at_flat(i)).ring_len() > 0)
            .count();
        assert_eq!(touched, 2);
    }
}
