//! Spatio-temporal support filter.
//!
//! An event is kept when some pixel in its Chebyshev neighbourhood (the
//! event's own pixel included) fired within the support window. The
//! per-pixel timestamp map is written for every event, kept or not, unless
//! `update_on_drop` is switched off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_io::{Event, SensorGeometry};

const NEVER: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub enabled: bool,
    pub radius_px: u16,
    pub window_us: u64,
    pub update_on_drop: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            enabled: true,
            radius_px: 2,
            window_us: 10_000,
            update_on_drop: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radius_px < 1 {
            return Err(Error::Config("filter.radius_px must be >= 1".into()));
        }
        if self.window_us == 0 {
            return Err(Error::Config("filter.window_us must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Drop,
}

#[derive(Debug, Clone)]
pub struct FilterState {
    cfg: FilterConfig,
    width: usize,
    height: usize,
    last: Vec<u64>,
}

impl FilterState {
    pub fn new(geometry: SensorGeometry, cfg: FilterConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FilterState {
            cfg,
            width: geometry.width as usize,
            height: geometry.height as usize,
            last: vec![NEVER; geometry.pixel_count()],
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    /// Last timestamp written for a pixel, `None` if it never fired.
    pub fn last_timestamp(&self, x: u16, y: u16) -> Option<u64> {
        let v = self.last[y as usize * self.width + x as usize];
        (v != NEVER).then_some(v)
    }

    pub fn filter_event(&mut self, ev: &Event) -> Result<Decision> {
        let (x, y) = (ev.x as usize, ev.y as usize);
        if x >= self.width || y >= self.height {
            return Err(Error::Range(format!(
                "pixel ({x}, {y}) outside {}x{} sensor",
                self.width, self.height
            )));
        }
        if !self.cfg.enabled {
            return Ok(Decision::Keep);
        }
        let r = self.cfg.radius_px as usize;
        let x0 = x.saturating_sub(r);
        let x1 = (x + r).min(self.width - 1);
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(self.height - 1);
        let mut supported = false;
        'scan: for qy in y0..=y1 {
            let row = &self.last[qy * self.width + x0..=qy * self.width + x1];
            for &t in row {
                if t != NEVER && ev.t.saturating_sub(t) <= self.cfg.window_us {
                    supported = true;
                    break 'scan;
                }
            }
        }
        let decision = if supported {
            Decision::Keep
        } else {
            Decision::Drop
        };
        if supported || self.cfg.update_on_drop {
            let slot = &mut self.last[y * self.width + x];
            if *slot == NEVER || ev.t > *slot {
                *slot = ev.t;
            }
        }
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(cfg: FilterConfig) -> FilterState {
        FilterState::new(SensorGeometry::ATIS, cfg).unwrap()
    }

    #[test]
    fn first_event_is_dropped() {
        let mut f = state(FilterConfig::default());
        assert_eq!(f.filter_event(&Event::on(10, 10, 0)).unwrap(), Decision::Drop);
        assert_eq!(f.last_timestamp(10, 10), Some(0));
    }

    #[test]
    fn same_pixel_support() {
        let mut f = state(FilterConfig::default());
        f.filter_event(&Event::on(10, 10, 0)).unwrap();
        assert_eq!(
            f.filter_event(&Event::off(10, 10, 1_000)).unwrap(),
            Decision::Keep
        );
    }

    #[test]
    fn support_outside_radius_or_window_does_not_count() {
        let mut f = state(FilterConfig::default());
        f.filter_event(&Event::on(10, 10, 0)).unwrap();
        assert_eq!(f.filter_event(&Event::on(13, 10, 10)).unwrap(), Decision::Drop);
        assert_eq!(
            f.filter_event(&Event::on(12, 12, 10_000)).unwrap(),
            Decision::Keep
        );
        assert_eq!(
            f.filter_event(&Event::on(100, 100, 20_000)).unwrap(),
            Decision::Drop
        );
        // last write at (12,12) was t=10_000; 10_001 µs later it is stale
        assert_eq!(
            f.filter_event(&Event::on(12, 12, 20_001)).unwrap(),
            Decision::Drop
        );
    }

    #[test]
    fn periodic_train_keeps_all_but_first() {
        let mut f = state(FilterConfig::default());
        let decisions: Vec<_> = (0..50)
            .map(|i| f.filter_event(&Event::on(5, 5, i * 9_999)).unwrap())
            .collect();
        assert_eq!(decisions[0], Decision::Drop);
        assert!(decisions[1..].iter().all(|d| *d == Decision::Keep));
    }

    #[test]
    fn bypass_passes_everything() {
        let mut f = state(FilterConfig {
            enabled: false,
            ..FilterConfig::default()
        });
        for i in 0..20u16 {
            let ev = Event::on(i * 15, i * 11, i as u64 * 1_000_000);
            assert_eq!(f.filter_event(&ev).unwrap(), Decision::Keep);
        }
    }

    #[test]
    fn dropped_events_do_not_witness_when_toggled_off() {
        let mut f = state(FilterConfig {
            update_on_drop: false,
            ..FilterConfig::default()
        });
        f.filter_event(&Event::on(10, 10, 0)).unwrap();
        assert_eq!(f.last_timestamp(10, 10), None);
        assert_eq!(f.filter_event(&Event::on(10, 10, 5)).unwrap(), Decision::Drop);
    }

    #[test]
    fn out_of_bounds_is_range_error() {
        let mut f = state(FilterConfig::default());
        assert!(matches!(
            f.filter_event(&Event::on(304, 0, 0)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn corner_neighbourhood_is_clipped() {
        let mut f = state(FilterConfig::default());
        f.filter_event(&Event::on(0, 0, 0)).unwrap();
        assert_eq!(f.filter_event(&Event::on(2, 2, 1)).unwrap(), Decision::Keep);
        f.filter_event(&Event::on(303, 239, 2)).unwrap();
        assert_eq!(
            f.filter_event(&Event::on(301, 237, 3)).unwrap(),
            Decision::Keep
        );
    }
}
