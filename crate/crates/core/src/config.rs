//! Flat `key = value` configuration shared by the command-line tools.
//!
//! Lines are `section.name = value`; blank lines and `#` comments are
//! ignored. Later assignments win, so applying defaults, then a file, then
//! `--set` overrides gives the usual precedence.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event_io::SensorGeometry;
use crate::pipeline::PipelineConfig;

type Getter = fn(&PipelineConfig) -> String;
type Setter = fn(&mut PipelineConfig, &str) -> Result<()>;

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if !v.is_finite() {
        return Err(Error::Config(format!("`{key}` must be finite")));
    }
    Ok(v)
}

macro_rules! keys {
    ($( $key:literal => $($field:ident).+ : $kind:ident ),* $(,)?) => {
        &[ $( ($key,
            (|c: &PipelineConfig| keys!(@get $kind, c.$($field).+)) as Getter,
            (|c: &mut PipelineConfig, v: &str| { c.$($field).+ = keys!(@set $kind, $key, v)?; Ok(()) }) as Setter,
        ) ),* ]
    };
    (@get f64, $e:expr) => { format!("{:?}", $e) };
    (@get $other:ident, $e:expr) => { $e.to_string() };
    (@set f64, $key:expr, $v:expr) => { parse_f64($key, $v) };
    (@set $t:ident, $key:expr, $v:expr) => { parse::<$t>($key, $v) };
}

const KEYS: &[(&str, Getter, Setter)] = keys! {
    "filter.enabled" => filter.enabled: bool,
    "filter.radius_px" => filter.radius_px: u16,
    "filter.window_us" => filter.window_us: u64,
    "filter.update_on_drop" => filter.update_on_drop: bool,
    "activity.tau_us" => activity.tau_us: u64,
    "activity.window_us" => activity.window_us: u64,
    "corr.threshold" => correlator.threshold: f64,
    "corr.gate_beta" => correlator.gate_beta: f64,
    "corr.refractory_us" => correlator.refractory_us: u64,
    "corr.raw_score" => correlator.raw_score: bool,
    "detect.dt_max_us" => detector.dt_max_us: u64,
    "detect.dh_max_px" => detector.dh_max_px: f64,
    "detect.dv_max_px" => detector.dv_max_px: f64,
    "detect.min_sep_tiles" => detector.min_sep_tiles: f64,
    "detect.face_margin" => detector.face_margin: f64,
    "track.eta" => tracker.eta: f64,
    "track.m_max" => tracker.m_max: f64,
    "track.sigma_ratio" => tracker.sigma_ratio: f64,
    "track.radius_ratio" => tracker.radius_ratio: f64,
    "track.occlusion_hold_us" => tracker.occlusion_hold_us: u64,
    "track.settle_us" => tracker.settle_us: u64,
    "track.reanchor_tiles" => tracker.reanchor_tiles: f64,
    "track.max_faces" => tracker.max_faces: usize,
    "track.idle_expiry_us" => tracker.idle_expiry_us: u64,
    "pipeline.tick_us" => tick_us: u64,
    "pipeline.literal_alg2" => literal_alg2: bool,
};

/// The effective configuration of one command invocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliConfig {
    pub pipeline: PipelineConfig,
}

impl CliConfig {
    /// All recognised keys, in print order.
    pub fn keys() -> Vec<&'static str> {
        let mut k = vec!["sensor.width", "sensor.height"];
        k.extend(KEYS.iter().map(|(name, _, _)| *name));
        k.insert(k.iter().position(|n| *n == "corr.raw_score").unwrap(), "corr.alpha");
        k
    }

    pub fn get(&self, key: &str) -> Result<String> {
        let p = &self.pipeline;
        match key {
            "sensor.width" => Ok(p.geometry.width.to_string()),
            "sensor.height" => Ok(p.geometry.height.to_string()),
            // "model" means: use the alpha stored in the model file
            "corr.alpha" => Ok(p.correlator.alpha.map_or("model".into(), |a| format!("{a:?}"))),
            _ => KEYS
                .iter()
                .find(|(k, _, _)| *k == key)
                .map(|(_, get, _)| get(p))
                .ok_or_else(|| Error::Config(format!("unknown key `{key}`"))),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let p = &mut self.pipeline;
        match key {
            "sensor.width" => p.geometry = SensorGeometry::new(parse(key, value)?, p.geometry.height)?,
            "sensor.height" => p.geometry = SensorGeometry::new(p.geometry.width, parse(key, value)?)?,
            "corr.alpha" => {
                p.correlator.alpha = match value {
                    "model" => None,
                    v => Some(parse_f64(key, v)?),
                }
            }
            _ => {
                let (_, _, set) = KEYS
                    .iter()
                    .find(|(k, _, _)| *k == key)
                    .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
                set(p, value)?;
            }
        }
        Ok(())
    }

    /// Apply a `key=value` assignment as given to `--set`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v)
    }

    /// Apply every assignment in a config text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.root())))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = CliConfig::default();
        c.apply_text(text)?;
        c.pipeline.validate()?;
        Ok(c)
    }

    /// Defaults, then `file`, then each `--set` pair.
    pub fn load(file: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut c = CliConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            c.apply_text(&text)?;
        }
        for s in sets {
            c.set_pair(s)?;
        }
        c.pipeline.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in Self::keys() {
            s += &format!("{k} = {}\n", self.get(k).expect("listed key"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = CliConfig::default();
        let text = c.to_text();
        assert_eq!(CliConfig::from_text(&text).unwrap(), c);
        assert!(text.contains("activity.tau_us = 50000\n"));
        assert!(text.contains("activity.window_us = 250000\n"));
        assert!(text.contains("detect.dt_max_us = 50000\n"));
        assert!(text.contains("detect.dh_max_px = 60.0\n"));
        assert!(text.contains("detect.dv_max_px = 20.0\n"));
    }

    #[test]
    fn every_key_is_echoed_once() {
        let text = CliConfig::default().to_text();
        let keys = CliConfig::keys();
        assert_eq!(text.lines().count(), keys.len());
        for k in keys {
            assert_eq!(text.lines().filter(|l| l.starts_with(&format!("{k} ="))).count(), 1, "{k}");
        }
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let mut c = CliConfig::default();
        assert!(c.set("track.bogus", "1").is_err());
        assert!(c.set("filter.enabled", "maybe").is_err());
        assert!(c.set("corr.threshold", "NaN").is_err());
        assert!(c.set_pair("no_equals_sign").is_err());
        assert!(CliConfig::from_text("corr.threshold = 2.0").is_err());
    }

    #[test]
    fn precedence_flags_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "# comment\ntrack.eta = 0.05\ncorr.threshold = 0.8\n").unwrap();
        let c = CliConfig::load(Some(&path), &["track.eta=0.1".into()]).unwrap();
        assert_eq!(c.pipeline.tracker.eta, 0.1);
        assert_eq!(c.pipeline.correlator.threshold, 0.8);
        assert_eq!(c.pipeline.detector.dt_max_us, 50_000);
    }

    #[test]
    fn alpha_override() {
        let mut c = CliConfig::default();
        assert_eq!(c.get("corr.alpha").unwrap(), "model");
        c.set("corr.alpha", "0.3").unwrap();
        assert_eq!(c.pipeline.correlator.alpha, Some(0.3));
        let back = CliConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn sensor_size() {
        let c = CliConfig::load(None, &["sensor.width=640".into(), "sensor.height=480".into()]).unwrap();
        assert_eq!(c.pipeline.geometry, SensorGeometry::new(640, 480).unwrap());
    }
}
