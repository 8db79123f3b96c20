//! Throughput measurement. Streams are loaded before timing starts, so all
//! rates cover computation only.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_io::Event;
use crate::model::BlinkModel;
use crate::noise_filter::FilterState;
use crate::pipeline::{Pipeline, PipelineConfig, RunStats, StageTimes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchMode {
    Full,
    FilterOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub events: u64,
    pub reps: usize,
    /// Events per second for each timed repetition.
    pub rates: Vec<f64>,
    pub median_rate: f64,
    /// Stream duration divided by median processing time.
    pub realtime_factor: Option<f64>,
    pub latency_p50_ns: u64,
    pub latency_p99_ns: u64,
    pub peak_rss_kb: Option<u64>,
    pub stages: StageTimes,
    /// Counters from the final repetition.
    pub stats: RunStats,
}

/// Peak resident set size of this process, where the OS reports it.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find(|l| l.starts_with("VmHWM:"))?
        .split_whitespace()
        .nth(1)?
        .parse()
        .ok()
}

fn once(events: &[Event], cfg: &PipelineConfig, model: &Arc<BlinkModel>, mode: BenchMode) -> Result<(f64, RunStats)> {
    let mut out = Vec::new();
    match mode {
        BenchMode::Full => {
            let mut p = Pipeline::new(cfg.clone(), model.clone())?;
            let start = Instant::now();
            for ev in events {
                p.process_event_into(ev, &mut out)?;
                out.clear();
            }
            p.finish(&mut out);
            Ok((start.elapsed().as_secs_f64(), p.stats()))
        }
        BenchMode::FilterOnly => {
            let mut f = FilterState::new(cfg.geometry, cfg.filter)?;
            let mut stats = RunStats::default();
            let start = Instant::now();
            for ev in events {
                match f.filter_event(ev)? {
                    crate::noise_filter::Decision::Keep => stats.kept += 1,
                    crate::noise_filter::Decision::Drop => stats.dropped += 1,
                }
            }
            stats.events_in = events.len() as u64;
            Ok((start.elapsed().as_secs_f64(), stats))
        }
    }
}

fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

/// Warm up once, time `reps` passes, then make one profiled pass for
/// per-event latencies and stage times.
pub fn bench(
    events: &[Event],
    cfg: &PipelineConfig,
    model: Arc<BlinkModel>,
    reps: usize,
    mode: BenchMode,
) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::Config("bench needs at least one repetition".into()));
    }
    once(events, cfg, &model, mode)?;
    let mut rates = Vec::with_capacity(reps);
    let mut secs = Vec::with_capacity(reps);
    let mut stats = RunStats::default();
    for _ in 0..reps {
        let (s, st) = once(events, cfg, &model, mode)?;
        secs.push(s);
        rates.push(if s > 0.0 { events.len() as f64 / s } else { f64::INFINITY });
        stats = st;
    }
    let mut sorted = rates.clone();
    sorted.sort_by(f64::total_cmp);
    let median_rate = crate::eval::median(&sorted).unwrap_or(0.0);
    secs.sort_by(f64::total_cmp);
    let median_secs = crate::eval::median(&secs).unwrap_or(0.0);
    let span_s = match (events.first(), events.last()) {
        (Some(a), Some(b)) if b.t > a.t => Some((b.t - a.t) as f64 / 1e6),
        _ => None,
    };
    let realtime_factor = span_s.filter(|_| median_secs > 0.0).map(|s| s / median_secs);

    // profiled pass
    let mut lat = Vec::with_capacity(events.len());
    let mut stages = StageTimes::default();
    match mode {
        BenchMode::Full => {
            let mut p = Pipeline::new(cfg.clone(), model.clone())?;
            p.set_profiling(true);
            let mut out = Vec::new();
            for ev in events {
                let t = Instant::now();
                p.process_event_into(ev, &mut out)?;
                lat.push(t.elapsed().as_nanos() as u64);
                out.clear();
            }
            stages = p.stage_times().unwrap_or_default();
        }
        BenchMode::FilterOnly => {
            let mut f = FilterState::new(cfg.geometry, cfg.filter)?;
            for ev in events {
                let t = Instant::now();
                f.filter_event(ev)?;
                let ns = t.elapsed().as_nanos() as u64;
                lat.push(ns);
                stages.filter_ns += ns;
            }
        }
    }
    lat.sort_unstable();
    Ok(BenchReport {
        mode,
        events: events.len() as u64,
        reps,
        rates,
        median_rate,
        realtime_factor,
        latency_p50_ns: percentile(&lat, 0.5),
        latency_p99_ns: percentile(&lat, 0.99),
        peak_rss_kb: peak_rss_kb(),
        stages,
        stats,
    })
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s += "# rates cover computation only; input decoding is excluded\n";
        s += &format!("mode = {:?}\n", self.mode);
        s += &format!("events = {}\n", self.events);
        s += &format!("reps = {}\n", self.reps);
        let rates: Vec<String> = self.rates.iter().map(|r| format!("{r:.0}")).collect();
        s += &format!("rates_ev_per_s = {}\n", rates.join(","));
        s += &format!("median_ev_per_s = {:.0}\n", self.median_rate);
        if let Some(f) = self.realtime_factor {
            s += &format!("realtime_factor = {f:.2}\n");
        }
        s += &format!("latency_p50_ns = {}\n", self.latency_p50_ns);
        s += &format!("latency_p99_ns = {}\n", self.latency_p99_ns);
        if let Some(kb) = self.peak_rss_kb {
            s += &format!("peak_rss_kb = {kb}\n");
        }
        let total = self.stages.total_ns().max(1) as f64;
        for (name, ns) in [
            ("filter", self.stages.filter_ns),
            ("track", self.stages.track_ns),
            ("activity", self.stages.activity_ns),
            ("correlate", self.stages.correlate_ns),
            ("detect", self.stages.detect_ns),
        ] {
            s += &format!("stage.{name}_ns = {ns}\nstage.{name}_share = {:.4}\n", ns as f64 / total);
        }
        s += &format!("kept = {}\ndropped = {}\n", self.stats.kept, self.stats.dropped);
        s += &format!(
            "candidates = {}\ndetections = {}\n",
            self.stats.candidates, self.stats.detections
        );
        s
    }
}
