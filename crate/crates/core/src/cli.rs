//! The `blinktrack` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 bad input data,
//! 3 internal failure. Diagnostics go to stderr; reports go to stdout.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::config::CliConfig;
use crate::error::{Error, Result};
use crate::eval::bench::{bench, BenchMode};
use crate::eval::render::{render_overlay, write_png};
use crate::eval::{evaluate, EvalConfig};
use crate::event_io::{read_all, read_events, validate_stream, write_events, Event, SensorGeometry, StreamFormat};
use crate::model::{build_model, read_annotations, AnnotatedStream, BlinkModel, ModelBuildConfig};
use crate::pipeline::{run, TrackLog};
use crate::synth::{generate, GroundTruth, SceneSpec};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (model format BLKM v1)");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "blinktrack", version = VERSION, about = "Blink-driven face tracking for event cameras")]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key (repeatable), e.g. --set track.eta=0.05
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a blink model from annotated recordings.
    BuildModel(BuildModelArgs),
    /// Generate a synthetic scene and its ground truth.
    Synth(SynthArgs),
    /// Run detection and tracking over a recording.
    Track(TrackArgs),
    /// Score a track log against ground truth.
    Eval(EvalArgs),
    /// Measure throughput and latency.
    Bench(BenchArgs),
    /// Render an event frame with tracker overlay to PNG.
    Render(RenderArgs),
    /// Check an event stream for ordering and range violations.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct BuildModelArgs {
    #[arg(long, num_args = 1.., required = true)]
    events: Vec<PathBuf>,
    /// One annotation file per events file, in the same order.
    #[arg(long, num_args = 1.., required = true)]
    annotations: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rt_us: Option<u64>,
    #[arg(long)]
    tau_us: Option<u64>,
    #[arg(long)]
    window_us: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Smoothing half-width in lattice samples.
    #[arg(long)]
    smooth: Option<usize>,
    #[arg(long)]
    format: Option<StreamFormat>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth blinks CSV.
    #[arg(long)]
    truth: PathBuf,
    /// Ground-truth face trajectory CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Output format; defaults to csv for a .csv path, else evb1.
    #[arg(long)]
    format: Option<StreamFormat>,
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Input format; auto-detected when omitted.
    #[arg(long)]
    format: Option<StreamFormat>,
    /// Write JSON lines instead of CSV (implied by a .jsonl output path).
    #[arg(long)]
    jsonl: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    log: PathBuf,
    /// Ground-truth blinks CSV.
    #[arg(long)]
    truth: PathBuf,
    /// Ground-truth trajectory CSV; without it only blink metrics are scored.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    window_us: Option<u64>,
    /// Also write the per-face breakdown as CSV.
    #[arg(long)]
    per_face: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Time the noise filter alone.
    #[arg(long)]
    filter_only: bool,
    #[arg(long)]
    format: Option<StreamFormat>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    t_us: u64,
    #[arg(long)]
    window_us: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<StreamFormat>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<StreamFormat>,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) => EXIT_USAGE,
        Error::DegenerateTracker(_) => EXIT_INTERNAL,
        _ => EXIT_DATA,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_events(path: &Path, format: Option<StreamFormat>, geometry: SensorGeometry) -> Result<(Vec<Event>, SensorGeometry)> {
    read_all(open(path)?, format, Some(geometry))
}

fn load_model(path: &Path) -> Result<Arc<BlinkModel>> {
    Ok(Arc::new(BlinkModel::load(open(path)?)?))
}

fn format_for(path: &Path, explicit: Option<StreamFormat>) -> StreamFormat {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => StreamFormat::Csv,
        _ => StreamFormat::Evb1,
    })
}

fn build_model_cmd(a: &BuildModelArgs, cfg: &CliConfig) -> Result<()> {
    if a.events.len() != a.annotations.len() {
        return Err(Error::Config(format!(
            "{} events files but {} annotation files",
            a.events.len(),
            a.annotations.len()
        )));
    }
    let d = ModelBuildConfig::default();
    let bcfg = ModelBuildConfig {
        rt_us: a.rt_us.unwrap_or(d.rt_us),
        window_us: a.window_us.unwrap_or(d.window_us),
        tau_us: a.tau_us.unwrap_or(d.tau_us),
        smooth_half_width: a.smooth.unwrap_or(d.smooth_half_width),
        alpha: a.alpha.unwrap_or(d.alpha),
    };
    let mut data = Vec::new();
    for (ev, an) in a.events.iter().zip(&a.annotations) {
        let (events, geometry) = load_events(ev, a.format, cfg.pipeline.geometry)?;
        let annotations = read_annotations(open(an)?)?;
        data.push((events, geometry, annotations));
    }
    let streams: Vec<AnnotatedStream> = data
        .iter()
        .map(|(events, geometry, annotations)| AnnotatedStream {
            events,
            geometry: *geometry,
            annotations,
        })
        .collect();
    let model = build_model(&streams, &bcfg)?;
    let mut out = create(&a.out)?;
    model.save(&mut out)?;
    out.flush()?;
    Ok(())
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.spec)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", a.spec.display()))))?;
    let spec = SceneSpec::from_toml(&text)?;
    let (events, truth) = generate(&spec)?;
    write_events(create(&a.out)?, &events, spec.geometry()?, format_for(&a.out, a.format))?;
    truth.write_blinks_csv(create(&a.truth)?)?;
    if let Some(p) = &a.trajectory {
        truth.write_trajectory_csv(create(p)?)?;
    }
    Ok(())
}

fn track_cmd(a: &TrackArgs, cfg: &CliConfig, err: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let reader = read_events(open(&a.input)?, a.format, Some(cfg.pipeline.geometry))?;
    let mut pcfg = cfg.pipeline.clone();
    pcfg.geometry = reader.geometry();
    let (log, stats) = run(reader, &pcfg, model)?;
    let jsonl = a.jsonl || a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("jsonl"));
    let out = create(&a.out)?;
    if jsonl {
        log.write_jsonl(out)?;
    } else {
        log.write_csv(out)?;
    }
    let _ = writeln!(
        err,
        "events={} kept={} candidates={} detections={} faces={}",
        stats.events_in, stats.kept, stats.candidates, stats.detections, stats.faces_created
    );
    Ok(())
}

fn eval_cmd(a: &EvalArgs, cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let log = TrackLog::read_any(open(&a.log)?)?;
    let mut truth = GroundTruth {
        blinks: GroundTruth::read_blinks_csv(open(&a.truth)?)?,
        trajectory: Vec::new(),
    };
    if let Some(p) = &a.trajectory {
        truth.trajectory = GroundTruth::read_trajectory_csv(open(p)?)?;
    }
    let mut ecfg = EvalConfig::for_geometry(cfg.pipeline.geometry);
    ecfg.radius_ratio = cfg.pipeline.tracker.radius_ratio;
    if let Some(w) = a.window_us {
        ecfg.window_us = w;
    }
    let report = evaluate(&log, &truth, &ecfg)?;
    out.write_all(report.to_text().as_bytes())?;
    if let Some(p) = &a.per_face {
        report.write_csv(create(p)?)?;
    }
    Ok(())
}

fn bench_cmd(a: &BenchArgs, cfg: &CliConfig, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let (events, geometry) = load_events(&a.input, a.format, cfg.pipeline.geometry)?;
    let mut pcfg = cfg.pipeline.clone();
    pcfg.geometry = geometry;
    let mode = if a.filter_only { BenchMode::FilterOnly } else { BenchMode::Full };
    let report = bench(&events, &pcfg, model, a.reps, mode)?;
    out.write_all(report.to_text().as_bytes())?;
    Ok(())
}

fn render_cmd(a: &RenderArgs, cfg: &CliConfig) -> Result<()> {
    let (events, geometry) = load_events(&a.input, a.format, cfg.pipeline.geometry)?;
    let log = TrackLog::read_any(open(&a.log)?)?;
    let img = render_overlay(&events, &log, geometry, a.t_us, a.window_us)?;
    write_png(&img, create(&a.out)?)
}

fn validate_cmd(a: &ValidateArgs, cfg: &CliConfig, out: &mut dyn Write) -> Result<bool> {
    let (events, geometry) = load_events(&a.input, a.format, cfg.pipeline.geometry)?;
    let r = validate_stream(&events, geometry);
    let opt = |v: Option<u64>| v.map_or("none".to_string(), |t| t.to_string());
    writeln!(out, "sensor = {}x{}", geometry.width, geometry.height)?;
    writeln!(out, "events = {}", r.events)?;
    writeln!(out, "on_events = {}", r.on_events)?;
    writeln!(out, "off_events = {}", r.off_events)?;
    writeln!(out, "first_t_us = {}", opt(r.first_t))?;
    writeln!(out, "last_t_us = {}", opt(r.last_t))?;
    writeln!(out, "out_of_range = {}", r.out_of_range)?;
    writeln!(out, "order_violations = {}", r.order_violations)?;
    writeln!(out, "clean = {}", r.is_clean())?;
    Ok(r.is_clean())
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = CliConfig::load(cli.config.as_deref(), &cli.sets)?;
    if cli.print_config {
        out.write_all(cfg.to_text().as_bytes())?;
        return Ok(EXIT_OK);
    }
    let Some(cmd) = &cli.command else {
        let _ = writeln!(err, "no subcommand given; see --help");
        return Ok(EXIT_USAGE);
    };
    match cmd {
        Command::BuildModel(a) => build_model_cmd(a, &cfg)?,
        Command::Synth(a) => synth_cmd(a)?,
        Command::Track(a) => track_cmd(a, &cfg, err)?,
        Command::Eval(a) => eval_cmd(a, &cfg, out)?,
        Command::Bench(a) => bench_cmd(a, &cfg, out)?,
        Command::Render(a) => render_cmd(a, &cfg)?,
        Command::Validate(a) => {
            if !validate_cmd(a, &cfg, out)? {
                return Ok(EXIT_DATA);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Run the command line with explicit arguments and output streams.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => {
            let _ = out.flush();
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MODEL_FORMAT, MODEL_VERSION};

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["blinktrack"];
        argv.extend_from_slice(args);
        let code = main_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn version_names_model_format() {
        assert_eq!(VERSION, format!("{} (model format {MODEL_FORMAT} v{MODEL_VERSION})", env!("CARGO_PKG_VERSION")));
        let (code, out, _) = call(&["--version"]);
        assert_eq!(code, 0);
        assert!(out.contains("BLKM v1"));
    }

    #[test]
    fn track_without_model_is_usage_error() {
        let (code, _, err) = call(&["track", "--input", "a.evb1", "--out", "l.csv"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--model"));
        assert!(err.to_lowercase().contains("usage"));
    }

    #[test]
    fn print_config_applies_sets() {
        let (code, out, _) = call(&["--print-config", "--set", "track.eta=0.05"]);
        assert_eq!(code, 0);
        assert!(out.contains("track.eta = 0.05\n"));
        let (code, _, err) = call(&["--print-config", "--set", "track.nope=1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("unknown key"));
    }

    #[test]
    fn missing_input_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("missing.evb1");
        let (code, _, _) = call(&["validate", "--input", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_DATA);
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Format("x".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::DegenerateTracker("x".into()).at_event(3)), EXIT_INTERNAL);
    }
}
