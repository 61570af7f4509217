//! `huevitals`: estimate, synth, eval and spectrum subcommands.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use huevitals::estimator::{self, EstimatorConfig};
use huevitals::eval::{self, ReferenceSeries};
use huevitals::ingest::{self, FormatHint};
use huevitals::pipeline::{self, RoiSource, RunOutput};
use huevitals::roi::{self, Channel, ForeheadRect, HueMask};
use huevitals::signal::{self, Band};
use huevitals::synth::{self, BrightnessDrift, SynthFormat, SynthSpec};

#[derive(Parser)]
#[command(name = "huevitals", version, about = "Heart and respiration rate from the forehead hue of a face video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-second HR/RR estimates for a video
    Estimate(EstimateArgs),
    /// Render a synthetic face clip with planted rates
    Synth(SynthArgs),
    /// RMSE of each method against the reference columns of a CSV
    Eval(EvalArgs),
    /// Spectrum of one analysis window as freq_hz,magnitude CSV
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Hue,
    Green,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Auto,
    Y4m,
    Images,
    Raw,
}

#[derive(Args)]
struct PipelineArgs {
    /// Video: .y4m, image-sequence directory or meta .json, or raw .rgb
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// How to read --input
    #[arg(long, value_enum, default_value = "auto")]
    input_format: InputFormat,
    /// Landmark sidecar, one JSON object per frame
    #[arg(long, value_name = "PATH", conflicts_with = "roi")]
    landmarks: Option<PathBuf>,
    /// Fixed forehead rectangle used when no sidecar is given
    #[arg(long, value_name = "L,T,R,B", value_parser = parse_rect)]
    roi: Option<ForeheadRect>,
    /// Observable reduced from the forehead
    #[arg(long, value_enum, default_value = "hue")]
    channel: ChannelArg,
    /// Open hue interval counted as skin
    #[arg(long, value_name = "LO,HI", default_value = "0,0.1", value_parser = parse_pair)]
    hue_mask: (f64, f64),
    /// Seconds of history per estimate
    #[arg(long, value_name = "F", default_value_t = 11.0)]
    window_s: f64,
    /// Heart band in Hz
    #[arg(long, value_name = "LO,HI", default_value = "0.8,2.2", value_parser = parse_pair)]
    hr_band: (f64, f64),
    /// Respiration band in Hz
    #[arg(long, value_name = "LO,HI", default_value = "0.18,0.5", value_parser = parse_pair)]
    rr_band: (f64, f64),
    /// Raw estimates averaged into each reported value
    #[arg(long, value_name = "N", default_value_t = 10)]
    smooth_n: usize,
    /// Uniform resampling rate in Hz
    #[arg(long, value_name = "F", default_value_t = 9.0)]
    resample_hz: f64,
    /// FFT length multiplier before rounding up to a power of two
    #[arg(long, value_name = "N", default_value_t = 4)]
    zero_pad: usize,
    /// Grid points farther than this from any sample are held and flagged
    #[arg(long, value_name = "F", default_value_t = 0.5)]
    max_gap_s: f64,
    /// Seconds before the first HR
    #[arg(long, value_name = "F", default_value_t = 2.0)]
    hr_warmup_s: f64,
    /// Seconds before the first RR
    #[arg(long, value_name = "F", default_value_t = 6.0)]
    rr_warmup_s: f64,
    /// Keep each frame with this probability (frame-drop simulation)
    #[arg(long, value_name = "F")]
    keep_rate: Option<f64>,
    /// Seed for --keep-rate
    #[arg(long, value_name = "N", default_value_t = 0)]
    drop_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateFormat {
    Jsonl,
    Csv,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Write estimates here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: EstimateFormat,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// End of the analyzed window in seconds [default: last sample]
    #[arg(long, value_name = "F")]
    at_s: Option<f64>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthFormatArg {
    Y4m,
    Y4m420,
    Ppm,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving the clip, clip.lmjsonl and truth.json
    #[arg(long, value_name = "PATH")]
    out_dir: PathBuf,
    #[arg(long, value_name = "HZ", default_value_t = 1.1)]
    hr_hz: f64,
    #[arg(long, value_name = "HZ", default_value_t = 0.3)]
    rr_hz: f64,
    /// Hue oscillation amplitude (hue on [0, 1))
    #[arg(long, value_name = "F", default_value_t = 0.008)]
    hue_amp: f64,
    /// Green oscillation amplitude in 8-bit levels
    #[arg(long, value_name = "F", default_value_t = 2.0)]
    green_amp: f64,
    /// Skin color, components on [0, 1]
    #[arg(long, value_name = "H,S,V", default_value = "0.05,0.35,0.8", value_parser = parse_triple)]
    base_hsv: (f64, f64, f64),
    /// Per-pixel Gaussian noise sigma on RGB
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    noise_sigma: f64,
    /// Enable a multiplicative brightness drift
    #[arg(long)]
    drift: bool,
    #[arg(long, value_name = "F", default_value_t = 0.7)]
    drift_min: f64,
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    drift_max: f64,
    #[arg(long, value_name = "HZ", default_value_t = 0.05)]
    drift_hz: f64,
    #[arg(long, value_name = "F", default_value_t = 9.0)]
    fps: f64,
    #[arg(long, value_name = "F", default_value_t = 11.0)]
    duration_s: f64,
    #[arg(long, value_name = "N", default_value_t = 160)]
    width: usize,
    #[arg(long, value_name = "N", default_value_t = 120)]
    height: usize,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "y4m")]
    format: SynthFormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV with time_s and <method>_hr / <method>_rr columns
    #[arg(long, value_name = "PATH")]
    reference: PathBuf,
    /// Estimate JSONL to score as an extra method, labeled by file stem
    #[arg(long, value_name = "PATH")]
    estimates: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {s:?}"));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| format!("{p:?} is not a number")))
        .collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let v = parse_floats(s, 3)?;
    Ok((v[0], v[1], v[2]))
}

fn parse_rect(s: &str) -> Result<ForeheadRect, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("{p:?} is not a pixel index")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [l, t, r, b] => ForeheadRect::new(l, t, r, b).map_err(|e| e.to_string()),
        _ => Err(format!("expected L,T,R,B, got {s:?}")),
    }
}

enum Failure {
    Usage(String),
    Data(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl PipelineArgs {
    fn config(&self) -> Result<EstimatorConfig, Failure> {
        let band = |(lo, hi): (f64, f64), name: &str| Band::new(lo, hi).map_err(|e| usage(format!("--{name}: {e}")));
        let cfg = EstimatorConfig {
            channel: match self.channel {
                ChannelArg::Hue => Channel::Hue,
                ChannelArg::Green => Channel::Green,
            },
            window_s: self.window_s,
            hr_band: band(self.hr_band, "hr-band")?,
            rr_band: band(self.rr_band, "rr-band")?,
            hr_warmup_s: self.hr_warmup_s,
            rr_warmup_s: self.rr_warmup_s,
            smooth_n: self.smooth_n,
            resample_hz: self.resample_hz,
            zero_pad_factor: self.zero_pad,
            max_gap_s: self.max_gap_s,
            hue_mask: HueMask::new(self.hue_mask.0, self.hue_mask.1).map_err(|e| usage(format!("--hue-mask: {e}")))?,
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        if let Some(k) = self.keep_rate {
            if !(k > 0.0 && k <= 1.0) {
                return Err(usage(format!("--keep-rate must be in (0, 1], got {k}")));
            }
        }
        if self.landmarks.is_none() && self.roi.is_none() {
            return Err(usage("one of --landmarks or --roi is required"));
        }
        Ok(cfg)
    }

    fn run(&self, cfg: &EstimatorConfig) -> Result<RunOutput, Failure> {
        let hint = match self.input_format {
            InputFormat::Auto => FormatHint::Auto,
            InputFormat::Y4m => FormatHint::Y4m,
            InputFormat::Images => FormatHint::ImageSequence,
            InputFormat::Raw => FormatHint::RawRgb,
        };
        let (meta, frames) = ingest::open_stream(&self.input, hint)?;
        eprintln!(
            "input: {}x{} at {:.3} fps ({:?})",
            meta.width, meta.height, meta.nominal_fps, meta.source_kind
        );
        let source = match (&self.landmarks, self.roi) {
            (Some(path), _) => RoiSource::Landmarks(roi::parse_landmark_sidecar(path)?),
            (None, Some(rect)) => RoiSource::Fixed(rect),
            (None, None) => unreachable!("checked in config"),
        };
        let out = match self.keep_rate {
            Some(k) => pipeline::run_offline(ingest::simulate_drops(frames, k, self.drop_seed)?, &source, cfg)?,
            None => pipeline::run_offline(frames, &source, cfg)?,
        };
        eprintln!(
            "frames: {}, usable samples: {}, estimates: {}",
            out.frames,
            out.samples.iter().filter(|s| s.is_usable()).count(),
            out.estimates.len()
        );
        Ok(out)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Failure::Data(format!("cannot write {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn estimate(args: &EstimateArgs) -> Result<(), Failure> {
    let cfg = args.pipeline.config()?;
    let out = args.pipeline.run(&cfg)?;
    let sink = output(args.out.as_deref())?;
    match args.format {
        EstimateFormat::Jsonl => estimator::write_jsonl(sink, &out.estimates)?,
        EstimateFormat::Csv => estimator::write_csv(sink, &out.estimates)?,
    }
    Ok(())
}

fn spectrum(args: &SpectrumArgs) -> Result<(), Failure> {
    let cfg = args.pipeline.config()?;
    let out = args.pipeline.run(&cfg)?;
    let sp = pipeline::window_spectrum(&out.samples, &cfg, args.at_s)?;
    for (name, band) in [("hr", cfg.hr_band), ("rr", cfg.rr_band)] {
        match signal::band_peak(&sp, &band) {
            Ok(p) => eprintln!("{name} peak: {:.4} Hz = {:.2} per minute", p.freq_hz, p.rate_per_min),
            Err(e) => eprintln!("{name} peak: {e}"),
        }
    }
    let mut sink = output(args.out.as_deref())?;
    sink.write_all(sp.to_csv().as_bytes())?;
    sink.flush()?;
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let (h, s, v) = args.base_hsv;
    let spec = SynthSpec {
        hr_hz: args.hr_hz,
        rr_hz: args.rr_hz,
        hue_amp: args.hue_amp,
        green_amp: args.green_amp,
        base_hsv: [h, s, v],
        noise_sigma: args.noise_sigma,
        brightness_drift: args.drift.then_some(BrightnessDrift {
            min_gain: args.drift_min,
            max_gain: args.drift_max,
            freq_hz: args.drift_hz,
            phase: 0.0,
        }),
        fps: args.fps,
        duration_s: args.duration_s,
        width: args.width,
        height: args.height,
        seed: args.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let format = match args.format {
        SynthFormatArg::Y4m => SynthFormat::Y4m444,
        SynthFormatArg::Y4m420 => SynthFormat::Y4m420,
        SynthFormatArg::Ppm => SynthFormat::Ppm,
    };
    let out = synth::generate(&spec, &args.out_dir, format)?;
    eprintln!(
        "wrote {} frames to {}, landmarks {}, truth {}",
        out.truth.mean_hue_trace.len(),
        out.video.display(),
        out.landmarks.display(),
        out.truth_path.display()
    );
    let summary = serde_json::json!({
        "video": out.video,
        "landmarks": out.landmarks,
        "truth": out.truth_path,
        "hr_bpm": out.truth.hr_bpm,
        "rr_bpm": out.truth.rr_bpm,
        "forehead_rect": out.truth.forehead_rect,
        "frames": out.truth.mean_hue_trace.len(),
    });
    println!("{summary}");
    Ok(())
}

fn eval_cmd(args: &EvalArgs) -> Result<(), Failure> {
    let table = eval::load_reference_csv(&args.reference)?;
    let mut extra: Vec<ReferenceSeries> = Vec::new();
    for path in &args.estimates {
        let file = File::open(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
        let est = estimator::read_jsonl(BufReader::new(file))
            .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let label = path.file_stem().map_or("estimates".into(), |s| s.to_string_lossy().into_owned());
        let (hr, rr) = eval::series_from_estimates(&label, &est)?;
        extra.extend([hr, rr].into_iter().filter(|s| !s.is_empty()));
    }
    let report = eval::table_report(&table, &extra)?;
    let mut sink = output(args.out.as_deref())?;
    match args.format {
        ReportFormat::Text => sink.write_all(report.to_text().as_bytes())?,
        ReportFormat::Json => writeln!(sink, "{}", report.to_json())?,
    }
    sink.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Spectrum(a) => spectrum(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
