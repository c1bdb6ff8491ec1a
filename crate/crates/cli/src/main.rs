//! `roomsim` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 unpaired
//! manifests.

mod analyze;
mod compare;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use roomsim::analysis::EngineKind;
use roomsim::augment::{augment_corpus, AugmentSpec, OutputChannels};
use roomsim::dataset::{generate_dataset, DatasetRequest};
use roomsim::io::write_ir;
use roomsim::materials::AbsorptionModel;
use roomsim::sampler::{place_in_room, RoomConfig, SamplerSettings};
use roomsim::simulate::simulate_rir;

use config::{FileConfig, ParamFlags};

#[derive(Parser, Debug)]
#[command(name = "roomsim", version, about = "Room impulse response simulation and augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one multichannel RIR.
    Simulate(SimulateArgs),
    /// Sample room configurations and simulate a dataset.
    SampleRooms(SampleArgs),
    /// Reverberate and add noise to a speech corpus.
    Augment(AugmentArgs),
    /// Report T60, DRR and region energies of IRs.
    Analyze(analyze::AnalyzeArgs),
    /// Compare two paired datasets.
    Compare(compare::CompareArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EngineArg {
    Image,
    Gas,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Image => EngineKind::Image,
            EngineArg::Gas => EngineKind::Gas,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Sabine,
    Eyring,
}

impl From<ModelArg> for AbsorptionModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Sabine => AbsorptionModel::Sabine,
            ModelArg::Eyring => AbsorptionModel::Eyring,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChannelsArg {
    First,
    All,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML or JSON file with any of the flags below (flags win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Room size, e.g. 4x5x3 (metres).
    #[arg(long)]
    room: Option<String>,
    /// Target T60 in seconds.
    #[arg(long)]
    t60: Option<f64>,
    /// Source position x,y,z. Without --source and --array both are
    /// placed at random from the seed.
    #[arg(long)]
    source: Option<String>,
    /// Array centre x,y,z.
    #[arg(long)]
    array: Option<String>,
    /// Rotation of mic 0 about the array axis (radians).
    #[arg(long)]
    rotation: Option<f64>,
    #[arg(long)]
    scattering: Option<f64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output WAV path; the sidecar goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    scattering: Option<f64>,
    /// Pin every room to this T60 instead of sampling it.
    #[arg(long)]
    t60: Option<f64>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Newline-separated speech WAV paths.
    #[arg(long)]
    speech_list: PathBuf,
    #[arg(long)]
    rir_manifest: PathBuf,
    /// Newline-separated noise WAV paths.
    #[arg(long)]
    noise_list: PathBuf,
    /// SNR range low:high in dB.
    #[arg(long, default_value = "0:24")]
    snr: String,
    #[arg(long, value_enum, default_value = "first")]
    channels: ChannelsArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
    Pairing(String),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<roomsim::Error> for CliError {
    fn from(e: roomsim::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::SampleRooms(a) => cmd_sample_rooms(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Compare(a) => compare::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Pairing(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let file = FileConfig::load_opt(a.config.as_deref())?;
    let room = match &a.room {
        Some(s) => config::parse_dims(s, "room")?,
        None => file.room.ok_or_else(|| usage("room: required (--room LxWxH)"))?,
    };
    let t60 = a.t60.or(file.t60).ok_or_else(|| usage("t60: required (--t60 seconds)"))?;
    let source = match &a.source {
        Some(s) => Some(config::parse_point(s, "source")?),
        None => file.source,
    };
    let array = match &a.array {
        Some(s) => Some(config::parse_point(s, "array")?),
        None => file.array,
    };
    let seed = a.seed.or(file.seed).unwrap_or(0);
    eprintln!("seed: {seed}");
    let engine: EngineKind = match a.engine {
        Some(e) => e.into(),
        None => file.engine.unwrap_or(EngineKind::Image),
    };
    let out = a.out.or(file.out.clone()).ok_or_else(|| usage("out: required (--out file.wav)"))?;

    let mut cfg = match (source, array) {
        (Some(s), Some(c)) => RoomConfig::new(room, t60, s, c, a.rotation.or(file.rotation).unwrap_or(0.0)),
        // Positions drawn from the seed under the sampling protocol.
        (None, None) => place_in_room(room, t60, seed).map_err(|e| usage(e.to_string()))?,
        (None, Some(_)) => return Err(usage("source: required when array is given")),
        (Some(_), None) => return Err(usage("array: required when source is given")),
    };
    cfg.scattering = a.scattering.or(file.scattering).unwrap_or(cfg.scattering);
    cfg.seed = seed;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let params = a.params.resolve(&file)?;

    let (ir, sidecar) = simulate_rir(&cfg, engine, &params)?;
    write_ir(&out, &ir, &sidecar)?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_sample_rooms(a: SampleArgs) -> CliResult<()> {
    let file = FileConfig::load_opt(a.config.as_deref())?;
    let n = a.n.or(file.n).ok_or_else(|| usage("n: required (--n count)"))?;
    let seed = a.seed.or(file.seed).unwrap_or(0);
    eprintln!("seed: {seed}");
    let engine: EngineKind = match a.engine {
        Some(e) => e.into(),
        None => file.engine.unwrap_or(EngineKind::Image),
    };
    let out_dir = a.out_dir.or(file.out_dir.clone()).ok_or_else(|| usage("out_dir: required (--out-dir dir)"))?;
    let sim = a.params.resolve(&file)?;
    let mut sampler = SamplerSettings {
        absorption_model: sim.absorption_model,
        fixed_t60_s: a.t60.or(file.t60),
        ..Default::default()
    };
    if let Some(s) = a.scattering.or(file.scattering) {
        if !(0.0..=1.0).contains(&s) {
            return Err(usage("scattering: must lie in [0, 1]"));
        }
        sampler.scattering = s;
    }
    if let Some(t) = sampler.fixed_t60_s {
        if !(t > 0.0) {
            return Err(usage("t60: must be positive"));
        }
    }
    let req = DatasetRequest {
        count: n,
        seed,
        engine: Some(engine),
        sim,
        sampler,
    };
    let step = (n / 20).max(1);
    let progress = move |done: usize| {
        if done % step == 0 || done == n {
            eprintln!("{done}/{n}");
        }
    };
    let cb: Option<&(dyn Fn(usize) + Sync)> = if a.quiet { None } else { Some(&progress) };
    let summary = generate_dataset(&req, &out_dir, cb)?;
    eprintln!("written {}, kept {}", summary.written, summary.skipped);
    println!("{}", summary.manifest_path.display());
    Ok(())
}

fn cmd_augment(a: AugmentArgs) -> CliResult<()> {
    eprintln!("seed: {}", a.seed);
    let (lo, hi) = a
        .snr
        .split_once(':')
        .and_then(|(l, h)| Some((l.trim().parse::<f64>().ok()?, h.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| usage(format!("snr: expected low:high, got `{}`", a.snr)))?;
    if !(lo <= hi) {
        return Err(usage("snr: low must not exceed high"));
    }
    let spec = AugmentSpec {
        speech: config::read_list(&a.speech_list, "speech_list")?,
        rir_manifest: a.rir_manifest,
        noise: config::read_list(&a.noise_list, "noise_list")?,
        snr_range_db: [lo, hi],
        output_channels: match a.channels {
            ChannelsArg::First => OutputChannels::First,
            ChannelsArg::All => OutputChannels::All,
        },
        seed: a.seed,
    };
    let report = augment_corpus(&spec, &a.out_dir)?;
    eprintln!("{} of {} utterances augmented", report.succeeded, report.total);
    println!("{}", a.out_dir.join(roomsim::augment::REPORT_NAME).display());
    for f in &report.failures {
        eprintln!("failed {}: {}", f.speech.display(), f.error);
    }
    if report.failed > 0 {
        return Err(CliError::Runtime(anyhow::anyhow!("{} utterance(s) failed", report.failed)));
    }
    Ok(())
}
