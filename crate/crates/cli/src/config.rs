//! Config files and the engine flags shared by `simulate` and
//! `sample-rooms`.

use std::path::{Path, PathBuf};

use clap::Args;
use roomsim::analysis::EngineKind;
use roomsim::image::Interpolation;
use roomsim::materials::AbsorptionModel;
use roomsim::simulate::SimParams;
use roomsim::Vec3;
use serde::Deserialize;

use crate::{usage, CliResult, ModelArg};

/// Keys accepted in a `--config` file. Names follow the long flags with
/// `_` for `-`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub room: Option<Vec3>,
    pub t60: Option<f64>,
    pub source: Option<Vec3>,
    pub array: Option<Vec3>,
    pub rotation: Option<f64>,
    pub scattering: Option<f64>,
    pub engine: Option<EngineKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub fs: Option<u32>,
    pub rays: Option<u64>,
    pub max_order: Option<usize>,
    pub max_bounces: Option<u32>,
    pub receiver_radius: Option<f64>,
    pub energy_cutoff: Option<f64>,
    pub ir_length: Option<f64>,
    pub bands: Option<usize>,
    pub absorption_model: Option<AbsorptionModel>,
    pub interpolation: Option<Interpolation>,
}

impl FileConfig {
    pub fn load_opt(path: Option<&Path>) -> CliResult<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config: {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| usage(format!("config: {}: {e}", path.display())))
    }
}

#[derive(Args, Debug, Default)]
pub struct ParamFlags {
    /// Sample rate in Hz.
    #[arg(long)]
    pub fs: Option<u32>,
    /// Ray count for the gas engine.
    #[arg(long)]
    pub rays: Option<u64>,
    /// Reflection order for the image engine (default from T60).
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long)]
    pub max_bounces: Option<u32>,
    #[arg(long)]
    pub receiver_radius: Option<f64>,
    #[arg(long)]
    pub energy_cutoff: Option<f64>,
    /// IR length in seconds (default from T60).
    #[arg(long)]
    pub ir_length: Option<f64>,
    /// 1 for broadband, 8 for octave bands (gas engine).
    #[arg(long)]
    pub bands: Option<usize>,
    #[arg(long, value_enum)]
    pub absorption_model: Option<ModelArg>,
    /// Use nearest-sample arrivals in the image engine.
    #[arg(long)]
    pub nearest: bool,
}

impl ParamFlags {
    pub fn resolve(&self, file: &FileConfig) -> CliResult<SimParams> {
        let d = SimParams::default();
        let p = SimParams {
            fs: self.fs.or(file.fs).unwrap_or(d.fs),
            ir_length_s: self.ir_length.or(file.ir_length),
            absorption_model: self.absorption_model.map(Into::into).or(file.absorption_model).unwrap_or(d.absorption_model),
            max_order: self.max_order.or(file.max_order),
            interpolation: if self.nearest {
                Interpolation::Nearest
            } else {
                file.interpolation.unwrap_or(d.interpolation)
            },
            n_rays: self.rays.or(file.rays).unwrap_or(d.n_rays),
            max_bounces: self.max_bounces.or(file.max_bounces).unwrap_or(d.max_bounces),
            energy_cutoff: self.energy_cutoff.or(file.energy_cutoff).unwrap_or(d.energy_cutoff),
            receiver_radius: self.receiver_radius.or(file.receiver_radius).unwrap_or(d.receiver_radius),
            n_bands: self.bands.or(file.bands).unwrap_or(d.n_bands),
            trace_seed: None,
        };
        if p.fs == 0 {
            return Err(usage("fs: must be positive"));
        }
        if p.n_rays == 0 {
            return Err(usage("rays: must be at least 1"));
        }
        if !(p.receiver_radius > 0.0 && p.receiver_radius <= 0.25) {
            return Err(usage("receiver_radius: must lie in (0, 0.25] m"));
        }
        if !(0.0..1.0).contains(&p.energy_cutoff) {
            return Err(usage("energy_cutoff: must lie in [0, 1)"));
        }
        if p.n_bands != 1 && p.n_bands != 8 {
            return Err(usage("bands: must be 1 or 8"));
        }
        if let Some(l) = p.ir_length_s {
            if !(l > 0.0 && l.is_finite()) {
                return Err(usage("ir_length: must be positive"));
            }
        }
        Ok(p)
    }
}

fn parse_triple(s: &str, sep: char, field: &str) -> CliResult<Vec3> {
    let parts: Vec<f64> = s
        .split(sep)
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("{field}: cannot parse `{s}`")))?;
    match parts[..] {
        [x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => Ok(Vec3::new(x, y, z)),
        _ => Err(usage(format!("{field}: expected three numbers, got `{s}`"))),
    }
}

pub fn parse_dims(s: &str, field: &str) -> CliResult<Vec3> {
    parse_triple(&s.to_ascii_lowercase(), 'x', field)
}

pub fn parse_point(s: &str, field: &str) -> CliResult<Vec3> {
    parse_triple(s, ',', field)
}

/// Non-empty lines of a list file; relative entries resolve against the
/// list's directory.
pub fn read_list(path: &Path, field: &str) -> CliResult<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{field}: {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let items: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| base.join(l))
        .collect();
    if items.is_empty() {
        return Err(usage(format!("{field}: {} lists no files", path.display())));
    }
    Ok(items)
}
