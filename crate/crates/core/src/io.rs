//! WAV and JSON sidecar file formats.
//!
//! An impulse response on disk is a 32-bit float WAV (one WAV channel per
//! receiver) plus a JSON sidecar with the same basename.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::analysis::{EngineKind, ImpulseResponse, IrMetadata};
use crate::error::{Error, Result};
use crate::gas::TraceParams;
use crate::geometry::Vec3;
use crate::materials::AbsorptionModel;
use crate::num::Real;

/// JSON sidecar written next to every IR WAV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub engine: EngineKind,
    pub seed: u64,
    pub room_dims_m: Vec3<f64>,
    pub source_m: Vec3<f64>,
    pub mics_m: Vec<Vec3<f64>>,
    pub t60_target_s: f64,
    pub sample_rate_hz: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorption: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorption_model: Option<AbsorptionModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_params: Option<TraceParams>,
}

impl Sidecar {
    pub fn metadata(&self) -> IrMetadata {
        IrMetadata {
            engine: Some(self.engine),
            seed: Some(self.seed),
            source: Some(self.source_m),
            receivers: self.mics_m.clone(),
            room_dims: Some(self.room_dims_m),
            t60_target_s: Some(self.t60_target_s),
        }
    }
}

/// `foo.wav` -> `foo.json`.
pub fn sidecar_path(wav: &Path) -> PathBuf {
    wav.with_extension("json")
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes through a temporary file and renames it into place; the temporary
/// is removed on failure.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = tmp_path(path);
    match write(&tmp).and_then(|_| fs::rename(&tmp, path).map_err(|e| Error::io(path, e))) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Writes channels as an interleaved 32-bit float WAV.
pub fn write_wav_f32<T: Real>(path: &Path, channels: &[Vec<T>], sample_rate: u32) -> Result<()> {
    let n_ch = channels.len();
    if n_ch == 0 || n_ch > u16::MAX as usize {
        return Err(Error::invalid(
            "channels",
            format!("cannot write {n_ch} channels"),
        ));
    }
    let spec = WavSpec {
        channels: n_ch as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut w = WavWriter::create(path, spec).map_err(wav_err)?;
    let len = channels[0].len();
    for i in 0..len {
        for c in channels {
            w.write_sample(c[i].as_f64() as f32).map_err(wav_err)?;
        }
    }
    w.finalize().map_err(wav_err)
}

/// Reads a PCM (8..32 bit integer) or 32-bit float WAV into per-channel
/// samples scaled to [-1, 1].
pub fn read_wav(path: &Path) -> Result<(Vec<Vec<f64>>, u32)> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut r = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = r.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &s) in frame.iter().enumerate() {
            channels[c].push(s);
        }
    }
    Ok((channels, spec.sample_rate))
}

/// Channel count, sample rate and frame count from a WAV header.
pub fn wav_info(path: &Path) -> Result<(usize, u32, usize)> {
    let r = hound::WavReader::open(path).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })?;
    let spec = r.spec();
    Ok((
        spec.channels as usize,
        spec.sample_rate,
        r.duration() as usize,
    ))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_atomic(path, |tmp| {
        let f = fs::File::create(tmp).map_err(|e| Error::io(tmp, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
            path: tmp.to_path_buf(),
            source,
        })?;
        w.write_all(b"\n").map_err(|e| Error::io(tmp, e))?;
        w.flush().map_err(|e| Error::io(tmp, e))
    })
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `wav_path` and its sidecar. Neither file is left half-written.
pub fn write_ir<T: Real>(
    wav_path: &Path,
    ir: &ImpulseResponse<T>,
    sidecar: &Sidecar,
) -> Result<()> {
    write_atomic(wav_path, |tmp| {
        write_wav_f32(tmp, ir.channels(), ir.sample_rate())
    })?;
    if let Err(e) = write_json(&sidecar_path(wav_path), sidecar) {
        let _ = fs::remove_file(wav_path);
        return Err(e);
    }
    Ok(())
}

/// Reads an IR and its sidecar; metadata is populated from the sidecar.
pub fn read_ir(wav_path: &Path) -> Result<(ImpulseResponse<f64>, Sidecar)> {
    let sidecar: Sidecar = read_json(&sidecar_path(wav_path))?;
    let (channels, fs) = read_wav(wav_path)?;
    if fs != sidecar.sample_rate_hz {
        return Err(Error::Format {
            path: wav_path.to_path_buf(),
            reason: format!(
                "WAV rate {fs} Hz disagrees with sidecar {} Hz",
                sidecar.sample_rate_hz
            ),
        });
    }
    let ir = ImpulseResponse::new(channels, fs)
        .map_err(|e| Error::Format {
            path: wav_path.to_path_buf(),
            reason: e.to_string(),
        })?
        .with_metadata(sidecar.metadata());
    Ok((ir, sidecar))
}
