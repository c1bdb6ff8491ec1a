//! Speech augmentation: reverberate with a simulated RIR, then add noise at
//! a random SNR.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analysis::ImpulseResponse;
use crate::dataset::Manifest;
use crate::error::{Error, Result};
use crate::io::{read_wav, write_atomic, write_json, write_wav_f32};
use crate::rng::{domain, substream, StreamRng};

/// Peak level applied when a mix would clip.
pub const CLIP_TARGET: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid(
                "channels",
                "at least one channel is required",
            ));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("channels", "channels differ in length"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        Ok(AudioBuffer {
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (channels, fs) = read_wav(path)?;
        Self::new(channels, fs)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean square over every sample of every channel.
    pub fn power(&self) -> f64 {
        let n = (self.len() * self.n_channels()) as f64;
        if n == 0.0 {
            return 0.0;
        }
        self.channels.iter().flatten().map(|x| x * x).sum::<f64>() / n
    }

    pub fn peak(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Full linear convolution of mono `speech` with every IR channel
/// (FFT overlap-add). Output length is `len(speech) + len(ir) - 1`.
pub fn convolve(speech: &AudioBuffer, ir: &ImpulseResponse<f64>) -> Result<AudioBuffer> {
    if speech.n_channels() != 1 {
        return Err(Error::invalid("speech", "must be mono"));
    }
    if speech.sample_rate != ir.sample_rate() {
        return Err(Error::RateMismatch {
            left: speech.sample_rate,
            right: ir.sample_rate(),
        });
    }
    let x = &speech.channels[0];
    let m = ir.len();
    if x.is_empty() || m == 0 {
        return Err(Error::invalid("speech", "empty input"));
    }
    let out_len = x.len() + m - 1;
    let n = (4 * m).next_power_of_two().max(2);
    let block = n - m + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectra: Vec<Vec<Complex<f64>>> = ir
        .channels()
        .iter()
        .map(|h| {
            let mut buf: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
            buf.resize(n, Complex::new(0.0, 0.0));
            fwd.process(&mut buf);
            buf
        })
        .collect();

    let scale = 1.0 / n as f64;
    let mut out = vec![vec![0.0; out_len]; ir.n_channels()];
    let mut xb = vec![Complex::new(0.0, 0.0); n];
    let mut yb = vec![Complex::new(0.0, 0.0); n];
    for start in (0..x.len()).step_by(block) {
        let end = (start + block).min(x.len());
        xb.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
        for (d, &s) in xb.iter_mut().zip(&x[start..end]) {
            d.re = s;
        }
        fwd.process(&mut xb);
        for (c, h) in spectra.iter().enumerate() {
            for ((y, a), b) in yb.iter_mut().zip(&xb).zip(h) {
                *y = a * b;
            }
            inv.process(&mut yb);
            let valid = (end - start + m - 1).min(out_len - start);
            for (o, y) in out[c][start..start + valid].iter_mut().zip(&yb) {
                *o += y.re * scale;
            }
        }
    }
    AudioBuffer::new(out, speech.sample_rate)
}

/// `len` samples per channel read cyclically from `noise` starting at
/// `offset`. Output channel `c` uses noise channel `c % noise_channels`.
pub fn crop_noise(
    noise: &AudioBuffer,
    offset: usize,
    len: usize,
    n_channels: usize,
) -> Vec<Vec<f64>> {
    let nl = noise.len();
    (0..n_channels)
        .map(|c| {
            let src = &noise.channels[c % noise.n_channels()];
            (0..len).map(|i| src[(offset + i) % nl]).collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixOutput {
    pub audio: AudioBuffer,
    /// Gain applied to the cropped noise before summing.
    pub noise_gain: f64,
    /// Anti-clipping scale applied to the sum (1 when no clipping).
    pub scale: f64,
    pub noise_offset: usize,
}

/// Adds noise to `wet` at `snr_db`, powers measured over the whole
/// utterance and all channels. If the mix peaks above 1 it is rescaled to
/// a 0.9 peak, which leaves the SNR unchanged.
pub fn mix_noise(
    wet: &AudioBuffer,
    noise: &AudioBuffer,
    snr_db: f64,
    rng: &mut StreamRng,
) -> Result<MixOutput> {
    if wet.sample_rate != noise.sample_rate {
        return Err(Error::RateMismatch {
            left: wet.sample_rate,
            right: noise.sample_rate,
        });
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid("snr_db", "must be finite"));
    }
    if noise.is_empty() {
        return Err(Error::invalid("noise", "empty noise signal"));
    }
    let p_sig = wet.power();
    if p_sig == 0.0 {
        return Err(Error::SilentSignal);
    }
    let offset = rng.gen_range(0..noise.len());
    let cropped = crop_noise(noise, offset, wet.len(), wet.n_channels());
    let n = (wet.len() * wet.n_channels()) as f64;
    let p_noise = cropped.iter().flatten().map(|x| x * x).sum::<f64>() / n;
    if p_noise == 0.0 {
        return Err(Error::invalid("noise", "noise segment is silent"));
    }
    let gain = (p_sig / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut mixed: Vec<Vec<f64>> = wet
        .channels
        .iter()
        .zip(&cropped)
        .map(|(s, v)| s.iter().zip(v).map(|(a, b)| a + gain * b).collect())
        .collect();
    let peak = mixed.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if peak > 1.0 { CLIP_TARGET / peak } else { 1.0 };
    if scale != 1.0 {
        mixed.iter_mut().flatten().for_each(|x| *x *= scale);
    }
    Ok(MixOutput {
        audio: AudioBuffer::new(mixed, wet.sample_rate)?,
        noise_gain: gain,
        scale,
        noise_offset: offset,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputChannels {
    /// Keep only the first microphone.
    #[default]
    First,
    All,
}

/// Random choices for one utterance. Drawn from the utterance's own stream
/// so they do not depend on processing order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtterancePlan {
    pub rir_index: usize,
    pub noise_index: usize,
    pub snr_db: f64,
}

pub fn plan_utterance(
    seed: u64,
    index: u64,
    n_rirs: usize,
    n_noises: usize,
    snr_range_db: [f64; 2],
) -> (UtterancePlan, StreamRng) {
    let mut rng = substream(seed, domain::AUGMENT, index);
    let rir_index = rng.gen_range(0..n_rirs);
    let noise_index = rng.gen_range(0..n_noises);
    let [lo, hi] = snr_range_db;
    let snr_db = lo + (hi - lo) * rng.gen::<f64>();
    (
        UtterancePlan {
            rir_index,
            noise_index,
            snr_db,
        },
        rng,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub speech: Vec<PathBuf>,
    pub rir_manifest: PathBuf,
    pub noise: Vec<PathBuf>,
    pub snr_range_db: [f64; 2],
    #[serde(default)]
    pub output_channels: OutputChannels,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentItem {
    pub index: u64,
    pub speech: PathBuf,
    pub rir_index: usize,
    pub rir_wav: PathBuf,
    pub noise: PathBuf,
    pub snr_db: f64,
    pub noise_gain: f64,
    pub scale: f64,
    pub noise_offset: usize,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentFailure {
    pub index: u64,
    pub speech: PathBuf,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub seed: u64,
    pub snr_range_db: [f64; 2],
    pub output_channels: OutputChannels,
    pub total: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub items: Vec<AugmentItem>,
    pub failures: Vec<AugmentFailure>,
}

pub const REPORT_NAME: &str = "report.json";

pub fn output_name(index: u64) -> String {
    format!("aug_{index:05}.wav")
}

/// Augments every speech file and writes `aug_{index}.wav` plus
/// `report.json` into `out_dir`. A failing utterance is recorded in the
/// report and does not stop the run.
pub fn augment_corpus(spec: &AugmentSpec, out_dir: &Path) -> Result<AugmentReport> {
    let [lo, hi] = spec.snr_range_db;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::invalid(
            "snr_range_db",
            "expected finite [low, high] with low <= high",
        ));
    }
    if spec.noise.is_empty() {
        return Err(Error::invalid(
            "noise",
            "at least one noise file is required",
        ));
    }
    let manifest = Manifest::load(&spec.rir_manifest)?;
    let rirs = manifest.wav_paths(&spec.rir_manifest);
    if rirs.is_empty() {
        return Err(Error::invalid("rir_manifest", "manifest lists no RIRs"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let results: Vec<std::result::Result<AugmentItem, AugmentFailure>> = spec
        .speech
        .par_iter()
        .enumerate()
        .map(|(i, speech)| {
            let index = i as u64;
            let (plan, mut rng) = plan_utterance(
                spec.seed,
                index,
                rirs.len(),
                spec.noise.len(),
                spec.snr_range_db,
            );
            augment_one(spec, speech, &rirs, &plan, &mut rng, index, out_dir).map_err(|e| {
                AugmentFailure {
                    index,
                    speech: speech.clone(),
                    error: e.to_string(),
                }
            })
        })
        .collect();

    let mut items = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(it) => items.push(it),
            Err(f) => failures.push(f),
        }
    }
    let report = AugmentReport {
        seed: spec.seed,
        snr_range_db: spec.snr_range_db,
        output_channels: spec.output_channels,
        total: spec.speech.len(),
        succeeded: items.len(),
        failed: failures.len(),
        items,
        failures,
    };
    write_json(&out_dir.join(REPORT_NAME), &report)?;
    Ok(report)
}

fn augment_one(
    spec: &AugmentSpec,
    speech_path: &Path,
    rirs: &[PathBuf],
    plan: &UtterancePlan,
    rng: &mut StreamRng,
    index: u64,
    out_dir: &Path,
) -> Result<AugmentItem> {
    let speech = AudioBuffer::read(speech_path)?;
    if speech.n_channels() != 1 {
        return Err(Error::invalid("speech", "must be mono"));
    }
    let rir_path = &rirs[plan.rir_index];
    let (ir_channels, ir_fs) = read_wav(rir_path)?;
    let mut ir = ImpulseResponse::new(ir_channels, ir_fs)?;
    if spec.output_channels == OutputChannels::First {
        let first = ir.into_channels().swap_remove(0);
        ir = ImpulseResponse::new(vec![first], ir_fs)?;
    }
    let wet = convolve(&speech, &ir)?;
    let noise_path = &spec.noise[plan.noise_index];
    let noise = AudioBuffer::read(noise_path)?;
    let mix = mix_noise(&wet, &noise, plan.snr_db, rng)?;
    let name = output_name(index);
    let path = out_dir.join(&name);
    write_atomic(&path, |tmp| {
        write_wav_f32(tmp, &mix.audio.channels, mix.audio.sample_rate)
    })?;
    Ok(AugmentItem {
        index,
        speech: speech_path.to_path_buf(),
        rir_index: plan.rir_index,
        rir_wav: rir_path.clone(),
        noise: noise_path.clone(),
        snr_db: plan.snr_db,
        noise_gain: mix.noise_gain,
        scale: mix.scale,
        noise_offset: mix.noise_offset,
        output: name,
    })
}
