//! Impulse-response container, Schroeder decay analysis, T60 estimation and
//! direct / early / late segmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::num::Real;
use crate::SPEED_OF_SOUND;

/// Floor applied to decay-curve levels, dB.
pub const EDC_FLOOR_DB: f64 = -120.0;
/// Width of the direct-sound window after the direct arrival, seconds.
pub const DIRECT_WINDOW_S: f64 = 0.0025;
/// Early / late boundary measured from the direct arrival, seconds.
pub const EARLY_WINDOW_S: f64 = 0.050;

/// Which engine produced an impulse response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Image,
    Gas,
}

impl EngineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::Image => "image",
            EngineKind::Gas => "gas",
        }
    }
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EngineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(EngineKind::Image),
            "gas" => Ok(EngineKind::Gas),
            other => Err(Error::invalid(
                "engine",
                format!("expected `image` or `gas`, got `{other}`"),
            )),
        }
    }
}

/// Geometry and provenance carried alongside the samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IrMetadata {
    pub engine: Option<EngineKind>,
    pub seed: Option<u64>,
    pub source: Option<Vec3<f64>>,
    pub receivers: Vec<Vec3<f64>>,
    pub room_dims: Option<Vec3<f64>>,
    pub t60_target_s: Option<f64>,
}

/// Multichannel sampled pressure response.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseResponse<T> {
    channels: Vec<Vec<T>>,
    sample_rate: u32,
    pub metadata: IrMetadata,
}

impl<T: Real> ImpulseResponse<T> {
    pub fn new(channels: Vec<Vec<T>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        let len = channels.first().map_or(0, Vec::len);
        if channels.is_empty() || len == 0 {
            return Err(Error::invalid(
                "samples",
                "impulse response must be non-empty",
            ));
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::invalid(
                "samples",
                "all channels must have equal length",
            ));
        }
        Ok(ImpulseResponse {
            channels,
            sample_rate,
            metadata: IrMetadata::default(),
        })
    }

    pub fn with_metadata(mut self, metadata: IrMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, index: usize) -> Result<&[T]> {
        self.channels.get(index).map(Vec::as_slice).ok_or_else(|| {
            Error::invalid(
                "channel",
                format!("{index} out of range ({} channels)", self.n_channels()),
            )
        })
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<T>> {
        self.channels
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(mut self, gain: T) -> Self {
        for c in &mut self.channels {
            for s in c.iter_mut() {
                *s = *s * gain;
            }
        }
        self
    }
}

/// Schroeder backward-integrated energy decay, normalized to 0 dB at t = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyDecayCurve<T> {
    pub values_db: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> EnergyDecayCurve<T> {
    /// Deepest level reached.
    pub fn min_db(&self) -> T {
        self.values_db.iter().copied().fold(T::zero(), T::min)
    }
}

/// `EDC(t) = 10 log10( sum_{tau >= t} h^2 / sum_{tau >= 0} h^2 )`, floored at
/// -120 dB.
pub fn schroeder_edc<T: Real>(
    ir: &ImpulseResponse<T>,
    channel: usize,
) -> Result<EnergyDecayCurve<T>> {
    let h = ir.channel(channel)?;
    let mut tail = vec![T::zero(); h.len()];
    let mut acc = T::zero();
    for (i, &x) in h.iter().enumerate().rev() {
        acc = acc + x * x;
        tail[i] = acc;
    }
    let total = acc;
    if !(total > T::zero()) {
        return Err(Error::SilentIr { channel });
    }
    let floor = T::lit(EDC_FLOOR_DB);
    let ten = T::lit(10.0);
    let mut prev = T::zero();
    let values_db = tail
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let db = if e > T::zero() {
                (ten * (e / total).log10()).max(floor)
            } else {
                floor
            };
            // Round-off can nudge the partial sums; keep the curve monotone.
            let db = if i == 0 { T::zero() } else { db.min(prev) };
            prev = db;
            db
        })
        .collect();
    Ok(EnergyDecayCurve {
        values_db,
        sample_rate: ir.sample_rate(),
    })
}

/// T30 estimate: least-squares line over the -5 dB to -35 dB portion of the
/// decay, extrapolated to 60 dB.
pub fn estimate_t60<T: Real>(edc: &EnergyDecayCurve<T>) -> Result<T> {
    let v = &edc.values_db;
    let hi = T::lit(-5.0);
    let lo = T::lit(-35.0);
    let Some(end) = v.iter().position(|&x| x < lo) else {
        let deepest = v.iter().copied().fold(T::zero(), T::min);
        // A curve touching -35 exactly still qualifies.
        if deepest <= lo {
            return fit_t60(v, hi, v.len(), edc.sample_rate);
        }
        return Err(Error::InsufficientDecay {
            deepest_db: deepest.as_f64(),
        });
    };
    fit_t60(v, hi, end, edc.sample_rate)
}

fn fit_t60<T: Real>(v: &[T], hi: T, end: usize, fs: u32) -> Result<T> {
    let start = v.iter().position(|&x| x <= hi).unwrap_or(0).min(end);
    let n = end - start;
    if n < 2 {
        return Err(Error::InsufficientDecay {
            deepest_db: v.iter().copied().fold(T::zero(), T::min).as_f64(),
        });
    }
    let fs = fs as f64;
    let nf = n as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, y) in v[start..end].iter().enumerate() {
        sx += (start + i) as f64 / fs;
        sy += y.as_f64();
    }
    let (mx, my) = (sx / nf, sy / nf);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in v[start..end].iter().enumerate() {
        let dx = (start + i) as f64 / fs - mx;
        sxy += dx * (y.as_f64() - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::InsufficientDecay {
            deepest_db: v.iter().copied().fold(T::zero(), T::min).as_f64(),
        });
    }
    Ok(T::lit(-60.0 / slope))
}

/// Sample indices splitting one channel into direct, early and late parts:
/// `[0, direct_end)`, `[direct_end, early_end)`, `[early_end, len)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub direct_arrival: usize,
    pub direct_end: usize,
    pub early_end: usize,
}

/// Segments a channel around its geometric direct-path arrival.
pub fn segment_ir<T: Real>(ir: &ImpulseResponse<T>, channel: usize) -> Result<Segmentation> {
    ir.channel(channel)?;
    let source = ir
        .metadata
        .source
        .ok_or(Error::MetadataRequired("source position"))?;
    let receiver = *ir
        .metadata
        .receivers
        .get(channel)
        .ok_or(Error::MetadataRequired("receiver position for channel"))?;
    let fs = ir.sample_rate() as f64;
    let len = ir.len();
    let arrival = (source.distance(receiver) / SPEED_OF_SOUND * fs).round() as usize;
    let direct_end = (arrival + (DIRECT_WINDOW_S * fs).round() as usize).min(len);
    let early_end = (arrival + (EARLY_WINDOW_S * fs).round() as usize).min(len);
    Ok(Segmentation {
        direct_arrival: arrival.min(len),
        direct_end,
        early_end,
    })
}

/// Squared-sample energy per segmentation region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionEnergies {
    pub direct: f64,
    pub early: f64,
    pub late: f64,
}

impl RegionEnergies {
    pub fn total(&self) -> f64 {
        self.direct + self.early + self.late
    }

    /// Fractions of the total, in the order (direct, early, late).
    pub fn shares(&self) -> (f64, f64, f64) {
        let t = self.total();
        if t > 0.0 {
            (self.direct / t, self.early / t, self.late / t)
        } else {
            (0.0, 0.0, 0.0)
        }
    }

    pub fn late_share(&self) -> f64 {
        self.shares().2
    }
}

fn energy<T: Real>(x: &[T]) -> f64 {
    x.iter()
        .map(|&s| {
            let s = s.as_f64();
            s * s
        })
        .sum()
}

pub fn region_energies<T: Real>(
    ir: &ImpulseResponse<T>,
    channel: usize,
    seg: &Segmentation,
) -> Result<RegionEnergies> {
    let h = ir.channel(channel)?;
    if seg.direct_end > seg.early_end || seg.early_end > h.len() {
        return Err(Error::invalid(
            "segmentation",
            "indices out of order or beyond IR length",
        ));
    }
    Ok(RegionEnergies {
        direct: energy(&h[..seg.direct_end]),
        early: energy(&h[seg.direct_end..seg.early_end]),
        late: energy(&h[seg.early_end..]),
    })
}

/// `10 log10(E_direct / E_after_direct)`; `+inf` when nothing follows the
/// direct window.
pub fn direct_to_reverberant_ratio<T: Real>(
    ir: &ImpulseResponse<T>,
    channel: usize,
    seg: &Segmentation,
) -> Result<f64> {
    let e = region_energies(ir, channel, seg)?;
    let reverberant = e.early + e.late;
    if reverberant <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (e.direct / reverberant).log10())
}

/// One row of per-channel analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelAnalysis {
    pub channel: usize,
    pub t60: std::result::Result<f64, String>,
    pub drr_db: f64,
    pub energies: RegionEnergies,
    pub edc_db: Vec<f64>,
}

/// T60, DRR and region energies of one channel. Decay failures are reported
/// in the row rather than aborting.
pub fn analyze_channel<T: Real>(
    ir: &ImpulseResponse<T>,
    channel: usize,
) -> Result<ChannelAnalysis> {
    let seg = segment_ir(ir, channel)?;
    let edc = schroeder_edc(ir, channel)?;
    let t60 = estimate_t60(&edc)
        .map(Real::as_f64)
        .map_err(|e| e.to_string());
    Ok(ChannelAnalysis {
        channel,
        t60,
        drr_db: direct_to_reverberant_ratio(ir, channel, &seg)?,
        energies: region_energies(ir, channel, &seg)?,
        edc_db: edc.values_db.iter().map(|v| v.as_f64()).collect(),
    })
}
