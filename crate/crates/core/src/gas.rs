//! Monte Carlo path-tracing engine.
//!
//! Rays leave the source uniformly over the sphere. At every surface hit a
//! ray loses the absorbed fraction of its energy and continues either along
//! a Lambert-distributed direction (probability `s`) or the mirror direction.
//! Receivers are spheres; every ray segment crossing one deposits its energy
//! normalized by the sphere cross-section into a time histogram. The direct
//! sound is added analytically.

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analysis::{EngineKind, ImpulseResponse, IrMetadata};
use crate::error::{Error, Result};
use crate::geometry::{reflect_unchecked, sample_lambert, sample_uniform_sphere, Ray, Scene, Vec3};
use crate::materials::OCTAVE_CENTERS_HZ;
use crate::num::Real;
use crate::rng::{domain, substream};
use crate::SPEED_OF_SOUND;

/// Rays handled by one work item.
const CHUNK_RAYS: u64 = 2048;
/// Work items reduced per wave; bounds memory held by pending deposits.
const WAVE_CHUNKS: usize = 64;

fn default_max_bounces() -> u32 {
    200
}

fn default_energy_cutoff() -> f64 {
    1e-6
}

fn default_receiver_radius() -> f64 {
    0.0875
}

fn default_n_bands() -> usize {
    1
}

/// Tracer configuration. Serialized verbatim into IR sidecars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    pub n_rays: u64,
    #[serde(default = "default_max_bounces")]
    pub max_bounces: u32,
    /// Rays stop once every band falls below this fraction of their
    /// initial energy.
    #[serde(default = "default_energy_cutoff")]
    pub energy_cutoff: f64,
    #[serde(default = "default_receiver_radius")]
    pub receiver_radius: f64,
    pub fs: u32,
    pub ir_length_s: f64,
    #[serde(default = "default_n_bands")]
    pub n_bands: usize,
    pub seed: u64,
    /// Let rays hit the receivers on their first leg instead of adding the
    /// analytic direct term. Used to validate the estimator.
    #[serde(default)]
    pub stochastic_direct: bool,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            n_rays: 100_000,
            max_bounces: default_max_bounces(),
            energy_cutoff: default_energy_cutoff(),
            receiver_radius: default_receiver_radius(),
            fs: 16_000,
            ir_length_s: 1.0,
            n_bands: 1,
            seed: 0,
            stochastic_direct: false,
        }
    }
}

impl TraceParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rays == 0 {
            return Err(Error::invalid("n_rays", "at least one ray is required"));
        }
        if !(self.receiver_radius > 0.0 && self.receiver_radius <= 0.25) {
            return Err(Error::invalid("receiver_radius", "must lie in (0, 0.25] m"));
        }
        if !(0.0..1.0).contains(&self.energy_cutoff) {
            return Err(Error::invalid("energy_cutoff", "must lie in [0, 1)"));
        }
        if self.fs == 0 {
            return Err(Error::invalid("fs", "sample rate must be positive"));
        }
        if !(self.ir_length_s > 0.0 && self.ir_length_s.is_finite()) {
            return Err(Error::invalid("ir_length_s", "must be positive"));
        }
        if self.n_bands != 1 && self.n_bands != OCTAVE_CENTERS_HZ.len() {
            return Err(Error::invalid(
                "n_bands",
                "must be 1 (broadband) or 8 (octave bands)",
            ));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        (self.ir_length_s * self.fs as f64).ceil() as usize
    }
}

/// Energy bookkeeping for one trace, summed over bands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub emitted: f64,
    pub absorbed: f64,
    /// Energy left when a ray hit `max_bounces` or the cutoff.
    pub truncated: f64,
    /// Energy of rays that left an open scene.
    pub escaped: f64,
    /// Sum of ray energies over receiver crossings, without the
    /// cross-section normalization; excludes the analytic direct term.
    pub received: f64,
    pub segments: u64,
}

impl TraceStats {
    fn merge(&mut self, o: &TraceStats) {
        self.emitted += o.emitted;
        self.absorbed += o.absorbed;
        self.truncated += o.truncated;
        self.escaped += o.escaped;
        self.received += o.received;
        self.segments += o.segments;
    }
}

/// Received energy per band, receiver and time bin (bin width `1 / fs`).
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyHistogram<T> {
    data: Vec<T>,
    n_bands: usize,
    n_receivers: usize,
    n_bins: usize,
    fs: u32,
    pub stats: TraceStats,
}

impl<T: Real> EnergyHistogram<T> {
    pub fn zeros(n_bands: usize, n_receivers: usize, n_bins: usize, fs: u32) -> Self {
        EnergyHistogram {
            data: vec![T::zero(); n_bands * n_receivers * n_bins],
            n_bands,
            n_receivers,
            n_bins,
            fs,
            stats: TraceStats::default(),
        }
    }

    #[inline]
    fn offset(&self, band: usize, receiver: usize) -> usize {
        (band * self.n_receivers + receiver) * self.n_bins
    }

    pub fn bins(&self, band: usize, receiver: usize) -> &[T] {
        let o = self.offset(band, receiver);
        &self.data[o..o + self.n_bins]
    }

    pub fn bins_mut(&mut self, band: usize, receiver: usize) -> &mut [T] {
        let o = self.offset(band, receiver);
        &mut self.data[o..o + self.n_bins]
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn n_receivers(&self) -> usize {
        self.n_receivers
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    /// Band-summed energy of one receiver.
    pub fn broadband(&self, receiver: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_bins];
        for b in 0..self.n_bands {
            for (o, &v) in out.iter_mut().zip(self.bins(b, receiver)) {
                *o = *o + v;
            }
        }
        out
    }

    pub fn total(&self) -> T {
        self.data.iter().copied().sum()
    }
}

struct ChunkResult<T> {
    /// `(receiver, bin)` per deposit.
    cells: Vec<(u32, u32)>,
    /// `n_bands` energies per deposit.
    energies: Vec<T>,
    stats: TraceStats,
}

struct Tracer<'a, T> {
    scene: &'a Scene<T>,
    source: Vec3<T>,
    receivers: &'a [Vec3<T>],
    params: &'a TraceParams,
    radius_sq: T,
    deposit_scale: T,
    ray_energy: T,
    cutoff: T,
    c: T,
    fs: T,
}

impl<'a, T: Real> Tracer<'a, T> {
    fn run_chunk(&self, chunk: u64) -> ChunkResult<T> {
        let first = chunk * CHUNK_RAYS;
        let last = (first + CHUNK_RAYS).min(self.params.n_rays);
        let mut out = ChunkResult {
            cells: Vec::new(),
            energies: Vec::new(),
            stats: TraceStats::default(),
        };
        let mut energy = vec![T::zero(); self.params.n_bands];
        for ray_index in first..last {
            self.trace_ray(ray_index, &mut energy, &mut out);
        }
        out
    }

    fn trace_ray(&self, ray_index: u64, energy: &mut [T], out: &mut ChunkResult<T>) {
        let n_bands = energy.len();
        let mut rng = substream(self.params.seed, domain::TRACE, ray_index);
        let mut ray = Ray::new(self.source, sample_uniform_sphere(&mut rng));
        energy.iter_mut().for_each(|e| *e = self.ray_energy);
        out.stats.emitted += self.ray_energy.as_f64() * n_bands as f64;
        let mut path_len = T::zero();
        let n_bins = self.params.n_bins();
        for bounce in 0..=self.params.max_bounces {
            let hit = self.scene.intersect(&ray);
            let seg_len = hit.map_or(T::infinity(), |h| h.distance);
            out.stats.segments += 1;
            if bounce > 0 || self.params.stochastic_direct {
                for (ri, &rc) in self.receivers.iter().enumerate() {
                    let oc = rc - ray.origin;
                    let t = oc.dot(ray.direction).max(T::zero()).min(seg_len);
                    if (oc - ray.direction * t).norm_squared() <= self.radius_sq {
                        let time = (path_len + t) / self.c;
                        let bin = (time * self.fs).round().to_usize().unwrap_or(usize::MAX);
                        if bin < n_bins {
                            out.cells.push((ri as u32, bin as u32));
                            for &e in energy.iter() {
                                out.energies.push(e * self.deposit_scale);
                                out.stats.received += e.as_f64();
                            }
                        }
                    }
                }
            }
            let Some(hit) = hit else {
                out.stats.escaped += energy.iter().map(|e| e.as_f64()).sum::<f64>();
                return;
            };
            if bounce == self.params.max_bounces {
                out.stats.truncated += energy.iter().map(|e| e.as_f64()).sum::<f64>();
                return;
            }
            path_len = path_len + seg_len;
            let mat = self.scene.material_of(hit.triangle_index);
            let mut alive = false;
            for (b, e) in energy.iter_mut().enumerate() {
                let a = mat.absorption()[b];
                out.stats.absorbed += (*e * a).as_f64();
                *e = *e * (T::one() - a);
                alive |= *e > T::zero() && *e >= self.cutoff;
            }
            if !alive {
                out.stats.truncated += energy.iter().map(|e| e.as_f64()).sum::<f64>();
                return;
            }
            // One branch per bounce; with several bands the energies are
            // reweighted so each band stays unbiased for its own s.
            let s_mean = mat.mean_scattering();
            let u: f64 = rng.gen();
            let diffuse = T::lit(u) < s_mean;
            if n_bands > 1 {
                for (b, e) in energy.iter_mut().enumerate() {
                    let s = mat.scattering()[b];
                    let w = if diffuse {
                        s / s_mean
                    } else {
                        (T::one() - s) / (T::one() - s_mean)
                    };
                    *e = *e * w;
                }
            }
            let dir = if diffuse {
                sample_lambert(hit.normal, &mut rng)
            } else {
                reflect_unchecked(ray.direction, hit.normal)
            };
            ray = Ray::new(hit.point, dir);
        }
    }
}

/// Traces `params.n_rays` rays from `source` and accumulates the energy
/// arriving at each receiver sphere. The result is bit-identical for any
/// number of worker threads.
pub fn trace<T: Real>(
    scene: &Scene<T>,
    source: Vec3<T>,
    receivers: &[Vec3<T>],
    params: &TraceParams,
) -> Result<EnergyHistogram<T>> {
    params.validate()?;
    if scene.n_bands() != params.n_bands {
        return Err(Error::invalid(
            "n_bands",
            format!(
                "scene materials have {} bands, params ask for {}",
                scene.n_bands(),
                params.n_bands
            ),
        ));
    }
    if receivers.is_empty() {
        return Err(Error::invalid(
            "receivers",
            "at least one receiver is required",
        ));
    }
    if !scene.contains(source) {
        return Err(Error::invalid(
            "source",
            format!("{source:?} is not inside the scene"),
        ));
    }
    let radius = T::lit(params.receiver_radius);
    for (i, &r) in receivers.iter().enumerate() {
        if !scene.contains(r) {
            return Err(Error::invalid(
                "receivers",
                format!("receiver {i} at {r:?} is not inside the scene"),
            ));
        }
        if r.distance(source) <= radius {
            return Err(Error::DegenerateGeometry(format!(
                "receiver {i} sphere (radius {} m) contains the source",
                params.receiver_radius
            )));
        }
    }

    let n_bins = params.n_bins();
    let mut hist = EnergyHistogram::zeros(params.n_bands, receivers.len(), n_bins, params.fs);
    let c = T::lit(SPEED_OF_SOUND);
    let fs = T::lit(params.fs as f64);
    let four_pi = T::lit(4.0) * T::PI();

    if !params.stochastic_direct {
        for (ri, &r) in receivers.iter().enumerate() {
            if scene.segment_blocked(source, r) {
                continue;
            }
            let d = r.distance(source);
            let bin = (d / c * fs).round().to_usize().unwrap_or(usize::MAX);
            if bin < n_bins {
                let e = T::one() / (four_pi * d * d);
                for b in 0..params.n_bands {
                    let cell = &mut hist.bins_mut(b, ri)[bin];
                    *cell = *cell + e;
                }
            }
        }
    }

    let tracer = Tracer {
        scene,
        source,
        receivers,
        params,
        radius_sq: radius * radius,
        deposit_scale: T::one() / (T::PI() * radius * radius),
        ray_energy: T::one() / T::lit(params.n_rays as f64),
        cutoff: T::lit(params.energy_cutoff) / T::lit(params.n_rays as f64),
        c,
        fs,
    };
    let n_chunks = params.n_rays.div_ceil(CHUNK_RAYS);
    let mut stats = TraceStats::default();
    let mut next = 0u64;
    while next < n_chunks {
        let end = (next + WAVE_CHUNKS as u64).min(n_chunks);
        let results: Vec<ChunkResult<T>> = (next..end)
            .into_par_iter()
            .map(|ch| tracer.run_chunk(ch))
            .collect();
        // Apply in ray order so summation order never depends on scheduling.
        for res in &results {
            let nb = params.n_bands;
            for (k, &(ri, bin)) in res.cells.iter().enumerate() {
                for b in 0..nb {
                    let cell = &mut hist.bins_mut(b, ri as usize)[bin as usize];
                    *cell = *cell + res.energies[k * nb + b];
                }
            }
            stats.merge(&res.stats);
        }
        next = end;
    }
    hist.stats = stats;
    Ok(hist)
}

/// Turns an energy histogram into a pressure impulse response.
///
/// Broadband: `p[n] = sign[n] * sqrt(E[n])` with signs drawn from a stream
/// keyed by `(params.seed, receiver)`, so `sum p^2 == sum E`. Octave-band:
/// unit-power noise carriers band-limited to each octave, weighted by
/// `sqrt(E_band[n])` and summed.
pub fn histogram_to_ir<T: Real>(
    hist: &EnergyHistogram<T>,
    params: &TraceParams,
) -> Result<ImpulseResponse<T>> {
    if hist.n_bins() != params.n_bins() {
        return Err(Error::invalid(
            "histogram",
            format!(
                "has {} bins, params imply {}",
                hist.n_bins(),
                params.n_bins()
            ),
        ));
    }
    if hist.n_bands() != params.n_bands {
        return Err(Error::invalid(
            "n_bands",
            "histogram band count differs from params",
        ));
    }
    let channels: Vec<Vec<T>> = (0..hist.n_receivers())
        .into_par_iter()
        .map(|r| {
            if hist.n_bands() == 1 {
                let mut rng = substream(params.seed, domain::SIGNS, r as u64);
                hist.bins(0, r)
                    .iter()
                    .map(|&e| {
                        let sign = if rng.gen::<bool>() {
                            T::one()
                        } else {
                            -T::one()
                        };
                        sign * e.max(T::zero()).sqrt()
                    })
                    .collect()
            } else {
                multiband_channel(hist, r, params)
            }
        })
        .collect();
    Ok(ImpulseResponse::new(channels, params.fs)?)
}

fn multiband_channel<T: Real>(
    hist: &EnergyHistogram<T>,
    receiver: usize,
    params: &TraceParams,
) -> Vec<T> {
    let n = hist.n_bins();
    let nyquist = params.fs as f64 / 2.0;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = vec![0.0f64; n];
    let nb = hist.n_bands();
    for b in 0..nb {
        // Bands tile the spectrum: the first reaches down to DC, the last up
        // to Nyquist.
        let lo = if b == 0 {
            0.0
        } else {
            OCTAVE_CENTERS_HZ[b] / std::f64::consts::SQRT_2
        };
        let hi = if b + 1 == nb {
            nyquist
        } else {
            (OCTAVE_CENTERS_HZ[b] * std::f64::consts::SQRT_2).min(nyquist)
        };
        if lo >= nyquist {
            continue;
        }
        let mut rng = substream(params.seed, domain::CARRIER, (receiver * nb + b) as u64);
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|_| Complex::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0))
            .collect();
        fwd.process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let f = k.min(n - k) as f64 * params.fs as f64 / n as f64;
            let keep = f >= lo && (f < hi || (b + 1 == nb && f <= hi));
            if !keep {
                *v = Complex::new(0.0, 0.0);
            }
        }
        inv.process(&mut buf);
        let power = buf.iter().map(|c| c.re * c.re).sum::<f64>() / n as f64;
        if power <= 0.0 {
            continue;
        }
        let norm = power.sqrt().recip();
        for (o, (c, &e)) in out.iter_mut().zip(buf.iter().zip(hist.bins(b, receiver))) {
            *o += c.re * norm * e.as_f64().max(0.0).sqrt();
        }
    }
    out.into_iter().map(T::lit).collect()
}

/// Traces and synthesizes in one step, attaching geometry metadata.
pub fn render_ir_gas<T: Real>(
    scene: &Scene<T>,
    source: Vec3<T>,
    receivers: &[Vec3<T>],
    params: &TraceParams,
) -> Result<(ImpulseResponse<T>, EnergyHistogram<T>)> {
    let hist = trace(scene, source, receivers, params)?;
    let ir = histogram_to_ir(&hist, params)?.with_metadata(IrMetadata {
        engine: Some(EngineKind::Gas),
        seed: Some(params.seed),
        source: Some(source.cast()),
        receivers: receivers.iter().map(|r| r.cast()).collect(),
        room_dims: scene.shoebox_info().map(|s| s.dims.cast()),
        t60_target_s: None,
    });
    Ok((ir, hist))
}
