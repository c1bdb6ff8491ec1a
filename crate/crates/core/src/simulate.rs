//! One-call RIR simulation for a [`RoomConfig`].

use serde::{Deserialize, Serialize};

use crate::analysis::{EngineKind, ImpulseResponse};
use crate::error::{Error, Result};
use crate::gas::{render_ir_gas, TraceParams};
use crate::geometry::make_shoebox;
use crate::image::{render_ir_image, ImageParams, Interpolation};
use crate::io::Sidecar;
use crate::materials::{absorption_for_t60, AbsorptionModel, Material};
use crate::rng::{derive_seed, domain};
use crate::sampler::RoomConfig;
use crate::SPEED_OF_SOUND;

/// Engine settings shared by both engines; each engine reads the fields
/// that concern it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub fs: u32,
    /// Defaults to `1.5 * T60 + 0.05 s` plus the longest direct delay.
    pub ir_length_s: Option<f64>,
    pub absorption_model: AbsorptionModel,
    /// Image method order; defaults to `ceil(c * T60 / min_dim)`.
    pub max_order: Option<usize>,
    pub interpolation: Interpolation,
    pub n_rays: u64,
    pub max_bounces: u32,
    pub energy_cutoff: f64,
    pub receiver_radius: f64,
    pub n_bands: usize,
    /// Tracer seed; defaults to one derived from the config seed and index.
    pub trace_seed: Option<u64>,
}

impl Default for SimParams {
    fn default() -> Self {
        let t = TraceParams::default();
        SimParams {
            fs: 16_000,
            ir_length_s: None,
            absorption_model: AbsorptionModel::default(),
            max_order: None,
            interpolation: Interpolation::default(),
            n_rays: t.n_rays,
            max_bounces: t.max_bounces,
            energy_cutoff: t.energy_cutoff,
            receiver_radius: t.receiver_radius,
            n_bands: 1,
            trace_seed: None,
        }
    }
}

pub fn default_ir_length(config: &RoomConfig) -> f64 {
    let far = config
        .mics_m
        .iter()
        .map(|m| m.distance(config.source_m))
        .fold(0.0, f64::max);
    let len = 1.5 * config.t60_target_s + 0.05 + far / SPEED_OF_SOUND;
    (len * 1000.0).ceil() / 1000.0
}

pub fn default_max_order(config: &RoomConfig) -> usize {
    let d = config.room_dims_m;
    let min_dim = d.x.min(d.y).min(d.z);
    (SPEED_OF_SOUND * config.t60_target_s / min_dim)
        .ceil()
        .max(1.0) as usize
}

/// Everything needed to render one IR, resolved from config and params.
/// The sidecar is known before any rendering, which is what lets an
/// interrupted dataset run check finished items cheaply.
#[derive(Clone, Debug, PartialEq)]
pub struct SimPlan {
    pub config: RoomConfig,
    pub engine: EngineKind,
    pub absorption: f64,
    pub image: Option<ImageParams>,
    pub trace: Option<TraceParams>,
    pub sidecar: Sidecar,
}

pub fn plan_simulation(
    config: &RoomConfig,
    engine: EngineKind,
    params: &SimParams,
) -> Result<SimPlan> {
    config.validate()?;
    if params.fs == 0 {
        return Err(Error::invalid("fs", "sample rate must be positive"));
    }
    let alpha = absorption_for_t60(
        params.absorption_model,
        config.room_dims_m,
        config.t60_target_s,
    )?;
    let ir_length_s = params
        .ir_length_s
        .unwrap_or_else(|| default_ir_length(config));
    let (image, trace) = match engine {
        EngineKind::Image => (
            Some(ImageParams {
                max_order: params
                    .max_order
                    .unwrap_or_else(|| default_max_order(config)),
                fs: params.fs,
                ir_length_s,
                interpolation: params.interpolation,
            }),
            None,
        ),
        EngineKind::Gas => {
            let t = TraceParams {
                n_rays: params.n_rays,
                max_bounces: params.max_bounces,
                energy_cutoff: params.energy_cutoff,
                receiver_radius: params.receiver_radius,
                fs: params.fs,
                ir_length_s,
                n_bands: params.n_bands,
                seed: params
                    .trace_seed
                    .unwrap_or_else(|| derive_seed(config.seed, domain::TRACE_SEED, config.index)),
                stochastic_direct: false,
            };
            t.validate()?;
            (None, Some(t))
        }
    };
    let n_samples = (ir_length_s * params.fs as f64).ceil() as usize;
    let sidecar = Sidecar {
        engine,
        seed: config.seed,
        room_dims_m: config.room_dims_m,
        source_m: config.source_m,
        mics_m: config.mics_m.clone(),
        t60_target_s: config.t60_target_s,
        sample_rate_hz: params.fs,
        index: Some(config.index as usize),
        scattering: Some(config.scattering),
        absorption: Some(alpha),
        absorption_model: Some(params.absorption_model),
        n_samples: Some(n_samples),
        max_order: image.as_ref().map(|p| p.max_order),
        trace_params: trace.clone(),
    };
    Ok(SimPlan {
        config: config.clone(),
        engine,
        absorption: alpha,
        image,
        trace,
        sidecar,
    })
}

pub fn run_plan(plan: &SimPlan) -> Result<ImpulseResponse<f64>> {
    let c = &plan.config;
    let n_bands = plan.trace.as_ref().map_or(1, |t| t.n_bands);
    let material = Material::uniform(plan.absorption, c.scattering, n_bands)?;
    let scene = make_shoebox(c.room_dims_m, material)?;
    let mut ir = match (&plan.image, &plan.trace) {
        (Some(p), _) => render_ir_image(&scene, c.source_m, &c.mics_m, p)?,
        (None, Some(t)) => render_ir_gas(&scene, c.source_m, &c.mics_m, t)?.0,
        (None, None) => unreachable!("a plan always carries engine parameters"),
    };
    ir.metadata = plan.sidecar.metadata();
    Ok(ir)
}

/// Renders the multichannel IR for `config` and returns it with its
/// sidecar.
pub fn simulate_rir(
    config: &RoomConfig,
    engine: EngineKind,
    params: &SimParams,
) -> Result<(ImpulseResponse<f64>, Sidecar)> {
    let plan = plan_simulation(config, engine, params)?;
    let ir = run_plan(&plan)?;
    Ok((ir, plan.sidecar))
}
