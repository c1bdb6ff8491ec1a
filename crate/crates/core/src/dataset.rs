//! Batch RIR generation with a manifest and resumable output.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::EngineKind;
use crate::error::{Error, Result};
use crate::io::{read_json, sidecar_path, wav_info, write_ir, write_json, Sidecar};
use crate::sampler::{sample_config_with, RoomConfig, SamplerSettings};
use crate::simulate::{plan_simulation, run_plan, SimParams, SimPlan};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub index: u64,
    /// WAV path relative to the manifest's directory.
    pub wav: String,
    pub config: RoomConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub engine: EngineKind,
    pub seed: u64,
    pub count: usize,
    pub items: Vec<ManifestItem>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        read_json(path)
    }

    /// Absolute WAV paths, resolved against the manifest's directory.
    pub fn wav_paths(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        self.items.iter().map(|it| dir.join(&it.wav)).collect()
    }
}

pub fn wav_name(engine: EngineKind, index: u64) -> String {
    format!("rir_{}_{index:05}.wav", engine.as_str())
}

pub fn manifest_name(engine: EngineKind) -> String {
    format!("manifest_{}.json", engine.as_str())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetRequest {
    pub count: usize,
    pub seed: u64,
    pub engine: Option<EngineKind>,
    pub sim: SimParams,
    pub sampler: SamplerSettings,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetSummary {
    pub written: usize,
    pub skipped: usize,
    pub manifest_path: PathBuf,
}

/// True when `wav` and its sidecar are complete and describe `plan`.
fn is_complete(wav: &Path, plan: &SimPlan) -> bool {
    let side: Sidecar = match read_json(&sidecar_path(wav)) {
        Ok(s) => s,
        Err(_) => return false,
    };
    if side != plan.sidecar {
        return false;
    }
    match wav_info(wav) {
        Ok((ch, fs, frames)) => {
            ch == plan.config.mics_m.len()
                && fs == side.sample_rate_hz
                && Some(frames) == side.n_samples
        }
        Err(_) => false,
    }
}

/// Samples `count` configs, renders each, and writes
/// `rir_{engine}_{index}.wav` + sidecar into `out_dir`, followed by
/// `manifest_{engine}.json`. Items already on disk that match their planned
/// sidecar are kept, so an interrupted run can be restarted.
///
/// `progress` is called once per finished item with the number done so far.
pub fn generate_dataset(
    req: &DatasetRequest,
    out_dir: &Path,
    progress: Option<&(dyn Fn(usize) + Sync)>,
) -> Result<DatasetSummary> {
    let engine = req.engine.unwrap_or(EngineKind::Image);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let plans: Vec<SimPlan> = (0..req.count as u64)
        .map(|i| {
            let config = sample_config_with(req.seed, i, &req.sampler)?;
            plan_simulation(&config, engine, &req.sim)
        })
        .collect::<Result<_>>()?;

    let done = AtomicUsize::new(0);
    let written = AtomicUsize::new(0);
    plans.par_iter().try_for_each(|plan| -> Result<()> {
        let wav = out_dir.join(wav_name(engine, plan.config.index));
        if !is_complete(&wav, plan) {
            let ir = run_plan(plan)?;
            write_ir(&wav, &ir, &plan.sidecar)?;
            written.fetch_add(1, Ordering::Relaxed);
        }
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(cb) = progress {
            cb(n);
        }
        Ok(())
    })?;

    let manifest = Manifest {
        engine,
        seed: req.seed,
        count: req.count,
        items: plans
            .into_iter()
            .map(|p| ManifestItem {
                index: p.config.index,
                wav: wav_name(engine, p.config.index),
                config: p.config,
            })
            .collect(),
    };
    let manifest_path = out_dir.join(manifest_name(engine));
    write_json(&manifest_path, &manifest)?;
    let written = written.into_inner();
    Ok(DatasetSummary {
        written,
        skipped: req.count - written,
        manifest_path,
    })
}
