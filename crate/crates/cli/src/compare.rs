//! `compare`: per-pair metric deltas between two paired datasets.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use roomsim::dataset::Manifest;
use serde::Serialize;

use crate::analyze::{analyze_wav, fmt_db, Row};
use crate::{usage, CliError, CliResult};

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    manifest_a: PathBuf,
    #[arg(long)]
    manifest_b: PathBuf,
    /// Emit the full JSON report instead of a text summary.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Deltas are B minus A for one channel of one paired room.
#[derive(Debug, Serialize)]
pub struct PairDelta {
    pub index: u64,
    pub channel: usize,
    pub t60_a_s: Option<f64>,
    pub t60_b_s: Option<f64>,
    pub delta_t60_s: Option<f64>,
    pub delta_drr_db: Option<f64>,
    pub late_share_a: f64,
    pub late_share_b: f64,
    pub delta_late_share: f64,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub pairs: usize,
    pub channels: usize,
    pub mean_delta_t60_s: Option<f64>,
    pub mean_abs_delta_t60_s: Option<f64>,
    pub mean_delta_drr_db: Option<f64>,
    pub mean_delta_late_share: f64,
    /// Fraction of channels whose late share is larger in B than in A.
    pub frac_late_share_b_greater: f64,
    /// The same per pair, using each IR's mean late share over channels.
    pub frac_pairs_late_share_b_greater: f64,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub manifest_a: String,
    pub manifest_b: String,
    pub engine_a: String,
    pub engine_b: String,
    pub summary: Summary,
    pub deltas: Vec<PairDelta>,
}

fn pairing(msg: impl Into<String>) -> CliError {
    CliError::Pairing(msg.into())
}

/// Checks that both manifests describe the same rooms in the same order.
pub fn check_pairing(a: &Manifest, b: &Manifest) -> CliResult<()> {
    if a.items.len() != b.items.len() {
        return Err(pairing(format!(
            "manifests are not paired: {} items vs {}",
            a.items.len(),
            b.items.len()
        )));
    }
    for (x, y) in a.items.iter().zip(&b.items) {
        if x.index != y.index || x.config != y.config {
            return Err(pairing(format!(
                "manifests are not paired: item {} differs in its room configuration",
                x.index
            )));
        }
    }
    Ok(())
}

fn delta(a: f64, b: f64) -> Option<f64> {
    // Equal values (including equal infinities) compare as zero.
    if a == b {
        Some(0.0)
    } else if (b - a).is_finite() {
        Some(b - a)
    } else {
        None
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn build_report(path_a: &Path, path_b: &Path) -> CliResult<CompareReport> {
    let a = Manifest::load(path_a).map_err(|e| usage(format!("manifest_a: {e}")))?;
    let b = Manifest::load(path_b).map_err(|e| usage(format!("manifest_b: {e}")))?;
    check_pairing(&a, &b)?;
    let wa = a.wav_paths(path_a);
    let wb = b.wav_paths(path_b);
    let mut deltas = Vec::new();
    for (i, item) in a.items.iter().enumerate() {
        let (ra, _) = analyze_wav(item.index, &wa[i])?;
        let (rb, _) = analyze_wav(item.index, &wb[i])?;
        if ra.len() != rb.len() {
            return Err(pairing(format!(
                "manifests are not paired: item {} has {} vs {} channels",
                item.index,
                ra.len(),
                rb.len()
            )));
        }
        for (x, y) in ra.iter().zip(&rb) {
            deltas.push(pair_delta(item.index, x, y));
        }
    }
    let n = deltas.len();
    let mut pairs_b_greater = 0usize;
    for item in &a.items {
        let rows: Vec<&PairDelta> = deltas.iter().filter(|d| d.index == item.index).collect();
        let sa: f64 = rows.iter().map(|d| d.late_share_a).sum();
        let sb: f64 = rows.iter().map(|d| d.late_share_b).sum();
        if sb > sa {
            pairs_b_greater += 1;
        }
    }
    let summary = Summary {
        pairs: a.items.len(),
        channels: n,
        mean_delta_t60_s: mean(deltas.iter().filter_map(|d| d.delta_t60_s)),
        mean_abs_delta_t60_s: mean(deltas.iter().filter_map(|d| d.delta_t60_s.map(f64::abs))),
        mean_delta_drr_db: mean(deltas.iter().filter_map(|d| d.delta_drr_db)),
        mean_delta_late_share: mean(deltas.iter().map(|d| d.delta_late_share)).unwrap_or(0.0),
        frac_late_share_b_greater: if n == 0 {
            0.0
        } else {
            deltas.iter().filter(|d| d.late_share_b > d.late_share_a).count() as f64 / n as f64
        },
        frac_pairs_late_share_b_greater: if a.items.is_empty() {
            0.0
        } else {
            pairs_b_greater as f64 / a.items.len() as f64
        },
    };
    Ok(CompareReport {
        manifest_a: path_a.display().to_string(),
        manifest_b: path_b.display().to_string(),
        engine_a: a.engine.as_str().into(),
        engine_b: b.engine.as_str().into(),
        summary,
        deltas,
    })
}

fn pair_delta(index: u64, x: &Row, y: &Row) -> PairDelta {
    PairDelta {
        index,
        channel: x.channel,
        t60_a_s: x.t60_s,
        t60_b_s: y.t60_s,
        delta_t60_s: match (x.t60_s, y.t60_s) {
            (Some(p), Some(q)) => delta(p, q),
            _ => None,
        },
        delta_drr_db: delta(x.drr_db, y.drr_db),
        late_share_a: x.late_e,
        late_share_b: y.late_e,
        delta_late_share: delta(x.late_e, y.late_e).unwrap_or(0.0),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_db).unwrap_or_else(|| "n/a".into())
}

pub fn run(a: CompareArgs) -> CliResult<()> {
    let report = build_report(&a.manifest_a, &a.manifest_b)?;
    let text = if a.json {
        serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n"
    } else {
        let s = &report.summary;
        format!(
            "pairs {}, channels {}\nmean dT60 (B-A) {} s, mean |dT60| {} s\nmean dDRR {} dB\nmean d(late share) {}\nB late share > A in {:.1}% of channels, {:.1}% of pairs\n",
            s.pairs,
            s.channels,
            opt(s.mean_delta_t60_s),
            opt(s.mean_abs_delta_t60_s),
            opt(s.mean_delta_drr_db),
            s.mean_delta_late_share,
            100.0 * s.frac_late_share_b_greater,
            100.0 * s.frac_pairs_late_share_b_greater
        )
    };
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
