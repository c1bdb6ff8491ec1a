//! `analyze`: per-channel T60, DRR and energy shares as CSV or JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use roomsim::analysis::{analyze_channel, ChannelAnalysis};
use roomsim::dataset::Manifest;
use roomsim::io::read_ir;
use serde::Serialize;

use crate::{svg, usage, CliResult};

pub const CSV_HEADER: &str = "index,channel,t60_s,drr_db,direct_e,early_e,late_e";

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["ir", "manifest"]))]
pub struct AnalyzeArgs {
    /// IR WAV files (each with its sidecar).
    #[arg(long, num_args = 1..)]
    ir: Vec<PathBuf>,
    /// Dataset manifest; every listed IR is analysed.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// Emit CSV (the default).
    #[arg(long)]
    csv: bool,
    /// Directory for EDC plots (SVG, one per IR).
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// One analysed channel. Energies are shares of the channel total.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub index: u64,
    pub wav: String,
    pub channel: usize,
    pub t60_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t60_error: Option<String>,
    #[serde(serialize_with = "ser_db")]
    pub drr_db: f64,
    pub direct_e: f64,
    pub early_e: f64,
    pub late_e: f64,
    pub total_energy: f64,
}

/// Infinite DRR (nothing after the direct window) is written as "inf".
fn ser_db<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&fmt_db(*v))
    }
}

pub fn fmt_db(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn row_from(index: u64, wav: &Path, a: &ChannelAnalysis) -> Row {
    let (d, e, l) = a.energies.shares();
    Row {
        index,
        wav: wav.display().to_string(),
        channel: a.channel,
        t60_s: a.t60.as_ref().ok().copied(),
        t60_error: a.t60.as_ref().err().cloned(),
        drr_db: a.drr_db,
        direct_e: d,
        early_e: e,
        late_e: l,
        total_energy: a.energies.total(),
    }
}

/// Analyses every channel of one IR.
pub fn analyze_wav(index: u64, wav: &Path) -> anyhow::Result<(Vec<Row>, Vec<ChannelAnalysis>)> {
    let (ir, _) = read_ir(wav).with_context(|| format!("reading {}", wav.display()))?;
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for ch in 0..ir.n_channels() {
        let a = analyze_channel(&ir, ch)?;
        rows.push(row_from(index, wav, &a));
        all.push(a);
    }
    Ok((rows, all))
}

pub fn inputs(ir: &[PathBuf], manifest: Option<&Path>) -> CliResult<Vec<(u64, PathBuf)>> {
    if let Some(m) = manifest {
        let man = Manifest::load(m).map_err(|e| usage(format!("manifest: {e}")))?;
        let paths = man.wav_paths(m);
        return Ok(man.items.iter().map(|i| i.index).zip(paths).collect());
    }
    Ok(ir.iter().cloned().enumerate().map(|(i, p)| (i as u64, p)).collect())
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let t60 = r.t60_s.map(|t| format!("{t}")).unwrap_or_else(|| "nan".into());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.index,
            r.channel,
            t60,
            fmt_db(r.drr_db),
            r.direct_e,
            r.early_e,
            r.late_e
        );
    }
    s
}

pub fn run(a: AnalyzeArgs) -> CliResult<()> {
    let items = inputs(&a.ir, a.manifest.as_deref())?;
    if let Some(dir) = &a.plot {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut rows = Vec::new();
    for (index, wav) in &items {
        let (r, analyses) = analyze_wav(*index, wav)?;
        for row in r.iter().filter(|r| r.t60_error.is_some()) {
            eprintln!(
                "warning: {} channel {}: {}",
                wav.display(),
                row.channel,
                row.t60_error.as_deref().unwrap_or_default()
            );
        }
        if let Some(dir) = &a.plot {
            let fs = roomsim::io::wav_info(wav)?.1;
            let curves: Vec<&[f64]> = analyses.iter().map(|c| c.edc_db.as_slice()).collect();
            let title = wav.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let doc = svg::edc_plot(&title, &curves, fs);
            let path = dir.join(format!("edc_{index:05}.svg"));
            std::fs::write(&path, doc).with_context(|| format!("writing {}", path.display()))?;
        }
        rows.extend(r);
    }
    let text = if a.json {
        serde_json::to_string_pretty(&rows).map_err(anyhow::Error::from)? + "\n"
    } else {
        to_csv(&rows)
    };
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
