use super::data::SIMULATION_FILE;
use super::{create_dir, file_in, read_file, required, write_file};
use crate::config::{write_snapshot, ConfigFile};
use crate::error::{CliError, Result};
use clap::Args;
use ndfem::analysis::{default_epsilon, export_plot_data, sinkhorn_divergence, stretch_cloud, stretch_csv, subsample, SinkhornOptions, DEFAULT_MAX_SAMPLES, STRETCH_HEADER};
use ndfem::experiments::load_dataset;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StretchArgs {
    /// Simulation directories (or dataset files); repeat for several.
    #[arg(long)]
    pub run: Option<Vec<PathBuf>>,
    /// Output directory; defaults to the first run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parent_dir(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.to_path_buf()
    } else {
        p.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Principal-stretch clouds of solved experiments, one CSV per run,
/// labelled `setup<ids>-<law>`.
pub fn stretches(cfg: &ConfigFile, flags: &StretchArgs) -> Result<()> {
    let mut a = cfg.resolve("analyze_stretches", flags)?;
    let runs = required(a.run.clone().filter(|r| !r.is_empty()), "run")?;
    let out = a.out.get_or_insert_with(|| parent_dir(&runs[0])).clone();
    create_dir(&out)?;
    for run in &runs {
        let path = file_in(run, SIMULATION_FILE);
        let ds = load_dataset(&path).map_err(|e| CliError::from(e).context(path.display()))?;
        let setups: BTreeSet<u8> = ds.experiments.iter().map(|e| e.setup_id).collect();
        let ids: Vec<String> = setups.iter().map(u8::to_string).collect();
        let label = format!("setup{}-{}", ids.join("+"), ds.meta.ground_truth.model_kind);
        let cloud = stretch_cloud(&ds.experiments, &ds.solutions);
        write_file(&out.join(format!("stretches-{label}.csv")), stretch_csv(&label, &cloud))?;
        log::info!("stretches label={label} samples={} source={}", cloud.len(), path.display());
    }
    write_snapshot(&out.join("analyze-stretches.config.toml"), "analyze stretches", "analyze_stretches", &a)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkhornArgs {
    /// Directory holding `stretches*.csv` files.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Compare every cloud against this label only; all pairs otherwise.
    #[arg(long)]
    pub reference: Option<String>,
    /// Clouds larger than this are subsampled without replacement.
    #[arg(long)]
    pub max_samples: Option<usize>,
    /// Subsampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Entropic regularization; defaults to a data-dependent value per pair.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Iterations after annealing.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Tolerance on the L1 marginal error.
    #[arg(long)]
    pub tol: Option<f64>,
}

fn read_stretches(dir: &Path) -> Result<BTreeMap<String, Vec<Vec<f64>>>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("stretches") && n.ends_with(".csv")))
        .collect();
    files.sort();
    let mut clouds: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for f in &files {
        let text = read_file(f)?;
        let mut lines = text.lines();
        if lines.next() != Some(STRETCH_HEADER) {
            return Err(CliError::data(format!("{}: unexpected header", f.display())));
        }
        for (i, l) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = || CliError::data(format!("{}: line {}", f.display(), i + 2));
            let (label, rest) = l.split_once(',').ok_or_else(bad)?;
            let v = rest
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<f64>>>()?;
            if v.len() < 2 {
                return Err(bad());
            }
            clouds.entry(label.trim_matches('"').to_string()).or_default().push(v);
        }
    }
    if clouds.is_empty() {
        return Err(CliError::data(format!("no stretches*.csv files in {}", dir.display())));
    }
    Ok(clouds)
}

/// Debiased entropic OT divergences between stretch clouds.
pub fn sinkhorn(cfg: &ConfigFile, flags: &SinkhornArgs) -> Result<()> {
    let mut a = cfg.resolve("analyze_sinkhorn", flags)?;
    let run = required(a.run.clone(), "run")?;
    let d = SinkhornOptions::default();
    let max_samples = *a.max_samples.get_or_insert(DEFAULT_MAX_SAMPLES);
    let seed = *a.seed.get_or_insert(0);
    let opts = SinkhornOptions { epsilon: a.epsilon, max_iters: *a.max_iters.get_or_insert(d.max_iters), tol: *a.tol.get_or_insert(d.tol), relaxation: d.relaxation };
    if max_samples == 0 || opts.epsilon.is_some_and(|e| !(e > 0.0)) {
        return Err(CliError::config("--max-samples and --epsilon must be positive"));
    }

    let clouds: BTreeMap<String, Vec<Vec<f64>>> =
        read_stretches(&run)?.into_iter().map(|(k, v)| (k, subsample(&v, max_samples, seed))).collect();
    let labels: Vec<&String> = clouds.keys().collect();
    let pairs: Vec<(&String, &String)> = match &a.reference {
        Some(r) => {
            let r = clouds.get_key_value(r).map(|(k, _)| k).ok_or_else(|| CliError::config(format!("no cloud labelled {r:?}")))?;
            labels.iter().filter(|l| **l != r).map(|l| (*l, r)).collect()
        }
        None => labels.iter().enumerate().flat_map(|(i, x)| labels[i + 1..].iter().map(move |y| (*x, *y))).collect(),
    };
    let mut csv = String::from("label_a,label_b,n_a,n_b,epsilon,divergence\n");
    for (x, y) in pairs {
        let (ca, cb) = (&clouds[x], &clouds[y]);
        if ca[0].len() != cb[0].len() {
            return Err(CliError::data(format!("clouds {x:?} and {y:?} have different dimensions")));
        }
        let eps = opts.epsilon.unwrap_or_else(|| default_epsilon(ca, cb));
        let s = sinkhorn_divergence(ca, cb, &SinkhornOptions { epsilon: Some(eps), ..opts })?;
        log::info!("sinkhorn a={x} b={y} n_a={} n_b={} epsilon={eps:.6e} divergence={s:.9e}", ca.len(), cb.len());
        let _ = writeln!(csv, "{x},{y},{},{},{eps:.17e},{s:.17e}", ca.len(), cb.len());
    }
    write_file(&run.join("sinkhorn.csv"), csv)?;
    write_snapshot(&run.join("analyze-sinkhorn.config.toml"), "analyze sinkhorn", "analyze_sinkhorn", &a)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportArgs {
    /// Directory holding `evaluation*.json` (and optionally
    /// `stretches*.csv`) files.
    #[arg(long)]
    pub run: Option<PathBuf>,
}

pub fn export(cfg: &ConfigFile, flags: &ExportArgs) -> Result<()> {
    let a = cfg.resolve("analyze_export", flags)?;
    let run = required(a.run.clone(), "run")?;
    let files = export_plot_data(&run)?;
    for f in &files.files {
        log::info!("exported path={}", f.display());
    }
    write_snapshot(&run.join("analyze-export.config.toml"), "analyze export", "analyze_export", &a)
}
