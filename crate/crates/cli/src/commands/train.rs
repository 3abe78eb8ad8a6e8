use super::{create_dir, parse_material, required, write_file, CREATED_BY};
use crate::config::{write_snapshot, ConfigFile};
use crate::error::{CliError, Result};
use clap::Args;
use ndfem::constitutive::{serialize_model, AnalyticKind, AnalyticModel, CheckpointMeta, ConstitutiveModel, Hnn, HnnArchitecture};
use ndfem::discovery::{bfgs_train_observed, select_best, ArchitectureGrid, EpochRecord, MultiSeedResult, TrainOptions, TrainResult, TrainingProblem};
use ndfem::experiments::{load_dataset, SyntheticDataset};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// Dataset file written by `dataset make`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// HNN architecture (TOML or JSON: neurons, skip, isochoric, w_scale,
    /// sigma_init).
    #[arg(long)]
    pub arch_file: Option<PathBuf>,
    /// Architecture search over a preset grid: `full` or `desk`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Calibrate an analytic law (ih, mr, fu, nh) instead of an HNN.
    #[arg(long)]
    pub analytic: Option<String>,
    /// Number of initialization seeds per architecture.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// First initialization seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epoch cap per seed.
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Epochs in the relative-improvement window.
    #[arg(long)]
    pub window: Option<usize>,
    /// Stop when the loss improves by less than this over the window.
    #[arg(long)]
    pub rel_improvement: Option<f64>,
    /// Write a checkpoint every this many epochs (0 disables).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

enum Source {
    Architecture(HnnArchitecture),
    Grid(Vec<HnnArchitecture>),
    Analytic(AnalyticKind),
}

#[derive(Serialize)]
struct SeedEntry {
    seed: u64,
    loss: Option<f64>,
    stalled: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct CandidateEntry {
    architecture: HnnArchitecture,
    loss: Option<f64>,
    best_seed: Option<u64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Summary {
    model: String,
    best_seed: u64,
    loss: f64,
    displacement_term: f64,
    reaction_term: f64,
    grad_norm: f64,
    epochs: usize,
    stop: serde_json::Value,
    per_seed: Vec<SeedEntry>,
    grid: Vec<CandidateEntry>,
}

fn read_architecture(path: &Path) -> Result<HnnArchitecture> {
    let text = super::read_file(path)?;
    let arch: HnnArchitecture = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e: toml::de::Error| CliError::config(format!("{}: {}", path.display(), e.message())))?
    };
    arch.validate().map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(arch)
}

fn truth_kind(ds: &SyntheticDataset) -> Option<AnalyticKind> {
    AnalyticKind::from_tag(&ds.meta.ground_truth.model_kind)
}

fn source(a: &TrainArgs, ds: &SyntheticDataset, dim: usize) -> Result<Source> {
    let given = [a.arch_file.is_some(), a.grid.is_some(), a.analytic.is_some()].iter().filter(|&&b| b).count();
    if given > 1 {
        return Err(CliError::config("--arch-file, --grid and --analytic are mutually exclusive"));
    }
    if let Some(p) = &a.arch_file {
        return Ok(Source::Architecture(read_architecture(p)?));
    }
    if let Some(g) = &a.grid {
        let grid = match g.as_str() {
            "full" => ArchitectureGrid::full(),
            "desk" => ArchitectureGrid::desk(),
            _ => return Err(CliError::config(format!("unknown grid {g:?} (expected full or desk)"))),
        };
        return Ok(Source::Grid(grid.candidates()));
    }
    if let Some(k) = &a.analytic {
        return Ok(Source::Analytic(parse_material(k)?));
    }
    let kind = truth_kind(ds).unwrap_or(AnalyticKind::MooneyRivlin);
    HnnArchitecture::preset(dim, kind)
        .map(Source::Architecture)
        .ok_or_else(|| CliError::config(format!("no preset architecture for dimension {dim}; pass --arch-file")))
}


/// Where one training run writes its histories and checkpoints.
struct Sink<'a> {
    dir: &'a Path,
    /// Distinguishes grid candidates; empty otherwise.
    prefix: String,
    every: usize,
    meta: CheckpointMeta,
}

impl Sink<'_> {
    fn checkpoint(&self, model: &ConstitutiveModel, seed: u64, suffix: &str) -> Result<()> {
        let meta = CheckpointMeta { seed: Some(seed), ..self.meta.clone() };
        let path = self.dir.join("checkpoints").join(format!("{}seed{seed}-{suffix}.json", self.prefix));
        write_file(&path, serialize_model(model, &meta))
    }

    /// Trains from `init`, logging every epoch. A failed run is returned as
    /// the inner error; only output failures abort.
    fn train(
        &self,
        problem: &TrainingProblem,
        seed: u64,
        init: &ConstitutiveModel,
        opts: &TrainOptions,
    ) -> Result<std::result::Result<TrainResult, ndfem::discovery::DiscoveryError>> {
        let mut failure: Option<CliError> = None;
        let mut observer = |r: &EpochRecord, m: &ConstitutiveModel| {
            log::info!(
                "epoch run={}seed{seed} epoch={} loss={:.9e} displacement_term={:.6e} reaction_term={:.6e} grad_norm={:.6e} step={:.3e} rejections={}",
                self.prefix,
                r.epoch,
                r.loss,
                r.displacement_term,
                r.reaction_term,
                r.grad_norm,
                r.step,
                r.rejections
            );
            if self.every > 0 && r.epoch.is_multiple_of(self.every) && failure.is_none() {
                failure = self.checkpoint(m, seed, &format!("epoch{:05}", r.epoch)).err();
            }
        };
        let run = bfgs_train_observed(problem, init, opts, &mut observer);
        if let Some(e) = failure {
            return Err(e);
        }
        match &run {
            Ok(r) => {
                write_file(&self.dir.join("history").join(format!("{}seed{seed}.csv", self.prefix)), history_csv(&r.history))?;
                self.checkpoint(&r.model, seed, "final")?;
                log::info!("run done run={}seed{seed} loss={:.9e} epochs={} stop={:?}", self.prefix, r.loss.total, r.history.len() - 1, r.stop);
            }
            Err(e) => log::warn!("run failed run={}seed{seed} reason={e}", self.prefix),
        }
        Ok(run)
    }

    fn train_seeds(&self, problem: &TrainingProblem, arch: &HnnArchitecture, seeds: &[u64], opts: &TrainOptions) -> Result<MultiSeedResult> {
        let mut runs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let run = match Hnn::from_init(arch.clone(), seed) {
                Ok(h) => self.train(problem, seed, &h.into(), opts)?,
                Err(e) => return Err(CliError::config(e.to_string())),
            };
            runs.push((seed, run));
        }
        Ok(select_best(runs)?)
    }
}

fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = format!("{}\n", EpochRecord::CSV_HEADER);
    for r in history {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

fn grid_csv(entries: &[CandidateEntry]) -> String {
    let mut s = String::from("candidate,layers,neurons,skip,isochoric,w_scale,sigma_init,loss,best_seed\n");
    for (i, c) in entries.iter().enumerate() {
        let a = &c.architecture;
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{}",
            a.depth(),
            a.neurons.first().copied().unwrap_or(0),
            a.skip,
            a.isochoric,
            a.w_scale,
            a.sigma_init,
            c.loss.map(|l| format!("{l:.17e}")).unwrap_or_default(),
            c.best_seed.map(|s| s.to_string()).unwrap_or_default()
        );
    }
    s
}

pub fn train(cfg: &ConfigFile, flags: &TrainArgs) -> Result<()> {
    let mut a = cfg.resolve("train", flags)?;
    let dataset = required(a.dataset.clone(), "dataset")?;
    let out = required(a.out.clone(), "out")?;
    let n_seeds = *a.seeds.get_or_insert(2);
    if n_seeds == 0 {
        return Err(CliError::config("--seeds must be at least 1"));
    }
    let first = *a.seed.get_or_insert(0);
    let d = TrainOptions::default();
    let opts = TrainOptions {
        max_epochs: *a.max_epochs.get_or_insert(d.max_epochs),
        window: *a.window.get_or_insert(d.window),
        rel_improvement: *a.rel_improvement.get_or_insert(d.rel_improvement),
        ..d
    };
    let every = *a.checkpoint_every.get_or_insert(50);

    let ds = load_dataset(&dataset).map_err(|e| CliError::from(e).context(dataset.display()))?;
    let problem = TrainingProblem::from_dataset(&ds)?;
    let dim = problem.experiments.first().map(|e| e.space.mesh().dim()).ok_or_else(|| CliError::data("dataset has no experiments"))?;
    let src = source(&a, &ds, dim)?;

    create_dir(&out)?;
    write_snapshot(&out.join("config.toml"), "train", "train", &a)?;
    let mut provenance = BTreeMap::new();
    provenance.insert("dataset".to_string(), dataset.display().to_string());
    provenance.insert(
        "ground_truth".to_string(),
        serde_json::to_string(&ds.meta.ground_truth).map_err(|e| CliError::data(e.to_string()))?,
    );
    provenance.insert("sigma_noise".to_string(), format!("{:e}", ds.meta.sigma_noise));
    provenance.insert("mask".to_string(), serde_json::to_string(&ds.meta.mask).unwrap_or_default());
    let meta = CheckpointMeta { seed: None, created_by: CREATED_BY.to_string(), provenance };
    let sink = |prefix: String| Sink { dir: &out, prefix, every, meta: meta.clone() };
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| first + i).collect();

    let mut grid = Vec::new();
    let best = match src {
        Source::Architecture(arch) => sink(String::new()).train_seeds(&problem, &arch, &seeds, &opts)?,
        Source::Analytic(kind) => {
            let init: ConstitutiveModel = AnalyticModel::with_defaults(kind).into();
            let run = sink(String::new()).train(&problem, first, &init, &opts)?;
            select_best(vec![(first, run)])?
        }
        Source::Grid(candidates) => {
            let mut best: Option<MultiSeedResult> = None;
            for (i, arch) in candidates.iter().enumerate() {
                log::info!("candidate index={i} of={} architecture={arch:?}", candidates.len());
                match sink(format!("c{i:03}-")).train_seeds(&problem, arch, &seeds, &opts) {
                    Ok(r) => {
                        grid.push(CandidateEntry { architecture: arch.clone(), loss: Some(r.best.loss.total), best_seed: Some(r.best_seed), error: None });
                        if best.as_ref().is_none_or(|b| r.best.loss.total < b.best.loss.total) {
                            best = Some(r);
                        }
                    }
                    Err(e) if e.category == crate::error::Category::Solver => {
                        grid.push(CandidateEntry { architecture: arch.clone(), loss: None, best_seed: None, error: Some(e.message) })
                    }
                    Err(e) => return Err(e),
                }
            }
            write_file(&out.join("grid.csv"), grid_csv(&grid))?;
            best.ok_or_else(|| CliError::solver("no grid candidate could be trained"))?
        }
    };

    let r = &best.best;
    let model_meta = CheckpointMeta { seed: Some(best.best_seed), ..meta.clone() };
    write_file(&out.join("model.json"), serialize_model(&r.model, &model_meta))?;
    write_file(&out.join("history.csv"), history_csv(&r.history))?;
    let summary = Summary {
        model: r.model.label(),
        best_seed: best.best_seed,
        loss: r.loss.total,
        displacement_term: r.loss.displacement_term,
        reaction_term: r.loss.reaction_term,
        grad_norm: r.grad_norm,
        epochs: r.history.len() - 1,
        stop: serde_json::to_value(&r.stop).unwrap_or_default(),
        per_seed: best
            .per_seed
            .iter()
            .map(|s| SeedEntry { seed: s.seed, loss: s.loss, stalled: s.stalled, error: s.error.clone() })
            .collect(),
        grid,
    };
    write_file(&out.join("summary.json"), serde_json::to_string_pretty(&summary).map_err(|e| CliError::data(e.to_string()))?)?;
    log::info!("train done dir={} best_seed={} loss={:.9e} epochs={}", out.display(), best.best_seed, r.loss.total, summary.epochs);
    Ok(())
}
