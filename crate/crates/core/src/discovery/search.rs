use super::{bfgs_train, DiscoveryError, TrainOptions, TrainResult, TrainingProblem};
use crate::constitutive::{AnalyticKind, AnalyticModel, ConstitutiveModel, Hnn, HnnArchitecture};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    /// Final training loss, `None` when the run failed outright.
    pub loss: Option<f64>,
    pub stalled: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MultiSeedResult {
    pub best: TrainResult,
    pub best_seed: u64,
    /// Sorted by loss; failed runs last.
    pub per_seed: Vec<SeedSummary>,
}

fn rank(r: &TrainResult) -> (bool, f64) {
    (r.stalled(), r.loss.total)
}

/// Trains one HNN per seed and keeps the lowest training loss. Runs that
/// stalled are only selected when every run stalled.
pub fn multi_seed_train(
    problem: &TrainingProblem,
    arch: &HnnArchitecture,
    seeds: &[u64],
    opts: &TrainOptions,
) -> Result<MultiSeedResult, DiscoveryError> {
    let runs = seeds
        .iter()
        .map(|&seed| {
            let run = Hnn::from_init(arch.clone(), seed)
                .map_err(DiscoveryError::from)
                .and_then(|h| bfgs_train(problem, &ConstitutiveModel::from(h), opts));
            match &run {
                Ok(r) => log::info!("seed {seed}: loss {:.6e} stop {:?}", r.loss.total, r.stop),
                Err(e) => log::warn!("seed {seed}: training failed: {e}"),
            }
            (seed, run)
        })
        .collect();
    select_best(runs)
}

/// Picks the best of several finished runs with the rule of [`multi_seed_train`].
pub fn select_best(runs: Vec<(u64, Result<TrainResult, DiscoveryError>)>) -> Result<MultiSeedResult, DiscoveryError> {
    let mut best: Option<(u64, TrainResult)> = None;
    let mut per_seed = Vec::with_capacity(runs.len());
    for (seed, run) in runs {
        match run {
            Ok(r) => {
                per_seed.push(SeedSummary { seed, loss: Some(r.loss.total), stalled: r.stalled(), error: None });
                let better = best.as_ref().is_none_or(|(_, b)| {
                    let ((rs, rl), (bs, bl)) = (rank(&r), rank(b));
                    rs.cmp(&bs).then(rl.total_cmp(&bl)).is_lt()
                });
                if better {
                    best = Some((seed, r));
                }
            }
            Err(e) => per_seed.push(SeedSummary { seed, loss: None, stalled: false, error: Some(e.to_string()) }),
        }
    }
    per_seed.sort_by(|a, b| match (a.loss, b.loss) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.seed.cmp(&b.seed),
    });
    match best {
        Some((best_seed, best)) => Ok(MultiSeedResult { best, best_seed, per_seed }),
        None => Err(DiscoveryError::AllSeedsFailed(
            per_seed.iter().filter_map(|s| s.error.clone()).collect::<Vec<_>>().join("; "),
        )),
    }
}

/// Finite candidate sets for the architecture search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureGrid {
    pub layers: Vec<usize>,
    pub neurons: Vec<usize>,
    pub skip: Vec<bool>,
    pub isochoric: Vec<bool>,
    pub sigma_init: Vec<f64>,
    pub w_scale: Vec<f64>,
}

impl ArchitectureGrid {
    /// Full candidate sets.
    pub fn full() -> Self {
        Self {
            layers: vec![1, 2, 3],
            neurons: vec![5, 10, 20],
            skip: vec![false, true],
            isochoric: vec![false, true],
            sigma_init: vec![0.05, 0.1, 0.2, 0.5, 0.8],
            w_scale: vec![1.0, 5.0, 10.0, 20.0],
        }
    }

    /// Reduced sets for quick runs.
    pub fn desk() -> Self {
        Self {
            layers: vec![1, 2],
            neurons: vec![5],
            skip: vec![false],
            isochoric: vec![false, true],
            sigma_init: vec![0.1, 0.5],
            w_scale: vec![1.0, 10.0],
        }
    }

    /// Every distinct architecture; skip connections only vary for depth > 1.
    pub fn candidates(&self) -> Vec<HnnArchitecture> {
        let mut out = Vec::new();
        for &l in &self.layers {
            for &n in &self.neurons {
                for &skip in &self.skip {
                    if l == 1 && skip && self.skip.contains(&false) {
                        continue;
                    }
                    for &iso in &self.isochoric {
                        for &sigma in &self.sigma_init {
                            for &w in &self.w_scale {
                                out.push(HnnArchitecture::uniform(l, n, skip && l > 1, iso, w, sigma));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CandidateReport {
    pub architecture: HnnArchitecture,
    pub loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub candidates: Vec<CandidateReport>,
    pub best_index: usize,
    pub best: MultiSeedResult,
}

/// Trains every candidate and selects the lowest training loss.
pub fn grid_search(
    problem: &TrainingProblem,
    candidates: &[HnnArchitecture],
    seeds: &[u64],
    opts: &TrainOptions,
) -> Result<GridReport, DiscoveryError> {
    let mut reports = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, MultiSeedResult)> = None;
    for (i, arch) in candidates.iter().enumerate() {
        match multi_seed_train(problem, arch, seeds, opts) {
            Ok(r) => {
                reports.push(CandidateReport { architecture: arch.clone(), loss: Some(r.best.loss.total), error: None });
                if best.as_ref().is_none_or(|(_, b)| r.best.loss.total < b.best.loss.total) {
                    best = Some((i, r));
                }
            }
            Err(e) => reports.push(CandidateReport { architecture: arch.clone(), loss: None, error: Some(e.to_string()) }),
        }
    }
    match best {
        Some((best_index, best)) => Ok(GridReport { candidates: reports, best_index, best }),
        None => Err(DiscoveryError::AllSeedsFailed("no grid candidate could be trained".into())),
    }
}

/// Fits the coefficients of an analytic law, starting from `init` (or the
/// law's defaults).
pub fn calibrate_analytic(
    problem: &TrainingProblem,
    kind: AnalyticKind,
    init: Option<Vec<f64>>,
    opts: &TrainOptions,
) -> Result<TrainResult, DiscoveryError> {
    let m = match init {
        Some(c) => AnalyticModel::new(kind, c)?,
        None => AnalyticModel::with_defaults(kind),
    };
    bfgs_train(problem, &m.into(), opts)
}
