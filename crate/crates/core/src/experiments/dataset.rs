use super::{rebuild_experiments, solve_experiments, Experiment, ExperimentError};
use crate::constitutive::{hex_f64, parse_hex_f64, Checkpoint, CheckpointMeta, ConstitutiveModel};
use crate::fem::{reaction_force_full, BcProgram, EquilibriumSolution, NewtonOptions};
use crate::mesh::GeometrySpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationMask {
    FullField,
    BoundaryOnly,
    /// Explicit node list, applied to every experiment.
    Nodes { nodes: Vec<usize> },
}

impl ObservationMask {
    pub fn select(&self, exp: &Experiment) -> Vec<usize> {
        let mesh = exp.space.mesh();
        match self {
            ObservationMask::FullField => (0..mesh.n_nodes()).collect(),
            ObservationMask::BoundaryOnly => mesh.boundary_nodes(),
            ObservationMask::Nodes { nodes } => nodes.iter().copied().filter(|&n| n < mesh.n_nodes()).collect(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" | "full_field" => Some(ObservationMask::FullField),
            "boundary" | "boundary_only" => Some(ObservationMask::BoundaryOnly),
            _ => None,
        }
    }
}

/// Everything needed to rebuild one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub setup_id: u8,
    pub geometry_id: usize,
    pub geometry: GeometrySpec,
    pub h: f64,
    pub mesh_checksum: String,
    pub bc: BcProgram,
    pub load: f64,
    pub max_increment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub nodes: Vec<usize>,
    pub points: Vec<[f64; 3]>,
    /// Observed (possibly noisy) displacements.
    pub displacements: Vec<[f64; 3]>,
    /// `(tag, value)` per Dirichlet tag, possibly noisy.
    pub reactions: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub ground_truth: Checkpoint,
    pub sigma_noise: f64,
    pub noise_seed: u64,
    pub setup_seed: u64,
    pub mask: ObservationMask,
    pub newton: NewtonOptions,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub meta: DatasetMeta,
    pub experiments: Vec<Experiment>,
    /// Noiseless ground-truth equilibria.
    pub solutions: Vec<EquilibriumSolution>,
    pub observations: Vec<ObservationRecord>,
}

impl SyntheticDataset {
    pub fn ground_truth(&self) -> Result<ConstitutiveModel, ExperimentError> {
        self.meta.ground_truth.to_model().map_err(|e| ExperimentError::MalformedDataset(e.to_string()))
    }

    pub fn n_observed_values(&self) -> usize {
        self.observations.iter().map(|o| 3 * o.nodes.len() + o.reactions.len()).sum()
    }
}

fn noise_rng(seed: u64, experiment: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(experiment as u64);
    rng
}

/// Solves every experiment with the ground-truth model and samples noisy
/// observations. Displacement noise is absolute `N(0, σ²)` per component;
/// reaction noise is relative, `R (1 + σ ξ)`.
pub fn generate_synthetic(
    experiments: &[Experiment],
    ground_truth: &ConstitutiveModel,
    mask: &ObservationMask,
    sigma_noise: f64,
    noise_seed: u64,
    setup_seed: u64,
    newton: &NewtonOptions,
) -> Result<SyntheticDataset, ExperimentError> {
    let solutions = solve_experiments(experiments, ground_truth, newton)?;
    let meta = DatasetMeta {
        schema_version: DATASET_SCHEMA_VERSION,
        ground_truth: Checkpoint::from_model(ground_truth, &CheckpointMeta::default()),
        sigma_noise,
        noise_seed,
        setup_seed,
        mask: mask.clone(),
        newton: *newton,
    };
    observe(meta, experiments.to_vec(), solutions)
}

/// Samples observations of already solved experiments as described by
/// `meta` (mask, noise level and seed).
pub fn observe(
    meta: DatasetMeta,
    experiments: Vec<Experiment>,
    solutions: Vec<EquilibriumSolution>,
) -> Result<SyntheticDataset, ExperimentError> {
    let ground_truth = meta.ground_truth.to_model().map_err(bad)?;
    let sigma_noise = meta.sigma_noise;
    let mut observations = Vec::with_capacity(experiments.len());
    for (i, (exp, sol)) in experiments.iter().zip(&solutions).enumerate() {
        let full = sol.full(&exp.space);
        let nodes = meta.mask.select(exp);
        let mesh = exp.space.mesh();
        let dim = mesh.dim();
        let mut rng = noise_rng(meta.noise_seed, i);
        let mut draw = || -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma_noise * z
        };
        let mut points = Vec::with_capacity(nodes.len());
        let mut displacements = Vec::with_capacity(nodes.len());
        for &n in &nodes {
            points.push(*mesh.node(n));
            let mut d = [0.0; 3];
            for (c, dc) in d.iter_mut().enumerate().take(dim) {
                *dc = full[dim * n + c];
                if sigma_noise > 0.0 {
                    *dc += draw();
                }
            }
            displacements.push(d);
        }
        let mut reactions = Vec::new();
        for tag in exp.bc.dirichlet_tags() {
            let r = reaction_force_full(&exp.space, &exp.bc, &ground_truth, &full, &tag)?;
            let r = if sigma_noise > 0.0 { r * (1.0 + draw()) } else { r };
            reactions.push((tag, r));
        }
        observations.push(ObservationRecord { nodes, points, displacements, reactions });
    }
    Ok(SyntheticDataset { meta, experiments, solutions, observations })
}

/// Re-observes the stored equilibria of `ds` with another mask, noise level
/// and noise seed, without solving again.
pub fn resample(ds: &SyntheticDataset, mask: &ObservationMask, sigma_noise: f64, noise_seed: u64) -> Result<SyntheticDataset, ExperimentError> {
    let meta = DatasetMeta { mask: mask.clone(), sigma_noise, noise_seed, ..ds.meta.clone() };
    observe(meta, ds.experiments.clone(), ds.solutions.clone())
}

/// Regenerates a dataset from its own records (same mesh, model, mask,
/// seeds), optionally with a different noise level.
pub fn regenerate(ds: &SyntheticDataset, sigma_noise: Option<f64>) -> Result<SyntheticDataset, ExperimentError> {
    generate_synthetic(
        &ds.experiments,
        &ds.ground_truth()?,
        &ds.meta.mask,
        sigma_noise.unwrap_or(ds.meta.sigma_noise),
        ds.meta.noise_seed,
        ds.meta.setup_seed,
        &ds.meta.newton,
    )
}

#[derive(Serialize, Deserialize)]
struct FileMeta {
    schema_version: u32,
    ground_truth: Checkpoint,
    sigma_noise: String,
    noise_seed: u64,
    setup_seed: u64,
    mask: ObservationMask,
    newton: NewtonOptions,
}

#[derive(Serialize, Deserialize)]
struct FileExperiment {
    record: ExperimentRecord,
    solution: Vec<String>,
    load_scale: String,
    newton_iters: usize,
    residual_norm: String,
}

#[derive(Serialize, Deserialize)]
struct FileObservation {
    nodes: Vec<usize>,
    points: Vec<[String; 3]>,
    displacements: Vec<[String; 3]>,
    reactions: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct FileDataset {
    meta: FileMeta,
    experiments: Vec<FileExperiment>,
    observations: Vec<FileObservation>,
}

fn hex3(v: &[f64; 3]) -> [String; 3] {
    [hex_f64(v[0]), hex_f64(v[1]), hex_f64(v[2])]
}

fn bad<E: std::fmt::Display>(e: E) -> ExperimentError {
    ExperimentError::MalformedDataset(e.to_string())
}

fn unhex(s: &str) -> Result<f64, ExperimentError> {
    parse_hex_f64(s).map_err(bad)
}

fn unhex3(v: &[String; 3]) -> Result<[f64; 3], ExperimentError> {
    Ok([unhex(&v[0])?, unhex(&v[1])?, unhex(&v[2])?])
}

/// Serializes to JSON; every observation and solution double is stored as
/// the hex of its bit pattern.
pub fn write_dataset(ds: &SyntheticDataset) -> String {
    let file = FileDataset {
        meta: FileMeta {
            schema_version: ds.meta.schema_version,
            ground_truth: ds.meta.ground_truth.clone(),
            sigma_noise: hex_f64(ds.meta.sigma_noise),
            noise_seed: ds.meta.noise_seed,
            setup_seed: ds.meta.setup_seed,
            mask: ds.meta.mask.clone(),
            newton: ds.meta.newton,
        },
        experiments: ds
            .experiments
            .iter()
            .zip(&ds.solutions)
            .map(|(e, s)| FileExperiment {
                record: e.record(),
                solution: s.dofs.iter().map(|&x| hex_f64(x)).collect(),
                load_scale: hex_f64(s.load_scale),
                newton_iters: s.newton_iters,
                residual_norm: hex_f64(s.residual_norm),
            })
            .collect(),
        observations: ds
            .observations
            .iter()
            .map(|o| FileObservation {
                nodes: o.nodes.clone(),
                points: o.points.iter().map(hex3).collect(),
                displacements: o.displacements.iter().map(hex3).collect(),
                reactions: o.reactions.iter().map(|(t, r)| (t.clone(), hex_f64(*r))).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("dataset serialization")
}

/// Parses a dataset document and rebuilds its meshes, verifying checksums.
pub fn parse_dataset(text: &str) -> Result<SyntheticDataset, ExperimentError> {
    let file: FileDataset = serde_json::from_str(text).map_err(bad)?;
    if file.meta.schema_version != DATASET_SCHEMA_VERSION {
        return Err(ExperimentError::MalformedDataset(format!(
            "schema version {} (expected {DATASET_SCHEMA_VERSION})",
            file.meta.schema_version
        )));
    }
    if file.observations.len() != file.experiments.len() {
        return Err(bad("observation and experiment counts differ"));
    }
    let records: Vec<ExperimentRecord> = file.experiments.iter().map(|e| e.record.clone()).collect();
    let experiments = rebuild_experiments(&records)?;
    let mut solutions = Vec::with_capacity(experiments.len());
    for (fe, exp) in file.experiments.iter().zip(&experiments) {
        let dofs = fe.solution.iter().map(|s| unhex(s)).collect::<Result<Vec<_>, _>>()?;
        if dofs.len() != exp.space.n_free() {
            return Err(bad(format!("solution has {} values, expected {}", dofs.len(), exp.space.n_free())));
        }
        solutions.push(EquilibriumSolution {
            dofs,
            load_scale: unhex(&fe.load_scale)?,
            converged: true,
            newton_iters: fe.newton_iters,
            residual_norm: unhex(&fe.residual_norm)?,
            residual_history: Vec::new(),
            failure: None,
        });
    }
    let mut observations = Vec::with_capacity(file.observations.len());
    for (fo, exp) in file.observations.iter().zip(&experiments) {
        let n = exp.space.mesh().n_nodes();
        if fo.nodes.iter().any(|&i| i >= n) || fo.points.len() != fo.nodes.len() || fo.displacements.len() != fo.nodes.len() {
            return Err(bad("observation arrays are inconsistent"));
        }
        observations.push(ObservationRecord {
            nodes: fo.nodes.clone(),
            points: fo.points.iter().map(unhex3).collect::<Result<_, _>>()?,
            displacements: fo.displacements.iter().map(unhex3).collect::<Result<_, _>>()?,
            reactions: fo.reactions.iter().map(|(t, r)| Ok((t.clone(), unhex(r)?))).collect::<Result<_, ExperimentError>>()?,
        });
    }
    let meta = DatasetMeta {
        schema_version: file.meta.schema_version,
        ground_truth: file.meta.ground_truth,
        sigma_noise: unhex(&file.meta.sigma_noise)?,
        noise_seed: file.meta.noise_seed,
        setup_seed: file.meta.setup_seed,
        mask: file.meta.mask,
        newton: file.meta.newton,
    };
    Ok(SyntheticDataset { meta, experiments, solutions, observations })
}

pub fn save_dataset(ds: &SyntheticDataset, path: &Path) -> Result<(), ExperimentError> {
    std::fs::write(path, write_dataset(ds))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<SyntheticDataset, ExperimentError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}
