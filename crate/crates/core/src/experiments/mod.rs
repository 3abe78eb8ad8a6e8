//! Benchmark setups, forward data generation and observation datasets.

mod dataset;

pub use dataset::{
    generate_synthetic, load_dataset, observe, parse_dataset, regenerate, resample, save_dataset, write_dataset, DatasetMeta, ExperimentRecord,
    ObservationMask, ObservationRecord, SyntheticDataset, DATASET_SCHEMA_VERSION,
};

use crate::constitutive::ConstitutiveModel;
use crate::fem::{
    continuation_path, BcProgram, BoundaryCondition, DisplacementField, EquilibriumSolution, FeSpace, FemError,
    NewtonOptions,
};
use crate::mesh::{generate_mesh, GeometrySpec, MeshError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

pub const SETUP_IDS: [u8; 6] = [1, 2, 3, 4, 5, 6];
/// Number of random geometries in Setup 3.
pub const SETUP3_GEOMETRIES: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("unknown setup {0}")]
    UnknownSetup(u8),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("malformed dataset: {0}")]
    MalformedDataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshResolution {
    /// Element size matching the published node counts.
    Reference,
    /// Desk-scale meshes.
    Coarse,
    Size(f64),
}

impl MeshResolution {
    pub fn h(&self, geometry: &GeometrySpec) -> f64 {
        match self {
            MeshResolution::Reference => geometry.reference_h(),
            MeshResolution::Coarse => geometry.coarse_h(),
            MeshResolution::Size(h) => *h,
        }
    }
}

/// Geometry, boundary program and load list of one specimen. The load value
/// is used directly as the load scale of the boundary program.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupDefinition {
    pub setup_id: u8,
    pub geometry_id: usize,
    pub geometry: GeometrySpec,
    pub bc: BcProgram,
    pub load_values: Vec<f64>,
    /// Largest load increment used when ramping to a load value.
    pub max_increment: f64,
}

fn range(step: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| (k as f64 * step * 100.0).round() / 100.0).collect()
}

/// Forward direction of the Setup 6 clip.
pub const E_FRONT: [f64; 3] = [0.0, 1.0, 0.0];

pub fn setup_bc(setup_id: u8) -> Result<BcProgram, ExperimentError> {
    let normal = |v: f64| BoundaryCondition::DirichletNormal { value: v };
    let fixed = BoundaryCondition::DirichletVector { field: DisplacementField::Uniform { value: [0.0; 3] } };
    let bc = match setup_id {
        1 => BcProgram::new().with("left", normal(0.0)).with("down", normal(0.0)).with("up", normal(1.0)).with("right", normal(0.5)),
        2 => BcProgram::new()
            .with("down", fixed)
            .with("up", BoundaryCondition::DirichletVector { field: DisplacementField::Uniform { value: [0.0, 1.0, 0.0] } }),
        3 => {
            let k = 0.01;
            let loaded = BoundaryCondition::NormalSpring { stiffness: k, traction: [0.0; 3], normal: 1.0 };
            BcProgram::new()
                .with("up", BoundaryCondition::spring(k))
                .with("down", BoundaryCondition::spring(k))
                .with("left", loaded.clone())
                .with("right", loaded)
        }
        4 => BcProgram::new()
            .with("left", normal(0.0))
            .with("down", normal(0.0))
            .with("front", normal(0.0))
            .with("right", normal(1.0))
            .with("back", normal(0.5))
            .with("up", normal(0.25)),
        5 => BcProgram::new().with("down", fixed).with(
            "up",
            BoundaryCondition::DirichletVector {
                field: DisplacementField::TensionTorsion { center: [0.0, 0.0], axial: 1.0, twist: 2.0 * PI / 5.0 },
            },
        ),
        6 => BcProgram::new()
            .with("down", normal(0.0))
            .with("front", BoundaryCondition::spring(0.01))
            .with("hole", BoundaryCondition::spring(0.1))
            .with(
                "back",
                BoundaryCondition::FollowerPressure { pressure: 1.0, dead: E_FRONT.map(|e| -e / 5.0) },
            ),
        other => return Err(ExperimentError::UnknownSetup(other)),
    };
    Ok(bc)
}

pub fn setup_loads(setup_id: u8) -> Result<(Vec<f64>, f64), ExperimentError> {
    Ok(match setup_id {
        1 => (range(0.1, 8), 0.1),
        2 => (range(0.1, 10), 0.1),
        3 => (vec![-0.1, 0.1, 0.2, 0.3], 0.05),
        4 | 5 => (range(0.1, 5), 0.05),
        6 => (range(0.01, 6), 0.01),
        other => return Err(ExperimentError::UnknownSetup(other)),
    })
}

/// Seed of the `g`-th Setup 3 geometry.
pub fn setup3_geometry_seed(seed: u64, g: usize) -> u64 {
    seed.wrapping_mul(1000).wrapping_add(g as u64)
}

impl SetupDefinition {
    /// All specimens of a setup (ten random geometries for Setup 3, one
    /// otherwise).
    pub fn all(setup_id: u8, seed: u64) -> Result<Vec<Self>, ExperimentError> {
        let bc = setup_bc(setup_id)?;
        let (load_values, max_increment) = setup_loads(setup_id)?;
        let geometries = if setup_id == 3 {
            (0..SETUP3_GEOMETRIES)
                .map(|g| GeometrySpec::random_perforated(setup3_geometry_seed(seed, g)))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            vec![GeometrySpec::for_setup(setup_id, seed)?]
        };
        Ok(geometries
            .into_iter()
            .enumerate()
            .map(|(geometry_id, geometry)| SetupDefinition {
                setup_id,
                geometry_id,
                geometry,
                bc: bc.clone(),
                load_values: load_values.clone(),
                max_increment,
            })
            .collect())
    }
}

/// One loading experiment on a meshed specimen.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub setup_id: u8,
    pub geometry_id: usize,
    pub geometry: GeometrySpec,
    pub h: f64,
    pub load: f64,
    pub max_increment: f64,
    pub space: Arc<FeSpace>,
    pub bc: Arc<BcProgram>,
}

impl Experiment {
    pub fn n_steps(&self) -> usize {
        ((self.load.abs() / self.max_increment - 1e-9).ceil() as usize).max(1)
    }

    pub fn mesh_checksum(&self) -> String {
        self.space.mesh().checksum()
    }

    pub fn record(&self) -> ExperimentRecord {
        ExperimentRecord {
            setup_id: self.setup_id,
            geometry_id: self.geometry_id,
            geometry: self.geometry.clone(),
            h: self.h,
            mesh_checksum: self.mesh_checksum(),
            bc: (*self.bc).clone(),
            load: self.load,
            max_increment: self.max_increment,
        }
    }
}

/// Meshes every specimen of a setup and emits one experiment per load value.
pub fn build_setup(setup_id: u8, resolution: MeshResolution, seed: u64) -> Result<Vec<Experiment>, ExperimentError> {
    let defs = SetupDefinition::all(setup_id, seed)?;
    let spaces: Vec<Result<(SetupDefinition, f64, Arc<FeSpace>), ExperimentError>> = defs
        .into_par_iter()
        .map(|d| {
            let h = resolution.h(&d.geometry);
            let mesh = generate_mesh(&d.geometry, h)?;
            let space = FeSpace::new(mesh, &d.bc)?;
            Ok((d, h, Arc::new(space)))
        })
        .collect();
    let mut out = Vec::new();
    for s in spaces {
        let (d, h, space) = s?;
        let bc = Arc::new(d.bc.clone());
        for &load in &d.load_values {
            out.push(Experiment {
                setup_id: d.setup_id,
                geometry_id: d.geometry_id,
                geometry: d.geometry.clone(),
                h,
                load,
                max_increment: d.max_increment,
                space: space.clone(),
                bc: bc.clone(),
            });
        }
    }
    Ok(out)
}

/// Rebuilds an experiment from its record, checking the mesh checksum.
pub fn rebuild_experiment(rec: &ExperimentRecord) -> Result<Experiment, ExperimentError> {
    let mesh = generate_mesh(&rec.geometry, rec.h)?;
    if mesh.checksum() != rec.mesh_checksum {
        return Err(ExperimentError::MalformedDataset(format!(
            "mesh checksum mismatch for setup {} geometry {}",
            rec.setup_id, rec.geometry_id
        )));
    }
    let space = FeSpace::new(mesh, &rec.bc)?;
    Ok(Experiment {
        setup_id: rec.setup_id,
        geometry_id: rec.geometry_id,
        geometry: rec.geometry.clone(),
        h: rec.h,
        load: rec.load,
        max_increment: rec.max_increment,
        space: Arc::new(space),
        bc: Arc::new(rec.bc.clone()),
    })
}

/// Rebuilds all experiments, sharing one space per distinct mesh.
pub fn rebuild_experiments(records: &[ExperimentRecord]) -> Result<Vec<Experiment>, ExperimentError> {
    let mut cache: Vec<(String, Arc<FeSpace>, Arc<BcProgram>)> = Vec::new();
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let hit = cache.iter().find(|(sum, _, bc)| *sum == rec.mesh_checksum && **bc == rec.bc);
        let exp = match hit {
            Some((_, space, bc)) => Experiment {
                setup_id: rec.setup_id,
                geometry_id: rec.geometry_id,
                geometry: rec.geometry.clone(),
                h: rec.h,
                load: rec.load,
                max_increment: rec.max_increment,
                space: space.clone(),
                bc: bc.clone(),
            },
            None => {
                let e = rebuild_experiment(rec)?;
                cache.push((rec.mesh_checksum.clone(), e.space.clone(), e.bc.clone()));
                e
            }
        };
        out.push(exp);
    }
    Ok(out)
}

/// Solves every experiment with `model`. Experiments sharing a specimen are
/// ramped along one continuation path in order of increasing load magnitude
/// (separately for each load sign); distinct specimens run in parallel.
pub fn solve_experiments(
    experiments: &[Experiment],
    model: &ConstitutiveModel,
    opts: &NewtonOptions,
) -> Result<Vec<EquilibriumSolution>, ExperimentError> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, e) in experiments.iter().enumerate() {
        let key = |j: usize| {
            let o = &experiments[j];
            (Arc::ptr_eq(&o.space, &e.space), Arc::ptr_eq(&o.bc, &e.bc), o.load.signum() == e.load.signum())
        };
        match groups.iter_mut().find(|g| key(g[0]) == (true, true, true)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    let solved: Vec<Result<Vec<(usize, EquilibriumSolution)>, ExperimentError>> = groups
        .par_iter()
        .map(|g| {
            let mut order = g.clone();
            order.sort_by(|&a, &b| experiments[a].load.abs().total_cmp(&experiments[b].load.abs()));
            let first = &experiments[order[0]];
            let space = &first.space;
            let mut u = vec![0.0; space.n_free()];
            let mut s = 0.0;
            let mut out = Vec::new();
            for &i in &order {
                let e = &experiments[i];
                let n = (((e.load - s).abs() / e.max_increment - 1e-9).ceil() as usize).max(1);
                let path = continuation_path(space, &e.bc, model, &u, s, e.load, n, opts)?;
                let sol = path.into_iter().last().unwrap();
                u = sol.dofs.clone();
                s = e.load;
                out.push((i, sol));
            }
            Ok(out)
        })
        .collect();
    let mut result: Vec<Option<EquilibriumSolution>> = vec![None; experiments.len()];
    for g in solved {
        for (i, sol) in g? {
            result[i] = Some(sol);
        }
    }
    Ok(result.into_iter().map(|s| s.unwrap()).collect())
}
