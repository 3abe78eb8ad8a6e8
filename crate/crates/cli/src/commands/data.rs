use super::{
    analytic, check_setup, create_dir, file_in, newton, parse_material, parse_resolution, required, snapshot_beside, write_file,
};
use crate::config::{write_snapshot, ConfigFile};
use crate::error::{CliError, Result};
use clap::Args;
use ndfem::experiments::{
    build_setup, generate_synthetic, load_dataset, resample, save_dataset, setup3_geometry_seed, ObservationMask, SyntheticDataset,
    SETUP3_GEOMETRIES,
};
use ndfem::mesh::{generate_mesh, mesh_quality, save_mesh, GeometrySpec};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SIMULATION_FILE: &str = "simulation.json";

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshGenArgs {
    /// Setup id, 1 to 6.
    #[arg(long)]
    pub setup: Option<u8>,
    /// Target element size; takes precedence over --resolution.
    #[arg(long)]
    pub h: Option<f64>,
    /// `reference`, `coarse` (default) or an element size.
    #[arg(long)]
    pub resolution: Option<String>,
    /// Geometry seed (random Setup-3 perforations).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Which of the ten Setup-3 geometries to mesh.
    #[arg(long)]
    pub geometry: Option<usize>,
    /// Mesh file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn mesh_gen(cfg: &ConfigFile, flags: &MeshGenArgs) -> Result<()> {
    let mut a = cfg.resolve("mesh_gen", flags)?;
    let setup = check_setup(required(a.setup, "setup")?)?;
    let out = required(a.out.clone(), "out")?;
    let seed = *a.seed.get_or_insert(0);
    let geometry = *a.geometry.get_or_insert(0);
    let resolution = parse_resolution(a.resolution.get_or_insert_with(|| "coarse".into()))?;
    let spec = if setup == 3 {
        if geometry >= SETUP3_GEOMETRIES {
            return Err(CliError::config(format!("--geometry must be below {SETUP3_GEOMETRIES}")));
        }
        GeometrySpec::random_perforated(setup3_geometry_seed(seed, geometry))?
    } else {
        if geometry != 0 {
            return Err(CliError::config(format!("setup {setup} has a single geometry")));
        }
        GeometrySpec::for_setup(setup, seed)?
    };
    let h = *a.h.get_or_insert_with(|| resolution.h(&spec));
    if !(h > 0.0 && h.is_finite()) {
        return Err(CliError::config(format!("element size {h} must be positive")));
    }
    let mesh = generate_mesh(&spec, h)?;
    let q = mesh_quality(&mesh);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_mesh(&mesh, &out)?;
    write_snapshot(&snapshot_beside(&out), "mesh gen", "mesh_gen", &a)?;
    log::info!(
        "mesh written path={} nodes={} cells={} h={h} min_angle_deg={:.2} checksum={}",
        out.display(),
        q.n_nodes,
        q.n_cells,
        q.min_angle_deg,
        mesh.checksum()
    );
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Setup id, 1 to 6.
    #[arg(long)]
    pub setup: Option<u8>,
    /// Ground-truth law: ih, mr, fu or nh.
    #[arg(long)]
    pub material: Option<String>,
    /// `reference`, `coarse` (default) or an element size.
    #[arg(long)]
    pub resolution: Option<String>,
    /// Geometry seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Newton absolute residual tolerance.
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Newton relative residual tolerance.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Newton iterations per load step.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Noiseless full-field solutions and reactions of every experiment in a
/// setup.
pub fn simulate(cfg: &ConfigFile, flags: &SimulateArgs) -> Result<()> {
    let mut a = cfg.resolve("simulate", flags)?;
    let setup = check_setup(required(a.setup, "setup")?)?;
    let kind = parse_material(&required(a.material.clone(), "material")?)?;
    let out = required(a.out.clone(), "out")?;
    let resolution = parse_resolution(a.resolution.get_or_insert_with(|| "coarse".into()))?;
    let seed = *a.seed.get_or_insert(0);
    let opts = newton(a.abs_tol, a.rel_tol, a.max_iters)?;
    (a.abs_tol, a.rel_tol, a.max_iters) = (Some(opts.abs_tol), Some(opts.rel_tol), Some(opts.max_iters));

    create_dir(&out)?;
    let exps = build_setup(setup, resolution, seed)?;
    log::info!("simulate setup={setup} material={} experiments={} nodes={}", kind.tag(), exps.len(), exps[0].space.mesh().n_nodes());
    let ds = generate_synthetic(&exps, &analytic(kind), &ObservationMask::FullField, 0.0, seed, seed, &opts)?;
    save_dataset(&ds, &out.join(SIMULATION_FILE))?;
    write_file(&out.join("reactions.csv"), reactions_csv(&ds))?;
    write_snapshot(&out.join("config.toml"), "simulate", "simulate", &a)?;
    for (e, s) in ds.experiments.iter().zip(&ds.solutions) {
        log::debug!("solved geometry={} load={} newton_iters={} residual={:.3e}", e.geometry_id, e.load, s.newton_iters, s.residual_norm);
    }
    log::info!("simulation written dir={}", out.display());
    Ok(())
}

fn reactions_csv(ds: &SyntheticDataset) -> String {
    let mut s = String::from("setup,geometry,load,tag,reaction\n");
    for (e, o) in ds.experiments.iter().zip(&ds.observations) {
        for (tag, r) in &o.reactions {
            let _ = writeln!(s, "{},{},{},{tag},{r:.17e}", e.setup_id, e.geometry_id, e.load);
        }
    }
    s
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMakeArgs {
    /// Simulation directory (or a dataset file) holding solved experiments.
    #[arg(long)]
    pub from: Option<PathBuf>,
    /// `full` or `boundary` (default).
    #[arg(long)]
    pub mask: Option<String>,
    /// Displacement noise standard deviation; reactions get the same
    /// relative noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset file; defaults to `dataset-<mask>-<noise>-s<seed>.json` next
    /// to the source.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn dataset_make(cfg: &ConfigFile, flags: &DatasetMakeArgs) -> Result<()> {
    let mut a = cfg.resolve("dataset_make", flags)?;
    let from = required(a.from.clone(), "from")?;
    let mask_name = a.mask.get_or_insert_with(|| "boundary".into()).clone();
    let mask = ObservationMask::parse(&mask_name).ok_or_else(|| CliError::config(format!("unknown mask {mask_name:?} (expected full or boundary)")))?;
    let noise = *a.noise.get_or_insert(0.0);
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::config("--noise must be a non-negative number"));
    }
    let seed = *a.seed.get_or_insert(0);
    let source = file_in(&from, SIMULATION_FILE);
    let out = a
        .out
        .get_or_insert_with(|| default_dataset_path(&source, &mask_name, noise, seed))
        .clone();
    if out == source {
        return Err(CliError::config("--out would overwrite the source dataset"));
    }
    let src = load_dataset(&source).map_err(|e| CliError::from(e).context(source.display()))?;
    let ds = resample(&src, &mask, noise, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_dataset(&ds, &out)?;
    write_snapshot(&snapshot_beside(&out), "dataset make", "dataset_make", &a)?;
    log::info!("dataset written path={} experiments={} observed_values={}", out.display(), ds.experiments.len(), ds.n_observed_values());
    Ok(())
}

fn default_dataset_path(source: &Path, mask: &str, noise: f64, seed: u64) -> PathBuf {
    let dir = source.parent().unwrap_or(Path::new("."));
    dir.join(format!("dataset-{mask}-{noise:e}-s{seed}.json"))
}
