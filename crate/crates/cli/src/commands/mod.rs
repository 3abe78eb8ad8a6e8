pub mod analyze;
pub mod data;
pub mod evaluate;
pub mod train;
pub mod verify;

use crate::error::{CliError, Result};
use ndfem::constitutive::{AnalyticKind, AnalyticModel, ConstitutiveModel};
use ndfem::experiments::MeshResolution;
use ndfem::fem::NewtonOptions;
use std::path::{Path, PathBuf};

pub const CREATED_BY: &str = concat!("ndfem ", env!("CARGO_PKG_VERSION"));

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::config(format!("missing --{flag} (flag or config key {})", flag.replace('-', "_"))))
}

/// `reference`, `coarse` or a positive element size.
pub fn parse_resolution(s: &str) -> Result<MeshResolution> {
    match s {
        "reference" => Ok(MeshResolution::Reference),
        "coarse" => Ok(MeshResolution::Coarse),
        _ => match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(MeshResolution::Size(h)),
            _ => Err(CliError::config(format!("resolution {s:?} is not reference, coarse or a positive size"))),
        },
    }
}

pub fn parse_material(s: &str) -> Result<AnalyticKind> {
    AnalyticKind::from_tag(s).ok_or_else(|| CliError::config(format!("unknown material {s:?} (expected ih, mr, fu or nh)")))
}

pub fn analytic(kind: AnalyticKind) -> ConstitutiveModel {
    AnalyticModel::with_defaults(kind).into()
}

pub fn check_setup(setup: u8) -> Result<u8> {
    if ndfem::experiments::SETUP_IDS.contains(&setup) {
        Ok(setup)
    } else {
        Err(CliError::config(format!("unknown setup {setup} (expected 1 to 6)")))
    }
}

/// Newton settings with optional overrides of the defaults.
pub fn newton(abs_tol: Option<f64>, rel_tol: Option<f64>, max_iters: Option<usize>) -> Result<NewtonOptions> {
    let d = NewtonOptions::default();
    let o = NewtonOptions {
        abs_tol: abs_tol.unwrap_or(d.abs_tol),
        rel_tol: rel_tol.unwrap_or(d.rel_tol),
        max_iters: max_iters.unwrap_or(d.max_iters),
        ..d
    };
    if !(o.abs_tol > 0.0 && o.rel_tol > 0.0 && o.max_iters > 0) {
        return Err(CliError::config("Newton tolerances and iteration limit must be positive"));
    }
    Ok(o)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, body).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))
}

/// `dir/name` when `path` is a directory, otherwise `path` itself.
pub fn file_in(path: &Path, name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(name)
    } else {
        path.to_path_buf()
    }
}

/// Sibling path used for the config snapshot of single-file outputs:
/// `mesh.msh` gives `mesh.config.toml`.
pub fn snapshot_beside(path: &Path) -> PathBuf {
    path.with_extension("config.toml")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolutions_parse() {
        assert_eq!(parse_resolution("coarse").unwrap(), MeshResolution::Coarse);
        assert_eq!(parse_resolution("0.25").unwrap(), MeshResolution::Size(0.25));
        assert!(parse_resolution("-1").is_err());
        assert!(parse_resolution("fine").is_err());
    }

    #[test]
    fn materials_parse_case_insensitively() {
        assert_eq!(parse_material("MR").unwrap(), AnalyticKind::MooneyRivlin);
        assert!(parse_material("ogden").is_err());
    }

    #[test]
    fn snapshot_paths() {
        assert_eq!(snapshot_beside(Path::new("out/mesh.msh")), PathBuf::from("out/mesh.config.toml"));
        assert_eq!(snapshot_beside(Path::new("out/d.json")), PathBuf::from("out/d.config.toml"));
    }
}
