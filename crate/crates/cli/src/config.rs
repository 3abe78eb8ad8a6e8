//! TOML run configuration. A config file holds one table per subcommand
//! (`[train]`, `[dataset_make]`, ...) whose keys are the long flag names
//! with `-` replaced by `_`. Precedence, highest first: command-line flag,
//! config file, built-in default.

use crate::error::{CliError, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    table: toml::Table,
}

/// Top-level keys that are not subcommand tables.
const GLOBAL_KEYS: [&str; 2] = ["threads", "command"];

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::config(e.message().to_string()))?;
        for (k, v) in &table {
            if !GLOBAL_KEYS.contains(&k.as_str()) && !v.is_table() {
                return Err(CliError::config(format!("top-level key {k:?} must be a table named after a subcommand")));
            }
        }
        Ok(Self { table })
    }

    pub fn threads(&self) -> Result<Option<usize>> {
        match self.table.get("threads") {
            None => Ok(None),
            Some(toml::Value::Integer(n)) if *n > 0 => Ok(Some(*n as usize)),
            Some(v) => Err(CliError::config(format!("threads must be a positive integer, got {v}"))),
        }
    }

    /// Overlays the flags that were given on top of the section `name`.
    pub fn resolve<T: Serialize + DeserializeOwned>(&self, name: &str, flags: &T) -> Result<T> {
        let mut merged = match self.table.get(name) {
            Some(toml::Value::Table(t)) => t.clone(),
            Some(_) => return Err(CliError::config(format!("[{name}] must be a table"))),
            None => toml::Table::new(),
        };
        let given = toml::Table::try_from(flags).map_err(|e| CliError::config(e.to_string()))?;
        merged.extend(given);
        toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| CliError::config(format!("[{name}]: {}", e.message())))
    }
}

/// Writes the resolved settings of one subcommand so that
/// `ndfem --config <snapshot> <subcommand>` repeats the run.
pub fn write_snapshot<T: Serialize>(path: &Path, command: &str, section: &str, settings: &T) -> Result<()> {
    let body = toml::Table::try_from(settings).map_err(|e| CliError::config(e.to_string()))?;
    let mut doc = toml::Table::new();
    doc.insert("command".into(), toml::Value::String(command.into()));
    doc.insert(section.into(), toml::Value::Table(body));
    let text = toml::to_string(&doc).map_err(|e| CliError::config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        a: Option<u64>,
        b: Option<String>,
    }

    #[test]
    fn flags_override_file_values() {
        let cfg = ConfigFile::parse("[demo]\na = 1\nb = \"file\"\n").unwrap();
        let r = cfg.resolve("demo", &Demo { a: None, b: Some("flag".into()) }).unwrap();
        assert_eq!(r, Demo { a: Some(1), b: Some("flag".into()) });
    }

    #[test]
    fn missing_section_keeps_flags() {
        let cfg = ConfigFile::parse("threads = 2\n").unwrap();
        assert_eq!(cfg.threads().unwrap(), Some(2));
        let r = cfg.resolve("demo", &Demo { a: Some(3), b: None }).unwrap();
        assert_eq!(r, Demo { a: Some(3), b: None });
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let cfg = ConfigFile::parse("[demo]\nc = 1\n").unwrap();
        let e = cfg.resolve("demo", &Demo::default()).unwrap_err();
        assert_eq!(e.category, crate::error::Category::Config);
        assert!(ConfigFile::parse("x = 1\n").is_err());
        assert!(ConfigFile::parse("[demo\n").is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("config.toml");
        let d = Demo { a: Some(7), b: Some("x".into()) };
        write_snapshot(&p, "demo", "demo", &d).unwrap();
        let cfg = ConfigFile::load(&p).unwrap();
        assert_eq!(cfg.resolve("demo", &Demo::default()).unwrap(), d);
    }
}
