//! Configuration-file support. Settings resolve with the precedence
//! CLI flag > config file > built-in default. The file is flat key/value
//! TOML; see the README for the schema.

use std::path::Path;

use serde::Deserialize;

/// Optional overrides loaded from `flowmatch.toml` (or `--config PATH`).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub period_h: Option<f64>,
    pub mean_kwh: Option<f64>,
    pub stddev_kwh: Option<f64>,
    pub sweeps: Option<usize>,
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
    pub tenure: Option<usize>,
    pub stall: Option<usize>,
    pub reads: Option<usize>,
    pub budget_s: Option<f64>,
    pub workers: Option<usize>,
    pub deterministic: Option<bool>,
    pub ref_budget_s: Option<f64>,
}

impl FileConfig {
    pub fn load(explicit: Option<&Path>) -> Result<Self, String> {
        let path = match explicit {
            Some(path) => path.to_path_buf(),
            None => {
                let default = Path::new("flowmatch.toml");
                if !default.exists() {
                    return Ok(FileConfig::default());
                }
                default.to_path_buf()
            }
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// `cli.or(file).unwrap_or(default)`.
pub fn resolve<T: Copy>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

/// `cli.or(file)` for settings without a fixed default.
pub fn resolve_opt<T: Copy>(cli: Option<T>, file: Option<T>) -> Option<T> {
    cli.or(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_default_file_is_empty_config() {
        let cfg = FileConfig::load(None).unwrap();
        assert!(cfg.alpha.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flowmatch.toml");
        std::fs::write(&path, "alpha = 50.0\nbogus = 1\n").unwrap();
        assert!(FileConfig::load(Some(&path)).is_err());
        std::fs::write(&path, "alpha = 50.0\nworkers = 3\n").unwrap();
        let cfg = FileConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.alpha, Some(50.0));
        assert_eq!(cfg.workers, Some(3));
    }

    #[test]
    fn precedence_is_cli_then_file_then_default() {
        assert_eq!(resolve(Some(1.0), Some(2.0), 3.0), 1.0);
        assert_eq!(resolve(None, Some(2.0), 3.0), 2.0);
        assert_eq!(resolve::<f64>(None, None, 3.0), 3.0);
    }
}
