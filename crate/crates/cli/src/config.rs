//! JSON config files. The top level may hold `seed` and `output`, plus one
//! object per subcommand name whose keys are that subcommand's long flags.
//! Flags given on the command line win.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const SUBCOMMANDS: [&str; 8] = [
    "generate",
    "train",
    "predict",
    "outlier-scores",
    "bench-robustness",
    "bench-ksweep",
    "bench-rates",
    "bench-timing",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    sections: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<FileConfig, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
        let Value::Object(mut top) = value else {
            return Err(CliError::Usage("config must be a JSON object".into()));
        };
        let seed = match top.remove("seed") {
            None => None,
            Some(v) => Some(v.as_u64().ok_or_else(|| {
                CliError::Usage(format!(
                    "config seed must be a non-negative integer, got {v}"
                ))
            })?),
        };
        let output = match top.remove("output") {
            None => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(v) => {
                return Err(CliError::Usage(format!(
                    "config output must be a string, got {v}"
                )))
            }
        };
        if let Some(bad) = top.keys().find(|k| !SUBCOMMANDS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key {bad:?}")));
        }
        Ok(FileConfig {
            seed,
            output,
            sections: top,
        })
    }

    /// Overlays the flags that were actually given onto the config section
    /// of `subcommand`. Unknown section keys are rejected.
    pub fn merge<T: Serialize + DeserializeOwned>(
        &self,
        subcommand: &str,
        flags: &T,
    ) -> Result<T, CliError> {
        let mut merged = match self.sections.get(subcommand) {
            None => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => {
                return Err(CliError::Usage(format!(
                    "config section {subcommand:?} must be an object"
                )))
            }
        };
        let Value::Object(given) = serde_json::to_value(flags).expect("flag structs serialize")
        else {
            unreachable!("flag structs serialize to objects")
        };
        for (k, v) in given {
            // Switches that were not passed read as false; they must not
            // clear a config value.
            if !matches!(v, Value::Null | Value::Bool(false)) {
                merged.insert(k, v);
            }
        }
        serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::Usage(format!("config section {subcommand:?}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
    struct Flags {
        k: Option<usize>,
        t: Option<usize>,
        quiet: bool,
    }

    #[test]
    fn flags_win() {
        let cfg =
            FileConfig::parse(r#"{"seed": 3, "train": {"k": 5, "t": 10, "quiet": true}}"#).unwrap();
        assert_eq!(cfg.seed, Some(3));
        let flags = Flags {
            k: Some(7),
            ..Flags::default()
        };
        let merged = cfg.merge("train", &flags).unwrap();
        assert_eq!(
            merged,
            Flags {
                k: Some(7),
                t: Some(10),
                quiet: true
            }
        );
        assert_eq!(cfg.merge("predict", &flags).unwrap(), flags);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FileConfig::parse(r#"{"trian": {}}"#).is_err());
        assert!(FileConfig::parse(r#"[1]"#).is_err());
        assert!(FileConfig::parse(r#"{"seed": -1}"#).is_err());
        let cfg = FileConfig::parse(r#"{"train": {"kk": 1}}"#).unwrap();
        assert!(cfg.merge("train", &Flags::default()).is_err());
    }
}
