//! Plain-text run configuration.
//!
//! One `section.key = value` pair per line; blank lines and lines starting
//! with `#` are ignored. Lists are comma separated. Recognised keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `source.intensities` | mean photon numbers of the source settings | `0.001, 0.01, 0.5` |
//! | `detector.kind` | `threshold` or `homodyne` | per command |
//! | `detector.dark_count` | threshold dark-count probability | `1e-6` |
//! | `detector.efficiency` | detector efficiency | `1` |
//! | `detector.levels` | threshold attenuation levels | `0.94, 0.96, 0.98, 1` |
//! | `detector.edges` | homodyne bin edges on \|y\| (start at 0) | uniform bins |
//! | `detector.y_max`, `detector.bins` | uniform homodyne bins | `5`, `16` |
//! | `estimator.method` | `analytical`, `lp` or `both` | `analytical` |
//! | `estimator.n0`, `estimator.m0` | truncation orders | `2`, `2` |
//! | `estimator.nc`, `estimator.mc` | LP truncations | `8`, `8` |
//! | `estimator.search` | intersect over sub-designs | `true` |
//! | `estimator.targets` | targets as `m\|n` for q(m\|n) | `1\|1` |
//! | `estimator.max_iterations`, `estimator.tolerance` | q̃ refinement | `10`, `1e-6` |
//! | `input.table` | measurement table for `estimate` | none |
//! | `channel.error` | QKD channel error probability | `0.05` |
//! | `channel.loss_start`, `channel.loss_stop`, `channel.loss_step` | loss sweep (dB) | `0`, `45`, `1` |
//! | `qkd.protocols` | `bb84`, `six-state` | both |
//! | `qkd.n0`, `qkd.m0` | QKD truncation orders | `2`, `3` |
//! | `scene.t0`, `scene.tau`, `scene.bin_width`, `scene.excitation` | fluorescence scene | `50`, `100`, `5`, `0.9` |
//! | `scene.t_start`, `scene.t_stop` | first and last time-bin start (ns) | `0`, `495` |
//! | `scene.order` | homodyne truncation order | `5` |
//! | `run.seed`, `run.shots` | finite-shot sampling | off |

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Every key the commands understand.
pub const KNOWN_KEYS: &[&str] = &[
    "source.intensities",
    "detector.kind",
    "detector.dark_count",
    "detector.efficiency",
    "detector.levels",
    "detector.edges",
    "detector.y_max",
    "detector.bins",
    "estimator.method",
    "estimator.n0",
    "estimator.m0",
    "estimator.nc",
    "estimator.mc",
    "estimator.search",
    "estimator.targets",
    "estimator.max_iterations",
    "estimator.tolerance",
    "input.table",
    "channel.error",
    "channel.loss_start",
    "channel.loss_stop",
    "channel.loss_step",
    "qkd.protocols",
    "qkd.n0",
    "qkd.m0",
    "scene.t0",
    "scene.tau",
    "scene.bin_width",
    "scene.excitation",
    "scene.t_start",
    "scene.t_stop",
    "scene.order",
    "run.seed",
    "run.shots",
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed key/value configuration with line numbers kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    origin: String,
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let err = |msg: String| CliError::Config {
                origin: origin.to_string(),
                line,
                msg,
            };
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| err("expected `section.key = value`".into()))?;
            let key = key.trim();
            if !key.contains('.') || key.split('.').any(str::is_empty) {
                return Err(err(format!("key `{key}` is not of the form `section.key`")));
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(err(format!(
                    "duplicate key `{key}` (first set on line {})",
                    prev.line
                )));
            }
        }
        Ok(Self {
            origin: origin.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Sets a key, as a command-line flag would.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.into(),
                line: 0,
            },
        );
    }

    fn error(&self, key: &str, msg: String) -> CliError {
        let line = self.entries.get(key).map_or(0, |e| e.line);
        CliError::Config {
            origin: self.origin.clone(),
            line,
            msg: format!("{key}: {msg}"),
        }
    }

    fn parse_one<T: FromStr>(&self, key: &str, s: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| self.error(key, format!("cannot parse `{}`", s.trim())))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.entries.get(key).map_or(default, |e| e.value.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|e| self.parse_one(key, &e.value))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list_or<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>> {
        match self.entries.get(key) {
            None => Ok(default.to_vec()),
            Some(e) if e.value.is_empty() => Ok(Vec::new()),
            Some(e) => e.value.split(',').map(|s| self.parse_one(key, s)).collect(),
        }
    }

    /// Checks a parsed value against a predicate, reporting the key's line.
    pub fn ensure(&self, key: &str, ok: bool, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.error(key, msg.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_lists_and_comments() {
        let c = Config::parse(
            "# run\n\nsource.intensities = 0.1, 0.5\nestimator.n0 = 3\n",
            "t",
        )
        .unwrap();
        assert_eq!(
            c.list_or::<f64>("source.intensities", &[]).unwrap(),
            vec![0.1, 0.5]
        );
        assert_eq!(c.get_or::<u32>("estimator.n0", 2).unwrap(), 3);
        assert_eq!(c.get_or::<u32>("estimator.m0", 2).unwrap(), 2);
    }

    #[test]
    fn reports_line_of_bad_entries() {
        let e = Config::parse("estimator.n0 = 1\nnot a pair\n", "cfg").unwrap_err();
        assert_eq!(e.to_string(), "cfg:2: expected `section.key = value`");
        let e = Config::parse("estimator.nx = 1\n", "cfg").unwrap_err();
        assert!(e.to_string().contains("unknown key"));
        let e = Config::parse("estimator.n0 = 1\nestimator.n0 = 2\n", "cfg").unwrap_err();
        assert!(e.to_string().contains("duplicate"));
        let c = Config::parse("\nestimator.n0 = two\n", "cfg").unwrap();
        let e = c.get::<u32>("estimator.n0").unwrap_err();
        assert_eq!(e.to_string(), "cfg:2: estimator.n0: cannot parse `two`");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn empty_list_value() {
        let c = Config::parse("estimator.targets =\n", "t").unwrap();
        assert!(c
            .list_or::<String>("estimator.targets", &["1|1".to_string()])
            .unwrap()
            .is_empty());
    }
}
