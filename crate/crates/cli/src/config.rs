//! `key=value` config files and the sweep grid syntax.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Settings read from a config file. Command-line flags take precedence.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

const KNOWN_KEYS: [&str; 14] = [
    "state",
    "pair",
    "var",
    "grid",
    "lo",
    "hi",
    "tol",
    "criterion",
    "samples",
    "seed",
    "output",
    "out-dir",
    "dir",
    "cutoff",
];

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        text.parse()
            .map_err(|e: CliError| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// `flag`, else the config value for `key` parsed as `T`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }
}

impl FromStr for ConfigFile {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "line {}, column 1: expected key=value, got `{line}`",
                    i + 1
                ))
            })?;
            let k = k.trim();
            if !KNOWN_KEYS.contains(&k) {
                let col = raw.find(k).unwrap_or(0) + 1;
                return Err(CliError::Config(format!(
                    "line {}, column {col}: unknown key `{k}`",
                    i + 1
                )));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }
}

/// `start:stop:step`, inclusive of `stop` when it falls on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid `{s}` is not start:stop:step"));
        }
        let mut v = [0.0f64; 3];
        let mut col = 1;
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse()
                .map_err(|_| format!("grid `{s}`, column {col}: bad number `{p}`"))?;
            col += p.len() + 1;
        }
        let [start, stop, step] = v;
        if !(step > 0.0) || !(stop > start) || !start.is_finite() || !stop.is_finite() {
            return Err(format!(
                "grid `{s}` must be strictly increasing with a positive step"
            ));
        }
        if (stop - start) / step > 1e6 {
            return Err(format!("grid `{s}` has more than a million points"));
        }
        Ok(Grid { start, stop, step })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoint() {
        let g: Grid = "0:1:0.01".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 101);
        assert!((p[100] - 1.0).abs() < 1e-12);
        assert_eq!("0.5:0.9:0.3".parse::<Grid>().unwrap().points().len(), 2);
    }

    #[test]
    fn bad_grids() {
        assert!("1:0:0.1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
        let e = "0:x:1".parse::<Grid>().unwrap_err();
        assert!(e.contains("column 3"), "{e}");
    }

    #[test]
    fn config_lines() {
        let c: ConfigFile = "# comment\nstate = tmsv:r=0.4\nseed=9 # trailing\n"
            .parse()
            .unwrap();
        assert_eq!(c.get("state"), Some("tmsv:r=0.4"));
        assert_eq!(c.pick::<u64>(None, "seed").unwrap(), Some(9));
        assert_eq!(c.pick::<u64>(Some(3), "seed").unwrap(), Some(3));
        assert!("colour=blue".parse::<ConfigFile>().is_err());
        assert!("state".parse::<ConfigFile>().is_err());
    }
}
