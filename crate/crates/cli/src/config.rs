//! `key=value` configuration files and sweep curve files.

use crate::{Failure, Outcome};
use rig_normal::ModelParams;
use std::collections::BTreeMap;
use std::path::Path;

const KEYS: [&str; 15] = [
    "n", "m", "p", "samples", "seed", "threads", "format", "out", "graph", "complement", "plus", "minus", "method",
    "curve", "config",
];

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Outcome<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::Invalid(format!("config line {}: expected key=value", i + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) || key == "config" {
                return Err(Failure::Invalid(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Outcome<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| Failure::Invalid(format!("config key {key} = {v:?}: {e}")))
            })
            .transpose()
    }
}

/// One `n,m,p` point per line; `#` comments, blank lines and an `n,m,p`
/// header are skipped.
pub fn parse_curve(text: &str) -> Outcome<Vec<ModelParams>> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.replace(' ', "") == "n,m,p" {
            continue;
        }
        let bad = || Failure::Invalid(format!("curve line {}: expected n,m,p, got {line:?}", i + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [n, m, p] = fields[..] else {
            return Err(bad());
        };
        let params = ModelParams::new(
            n.parse().map_err(|_| bad())?,
            m.parse().map_err(|_| bad())?,
            p.parse().map_err(|_| bad())?,
        )?;
        points.push(params);
    }
    Ok(points)
}

pub fn load_curve(path: &Path) -> Outcome<Vec<ModelParams>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("cannot read curve {}: {e}", path.display())))?;
    parse_curve(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let c = Config::parse("# comment\nn = 5\n\np=0.25\n").unwrap();
        assert_eq!(c.get::<u64>("n").ok().flatten(), Some(5));
        assert_eq!(c.get::<f64>("p").ok().flatten(), Some(0.25));
        assert_eq!(c.get::<u64>("m").ok().flatten(), None);
        assert!(c.get::<u64>("p").is_err());
        assert!(Config::parse("bogus=1").is_err());
        assert!(Config::parse("n 5").is_err());
    }

    #[test]
    fn curve_lines() {
        let c = parse_curve("n,m,p\n# x\n10, 5, 0.1\n20,5,0.2\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].n, 20);
        assert!(parse_curve("10,5").is_err());
        assert!(parse_curve("10,5,1.5").is_err());
    }
}
