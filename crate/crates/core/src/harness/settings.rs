//! Flat `key = value` run settings, shared by config files and CLI flags.
//!
//! Recognized keys: `preset`, `scale` (`desk` or `paper`), `antennas`,
//! `block_len`, `pilot_len`, `power`, `pilot_power`, `reflect_prob`
//! (rows separated by `;`, elements by `,`), `path_loss`, `snr`, `rho`,
//! `trials`, `methods`, `seed`, `out`, `sequential`. Grids are either
//! `start:step:stop` (inclusive) or comma lists. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::preset::preset_spec;
use super::{Method, RunSpec};
use crate::error::{Error, Result};
use crate::par::Execution;

const KEYS: [&str; 16] = [
    "preset",
    "scale",
    "antennas",
    "block_len",
    "pilot_len",
    "power",
    "pilot_power",
    "reflect_prob",
    "path_loss",
    "snr",
    "rho",
    "trials",
    "methods",
    "seed",
    "out",
    "sequential",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown setting `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("cannot parse {key} = `{v}`")))
            })
            .transpose()
    }

    /// Builds the run from a preset (default `fig5`) with overrides.
    pub fn to_spec(&self) -> Result<RunSpec> {
        let preset = preset_spec(self.get("preset").unwrap_or("fig5"))?;
        let mut cfg = match self.get("scale").unwrap_or("desk") {
            "desk" => preset.desk_config(),
            "paper" => preset.config.clone(),
            other => return Err(Error::Config(format!("scale must be desk or paper, got `{other}`"))),
        };
        if let Some(m) = self.parsed("antennas")? {
            cfg.antennas = m;
        }
        if let Some(n) = self.parsed("block_len")? {
            cfg.block_len = n;
        }
        if let Some(l) = self.parsed("pilot_len")? {
            cfg.pilot_len = l;
        }
        if let Some(p) = self.parsed("power")? {
            cfg.power = p;
        }
        if let Some(p) = self.parsed("pilot_power")? {
            cfg.pilot_power = p;
        }
        if let Some(v) = self.get("reflect_prob") {
            cfg.reflect_prob = parse_table(v)?;
            cfg.users = cfg.reflect_prob.len();
            cfg.elements = cfg.reflect_prob.first().map_or(0, Vec::len);
            if cfg.path_loss.len() != cfg.users {
                cfg.path_loss = vec![1.0; cfg.users];
            }
        }
        if let Some(v) = self.get("path_loss") {
            cfg.path_loss = parse_list(v)?;
        }
        let seed = self.parsed("seed")?.unwrap_or(0);
        cfg.seed = seed;
        let snr_grid = match self.get("snr") {
            Some(v) => parse_grid(v)?,
            None => preset.snr_grid.clone(),
        };
        let rho_grid = match self.get("rho") {
            Some(v) => Some(parse_grid(v)?),
            None => preset.rho_grid.clone(),
        };
        let methods = match self.get("methods") {
            Some(v) => v.split(',').map(|m| m.trim().parse()).collect::<Result<Vec<Method>>>()?,
            None => vec![Method::Proposed, Method::Bca, Method::Evd { path_loss: 0.3 }],
        };
        let sequential = self.parsed::<bool>("sequential")?.unwrap_or(false);
        let spec = RunSpec {
            config: cfg,
            methods,
            snr_grid,
            rho_grid,
            trials: self.parsed("trials")?.unwrap_or(preset.trials),
            seed,
            out: self.get("out").map(PathBuf::from),
            exec: if sequential {
                Execution::Sequential
            } else {
                Execution::default()
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("not a number: `{t}`")))
        })
        .collect()
}

fn parse_table(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').map(parse_list).collect()
}

/// `start:step:stop` (inclusive) or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.len() {
        1 => parse_list(text),
        3 => {
            let v = parts
                .iter()
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| Error::Config(format!("bad grid `{text}`")))?;
            let (start, step, stop) = (v[0], v[1], v[2]);
            if !(step > 0.0) || stop < start {
                return Err(Error::Config(format!("grid `{text}` needs step > 0 and stop >= start")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // rounded so 0:0.2:0.8 yields 0.6 rather than 0.6000000000000001
            Ok((0..count).map(|k| ((start + step * k as f64) * 1e12).round() / 1e12).collect())
        }
        _ => Err(Error::Config(format!("bad grid `{text}`"))),
    }
}
