//! Scenario presets for the four reference experiments.

use crate::error::{Error, Result};
use crate::model::ScenarioConfig;

/// Antenna count of the reference experiments.
pub const PAPER_ANTENNAS: usize = 128;
/// Antenna count used by default on a workstation.
pub const DESK_ANTENNAS: usize = 32;

/// A named scenario with its default sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    /// Scenario at the reference antenna count.
    pub config: ScenarioConfig,
    pub desk_antennas: usize,
    pub snr_grid: Vec<f64>,
    pub rho_grid: Option<Vec<f64>>,
    pub trials: usize,
}

impl Preset {
    /// Same scenario at the desk antenna count.
    pub fn desk_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            antennas: self.desk_antennas,
            ..self.config.clone()
        }
    }
}

pub const PRESET_NAMES: [&str; 4] = ["fig3", "fig4", "fig5", "fig6"];

fn scenario(users: usize, probs: &[f64]) -> ScenarioConfig {
    ScenarioConfig {
        antennas: PAPER_ANTENNAS,
        users,
        elements: probs.len(),
        block_len: 2000,
        pilot_len: 8,
        power: 1.0,
        pilot_power: 1.0,
        sigma2: 0.1,
        reflect_prob: vec![probs.to_vec(); users],
        path_loss: vec![1.0; users],
        seed: 0,
    }
}

fn snr_axis() -> Vec<f64> {
    (0..=5).map(|k| 4.0 * k as f64).collect()
}

pub fn preset_spec(name: &str) -> Result<Preset> {
    let (config, snr_grid, rho_grid) = match name {
        "fig3" => (scenario(2, &[0.6, 0.7]), snr_axis(), None),
        "fig4" => (scenario(1, &[0.6, 0.7, 0.8]), snr_axis(), None),
        "fig5" => (scenario(1, &[0.8]), snr_axis(), None),
        "fig6" => (scenario(1, &[0.8]), vec![16.0], Some(vec![0.0, 0.2, 0.4, 0.6, 0.8])),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    let mut config = config;
    config.set_snr_db(snr_grid[0]);
    Ok(Preset {
        name: PRESET_NAMES.iter().copied().find(|n| *n == name).expect("matched above"),
        config,
        desk_antennas: DESK_ANTENNAS,
        snr_grid,
        rho_grid,
        trials: 20,
    })
}

/// Scenario of a named preset at the reference antenna count.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    preset_spec(name).map(|p| p.config)
}
