//! JSON run configuration: schema, defaults, and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::BeamSet;
use crate::dqn::AgentConfig;
use crate::env::ActionGrid;
use crate::geometry::{AngularGrid, ArrayConfig, Direction};
use crate::{Error, Result};

/// Mask handling across training episodes: `fixed` reuses the run seed for
/// every episode, `resample` draws a fresh mask seed per episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Fixed,
    Resample,
}

/// A direction given in degrees; phi is normalized into [0, 360).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl DirectionSpec {
    pub fn direction(&self) -> Result<Direction> {
        Direction::new(self.theta_deg, self.phi_deg)
    }
}

fn default_incident() -> DirectionSpec {
    DirectionSpec {
        theta_deg: 0.0,
        phi_deg: 0.0,
    }
}

fn default_radius() -> f64 {
    10.0
}

/// Intended beams and the shared circle radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamsSection {
    #[serde(default = "default_incident")]
    pub incident: DirectionSpec,
    pub targets: Vec<DirectionSpec>,
    #[serde(default = "default_radius")]
    pub radius_deg: f64,
}

/// Angular grid steps in degrees.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub theta_step_deg: f64,
    pub phi_step_deg: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            theta_step_deg: 1.0,
            phi_step_deg: 1.0,
        }
    }
}

/// Sidelobe detection parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectSection {
    pub margin_db: f64,
    pub max_count: usize,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            margin_db: 10.0,
            max_count: 4,
        }
    }
}

fn default_values() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Suppression action grid and mask policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuppressSection {
    pub delta_values: Vec<f64>,
    pub xi_values: Vec<f64>,
    pub mask_mode: MaskMode,
}

impl Default for SuppressSection {
    fn default() -> Self {
        Self {
            delta_values: default_values(),
            xi_values: default_values(),
            mask_mode: MaskMode::Resample,
        }
    }
}

/// Agent hyperparameters and the episode budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub target_update_interval: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_fraction: f64,
    pub replay_capacity: usize,
    pub hidden_layers: Vec<usize>,
    pub episodes: usize,
}

impl Default for AgentSection {
    fn default() -> Self {
        let base = AgentConfig::default();
        Self {
            gamma: base.gamma,
            learning_rate: base.learning_rate,
            batch_size: base.batch_size,
            target_update_interval: base.target_update_interval,
            epsilon_start: base.epsilon_start,
            epsilon_end: base.epsilon_end,
            epsilon_fraction: base.epsilon_fraction,
            replay_capacity: base.replay_capacity,
            hidden_layers: base.hidden_layers,
            episodes: 2000,
        }
    }
}

impl AgentSection {
    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            target_update_interval: self.target_update_interval,
            epsilon_start: self.epsilon_start,
            epsilon_end: self.epsilon_end,
            epsilon_fraction: self.epsilon_fraction,
            replay_capacity: self.replay_capacity,
            hidden_layers: self.hidden_layers.clone(),
        }
    }
}

fn default_seed() -> u64 {
    0
}

/// Full run configuration; unknown fields are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub array: ArrayConfig,
    pub beams: BeamsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub detect: DetectSection,
    #[serde(default)]
    pub suppress: SuppressSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl RunConfig {
    /// Parses a configuration from JSON text.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a configuration file; missing files surface as I/O errors,
    /// malformed content as configuration errors.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        if self.beams.targets.is_empty() {
            return Err(Error::Config("beams.targets must be nonempty".into()));
        }
        self.incident()?;
        for t in &self.beams.targets {
            t.direction()?;
        }
        if !(self.beams.radius_deg.is_finite() && self.beams.radius_deg > 0.0) {
            return Err(Error::Config("beams.radius_deg must be positive".into()));
        }
        self.angular_grid()?;
        if !(self.detect.margin_db.is_finite() && self.detect.margin_db > 0.0) {
            return Err(Error::Config("detect.margin_db must be positive".into()));
        }
        if self.detect.max_count == 0 {
            return Err(Error::Config("detect.max_count must be at least 1".into()));
        }
        self.action_grid()?;
        self.agent.agent_config().validate()?;
        if self.agent.episodes == 0 {
            return Err(Error::Config("agent.episodes must be positive".into()));
        }
        Ok(())
    }

    pub fn incident(&self) -> Result<Direction> {
        self.beams
            .incident
            .direction()
            .map_err(|e| Error::Config(format!("beams.incident: {e}")))
    }

    pub fn beam_set(&self) -> Result<BeamSet> {
        let targets = self
            .beams
            .targets
            .iter()
            .map(|t| t.direction())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(format!("beams.targets: {e}")))?;
        BeamSet::new(targets, self.beams.radius_deg)
    }

    pub fn angular_grid(&self) -> Result<AngularGrid> {
        AngularGrid::new(self.grid.theta_step_deg, self.grid.phi_step_deg)
    }

    pub fn action_grid(&self) -> Result<ActionGrid> {
        ActionGrid::new(
            self.suppress.delta_values.clone(),
            self.suppress.xi_values.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "array": { "elements_x": 4, "elements_y": 4, "pitch_m": 0.017,
                   "frequency_hz": 3.5e9, "phase_bits": 2 },
        "beams": { "targets": [ { "theta_deg": 45.0, "phi_deg": 30.0 } ] }
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.beams.incident.theta_deg, 0.0);
        assert_eq!(cfg.beams.radius_deg, 10.0);
        assert_eq!(cfg.grid.theta_step_deg, 1.0);
        assert_eq!(cfg.detect.max_count, 4);
        assert_eq!(cfg.suppress.delta_values.len(), 11);
        assert_eq!(cfg.suppress.mask_mode, MaskMode::Resample);
        assert_eq!(cfg.agent.episodes, 2000);
        assert_eq!(cfg.agent.hidden_layers, vec![200, 100, 40]);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.action_grid().unwrap().action_count(), 121);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = MINIMAL.replace("\"beams\"", "\"beans\"");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
        let extra = MINIMAL.replace(
            "\"phase_bits\": 2",
            "\"phase_bits\": 2, \"bogus\": 1",
        );
        assert!(matches!(RunConfig::parse(&extra), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad_theta = MINIMAL.replace("\"theta_deg\": 45.0", "\"theta_deg\": 95.0");
        assert!(RunConfig::parse(&bad_theta).is_err());
        let bad_bits = MINIMAL.replace("\"phase_bits\": 2", "\"phase_bits\": 0");
        assert!(RunConfig::parse(&bad_bits).is_err());
        let no_targets = MINIMAL.replace(
            "[ { \"theta_deg\": 45.0, \"phi_deg\": 30.0 } ]",
            "[]",
        );
        assert!(RunConfig::parse(&no_targets).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = RunConfig::from_path(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn round_trips_through_serde() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back.array.elements_x, 4);
        assert_eq!(back.agent.episodes, cfg.agent.episodes);
    }
}
