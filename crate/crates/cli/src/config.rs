//! Run configuration: a sectioned TOML file plus `section.key=value`
//! overrides from the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};
use selftrap_core::madelung::{MaskOptions, EPS_MASK_POTENTIAL, EPS_MASK_VELOCITY};
use selftrap_core::selftrap::SolveOptions;
use selftrap_core::PhysParams;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub physics: Physics,
    pub selftrap: SelfTrap,
    pub grid: GridSpec,
    pub evolve: Evolve,
    pub output: Output,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub hbar: f64,
    pub m: f64,
    pub beta: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            m: 1.0,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfTrap {
    pub u0: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub rho_floor: f64,
}

impl Default for SelfTrap {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            u0: None,
            rtol: d.rtol,
            atol: d.atol,
            rho_floor: d.rho_floor,
        }
    }
}

/// Grid size and extent. The half-width is `half_width` when given,
/// otherwise `padding` support half-widths (or 20σ for a Gaussian start).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n: Option<usize>,
    pub padding: Option<f64>,
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    Selftrap,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Zero,
    Quadratic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Evolve {
    pub initial: Initial,
    pub sigma: Option<f64>,
    pub phase: Phase,
    pub theta0: Option<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub theta_threshold: f64,
    pub leak_tol: f64,
    pub stop_at_caustic: bool,
    pub eps_potential: f64,
    pub eps_velocity: f64,
    pub edge_width: usize,
    pub snapshot_every: usize,
    /// Number of Lagrangian traces, spread evenly over ±0.9 q_m (±3σ for a
    /// Gaussian start).
    pub traces: usize,
}

impl Default for Evolve {
    fn default() -> Self {
        let masks = MaskOptions::default();
        Self {
            initial: Initial::Selftrap,
            sigma: None,
            phase: Phase::Zero,
            theta0: None,
            dt: 1e-5,
            t_end: 1e-3,
            stride: 10,
            theta_threshold: -1e3,
            leak_tol: 1e-8,
            stop_at_caustic: true,
            eps_potential: EPS_MASK_POTENTIAL,
            eps_velocity: EPS_MASK_VELOCITY,
            edge_width: masks.edge_width,
            snapshot_every: 0,
            traces: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub formats: Vec<Format>,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl Output {
    pub fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    pub fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }
}

impl RunConfig {
    /// Reads `path` (if any) and applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<PhysParams, CliError> {
        let p = &self.physics;
        PhysParams::new(p.hbar, p.m, p.beta).map_err(|e| CliError::Config(format!("physics: {e}")))
    }

    pub fn u0(&self) -> Result<f64, CliError> {
        let u0 = self.selftrap.u0.ok_or_else(|| CliError::Config("u0 required".into()))?;
        if !(u0 > 0.0 && u0.is_finite()) {
            return Err(CliError::Config(format!("selftrap.u0 must be positive, got {u0}")));
        }
        Ok(u0)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            rtol: self.selftrap.rtol,
            atol: self.selftrap.atol,
            rho_floor: self.selftrap.rho_floor,
            ..SolveOptions::default()
        }
    }

    pub fn mask_options(&self) -> MaskOptions {
        MaskOptions {
            eps_potential: self.evolve.eps_potential,
            eps_velocity: self.evolve.eps_velocity,
            edge_width: self.evolve.edge_width,
            ..MaskOptions::default()
        }
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::Config(format!("override key {key:?} must be section.key")))?;
    // Bare words that are not TOML literals are taken as strings.
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("{section} is not a section"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::load(None, &["selftrap.u0=2".into(), "evolve.phase=quadratic".into()]).unwrap();
        assert_eq!(cfg.u0().unwrap(), 2.0);
        assert_eq!(cfg.evolve.phase, Phase::Quadratic);
        assert_eq!(cfg.physics.hbar, 1.0);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::load(None, &["physics.hbarr=1".into()]).unwrap_err();
        assert!(err.to_string().contains("hbarr"), "{err}");
    }

    #[test]
    fn missing_u0() {
        let cfg = RunConfig::load(None, &[]).unwrap();
        assert_eq!(cfg.u0().unwrap_err().to_string(), "u0 required");
    }
}
