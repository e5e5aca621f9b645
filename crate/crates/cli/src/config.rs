//! Run configuration.
//!
//! TOML with strict key checking: a misspelled parameter is an error, not a
//! silently ignored line. Every table is optional and falls back to the
//! calibrated reference node and the default grids. Frequencies in `[node]`
//! are SI angular frequencies (rad/s); grid frequencies are in units of `ω_m`.

use std::path::Path;

use hybrid_swap::experiments::{defaults, linspace, logspace, Pair};
use hybrid_swap::node::{CouplingOverrides, Detuning, Microscopic, NodeParams};
use hybrid_swap::spectral::DEFAULT_TOLERANCE;
use hybrid_swap::swap::DEFAULT_TRANSMISSIVITY;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Shared node parameters. Unset keys keep the reference value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavity_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finesse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirror_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirror_frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirror_damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirror_temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bec_recoil: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bec_collision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bec_damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bec_temperature: Option<f64>,
    /// Effective detuning `Δ` as it enters the drift matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning: Option<f64>,
    /// Bare detuning `δ_c`; `Δ` is then solved from the steady state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bare_detuning: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirror_coupling: Option<f64>,
    /// `G`. Set `bec_coupling_from_microscopic = true` to derive it instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bec_coupling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bec_coupling_from_microscopic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub microscopic: Option<MicroscopicSection>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroscopicSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom_number: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_depth_per_photon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential_waist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atomic_detuning: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vacuum_rabi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_wave_length: Option<f64>,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl NodeSection {
    /// `self` with every key set in `top` replaced.
    pub fn overlaid(&self, top: &NodeSection) -> NodeSection {
        let mut out = self.clone();
        overlay!(out, top; pump_power, cavity_length, wavelength, finesse, mirror_mass,
            mirror_frequency, mirror_damping, mirror_temperature, bec_recoil, bec_collision,
            bec_damping, bec_temperature, detuning, bare_detuning, mirror_coupling,
            bec_coupling, bec_coupling_from_microscopic);
        match (&mut out.microscopic, &top.microscopic) {
            (Some(m), Some(t)) => {
                overlay!(m, t; atom_number, lattice_depth_per_photon, potential_waist,
                    atomic_detuning, vacuum_rabi, s_wave_length);
            }
            (None, Some(t)) => out.microscopic = Some(*t),
            _ => {}
        }
        // an explicit detuning of one kind in the override replaces the other kind
        if top.detuning.is_some() && top.bare_detuning.is_none() {
            out.bare_detuning = None;
        }
        if top.bare_detuning.is_some() && top.detuning.is_none() {
            out.detuning = None;
        }
        out
    }

    pub fn to_params(&self) -> Result<NodeParams, CliError> {
        let mut p = NodeParams::paper();
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        take!(
            pump_power,
            cavity_length,
            wavelength,
            finesse,
            mirror_mass,
            mirror_frequency,
            mirror_damping,
            mirror_temperature,
            bec_recoil,
            bec_collision,
            bec_damping,
            bec_temperature
        );
        if self.mirror_frequency.is_some() && self.mirror_damping.is_none() {
            p.mirror_damping = p.mirror_frequency / hybrid_swap::node::DEFAULT_MIRROR_Q;
        }
        p.detuning = match (self.detuning, self.bare_detuning) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "set either detuning or bare_detuning, not both".into(),
                ))
            }
            (_, Some(d)) => Detuning::Bare(d),
            (Some(d), None) => Detuning::Effective(d),
            (None, None) => Detuning::Effective(p.mirror_frequency),
        };
        let microscopic = self.bec_coupling_from_microscopic.unwrap_or(false);
        if microscopic && self.bec_coupling.is_some() {
            return Err(CliError::Config(
                "bec_coupling and bec_coupling_from_microscopic are mutually exclusive".into(),
            ));
        }
        p.couplings = CouplingOverrides {
            mirror: self.mirror_coupling,
            bec: if microscopic {
                None
            } else {
                self.bec_coupling.or(p.couplings.bec)
            },
        };
        if let Some(m) = self.microscopic {
            p.microscopic = Microscopic {
                atom_number: m.atom_number,
                lattice_depth_per_photon: m.lattice_depth_per_photon,
                potential_waist: m.potential_waist,
                atomic_detuning: m.atomic_detuning,
                vacuum_rabi: m.vacuum_rabi,
                s_wave_length: m.s_wave_length,
            };
        }
        Ok(p)
    }
}

/// An evenly spaced grid given by its end points and point count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl Grid {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            log: false,
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), CliError> {
        if self.points == 0 {
            return Err(CliError::Config(format!("grid {name} is empty")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(CliError::Config(format!(
                "grid {name} has non-finite end points"
            )));
        }
        if self.points > 1 && self.min >= self.max {
            return Err(CliError::Config(format!(
                "grid {name} must increase: min {} is not below max {}",
                self.min, self.max
            )));
        }
        if self.log && self.min <= 0.0 {
            return Err(CliError::Config(format!(
                "logarithmic grid {name} needs min > 0"
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.log {
            logspace(self.min, self.max, self.points)
        } else {
            linspace(self.min, self.max, self.points)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Filter centers `Ω/ω_m` for node and swap sweeps.
    pub omega: Grid,
    /// Detection frequencies `ω/ω_m` of the output spectrum.
    pub spectrum: Grid,
    /// Inverse bandwidths `ε = ω_m τ` of the bandwidth sweep.
    pub epsilon: Grid,
    /// `ε` used by every experiment that does not sweep it.
    pub fixed_epsilon: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            omega: Grid::new(
                defaults::OMEGA_MIN,
                defaults::OMEGA_MAX,
                defaults::OMEGA_POINTS,
            ),
            spectrum: Grid::new(
                defaults::SPECTRUM_MIN,
                defaults::SPECTRUM_MAX,
                defaults::SPECTRUM_POINTS,
            ),
            epsilon: Grid {
                log: true,
                ..Grid::new(
                    defaults::EPSILON_MIN,
                    defaults::EPSILON_MAX,
                    defaults::EPSILON_POINTS,
                )
            },
            fixed_epsilon: defaults::EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwapSection {
    pub transmissivity: f64,
    /// Remote pairs as `"label,label"`, labels among mirror_A, bec_A, mirror_B, bec_B.
    pub pairs: Vec<String>,
    /// Monte-Carlo homodyne samples drawn at each pair's map peak; 0 disables the check.
    pub mc_samples: usize,
}

impl Default for SwapSection {
    fn default() -> Self {
        Self {
            transmissivity: DEFAULT_TRANSMISSIVITY,
            pairs: [Pair::bec_bec(), Pair::mirror_mirror(), Pair::mirror_bec()]
                .iter()
                .map(|p| format!("{},{}", p.0, p.1))
                .collect(),
            mc_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollisionSection {
    /// `ω_sw / ω_R` values to compare.
    pub ratios: Vec<f64>,
}

impl Default for CollisionSection {
    fn default() -> Self {
        Self {
            ratios: defaults::COLLISION_RATIOS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub tolerance: f64,
    pub node: NodeSection,
    pub node_a: NodeSection,
    pub node_b: NodeSection,
    pub grid: GridSection,
    pub swap: SwapSection,
    pub collision: CollisionSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            node: NodeSection::default(),
            node_a: NodeSection::default(),
            node_b: NodeSection::default(),
            grid: GridSection::default(),
            swap: SwapSection::default(),
            collision: CollisionSection::default(),
        }
    }
}

/// A metadata file written by a previous run; its `[config]` table is a config.
#[derive(Deserialize)]
struct Snapshot {
    config: Config,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let value: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let parsed = if value.contains_key("run") && value.contains_key("config") {
            toml::from_str::<Snapshot>(text).map(|s| s.config)
        } else {
            toml::from_str::<Config>(text)
        };
        parsed.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn node_a_params(&self) -> Result<NodeParams, CliError> {
        self.node.overlaid(&self.node_a).to_params()
    }

    pub fn node_b_params(&self) -> Result<NodeParams, CliError> {
        self.node.overlaid(&self.node_b).to_params()
    }

    pub fn pairs(&self) -> Result<Vec<Pair>, CliError> {
        if self.swap.pairs.is_empty() {
            return Err(CliError::Config("no swap pairs requested".into()));
        }
        self.swap
            .pairs
            .iter()
            .map(|s| Pair::parse(s).map_err(|e| CliError::Config(format!("pair {s:?}: {e}"))))
            .collect()
    }

    /// Checks everything that does not need the physics.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-3) {
            return Err(CliError::Config(format!(
                "tolerance must lie in (0, 1e-3], got {}",
                self.tolerance
            )));
        }
        self.grid.omega.validate("omega")?;
        self.grid.spectrum.validate("spectrum")?;
        self.grid.epsilon.validate("epsilon")?;
        if !(self.grid.fixed_epsilon > 0.0 && self.grid.fixed_epsilon.is_finite()) {
            return Err(CliError::Config("fixed_epsilon must be positive".into()));
        }
        let t = self.swap.transmissivity;
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::Config(format!(
                "transmissivity must lie in (0, 1), got {t}"
            )));
        }
        self.pairs()?;
        if self.collision.ratios.is_empty() {
            return Err(CliError::Config("collision ratios are empty".into()));
        }
        if self
            .collision
            .ratios
            .iter()
            .any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(CliError::Config(
                "collision ratios must be finite and non-negative".into(),
            ));
        }
        for p in [self.node_a_params()?, self.node_b_params()?] {
            p.validate().map_err(CliError::from_core)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_setup() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.node_a_params().unwrap(), NodeParams::paper());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            Config::from_toml("sed = 3"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            Config::from_toml("[node]\npump_pwer = 0.01"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            Config::from_toml("[grid.omega]\nmin=0\nmax=1\npoints=2\nstep=1"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn node_overrides_apply_per_node() {
        let c = Config::from_toml("[node]\npump_power = 0.02\n[node_b]\nmirror_coupling = 0.0\n")
            .unwrap();
        let (a, b) = (c.node_a_params().unwrap(), c.node_b_params().unwrap());
        assert_eq!(a.pump_power, 0.02);
        assert_eq!(b.pump_power, 0.02);
        assert_eq!(a.couplings.mirror, None);
        assert_eq!(b.couplings.mirror, Some(0.0));
    }

    #[test]
    fn override_detuning_kind_replaces_shared_kind() {
        let c =
            Config::from_toml("[node]\ndetuning = 1.0\n[node_a]\nbare_detuning = 2.0\n").unwrap();
        assert_eq!(c.node_a_params().unwrap().detuning, Detuning::Bare(2.0));
        assert_eq!(
            c.node_b_params().unwrap().detuning,
            Detuning::Effective(1.0)
        );
    }

    #[test]
    fn empty_or_reversed_grids_fail_validation() {
        let mut c = Config::default();
        c.grid.omega.points = 0;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = Config::default();
        c.grid.epsilon = Grid::new(5.0, 1.0, 3);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn snapshot_round_trips() {
        let mut c = Config {
            seed: 11,
            ..Config::default()
        };
        c.node_b.bec_coupling = Some(0.0);
        c.swap.pairs = vec!["bec_A,bec_B".into()];
        let mut outer = toml::Table::new();
        let run = toml::Table::from_iter([("command".to_string(), toml::Value::from("swap-map"))]);
        outer.insert("run".into(), toml::Value::Table(run));
        outer.insert("config".into(), toml::Value::try_from(&c).unwrap());
        let text = toml::to_string(&outer).unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), c);
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
    }
}
