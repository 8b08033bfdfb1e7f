//! Experiment configuration, its TOML form and the built-in presets.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::ProfileShape;
use crate::noise::TimeGrid;
use crate::nonlinearity::{make_cutoff, NonlinearityKind};
use crate::particles::InitialDistribution;
use crate::pde::Grid;
use crate::sde::{min_particles, Potential};

/// Particle count used by the desk-scale override.
pub const DESK_PARTICLES: u64 = 2000;
/// Monte Carlo run count used by the desk-scale override.
pub const DESK_RUNS: usize = 50;
/// Particle limit per species when the config sets none.
pub const DEFAULT_PARTICLE_LIMIT: u64 = 50_000_000;
pub const PRESET_NAMES: [&str; 3] = ["nsymm", "symm", "3species"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    /// Interaction in the diffusion coefficient.
    SktParticles,
    /// Interaction in the drift.
    GradientParticles,
    /// Mean-field particles driven by the nonlocal PDE.
    Intermediate,
    /// Mean-field particles driven by the local PDE.
    Macroscopic,
    PdeLocal,
    PdeNonlocal,
    CoupledError,
    EtaSweep,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::SktParticles => "skt-particles",
            SystemKind::GradientParticles => "gradient-particles",
            SystemKind::Intermediate => "intermediate",
            SystemKind::Macroscopic => "macroscopic",
            SystemKind::PdeLocal => "pde-local",
            SystemKind::PdeNonlocal => "pde-nonlocal",
            SystemKind::CoupledError => "coupled-error",
            SystemKind::EtaSweep => "eta-sweep",
        }
    }

    /// Whether the pipeline writes density snapshots that become plot panels.
    pub fn has_panels(self) -> bool {
        !matches!(self, SystemKind::CoupledError | SystemKind::EtaSweep)
    }

    pub fn is_particle_system(self) -> bool {
        matches!(
            self,
            SystemKind::SktParticles | SystemKind::GradientParticles | SystemKind::Intermediate | SystemKind::Macroscopic
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub sigma: Vec<f64>,
    /// Row `i` holds `a_i1 ... a_in`.
    pub pair_mass: Vec<Vec<f64>>,
    pub initial: InitialDistribution,
}

fn default_nonlinearity() -> NonlinearityKind {
    NonlinearityKind::Identity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub eta: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub profile: ProfileShape,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: NonlinearityKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    /// Explicit particle count per species.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    /// Scaling constant for deriving the count from `eta` when `count` is unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Resource limit, [`DEFAULT_PARTICLE_LIMIT`] when unset; larger resolved
    /// counts are rejected, never reduced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Times at which densities are written; empty means `[t_final]`.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub half_width: f64,
    pub dx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_pde: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    pub half_width: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub etas: Vec<f64>,
    pub delta: f64,
    /// Explicit per-eta particle counts replacing the scaling relation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<Vec<u64>>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            etas: vec![2.0, 1.6, 1.3],
            delta: 0.01,
            particles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub systems: Vec<SystemKind>,
    pub seed: u64,
    /// Monte Carlo runs (`n_sim`).
    pub runs: usize,
    /// Set when the desk-scale override replaced the particle and run counts.
    #[serde(default)]
    pub desk_scale: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub species: SpeciesConfig,
    pub interaction: InteractionConfig,
    pub particles: ParticleConfig,
    pub time: TimeConfig,
    pub pde: PdeSection,
    pub histogram: HistogramConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyConfig>,
}

fn two_species_base(name: &str, pair_mass: Vec<Vec<f64>>, snapshots: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        systems: vec![SystemKind::SktParticles, SystemKind::GradientParticles],
        seed: 1,
        runs: 500,
        desk_scale: false,
        workers: None,
        output_dir: None,
        species: SpeciesConfig {
            sigma: vec![1.0, 2.0],
            pair_mass,
            initial: InitialDistribution::gaussians_1d(&[-1.0, 1.0], 2.0),
        },
        interaction: InteractionConfig {
            eta: 2.0,
            alpha: 0.0,
            profile: ProfileShape::Bump,
            potential: Potential::Off,
            nonlinearity: NonlinearityKind::Identity,
        },
        particles: ParticleConfig {
            count: Some(5000),
            delta: None,
            max: None,
        },
        time: TimeConfig {
            dt: 0.01,
            t_final: 2.0,
            snapshots,
        },
        pde: PdeSection {
            half_width: 15.0,
            dx: 0.05,
            dt_pde: None,
        },
        histogram: HistogramConfig {
            half_width: 15.0,
            bins: 100,
        },
        study: None,
    }
}

/// Built-in experiments at their published scale.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "nsymm" => Ok(two_species_base("nsymm", vec![vec![0.0, 355.0], vec![25.0, 0.0]], vec![2.0])),
        "symm" => Ok(two_species_base(
            "symm",
            vec![vec![0.0, 355.0], vec![355.0, 0.0]],
            vec![0.01, 0.15, 2.0],
        )),
        "3species" => {
            let mut c = two_species_base(
                "3species",
                vec![
                    vec![0.0, 355.0, 355.0],
                    vec![25.0, 0.0, 25.0],
                    vec![355.0, 0.0, 0.0],
                ],
                vec![2.0],
            );
            c.species.sigma = vec![1.0, 2.0, 3.0];
            c.species.initial = InitialDistribution::gaussians_1d(&[-1.0, 2.0, -3.0], 2.0);
            Ok(c)
        }
        other => Err(Error::Config(format!(
            "unknown preset '{other}' (available: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Replaces the particle and run counts by the small CI profile.
    pub fn apply_desk_scale(&mut self) {
        self.particles.count = Some(DESK_PARTICLES);
        self.runs = DESK_RUNS;
        self.desk_scale = true;
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex. Worker count
    /// and output directory do not affect results and are left out.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.workers = None;
        canonical.output_dir = None;
        let json = serde_json::to_string(&canonical).map_err(|e| Error::Serialization(e.to_string()))?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn species_count(&self) -> usize {
        self.species.sigma.len()
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.dt, self.time.t_final)
    }

    /// Snapshot times, defaulting to the final time.
    pub fn snapshot_times(&self) -> Vec<f64> {
        if self.time.snapshots.is_empty() {
            vec![self.time.t_final]
        } else {
            self.time.snapshots.clone()
        }
    }

    /// Grid indices of the snapshot times.
    pub fn snapshot_indices(&self) -> Result<Vec<usize>> {
        let grid = self.time_grid()?;
        self.snapshot_times()
            .iter()
            .map(|&t| {
                grid.index_of(t)
                    .ok_or_else(|| Error::Config(format!("snapshot time {t} is not on the time grid")))
            })
            .collect()
    }

    /// Particle count per species for kernel radius `eta`.
    pub fn resolve_particles(&self, eta: f64) -> Result<u64> {
        let n = match (self.particles.count, self.particles.delta) {
            (Some(n), _) => n,
            (None, Some(delta)) => min_particles(eta, delta, self.species.initial.dim(), self.interaction.alpha)?,
            (None, None) => {
                return Err(Error::Config("particles needs either count or delta".into()));
            }
        };
        if n == 0 {
            return Err(Error::Config("particle count must be positive".into()));
        }
        let limit = self.particles.max.unwrap_or(DEFAULT_PARTICLE_LIMIT);
        if n > limit {
            return Err(Error::ResourceLimit { requested: n, limit });
        }
        Ok(n)
    }

    pub fn study_or_default(&self) -> StudyConfig {
        self.study.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty() {
            return bad("name must not be empty".into());
        }
        if self.systems.is_empty() {
            return bad("systems must list at least one pipeline".into());
        }
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must be at most {} to be representable in the config", i64::MAX));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        let n = self.species_count();
        let s = &self.species;
        if n == 0 || s.pair_mass.len() != n || s.pair_mass.iter().any(|r| r.len() != n) || s.initial.species.len() != n {
            return bad(format!(
                "{n} diffusion constants need a {n}x{n} pair_mass matrix and {n} initial mixtures"
            ));
        }
        if s.sigma.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("diffusion constants must be positive".into());
        }
        if s.pair_mass.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("pair masses must be finite and nonnegative".into());
        }
        s.initial.validate()?;
        if s.initial.dim() != 1 {
            return bad("experiments are one-dimensional".into());
        }
        let it = &self.interaction;
        make_cutoff(it.nonlinearity.clone(), it.eta, it.alpha)?;
        self.time_grid()?;
        self.snapshot_indices()?;
        let grid = Grid::new(self.pde.half_width, self.pde.dx)?;
        if let Some(h) = self.pde.dt_pde {
            if !(h > 0.0) {
                return bad(format!("dt_pde must be positive, got {h}"));
            }
        }
        if !(self.histogram.half_width > 0.0) || self.histogram.bins == 0 {
            return bad("histogram needs half_width > 0 and bins > 0".into());
        }
        if let Some(p) = self.particles.delta {
            if !(p > 0.0) {
                return bad(format!("delta must be positive, got {p}"));
            }
        }
        let needs_pde_kernel = self.systems.iter().any(|k| matches!(k, SystemKind::PdeNonlocal | SystemKind::Intermediate));
        if needs_pde_kernel {
            let eta = it.eta;
            if eta < 2.0 * grid.dx() {
                return Err(Error::UnderResolved {
                    eta,
                    dx: grid.dx(),
                    max_dx: eta / 2.0,
                });
            }
            if !(eta < grid.half_width() / 2.0) {
                return bad(format!("eta = {eta} must be below L/2 = {}", grid.half_width() / 2.0));
            }
        }
        if self.systems.contains(&SystemKind::EtaSweep) {
            let study = self.study_or_default();
            if study.etas.is_empty() || study.etas.iter().any(|e| !(*e > 0.0)) {
                return bad("study etas must be positive and nonempty".into());
            }
            if !(study.delta > 0.0) {
                return bad("study delta must be positive".into());
            }
            if let Some(p) = &study.particles {
                if p.len() != study.etas.len() || p.contains(&0) {
                    return bad("study particles must give one positive count per eta".into());
                }
            }
        }
        if self.systems.iter().any(|k| k.is_particle_system() || *k == SystemKind::CoupledError) {
            self.resolve_particles(it.eta)?;
        }
        Ok(())
    }
}
