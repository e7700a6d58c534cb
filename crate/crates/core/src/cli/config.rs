//! Run-config schema (JSON). Every block rejects unknown keys; errors carry
//! the key path and, for syntax errors, the line and column.
//!
//! ```json
//! {
//!   "lattice": {"kind": "chain", "length": 11, "periodic": false},
//!   "model": {"tau": 1.0, "u": 2.0, "mu": 0.0, "loss_rate": 0.0},
//!   "initial_state": {"occupations": [{"site": 0, "count": 1}]},
//!   "time": {"t_max": 2.0, "points": 41},
//!   "checks": {"moments": [2]},
//!   "output": {"directory": "out"}
//! }
//! ```

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::evolve::{
    uniform_grid, EvolveOptions, InitialState, LadderPolynomial, ObservableKind, ObservableRequest,
};
use crate::fock::{Mode, Occupation, SpeciesSpec, Statistics};
use crate::graph::Lattice;
use crate::hamiltonian::{InteractionTerm, ModelSpec, Monomial, TauSchedule};
use crate::linalg::LanczosPropagator;
use crate::verify::{ExperimentConfig, Limits, Thresholds};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub initial_state: Option<InitialStateConfig>,
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeConfig {
    Chain {
        length: usize,
        #[serde(default)]
        periodic: bool,
    },
    Grid {
        width: usize,
        height: usize,
        #[serde(default)]
        periodic: bool,
    },
    Edges {
        num_sites: usize,
        edges: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticsConfig {
    Boson,
    Fermion,
    Hardcore,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub statistics: StatisticsConfig,
    /// Occupation cap for bosons.
    #[serde(default)]
    pub n_max: Option<u32>,
}

/// A number applied to every species, or one value per species.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerSpecies {
    All(f64),
    Each(Vec<f64>),
}

impl Default for PerSpecies {
    fn default() -> Self {
        Self::All(0.0)
    }
}

impl PerSpecies {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>> {
        match self {
            Self::All(x) => Ok(vec![*x; n]),
            Self::Each(v) if v.len() == n => Ok(v.clone()),
            Self::Each(v) => Err(Error::config(path, format!("expected {n} values (one per species), got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_species")]
    pub species: Vec<SpeciesConfig>,
    #[serde(default)]
    pub tau: Option<f64>,
    /// `[[start_time, τ], ...]`, first start 0.
    #[serde(default)]
    pub tau_schedule: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub u: PerSpecies,
    #[serde(default)]
    pub mu: PerSpecies,
    #[serde(default)]
    pub interactions: Vec<InteractionConfig>,
    #[serde(default)]
    pub loss_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            species: default_species(),
            tau: None,
            tau_schedule: None,
            u: PerSpecies::default(),
            mu: PerSpecies::default(),
            interactions: Vec::new(),
            loss_rate: 0.0,
        }
    }
}

fn default_species() -> Vec<SpeciesConfig> {
    vec![SpeciesConfig {
        statistics: StatisticsConfig::Boson,
        n_max: None,
    }]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionConfig {
    OnSite { site: usize, monomials: Vec<MonomialConfig> },
    Pair {
        sites: (usize, usize),
        #[serde(default)]
        species: (usize, usize),
        coefficient: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationConfig {
    pub site: usize,
    #[serde(default)]
    pub species: usize,
    pub count: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub occupations: Vec<OccupationConfig>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialStateConfig {
    /// Basis state listing the occupied sites.
    Basis { occupations: Vec<OccupationConfig> },
    /// Superposition over a region, vacuum elsewhere.
    Superposition {
        region: Vec<usize>,
        components: Vec<ComponentConfig>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub p: u32,
    pub q: u32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    #[serde(default)]
    pub species: usize,
    pub terms: Vec<TermConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    Local {
        name: String,
        site: usize,
        #[serde(default)]
        species: usize,
        terms: Vec<TermConfig>,
    },
    TwoSite {
        name: String,
        sites: (usize, usize),
        first: FactorConfig,
        second: FactorConfig,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsConfig {
    pub dominance: Option<f64>,
    pub identity: Option<f64>,
    pub conservation: Option<f64>,
    pub arrival_epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default)]
    pub moments: Vec<u32>,
    #[serde(default)]
    pub observables: Vec<ObservableConfig>,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
    /// Evolve a density matrix even without loss.
    #[serde(default)]
    pub density_matrix: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub krylov_dim: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub max_pure_dim: Option<usize>,
    pub max_density_dim: Option<usize>,
}

/// Parameters a sweep may vary; structural ones (lattice, particle
/// numbers) are not sweepable since they change the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Tau,
    U,
    LossRate,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::config(
                path,
                format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Semantic checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        self.build_lattice()?;
        let m = &self.model;
        if m.species.is_empty() {
            return Err(Error::config("model.species", "at least one species is required"));
        }
        match (m.tau, &m.tau_schedule) {
            (Some(_), Some(_)) => return Err(Error::config("model", "give either `tau` or `tau_schedule`, not both")),
            (None, None) => return Err(Error::config("model.tau", "missing hopping amplitude")),
            (Some(t), None) if !t.is_finite() => return Err(Error::config("model.tau", "must be finite")),
            _ => {}
        }
        if !(m.loss_rate >= 0.0) || !m.loss_rate.is_finite() {
            return Err(Error::config("model.loss_rate", format!("must be finite and ≥ 0, got {}", m.loss_rate)));
        }
        if let Some(t) = &self.time {
            if !(t.t_max >= 0.0) || !t.t_max.is_finite() {
                return Err(Error::config("time.t_max", "must be finite and ≥ 0"));
            }
            if t.points < 1 || (t.points < 2 && t.t_max > 0.0) {
                return Err(Error::config("time.points", "need at least 2 points for t_max > 0"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::config("sweep.values", "value list is empty"));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("sweep.values", "values must be finite"));
            }
            if s.parameter == SweepParameter::LossRate && s.values.iter().any(|&v| v < 0.0) {
                return Err(Error::config("sweep.values", "loss rates must be ≥ 0"));
            }
        }
        if let Some(eps) = self.checks.thresholds.arrival_epsilon {
            if !(eps > 0.0) {
                return Err(Error::config("checks.thresholds.arrival_epsilon", "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn build_lattice(&self) -> Result<Lattice> {
        let at = |e: Error| Error::config("lattice", e.to_string());
        match &self.lattice {
            LatticeConfig::Chain { length, periodic } => Lattice::chain(*length, *periodic).map_err(at),
            LatticeConfig::Grid {
                width,
                height,
                periodic,
            } => Lattice::grid(*width, *height, *periodic).map_err(at),
            LatticeConfig::Edges { num_sites, edges } => Lattice::from_edges(*num_sites, edges).map_err(at),
        }
    }

    pub fn build_species(&self) -> Result<Vec<SpeciesSpec>> {
        self.model
            .species
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let stats = match s.statistics {
                    StatisticsConfig::Boson => Statistics::Boson,
                    StatisticsConfig::Fermion => Statistics::Fermion,
                    StatisticsConfig::Hardcore => Statistics::Hardcore,
                };
                SpeciesSpec::new(stats, s.n_max).map_err(|e| Error::config(format!("model.species[{i}]"), e.to_string()))
            })
            .collect()
    }

    pub fn build_model(&self) -> Result<ModelSpec<f64>> {
        let lattice = Arc::new(self.build_lattice()?);
        let species = self.build_species()?;
        let m = &self.model;
        let s = species.len();
        let tau = match (&m.tau, &m.tau_schedule) {
            (Some(t), _) => TauSchedule::Constant(*t),
            (None, Some(p)) => {
                TauSchedule::piecewise(p.clone()).map_err(|e| Error::config("model.tau_schedule", e.to_string()))?
            }
            (None, None) => return Err(Error::config("model.tau", "missing hopping amplitude")),
        };
        let interactions = m
            .interactions
            .iter()
            .map(|i| match i {
                InteractionConfig::OnSite { site, monomials } => InteractionTerm::OnSite {
                    site: *site,
                    monomials: monomials
                        .iter()
                        .map(|m| Monomial {
                            coefficient: m.coefficient,
                            powers: m.powers.clone(),
                        })
                        .collect(),
                },
                InteractionConfig::Pair {
                    sites,
                    species,
                    coefficient,
                } => InteractionTerm::Pair {
                    sites: *sites,
                    species: *species,
                    coefficient: *coefficient,
                },
            })
            .collect();
        let model = ModelSpec {
            lattice,
            onsite_u: m.u.expand(s, "model.u")?,
            chemical_potential: m.mu.expand(s, "model.mu")?,
            species,
            tau,
            interactions,
            loss_rate: m.loss_rate,
        };
        model.validate().map_err(|e| Error::config("model", e.to_string()))?;
        Ok(model)
    }

    pub fn build_initial_state(&self) -> Result<InitialState<f64>> {
        let lattice = self.build_lattice()?;
        let species = self.build_species()?;
        let l = lattice.num_sites();
        let cfg = self
            .initial_state
            .as_ref()
            .ok_or_else(|| Error::config("initial_state", "missing initial state"))?;
        let flatten = |occ: &[OccupationConfig], path: &str| -> Result<Vec<Occupation>> {
            let mut v = vec![0 as Occupation; l * species.len()];
            for (i, o) in occ.iter().enumerate() {
                if o.site >= l || o.species >= species.len() {
                    return Err(Error::config(format!("{path}[{i}]"), "site or species out of range"));
                }
                let slot = &mut v[o.species * l + o.site];
                let total = *slot as u32 + o.count;
                *slot = Occupation::try_from(total)
                    .map_err(|_| Error::config(format!("{path}[{i}].count"), "occupation too large"))?;
            }
            Ok(v)
        };
        let init = match cfg {
            InitialStateConfig::Basis { occupations } => {
                InitialState::Basis(flatten(occupations, "initial_state.occupations")?)
            }
            InitialStateConfig::Superposition { region, components } => InitialState::Superposition {
                region: region.clone(),
                components: components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        Ok((
                            flatten(&c.occupations, &format!("initial_state.components[{i}].occupations"))?,
                            Complex::new(c.re, c.im),
                        ))
                    })
                    .collect::<Result<_>>()?,
            },
        };
        init.validate(l, &species)
            .map_err(|e| Error::config("initial_state", e.to_string()))?;
        Ok(init)
    }

    pub fn build_times(&self) -> Result<Vec<f64>> {
        let t = self.time.as_ref().ok_or_else(|| Error::config("time", "missing time block"))?;
        Ok(uniform_grid(t.t_max, t.points))
    }

    pub fn build_observables(&self) -> Result<Vec<ObservableRequest<f64>>> {
        let l = self.build_lattice()?.num_sites();
        let s = self.model.species.len();
        let poly = |site: usize, species: usize, terms: &[TermConfig], path: &str| -> Result<LadderPolynomial<f64>> {
            if site >= l || species >= s {
                return Err(Error::config(path, "site or species out of range"));
            }
            let coeffs: Vec<(u32, u32, Complex<f64>)> =
                terms.iter().map(|t| (t.p, t.q, Complex::new(t.re, t.im))).collect();
            Ok(LadderPolynomial::local(Mode::new(site, species), &coeffs))
        };
        self.checks
            .observables
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let path = format!("checks.observables[{i}]");
                Ok(match o {
                    ObservableConfig::Local {
                        name,
                        site,
                        species,
                        terms,
                    } => ObservableRequest {
                        name: name.clone(),
                        kind: ObservableKind::Local {
                            site: *site,
                            operator: poly(*site, *species, terms, &path)?,
                        },
                    },
                    ObservableConfig::TwoSite {
                        name,
                        sites,
                        first,
                        second,
                    } => {
                        if sites.0 == sites.1 {
                            return Err(Error::config(format!("{path}.sites"), "sites must differ"));
                        }
                        ObservableRequest {
                            name: name.clone(),
                            kind: ObservableKind::TwoSite {
                                sites: *sites,
                                first: poly(sites.0, first.species, &first.terms, &path)?,
                                second: poly(sites.1, second.species, &second.terms, &path)?,
                            },
                        }
                    }
                })
            })
            .collect()
    }

    /// Full experiment description.
    pub fn build_experiment(&self) -> Result<ExperimentConfig<f64>> {
        let model = self.build_model()?;
        let mut exp = ExperimentConfig::new(model, self.build_initial_state()?, self.build_times()?);
        for (i, &p) in self.checks.moments.iter().enumerate() {
            if p == 0 {
                return Err(Error::config(format!("checks.moments[{i}]"), "moment order must be ≥ 1"));
            }
        }
        exp.moments = self.checks.moments.clone();
        exp.observables = self.build_observables()?;
        let th = &self.checks.thresholds;
        let defaults = Thresholds::<f64>::default();
        exp.thresholds = Thresholds {
            dominance: th.dominance.unwrap_or(defaults.dominance),
            identity: th.identity.unwrap_or(defaults.identity),
            conservation: th.conservation.unwrap_or(defaults.conservation),
            arrival_epsilon: th.arrival_epsilon,
            ..defaults
        };
        exp.force_density = self.checks.density_matrix;
        let lim = Limits::default();
        exp.limits = Limits {
            max_pure_dim: self.limits.max_pure_dim.unwrap_or(lim.max_pure_dim),
            max_density_dim: self.limits.max_density_dim.unwrap_or(lim.max_density_dim),
        };
        let mut propagator = LanczosPropagator::default();
        if let Some(k) = self.integrator.krylov_dim {
            if k < 2 {
                return Err(Error::config("integrator.krylov_dim", "must be ≥ 2"));
            }
            propagator.max_dim = k;
        }
        if let Some(tol) = self.integrator.tolerance {
            if !(tol > 0.0) {
                return Err(Error::config("integrator.tolerance", "must be > 0"));
            }
            propagator.tolerance = tol;
        }
        exp.evolve = EvolveOptions {
            propagator,
            ..EvolveOptions::default()
        };
        Ok(exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RABI: &str = r#"{
        "lattice": {"kind": "chain", "length": 2},
        "model": {"tau": 1.0},
        "initial_state": {"occupations": [{"site": 0, "count": 1}]},
        "time": {"t_max": 4.0, "points": 41}
    }"#;

    #[test]
    fn parses_minimal() {
        let cfg = RunConfig::parse(RABI).unwrap();
        let exp = cfg.build_experiment().unwrap();
        assert_eq!(exp.times.len(), 41);
        assert_eq!(exp.model.lattice.num_sites(), 2);
        assert_eq!(exp.initial, InitialState::Basis(vec![1, 0]));
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = RABI.replace("\"tau\": 1.0", "\"tau\": 1.0, \"tua\": 2.0");
        match RunConfig::parse(&text) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "model.tua");
                assert!(message.contains("tua"), "{message}");
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let neg = RABI.replace("\"tau\": 1.0", "\"tau\": 1.0, \"loss_rate\": -0.1");
        assert!(matches!(RunConfig::parse(&neg), Err(Error::Config { path, .. }) if path == "model.loss_rate"));
        let short = RABI.replace("\"length\": 2", "\"length\": 1");
        assert!(matches!(RunConfig::parse(&short), Err(Error::Config { path, .. }) if path == "lattice"));
        let sweep = RABI.replace(
            "\"time\"",
            "\"sweep\": {\"parameter\": \"tau\", \"values\": []}, \"time\"",
        );
        assert!(matches!(RunConfig::parse(&sweep), Err(Error::Config { path, .. }) if path == "sweep.values"));
        let structural = RABI.replace(
            "\"time\"",
            "\"sweep\": {\"parameter\": \"length\", \"values\": [3]}, \"time\"",
        );
        assert!(RunConfig::parse(&structural).is_err());
    }

    #[test]
    fn observables_and_species() {
        let text = r#"{
            "lattice": {"kind": "grid", "width": 3, "height": 2},
            "model": {"species": [{"statistics": "fermion"}, {"statistics": "boson", "n_max": 2}],
                      "tau": 0.5, "u": [0.0, 1.0]},
            "initial_state": {"occupations": [{"site": 0, "count": 1}, {"site": 1, "species": 1, "count": 2}]},
            "time": {"t_max": 1.0, "points": 11},
            "checks": {"moments": [2],
                       "observables": [
                         {"kind": "local", "name": "x", "site": 2, "terms": [{"p": 1, "q": 0, "re": 1.0}, {"p": 0, "q": 1, "re": 1.0}]},
                         {"kind": "two_site", "name": "hop", "sites": [0, 1],
                          "first": {"terms": [{"p": 1, "q": 0, "re": 1.0}]},
                          "second": {"terms": [{"p": 0, "q": 1, "re": 1.0}]}}]}
        }"#;
        let exp = RunConfig::parse(text).unwrap().build_experiment().unwrap();
        assert_eq!(exp.model.species.len(), 2);
        assert_eq!(exp.model.onsite_u, vec![0.0, 1.0]);
        assert_eq!(exp.observables.len(), 2);
        let mut occ = vec![0; 12];
        occ[0] = 1;
        occ[7] = 2;
        assert_eq!(exp.initial, InitialState::Basis(occ));
    }
}
