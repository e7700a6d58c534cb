//! Time series recorded during evolution, and their export.

use std::io::Write;

use num_complex::Complex;
use serde::Serialize;

use crate::scalar::Real;

use super::observables::{LadderPolynomial, ObservableClass};

/// Extra expectation value to record along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRequest<T> {
    pub name: String,
    pub kind: ObservableKind<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableKind<T> {
    /// Polynomial supported on one site.
    Local { site: usize, operator: LadderPolynomial<T> },
    /// Product `A_j A_k` on two distinct sites.
    TwoSite {
        sites: (usize, usize),
        first: LadderPolynomial<T>,
        second: LadderPolynomial<T>,
    },
}

impl<T: Real> ObservableRequest<T> {
    pub fn sites(&self) -> Vec<usize> {
        match &self.kind {
            ObservableKind::Local { site, .. } => vec![*site],
            ObservableKind::TwoSite { sites, .. } => vec![sites.0, sites.1],
        }
    }

    pub fn class(&self) -> ObservableClass {
        match &self.kind {
            ObservableKind::Local { operator, .. } => operator.class(),
            ObservableKind::TwoSite { first, second, .. } => {
                if first.class() == ObservableClass::Balanced && second.class() == ObservableClass::Balanced {
                    ObservableClass::Balanced
                } else {
                    ObservableClass::General
                }
            }
        }
    }
}

/// `⟨n_j^p⟩` for one order `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries<T> {
    pub order: u32,
    /// `[time][site]`.
    pub values: Vec<Vec<T>>,
    /// `⟨N^p⟩` of the total particle number per time.
    pub total: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries<T> {
    pub request: ObservableRequest<T>,
    pub values: Vec<Complex<T>>,
    /// `sqrt(⟨A_j†A_j⟩⟨A_k A_k†⟩)` for two-site products.
    pub cauchy_schwarz: Option<Vec<T>>,
}

/// Everything recorded on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace<T> {
    pub num_sites: usize,
    pub times: Vec<T>,
    /// Site densities `α_j(t)`, `[time][site]`.
    pub alpha: Vec<Vec<T>>,
    pub moments: Vec<MomentSeries<T>>,
    /// State norm (pure) or trace (density).
    pub norms: Vec<T>,
    /// `⟨N⟩`.
    pub total_particles: Vec<T>,
    /// `⟨H(t)⟩`.
    pub energy: Vec<T>,
    /// `dα_j/dt` predicted from current expectations:
    /// `2τ Σ_k Im⟨b†_k b_j⟩ - 2λ α_j`.
    pub rate: Vec<Vec<T>>,
    pub observables: Vec<ObservableSeries<T>>,
    /// Smallest eigenvalue of `ρ(t)` when monitored.
    pub min_eigenvalues: Option<Vec<T>>,
    /// Loss rate the trajectory was run with.
    pub loss_rate: T,
    pub stats: EvolutionStats,
}

/// Work counters of a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EvolutionStats {
    pub substeps: usize,
    pub matvecs: usize,
    /// Largest accepted local error estimate of the propagator.
    pub max_error: f64,
}

/// Round-trip format with 17 significant digits.
pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct TraceJson<'a> {
    num_sites: usize,
    loss_rate: f64,
    times: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    moments: Vec<MomentJson>,
    norms: Vec<f64>,
    total_particles: Vec<f64>,
    energy: Vec<f64>,
    rate: Vec<Vec<f64>>,
    observables: Vec<ObservableJson<'a>>,
    min_eigenvalues: Option<Vec<f64>>,
    stats: EvolutionStats,
}

#[derive(Serialize)]
struct MomentJson {
    order: u32,
    values: Vec<Vec<f64>>,
    total: Vec<f64>,
}

#[derive(Serialize)]
struct ObservableJson<'a> {
    name: &'a str,
    sites: Vec<usize>,
    class: ObservableClass,
    re: Vec<f64>,
    im: Vec<f64>,
    cauchy_schwarz: Option<Vec<f64>>,
}

fn v64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn m64<T: Real>(m: &[Vec<T>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| v64(r)).collect()
}

impl<T: Real> SimulationTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_alpha(&self) -> &[T] {
        self.alpha.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn moment(&self, order: u32) -> Option<&MomentSeries<T>> {
        self.moments.iter().find(|m| m.order == order)
    }

    /// CSV with header `time,site,alpha[,moment_p...]`, rows sorted by
    /// `(time, site)`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "time,site,alpha")?;
        for m in &self.moments {
            write!(out, ",moment_{}", m.order)?;
        }
        writeln!(out)?;
        for (ti, t) in self.times.iter().enumerate() {
            let t = fmt_float(t.as_f64());
            for j in 0..self.num_sites {
                write!(out, "{t},{j},{}", fmt_float(self.alpha[ti][j].as_f64()))?;
                for m in &self.moments {
                    write!(out, ",{}", fmt_float(m.values[ti][j].as_f64()))?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let doc = TraceJson {
            num_sites: self.num_sites,
            loss_rate: self.loss_rate.as_f64(),
            times: v64(&self.times),
            alpha: m64(&self.alpha),
            moments: self
                .moments
                .iter()
                .map(|m| MomentJson {
                    order: m.order,
                    values: m64(&m.values),
                    total: v64(&m.total),
                })
                .collect(),
            norms: v64(&self.norms),
            total_particles: v64(&self.total_particles),
            energy: v64(&self.energy),
            rate: m64(&self.rate),
            observables: self
                .observables
                .iter()
                .map(|o| ObservableJson {
                    name: &o.request.name,
                    sites: o.request.sites(),
                    class: o.request.class(),
                    re: o.values.iter().map(|c| c.re.as_f64()).collect(),
                    im: o.values.iter().map(|c| c.im.as_f64()).collect(),
                    cauchy_schwarz: o.cauchy_schwarz.as_deref().map(v64),
                })
                .collect(),
            min_eigenvalues: self.min_eigenvalues.as_deref().map(v64),
            stats: self.stats,
        };
        serde_json::to_string_pretty(&doc).expect("trace serializes")
    }
}
