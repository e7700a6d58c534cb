//! Pure states and density matrices over a Fock space.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, Occupation, SectorBasis, SpeciesSpec};
use crate::linalg::hermitian_eigenvalues;
use crate::scalar::Real;

pub(crate) fn norm_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}

pub(crate) fn trace_tolerance<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(1e3))
}

/// Normalized state vector.
#[derive(Debug, Clone)]
pub struct PureState<T> {
    space: Arc<FockSpace>,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> PureState<T> {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(space: Arc<FockSpace>, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::InvalidState(format!(
                "{} amplitudes for a space of dimension {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        let state = Self { space, amplitudes };
        let norm = state.norm();
        if !norm.is_finite() || (norm - T::one()).abs() > norm_tolerance() {
            return Err(Error::InvalidState(format!("state norm is {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn basis_state(space: Arc<FockSpace>, occupations: &[Occupation]) -> Result<Self> {
        let index = space
            .locate(occupations)
            .ok_or_else(|| Error::NotInBasis(format!("{occupations:?}")))?;
        let mut amplitudes = vec![Complex::zero(); space.dim()];
        amplitudes[index] = Complex::new(T::one(), T::zero());
        Ok(Self { space, amplitudes })
    }

    /// Normalized superposition `Σ c |occ⟩`; repeated configurations add up.
    pub fn from_components(space: Arc<FockSpace>, components: &[(Vec<Occupation>, Complex<T>)]) -> Result<Self> {
        let mut amplitudes = vec![Complex::zero(); space.dim()];
        for (occ, c) in components {
            let index = space
                .locate(occ)
                .ok_or_else(|| Error::NotInBasis(format!("{occ:?}")))?;
            amplitudes[index] += *c;
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidState("superposition has zero or non-finite norm".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self { space, amplitudes })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amplitudes
    }

    pub fn norm(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Dense density matrix, row-major: `entries[x * dim + y] = ρ_{xy}`.
#[derive(Debug, Clone)]
pub struct DensityMatrix<T> {
    space: Arc<FockSpace>,
    entries: Vec<Complex<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Checks shape, unit trace and hermiticity.
    pub fn new(space: Arc<FockSpace>, entries: Vec<Complex<T>>) -> Result<Self> {
        let n = space.dim();
        if entries.len() != n * n {
            return Err(Error::InvalidState(format!(
                "{} entries for a {n}×{n} density matrix",
                entries.len()
            )));
        }
        let rho = Self { space, entries };
        let tr = rho.trace();
        if !tr.is_finite() || (tr - T::one()).abs() > trace_tolerance() {
            return Err(Error::InvalidState(format!("density matrix trace is {tr}, expected 1")));
        }
        let asym = rho.max_antihermiticity();
        if asym > trace_tolerance() {
            return Err(Error::InvalidState(format!("density matrix is not Hermitian ({asym:e})")));
        }
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|` embedded into `space`, which must contain every basis state
    /// `ψ` has weight on.
    pub fn from_pure(psi: &PureState<T>, space: Arc<FockSpace>) -> Result<Self> {
        let n = space.dim();
        let mut coords = Vec::new();
        for (x, &a) in psi.amplitudes().iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let occ = psi.space().occupations(x);
            let y = space
                .locate(occ)
                .ok_or_else(|| Error::NotInBasis(format!("{occ:?}")))?;
            coords.push((y, a));
        }
        let mut entries = vec![Complex::zero(); n * n];
        for &(x, a) in &coords {
            for &(y, b) in &coords {
                entries[x * n + y] = a * b.conj();
            }
        }
        Ok(Self { space, entries })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.entries
    }

    pub fn trace(&self) -> T {
        let n = self.dim();
        (0..n).map(|i| self.entries[i * n + i].re).sum()
    }

    pub fn probabilities(&self) -> Vec<T> {
        let n = self.dim();
        (0..n).map(|i| self.entries[i * n + i].re).collect()
    }

    /// `max |ρ_{xy} - conj(ρ_{yx})|`.
    pub fn max_antihermiticity(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for x in 0..n {
            for y in x..n {
                worst = worst.max((self.entries[x * n + y] - self.entries[y * n + x].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<T> {
        let n = self.dim();
        let mut herm = self.entries.clone();
        for x in 0..n {
            for y in 0..n {
                herm[x * n + y] = (self.entries[x * n + y] + self.entries[y * n + x].conj()) * T::lit(0.5);
            }
        }
        Ok(hermitian_eigenvalues(&herm, n)?.first().copied().unwrap_or(T::zero()))
    }
}

/// Either kind of state; observables accept both.
#[derive(Debug, Clone)]
pub enum QuantumState<T> {
    Pure(PureState<T>),
    Density(DensityMatrix<T>),
}

impl<T: Real> QuantumState<T> {
    pub fn space(&self) -> &Arc<FockSpace> {
        match self {
            Self::Pure(p) => p.space(),
            Self::Density(d) => d.space(),
        }
    }

    /// Diagonal weights in the occupation basis.
    pub fn probabilities(&self) -> Vec<T> {
        match self {
            Self::Pure(p) => p.probabilities(),
            Self::Density(d) => d.probabilities(),
        }
    }

    /// Norm for pure states, trace for density matrices.
    pub fn weight(&self) -> T {
        match self {
            Self::Pure(p) => p.norm(),
            Self::Density(d) => d.trace(),
        }
    }
}

impl<T> From<PureState<T>> for QuantumState<T> {
    fn from(p: PureState<T>) -> Self {
        Self::Pure(p)
    }
}

impl<T> From<DensityMatrix<T>> for QuantumState<T> {
    fn from(d: DensityMatrix<T>) -> Self {
        Self::Density(d)
    }
}

/// Initial-state description: vacuum outside a region `R`.
///
/// Occupation vectors are species-major: entry `s * L + j` is the occupation
/// of species `s` on site `j`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState<T> {
    /// Single occupation basis state (a product of per-site occupations).
    Basis(Vec<Occupation>),
    /// Normalized superposition of configurations, all vacuum outside
    /// `region`.
    Superposition {
        region: Vec<usize>,
        components: Vec<(Vec<Occupation>, Complex<T>)>,
    },
}

impl<T: Real> InitialState<T> {
    /// Basis state with `count` particles of species 0 on each listed site.
    pub fn single_species(num_sites: usize, sites: &[(usize, Occupation)]) -> Self {
        let mut occ = vec![0; num_sites];
        for &(j, n) in sites {
            occ[j] += n;
        }
        Self::Basis(occ)
    }

    fn configurations(&self) -> Vec<&[Occupation]> {
        match self {
            Self::Basis(occ) => vec![occ.as_slice()],
            Self::Superposition { components, .. } => components.iter().map(|(o, _)| o.as_slice()).collect(),
        }
    }

    /// Sites with nonzero occupation in some configuration.
    pub fn support(&self, num_sites: usize) -> Vec<usize> {
        let mut sites: Vec<usize> = self
            .configurations()
            .iter()
            .flat_map(|occ| occ.iter().enumerate().filter(|(_, &n)| n > 0).map(|(i, _)| i % num_sites))
            .collect();
        sites.sort_unstable();
        sites.dedup();
        sites
    }

    /// Region `R`: the declared region, or the occupied sites of a basis state.
    pub fn region(&self, num_sites: usize) -> Vec<usize> {
        match self {
            Self::Basis(_) => self.support(num_sites),
            Self::Superposition { region, .. } => {
                let mut r = region.clone();
                r.sort_unstable();
                r.dedup();
                r
            }
        }
    }

    pub fn validate(&self, num_sites: usize, species: &[SpeciesSpec]) -> Result<()> {
        let width = num_sites * species.len();
        let configs = self.configurations();
        if configs.is_empty() {
            return Err(Error::InvalidState("superposition has no components".into()));
        }
        for occ in &configs {
            if occ.len() != width {
                return Err(Error::InvalidState(format!(
                    "configuration has {} entries, expected {width}",
                    occ.len()
                )));
            }
            for (i, &n) in occ.iter().enumerate() {
                if let Some(cap) = species[i / num_sites].cap() {
                    if n as u32 > cap {
                        return Err(Error::InvalidState(format!(
                            "occupation {n} exceeds the cap {cap} of species {}",
                            i / num_sites
                        )));
                    }
                }
            }
        }
        if let Self::Superposition { region, .. } = self {
            if region.is_empty() {
                return Err(Error::InvalidRegion("region must be nonempty".into()));
            }
            if let Some(&site) = region.iter().find(|&&s| s >= num_sites) {
                return Err(Error::SiteOutOfRange { site, num_sites });
            }
            if let Some(site) = self.support(num_sites).into_iter().find(|s| !region.contains(s)) {
                return Err(Error::InvalidState(format!(
                    "site {site} is occupied but lies outside the region"
                )));
            }
        }
        Ok(())
    }

    fn particle_numbers(occ: &[Occupation], num_sites: usize, num_species: usize) -> Vec<u32> {
        (0..num_species)
            .map(|s| occ[s * num_sites..(s + 1) * num_sites].iter().map(|&n| n as u32).sum())
            .collect()
    }

    /// Smallest space holding the state: the sectors of its configurations.
    pub fn sector_space(&self, num_sites: usize, species: &[SpeciesSpec]) -> Result<Arc<FockSpace>> {
        self.validate(num_sites, species)?;
        let mut sectors: Vec<Vec<u32>> = self
            .configurations()
            .iter()
            .map(|occ| Self::particle_numbers(occ, num_sites, species.len()))
            .collect();
        sectors.sort();
        sectors.dedup();
        Ok(Arc::new(FockSpace::with_sectors(num_sites, species, &sectors)?))
    }

    /// All sectors with at most the initial particle numbers, as needed for
    /// particle loss.
    pub fn loss_space(&self, num_sites: usize, species: &[SpeciesSpec]) -> Result<Arc<FockSpace>> {
        self.validate(num_sites, species)?;
        let mut max = vec![0u32; species.len()];
        for occ in self.configurations() {
            for (m, n) in max.iter_mut().zip(Self::particle_numbers(occ, num_sites, species.len())) {
                *m = (*m).max(n);
            }
        }
        Ok(Arc::new(FockSpace::up_to(num_sites, species, &max)?))
    }

    /// Total dimension of the sectors the state occupies.
    pub fn sector_dims(&self, num_sites: usize, species: &[SpeciesSpec]) -> Result<u128> {
        self.validate(num_sites, species)?;
        let mut sectors = self.configurations().iter().map(|occ| Self::particle_numbers(occ, num_sites, species.len())).collect::<Vec<_>>();
        sectors.sort();
        sectors.dedup();
        sectors.iter().try_fold(0u128, |acc, n| {
            Ok(acc.saturating_add(SectorBasis::dimension_of(num_sites, species, n)?))
        })
    }

    /// Dimension of all sectors up to the initial particle numbers.
    pub fn loss_space_dims(&self, num_sites: usize, species: &[SpeciesSpec]) -> Result<u128> {
        self.validate(num_sites, species)?;
        let mut max = vec![0u32; species.len()];
        for n in self.configurations().iter().map(|occ| Self::particle_numbers(occ, num_sites, species.len())).collect::<Vec<_>>() {
            for (m, v) in max.iter_mut().zip(n) {
                *m = (*m).max(v);
            }
        }
        FockSpace::dimension_up_to(num_sites, species, &max)
    }

    pub fn pure(&self, space: Arc<FockSpace>) -> Result<PureState<T>> {
        match self {
            Self::Basis(occ) => PureState::basis_state(space, occ),
            Self::Superposition { components, .. } => PureState::from_components(space, components),
        }
    }

    pub fn density(&self, space: Arc<FockSpace>) -> Result<DensityMatrix<T>> {
        let psi = self.pure(space.clone())?;
        DensityMatrix::from_pure(&psi, space)
    }
}
