//! Sparse Hamiltonians of hopping-plus-density-interaction form:
//!
//! ```text
//! H(t) = -τ(t) Σ_s Σ_⟨j,k⟩ (b†_{s,j} b_{s,k} + h.c.)
//!        + Σ_{s,j} [U_s/2 · n_{s,j}(n_{s,j} - 1) - μ_s n_{s,j}]
//!        + f({n_{s,j}})
//! ```
//!
//! with `f` a sum of per-site density polynomials and pairwise
//! density-density terms. Everything except the hopping is diagonal in the
//! occupation basis, so a Hamiltonian is stored as a hopping operator plus a
//! diagonal, and `H(τ)` is assembled on demand.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fock::{apply_hop_in_place, FockSpace, Mode, SectorBasis, SpeciesSpec};
use crate::graph::Lattice;
use crate::scalar::Real;

/// Hopping amplitude as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum TauSchedule<T> {
    Constant(T),
    /// `(start_time, τ)` pieces sorted by start time; the first starts at 0
    /// and the last extends to infinity.
    Piecewise(Vec<(T, T)>),
}

impl<T: Real> TauSchedule<T> {
    pub fn piecewise(pieces: Vec<(T, T)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidModel("empty τ schedule".into()));
        }
        if pieces[0].0 != T::zero() {
            return Err(Error::InvalidModel("τ schedule must start at t = 0".into()));
        }
        for w in pieces.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidModel(
                    "τ schedule start times must be strictly increasing".into(),
                ));
            }
        }
        if pieces.iter().any(|(s, tau)| !s.is_finite() || !tau.is_finite()) {
            return Err(Error::InvalidModel("τ schedule must be finite".into()));
        }
        Ok(Self::Piecewise(pieces))
    }

    /// τ in effect at time `t` (right-continuous).
    pub fn at(&self, t: T) -> T {
        match self {
            Self::Constant(tau) => *tau,
            Self::Piecewise(pieces) => {
                let idx = pieces.partition_point(|(start, _)| *start <= t);
                pieces[idx.saturating_sub(1)].1
            }
        }
    }

    /// `τ_max = sup_t |τ(t)|`.
    pub fn sup(&self) -> T {
        match self {
            Self::Constant(tau) => tau.abs(),
            Self::Piecewise(pieces) => pieces.iter().fold(T::zero(), |m, (_, tau)| m.max(tau.abs())),
        }
    }

    /// Times where τ jumps, excluding 0.
    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            Self::Constant(_) => Vec::new(),
            Self::Piecewise(pieces) => pieces.iter().skip(1).map(|(s, _)| *s).collect(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::Piecewise(p) => p.iter().all(|(_, tau)| *tau == p[0].1),
        }
    }

    fn map(&self, f: impl Fn(T) -> T) -> Self {
        match self {
            Self::Constant(tau) => Self::Constant(f(*tau)),
            Self::Piecewise(p) => Self::Piecewise(p.iter().map(|&(s, tau)| (s, f(tau))).collect()),
        }
    }
}

/// `coefficient · Π_s n_{s,j}^{powers[s]}` on one site.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial<T> {
    pub coefficient: T,
    pub powers: Vec<u32>,
}

/// Density-only interaction term.
#[derive(Debug, Clone, PartialEq)]
pub enum InteractionTerm<T> {
    /// Polynomial in the local densities `n_{1,j}, …, n_{S,j}` of one site.
    OnSite { site: usize, monomials: Vec<Monomial<T>> },
    /// `coefficient · n_{s,j} n_{s',k}`, possibly non-local.
    Pair {
        sites: (usize, usize),
        species: (usize, usize),
        coefficient: T,
    },
}

/// Full model description.
#[derive(Debug, Clone)]
pub struct ModelSpec<T> {
    pub lattice: Arc<Lattice>,
    pub species: Vec<SpeciesSpec>,
    pub tau: TauSchedule<T>,
    /// On-site repulsion per species.
    pub onsite_u: Vec<T>,
    /// Chemical potential per species.
    pub chemical_potential: Vec<T>,
    pub interactions: Vec<InteractionTerm<T>>,
    /// Particle-loss rate λ ≥ 0 for dissipative runs.
    pub loss_rate: T,
}

impl<T: Real> ModelSpec<T> {
    /// Single-species Bose-Hubbard model.
    pub fn bose_hubbard(lattice: Arc<Lattice>, tau: T, u: T, mu: T) -> Self {
        Self::single_species(lattice, SpeciesSpec::boson(), tau, u, mu)
    }

    pub fn single_species(lattice: Arc<Lattice>, species: SpeciesSpec, tau: T, u: T, mu: T) -> Self {
        Self {
            lattice,
            species: vec![species],
            tau: TauSchedule::Constant(tau),
            onsite_u: vec![u],
            chemical_potential: vec![mu],
            interactions: Vec::new(),
            loss_rate: T::zero(),
        }
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn tau_max(&self) -> T {
        self.tau.sup()
    }

    /// Same model with every hopping amplitude multiplied by `factor`.
    pub fn with_tau_scaled(&self, factor: T) -> Self {
        Self {
            tau: self.tau.map(|tau| tau * factor),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.species.len();
        if s == 0 {
            return Err(Error::InvalidModel("at least one species is required".into()));
        }
        if self.onsite_u.len() != s || self.chemical_potential.len() != s {
            return Err(Error::InvalidModel(format!(
                "U and μ need one entry per species ({s})"
            )));
        }
        if !(self.loss_rate >= T::zero()) || !self.loss_rate.is_finite() {
            return Err(Error::InvalidModel("loss rate must be finite and ≥ 0".into()));
        }
        if !self.tau.sup().is_finite() {
            return Err(Error::InvalidModel("τ must be bounded".into()));
        }
        let l = self.lattice.num_sites();
        for term in &self.interactions {
            match term {
                InteractionTerm::OnSite { site, monomials } => {
                    self.lattice.check_site(*site)?;
                    if monomials.iter().any(|m| m.powers.len() != s) {
                        return Err(Error::InvalidModel(format!(
                            "on-site monomials need {s} powers (one per species)"
                        )));
                    }
                }
                InteractionTerm::Pair { sites, species, .. } => {
                    for site in [sites.0, sites.1] {
                        if site >= l {
                            return Err(Error::SiteOutOfRange { site, num_sites: l });
                        }
                    }
                    if species.0 >= s || species.1 >= s {
                        return Err(Error::InvalidModel("pair term species out of range".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_space(&self, num_sites: usize, species: &[SpeciesSpec]) -> Result<()> {
        self.validate()?;
        if num_sites != self.lattice.num_sites() {
            return Err(Error::IncompatibleBasis(format!(
                "basis has {num_sites} sites, lattice has {}",
                self.lattice.num_sites()
            )));
        }
        if species != self.species.as_slice() {
            return Err(Error::IncompatibleBasis("basis species differ from the model".into()));
        }
        Ok(())
    }
}

/// Real sparse matrix in compressed-row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    hermitian: bool,
}

impl<T: Real> SparseOperator<T> {
    /// Builds from per-row `(column, value)` lists; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_rows(dim: usize, rows: Vec<Vec<(usize, T)>>, hermitian: bool) -> Self {
        assert_eq!(rows.len(), dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != T::zero() {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian,
        }
    }

    pub fn diagonal(values: &[T]) -> Self {
        let rows = values.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect();
        Self::from_rows(values.len(), rows, true)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Nonzeros of one row as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(pos) => self.vals[r.start + pos],
            Err(_) => T::zero(),
        }
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Max absolute row sum, an upper bound on the spectral norm of a
    /// symmetric matrix.
    pub fn norm_inf(&self) -> T {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim * self.dim];
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                out[i * self.dim + j] = v;
            }
        }
        out
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            *yi = acc;
        }
    }

    /// `y = A x` for real vectors.
    pub fn matvec_real(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            *yi = acc;
        }
    }

    /// `α A + diag(d)`.
    fn scaled_plus_diagonal(&self, alpha: T, diag: &[T]) -> Self {
        let rows = (0..self.dim)
            .map(|i| {
                let mut row: Vec<(usize, T)> = self.row(i).map(|(j, v)| (j, alpha * v)).collect();
                row.push((i, diag[i]));
                row
            })
            .collect();
        Self::from_rows(self.dim, rows, self.hermitian)
    }
}

/// Hamiltonian over a Fock space split into its hopping part `K`
/// (`Σ b†b + h.c.`, no `-τ`) and its diagonal `V`: `H(τ) = -τ K + V`.
#[derive(Debug, Clone)]
pub struct HamiltonianParts<T> {
    pub hopping: SparseOperator<T>,
    pub diagonal: Vec<T>,
}

impl<T: Real> HamiltonianParts<T> {
    pub fn build(spec: &ModelSpec<T>, space: &FockSpace) -> Result<Self> {
        spec.check_space(space.num_sites(), space.species())?;
        let diagonal = diagonal_interaction_on(spec, space)?;
        let hopping = hopping_operator(spec, space);
        Ok(Self { hopping, diagonal })
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// Assembled `H(τ)`.
    pub fn at_tau(&self, tau: T) -> SparseOperator<T> {
        self.hopping.scaled_plus_diagonal(-tau, &self.diagonal)
    }

    /// `y = H(τ) x` without assembling `H`.
    pub fn apply(&self, tau: T, x: &[Complex<T>], y: &mut [Complex<T>]) {
        self.hopping.matvec(x, y);
        for ((yi, &xi), &d) in y.iter_mut().zip(x).zip(&self.diagonal) {
            *yi = xi * d - *yi * tau;
        }
    }

    /// Upper bound on `‖H(τ)‖`.
    pub fn norm_bound(&self, tau: T) -> T {
        tau.abs() * self.hopping.norm_inf() + self.diagonal.iter().fold(T::zero(), |m, d| m.max(d.abs()))
    }
}

fn hopping_operator<T: Real>(spec: &ModelSpec<T>, space: &FockSpace) -> SparseOperator<T> {
    let dim = space.dim();
    let species = space.species();
    let l = space.num_sites();
    let edges = spec.lattice.edges();
    let mut scratch = vec![0; space.width()];
    let mut rows = Vec::with_capacity(dim);
    for x in 0..dim {
        // Row x of a real symmetric H equals column x: collect H|x⟩.
        let mut row = Vec::new();
        for s in 0..species.len() {
            for &(a, b) in edges {
                for (from, to) in [(a, b), (b, a)] {
                    scratch.copy_from_slice(space.occupations(x));
                    if let Some(w) = apply_hop_in_place(species, l, &mut scratch, s, from, to) {
                        let y = space.locate(&scratch).expect("hopping conserves particle number");
                        row.push((y, w.amplitude::<T>()));
                    }
                }
            }
        }
        rows.push(row);
    }
    SparseOperator::from_rows(dim, rows, true)
}

/// Diagonal energies (everything except hopping) on a single sector.
pub fn diagonal_interaction<T: Real>(spec: &ModelSpec<T>, basis: &SectorBasis) -> Result<Vec<T>> {
    diagonal_interaction_on(spec, &FockSpace::single(basis.clone()))
}

/// Diagonal energies on every basis state of a Fock space.
pub fn diagonal_interaction_on<T: Real>(spec: &ModelSpec<T>, space: &FockSpace) -> Result<Vec<T>> {
    spec.check_space(space.num_sites(), space.species())?;
    let l = space.num_sites();
    let s_count = space.num_species();
    let half = T::lit(0.5);
    Ok((0..space.dim())
        .map(|x| {
            let occ = space.occupations(x);
            let n = |site: usize, s: usize| occ[s * l + site] as u128;
            let mut e = T::zero();
            for s in 0..s_count {
                let mut pairs = 0u128;
                let mut total = 0u128;
                for j in 0..l {
                    let nj = n(j, s);
                    pairs += nj * nj.saturating_sub(1);
                    total += nj;
                }
                e += spec.onsite_u[s] * half * T::from_count(pairs)
                    - spec.chemical_potential[s] * T::from_count(total);
            }
            for term in &spec.interactions {
                match term {
                    InteractionTerm::OnSite { site, monomials } => {
                        for m in monomials {
                            let value = m
                                .powers
                                .iter()
                                .enumerate()
                                .fold(1u128, |acc, (s, &p)| acc.saturating_mul(n(*site, s).saturating_pow(p)));
                            e += m.coefficient * T::from_count(value);
                        }
                    }
                    InteractionTerm::Pair {
                        sites,
                        species,
                        coefficient,
                    } => {
                        let value = n(sites.0, species.0) * n(sites.1, species.1);
                        e += *coefficient * T::from_count(value);
                    }
                }
            }
            e
        })
        .collect())
}

/// `H(t)` on one fixed-particle-number sector.
pub fn build_hamiltonian<T: Real>(spec: &ModelSpec<T>, basis: &SectorBasis, t: T) -> Result<SparseOperator<T>> {
    build_hamiltonian_on(spec, &FockSpace::single(basis.clone()), t)
}

/// `H(t)` on a direct sum of sectors (block diagonal by construction).
pub fn build_hamiltonian_on<T: Real>(spec: &ModelSpec<T>, space: &FockSpace, t: T) -> Result<SparseOperator<T>> {
    Ok(HamiltonianParts::build(spec, space)?.at_tau(spec.tau.at(t)))
}

/// Number operator of one mode as a diagonal over `space`.
pub fn number_diagonal<T: Real>(space: &FockSpace, mode: Mode) -> Vec<T> {
    (0..space.dim())
        .map(|x| T::from_count(space.occupation(x, mode) as u128))
        .collect()
}
