//! Normally ordered ladder polynomials and their expectation values.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::fock::{apply_ladder_product, FockSpace, Mode, Occupation};
use crate::scalar::Real;

use super::state::QuantumState;

/// `coefficient · Π (b†_m)^p (b_m)^q`, factors written left to right (the
/// rightmost acts first).
#[derive(Debug, Clone, PartialEq)]
pub struct LadderTerm<T> {
    pub coefficient: Complex<T>,
    pub factors: Vec<(Mode, u32, u32)>,
}

/// Finite sum of ladder monomials.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LadderPolynomial<T> {
    pub terms: Vec<LadderTerm<T>>,
}

/// Decay class of a local observable: whether every term both creates and
/// annihilates (`c_{0,q} = c_{p,0} = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableClass {
    Balanced,
    General,
}

impl ObservableClass {
    /// `κ` in the decay exponent `(vt - l)/κ`.
    pub fn kappa(self) -> u32 {
        match self {
            Self::Balanced => 1,
            Self::General => 2,
        }
    }
}

impl<T: Real> LadderPolynomial<T> {
    /// `Σ c_{p,q} (b†)^p b^q` on a single mode.
    pub fn local(mode: Mode, coefficients: &[(u32, u32, Complex<T>)]) -> Self {
        Self {
            terms: coefficients
                .iter()
                .filter(|(_, _, c)| !c.is_zero())
                .map(|&(p, q, c)| LadderTerm {
                    coefficient: c,
                    factors: vec![(mode, p, q)],
                })
                .collect(),
        }
    }

    pub fn number(mode: Mode) -> Self {
        Self::local(mode, &[(1, 1, Complex::new(T::one(), T::zero()))])
    }

    /// `b†_to b_from` of one species.
    pub fn hop(species: usize, from: usize, to: usize) -> Self {
        Self {
            terms: vec![LadderTerm {
                coefficient: Complex::new(T::one(), T::zero()),
                factors: vec![(Mode::new(to, species), 1, 0), (Mode::new(from, species), 0, 1)],
            }],
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| LadderTerm {
                    coefficient: t.coefficient.conj(),
                    factors: t.factors.iter().rev().map(|&(m, p, q)| (m, q, p)).collect(),
                })
                .collect(),
        }
    }

    /// Operator product `self · other`.
    pub fn product(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend_from_slice(&b.factors);
                terms.push(LadderTerm {
                    coefficient: a.coefficient * b.coefficient,
                    factors,
                });
            }
        }
        Self { terms }
    }

    /// `Σ |c|` over terms.
    pub fn coefficient_sum(&self) -> T {
        self.terms.iter().map(|t| t.coefficient.norm()).sum()
    }

    /// Balanced iff no term is a pure creation or pure annihilation.
    /// Identity terms are ignored.
    pub fn class(&self) -> ObservableClass {
        let unbalanced = self.terms.iter().any(|t| {
            let p: u32 = t.factors.iter().map(|f| f.1).sum();
            let q: u32 = t.factors.iter().map(|f| f.2).sum();
            (p == 0) != (q == 0)
        });
        if unbalanced {
            ObservableClass::General
        } else {
            ObservableClass::Balanced
        }
    }

    /// Sites touched by any factor.
    pub fn sites(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.iter().flat_map(|t| t.factors.iter().map(|f| f.0.site)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub(crate) fn check(&self, space: &FockSpace) -> Result<()> {
        for t in &self.terms {
            for &(m, _, _) in &t.factors {
                if m.site >= space.num_sites() {
                    return Err(Error::SiteOutOfRange {
                        site: m.site,
                        num_sites: space.num_sites(),
                    });
                }
                if m.species >= space.num_species() {
                    return Err(Error::InvalidArgument(format!("species {} out of range", m.species)));
                }
            }
        }
        Ok(())
    }
}

/// Applies a polynomial to basis state `x`, calling `emit(y, amplitude)` for
/// every nonvanishing image inside `space`. Images outside `space` are
/// dropped: they lie in sectors the state has no weight in.
pub(crate) fn for_each_image<T: Real>(
    space: &FockSpace,
    poly: &LadderPolynomial<T>,
    x: usize,
    scratch: &mut Vec<Occupation>,
    mut emit: impl FnMut(usize, Complex<T>),
) {
    for term in &poly.terms {
        scratch.clear();
        scratch.extend_from_slice(space.occupations(x));
        if let Some(w) = apply_ladder_product(space.species(), space.num_sites(), scratch, &term.factors) {
            if let Some(y) = space.locate(scratch) {
                emit(y, term.coefficient * w.amplitude::<T>());
            }
        }
    }
}

/// `tr(A ρ)` or `⟨ψ|A|ψ⟩`.
pub fn expectation<T: Real>(state: &QuantumState<T>, poly: &LadderPolynomial<T>) -> Result<Complex<T>> {
    let space = state.space();
    poly.check(space)?;
    let mut scratch = Vec::with_capacity(space.width());
    let mut acc = Complex::zero();
    match state {
        QuantumState::Pure(psi) => {
            let a = psi.amplitudes();
            for x in 0..space.dim() {
                if a[x].is_zero() {
                    continue;
                }
                for_each_image(space, poly, x, &mut scratch, |y, w| acc += a[y].conj() * w * a[x]);
            }
        }
        QuantumState::Density(rho) => {
            let n = space.dim();
            let r = rho.entries();
            // tr(Aρ) = Σ_{x,y} A_{yx} ρ_{xy}
            for x in 0..n {
                for_each_image(space, poly, x, &mut scratch, |y, w| acc += w * r[x * n + y]);
            }
        }
    }
    Ok(acc)
}

/// `α_j = Σ_s ⟨n_{s,j}⟩`.
pub fn density<T: Real>(state: &QuantumState<T>, site: usize) -> Result<T> {
    moment(state, site, 1)
}

/// `α_j^{(p)} = ⟨n_j^p⟩` with `n_j` the total occupation of site `j`.
pub fn moment<T: Real>(state: &QuantumState<T>, site: usize, p: u32) -> Result<T> {
    let space = state.space();
    if site >= space.num_sites() {
        return Err(Error::SiteOutOfRange {
            site,
            num_sites: space.num_sites(),
        });
    }
    if p == 0 {
        return Err(Error::InvalidArgument("moment order must be ≥ 1".into()));
    }
    let probs = state.probabilities();
    Ok((0..space.dim())
        .map(|x| probs[x] * T::from_count((space.site_occupation(x, site) as u128).pow(p)))
        .sum())
}

/// `⟨A_j⟩` for `A_j = Σ c_{p,q} (b†_j)^p b_j^q` on one mode.
pub fn local_observable<T: Real>(
    state: &QuantumState<T>,
    mode: Mode,
    coefficients: &[(u32, u32, Complex<T>)],
) -> Result<Complex<T>> {
    expectation(state, &LadderPolynomial::local(mode, coefficients))
}

/// `⟨A_j A_k⟩` for observables supported on two distinct sites.
pub fn two_site_correlator<T: Real>(
    state: &QuantumState<T>,
    j: usize,
    k: usize,
    a_j: &LadderPolynomial<T>,
    a_k: &LadderPolynomial<T>,
) -> Result<Complex<T>> {
    if j == k {
        return Err(Error::InvalidArgument("two-site correlator needs j ≠ k".into()));
    }
    let n = state.space().num_sites();
    for site in [j, k] {
        if site >= n {
            return Err(Error::SiteOutOfRange { site, num_sites: n });
        }
    }
    if a_j.sites().iter().any(|&s| s != j) || a_k.sites().iter().any(|&s| s != k) {
        return Err(Error::InvalidArgument("observable acts outside its site".into()));
    }
    expectation(state, &a_j.product(a_k))
}

/// Right side of the Cauchy-Schwarz bound on `|⟨A_j A_k⟩|`:
/// `sqrt(⟨A_j† A_j⟩ ⟨A_k A_k†⟩)`.
pub fn cauchy_schwarz_bound<T: Real>(
    state: &QuantumState<T>,
    a_j: &LadderPolynomial<T>,
    a_k: &LadderPolynomial<T>,
) -> Result<T> {
    let left = expectation(state, &a_j.adjoint().product(a_j))?.re.max(T::zero());
    let right = expectation(state, &a_k.product(&a_k.adjoint()))?.re.max(T::zero());
    Ok((left * right).sqrt())
}
