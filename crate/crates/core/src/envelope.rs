//! Bound-side quantities: the constants `χ`, `C`, `v₀`, `v`, the worst-case
//! linear envelope `γ(t) = e^{Dτt} e^{τMt} α(0)` and the analytic light-cone
//! bounds derived from it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::ObservableClass;
use crate::graph::Lattice;
use crate::scalar::Real;

/// Largest lattice accepted by [`elementwise_expm_certificate`].
pub const CERTIFICATE_MAX_SITES: usize = 2000;

/// Root of `χ ln χ = χ + 1` by Newton iteration from 3.5.
pub fn solve_chi<T: Real>() -> T {
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let mut chi = T::lit(3.5);
    for _ in 0..64 {
        let g = chi * chi.ln() - chi - T::one();
        if g.abs() < tol {
            break;
        }
        // g'(χ) = ln χ
        chi -= g / chi.ln();
    }
    chi
}

/// Constants of the light-cone bound for one lattice and hopping strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams<T> {
    pub chi: T,
    /// `C = 2χ²/(χ - 1)`.
    pub c: T,
    /// Maximal degree `D`.
    pub max_degree: usize,
    /// `Δ = ‖M‖_∞ / 2`.
    pub delta: T,
    pub tau_max: T,
    /// `v₀ = χ Δ τ_max`.
    pub v0: T,
    /// `v = v₀ + D τ_max`.
    pub v: T,
}

pub fn make_params<T: Real>(lattice: &Lattice, tau_max: T) -> Result<EnvelopeParams<T>> {
    if !(tau_max > T::zero()) || !tau_max.is_finite() {
        return Err(Error::InvalidArgument(format!("τ_max must be positive, got {tau_max}")));
    }
    let chi = solve_chi::<T>();
    let delta = lattice.delta::<T>();
    let d = T::from_count(lattice.max_degree() as u128);
    let v0 = chi * delta * tau_max;
    Ok(EnvelopeParams {
        chi,
        c: T::lit(2.0) * chi * chi / (chi - T::one()),
        max_degree: lattice.max_degree(),
        delta,
        tau_max,
        v0,
        v: v0 + d * tau_max,
    })
}

impl<T: Real> EnvelopeParams<T> {
    /// `e^{vt - l}`.
    pub fn cone(&self, l: usize, t: T) -> T {
        (self.v * t - T::from_count(l as u128)).exp()
    }
}

/// `v ← e^{s M} v` for entrywise nonnegative `v` and `s ≥ 0`.
///
/// Every Taylor term is nonnegative, so the series is summed until the
/// remaining tail is negligible relative to the *smallest* nonzero entry of
/// the partial sum, not merely to its norm. Far entries, which first appear
/// at high orders, therefore keep full relative accuracy.
fn nonnegative_expmv<T: Real>(lattice: &Lattice, s: T, v: &mut [T], tolerance: T) -> Result<()> {
    const MAX_TERMS: usize = 4000;
    let d = lattice.max_degree();
    if s == T::zero() || d == 0 {
        return Ok(());
    }
    let n = v.len();
    let steps = (T::lit(2.0) * s * T::from_count(d as u128))
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(1);
    if steps > 10_000_000 {
        return Err(Error::ResourceLimit(format!("exponential action needs {steps} sub-steps")));
    }
    let h = s / T::from_count(steps as u128);
    let mut term = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    for _ in 0..steps {
        term.copy_from_slice(v);
        let mut k = 0;
        loop {
            k += 1;
            if k > MAX_TERMS {
                return Err(Error::Convergence {
                    time: s.as_f64(),
                    residual: f64::NAN,
                });
            }
            let factor = h / T::from_count(k as u128);
            for (i, nx) in next.iter_mut().enumerate() {
                *nx = lattice.neighbors(i).iter().map(|&j| term[j]).sum::<T>() * factor;
            }
            std::mem::swap(&mut term, &mut next);
            let mut max_term = T::zero();
            let mut min_sum = T::infinity();
            let mut all_positive = true;
            for (vi, &ti) in v.iter_mut().zip(&term) {
                *vi += ti;
                max_term = max_term.max(ti);
                if *vi > T::zero() {
                    min_sum = min_sum.min(*vi);
                } else {
                    all_positive = false;
                }
            }
            if max_term == T::zero() {
                break;
            }
            // With h D ≤ 1/2 the tail after this term is at most 2·max_term per entry.
            if all_positive && k >= 2 && T::lit(2.0) * max_term <= tolerance * min_sum {
                break;
            }
        }
    }
    Ok(())
}

fn check_alpha0<T: Real>(lattice: &Lattice, alpha0: &[T]) -> Result<()> {
    if alpha0.len() != lattice.num_sites() {
        return Err(Error::InvalidArgument(format!(
            "initial densities have {} entries for {} sites",
            alpha0.len(),
            lattice.num_sites()
        )));
    }
    if alpha0.iter().any(|a| !(*a >= T::zero()) || !a.is_finite()) {
        return Err(Error::InvalidArgument("initial densities must be finite and ≥ 0".into()));
    }
    Ok(())
}

/// Worst-case envelope `γ(t) = e^{Dτt} e^{τMt} α(0)`.
pub fn envelope_ode<T: Real>(lattice: &Lattice, tau_max: T, alpha0: &[T], t: T) -> Result<Vec<T>> {
    check_alpha0(lattice, alpha0)?;
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("time must be ≥ 0, got {t}")));
    }
    let mut gamma = alpha0.to_vec();
    nonnegative_expmv(lattice, tau_max.abs() * t, &mut gamma, T::epsilon())?;
    let growth = (T::from_count(lattice.max_degree() as u128) * tau_max.abs() * t).exp();
    for g in &mut gamma {
        *g *= growth;
    }
    Ok(gamma)
}

/// `γ(t)` on a grid of nondecreasing times, propagated incrementally.
/// Returned as `[time][site]`.
pub fn envelope_series<T: Real>(lattice: &Lattice, tau_max: T, alpha0: &[T], times: &[T]) -> Result<Vec<Vec<T>>> {
    check_alpha0(lattice, alpha0)?;
    if times.iter().any(|t| !(*t >= T::zero())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("envelope times must be ≥ 0 and nondecreasing".into()));
    }
    let tau = tau_max.abs();
    let d = T::from_count(lattice.max_degree() as u128);
    let mut inner = alpha0.to_vec();
    let mut now = T::zero();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        nonnegative_expmv(lattice, tau * (t - now), &mut inner, T::epsilon())?;
        now = t;
        let growth = (d * tau * t).exp();
        out.push(inner.iter().map(|&g| g * growth).collect());
    }
    Ok(out)
}

/// `C N₀ e^{vt - l}`.
pub fn analytic_density_bound<T: Real>(params: &EnvelopeParams<T>, n0: T, l: usize, t: T) -> T {
    params.c * n0 * params.cone(l, t)
}

/// `C ⟨N^p⟩ e^{vt - l}`; callers with exclusive statistics may pass `N₀`.
pub fn moment_bound<T: Real>(params: &EnvelopeParams<T>, total_moment: T, l: usize, t: T) -> Result<T> {
    if !(total_moment >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "particle-number moment must be ≥ 0, got {total_moment}"
        )));
    }
    Ok(params.c * total_moment * params.cone(l, t))
}

/// `C' e^{(vt - l)/κ}` with `κ` set by the observable class.
pub fn observable_bound<T: Real>(params: &EnvelopeParams<T>, class: ObservableClass, magnitude: T, l: usize, t: T) -> T {
    let exponent = (params.v * t - T::from_count(l as u128)) / T::from_count(class.kappa() as u128);
    magnitude * exponent.exp()
}

/// Outcome of [`elementwise_expm_certificate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate<T> {
    /// `max_{i,j} [e^{τMt}]_{ij} / (C e^{v₀t - d(i,j)})`.
    pub max_ratio: T,
    /// Entry attaining the maximum.
    pub at: (usize, usize),
    /// Entries whose value underflowed and could not be compared.
    pub underflowed: usize,
}

impl<T: Real> Certificate<T> {
    pub fn holds(&self) -> bool {
        self.max_ratio <= T::one()
    }
}

/// Checks `[e^{τMt}]_{ij} ≤ C e^{v₀t - d(i,j)}` entry by entry, computing
/// the exponential column by column.
pub fn elementwise_expm_certificate<T: Real>(lattice: &Lattice, tau: T, t: T) -> Result<Certificate<T>> {
    let n = lattice.num_sites();
    if n > CERTIFICATE_MAX_SITES {
        return Err(Error::ResourceLimit(format!(
            "certificate limited to {CERTIFICATE_MAX_SITES} sites, lattice has {n}"
        )));
    }
    if !(t >= T::zero()) || !tau.is_finite() {
        return Err(Error::InvalidArgument("certificate needs t ≥ 0 and finite τ".into()));
    }
    let chi = solve_chi::<T>();
    let c = T::lit(2.0) * chi * chi / (chi - T::one());
    let v0 = chi * lattice.delta::<T>() * tau.abs();
    let columns: Vec<Result<(T, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![T::zero(); n];
            col[j] = T::one();
            nonnegative_expmv(lattice, tau.abs() * t, &mut col, T::epsilon())?;
            let mut best = (T::neg_infinity(), j);
            let mut underflowed = 0;
            for (i, &e) in col.iter().enumerate() {
                if e == T::zero() {
                    underflowed += 1;
                    continue;
                }
                // ratio = e / (C e^{v₀t - d}) evaluated in logarithms.
                let d = T::from_count(lattice.distance(i, j) as u128);
                let log_ratio = e.ln() - c.ln() - v0 * t + d;
                if log_ratio > best.0 {
                    best = (log_ratio, i);
                }
            }
            Ok((best.0, best.1, underflowed))
        })
        .collect();
    let mut cert = Certificate {
        max_ratio: T::zero(),
        at: (0, 0),
        underflowed: 0,
    };
    let mut best_log = T::neg_infinity();
    for (j, col) in columns.into_iter().enumerate() {
        let (log_ratio, i, under) = col?;
        cert.underflowed += under;
        if log_ratio > best_log {
            best_log = log_ratio;
            cert.at = (i, j);
        }
    }
    cert.max_ratio = best_log.exp();
    Ok(cert)
}
