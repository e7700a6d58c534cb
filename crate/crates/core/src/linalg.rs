//! Small dense kernels and matrix-exponential actions.
//!
//! * [`tridiagonal_eigen`]: implicit QL on a symmetric tridiagonal matrix.
//! * [`hermitian_eigenvalues`]: Householder reduction followed by QL.
//! * [`LanczosPropagator`]: `ψ ← exp(-i H dt) ψ` for Hermitian `H` with a
//!   Krylov subspace and step halving driven by the a-posteriori error
//!   estimate `β · h_{m+1,m} · |e_mᵀ exp(-i dt T_m) e_1|`.
//! * [`taylor_expmv`]: `v ← exp(t A) v` for a general operator with a norm
//!   bound, by sub-stepped truncated Taylor series.

use std::ops::{Add, Mul};

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues and eigenvectors of the symmetric tridiagonal matrix with
/// diagonal `diag` and sub-diagonal `offdiag` (`len = n - 1`).
///
/// Returns `(values, vectors)` where `vectors[i * n + k]` is component `i` of
/// eigenvector `k`. Eigenvalues are not sorted.
pub fn tridiagonal_eigen<T: Real>(diag: &[T], offdiag: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let n = diag.len();
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    let d = ql_implicit(diag, offdiag, Some(&mut z))?;
    Ok((d, z))
}

fn ql_implicit<T: Real>(diag: &[T], offdiag: &[T], mut z: Option<&mut [T]>) -> Result<Vec<T>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    assert_eq!(offdiag.len() + 1, n, "sub-diagonal must have n - 1 entries");
    let two = T::lit(2.0);
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(T::zero());

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd || e[m].abs() <= T::min_positive_value() {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 64 {
                return Err(Error::Convergence {
                    time: f64::NAN,
                    residual: e[l].as_f64(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(d)
}

/// Eigenvalues of a dense Hermitian matrix (row-major, `n × n`), ascending.
///
/// The matrix is embedded as the real symmetric `[[X, -Y], [Y, X]]`, whose
/// spectrum is that of `X + iY` with every eigenvalue doubled.
pub fn hermitian_eigenvalues<T: Real>(a: &[Complex<T>], n: usize) -> Result<Vec<T>> {
    let m = 2 * n;
    let mut r = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            // Symmetrize to wash out roundoff asymmetry.
            let x = (a[i * n + j].re + a[j * n + i].re) / T::lit(2.0);
            let y = (a[i * n + j].im - a[j * n + i].im) / T::lit(2.0);
            r[i * m + j] = x;
            r[(i + n) * m + (j + n)] = x;
            r[i * m + (j + n)] = -y;
            r[(i + n) * m + j] = y;
        }
    }
    let (diag, off) = householder_tridiagonal(&mut r, m);
    let mut values = ql_implicit(&diag, &off, None)?;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(values.into_iter().step_by(2).collect())
}

/// Reduces a dense symmetric matrix to tridiagonal form in place and returns
/// its diagonal and sub-diagonal.
fn householder_tridiagonal<T: Real>(a: &mut [T], n: usize) -> (Vec<T>, Vec<T>) {
    let two = T::lit(2.0);
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a[i * n + k] * a[i * n + k]).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let alpha = if x0 > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k + 1..n).map(|i| a[i * n + k]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for x in &mut v {
            *x /= vnorm;
        }
        let sub = n - k - 1;
        let w: Vec<T> = (0..sub)
            .map(|i| (0..sub).map(|j| a[(k + 1 + i) * n + k + 1 + j] * v[j]).sum())
            .collect();
        let vw: T = v.iter().zip(&w).map(|(&x, &y)| x * y).sum();
        let q: Vec<T> = w.iter().zip(&v).map(|(&wi, &vi)| wi - vw * vi).collect();
        for i in 0..sub {
            for j in 0..sub {
                a[(k + 1 + i) * n + k + 1 + j] -= two * (v[i] * q[j] + q[i] * v[j]);
            }
        }
        for i in k + 1..n {
            a[i * n + k] = T::zero();
            a[k * n + i] = T::zero();
        }
        a[(k + 1) * n + k] = alpha;
        a[k * n + k + 1] = alpha;
    }
    let diag = (0..n).map(|i| a[i * n + i]).collect();
    let off = (0..n.saturating_sub(1)).map(|i| a[(i + 1) * n + i]).collect();
    (diag, off)
}

/// Settings and bookkeeping for Krylov propagation.
#[derive(Debug, Clone, Copy)]
pub struct LanczosPropagator<T> {
    /// Maximal Krylov dimension per sub-step.
    pub max_dim: usize,
    /// Accepted local error estimate per sub-step, relative to `‖ψ‖`.
    pub tolerance: T,
    /// Maximal number of step halvings before giving up.
    pub max_halvings: u32,
}

impl<T: Real> Default for LanczosPropagator<T> {
    fn default() -> Self {
        Self {
            max_dim: 30,
            tolerance: T::lit(1e-12).max(T::epsilon() * T::lit(100.0)),
            max_halvings: 40,
        }
    }
}

/// Work counters from one propagation call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PropagationStats {
    pub substeps: usize,
    pub matvecs: usize,
    /// Largest accepted local error estimate.
    pub max_error: f64,
}

#[inline]
fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::zero(), |acc, (x, y)| acc + x.conj() * y)
}

#[inline]
fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt()
}

impl<T: Real> LanczosPropagator<T> {
    /// Replaces `psi` by `exp(-i H dt) psi`, where `apply(x, y)` writes
    /// `y = H x` for a Hermitian `H`. `t_now` only labels errors.
    pub fn propagate<F>(&self, mut apply: F, psi: &mut [Complex<T>], dt: T, t_now: T) -> Result<PropagationStats>
    where
        F: FnMut(&[Complex<T>], &mut [Complex<T>]),
    {
        let n = psi.len();
        let mut stats = PropagationStats::default();
        if n == 0 || dt == T::zero() {
            return Ok(stats);
        }
        let m_max = self.max_dim.min(n).max(1);
        let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(m_max);
        let mut w = vec![Complex::zero(); n];
        let mut remaining = dt;
        let mut elapsed = T::zero();

        while remaining.abs() > T::zero() {
            let beta = norm(psi);
            if beta == T::zero() {
                return Ok(stats);
            }
            basis.clear();
            basis.push(psi.iter().map(|&x| x / beta).collect());
            let mut alphas = Vec::with_capacity(m_max);
            let mut betas: Vec<T> = Vec::with_capacity(m_max);
            let mut breakdown = false;
            let mut tail = T::zero();
            for j in 0..m_max {
                apply(&basis[j], &mut w);
                stats.matvecs += 1;
                let alpha = dot(&basis[j], &w).re;
                alphas.push(alpha);
                // Full reorthogonalization (classical Gram-Schmidt, twice).
                for _ in 0..2 {
                    for v in &basis {
                        let h = dot(v, &w);
                        for (wi, vi) in w.iter_mut().zip(v) {
                            *wi -= *vi * h;
                        }
                    }
                }
                let b = norm(&w);
                let scale = alphas.iter().fold(T::zero(), |acc, a| acc.max(a.abs()))
                    + betas.iter().fold(T::zero(), |acc, x| acc.max(*x));
                if b <= T::lit(1e-13) * scale.max(T::one()) {
                    breakdown = true;
                    break;
                }
                if j + 1 == m_max {
                    tail = b;
                    break;
                }
                betas.push(b);
                basis.push(w.iter().map(|&x| x / b).collect());
            }
            if basis.len() == n && !breakdown {
                // The subspace is the whole space: the projection is exact.
                breakdown = true;
            }

            let m = alphas.len();
            let (values, vectors) = tridiagonal_eigen(&alphas, &betas)?;
            let coefficients = |h: T| -> Vec<Complex<T>> {
                let phases: Vec<Complex<T>> = (0..m)
                    .map(|l| Complex::from_polar(T::one(), -values[l] * h) * vectors[l])
                    .collect();
                (0..m)
                    .map(|k| (0..m).fold(Complex::zero(), |acc, l| acc + phases[l] * vectors[k * m + l]))
                    .collect()
            };

            let mut h = remaining;
            let mut halvings = 0;
            let (c, err) = loop {
                let c = coefficients(h);
                let err = if breakdown {
                    T::zero()
                } else {
                    beta * tail * c[m - 1].norm()
                };
                if err <= self.tolerance * beta {
                    break (c, err);
                }
                halvings += 1;
                if halvings > self.max_halvings {
                    return Err(Error::Convergence {
                        time: (t_now + elapsed).as_f64(),
                        residual: (err / beta).as_f64(),
                    });
                }
                h /= T::lit(2.0);
            };

            for x in psi.iter_mut() {
                *x = Complex::zero();
            }
            for (k, v) in basis.iter().take(m).enumerate() {
                let ck = c[k] * beta;
                for (x, vi) in psi.iter_mut().zip(v) {
                    *x += *vi * ck;
                }
            }
            stats.substeps += 1;
            stats.max_error = stats.max_error.max((err / beta).as_f64());
            remaining -= h;
            elapsed += h;
            if (remaining / dt).abs() < T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        Ok(stats)
    }
}

/// Vector entry usable in [`taylor_expmv`]: real or complex.
pub trait TaylorEntry<T: Real>: Copy + Zero + Add<Output = Self> + Mul<T, Output = Self> {
    fn magnitude(self) -> T;
}

impl<T: Real> TaylorEntry<T> for T {
    #[inline]
    fn magnitude(self) -> T {
        self.abs()
    }
}

impl<T: Real> TaylorEntry<T> for Complex<T> {
    #[inline]
    fn magnitude(self) -> T {
        self.re.abs() + self.im.abs()
    }
}

/// Replaces `v` by `exp(t A) v`, where `apply(x, y)` writes `y = A x` and
/// `norm_bound ≥ ‖A‖` in a norm compatible with the entry magnitudes.
///
/// The interval is split into sub-steps with `|h| · norm_bound ≤ 1/2`; each
/// sub-step sums the Taylor series until a term drops below
/// `tolerance · ‖partial sum‖₁`. For entrywise nonnegative `A`, `v` and `t`
/// every term is nonnegative and the result is accurate entrywise.
pub fn taylor_expmv<T, E, F>(mut apply: F, norm_bound: T, v: &mut [E], t: T, tolerance: T) -> Result<usize>
where
    T: Real,
    E: TaylorEntry<T>,
    F: FnMut(&[E], &mut [E]),
{
    const MAX_TERMS: usize = 200;
    let n = v.len();
    if n == 0 || t == T::zero() {
        return Ok(0);
    }
    let reach = (t.abs() * norm_bound / T::lit(0.5)).ceil();
    let steps = reach.to_usize().unwrap_or(usize::MAX).max(1);
    if steps > 10_000_000 {
        return Err(Error::ResourceLimit(format!(
            "exponential action needs {steps} sub-steps"
        )));
    }
    let h = t / T::from_count(steps as u128);
    let mut term = vec![E::zero(); n];
    let mut next = vec![E::zero(); n];
    let mut applications = 0;
    for _ in 0..steps {
        term.copy_from_slice(v);
        let mut converged = false;
        for k in 1..=MAX_TERMS {
            apply(&term, &mut next);
            applications += 1;
            let factor = h / T::from_count(k as u128);
            let mut term_norm = T::zero();
            let mut sum_norm = T::zero();
            for ((ti, &ni), vi) in term.iter_mut().zip(&next).zip(v.iter_mut()) {
                *ti = ni * factor;
                *vi = *vi + *ti;
                term_norm += ti.magnitude();
                sum_norm += vi.magnitude();
            }
            if term_norm <= tolerance * sum_norm || term_norm == T::zero() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                time: t.as_f64(),
                residual: f64::NAN,
            });
        }
    }
    Ok(applications)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dense_tridiagonal(d: &[f64], e: &[f64]) -> Vec<f64> {
        let n = d.len();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = d[i];
            if i + 1 < n {
                a[i * n + i + 1] = e[i];
                a[(i + 1) * n + i] = e[i];
            }
        }
        a
    }

    #[test]
    fn tridiagonal_eigenpairs_satisfy_definition() {
        let d = [2.0, -1.0, 0.5, 3.0, 0.0];
        let e = [1.0, 0.3, -2.0, 0.7];
        let (vals, vecs) = tridiagonal_eigen(&d, &e).unwrap();
        let a = dense_tridiagonal(&d, &e);
        let n = d.len();
        for k in 0..n {
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i * n + j] * vecs[j * n + k]).sum();
                assert_relative_eq!(av, vals[k] * vecs[i * n + k], epsilon = 1e-12);
            }
            let nrm: f64 = (0..n).map(|i| vecs[i * n + k].powi(2)).sum();
            assert_relative_eq!(nrm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_chain_spectrum() {
        // Path graph on n vertices: eigenvalues 2 cos(kπ/(n+1)).
        let n = 9;
        let (mut vals, _) = tridiagonal_eigen(&vec![0.0; n], &vec![1.0; n - 1]).unwrap();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expect: Vec<f64> = (1..=n)
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos())
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in vals.iter().zip(&expect) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermitian_spectrum_of_pauli_y_like() {
        // [[1, -i], [i, 1]] has eigenvalues 0 and 2.
        let a = [
            Complex::new(1.0, 0.0),
            Complex::new(0.0, -1.0),
            Complex::new(0.0, 1.0),
            Complex::new(1.0, 0.0),
        ];
        let vals = hermitian_eigenvalues(&a, 2).unwrap();
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lanczos_two_level_rotation() {
        // H = -[[0,1],[1,0]]: |ψ(t)⟩ = cos t |0⟩ + i sin t |1⟩.
        let prop = LanczosPropagator::<f64>::default();
        let mut psi = vec![Complex::new(1.0, 0.0), Complex::zero()];
        let apply = |x: &[Complex<f64>], y: &mut [Complex<f64>]| {
            y[0] = -x[1];
            y[1] = -x[0];
        };
        prop.propagate(apply, &mut psi, 0.7, 0.0).unwrap();
        assert_relative_eq!(psi[0].re, 0.7f64.cos(), epsilon = 1e-13);
        assert_relative_eq!(psi[1].im, 0.7f64.sin(), epsilon = 1e-13);
    }

    #[test]
    fn lanczos_halves_long_steps() {
        // Long step on a 200-site ring forces sub-stepping.
        let n = 200;
        let apply = |x: &[Complex<f64>], y: &mut [Complex<f64>]| {
            for i in 0..n {
                y[i] = -(x[(i + 1) % n] + x[(i + n - 1) % n]);
            }
        };
        let prop = LanczosPropagator {
            max_dim: 12,
            ..LanczosPropagator::<f64>::default()
        };
        let mut psi = vec![Complex::zero(); n];
        psi[0] = Complex::new(1.0, 0.0);
        let stats = prop.propagate(apply, &mut psi, 20.0, 0.0).unwrap();
        assert!(stats.substeps > 1);
        let nrm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        assert_relative_eq!(nrm, 1.0, epsilon = 1e-11);
        // Free-particle return amplitude on a large ring: J_0(2t) with t = 20.
        let j0_40 = 0.007_366_890_584_236_951_f64;
        assert_relative_eq!(psi[0].norm(), j0_40.abs(), epsilon = 1e-9);
    }

    #[test]
    fn taylor_scalar_exponential() {
        let mut v = vec![1.0f64];
        taylor_expmv(|x: &[f64], y: &mut [f64]| y[0] = 3.0 * x[0], 3.0, &mut v, 2.0, 1e-16).unwrap();
        assert_relative_eq!(v[0], 6.0f64.exp(), max_relative = 1e-13);
    }

    #[test]
    fn taylor_complex_rotation() {
        let mut v = vec![Complex::new(1.0f64, 0.0)];
        let apply = |x: &[Complex<f64>], y: &mut [Complex<f64>]| y[0] = x[0] * Complex::new(0.0, -1.0);
        taylor_expmv(apply, 1.0, &mut v, 5.0, 1e-16).unwrap();
        assert_relative_eq!(v[0].re, 5.0f64.cos(), epsilon = 1e-13);
        assert_relative_eq!(v[0].im, -5.0f64.sin(), epsilon = 1e-13);
    }
}
