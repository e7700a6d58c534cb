//! Unitary and dissipative time evolution with on-the-fly observables.
//!
//! Pure states are propagated with a Lanczos exponential action; density
//! matrices under on-site particle loss,
//!
//! ```text
//! dρ/dt = -i[H, ρ] - λ Σ_m ({b†_m b_m, ρ} - 2 b_m ρ b†_m),
//! ```
//!
//! with a Taylor exponential action of the superoperator applied directly to
//! the dense `ρ`. The equation is integrated as written, so a single mode
//! decays as `⟨n⟩(t) = e^{-2λt} ⟨n⟩(0)`.

mod observables;
mod state;
mod trace;

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

pub use observables::{
    cauchy_schwarz_bound, density, expectation, local_observable, moment, two_site_correlator, LadderPolynomial,
    LadderTerm, ObservableClass,
};
pub use state::{DensityMatrix, InitialState, PureState, QuantumState};
pub use trace::{
    EvolutionStats, MomentSeries, ObservableKind, ObservableRequest, ObservableSeries, SimulationTrace,
};
pub(crate) use state::{norm_tolerance, trace_tolerance};
pub(crate) use trace::fmt_float;

use crate::error::{Error, Result};
use crate::fock::{apply_hop_in_place, apply_ladder, FockSpace, Mode};
use crate::hamiltonian::{HamiltonianParts, ModelSpec, SparseOperator};
use crate::linalg::{taylor_expmv, LanczosPropagator};
use crate::scalar::Real;

/// Integrator settings and the extra quantities to record.
#[derive(Debug, Clone)]
pub struct EvolveOptions<T> {
    pub propagator: LanczosPropagator<T>,
    /// Relative truncation threshold of the Taylor series used for `ρ`.
    pub taylor_tolerance: T,
    /// Orders `p ≥ 1` of `⟨n_j^p⟩` to record.
    pub moments: Vec<u32>,
    pub observables: Vec<ObservableRequest<T>>,
    /// Track `min eig ρ(t)` for density matrices up to this dimension.
    pub positivity_check_max_dim: usize,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            propagator: LanczosPropagator::default(),
            taylor_tolerance: T::epsilon(),
            moments: Vec::new(),
            observables: Vec::new(),
            positivity_check_max_dim: 128,
        }
    }
}

/// Checks a time grid: nonempty, finite, nonnegative, strictly increasing.
pub fn validate_times<T: Real>(times: &[T]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidGrid("time grid is empty".into()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < T::zero()) {
        return Err(Error::InvalidGrid("times must be finite and ≥ 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("times must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` equally spaced points on `[0, t_max]`.
pub fn uniform_grid<T: Real>(t_max: T, points: usize) -> Vec<T> {
    if points <= 1 {
        return vec![T::zero()];
    }
    let last = T::from_count((points - 1) as u128);
    (0..points).map(|i| t_max * T::from_count(i as u128) / last).collect()
}

/// Constant-τ pieces covering `[a, b]`.
fn pieces<T: Real>(model: &ModelSpec<T>, a: T, b: T) -> Vec<(T, T, T)> {
    let mut cuts = vec![a];
    cuts.extend(model.tau.breakpoints().into_iter().filter(|&s| s > a && s < b));
    cuts.push(b);
    cuts.windows(2).map(|w| (w[0], w[1], model.tau.at(w[0]))).collect()
}

/// `(x, y, w)`: basis state `y = b†_a b_b x` with amplitude `w`.
type Transitions<T> = Vec<(usize, usize, T)>;

/// `⟨b†_a b_b⟩` transition lists for every species and bond `(a, b)`.
struct HopTable<T> {
    bonds: Vec<(usize, usize, Transitions<T>)>,
}

impl<T: Real> HopTable<T> {
    fn new(model: &ModelSpec<T>, space: &FockSpace) -> Self {
        let l = space.num_sites();
        let mut scratch = vec![0; space.width()];
        let mut bonds = Vec::new();
        for s in 0..space.num_species() {
            for &(a, b) in model.lattice.edges() {
                let mut list = Vec::new();
                for x in 0..space.dim() {
                    scratch.copy_from_slice(space.occupations(x));
                    if let Some(w) = apply_hop_in_place(space.species(), l, &mut scratch, s, b, a) {
                        let y = space.locate(&scratch).expect("hopping conserves particle number");
                        list.push((x, y, w.amplitude::<T>()));
                    }
                }
                bonds.push((a, b, list));
            }
        }
        Self { bonds }
    }

    /// `2τ Σ_k Im⟨b†_k b_j⟩` per site.
    fn rate(&self, state: &QuantumState<T>, tau: T, num_sites: usize) -> Vec<T> {
        let mut rate = vec![T::zero(); num_sites];
        for (a, b, list) in &self.bonds {
            let e: Complex<T> = match state {
                QuantumState::Pure(p) => {
                    let psi = p.amplitudes();
                    list.iter().map(|&(x, y, w)| psi[y].conj() * psi[x] * w).sum()
                }
                QuantumState::Density(d) => {
                    let n = d.dim();
                    let r = d.entries();
                    list.iter().map(|&(x, y, w)| r[x * n + y] * w).sum()
                }
            };
            let flow = T::lit(2.0) * tau * e.im;
            rate[*b] += flow;
            rate[*a] -= flow;
        }
        rate
    }
}

struct Recorder<'a, T> {
    model: &'a ModelSpec<T>,
    hops: HopTable<T>,
    track_positivity: bool,
    trace: SimulationTrace<T>,
}

impl<'a, T: Real> Recorder<'a, T> {
    fn new(model: &'a ModelSpec<T>, space: &FockSpace, opts: &EvolveOptions<T>, density: bool, lambda: T) -> Result<Self> {
        if let Some(&p) = opts.moments.iter().find(|&&p| p == 0) {
            return Err(Error::InvalidArgument(format!("moment order {p} must be ≥ 1")));
        }
        for req in &opts.observables {
            match &req.kind {
                ObservableKind::Local { site, operator } => {
                    operator.check(space)?;
                    if operator.sites().iter().any(|s| s != site) {
                        return Err(Error::InvalidArgument(format!(
                            "observable '{}' acts outside site {site}",
                            req.name
                        )));
                    }
                }
                ObservableKind::TwoSite { sites, first, second } => {
                    first.check(space)?;
                    second.check(space)?;
                    if sites.0 == sites.1 {
                        return Err(Error::InvalidArgument(format!(
                            "observable '{}' needs two distinct sites",
                            req.name
                        )));
                    }
                }
            }
        }
        let track_positivity = density && space.dim() <= opts.positivity_check_max_dim;
        Ok(Self {
            model,
            hops: HopTable::new(model, space),
            track_positivity,
            trace: SimulationTrace {
                num_sites: space.num_sites(),
                times: Vec::new(),
                alpha: Vec::new(),
                moments: opts
                    .moments
                    .iter()
                    .map(|&order| MomentSeries {
                        order,
                        values: Vec::new(),
                        total: Vec::new(),
                    })
                    .collect(),
                norms: Vec::new(),
                total_particles: Vec::new(),
                energy: Vec::new(),
                rate: Vec::new(),
                observables: opts
                    .observables
                    .iter()
                    .map(|r| ObservableSeries {
                        request: r.clone(),
                        values: Vec::new(),
                        cauchy_schwarz: matches!(r.kind, ObservableKind::TwoSite { .. }).then(Vec::new),
                    })
                    .collect(),
                min_eigenvalues: track_positivity.then(Vec::new),
                loss_rate: lambda,
                stats: EvolutionStats::default(),
            },
        })
    }

    fn record(&mut self, state: &QuantumState<T>, t: T, h: &SparseOperator<T>) -> Result<()> {
        let space = state.space();
        let l = space.num_sites();
        let probs = state.probabilities();
        let tr = &mut self.trace;
        tr.times.push(t);

        let mut alpha = vec![T::zero(); l];
        let mut total = T::zero();
        for (x, &p) in probs.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            for (j, a) in alpha.iter_mut().enumerate() {
                *a += p * T::from_count(space.site_occupation(x, j) as u128);
            }
            total += p * T::from_count(space.total_particles(x) as u128);
        }
        for m in &mut tr.moments {
            let mut row = vec![T::zero(); l];
            let mut big = T::zero();
            for (x, &p) in probs.iter().enumerate() {
                if p == T::zero() {
                    continue;
                }
                for (j, r) in row.iter_mut().enumerate() {
                    *r += p * T::from_count((space.site_occupation(x, j) as u128).pow(m.order));
                }
                big += p * T::from_count((space.total_particles(x) as u128).pow(m.order));
            }
            m.values.push(row);
            m.total.push(big);
        }

        let tau = self.model.tau.at(t);
        let mut rate = self.hops.rate(state, tau, l);
        if tr.loss_rate > T::zero() {
            for (r, a) in rate.iter_mut().zip(&alpha) {
                *r -= T::lit(2.0) * tr.loss_rate * *a;
            }
        }
        tr.rate.push(rate);
        tr.alpha.push(alpha);
        tr.total_particles.push(total);
        tr.norms.push(state.weight());
        tr.energy.push(energy(state, h));

        for series in &mut tr.observables {
            match &series.request.kind {
                ObservableKind::Local { operator, .. } => series.values.push(expectation(state, operator)?),
                ObservableKind::TwoSite { first, second, .. } => {
                    series.values.push(expectation(state, &first.product(second))?);
                    if let Some(cs) = &mut series.cauchy_schwarz {
                        cs.push(cauchy_schwarz_bound(state, first, second)?);
                    }
                }
            }
        }
        if self.track_positivity {
            if let QuantumState::Density(rho) = state {
                let min = rho.min_eigenvalue()?;
                tr.min_eigenvalues.get_or_insert_with(Vec::new).push(min);
            }
        }
        Ok(())
    }
}

/// `⟨H⟩` for a real symmetric `H`.
fn energy<T: Real>(state: &QuantumState<T>, h: &SparseOperator<T>) -> T {
    match state {
        QuantumState::Pure(p) => {
            let psi = p.amplitudes();
            (0..psi.len())
                .map(|x| h.row(x).map(|(y, v)| (psi[x].conj() * psi[y] * v).re).sum::<T>())
                .sum()
        }
        QuantumState::Density(d) => {
            let n = d.dim();
            let r = d.entries();
            (0..n).map(|x| h.row(x).map(|(y, v)| r[y * n + x].re * v).sum::<T>()).sum()
        }
    }
}

fn check_model_space<T: Real>(model: &ModelSpec<T>, space: &FockSpace) -> Result<HamiltonianParts<T>> {
    HamiltonianParts::build(model, space)
}

/// Propagates `psi0` (the state at `times[0]`) under `H(t)` of `model`,
/// recording observables at every grid time.
pub fn evolve_unitary<T: Real>(
    model: &ModelSpec<T>,
    psi0: &PureState<T>,
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<SimulationTrace<T>> {
    validate_times(times)?;
    let norm = psi0.norm();
    if (norm - T::one()).abs() > norm_tolerance() {
        return Err(Error::InvalidState(format!("initial state norm is {norm}, expected 1")));
    }
    let space = psi0.space().clone();
    let parts = check_model_space(model, &space)?;
    let mut rec = Recorder::new(model, &space, opts, false, T::zero())?;
    let mut state = QuantumState::Pure(psi0.clone());
    rec.record(&state, times[0], &parts.at_tau(model.tau.at(times[0])))?;

    let mut stats = EvolutionStats::default();
    for w in times.windows(2) {
        for (a, b, tau) in pieces(model, w[0], w[1]) {
            let QuantumState::Pure(psi) = &mut state else { unreachable!() };
            let s = opts
                .propagator
                .propagate(|x, y| parts.apply(tau, x, y), psi.amplitudes_mut(), b - a, a)?;
            stats.substeps += s.substeps;
            stats.matvecs += s.matvecs;
            stats.max_error = stats.max_error.max(s.max_error);
        }
        rec.record(&state, w[1], &parts.at_tau(model.tau.at(w[1])))?;
    }
    rec.trace.stats = stats;
    Ok(rec.trace)
}

/// Generator of the loss master equation on a dense, row-major `ρ`.
struct Lindbladian<T> {
    n: usize,
    lambda: T,
    /// Total particle number per basis state.
    particles: Vec<T>,
    /// Per mode: `(x, y, w)` with `b_m |x⟩ = w |y⟩`.
    jumps: Vec<Vec<(usize, usize, T)>>,
}

impl<T: Real> Lindbladian<T> {
    fn new(space: &FockSpace, lambda: T) -> Result<Self> {
        let n = space.dim();
        let l = space.num_sites();
        let mut jumps = Vec::new();
        if lambda > T::zero() {
            let mut scratch = vec![0; space.width()];
            for s in 0..space.num_species() {
                for j in 0..l {
                    let mut list = Vec::new();
                    for x in 0..n {
                        scratch.copy_from_slice(space.occupations(x));
                        if let Some(w) = apply_ladder(space.species(), l, &mut scratch, Mode::new(j, s), 0, 1) {
                            let y = space.locate(&scratch).ok_or_else(|| {
                                Error::IncompatibleBasis("basis lacks the sectors reached by particle loss".into())
                            })?;
                            list.push((x, y, w.amplitude::<T>()));
                        }
                    }
                    jumps.push(list);
                }
            }
        }
        Ok(Self {
            n,
            lambda,
            particles: (0..n).map(|x| T::from_count(space.total_particles(x) as u128)).collect(),
            jumps,
        })
    }

    fn norm_bound(&self, h: &SparseOperator<T>) -> T {
        let max_n = self.particles.iter().fold(T::zero(), |m, &p| m.max(p));
        T::lit(2.0) * h.norm_inf() + T::lit(4.0) * self.lambda * max_n
    }

    /// `out = L(ρ)`.
    fn apply(&self, h: &SparseOperator<T>, rho: &[Complex<T>], out: &mut [Complex<T>]) {
        let n = self.n;
        let two = T::lit(2.0);
        out.par_chunks_mut(n).enumerate().for_each(|(x, row)| {
            for (y, o) in row.iter_mut().enumerate() {
                // (Hρ - ρH)_{xy}
                let mut c: Complex<T> = Complex::zero();
                for (k, v) in h.row(x) {
                    c += rho[k * n + y] * v;
                }
                for (k, v) in h.row(y) {
                    c -= rho[x * n + k] * v;
                }
                let r = rho[x * n + y];
                // -i c - λ (N_x + N_y) ρ_xy
                *o = Complex::new(c.im, -c.re) - r * (self.lambda * (self.particles[x] + self.particles[y]));
            }
        });
        for list in &self.jumps {
            for &(x, xp, wx) in list {
                for &(y, yp, wy) in list {
                    out[xp * n + yp] += rho[x * n + y] * (two * self.lambda * wx * wy);
                }
            }
        }
    }
}

/// Integrates the loss master equation from `rho0` (the state at
/// `times[0]`) with rate `lambda ≥ 0`.
pub fn evolve_lindblad<T: Real>(
    model: &ModelSpec<T>,
    rho0: &DensityMatrix<T>,
    lambda: T,
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<SimulationTrace<T>> {
    validate_times(times)?;
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("loss rate must be finite and ≥ 0, got {lambda}")));
    }
    let tr = rho0.trace();
    if (tr - T::one()).abs() > trace_tolerance() {
        return Err(Error::InvalidState(format!("initial trace is {tr}, expected 1")));
    }
    let space: Arc<FockSpace> = rho0.space().clone();
    if lambda > T::zero() && !space.closed_under_loss() {
        return Err(Error::IncompatibleBasis(
            "particle loss needs every sector below the initial particle numbers".into(),
        ));
    }
    let parts = check_model_space(model, &space)?;
    let generator = Lindbladian::new(&space, lambda)?;
    let mut rec = Recorder::new(model, &space, opts, true, lambda)?;
    let mut state = QuantumState::Density(rho0.clone());
    rec.record(&state, times[0], &parts.at_tau(model.tau.at(times[0])))?;

    let mut stats = EvolutionStats::default();
    for w in times.windows(2) {
        for (a, b, tau) in pieces(model, w[0], w[1]) {
            let h = parts.at_tau(tau);
            let bound = generator.norm_bound(&h);
            let QuantumState::Density(rho) = &mut state else { unreachable!() };
            let applications = taylor_expmv(
                |x, y| generator.apply(&h, x, y),
                bound,
                rho.entries_mut(),
                b - a,
                opts.taylor_tolerance,
            )?;
            stats.substeps += 1;
            stats.matvecs += applications;
        }
        rec.record(&state, w[1], &parts.at_tau(model.tau.at(w[1])))?;
    }
    rec.trace.stats = stats;
    Ok(rec.trace)
}

/// Dispatches on the state kind: unitary for pure states, the loss master
/// equation with `model.loss_rate` for density matrices.
pub fn evolve<T: Real>(
    model: &ModelSpec<T>,
    state: &QuantumState<T>,
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<SimulationTrace<T>> {
    match state {
        QuantumState::Pure(psi) => evolve_unitary(model, psi, times, opts),
        QuantumState::Density(rho) => evolve_lindblad(model, rho, model.loss_rate, times, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::SpeciesSpec;
    use crate::graph::Lattice;

    fn chain_model(l: usize, tau: f64, u: f64) -> ModelSpec<f64> {
        ModelSpec::bose_hubbard(Arc::new(Lattice::chain(l, false).unwrap()), tau, u, 0.0)
    }

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn state_on(l: usize, comps: &[(Vec<u16>, f64)]) -> QuantumState<f64> {
        let init = InitialState::Superposition {
            region: (0..l).collect(),
            components: comps.iter().map(|(o, a)| (o.clone(), c(*a))).collect(),
        };
        let space = init.sector_space(l, &[SpeciesSpec::boson()]).unwrap();
        QuantumState::Pure(init.pure(space).unwrap())
    }

    #[test]
    fn rabi_oscillation() {
        let model = chain_model(2, 1.0, 0.0);
        let init = InitialState::single_species(2, &[(0, 1)]);
        let space = init.sector_space(2, &model.species).unwrap();
        let psi = init.pure(space).unwrap();
        let times = uniform_grid(4.0, 81);
        let trace = evolve_unitary(&model, &psi, &times, &EvolveOptions::default()).unwrap();
        for (t, a) in times.iter().zip(&trace.alpha) {
            assert!((a[1] - t.sin().powi(2)).abs() < 1e-10, "t = {t}");
            assert!((a[0] + a[1] - 1.0).abs() < 1e-12);
        }
        assert_eq!(trace.alpha[0], vec![1.0, 0.0]);
    }

    #[test]
    fn rate_matches_derivative() {
        let model = chain_model(2, 1.0, 0.0);
        let init = InitialState::single_species(2, &[(0, 1)]);
        let psi = init.pure(init.sector_space(2, &model.species).unwrap()).unwrap();
        let times = uniform_grid(1.0, 5);
        let trace = evolve_unitary(&model, &psi, &times, &EvolveOptions::default()).unwrap();
        for (t, r) in times.iter().zip(&trace.rate) {
            assert!((r[1] - (2.0 * t).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn densities_and_moments() {
        let s = state_on(2, &[(vec![2, 0], 1.0)]);
        assert_eq!(density(&s, 0).unwrap(), 2.0);
        assert_eq!(moment(&s, 0, 2).unwrap(), 4.0);

        let s = state_on(2, &[(vec![1, 0], 1.0), (vec![0, 1], 1.0)]);
        assert!((density(&s, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!((density(&s, 1).unwrap() - 0.5).abs() < 1e-15);

        let s = state_on(2, &[(vec![2, 0], 1.0), (vec![0, 2], 1.0)]);
        assert!((moment(&s, 0, 2).unwrap() - 2.0).abs() < 1e-14);
        assert!((moment(&s, 0, 1).unwrap() - 1.0).abs() < 1e-14);
        assert!(moment(&s, 2, 1).is_err());
        assert!(moment(&s, 0, 0).is_err());
    }

    #[test]
    fn local_observables() {
        let s = state_on(2, &[(vec![2, 0], 1.0)]);
        let n = local_observable(&s, Mode::site(0), &[(1, 1, c(1.0))]).unwrap();
        assert_eq!(n, c(2.0));
        let x = local_observable(&s, Mode::site(0), &[(1, 0, c(1.0)), (0, 1, c(1.0))]).unwrap();
        assert_eq!(x, c(0.0));
        let ff = local_observable(&s, Mode::site(0), &[(2, 2, c(1.0))]).unwrap();
        assert!((ff - c(2.0)).norm() < 1e-14);
    }

    #[test]
    fn correlators() {
        let n0 = LadderPolynomial::number(Mode::site(0));
        let n1 = LadderPolynomial::number(Mode::site(1));
        let s = state_on(2, &[(vec![1, 1], 1.0)]);
        assert_eq!(two_site_correlator(&s, 0, 1, &n0, &n1).unwrap(), c(1.0));

        let s = state_on(2, &[(vec![1, 0], 1.0), (vec![0, 1], 1.0)]);
        let create0 = LadderPolynomial::local(Mode::site(0), &[(1, 0, c(1.0))]);
        let annih1 = LadderPolynomial::local(Mode::site(1), &[(0, 1, c(1.0))]);
        let v = two_site_correlator(&s, 0, 1, &create0, &annih1).unwrap();
        assert!((v - c(0.5)).norm() < 1e-15);
        assert!(two_site_correlator(&s, 0, 0, &create0, &create0).is_err());
    }

    #[test]
    fn single_mode_decay() {
        let lat = Arc::new(Lattice::from_edges(1, &[]).unwrap());
        let model = ModelSpec::bose_hubbard(lat, 0.0, 0.0, 0.0);
        let init = InitialState::<f64>::Basis(vec![1]);
        let space = init.loss_space(1, &model.species).unwrap();
        let rho = init.density(space).unwrap();
        let times = uniform_grid(3.0, 31);
        let trace = evolve_lindblad(&model, &rho, 0.5, &times, &EvolveOptions::default()).unwrap();
        for (t, a) in times.iter().zip(&trace.alpha) {
            assert!((a[0] - (-t).exp()).abs() < 1e-12, "t = {t}");
        }
        for n in &trace.norms {
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_needs_lower_sectors() {
        let model = chain_model(2, 1.0, 0.0);
        let init = InitialState::single_species(2, &[(0, 1)]);
        let rho = init.density(init.sector_space(2, &model.species).unwrap()).unwrap();
        let times = [0.0, 1.0];
        let opts = EvolveOptions::default();
        assert!(evolve_lindblad(&model, &rho, 0.1, &times, &opts).is_err());
        assert!(evolve_lindblad(&model, &rho, -0.1, &times, &opts).is_err());
        assert!(evolve_lindblad(&model, &rho, 0.0, &times, &opts).is_ok());
    }

    #[test]
    fn grid_validation() {
        assert!(validate_times::<f64>(&[]).is_err());
        assert!(validate_times(&[0.0, 0.0]).is_err());
        assert!(validate_times(&[-1.0, 0.0]).is_err());
        assert!(validate_times(&[0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn rejects_unnormalized() {
        let model = chain_model(2, 1.0, 0.0);
        let space = Arc::new(FockSpace::with_sectors(2, &model.species, &[vec![1]]).unwrap());
        assert!(PureState::new(space, vec![c(1.0), c(1.0)]).is_err());
    }

    #[test]
    fn piecewise_tau_splits_steps() {
        use crate::hamiltonian::TauSchedule;
        let mut model = chain_model(2, 1.0, 0.0);
        // Hop forward for π/4, freeze, then continue: α_1 = sin²(π/4) = 1/2 at the end.
        let q = std::f64::consts::FRAC_PI_4;
        model.tau = TauSchedule::piecewise(vec![(0.0, 1.0), (q, 0.0)]).unwrap();
        let init = InitialState::single_species(2, &[(0, 1)]);
        let psi = init.pure(init.sector_space(2, &model.species).unwrap()).unwrap();
        let trace = evolve_unitary(&model, &psi, &[0.0, 2.0], &EvolveOptions::default()).unwrap();
        assert!((trace.alpha[1][1] - 0.5).abs() < 1e-12);
    }
}
