//! Independent oracles shared by the integration tests.

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use lightcone::fock::{SectorBasis, SpeciesSpec};
use lightcone::graph::Lattice;
use lightcone::hamiltonian::{build_hamiltonian, InteractionTerm, ModelSpec, Monomial, TauSchedule};

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `c_m = Z ⊗ … ⊗ Z ⊗ σ⁻ ⊗ 1 ⊗ … ⊗ 1` on `modes` two-level systems, mode 0
/// leftmost (most significant bit), `|1⟩` = occupied.
fn jw_annihilator(modes: usize, m: usize) -> DMatrix<f64> {
    let id = DMatrix::<f64>::identity(2, 2);
    let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let lower = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let mut op = DMatrix::<f64>::identity(1, 1);
    for k in 0..modes {
        let f = if k < m {
            &z
        } else if k == m {
            &lower
        } else {
            &id
        };
        op = kron(&op, f);
    }
    op
}

fn jw_index(occ: &[u16]) -> usize {
    occ.iter().fold(0, |acc, &o| acc * 2 + o as usize)
}

/// Fermion Hamiltonians on every sector agree entrywise with the
/// Kronecker-product Jordan-Wigner construction.
pub fn check_fermions(lattice: Lattice, species: usize, particles: &[u32], onsite: f64, pair: f64) {
    let l = lattice.num_sites();
    let modes = l * species;
    let c: Vec<DMatrix<f64>> = (0..modes).map(|m| jw_annihilator(modes, m)).collect();
    let n: Vec<DMatrix<f64>> = c.iter().map(|cm| cm.transpose() * cm).collect();
    let (tau, mu) = (0.8, 0.3);
    let dim = 1 << modes;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..species {
        for &(a, b) in lattice.edges() {
            let (ca, cb) = (&c[s * l + a], &c[s * l + b]);
            h -= tau * (ca.transpose() * cb + cb.transpose() * ca);
        }
        for j in 0..l {
            h -= mu * &n[s * l + j];
        }
    }
    let mut interactions = vec![InteractionTerm::Pair {
        sites: (0, 1),
        species: (0, species - 1),
        coefficient: pair,
    }];
    h += pair * &n[0] * &n[(species - 1) * l + 1];
    if species == 2 {
        for j in 0..l {
            interactions.push(InteractionTerm::OnSite {
                site: j,
                monomials: vec![Monomial {
                    coefficient: onsite,
                    powers: vec![1, 1],
                }],
            });
            h += onsite * &n[j] * &n[l + j];
        }
    }

    let spec = vec![SpeciesSpec::fermion(); species];
    let model = ModelSpec {
        lattice: Arc::new(lattice),
        species: spec.clone(),
        tau: TauSchedule::Constant(tau),
        onsite_u: vec![5.0; species],
        chemical_potential: vec![mu; species],
        interactions,
        loss_rate: 0.0,
    };
    let basis = SectorBasis::enumerate(l, &spec, particles).unwrap();
    let ours = build_hamiltonian(&model, &basis, 0.0).unwrap();
    let dense = ours.to_dense();
    let d = basis.dim();
    for x in 0..d {
        let ix = jw_index(&basis.unrank(x).unwrap());
        for y in 0..d {
            let iy = jw_index(&basis.unrank(y).unwrap());
            assert_abs_diff_eq!(dense[x * d + y], h[(ix, iy)], epsilon = 1e-14);
        }
    }
    // The oracle conserves each species' particle number, so no weight
    // leaks out of the sector.
    for x in 0..d {
        let ix = jw_index(&basis.unrank(x).unwrap());
        let inside: f64 = (0..d).map(|y| h[(ix, jw_index(&basis.unrank(y).unwrap()))].abs()).sum();
        let total: f64 = (0..dim).map(|iy| h[(ix, iy)].abs()).sum();
        assert_abs_diff_eq!(inside, total, epsilon = 1e-14);
    }
}

/// `|ψ(t)⟩ = e^{iτMt}|0⟩` by dense eigendecomposition of the adjacency matrix.
pub fn single_particle_densities(lattice: &Lattice, tau: f64, start: usize, times: &[f64]) -> Vec<Vec<f64>> {
    let n = lattice.num_sites();
    let m = DMatrix::from_row_slice(n, n, &lattice.adjacency_matrix::<f64>());
    let eig = SymmetricEigen::new(m);
    times
        .iter()
        .map(|&t| {
            (0..n)
                .map(|j| {
                    let amp: Complex<f64> = (0..n)
                        .map(|k| {
                            let phase = Complex::from_polar(1.0, tau * eig.eigenvalues[k] * t);
                            phase * eig.eigenvectors[(j, k)] * eig.eigenvectors[(start, k)]
                        })
                        .sum();
                    amp.norm_sqr()
                })
                .collect()
        })
        .collect()
}

