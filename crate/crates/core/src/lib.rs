//! Exact simulation of interacting lattice particle models (Bose-Hubbard and
//! generalizations with bosons, fermions and hardcore bosons) together with
//! the light-cone bounds on how fast particles can spread.
//!
//! The pipeline: a [`graph::Lattice`] and [`hamiltonian::ModelSpec`] define
//! the model, [`fock`] enumerates fixed-particle-number bases, [`evolve`]
//! propagates pure states (Lanczos) or density matrices under particle loss,
//! [`envelope`] computes the bound side (χ, C, v and the worst-case envelope
//! γ(t) = e^{Dτt} e^{τMt} γ(0)), and [`verify`] compares the two.
//!
//! Everything numerical is generic over `f32`/`f64`; the aliases below fix
//! `f64`.
//!
//! ```
//! use std::sync::Arc;
//! use lightcone::{evolve::{uniform_grid, InitialState}, graph::Lattice, hamiltonian::ModelSpec};
//! use lightcone::verify::{run_experiment, ExperimentConfig};
//!
//! let lattice = Arc::new(Lattice::chain(2, false).unwrap());
//! let model = ModelSpec::bose_hubbard(lattice, 1.0, 0.0, 0.0);
//! let cfg = ExperimentConfig::new(model, InitialState::single_species(2, &[(0, 1)]), uniform_grid(2.0, 201));
//! let out = run_experiment(&cfg).unwrap();
//! assert!((out.trace.final_alpha()[1] - 2.0f64.sin().powi(2)).abs() < 1e-8);
//! assert!(out.report.passed());
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod envelope;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod graph;
pub mod hamiltonian;
pub mod linalg;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use graph::Lattice;
pub use scalar::Real;

pub type Model = hamiltonian::ModelSpec<f64>;
pub type Hamiltonian = hamiltonian::SparseOperator<f64>;
pub type Schedule = hamiltonian::TauSchedule<f64>;
pub type Params = envelope::EnvelopeParams<f64>;
pub type Trace = evolve::SimulationTrace<f64>;
pub type Pure = evolve::PureState<f64>;
pub type Density = evolve::DensityMatrix<f64>;
pub type State = evolve::QuantumState<f64>;
pub type Initial = evolve::InitialState<f64>;
pub type Experiment = verify::ExperimentConfig<f64>;
pub type Output = verify::ExperimentOutput<f64>;
