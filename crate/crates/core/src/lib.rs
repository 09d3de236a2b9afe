//! Numerical toolkit for two coupled harmonic oscillators with
//! time-dependent masses, frequencies, and coupling.
//!
//! The library builds every Hamiltonian produced by a chain of
//! time-dependent canonical frame transformations (squeeze/dilation
//! followed by a quadratic-phase shear), propagates Gaussian states
//! exactly at moment level under any of them, and verifies each claimed
//! frame reduction by round-tripping trajectories back to the lab frame.
//! A truncated Fock-space module provides an independent operator-level
//! oracle for the transformation identities and for the Gaussian
//! propagation itself. A deliberately defective frame Hamiltonian (the
//! [`quadratic::FramePipeline::MacedoGuedes`] variant, which drops the
//! dilation terms) is included so the frame-equivalence check can
//! quantify the error it causes.
//!
//! Conventions, fixed across all modules:
//!
//! * phase-space ordering `z = (x1, x2, p1, p2)` with symplectic form
//!   `J = [[0, I2], [-I2, 0]]` (see [`phase`]);
//! * `hbar = 1`, vacuum covariance `I/2`, quadratures `x = (a + a†)/√2`,
//!   `p = i(a† − a)/√2`;
//! * Hamiltonians are quadratic forms `H = ½ zᵀ S z` with symmetrized
//!   (Weyl) operator ordering, so a stored cross entry `S[x,p] = c`
//!   stands for the operator `c·(x̂p̂ + p̂x̂)/2`;
//! * symplectic maps use the Heisenberg convention: `M` is the matrix
//!   with `U z U† = M z` for the frame unitary `U`.

pub use nalgebra;

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod params;
pub mod phase;
pub mod quadratic;
pub mod sympl;

pub use error::{CoreError, Result};
pub use params::{ParamFamily, RefMassMode, Scale, ScaleFunctions, SystemParams};
pub use quadratic::{build_hamiltonian, FramePipeline, QuadraticForm};
pub use sympl::{
    check_symplectic, frame_map, push_state, scaling_map, shear_map, symplectic_eigenvalues,
    Direction, GaussianState, SymplecticMap,
};
pub use dynamics::{
    equivalence_residual, evolve, evolve_in_frame, mg_discrepancy, propagator,
    single_oscillator_demo, EquivalenceResidual, SingleOscillatorDemo, TimeGrid, Trajectory,
};
