//! Linear canonical (symplectic) frame maps and Gaussian states.
//!
//! A [`SymplecticMap`] `M` uses the Heisenberg convention: conjugating
//! the coordinate operators by the frame unitary `U` gives
//! `U z U† = M z` componentwise. Two consequences worth spelling out,
//! because they fix every sign in this module:
//!
//! * the Schrödinger-side moments of the frame state `|φ⟩ = U|ψ⟩`
//!   transform with the *inverse*: `μ_φ = M⁻¹ μ_ψ` (see [`push_state`]);
//! * conjugation reverses products: the map of `U = A·B` is
//!   `M_B · M_A`. The combined squeeze-then-shear frame `|ξ⟩ = R T |ψ⟩`
//!   therefore carries `M = M_T · M_R` — scaling times shear, in that
//!   matrix order. Both facts are locked by the Fock-space oracle
//!   ([`crate::fock::frame_direction_oracle`] and the composition test)
//!   rather than trusted from the algebra alone.

use nalgebra::{Matrix4, Vector4};

use crate::error::{CoreError, Result};
use crate::params::Scale;
use crate::phase::{pi, symplectic_form, xi};
use crate::quadratic::{pipeline_scales, FramePipeline};
use crate::SystemParams;

/// Residual bound accepted by [`SymplecticMap::new`].
pub const SYMPLECTIC_TOL: f64 = 1e-9;

/// Slack on the `ν ≥ ½` physicality bound at state construction.
const PHYSICALITY_TOL: f64 = 1e-9;

/// Max-norm residual `‖MᵀJM − J‖_max`.
pub fn check_symplectic(m: &Matrix4<f64>) -> f64 {
    let j = symplectic_form();
    (m.transpose() * j * m - j).abs().max()
}

/// A linear canonical transformation of `z = (x1, x2, p1, p2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticMap(Matrix4<f64>);

impl SymplecticMap {
    /// Wrap a matrix, rejecting it unless `‖MᵀJM − J‖_max ≤ 1e−9`.
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let residual = check_symplectic(&m);
        if !(residual <= SYMPLECTIC_TOL) {
            return Err(CoreError::NotSymplectic {
                residual,
                bound: SYMPLECTIC_TOL,
            });
        }
        Ok(SymplecticMap(m))
    }

    pub fn identity() -> Self {
        SymplecticMap(Matrix4::identity())
    }

    /// For constructors that produce exactly symplectic matrices, and
    /// for integrated propagators whose residual was already checked
    /// against the (looser) integrator bound.
    pub(crate) fn new_unchecked(m: Matrix4<f64>) -> Self {
        debug_assert!(check_symplectic(&m) <= 1e-6, "internal map not symplectic");
        SymplecticMap(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Symplectic residual of this map.
    pub fn residual(&self) -> f64 {
        check_symplectic(&self.0)
    }

    /// Exact symplectic inverse `M⁻¹ = −J Mᵀ J`.
    pub fn inverse(&self) -> SymplecticMap {
        let j = symplectic_form();
        SymplecticMap(-j * self.0.transpose() * j)
    }
}

impl std::ops::Mul for &SymplecticMap {
    type Output = SymplecticMap;
    fn mul(self, rhs: &SymplecticMap) -> SymplecticMap {
        SymplecticMap::new_unchecked(self.0 * rhs.0)
    }
}

/// Squeeze map of `T_u`: `x_j → x_j e^{u_j}`, `p_j → p_j e^{−u_j}`,
/// i.e. `diag(e^{u1}, e^{u2}, e^{−u1}, e^{−u2})`.
pub fn scaling_map(u1: f64, u2: f64) -> SymplecticMap {
    let mut m = Matrix4::zeros();
    m[(xi(0), xi(0))] = u1.exp();
    m[(xi(1), xi(1))] = u2.exp();
    m[(pi(0), pi(0))] = (-u1).exp();
    m[(pi(1), pi(1))] = (-u2).exp();
    SymplecticMap::new_unchecked(m)
}

/// Quadratic-phase shear: `p_j → p_j + β_j x_j`, identity elsewhere.
pub fn shear_map(beta1: f64, beta2: f64) -> SymplecticMap {
    let mut m = Matrix4::identity();
    m[(pi(0), xi(0))] = beta1;
    m[(pi(1), xi(1))] = beta2;
    SymplecticMap::new_unchecked(m)
}

/// Heisenberg map of the total frame unitary of `pipeline` at time `t`.
///
/// `Direct` is the identity; the squeezed frames carry
/// `scaling_map(u1, u2)`; the final frames compose the shear after the
/// squeeze, `M = scaling_map(u1, u2) · shear_map(β1, β2)` with
/// `β_j = u̇_j/2` (`PaperFinal`) or `β_j = u̇_j` (`CorrectedFinal`).
pub fn frame_map(pipeline: FramePipeline, p: &SystemParams, t: f64) -> Result<SymplecticMap> {
    let scales = pipeline_scales(pipeline, p, t)?;
    let map = match pipeline {
        FramePipeline::Direct => SymplecticMap::identity(),
        FramePipeline::Tilde | FramePipeline::UnitMassTilde | FramePipeline::MacedoGuedes => {
            scaling_map(scales[0].u, scales[1].u)
        }
        FramePipeline::PaperFinal => {
            &scaling_map(scales[0].u, scales[1].u) * &shear_map(scales[0].du / 2.0, scales[1].du / 2.0)
        }
        FramePipeline::CorrectedFinal => {
            &scaling_map(scales[0].u, scales[1].u) * &shear_map(scales[0].du, scales[1].du)
        }
    };
    Ok(map)
}

/// Shear coefficients `β_j` a final-frame pipeline pairs with its
/// Hamiltonian; `None` for frames without a shear.
pub fn shear_coefficients(pipeline: FramePipeline, scales: &[Scale; 2]) -> Option<(f64, f64)> {
    match pipeline {
        FramePipeline::PaperFinal => Some((scales[0].du / 2.0, scales[1].du / 2.0)),
        FramePipeline::CorrectedFinal => Some((scales[0].du, scales[1].du)),
        _ => None,
    }
}

/// Direction of a state transport between lab and frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Lab moments → frame moments (`μ → M⁻¹ μ`).
    ToFrame,
    /// Frame moments → lab moments (`μ → M μ`).
    ToLab,
}

/// First and second moments of a Gaussian state: mean `⟨z⟩` and
/// symmetrized covariance `Σ_ab = ½⟨{z_a − μ_a, z_b − μ_b}⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    mu: Vector4<f64>,
    sigma: Matrix4<f64>,
}

impl GaussianState {
    /// Validating constructor: `Σ` symmetric (to 1e−12, then stored
    /// exactly symmetric) and physical (`ν_j ≥ ½ − 1e−9`).
    pub fn new(mu: Vector4<f64>, sigma: Matrix4<f64>) -> Result<Self> {
        let asym = (sigma - sigma.transpose()).abs().max();
        if !(asym <= 1e-12) {
            return Err(CoreError::Invalid(format!(
                "covariance asymmetry {asym:.3e} exceeds 1e-12"
            )));
        }
        let sigma = 0.5 * (sigma + sigma.transpose());
        let state = GaussianState { mu, sigma };
        let (nu1, nu2) = state.symplectic_eigenvalues();
        let nu_min = nu1.min(nu2);
        if !(nu_min >= 0.5 - PHYSICALITY_TOL) {
            return Err(CoreError::Unphysical { nu_min });
        }
        Ok(state)
    }

    /// Internal constructor for states produced by symplectic transport
    /// or integration, which preserve physicality by construction.
    pub(crate) fn from_parts_unchecked(mu: Vector4<f64>, sigma: Matrix4<f64>) -> Self {
        GaussianState { mu, sigma }
    }

    /// Vacuum: `μ = 0`, `Σ = I/2`.
    pub fn vacuum() -> Self {
        GaussianState {
            mu: Vector4::zeros(),
            sigma: 0.5 * Matrix4::identity(),
        }
    }

    /// Coherent (displaced vacuum) state with the given mean.
    pub fn displaced(mu: Vector4<f64>) -> Self {
        GaussianState {
            mu,
            sigma: 0.5 * Matrix4::identity(),
        }
    }

    pub fn mean(&self) -> &Vector4<f64> {
        &self.mu
    }

    pub fn cov(&self) -> &Matrix4<f64> {
        &self.sigma
    }

    /// Symplectic eigenvalues of the covariance, ascending.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        symplectic_eigenvalues(&self.sigma).expect("stored covariance is symmetric")
    }
}

/// Symplectic eigenvalues `(ν1, ν2)` of a symmetric covariance matrix:
/// the moduli of the eigenvalue pairs of `iJΣ`, ascending. A pure
/// Gaussian state has `ν1 = ν2 = ½`.
pub fn symplectic_eigenvalues(sigma: &Matrix4<f64>) -> Result<(f64, f64)> {
    let asym = (sigma - sigma.transpose()).abs().max();
    let scale = sigma.abs().max().max(1.0);
    if !(asym <= 1e-10 * scale) {
        return Err(CoreError::Invalid(format!(
            "symplectic eigenvalues need a symmetric matrix, asymmetry {asym:.3e}"
        )));
    }
    let eigs = (symplectic_form() * sigma).complex_eigenvalues();
    let mut moduli: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| a.total_cmp(b));
    // eigenvalues come in ±iν pairs; average each pair
    Ok((
        0.5 * (moduli[0] + moduli[1]),
        0.5 * (moduli[2] + moduli[3]),
    ))
}

/// Transport a Gaussian state across the frame with Heisenberg map `m`.
///
/// `ToFrame` applies `μ → M⁻¹μ`, `Σ → M⁻¹ Σ M⁻ᵀ`; `ToLab` applies `M`.
/// Validity of `m` is guaranteed by [`SymplecticMap`], so this cannot
/// fail; the direction convention itself is pinned by the Fock oracle.
pub fn push_state(s: &GaussianState, m: &SymplecticMap, direction: Direction) -> GaussianState {
    let ms = match direction {
        Direction::ToFrame => m.inverse(),
        Direction::ToLab => *m,
    };
    let mu = ms.matrix() * s.mean();
    let sigma = ms.matrix() * s.cov() * ms.matrix().transpose();
    GaussianState::from_parts_unchecked(mu, 0.5 * (sigma + sigma.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ParamFamily, RefMassMode};
    use crate::phase::{IP1, IX1};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn scaling_map_examples() {
        assert_eq!(*scaling_map(0.0, 0.0).matrix(), Matrix4::identity());

        let m = scaling_map(2.0_f64.ln(), 0.0);
        let expected = Matrix4::from_diagonal(&Vector4::new(2.0, 1.0, 0.5, 1.0));
        assert!((m.matrix() - expected).abs().max() <= 1e-15);
    }

    #[test]
    fn scaling_map_is_exactly_symplectic() {
        for (u1, u2) in [(0.3, -0.1), (1.2, 0.7), (-0.5, -0.4)] {
            assert!(scaling_map(u1, u2).residual() <= 1e-15);
        }
    }

    #[test]
    fn shear_map_examples() {
        assert_eq!(*shear_map(0.0, 0.0).matrix(), Matrix4::identity());

        let m = shear_map(0.5, 0.0);
        assert_eq!(m.matrix()[(IP1, IX1)], 0.5);
        let mut expected = Matrix4::identity();
        expected[(IP1, IX1)] = 0.5;
        assert_eq!(*m.matrix(), expected);

        for (b1, b2) in [(0.5, 0.0), (-0.3, 1.1)] {
            let m = shear_map(b1, b2);
            assert_relative_eq!(m.matrix().determinant(), 1.0, max_relative = 1e-14);
            assert!(m.residual() <= 1e-15);
        }
    }

    #[test]
    fn check_symplectic_detects_non_canonical_scaling() {
        assert_eq!(check_symplectic(&Matrix4::identity()), 0.0);
        assert!(scaling_map(0.3, -0.1).residual() <= 1e-15);

        let mut m = Matrix4::identity();
        m[(IX1, IX1)] = 2.0;
        assert_relative_eq!(check_symplectic(&m), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn symplectic_map_rejects_bad_matrix() {
        let mut m = Matrix4::identity();
        m[(IX1, IX1)] = 2.0;
        assert!(matches!(
            SymplecticMap::new(m),
            Err(CoreError::NotSymplectic { .. })
        ));
    }

    #[test]
    fn symplectic_inverse_matches_lu_inverse() {
        let m = &scaling_map(0.4, -0.2) * &shear_map(0.7, 0.1);
        let inv = m.inverse();
        let lu = m.matrix().try_inverse().unwrap();
        assert!((inv.matrix() - lu).abs().max() <= 1e-12);
    }

    #[test]
    fn symplectic_eigenvalue_examples() {
        let vac = 0.5 * Matrix4::identity();
        let (n1, n2) = symplectic_eigenvalues(&vac).unwrap();
        assert_relative_eq!(n1, 0.5, max_relative = 1e-12);
        assert_relative_eq!(n2, 0.5, max_relative = 1e-12);

        let (n1, n2) = symplectic_eigenvalues(&Matrix4::identity()).unwrap();
        assert_relative_eq!(n1, 1.0, max_relative = 1e-12);
        assert_relative_eq!(n2, 1.0, max_relative = 1e-12);

        // x1-squeezed vacuum
        let squeezed = Matrix4::from_diagonal(&Vector4::new(1.0, 0.5, 0.25, 0.5));
        let (n1, n2) = symplectic_eigenvalues(&squeezed).unwrap();
        assert_relative_eq!(n1, 0.5, max_relative = 1e-12);
        assert_relative_eq!(n2, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn symplectic_eigenvalues_reject_asymmetric_input() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = 0.5;
        assert!(symplectic_eigenvalues(&m).is_err());
    }

    #[test]
    fn unphysical_covariance_rejected() {
        let err = GaussianState::new(Vector4::zeros(), 0.1 * Matrix4::identity());
        assert!(matches!(err, Err(CoreError::Unphysical { .. })));
    }

    #[test]
    fn push_state_identity_is_noop() {
        let s = GaussianState::displaced(Vector4::new(1.0, 0.5, 0.0, 0.0));
        let out = push_state(&s, &SymplecticMap::identity(), Direction::ToFrame);
        assert_eq!(out, s);
    }

    #[test]
    fn push_vacuum_to_squeezed_frame() {
        // ToFrame with the u = ln 2 squeeze contracts the x1 variance to
        // (1/2)e^{−2u} = 1/8; the uncertainty product stays 1/4. The
        // direction (e^{−2u}, not e^{+2u}) is the one the Fock oracle
        // certifies.
        let m = scaling_map(2.0_f64.ln(), 0.0);
        let out = push_state(&GaussianState::vacuum(), &m, Direction::ToFrame);
        assert_relative_eq!(out.cov()[(IX1, IX1)], 0.125, max_relative = 1e-12);
        assert_relative_eq!(
            out.cov()[(IX1, IX1)] * out.cov()[(IP1, IP1)],
            0.25,
            max_relative = 1e-12
        );
        let (n1, n2) = out.symplectic_eigenvalues();
        assert_relative_eq!(n1, 0.5, max_relative = 1e-10);
        assert_relative_eq!(n2, 0.5, max_relative = 1e-10);
    }

    fn test_params(mode: RefMassMode) -> SystemParams {
        SystemParams::new(
            ParamFamily::Exponential { c0: 1.0, rate: 0.2 },
            ParamFamily::Exponential { c0: 1.0, rate: 0.2 },
            ParamFamily::Constant(1.0),
            ParamFamily::Constant(1.0),
            ParamFamily::Constant(0.3),
            (0.0, 10.0),
            mode,
        )
        .unwrap()
    }

    #[test]
    fn frame_map_direct_is_identity() {
        let p = test_params(RefMassMode::Unity);
        for t in [0.0, 2.5, 9.0] {
            let m = frame_map(FramePipeline::Direct, &p, t).unwrap();
            assert_eq!(*m.matrix(), Matrix4::identity());
        }
    }

    #[test]
    fn frame_map_scaling_values() {
        let p = test_params(RefMassMode::Unity);
        // u_j(t) = −0.1 t for m_j = e^{0.2t}
        let m0 = frame_map(FramePipeline::UnitMassTilde, &p, 0.0).unwrap();
        assert!((m0.matrix() - Matrix4::identity()).abs().max() <= 1e-14);

        let m5 = frame_map(FramePipeline::UnitMassTilde, &p, 5.0).unwrap();
        let e = 0.5_f64;
        let expected = Matrix4::from_diagonal(&Vector4::new(
            (-e).exp(),
            (-e).exp(),
            e.exp(),
            e.exp(),
        ));
        assert!((m5.matrix() - expected).abs().max() <= 1e-13);
    }

    #[test]
    fn final_frames_differ_by_factor_two_in_shear_rows() {
        let p = test_params(RefMassMode::Unity);
        let t = 3.0;
        let pf = frame_map(FramePipeline::PaperFinal, &p, t).unwrap();
        let cf = frame_map(FramePipeline::CorrectedFinal, &p, t).unwrap();
        for j in 0..2 {
            assert_relative_eq!(
                cf.matrix()[(pi(j), xi(j))],
                2.0 * pf.matrix()[(pi(j), xi(j))],
                max_relative = 1e-12
            );
            assert!(cf.matrix()[(pi(j), xi(j))].abs() > 0.0);
        }
        // identical everywhere else
        let mut diff = cf.matrix() - pf.matrix();
        for j in 0..2 {
            diff[(pi(j), xi(j))] = 0.0;
        }
        assert_eq!(diff.abs().max(), 0.0);
    }

    #[test]
    fn tilde_respects_geometric_mean_mode() {
        let p = test_params(RefMassMode::GeometricMean);
        // equal masses: geometric-mean scales vanish identically
        let m = frame_map(FramePipeline::Tilde, &p, 4.0).unwrap();
        assert_eq!(*m.matrix(), Matrix4::identity());
        // but the unit-mass frame is still nontrivial
        let m = frame_map(FramePipeline::UnitMassTilde, &p, 4.0).unwrap();
        assert!((m.matrix() - Matrix4::identity()).abs().max() > 0.1);
    }

    proptest! {
        #[test]
        fn constructed_maps_are_symplectic(
            u1 in -1.5f64..1.5, u2 in -1.5f64..1.5,
            b1 in -2.0f64..2.0, b2 in -2.0f64..2.0,
        ) {
            let m = &scaling_map(u1, u2) * &shear_map(b1, b2);
            prop_assert!(m.residual() <= 1e-12);
        }

        #[test]
        fn push_state_round_trips(
            u1 in -1.0f64..1.0, u2 in -1.0f64..1.0,
            b1 in -1.5f64..1.5, b2 in -1.5f64..1.5,
            x1 in -2.0f64..2.0, p1 in -2.0f64..2.0,
        ) {
            let m = &scaling_map(u1, u2) * &shear_map(b1, b2);
            let s = GaussianState::displaced(Vector4::new(x1, -0.3, p1, 0.8));
            let back = push_state(&push_state(&s, &m, Direction::ToFrame), &m, Direction::ToLab);
            prop_assert!((back.mean() - s.mean()).abs().max() <= 1e-12);
            prop_assert!((back.cov() - s.cov()).abs().max() <= 1e-12);
        }

        #[test]
        fn push_state_preserves_symplectic_eigenvalues(
            u1 in -1.0f64..1.0, u2 in -1.0f64..1.0,
            b1 in -1.5f64..1.5, b2 in -1.5f64..1.5,
            r in 0.0f64..0.8,
        ) {
            let m = &scaling_map(u1, u2) * &shear_map(b1, b2);
            // mildly squeezed, mildly thermal input state
            let sigma = Matrix4::from_diagonal(&Vector4::new(
                0.7 * (2.0 * r).exp(),
                0.5,
                0.7 * (-2.0 * r).exp(),
                0.5,
            ));
            let s = GaussianState::new(Vector4::zeros(), sigma).unwrap();
            let pushed = push_state(&s, &m, Direction::ToFrame);
            let (a1, a2) = s.symplectic_eigenvalues();
            let (b1_, b2_) = pushed.symplectic_eigenvalues();
            prop_assert!((a1 - b1_).abs() <= 1e-10);
            prop_assert!((a2 - b2_).abs() <= 1e-10);
        }
    }

    #[test]
    fn moduli_come_out_sorted() {
        let (n1, n2) =
            symplectic_eigenvalues(&Matrix4::from_diagonal(&Vector4::new(2.0, 0.5, 2.0, 0.5)))
                .unwrap();
        assert!(n1 <= n2);
        assert_relative_eq!(n1, 0.5, max_relative = 1e-12);
        assert_relative_eq!(n2, 2.0, max_relative = 1e-12);
    }
}
