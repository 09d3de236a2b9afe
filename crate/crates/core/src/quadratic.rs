//! Time-dependent quadratic Hamiltonians over `z = (x1, x2, p1, p2)`.
//!
//! Every frame of the mass-elimination chain corresponds to one
//! [`FramePipeline`] variant and one Hamiltonian builder. All builders
//! return a [`QuadraticForm`] `S` with `H = ½ zᵀ S z` under the Weyl
//! (symmetrized) operator convention: a stored entry `S[x_j, p_j] = c`
//! stands for the operator `c·(x̂_j p̂_j + p̂_j x̂_j)/2`.

use nalgebra::Matrix4;

use crate::error::{CoreError, Result};
use crate::params::{RefMassMode, Scale, ScaleFunctions, SystemParams};
use crate::phase::{pi, xi};

/// Symmetric 4×4 quadratic form; `H(z) = ½ zᵀ S z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForm(Matrix4<f64>);

impl QuadraticForm {
    /// The zero form.
    pub fn zero() -> Self {
        QuadraticForm(Matrix4::zeros())
    }

    /// Wrap an externally built matrix, validating exact symmetry and
    /// finiteness.
    pub fn from_symmetric(m: Matrix4<f64>) -> Result<Self> {
        if m != m.transpose() {
            return Err(CoreError::Invalid(
                "quadratic form matrix must be exactly symmetric".into(),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Invalid(
                "quadratic form matrix must be finite".into(),
            ));
        }
        Ok(QuadraticForm(m))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Set `S[i,j] = S[j,i] = v`.
    pub fn set_pair(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    /// Largest absolute entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &QuadraticForm) -> f64 {
        (self.0 - other.0).abs().max()
    }
}

impl std::ops::Add for QuadraticForm {
    type Output = QuadraticForm;
    fn add(self, rhs: QuadraticForm) -> QuadraticForm {
        QuadraticForm(self.0 + rhs.0)
    }
}

impl std::ops::Sub for QuadraticForm {
    type Output = QuadraticForm;
    fn sub(self, rhs: QuadraticForm) -> QuadraticForm {
        QuadraticForm(self.0 - rhs.0)
    }
}

/// One frame of the mass-elimination chain, pairing a Hamiltonian
/// builder with a frame map (see [`crate::sympl::frame_map`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FramePipeline {
    /// Lab frame: the untransformed Hamiltonian.
    Direct,
    /// Squeezed frame with the configured reference-mass mode.
    Tilde,
    /// Squeezed frame with the reference mass fixed to one.
    UnitMassTilde,
    /// Shear-completed final frame exactly as printed in the source
    /// derivation: shear coefficient `u̇/2`, `Ω² = ω² − (u̇² − 2ü)/4`.
    PaperFinal,
    /// Shear-completed final frame re-derived from the squeezed-frame
    /// Hamiltonian: shear coefficient `u̇`, `Ω² = ω² − u̇² + ü`.
    CorrectedFinal,
    /// The squeezed frame with the dilation terms deleted — the defect
    /// under test. Kept for falsification runs only.
    MacedoGuedes,
}

impl FramePipeline {
    /// All variants, in a fixed order.
    pub fn all() -> [FramePipeline; 6] {
        [
            FramePipeline::Direct,
            FramePipeline::Tilde,
            FramePipeline::UnitMassTilde,
            FramePipeline::PaperFinal,
            FramePipeline::CorrectedFinal,
            FramePipeline::MacedoGuedes,
        ]
    }

    /// Stable snake_case name, used for CLI parsing and output files.
    pub fn name(&self) -> &'static str {
        match self {
            FramePipeline::Direct => "direct",
            FramePipeline::Tilde => "tilde",
            FramePipeline::UnitMassTilde => "unit_mass_tilde",
            FramePipeline::PaperFinal => "paper_final",
            FramePipeline::CorrectedFinal => "corrected_final",
            FramePipeline::MacedoGuedes => "macedo_guedes",
        }
    }

    /// Inverse of [`name`](Self::name).
    pub fn from_name(name: &str) -> Option<FramePipeline> {
        FramePipeline::all().into_iter().find(|p| p.name() == name)
    }
}

impl std::fmt::Display for FramePipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Squeeze scales used by a pipeline's Hamiltonian and frame map.
///
/// `Tilde` follows the system's configured reference-mass mode; every
/// other transformed frame fixes the reference mass to one, which is the
/// mode the final-frame algebra assumes. `Direct` has no frame and
/// returns zero scales.
pub fn pipeline_scales(
    pipeline: FramePipeline,
    p: &SystemParams,
    t: f64,
) -> Result<[Scale; 2]> {
    match pipeline {
        FramePipeline::Direct => Ok([Scale::ZERO; 2]),
        FramePipeline::Tilde => ScaleFunctions::new(p).eval_both(t),
        _ => ScaleFunctions::with_mode(p, RefMassMode::Unity).eval_both(t),
    }
}

/// The dilation contribution `−(u̇_j/2)(x_j p_j + p_j x_j)` of a
/// time-dependent squeeze frame: zero except `S[x_j, p_j] = −u̇_j`.
pub fn dilation_term(du1: f64, du2: f64) -> QuadraticForm {
    let mut s = QuadraticForm::zero();
    s.set_pair(xi(0), pi(0), -du1);
    s.set_pair(xi(1), pi(1), -du2);
    s
}

/// The squeezed coupling `k (x2 e^{u2} − x1 e^{u1})²/2` as a quadratic
/// form: x-block `[[k e^{2u1}, −k e^{u1+u2}], [−k e^{u1+u2}, k e^{2u2}]]`.
///
/// A negative `k` is accepted; the system constructor warns about it.
pub fn coupling_term(k: f64, u1: f64, u2: f64) -> QuadraticForm {
    let mut s = QuadraticForm::zero();
    s.set_pair(xi(0), xi(0), k * (2.0 * u1).exp());
    s.set_pair(xi(1), xi(1), k * (2.0 * u2).exp());
    s.set_pair(xi(0), xi(1), -k * (u1 + u2).exp());
    s
}

/// Build the Hamiltonian of `pipeline` at time `t`.
pub fn build_hamiltonian(
    pipeline: FramePipeline,
    p: &SystemParams,
    t: f64,
) -> Result<QuadraticForm> {
    let m = [p.m(0).value(t)?, p.m(1).value(t)?];
    for (idx, &mj) in m.iter().enumerate() {
        if !(mj > 0.0) {
            return Err(CoreError::NonpositiveMass {
                index: idx + 1,
                t,
                value: mj,
            });
        }
    }
    let w = [p.w(0).value(t)?, p.w(1).value(t)?];
    let k = p.k().value(t)?;
    let scales = pipeline_scales(pipeline, p, t)?;

    let mut s = QuadraticForm::zero();
    match pipeline {
        FramePipeline::Direct => {
            for j in 0..2 {
                s.set_pair(pi(j), pi(j), 1.0 / m[j]);
                s.set_pair(xi(j), xi(j), m[j] * w[j] * w[j]);
            }
            s = s + coupling_term(k, 0.0, 0.0);
        }
        FramePipeline::Tilde | FramePipeline::UnitMassTilde | FramePipeline::MacedoGuedes => {
            for j in 0..2 {
                let u = scales[j].u;
                s.set_pair(pi(j), pi(j), (-2.0 * u).exp() / m[j]);
                s.set_pair(xi(j), xi(j), m[j] * w[j] * w[j] * (2.0 * u).exp());
            }
            s = s + coupling_term(k, scales[0].u, scales[1].u);
            if pipeline != FramePipeline::MacedoGuedes {
                s = s + dilation_term(scales[0].du, scales[1].du);
            }
        }
        FramePipeline::PaperFinal | FramePipeline::CorrectedFinal => {
            for j in 0..2 {
                let Scale { du, ddu, .. } = scales[j];
                let omega2 = match pipeline {
                    FramePipeline::PaperFinal => w[j] * w[j] - (du * du - 2.0 * ddu) / 4.0,
                    _ => w[j] * w[j] - du * du + ddu,
                };
                s.set_pair(pi(j), pi(j), 1.0);
                s.set_pair(xi(j), xi(j), omega2);
            }
            s = s + coupling_term(k, scales[0].u, scales[1].u);
        }
    }
    Ok(s)
}
