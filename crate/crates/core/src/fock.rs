//! Truncated Fock-space oracle.
//!
//! Everything in this module works with dense number-basis matrices and
//! genuine quantum states, independently of the Gaussian moment
//! machinery. It serves three purposes: verify the squeeze and shear
//! conjugation identities at operator level, pin down the direction and
//! composition conventions used by [`crate::sympl`], and cross-check
//! Gaussian propagation against wavefunction propagation on shared
//! scenarios.
//!
//! Identities that are exact in infinite dimension only hold on an
//! interior block after truncation, so conjugation checks restrict to a
//! guarded top-left block and time evolution monitors the population of
//! the top levels of each mode.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::params::SystemParams;
use crate::phase::{pi, xi};
use crate::quadratic::{build_hamiltonian, FramePipeline};
use crate::dynamics::TimeGrid;

/// Default retained fraction is `1 − margin`: with `margin = 2/3` a
/// `d = 60` check inspects the top-left `20×20` block.
pub const DEFAULT_MARGIN_FRACTION: f64 = 2.0 / 3.0;

/// Tail population limit during two-mode evolution.
const TAIL_LIMIT: f64 = 1e-4;

/// Tail population allowed in an initial state.
const INITIAL_TAIL_LIMIT: f64 = 1e-8;

/// Norm drift that triggers a logged renormalization.
const NORM_DRIFT_LIMIT: f64 = 1e-9;

/// Dense operator on a truncated single-mode Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    mat: DMatrix<C64>,
}

impl FockOperator {
    /// Wrap a square matrix.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(CoreError::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(FockOperator { mat })
    }

    pub fn identity(d: usize) -> Self {
        FockOperator {
            mat: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator {
            mat: self.mat.adjoint(),
        }
    }

    /// Largest entry modulus.
    pub fn max_modulus(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖U†U − I‖_max`, the unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        max_modulus(&(self.mat.adjoint() * &self.mat - DMatrix::<C64>::identity(d, d)))
    }
}

impl std::ops::Mul for &FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: &FockOperator) -> FockOperator {
        FockOperator {
            mat: &self.mat * &rhs.mat,
        }
    }
}

fn max_modulus(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    max_modulus(&(m - m.adjoint()))
}

/// Annihilation operator: `a[n−1, n] = √n`.
pub fn ladder(d: usize) -> FockOperator {
    assert!(d >= 2, "ladder needs d >= 2");
    let mut a = DMatrix::<C64>::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    FockOperator { mat: a }
}

/// Quadratures `x = (a + a†)/√2`, `p = i(a† − a)/√2` (`hbar = 1`).
pub fn quadrature(d: usize) -> (FockOperator, FockOperator) {
    let a = ladder(d).mat;
    let ad = a.adjoint();
    let rt2_inv = C64::new(1.0 / 2.0_f64.sqrt(), 0.0);
    let x = (&a + &ad) * rt2_inv;
    let p = (&ad - &a) * (C64::i() * rt2_inv);
    (FockOperator { mat: x }, FockOperator { mat: p })
}

/// Symmetrized cross quadrature `(xp + px)/2`.
pub fn sym_xp(d: usize) -> FockOperator {
    let (x, p) = quadrature(d);
    let m = (&x.mat * &p.mat + &p.mat * &x.mat) * C64::new(0.5, 0.0);
    FockOperator { mat: m }
}

/// `exp(iG)` for a Hermitian generator `G`, via eigendecomposition.
fn expi_hermitian(g: &DMatrix<C64>) -> DMatrix<C64> {
    let defect = hermiticity_defect(g);
    assert!(
        defect <= 1e-12,
        "generator must be Hermitian, defect {defect:.3e}"
    );
    let sym = nalgebra::SymmetricEigen::new(g.clone());
    let phases = DVector::from_iterator(
        sym.eigenvalues.len(),
        sym.eigenvalues.iter().map(|&l| C64::from_polar(1.0, l)),
    );
    &sym.eigenvectors * DMatrix::from_diagonal(&phases) * sym.eigenvectors.adjoint()
}

/// Single-mode squeeze unitary `exp(i (u/2)(xp + px))`, which conjugates
/// `x → e^{u} x` and `p → e^{−u} p`.
pub fn dilation_unitary(u: f64, d: usize) -> FockOperator {
    if u.abs() > 0.5 {
        log::warn!("dilation scale |u| = {} exceeds the truncation-accuracy guard 0.5", u.abs());
    }
    let g = sym_xp(d).mat * C64::new(u, 0.0);
    FockOperator {
        mat: expi_hermitian(&g),
    }
}

/// Single-mode quadratic-phase unitary `exp(−i c x²)`, which conjugates
/// `p → p + 2c x` and leaves `x` fixed.
pub fn shear_unitary(c: f64, d: usize) -> FockOperator {
    if c.abs() > 0.5 {
        log::warn!("shear strength |c| = {} exceeds the truncation-accuracy guard 0.5", c.abs());
    }
    let (x, _) = quadrature(d);
    let g = &x.mat * &x.mat * C64::new(-c, 0.0);
    FockOperator {
        mat: expi_hermitian(&g),
    }
}

/// Max-norm of `U A U† − expected`, restricted to the guarded top-left
/// block of side `floor(d · (1 − margin_fraction))`.
pub fn conjugation_residual(
    u: &FockOperator,
    a: &FockOperator,
    expected: &FockOperator,
    margin_fraction: f64,
) -> Result<f64> {
    let d = u.dim();
    if a.dim() != d || expected.dim() != d {
        return Err(CoreError::DimensionMismatch(format!(
            "operators of dims {}, {}, {} must agree",
            d,
            a.dim(),
            expected.dim()
        )));
    }
    if !(0.0..1.0).contains(&margin_fraction) {
        return Err(CoreError::Invalid(format!(
            "margin fraction must lie in [0, 1), got {margin_fraction}"
        )));
    }
    let block = ((d as f64) * (1.0 - margin_fraction)).floor() as usize;
    if block == 0 {
        return Err(CoreError::Invalid(format!(
            "guarded block is empty for d = {d}, margin = {margin_fraction}"
        )));
    }
    let conj = &u.mat * &a.mat * u.mat.adjoint();
    let diff = conj - &expected.mat;
    Ok(max_modulus(&diff.view((0, 0), (block, block)).into_owned()))
}

/// Which way the squeeze maps the vacuum x-variance when transporting a
/// state *into* the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceRule {
    /// `σ_x²(T_u|0⟩) = ½ e^{−2u}` — the frame state contracts in x for
    /// `u > 0`.
    Contracts,
    /// `σ_x²(T_u|0⟩) = ½ e^{+2u}`.
    Expands,
}

/// Ground truth for the state-transport direction convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDirectionReport {
    pub rule: VarianceRule,
    /// Measured `σ_x²` of `T_u|0⟩`.
    pub variance: f64,
}

/// Measure `σ_x²` of `T_u|0⟩` and report which of the two candidate
/// transport rules it matches. [`crate::sympl::push_state`] must agree
/// with this report exactly.
pub fn frame_direction_oracle(u: f64, d: usize) -> FrameDirectionReport {
    if u.abs() > 0.3 {
        log::warn!("frame-direction oracle called with |u| = {} > 0.3", u.abs());
    }
    let t = dilation_unitary(u, d);
    let mut vac = DVector::<C64>::zeros(d);
    vac[0] = C64::new(1.0, 0.0);
    let psi = &t.mat * vac;
    let (mean, cov) = single_mode_moments(&psi);
    let _ = mean;
    let variance = cov[(0, 0)];
    let contracts = (variance - 0.5 * (-2.0 * u).exp()).abs();
    let expands = (variance - 0.5 * (2.0 * u).exp()).abs();
    FrameDirectionReport {
        rule: if contracts <= expands {
            VarianceRule::Contracts
        } else {
            VarianceRule::Expands
        },
        variance,
    }
}

/// Mean vector `(⟨x⟩, ⟨p⟩)` and symmetrized covariance of a single-mode
/// state.
pub fn single_mode_moments(psi: &DVector<C64>) -> (Vector2<f64>, Matrix2<f64>) {
    let d = psi.len();
    let (x, p) = quadrature(d);
    let sxp = sym_xp(d);
    let expect = |op: &DMatrix<C64>| {
        let v = op * psi;
        psi.dotc(&v).re
    };
    let mx = expect(&x.mat);
    let mp = expect(&p.mat);
    let xx = expect(&(&x.mat * &x.mat)) - mx * mx;
    let pp = expect(&(&p.mat * &p.mat)) - mp * mp;
    let xp = expect(&sxp.mat) - mx * mp;
    (
        Vector2::new(mx, mp),
        Matrix2::new(xx, xp, xp, pp),
    )
}

/// Normalized state of two modes, mode-1-major: `amp[n1·d + n2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    amp: DVector<C64>,
    dim: usize,
}

impl TwoModeState {
    /// Wrap an amplitude vector of length `d²`, normalizing it exactly
    /// (the input norm must already be within 1e−6 of one).
    pub fn new(amp: DVector<C64>, dim: usize) -> Result<Self> {
        if amp.len() != dim * dim {
            return Err(CoreError::DimensionMismatch(format!(
                "two-mode state needs d² = {} amplitudes, got {}",
                dim * dim,
                amp.len()
            )));
        }
        let norm = amp.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(CoreError::Invalid(format!(
                "state norm {norm} too far from one"
            )));
        }
        Ok(TwoModeState {
            amp: amp / C64::new(norm, 0.0),
            dim,
        })
    }

    /// `|0⟩⊗|0⟩`.
    pub fn vacuum(d: usize) -> Self {
        let mut amp = DVector::<C64>::zeros(d * d);
        amp[0] = C64::new(1.0, 0.0);
        TwoModeState { amp, dim: d }
    }

    /// Product of coherent states `|α1⟩⊗|α2⟩` with
    /// `α = (⟨x⟩ + i⟨p⟩)/√2`, truncated and renormalized.
    pub fn coherent(alpha1: C64, alpha2: C64, d: usize) -> Self {
        let coeffs = |alpha: C64| {
            let mut c = DVector::<C64>::zeros(d);
            c[0] = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
            for n in 1..d {
                c[n] = c[n - 1] * alpha / C64::new((n as f64).sqrt(), 0.0);
            }
            c
        };
        let c1 = coeffs(alpha1);
        let c2 = coeffs(alpha2);
        let mut amp = DVector::<C64>::zeros(d * d);
        for n1 in 0..d {
            for n2 in 0..d {
                amp[n1 * d + n2] = c1[n1] * c2[n2];
            }
        }
        let norm = amp.norm();
        TwoModeState {
            amp: amp / C64::new(norm, 0.0),
            dim: d,
        }
    }

    /// Coherent state whose Gaussian moments are `(μ, I/2)`.
    pub fn from_mean(mu: &Vector4<f64>, d: usize) -> Self {
        let rt2 = 2.0_f64.sqrt();
        let a1 = C64::new(mu[xi(0)] / rt2, mu[pi(0)] / rt2);
        let a2 = C64::new(mu[xi(1)] / rt2, mu[pi(1)] / rt2);
        TwoModeState::coherent(a1, a2, d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.norm()
    }

    /// Population in the top 10% of levels of either mode.
    pub fn tail_population(&self) -> f64 {
        let d = self.dim;
        let cutoff = d - (d / 10).max(1);
        let mut tail = 0.0;
        for n1 in 0..d {
            for n2 in 0..d {
                if n1 >= cutoff || n2 >= cutoff {
                    tail += self.amp[n1 * d + n2].norm_sqr();
                }
            }
        }
        tail
    }

    /// View as the `d×d` matrix `Ψ[n1, n2]`.
    fn as_mode_matrix(&self) -> DMatrix<C64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |n1, n2| self.amp[n1 * d + n2])
    }

    fn from_mode_matrix(psi: &DMatrix<C64>) -> Self {
        let d = psi.nrows();
        let amp = DVector::from_fn(d * d, |i, _| psi[(i / d, i % d)]);
        TwoModeState { amp, dim: d }
    }
}

/// Moment samples extracted from wavefunction evolution.
#[derive(Debug, Clone)]
pub struct MomentTrajectory {
    times: Vec<f64>,
    means: Vec<Vector4<f64>>,
    covs: Vec<Matrix4<f64>>,
    /// Number of logged renormalizations (zero in a healthy run).
    pub renormalizations: usize,
}

impl MomentTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn means(&self) -> &[Vector4<f64>] {
        &self.means
    }

    pub fn covs(&self) -> &[Matrix4<f64>] {
        &self.covs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest Euclidean mean distance to a Gaussian trajectory on
    /// shared nodes.
    pub fn max_mean_distance(&self, other: &crate::dynamics::Trajectory) -> f64 {
        self.means
            .iter()
            .zip(other.states())
            .map(|(m, s)| (m - s.mean()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise covariance distance to a Gaussian trajectory.
    pub fn max_cov_distance(&self, other: &crate::dynamics::Trajectory) -> f64 {
        self.covs
            .iter()
            .zip(other.states())
            .map(|(c, s)| (c - s.cov()).abs().max())
            .fold(0.0, f64::max)
    }
}

/// Single-mode operator set reused across steps and moments.
struct ModeOps {
    x: DMatrix<C64>,
    p: DMatrix<C64>,
    xx: DMatrix<C64>,
    pp: DMatrix<C64>,
    sxp: DMatrix<C64>,
}

impl ModeOps {
    fn new(d: usize) -> Self {
        let (x, p) = quadrature(d);
        let sxp = sym_xp(d);
        let xx = &x.mat * &x.mat;
        let pp = &p.mat * &p.mat;
        ModeOps {
            x: x.mat,
            p: p.mat,
            xx,
            pp,
            sxp: sxp.mat,
        }
    }

    /// 1-norm (max column sum), used to bound the spectral radius.
    fn one_norm(m: &DMatrix<C64>) -> f64 {
        (0..m.ncols())
            .map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// The Hamiltonian of one midpoint-frozen step, kept in Kronecker form
/// `H = H1⊗I + I⊗H2 + Σ c · A⊗B` so it can be applied to the mode
/// matrix `Ψ` as `H1 Ψ + Ψ H2ᵀ + Σ c · A Ψ Bᵀ`.
struct StepHamiltonian<'a> {
    h1: DMatrix<C64>,
    h2: DMatrix<C64>,
    cross: Vec<(f64, &'a DMatrix<C64>, &'a DMatrix<C64>)>,
}

impl<'a> StepHamiltonian<'a> {
    fn build(s: &crate::quadratic::QuadraticForm, ops: &'a ModeOps) -> Self {
        let c = |v: f64| C64::new(v, 0.0);
        let mode_h = |j: usize| {
            &ops.xx * c(0.5 * s.get(xi(j), xi(j)))
                + &ops.pp * c(0.5 * s.get(pi(j), pi(j)))
                + &ops.sxp * c(s.get(xi(j), pi(j)))
        };
        let mut cross = Vec::new();
        for (coeff, a, b) in [
            (s.get(xi(0), xi(1)), &ops.x, &ops.x),
            (s.get(xi(0), pi(1)), &ops.x, &ops.p),
            (s.get(pi(0), xi(1)), &ops.p, &ops.x),
            (s.get(pi(0), pi(1)), &ops.p, &ops.p),
        ] {
            if coeff != 0.0 {
                cross.push((coeff, a, b));
            }
        }
        StepHamiltonian {
            h1: mode_h(0),
            h2: mode_h(1),
            cross,
        }
    }

    fn apply(&self, psi: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = &self.h1 * psi + psi * self.h2.transpose();
        for &(coeff, a, b) in &self.cross {
            out += a * psi * b.transpose() * C64::new(coeff, 0.0);
        }
        out
    }

    /// Upper bound on the operator norm.
    fn norm_bound(&self) -> f64 {
        ModeOps::one_norm(&self.h1)
            + ModeOps::one_norm(&self.h2)
            + self
                .cross
                .iter()
                .map(|&(c, a, b)| c.abs() * ModeOps::one_norm(a) * ModeOps::one_norm(b))
                .sum::<f64>()
    }
}

/// Apply `exp(−i τ H)` to `Ψ` by a truncated series, substepping so each
/// application converges to machine precision.
fn apply_step_exponential(
    ham: &StepHamiltonian,
    psi: &mut DMatrix<C64>,
    tau: f64,
    t: f64,
) -> Result<()> {
    const THETA: f64 = 0.5;
    const KMAX: usize = 120;
    let substeps = ((ham.norm_bound() * tau.abs() / THETA).ceil() as usize).max(1);
    let dt = tau / substeps as f64;
    for _ in 0..substeps {
        let mut term = psi.clone();
        let mut acc = psi.clone();
        let mut converged = false;
        for k in 1..=KMAX {
            term = ham.apply(&term) * (C64::new(0.0, -dt) / C64::new(k as f64, 0.0));
            acc += &term;
            if term.norm() <= 1e-16 * acc.norm() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(CoreError::Numerical {
                t,
                what: "step-exponential series failed to converge".into(),
            });
        }
        *psi = acc;
    }
    Ok(())
}

fn moments(psi: &DMatrix<C64>, ops: &ModeOps) -> (Vector4<f64>, Matrix4<f64>) {
    // ⟨A⊗I⟩ = tr(A ρ1) with ρ1 = ΨΨ†; ⟨I⊗B⟩ = tr((Ψ†Ψ) Bᵀ);
    // ⟨A⊗B⟩ = tr((Ψ† A Ψ) Bᵀ)
    let rho1 = psi * psi.adjoint();
    let gram2 = psi.adjoint() * psi;
    let tr = |m: &DMatrix<C64>| m.diagonal().iter().sum::<C64>().re;
    let tr_bt = |c: &DMatrix<C64>, b: &DMatrix<C64>| {
        c.iter()
            .zip(b.iter())
            .map(|(ci, bi)| ci * bi)
            .sum::<C64>()
            .re
    };
    let mode1 = |a: &DMatrix<C64>| tr(&(a * &rho1));
    let mode2 = |b: &DMatrix<C64>| tr_bt(&gram2, b);
    let pair = |a: &DMatrix<C64>, b: &DMatrix<C64>| tr_bt(&(psi.adjoint() * a * psi), b);

    let mut mu = Vector4::zeros();
    mu[xi(0)] = mode1(&ops.x);
    mu[xi(1)] = mode2(&ops.x);
    mu[pi(0)] = mode1(&ops.p);
    mu[pi(1)] = mode2(&ops.p);

    let mut cov = Matrix4::zeros();
    let mut set = |i: usize, j: usize, raw: f64| {
        let v = raw - mu[i] * mu[j];
        cov[(i, j)] = v;
        cov[(j, i)] = v;
    };
    set(xi(0), xi(0), mode1(&ops.xx));
    set(pi(0), pi(0), mode1(&ops.pp));
    set(xi(0), pi(0), mode1(&ops.sxp));
    set(xi(1), xi(1), mode2(&ops.xx));
    set(pi(1), pi(1), mode2(&ops.pp));
    set(xi(1), pi(1), mode2(&ops.sxp));
    set(xi(0), xi(1), pair(&ops.x, &ops.x));
    set(xi(0), pi(1), pair(&ops.x, &ops.p));
    set(pi(0), xi(1), pair(&ops.p, &ops.x));
    set(pi(0), pi(1), pair(&ops.p, &ops.p));
    (mu, cov)
}

/// Propagate a genuine two-mode state under `pipeline`'s Hamiltonian
/// with midpoint-frozen step exponentials, returning moment samples at
/// every grid node.
///
/// The step applies `exp(−i H(t_mid) h)` to machine precision, so the
/// only stepping error is the `O(h²)` midpoint freezing itself. Norm
/// drift beyond 1e−9 is renormalized and logged, never silent; tail
/// population beyond 1e−4 aborts with a truncation error.
pub fn two_mode_evolve(
    pipeline: FramePipeline,
    p: &SystemParams,
    psi0: &TwoModeState,
    g: &TimeGrid,
    d: usize,
) -> Result<MomentTrajectory> {
    if d < 2 || d > 40 {
        return Err(CoreError::Invalid(format!(
            "two-mode dimension must lie in [2, 40], got {d}"
        )));
    }
    if psi0.dim() != d {
        return Err(CoreError::DimensionMismatch(format!(
            "state dimension {} does not match d = {d}",
            psi0.dim()
        )));
    }
    let initial_tail = psi0.tail_population();
    if initial_tail > INITIAL_TAIL_LIMIT {
        return Err(CoreError::Truncation {
            t: g.start(),
            tail: initial_tail,
            limit: INITIAL_TAIL_LIMIT,
        });
    }

    let ops = ModeOps::new(d);
    let h = g.step();
    let mut psi = psi0.as_mode_matrix();
    let mut times = Vec::with_capacity(g.len());
    let mut means = Vec::with_capacity(g.len());
    let mut covs = Vec::with_capacity(g.len());
    let mut renorms = 0usize;

    let (mu, cov) = moments(&psi, &ops);
    times.push(g.node(0));
    means.push(mu);
    covs.push(cov);

    for i in 0..g.len() - 1 {
        let t = g.node(i);
        let t_mid = t + 0.5 * h;
        let s = build_hamiltonian(pipeline, p, t_mid)?;
        let ham = StepHamiltonian::build(&s, &ops);
        apply_step_exponential(&ham, &mut psi, h, t)?;

        let norm = psi.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(CoreError::Numerical {
                t: t + h,
                what: format!("state norm became {norm}"),
            });
        }
        if (norm - 1.0).abs() > NORM_DRIFT_LIMIT {
            log::warn!(
                "renormalizing two-mode state at t = {}: norm drift {:.3e}",
                t + h,
                (norm - 1.0).abs()
            );
            renorms += 1;
            psi /= C64::new(norm, 0.0);
        }

        let state = TwoModeState::from_mode_matrix(&psi);
        let tail = state.tail_population();
        if tail > TAIL_LIMIT {
            return Err(CoreError::Truncation {
                t: t + h,
                tail,
                limit: TAIL_LIMIT,
            });
        }

        let (mu, cov) = moments(&psi, &ops);
        times.push(g.node(i + 1));
        means.push(mu);
        covs.push(cov);
    }

    Ok(MomentTrajectory {
        times,
        means,
        covs,
        renormalizations: renorms,
    })
}
