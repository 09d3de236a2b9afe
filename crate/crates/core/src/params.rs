//! Time-dependent parameter functions and the derived scale functions.
//!
//! Everything is dimensionless (`hbar = 1`). A [`ParamFamily`] models one
//! scalar function of time together with its first two derivatives; a
//! [`SystemParams`] bundles the five functions of the coupled-oscillator
//! system (two masses, two frequencies, one coupling) plus the time
//! window and the reference-mass convention. [`ScaleFunctions`] exposes
//! the squeeze scales `u_j(t)` and their derivatives, which every
//! transformed-frame Hamiltonian needs.

use crate::error::{CoreError, Result};

/// Number of grid points used to validate positivity/finiteness on the
/// configured window.
const VALIDATION_SAMPLES: usize = 1001;

/// Base finite-difference step for tabulated derivatives, scaled by
/// `max(1, |t|)`.
const FD_STEP: f64 = 1e-5;

/// One scalar function of time, with exact derivatives for the analytic
/// variants and central-difference derivatives for tabulated data.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamFamily {
    /// `f(t) = c`.
    Constant(f64),
    /// `f(t) = c0 · exp(rate · t)`.
    Exponential { c0: f64, rate: f64 },
    /// `f(t) = c0 · (1 + a t)^n`. Requires `1 + a t > 0` when `n` is not
    /// a nonnegative integer.
    PowerLaw { c0: f64, a: f64, n: f64 },
    /// `f(t) = c0 + amplitude · cos(nu t + phase)`.
    Harmonic {
        c0: f64,
        amplitude: f64,
        nu: f64,
        phase: f64,
    },
    /// Samples `(t, value)` with strictly increasing `t`; at least five
    /// samples. Values are interpolated with a local cubic; derivatives
    /// use central differences of the interpolant.
    Tabulated(Vec<(f64, f64)>),
}

impl ParamFamily {
    /// Evaluate the function at `t`.
    ///
    /// Analytic variants are total in `t`; tabulated data errors outside
    /// its sample range.
    pub fn value(&self, t: f64) -> Result<f64> {
        match self {
            ParamFamily::Constant(c) => Ok(*c),
            ParamFamily::Exponential { c0, rate } => Ok(c0 * (rate * t).exp()),
            ParamFamily::PowerLaw { c0, a, n } => Ok(c0 * (1.0 + a * t).powf(*n)),
            ParamFamily::Harmonic {
                c0,
                amplitude,
                nu,
                phase,
            } => Ok(c0 + amplitude * (nu * t + phase).cos()),
            ParamFamily::Tabulated(samples) => tab_value(samples, t),
        }
    }

    /// Evaluate `(f, f', f'')` at `t`.
    pub fn derivatives(&self, t: f64) -> Result<(f64, f64, f64)> {
        match self {
            ParamFamily::Constant(c) => Ok((*c, 0.0, 0.0)),
            ParamFamily::Exponential { c0, rate } => {
                let f = c0 * (rate * t).exp();
                Ok((f, rate * f, rate * rate * f))
            }
            ParamFamily::PowerLaw { c0, a, n } => {
                let base = 1.0 + a * t;
                let f = c0 * base.powf(*n);
                let d1 = c0 * n * a * base.powf(n - 1.0);
                let d2 = c0 * n * (n - 1.0) * a * a * base.powf(n - 2.0);
                Ok((f, d1, d2))
            }
            ParamFamily::Harmonic {
                c0,
                amplitude,
                nu,
                phase,
            } => {
                let arg = nu * t + phase;
                Ok((
                    c0 + amplitude * arg.cos(),
                    -amplitude * nu * arg.sin(),
                    -amplitude * nu * nu * arg.cos(),
                ))
            }
            ParamFamily::Tabulated(samples) => tab_derivatives(samples, t),
        }
    }

    /// True for the tabulated variant.
    pub fn is_tabulated(&self) -> bool {
        matches!(self, ParamFamily::Tabulated(_))
    }
}

fn tab_check(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 5 {
        return Err(CoreError::Invalid(format!(
            "tabulated family needs at least 5 samples, got {}",
            samples.len()
        )));
    }
    if !samples.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(CoreError::Invalid(
            "tabulated sample times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Pick the 4-sample Lagrange window around `t`.
fn tab_window(samples: &[(f64, f64)], t: f64) -> Result<&[(f64, f64)]> {
    tab_check(samples)?;
    let lo = samples[0].0;
    let hi = samples[samples.len() - 1].0;
    if t < lo || t > hi {
        return Err(CoreError::OutOfRange { t, lo, hi });
    }
    // first index with sample time > t, clamped so the 4-point window fits
    let bracket = samples.partition_point(|&(ts, _)| ts <= t);
    let start = bracket.saturating_sub(2).min(samples.len() - 4);
    Ok(&samples[start..start + 4])
}

fn lagrange4(window: &[(f64, f64)], t: f64) -> f64 {
    let mut acc = 0.0;
    for (i, &(ti, vi)) in window.iter().enumerate() {
        let mut weight = vi;
        for (j, &(tj, _)) in window.iter().enumerate() {
            if i != j {
                weight *= (t - tj) / (ti - tj);
            }
        }
        acc += weight;
    }
    acc
}

/// Local cubic (4-point Lagrange) interpolation.
fn tab_value(samples: &[(f64, f64)], t: f64) -> Result<f64> {
    Ok(lagrange4(tab_window(samples, t)?, t))
}

/// Central differences of the local interpolant. The 4-sample window is
/// frozen at `t` so the differenced function is one smooth cubic, not a
/// piecewise curve with breakpoints inside the stencil.
fn tab_derivatives(samples: &[(f64, f64)], t: f64) -> Result<(f64, f64, f64)> {
    let window = tab_window(samples, t)?;
    let h = FD_STEP * t.abs().max(1.0);
    let f0 = lagrange4(window, t);
    let fm = lagrange4(window, t - h);
    let fp = lagrange4(window, t + h);
    Ok((
        f0,
        (fp - fm) / (2.0 * h),
        (fp - 2.0 * f0 + fm) / (h * h),
    ))
}

/// Choice of the free reference mass in the squeeze scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMassMode {
    /// Reference mass fixed to one: `u_j = -½ ln m_j`.
    Unity,
    /// Reference mass `√(m1 m2)`: `u_j = ½ ln(√(m1 m2)/m_j)`.
    GeometricMean,
}

/// A squeeze scale and its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub u: f64,
    pub du: f64,
    pub ddu: f64,
}

impl Scale {
    pub const ZERO: Scale = Scale {
        u: 0.0,
        du: 0.0,
        ddu: 0.0,
    };
}

/// The five parameter functions of the coupled system, the time window
/// on which they are trusted, and the reference-mass convention.
///
/// Construction validates, by dense sampling, that both masses stay
/// strictly positive and that every family evaluates finite on the
/// window.
#[derive(Debug, Clone)]
pub struct SystemParams {
    m1: ParamFamily,
    m2: ParamFamily,
    w1: ParamFamily,
    w2: ParamFamily,
    k: ParamFamily,
    window: (f64, f64),
    ref_mass_mode: RefMassMode,
}

impl SystemParams {
    pub fn new(
        m1: ParamFamily,
        m2: ParamFamily,
        w1: ParamFamily,
        w2: ParamFamily,
        k: ParamFamily,
        window: (f64, f64),
        ref_mass_mode: RefMassMode,
    ) -> Result<Self> {
        if !(window.1 > window.0) {
            return Err(CoreError::Invalid(format!(
                "window must satisfy t1 > t0, got ({}, {})",
                window.0, window.1
            )));
        }
        let p = SystemParams {
            m1,
            m2,
            w1,
            w2,
            k,
            window,
            ref_mass_mode,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let (t0, t1) = self.window;
        let span = t1 - t0;
        let mut k_negative = false;
        for i in 0..VALIDATION_SAMPLES {
            let t = t0 + span * (i as f64) / ((VALIDATION_SAMPLES - 1) as f64);
            for (index, m) in [&self.m1, &self.m2].into_iter().enumerate() {
                let v = m.value(t)?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CoreError::NonpositiveMass {
                        index: index + 1,
                        t,
                        value: v,
                    });
                }
            }
            for f in [&self.w1, &self.w2, &self.k] {
                let v = f.value(t)?;
                if !v.is_finite() {
                    return Err(CoreError::Numerical {
                        t,
                        what: format!("parameter family evaluated to {v}"),
                    });
                }
            }
            k_negative |= self.k.value(t)? < 0.0;
        }
        if k_negative {
            log::warn!("coupling k(t) is negative somewhere on the window; proceeding");
        }
        Ok(())
    }

    pub fn m(&self, j: usize) -> &ParamFamily {
        match j {
            0 => &self.m1,
            1 => &self.m2,
            _ => panic!("oscillator index must be 0 or 1"),
        }
    }

    pub fn w(&self, j: usize) -> &ParamFamily {
        match j {
            0 => &self.w1,
            1 => &self.w2,
            _ => panic!("oscillator index must be 0 or 1"),
        }
    }

    pub fn k(&self) -> &ParamFamily {
        &self.k
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn ref_mass_mode(&self) -> RefMassMode {
        self.ref_mass_mode
    }

    /// Squeeze scale `(u_j, u̇_j, ü_j)` for oscillator `j` in the
    /// configured reference-mass mode.
    ///
    /// Unity mode: `u = -½ ln m_j`, so `u̇ = -ṁ/(2m)` and
    /// `ü = -m̈/(2m) + ṁ²/(2m²)`. Geometric-mean mode replaces `m_j` by
    /// `m_j/√(m1 m2)`.
    pub fn scale_from_mass(&self, j: usize, t: f64) -> Result<Scale> {
        self.scale_with_mode(j, t, self.ref_mass_mode)
    }

    /// Same as [`scale_from_mass`](Self::scale_from_mass) with an explicit mode.
    pub fn scale_with_mode(&self, j: usize, t: f64, mode: RefMassMode) -> Result<Scale> {
        assert!(j < 2, "oscillator index must be 0 or 1");
        match mode {
            RefMassMode::Unity => {
                let lj = log_derivatives(self.m(j), j, t)?;
                Ok(Scale {
                    u: -0.5 * lj.0,
                    du: -0.5 * lj.1,
                    ddu: -0.5 * lj.2,
                })
            }
            RefMassMode::GeometricMean => {
                // u_j = ¼ ln m_1 + ¼ ln m_2 − ½ ln m_j
                let l1 = log_derivatives(&self.m1, 0, t)?;
                let l2 = log_derivatives(&self.m2, 1, t)?;
                let (own, other) = if j == 0 { (l1, l2) } else { (l2, l1) };
                Ok(Scale {
                    u: 0.25 * (other.0 - own.0),
                    du: 0.25 * (other.1 - own.1),
                    ddu: 0.25 * (other.2 - own.2),
                })
            }
        }
    }
}

/// `(ln f, d/dt ln f, d²/dt² ln f)` with positivity enforced.
fn log_derivatives(f: &ParamFamily, index: usize, t: f64) -> Result<(f64, f64, f64)> {
    let (v, d1, d2) = f.derivatives(t)?;
    if !(v > 0.0) {
        return Err(CoreError::NonpositiveMass {
            index: index + 1,
            t,
            value: v,
        });
    }
    let r = d1 / v;
    Ok((v.ln(), r, d2 / v - r * r))
}

/// Bundled evaluator for the squeeze scales of both oscillators.
#[derive(Debug, Clone)]
pub struct ScaleFunctions<'a> {
    params: &'a SystemParams,
    mode: RefMassMode,
}

impl<'a> ScaleFunctions<'a> {
    /// Scales in the system's configured reference-mass mode.
    pub fn new(params: &'a SystemParams) -> Self {
        ScaleFunctions {
            params,
            mode: params.ref_mass_mode(),
        }
    }

    /// Scales with an explicit reference-mass mode.
    pub fn with_mode(params: &'a SystemParams, mode: RefMassMode) -> Self {
        ScaleFunctions { params, mode }
    }

    pub fn mode(&self) -> RefMassMode {
        self.mode
    }

    /// `(u_j, u̇_j, ü_j)` for oscillator `j`.
    pub fn eval(&self, j: usize, t: f64) -> Result<Scale> {
        self.params.scale_with_mode(j, t, self.mode)
    }

    /// Scales of both oscillators at `t`.
    pub fn eval_both(&self, t: f64) -> Result<[Scale; 2]> {
        Ok([self.eval(0, t)?, self.eval(1, t)?])
    }
}
