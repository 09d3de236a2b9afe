//! Phase-space ordering conventions shared by every module.
//!
//! The canonical coordinate vector is `z = (x1, x2, p1, p2)` and the
//! symplectic form in that ordering is
//!
//! ```text
//! J = |  0   I2 |
//!     | -I2  0  |
//! ```

use nalgebra::Matrix4;

/// Index of `x1` in the phase-space vector.
pub const IX1: usize = 0;
/// Index of `x2`.
pub const IX2: usize = 1;
/// Index of `p1`.
pub const IP1: usize = 2;
/// Index of `p2`.
pub const IP2: usize = 3;

/// Phase-space dimension (two modes).
pub const DIM: usize = 4;

/// The symplectic form `J` in the `(x1, x2, p1, p2)` ordering.
#[rustfmt::skip]
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
         0.0,  0.0, 1.0, 0.0,
         0.0,  0.0, 0.0, 1.0,
        -1.0,  0.0, 0.0, 0.0,
         0.0, -1.0, 0.0, 0.0,
    )
}

/// Position index of oscillator `j` (0 or 1).
pub fn xi(j: usize) -> usize {
    debug_assert!(j < 2);
    j
}

/// Momentum index of oscillator `j` (0 or 1).
pub fn pi(j: usize) -> usize {
    debug_assert!(j < 2);
    2 + j
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_squares_to_minus_identity() {
        let j = symplectic_form();
        assert_eq!(j * j, -Matrix4::identity());
    }

    #[test]
    fn index_helpers_match_constants() {
        assert_eq!((xi(0), xi(1), pi(0), pi(1)), (IX1, IX2, IP1, IP2));
    }
}
