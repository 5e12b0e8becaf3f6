//! Spectral parameter z and its square root k = √(-z).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A spectral parameter z together with k = √(-z) on the standard branch.
///
/// The branch cut runs along (-∞, 0) and Re(k) ≥ 0, so k² = -z and solutions
/// of the free equation behave like e^(±kx). For Im(z) > 0 this forces
/// Im(k) < 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParameter {
    z: Complex64,
    k: Complex64,
}

impl SpectralParameter {
    /// Builds the parameter for z with Im(z) ≠ 0, or real negative z
    /// (the latter is useful for diagnostics against hyperbolic closed forms).
    pub fn new(z: Complex64) -> Result<Self> {
        if z.re == 0.0 && z.im == 0.0 {
            return Err(Error::Argument("spectral parameter z must be nonzero".into()));
        }
        if z.im == 0.0 && z.re >= 0.0 {
            return Err(Error::Argument(format!(
                "spectral parameter z = {z} must have Im(z) != 0 or be real negative"
            )));
        }
        let k = (-z).sqrt();
        debug_assert!(k.re >= 0.0);
        Ok(Self { z, k })
    }

    /// Convenience constructor for z = iR on the imaginary axis.
    pub fn on_imaginary_axis(r: f64) -> Result<Self> {
        Self::new(Complex64::new(0.0, r))
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    /// k = √(-z) with Re(k) ≥ 0.
    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn im_positive(&self) -> bool {
        self.z.im > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn branch_is_standard() {
        // z = -1 lies left of the cut of -z, so k = 1 exactly.
        let p = SpectralParameter::new(Complex64::new(-1.0, 0.0)).unwrap();
        assert_relative_eq!(p.k().re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.k().im, 0.0, epsilon = 1e-15);

        // z = i: k = e^(-iπ/4), Re k > 0, Im k < 0.
        let p = SpectralParameter::new(Complex64::new(0.0, 1.0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(p.k().re, s, epsilon = 1e-15);
        assert_relative_eq!(p.k().im, -s, epsilon = 1e-15);
    }

    #[test]
    fn k_squares_back_to_minus_z() {
        for &(re, im) in &[(0.0, 1.0), (3.0, 4.0), (-2.0, 0.5), (0.0, 1e6), (-5.0, -0.1)] {
            let z = Complex64::new(re, im);
            let p = SpectralParameter::new(z).unwrap();
            let k2 = p.k() * p.k();
            assert_relative_eq!(k2.re, -z.re, max_relative = 1e-14);
            assert_relative_eq!(k2.im, -z.im, max_relative = 1e-14);
            assert!(p.k().re >= 0.0);
        }
    }

    #[test]
    fn upper_half_plane_gives_negative_im_k() {
        for &im in &[0.5, 1.0, 100.0, 1e6] {
            for &re in &[-3.0, 0.0, 7.0] {
                let p = SpectralParameter::new(Complex64::new(re, im)).unwrap();
                assert!(p.k().im < 0.0, "Im k >= 0 for z = {re}+{im}i");
            }
        }
    }

    #[test]
    fn rejects_real_nonnegative_and_zero() {
        assert!(SpectralParameter::new(Complex64::new(0.0, 0.0)).is_err());
        assert!(SpectralParameter::new(Complex64::new(2.0, 0.0)).is_err());
        assert!(SpectralParameter::new(Complex64::new(-2.0, 0.0)).is_ok());
    }
}
