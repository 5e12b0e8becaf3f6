//! Weyl disks and m-function estimation with rigorous error bands.
//!
//! The disk at a truncation point x0 collects the quotients u'(0)/u(0) over
//! all solutions satisfying a real boundary condition at x0; its center and
//! radius come from Wronskians of the fundamental system against the
//! conjugated s. Every admissible m (for any boundary condition past x0)
//! lies inside the disk, so the truncated quotient plus twice the radius is
//! a rigorous enclosure of m(z).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fundamental::{solve_fundamental, FundamentalSystem};
use crate::measure::SignedMeasure;
use crate::spectral::SpectralParameter;

/// The Weyl disk at truncation point x0: center q(z, x0), radius r(z, x0).
#[derive(Debug, Clone, Copy)]
pub struct WeylDisk {
    pub z: SpectralParameter,
    pub x0: f64,
    pub center: Complex64,
    pub radius: f64,
    /// ln r(z, x0); stays finite when `radius` underflows to zero.
    pub log_radius: f64,
}

/// An m(z) estimate with a rigorous error radius.
#[derive(Debug, Clone, Copy)]
pub struct MEstimate {
    pub value: Complex64,
    pub error_radius: f64,
    pub x0: f64,
    pub z: SpectralParameter,
}

/// Normalized Wronskian combinations against s*: W(c, s*) and W(s, s*)
/// equal e^{2 Re(k) x} times the returned quantities.
fn disk_numerators(fs: &FundamentalSystem, i: usize) -> (Complex64, Complex64) {
    let k = fs.z().k();
    let ct = fs.c_tilde(i);
    let cpt = fs.c_prime_tilde(i);
    let s_over_k = fs.s_tilde(i) / k;
    let spt = fs.s_prime_tilde(i);
    let nc = ct * spt.conj() - cpt * s_over_k.conj();
    let ns = s_over_k * spt.conj() - spt * s_over_k.conj();
    (nc, ns)
}

/// Center and radius of the Weyl disk at a grid point x0 of the system.
///
/// The conjugated solution s* is obtained by conjugating the stored values
/// (the coefficients of τ are real), and the e^{2 Re(k) x} factors cancel in
/// the center, so the computation is stable at any |z|.
pub fn weyl_disk(fs: &FundamentalSystem, x0: f64) -> Result<WeylDisk> {
    if x0.is_nan() || x0 <= 0.0 {
        return Err(Error::Domain(format!("x0 = {x0} must be positive")));
    }
    if fs.z().z().im == 0.0 {
        return Err(Error::Domain(
            "Weyl disk requires Im(z) != 0 (degenerate for real z)".into(),
        ));
    }
    let i = fs.index_of(x0)?;
    let (nc, ns) = disk_numerators(fs, i);
    if ns.norm() == 0.0 {
        return Err(Error::DegenerateDisk { x0 });
    }
    let scale = 2.0 * fs.z().k().re * x0;
    let log_radius = -scale - ns.norm().ln();
    Ok(WeylDisk {
        z: fs.z(),
        x0,
        center: -nc / ns,
        radius: log_radius.exp(),
        log_radius,
    })
}

/// The truncated m-estimate at x0:
///
///   value = -(c k + c') / (s' + k s)
///         = -k (1 + k⁻¹ ∫_{[0,x0)} c̃ dχ) / (1 + k⁻¹ ∫_{[0,x0)} s̃ dχ),
///
/// where the second (normalized) form is what is evaluated; the true m of
/// the problem lies within error_radius = 2 r(z, x0) of it.
pub fn m_truncated(fs: &FundamentalSystem, x0: f64) -> Result<MEstimate> {
    if !fs.z().im_positive() {
        return Err(Error::Domain("m_truncated requires Im(z) > 0".into()));
    }
    let disk = weyl_disk(fs, x0)?;
    let i = fs.index_of(x0)?;
    let k = fs.z().k();
    let denom = 1.0 + fs.integral_s_tilde(i) / k;
    if denom.norm() == 0.0 {
        return Err(Error::DegenerateDisk { x0 });
    }
    let value = -k * (1.0 + fs.integral_c_tilde(i) / k) / denom;
    Ok(MEstimate {
        value,
        error_radius: 2.0 * disk.radius,
        x0,
        z: fs.z(),
    })
}

/// The raw cosh/sinh-quotient form of the truncated estimate. Kept as a
/// debug cross-check; it overflows once Re(k)·x0 approaches 709, so the
/// normalized form in [`m_truncated`] is the production path.
pub fn m_truncated_raw(fs: &FundamentalSystem, x0: f64) -> Result<Complex64> {
    let i = fs.index_of(x0)?;
    let k = fs.z().k();
    let denom = fs.s_prime(i) + k * fs.s(i);
    Ok(-(fs.c(i) * k + fs.c_prime(i)) / denom)
}

/// Exact half-line m(z) for a purely atomic, compactly supported measure.
///
/// Beyond the support the decaying solution is u = e^{-kx}, so (u, u') is
/// seeded at some L past the last atom and propagated backward through the
/// free intervals and atom jumps, on the e^{+kx}-scaled vector so that no
/// quantity grows with |z|. Returns m(z) = u'(0)/u(0) with the left-limit
/// derivative at 0 (an atom at 0 is crossed).
pub fn exact_m_compact(measure: &SignedMeasure, z: SpectralParameter) -> Result<Complex64> {
    if !measure.is_purely_atomic() {
        return Err(Error::UnsupportedMeasure(
            "exact_m_compact requires a purely atomic measure".into(),
        ));
    }
    if !measure.domain_end().is_infinite() {
        return Err(Error::UnsupportedMeasure(
            "exact_m_compact requires the half-line problem (domain_end = inf)".into(),
        ));
    }
    if !z.im_positive() {
        return Err(Error::Domain("exact_m_compact requires Im(z) > 0".into()));
    }
    let k = z.k();
    let a = 2.0 * k;
    // Scaled state w = e^{+kx}(u, u'); at any L past the support w = (1, -k),
    // and the backward step across a gap Δ is
    //   w1 ← (1+E)/2 w1 - (1-E)/(2k) w2,  w2 ← -k(1-E)/2 w1 + (1+E)/2 w2
    // with E = e^{-2kΔ}. Crossing an atom of weight α: w2 ← w2 - α w1.
    let mut w1 = Complex64::new(1.0, 0.0);
    let mut w2 = -k;
    let mut pos = measure.support_upper_bound().unwrap_or(0.0);
    let back_step = |w1: &mut Complex64, w2: &mut Complex64, delta: f64| {
        let e = (-a * delta).exp();
        let p = 0.5 * (1.0 + e);
        let q = 0.5 * (1.0 - e);
        let n1 = p * *w1 - q / k * *w2;
        let n2 = -k * q * *w1 + p * *w2;
        *w1 = n1;
        *w2 = n2;
    };
    for atom in measure.atoms().iter().rev() {
        if pos > atom.position {
            back_step(&mut w1, &mut w2, pos - atom.position);
            pos = atom.position;
        }
        w2 -= atom.weight * w1;
    }
    if pos > 0.0 {
        back_step(&mut w1, &mut w2, pos);
    }
    if w1.norm() == 0.0 {
        return Err(Error::PoleOfM { z: z.z() });
    }
    Ok(w2 / w1)
}

/// m(z, t): the m-function of the operator restricted to (t, b) with a
/// Dirichlet condition at t, estimated through [`m_truncated`] at x0 (or
/// computed exactly when the shifted measure is atomic on the half line).
pub fn m_shifted(
    measure: &SignedMeasure,
    t: f64,
    z: SpectralParameter,
    x0: f64,
    tol: f64,
) -> Result<MEstimate> {
    let shifted = measure.shift_restrict(t)?;
    if shifted.is_purely_atomic() && shifted.domain_end().is_infinite() {
        let value = exact_m_compact(&shifted, z)?;
        return Ok(MEstimate {
            value,
            error_radius: 0.0,
            x0,
            z,
        });
    }
    let fs = solve_fundamental(&shifted, z, x0, tol)?;
    m_truncated(&fs, x0)
}
