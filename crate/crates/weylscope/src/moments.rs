//! Exact moments ∫_0^t e^{-a(t-u)} u^j du for Re(a) ≥ 0.
//!
//! These are the building blocks for every closed-form integral of
//! (polynomial) × (decaying exponential) in the crate. The kernel is written
//! with the exponent decaying toward the left endpoint so that all
//! intermediate quantities stay bounded for arbitrarily large |a|.

use num_complex::Complex64;

/// Returns G_j = ∫_0^t e^{-a(t-u)} u^j du for j = 0..=deg.
///
/// Requires Re(a) ≥ 0 and t ≥ 0. Uses a Taylor series in `a·t` when |a·t| is
/// small (no cancellation) and the integration-by-parts recurrence otherwise
/// (contractive for the |a·t| where it is used).
pub fn decay_moments(a: Complex64, t: f64, deg: usize) -> Vec<Complex64> {
    debug_assert!(a.re >= -1e-12, "decay_moments needs Re(a) >= 0, got {a}");
    debug_assert!(t >= 0.0);
    let mut out = vec![Complex64::new(0.0, 0.0); deg + 1];
    if t == 0.0 {
        return out;
    }
    let at = a * t;
    if at.norm() <= 4.0 {
        // G_j = e^{-at} Σ_l a^l t^{j+l+1} / (l! (j+l+1))
        let damp = (-at).exp();
        for (j, slot) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(t.powi(j as i32 + 1), 0.0);
            let mut sum = term / (j as f64 + 1.0);
            for l in 1..80 {
                term *= at / l as f64;
                let add = term / (j + l + 1) as f64;
                sum += add;
                if add.norm() <= 1e-20 * sum.norm().max(t.powi(j as i32 + 1)) {
                    break;
                }
            }
            *slot = damp * sum;
        }
    } else {
        let damp = (-at).exp();
        out[0] = (1.0 - damp) / a;
        let mut tj = 1.0;
        for j in 1..=deg {
            tj *= t;
            out[j] = (tj - j as f64 * out[j - 1]) / a;
        }
    }
    out
}

/// ∫_0^t e^{-a(t-u)} p(u) du for a real-coefficient polynomial p.
pub fn decay_poly(a: Complex64, t: f64, p: &[f64]) -> Complex64 {
    if p.is_empty() || t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let g = decay_moments(a, t, p.len() - 1);
    p.iter()
        .zip(&g)
        .map(|(&c, &m)| c * m)
        .sum()
}

/// ∫_0^t e^{-a u} p(u) du, i.e. the exponential decaying toward the right.
///
/// Computed from `decay_poly` on the reflected polynomial p(t - v).
pub fn front_decay_poly(a: Complex64, t: f64, p: &[f64]) -> Complex64 {
    if p.is_empty() || t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    // substitute u = t - v: ∫_0^t e^{-a(t-v)} p(t-v) dv
    let reflected = crate::poly::scale(&crate::poly::shift(p, t), -1.0);
    decay_poly(a, t, &reflected)
}
