//! Distributional check of the first-order asymptotics: the t-average of
//! m(z, t) against a smooth test function is compared with
//! -√(-z) Φ₀ - (1/(2√(-z))) ∫ φ dχ along rays Im(z) → ∞.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::SignedMeasure;
use crate::poly;
use crate::quad::{integrate_adaptive, GaussLegendre};
use crate::spectral::SpectralParameter;
use crate::weyl::m_shifted;

#[derive(Debug, Clone, Copy)]
struct Bump {
    center: f64,
    width: f64,
    height: f64,
}

impl Bump {
    fn eval(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.width;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        self.height * (1.0 - 1.0 / (1.0 - u * u)).exp()
    }

    fn eval_prime(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.width;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - u * u;
        self.eval(t) * (-2.0 * u / (d * d)) / self.width
    }
}

/// A smooth compactly supported test function: a sum of mollifier bumps.
/// φ vanishes with all derivatives at the support endpoints.
#[derive(Debug, Clone)]
pub struct TestFunction {
    bumps: Vec<Bump>,
    phi_0: f64,
}

/// The standard mollifier bump φ(t) = height·e^{1 - 1/(1-u²)} with
/// u = (t - center)/width, supported on [center-width, center+width] ⊂ (0, ∞).
/// Φ₀ = ∫ φ is computed by high-order quadrature.
pub fn bump(center: f64, width: f64, height: f64) -> Result<TestFunction> {
    if !width.is_finite() || width <= 0.0 {
        return Err(Error::Argument(format!("width must be positive, got {width}")));
    }
    if center - width <= 0.0 {
        return Err(Error::Domain(format!(
            "support [{}, {}] leaves (0, ∞)",
            center - width,
            center + width
        )));
    }
    let b = Bump {
        center,
        width,
        height,
    };
    let mut f = |t: f64| Complex64::new(b.eval(t), 0.0);
    let phi_0 = integrate_adaptive(&mut f, center - width, center + width, 1e-13)?.re;
    Ok(TestFunction {
        bumps: vec![b],
        phi_0,
    })
}

impl TestFunction {
    /// Pointwise sum of test functions (supports need not be disjoint).
    pub fn sum(parts: &[TestFunction]) -> Result<TestFunction> {
        if parts.is_empty() {
            return Err(Error::Argument("empty test-function sum".into()));
        }
        Ok(TestFunction {
            bumps: parts.iter().flat_map(|p| p.bumps.iter().copied()).collect(),
            phi_0: parts.iter().map(|p| p.phi_0).sum(),
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval(t)).sum()
    }

    pub fn eval_prime(&self, t: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval_prime(t)).sum()
    }

    /// ∫ φ dt.
    pub fn phi_0(&self) -> f64 {
        self.phi_0
    }

    /// Support hull [lo, hi].
    pub fn support(&self) -> (f64, f64) {
        let lo = self
            .bumps
            .iter()
            .map(|b| b.center - b.width)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .bumps
            .iter()
            .map(|b| b.center + b.width)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Center/width of the hull, for report columns.
    pub fn hull_center_width(&self) -> (f64, f64) {
        let (lo, hi) = self.support();
        (0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    /// Supports of the individual bumps.
    pub fn component_supports(&self) -> Vec<(f64, f64)> {
        self.bumps
            .iter()
            .map(|b| (b.center - b.width, b.center + b.width))
            .collect()
    }

    /// Whether φ is not identically zero on (a, b).
    pub fn overlaps(&self, a: f64, b: f64) -> bool {
        self.bumps
            .iter()
            .any(|bp| b > bp.center - bp.width && a < bp.center + bp.width)
    }
}

/// ∫ m(z, t) φ(t) dt over the support of φ.
///
/// Composite Gauss–Legendre panels are split at atom positions (the only
/// discontinuities of t ↦ m(z, t), a null set never hit by the open Gauss
/// nodes) and sized to resolve the 1/|k| variation scale of m(z, ·).
/// Each node evaluates m(z, t) truncated at x0; an inner estimate whose
/// error band is not small against its own value is propagated as an
/// inconclusive-point error with the node index.
pub fn lhs_integral(
    measure: &SignedMeasure,
    phi: &TestFunction,
    z: SpectralParameter,
    quad_points: usize,
    x0: f64,
    tol: f64,
) -> Result<Complex64> {
    if quad_points < 2 {
        return Err(Error::Argument("quad_points must be >= 2".into()));
    }
    if !z.im_positive() {
        return Err(Error::Domain("lhs_integral requires Im(z) > 0".into()));
    }
    let (lo, hi) = phi.support();
    if hi >= measure.domain_end() {
        return Err(Error::Domain(format!(
            "support of φ reaches past the domain end {}",
            measure.domain_end()
        )));
    }
    let cuts = quadrature_cuts(measure, phi, lo, hi);
    let rule = GaussLegendre::new(quad_points);
    let width_cap = (2.5 / z.k().norm()).min(0.25 * (hi - lo));
    let mut total = Complex64::new(0.0, 0.0);
    let mut node_index = 0usize;
    for gap in cuts.windows(2) {
        if !phi.overlaps(gap[0], gap[1]) {
            continue;
        }
        let nsub = ((gap[1] - gap[0]) / width_cap).ceil().max(1.0) as usize;
        for j in 0..nsub {
            let a = gap[0] + (gap[1] - gap[0]) * j as f64 / nsub as f64;
            let b = gap[0] + (gap[1] - gap[0]) * (j + 1) as f64 / nsub as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for i in 0..rule.len() {
                let (node, weight) = rule.node_weight(i);
                let t = mid + half * node;
                let w = phi.eval(t);
                let est = m_shifted(measure, t, z, effective_x0(measure, t, x0), tol)?;
                if est.error_radius > 0.01 * (1.0 + est.value.norm()) {
                    return Err(Error::Inconclusive {
                        node: node_index,
                        t,
                        error_radius: est.error_radius,
                    });
                }
                acc += weight * w * est.value;
                node_index += 1;
            }
            total += acc * half;
        }
    }
    Ok(total)
}

/// Panel boundaries for integrating against φ: atom positions, the edges of
/// every bump, and a geometric grading toward each edge (where the mollifier
/// is smooth but has rapidly growing derivatives).
fn quadrature_cuts(measure: &SignedMeasure, phi: &TestFunction, lo: f64, hi: f64) -> Vec<f64> {
    let mut cuts = vec![lo, hi];
    cuts.extend(
        measure
            .atoms()
            .iter()
            .map(|a| a.position)
            .filter(|&p| p > lo && p < hi),
    );
    for (blo, bhi) in phi.component_supports() {
        let span = bhi - blo;
        for edge in [blo, bhi] {
            if edge > lo && edge < hi {
                cuts.push(edge);
            }
        }
        for j in 2..=14 {
            let d = span * 0.5f64.powi(j);
            for t in [blo + d, bhi - d] {
                if t > lo && t < hi {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + a.abs()));
    cuts
}

/// Truncation length for the inner m(z, t): the global default clipped so
/// t + x0 stays inside the measure's domain.
fn effective_x0(measure: &SignedMeasure, t: f64, x0: f64) -> f64 {
    let b = measure.domain_end();
    if b.is_infinite() {
        x0
    } else {
        x0.min(0.999 * (b - t))
    }
}

/// Result of the closed-form prediction, with the reported interpolation
/// error of the φ-against-density integral.
#[derive(Debug, Clone, Copy)]
pub struct RhsPrediction {
    pub value: Complex64,
    /// ∫ φ dχ as evaluated.
    pub phi_chi: f64,
    /// Estimated error of the piecewise-cubic interpolation of φ.
    pub interpolation_error: f64,
}

/// -√(-z) Φ₀ - (1/(2√(-z))) ∫ φ dχ. Atoms contribute φ exactly; density
/// pieces integrate a piecewise-cubic Hermite interpolant of φ against the
/// polynomial density in closed form, and the h → h/2 difference is
/// reported as the interpolation error.
pub fn rhs_prediction(
    measure: &SignedMeasure,
    phi: &TestFunction,
    z: SpectralParameter,
) -> Result<RhsPrediction> {
    let coarse = phi_chi_integral(measure, phi, 256);
    let fine = phi_chi_integral(measure, phi, 512);
    let k = z.k();
    Ok(RhsPrediction {
        value: -k * phi.phi_0() - fine / (2.0 * k),
        phi_chi: fine,
        interpolation_error: (fine - coarse).abs(),
    })
}

/// ∫ φ dχ with φ replaced by its piecewise-cubic Hermite interpolant at
/// spacing (support width)/steps on each density piece.
fn phi_chi_integral(measure: &SignedMeasure, phi: &TestFunction, steps: usize) -> f64 {
    let (lo, hi) = phi.support();
    let mut total: f64 = measure
        .atoms()
        .iter()
        .map(|a| a.weight * phi.eval(a.position))
        .sum();
    let h = (hi - lo) / steps as f64;
    for piece in measure.density() {
        let a = piece.from.max(lo);
        let b = piece.to.min(hi);
        if a >= b {
            continue;
        }
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        for j in 0..n {
            let t0 = a + (b - a) * j as f64 / n as f64;
            let t1 = a + (b - a) * (j + 1) as f64 / n as f64;
            let d = t1 - t0;
            let (f0, f1) = (phi.eval(t0), phi.eval(t1));
            let (g0, g1) = (phi.eval_prime(t0), phi.eval_prime(t1));
            // Hermite cubic in u = t - t0
            let c2 = (3.0 * (f1 - f0) / d - 2.0 * g0 - g1) / d;
            let c3 = (2.0 * (f0 - f1) / d + g0 + g1) / (d * d);
            let hermite = [f0, g0, c2, c3];
            let rho_local = poly::shift(&piece.coeffs, t0);
            total += poly::integral(&poly::mul(&hermite, &rho_local), 0.0, d);
        }
    }
    total
}

/// One row of a distributional residual table.
#[derive(Debug, Clone, Copy)]
pub struct DistributionalRow {
    pub r: f64,
    pub theta: f64,
    pub z: Complex64,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    pub scaled_residual: f64,
    pub phi_center: f64,
    pub phi_width: f64,
}

/// Sweeps |lhs - rhs| along a ray, sorted by |z|.
pub fn distributional_residual_sweep(
    measure: &SignedMeasure,
    phi: &TestFunction,
    ray: &crate::asymptotics::RaySpec,
    quad_points: usize,
    x0: f64,
    tol: f64,
) -> Result<Vec<DistributionalRow>> {
    let (phi_center, phi_width) = phi.hull_center_width();
    ray.r_values
        .par_iter()
        .map(|&r| {
            let z = ray.z_at(r)?;
            let lhs = lhs_integral(measure, phi, z, quad_points, x0, tol)?;
            let rhs = rhs_prediction(measure, phi, z)?.value;
            let residual = (lhs - rhs).norm();
            Ok(DistributionalRow {
                r,
                theta: ray.theta,
                z: z.z(),
                lhs,
                rhs,
                residual,
                scaled_residual: r.sqrt() * residual,
                phi_center,
                phi_width,
            })
        })
        .collect()
}
