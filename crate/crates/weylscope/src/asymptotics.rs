//! High-energy expansions of the fundamental system and of m(z), plus the
//! residual sweeps that measure how fast computed truth approaches them.
//!
//! "Im(z) → ∞" is probed along rays z = R e^{iθ}; o(·) statements are tested
//! as monotone decay of suitably scaled residuals, since a finite computation
//! cannot verify a limit.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fundamental::solve_fundamental;
use crate::measure::SignedMeasure;
use crate::poly;
use crate::quad::integrate_adaptive;
use crate::spectral::SpectralParameter;
use crate::weyl::{exact_m_compact, m_truncated};

/// The leading expansion data of m(z) at (z, x0).
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticExpansion {
    pub z: SpectralParameter,
    pub x0: f64,
    /// -√(-z).
    pub leading: Complex64,
    /// I₁ = ∫_{[0,x0)} e^{-2ky} dχ(y).
    pub i1: Complex64,
    /// The iterated correction of the second-order form (0 when absent).
    pub second_order: Complex64,
    /// Limits of the error functions E₁..E₄ (E₁=E₂ and E₃=E₄ pairwise).
    pub e_limits: [f64; 4],
}

/// First-order expansion: m(z) ≈ -√(-z) - ∫_{[0,x0)} e^{-2√(-z)y} dχ(y),
/// with the Stieltjes integral exact (atoms summed, density in closed form).
pub fn first_order_m(measure: &SignedMeasure, z: SpectralParameter, x0: f64) -> Result<Complex64> {
    check_x0(measure, x0)?;
    let k = z.k();
    Ok(-k - measure.exp_integral_left(2.0 * k, x0))
}

fn check_x0(measure: &SignedMeasure, x0: f64) -> Result<()> {
    if x0.is_nan() || x0 <= 0.0 || x0 >= measure.domain_end() {
        return Err(Error::Domain(format!(
            "x0 = {x0} outside (0, {})",
            measure.domain_end()
        )));
    }
    Ok(())
}

/// The iterated correction term of the second-order expansion:
/// (1/2k) ∫_{[0,x0)} (1 - e^{-2k(x0-y)}) (∫_{[0,y)} e^{-2kr} dχ(r)) dχ(y).
pub fn second_order_correction(
    measure: &SignedMeasure,
    z: SpectralParameter,
    x0: f64,
) -> Result<Complex64> {
    check_x0(measure, x0)?;
    let k = z.k();
    let a = 2.0 * k;
    let mut outer = Complex64::new(0.0, 0.0);
    for atom in measure.atoms().iter().take_while(|at| at.position < x0) {
        let inner = measure.exp_integral_left(a, atom.position);
        outer += atom.weight * (1.0 - (-a * (x0 - atom.position)).exp()) * inner;
    }
    for piece in measure.density().iter().filter(|p| p.from < x0) {
        let hi = piece.to.min(x0);
        // smooth between atoms; split panels there for the quadrature
        let mut cuts = vec![piece.from];
        cuts.extend(
            measure
                .atoms()
                .iter()
                .map(|at| at.position)
                .filter(|&p| p > piece.from && p < hi),
        );
        cuts.push(hi);
        for w in cuts.windows(2) {
            let coeffs = piece.coeffs.clone();
            let mut f = |y: f64| {
                let inner = measure.exp_integral_left(a, y);
                (1.0 - (-a * (x0 - y)).exp()) * inner * poly::eval(&coeffs, y)
            };
            outer += integrate_adaptive(&mut f, w[0], w[1], 1e-13)?;
        }
    }
    Ok(outer / a)
}

/// Second-order expansion of m(z): the first-order form minus the iterated
/// correction. Claims accuracy o(k⁻¹) only; the further term of the iterated
/// expansion involving an undetermined kernel is deliberately not modeled.
pub fn second_order_m(
    measure: &SignedMeasure,
    z: SpectralParameter,
    x0: f64,
) -> Result<Complex64> {
    Ok(first_order_m(measure, z, x0)? - second_order_correction(measure, z, x0)?)
}

/// The limit constants of the error functions:
/// E₁,E₂ → (1/8) ∫_{(0,x)} (χ(y) + χ({0})) dχ(y) and
/// E₃,E₄ → (1/8) ∫_{(0,x)} (χ(y) - χ({0})) dχ(y),
/// with the outer integral over the open interval (0, x) — an atom at the
/// origin is excluded from the outer integration but kept inside χ(y).
///
/// Both integrals are evaluated exactly: atom terms use the left-continuous
/// distribution function, density terms integrate (piecewise polynomial) ×
/// (piecewise polynomial) in closed form.
pub fn e_limit_constants(measure: &SignedMeasure, x: f64) -> Result<(f64, f64)> {
    check_x0(measure, x)?;
    let chi0 = measure.atom_at(0.0)?;
    let mut base = 0.0; // ∫_{(0,x)} χ(y) dχ(y)
    let mut mass = 0.0; // χ((0,x)) = ∫_{(0,x)} dχ(y)
    for atom in measure.atoms() {
        if atom.position > 0.0 && atom.position < x {
            base += atom.weight * measure.cdf(atom.position)?;
            mass += atom.weight;
        }
    }
    for piece in measure.density().iter().filter(|p| p.from < x) {
        let hi = piece.to.min(x);
        let mut cuts = vec![piece.from];
        cuts.extend(
            measure
                .atoms()
                .iter()
                .map(|at| at.position)
                .filter(|&p| p > piece.from && p < hi),
        );
        cuts.push(hi);
        let anti = poly::antiderivative(&piece.coeffs);
        for w in cuts.windows(2) {
            // on (u, v): χ(y) = [atoms ≤ u] + [density prefix to u] + ∫_u^y ρ
            let const_part = measure.cdf(w[0])? + measure.atom_at(w[0])?;
            let mut chi_poly = anti.clone();
            chi_poly[0] += const_part - poly::eval(&anti, w[0]);
            base += poly::integral(&poly::mul(&chi_poly, &piece.coeffs), w[0], w[1]);
            mass += poly::integral(&piece.coeffs, w[0], w[1]);
        }
    }
    let e12 = (base + chi0 * mass) / 8.0;
    let e34 = (base - chi0 * mass) / 8.0;
    Ok((e12, e34))
}

/// Normalized leading terms shared by the four expansions.
struct LemmaTerms {
    e: Complex64,
    chi_x: f64,
    i1: Complex64,
    j1: Complex64,
    e12: f64,
    e34: f64,
}

fn lemma_terms(measure: &SignedMeasure, z: SpectralParameter, x: f64) -> Result<LemmaTerms> {
    let a = 2.0 * z.k();
    Ok(LemmaTerms {
        e: (-a * x).exp(),
        chi_x: measure.cdf(x)?,
        i1: measure.exp_integral_left(a, x),
        j1: measure.exp_integral_right(a, x),
        e12: e_limit_constants(measure, x)?.0,
        e34: e_limit_constants(measure, x)?.1,
    })
}

/// The four expansions of the fundamental system with the error functions
/// replaced by their limit constants, in normalized form
/// (e^{-kx}c, e^{-kx}c', k e^{-kx}s, e^{-kx}s').
pub fn lemma_expansions_normalized(
    measure: &SignedMeasure,
    z: SpectralParameter,
    x: f64,
) -> Result<(Complex64, Complex64, Complex64, Complex64)> {
    check_x0(measure, x)?;
    let t = lemma_terms(measure, z, x)?;
    let k = z.k();
    let zz = z.z();
    let c = 0.5 * (1.0 + t.e)
        + t.chi_x * (1.0 - t.e) / (4.0 * k)
        + (t.i1 - t.j1) / (4.0 * k)
        - t.e12 / zz;
    let cp = k * 0.5 * (1.0 - t.e)
        + t.chi_x * (1.0 + t.e) / 4.0
        + (t.i1 + t.j1) / 4.0
        + t.e12 / k;
    let s = k
        * ((1.0 - t.e) / (2.0 * k) - t.chi_x * (1.0 + t.e) / (4.0 * zz)
            + (t.i1 + t.j1) / (4.0 * zz)
            + t.e34 / (k * k * k));
    let sp = 0.5 * (1.0 + t.e) + t.chi_x * (1.0 - t.e) / (4.0 * k)
        - (t.i1 - t.j1) / (4.0 * k)
        - t.e34 / zz;
    Ok((c, cp, s, sp))
}

/// Raw (c, c', s, s') expansions; overflow past Re(k)·x ≈ 709 — use the
/// normalized variant for large |z| comparisons.
pub fn lemma_expansions(
    measure: &SignedMeasure,
    z: SpectralParameter,
    x: f64,
) -> Result<(Complex64, Complex64, Complex64, Complex64)> {
    let (c, cp, s, sp) = lemma_expansions_normalized(measure, z, x)?;
    let g = (z.k() * x).exp();
    Ok((g * c, g * cp, g * s / z.k(), g * sp))
}

/// Which error function to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFunctionIndex {
    E1,
    E2,
    E3,
    E4,
}

impl ErrorFunctionIndex {
    pub fn from_number(j: usize) -> Result<Self> {
        match j {
            1 => Ok(Self::E1),
            2 => Ok(Self::E2),
            3 => Ok(Self::E3),
            4 => Ok(Self::E4),
            _ => Err(Error::Argument(format!("error function index {j} not in 1..=4"))),
        }
    }
}

/// Solves the expansion representations for the error function E_j at finite
/// z, using the computed fundamental system. All algebra happens on the
/// normalized solutions, which is the stable equivalent of dividing by
/// e^{kx}.
pub fn extract_error_function(
    measure: &SignedMeasure,
    z: SpectralParameter,
    x: f64,
    which: ErrorFunctionIndex,
) -> Result<Complex64> {
    check_x0(measure, x)?;
    let fs = solve_fundamental(measure, z, x, 1e-12)?;
    let i = fs.index_of(x)?;
    let t = lemma_terms(measure, z, x)?;
    let k = z.k();
    let zz = z.z();
    let value = match which {
        ErrorFunctionIndex::E1 => {
            let lead = 0.5 * (1.0 + t.e)
                + t.chi_x * (1.0 - t.e) / (4.0 * k)
                + (t.i1 - t.j1) / (4.0 * k);
            zz * (lead - fs.c_tilde(i))
        }
        ErrorFunctionIndex::E2 => {
            let lead =
                k * 0.5 * (1.0 - t.e) + t.chi_x * (1.0 + t.e) / 4.0 + (t.i1 + t.j1) / 4.0;
            k * (fs.c_prime_tilde(i) - lead)
        }
        ErrorFunctionIndex::E3 => {
            let lead = (1.0 - t.e) / (2.0 * k) - t.chi_x * (1.0 + t.e) / (4.0 * zz)
                + (t.i1 + t.j1) / (4.0 * zz);
            k * k * k * (fs.s_tilde(i) / k - lead)
        }
        ErrorFunctionIndex::E4 => {
            let lead = 0.5 * (1.0 + t.e) + t.chi_x * (1.0 - t.e) / (4.0 * k)
                - (t.i1 - t.j1) / (4.0 * k);
            -zz * (fs.s_prime_tilde(i) - lead)
        }
    };
    Ok(value)
}

/// Assembles the expansion record at (z, x0).
pub fn expansion(
    measure: &SignedMeasure,
    z: SpectralParameter,
    x0: f64,
) -> Result<AsymptoticExpansion> {
    let (e12, e34) = e_limit_constants(measure, x0)?;
    Ok(AsymptoticExpansion {
        z,
        x0,
        leading: -z.k(),
        i1: measure.exp_integral_left(2.0 * z.k(), x0),
        second_order: second_order_correction(measure, z, x0)?,
        e_limits: [e12, e12, e34, e34],
    })
}

/// A ray z = R e^{iθ} sampled at the given magnitudes.
#[derive(Debug, Clone)]
pub struct RaySpec {
    pub theta: f64,
    pub r_values: Vec<f64>,
}

impl RaySpec {
    /// Logarithmically spaced magnitudes from r_min to r_max.
    pub fn new(theta: f64, r_min: f64, r_max: f64, points_per_decade: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::Argument(format!("theta = {theta} outside (0, π)")));
        }
        if !(r_min > 0.0 && r_min < r_max) {
            return Err(Error::Argument(format!(
                "need 0 < R_min < R_max, got {r_min}, {r_max}"
            )));
        }
        if points_per_decade == 0 {
            return Err(Error::Argument("points_per_decade must be >= 1".into()));
        }
        let mut r_values = vec![];
        let step = 1.0 / points_per_decade as f64;
        let mut exp = r_min.log10();
        let top = r_max.log10();
        while exp < top - 1e-12 {
            r_values.push(10f64.powf(exp));
            exp += step;
        }
        r_values.push(r_max);
        Ok(Self { theta, r_values })
    }

    pub fn from_magnitudes(theta: f64, r_values: &[f64]) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::Argument(format!("theta = {theta} outside (0, π)")));
        }
        let mut r = r_values.to_vec();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            theta,
            r_values: r,
        })
    }

    pub fn z_at(&self, r: f64) -> Result<SpectralParameter> {
        SpectralParameter::new(Complex64::from_polar(r, self.theta))
    }
}

/// One row of a residual table.
#[derive(Debug, Clone, Copy)]
pub struct ResidualRow {
    pub r: f64,
    pub theta: f64,
    pub z: Complex64,
    pub m_truth: Complex64,
    pub m_asym: Complex64,
    pub residual: f64,
    pub scaled_residual: f64,
    /// Rigorous band of the truth value (0 for the backward oracle).
    pub truth_error: f64,
    /// Set when the truth band exceeds the residual it should resolve.
    pub inconclusive: bool,
}

/// Sweeps the first-order residual |m_truth - m_asym| along a ray.
///
/// Truth is the backward-propagation oracle for purely atomic half-line
/// measures and the truncated estimate (with its 2r band) otherwise. Rows
/// come back sorted by R; points whose truth band exceeds the residual are
/// flagged inconclusive rather than failed.
pub fn residual_sweep(
    measure: &SignedMeasure,
    x0: f64,
    ray: &RaySpec,
    tol: f64,
) -> Result<Vec<ResidualRow>> {
    check_x0(measure, x0)?;
    let use_oracle = measure.is_purely_atomic() && measure.domain_end().is_infinite();
    ray.r_values
        .par_iter()
        .map(|&r| {
            let z = ray.z_at(r)?;
            let (m_truth, truth_error) = if use_oracle {
                (exact_m_compact(measure, z)?, 0.0)
            } else {
                let fs = solve_fundamental(measure, z, x0, tol)?;
                let est = m_truncated(&fs, x0)?;
                (est.value, est.error_radius)
            };
            let m_asym = first_order_m(measure, z, x0)?;
            let residual = (m_truth - m_asym).norm();
            Ok(ResidualRow {
                r,
                theta: ray.theta,
                z: z.z(),
                m_truth,
                m_asym,
                residual,
                scaled_residual: r.sqrt() * residual,
                truth_error,
                inconclusive: truth_error > residual,
            })
        })
        .collect()
}
