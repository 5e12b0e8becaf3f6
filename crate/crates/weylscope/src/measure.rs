//! Locally finite signed Borel measures on [0, b): atoms plus a piecewise
//! polynomial density, with the Lebesgue–Stieltjes integration used by the
//! solvers.
//!
//! Conventions fixed here and used everywhere else:
//! - the distribution function is left continuous, χ(x) = χ([0, x)) with
//!   χ(0) = 0, so an atom at p contributes to χ(x) only for x > p;
//! - all integration intervals are half open, [lo, hi): an atom at lo is
//!   included, an atom at hi is not.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::moments::{decay_poly, front_decay_poly};
use crate::poly;
use crate::quad::integrate_adaptive;

/// One polynomial density piece ρ(y) = Σ coeffs[j] y^j on [from, to).
///
/// Coefficients are in the global coordinate y and the degree is at most 3,
/// so every ∫ e^{-ay} ρ(y) dy in the crate has a closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPiece {
    pub from: f64,
    pub to: f64,
    pub coeffs: Vec<f64>,
}

impl DensityPiece {
    pub fn new(from: f64, to: f64, coeffs: &[f64]) -> Self {
        Self {
            from,
            to,
            coeffs: coeffs.to_vec(),
        }
    }
}

/// A point mass: weight · δ_position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// Total variation |χ|([0, x0)) of a measure over an initial interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalVariationBudget {
    pub value: f64,
}

/// A locally finite signed Borel measure on [0, b).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    atoms: Vec<Atom>,
    density: Vec<DensityPiece>,
    domain_end: f64,
}

impl SignedMeasure {
    /// Validates and builds a measure. Atom positions must be strictly
    /// increasing inside [0, b) with nonzero weights; density pieces must be
    /// sorted, non-overlapping, with finite endpoints inside [0, b] and at
    /// most cubic coefficients.
    pub fn new(
        atoms: Vec<(f64, f64)>,
        density: Vec<DensityPiece>,
        domain_end: f64,
    ) -> Result<Self> {
        if domain_end.is_nan() || domain_end <= 0.0 {
            return Err(Error::Argument(format!(
                "domain_end must be positive, got {domain_end}"
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        let mut checked_atoms = Vec::with_capacity(atoms.len());
        for (i, &(position, weight)) in atoms.iter().enumerate() {
            if !position.is_finite() || position < 0.0 || position >= domain_end {
                return Err(Error::Argument(format!(
                    "atoms[{i}]: position {position} outside [0, {domain_end})"
                )));
            }
            if position <= prev {
                return Err(Error::Argument(format!(
                    "atoms[{i}]: positions must be strictly increasing ({position} after {prev})"
                )));
            }
            if weight == 0.0 || !weight.is_finite() {
                return Err(Error::Argument(format!(
                    "atoms[{i}]: weight must be finite and nonzero, got {weight}"
                )));
            }
            prev = position;
            checked_atoms.push(Atom { position, weight });
        }
        let mut prev_to = 0.0;
        for (i, piece) in density.iter().enumerate() {
            if !piece.from.is_finite() || !piece.to.is_finite() {
                return Err(Error::Argument(format!(
                    "density[{i}]: piece endpoints must be finite"
                )));
            }
            if piece.from < 0.0 || piece.from >= piece.to || piece.to > domain_end {
                return Err(Error::Argument(format!(
                    "density[{i}]: invalid interval [{}, {}) in [0, {domain_end})",
                    piece.from, piece.to
                )));
            }
            if i > 0 && piece.from < prev_to {
                return Err(Error::Argument(format!(
                    "density[{i}]: pieces overlap (starts at {} before previous end {prev_to})",
                    piece.from
                )));
            }
            if piece.coeffs.is_empty() || piece.coeffs.len() > 4 {
                return Err(Error::Argument(format!(
                    "density[{i}]: need 1..=4 polynomial coefficients, got {}",
                    piece.coeffs.len()
                )));
            }
            if piece.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Argument(format!(
                    "density[{i}]: coefficients must be finite"
                )));
            }
            prev_to = piece.to;
        }
        Ok(Self {
            atoms: checked_atoms,
            density,
            domain_end,
        })
    }

    /// The zero measure on [0, ∞).
    pub fn zero() -> Self {
        Self {
            atoms: vec![],
            density: vec![],
            domain_end: f64::INFINITY,
        }
    }

    /// Purely atomic measure on [0, ∞).
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(atoms.to_vec(), vec![], f64::INFINITY)
    }

    /// Constant density q0 on [from, to), no atoms, on [0, ∞).
    pub fn constant_density(q0: f64, from: f64, to: f64) -> Result<Self> {
        Self::new(
            vec![],
            vec![DensityPiece::new(from, to, &[q0])],
            f64::INFINITY,
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &[DensityPiece] {
        &self.density
    }

    /// The right endpoint b of the domain [0, b); `f64::INFINITY` for b = ∞.
    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.is_empty()
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.density.is_empty()
    }

    /// Smallest L with χ((L, ∞)) = 0, or None for the zero measure.
    pub fn support_upper_bound(&self) -> Option<f64> {
        let atom_max = self.atoms.last().map(|a| a.position);
        let piece_max = self.density.last().map(|p| p.to);
        match (atom_max, piece_max) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0).max(b.unwrap_or(0.0))),
        }
    }

    fn check_in_domain(&self, x: f64, name: &str) -> Result<()> {
        if !x.is_finite() || x < 0.0 || x >= self.domain_end {
            return Err(Error::Domain(format!(
                "{name} = {x} outside [0, {})",
                self.domain_end
            )));
        }
        Ok(())
    }

    /// χ(x) = χ([0, x)); left continuous, χ(0) = 0.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.check_in_domain(x, "x")?;
        let atom_part: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.position < x)
            .map(|a| a.weight)
            .sum();
        let density_part: f64 = self
            .density
            .iter()
            .filter(|p| p.from < x)
            .map(|p| poly::integral(&p.coeffs, p.from, p.to.min(x)))
            .sum();
        Ok(atom_part + density_part)
    }

    /// χ({x}): the weight of the atom at x, or 0.
    pub fn atom_at(&self, x: f64) -> Result<f64> {
        self.check_in_domain(x, "x")?;
        Ok(self
            .atoms
            .iter()
            .find(|a| a.position == x)
            .map_or(0.0, |a| a.weight))
    }

    /// |χ|([0, x0)) = Σ_{p<x0} |w_p| + ∫_0^{x0} |ρ|.
    pub fn total_variation(&self, x0: f64) -> Result<TotalVariationBudget> {
        if x0.is_nan() || x0 <= 0.0 || x0 > self.domain_end {
            return Err(Error::Domain(format!(
                "x0 = {x0} outside (0, {}]",
                self.domain_end
            )));
        }
        let atom_part: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.position < x0)
            .map(|a| a.weight.abs())
            .sum();
        let density_part: f64 = self
            .density
            .iter()
            .filter(|p| p.from < x0)
            .map(|p| poly::integral_abs(&p.coeffs, p.from, p.to.min(x0)))
            .sum();
        Ok(TotalVariationBudget {
            value: atom_part + density_part,
        })
    }

    /// ∫_{[lo,hi)} f dχ for a continuous integrand f.
    ///
    /// Atoms are summed exactly; the density part uses adaptive quadrature to
    /// ~1e-13 relative accuracy. Errors if f returns a non-finite value.
    pub fn stieltjes_integrate<F>(&self, mut f: F, lo: f64, hi: f64) -> Result<Complex64>
    where
        F: FnMut(f64) -> Complex64,
    {
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo < 0.0 || hi > self.domain_end {
            return Err(Error::Domain(format!(
                "interval [{lo}, {hi}) invalid in [0, {})",
                self.domain_end
            )));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            if a.position >= lo && a.position < hi {
                let v = f(a.position);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::Evaluation { at: a.position });
                }
                total += a.weight * v;
            }
        }
        for p in &self.density {
            let a = p.from.max(lo);
            let b = p.to.min(hi);
            if a < b {
                let coeffs = p.coeffs.clone();
                let mut g = |y: f64| f(y) * poly::eval(&coeffs, y);
                total += integrate_adaptive(&mut g, a, b, 1e-13)?;
            }
        }
        Ok(total)
    }

    /// ∫_{[0,x)} e^{-a y} dχ(y), exact (atoms summed, density in closed form).
    /// Requires Re(a) ≥ 0.
    pub fn exp_integral_left(&self, a: Complex64, x: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for at in self.atoms.iter().take_while(|at| at.position < x) {
            total += at.weight * (-a * at.position).exp();
        }
        for p in self.density.iter().filter(|p| p.from < x) {
            let hi = p.to.min(x);
            let local = poly::shift(&p.coeffs, p.from);
            total += (-a * p.from).exp() * front_decay_poly(a, hi - p.from, &local);
        }
        total
    }

    /// ∫_{[0,x)} e^{-a(x-y)} dχ(y), exact. Requires Re(a) ≥ 0.
    pub fn exp_integral_right(&self, a: Complex64, x: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for at in self.atoms.iter().take_while(|at| at.position < x) {
            total += at.weight * (-a * (x - at.position)).exp();
        }
        for p in self.density.iter().filter(|p| p.from < x) {
            let hi = p.to.min(x);
            let local = poly::shift(&p.coeffs, p.from);
            total += (-a * (x - hi)).exp() * decay_poly(a, hi - p.from, &local);
        }
        total
    }

    /// The measure restricted to [t, b) and shifted back to start at 0:
    /// χ_t(B) = χ(t + B). An atom exactly at t becomes the atom at 0.
    pub fn shift_restrict(&self, t: f64) -> Result<SignedMeasure> {
        self.check_in_domain(t, "t")?;
        let atoms = self
            .atoms
            .iter()
            .filter(|a| a.position >= t)
            .map(|a| Atom {
                position: a.position - t,
                weight: a.weight,
            })
            .collect();
        let density = self
            .density
            .iter()
            .filter(|p| p.to > t)
            .map(|p| {
                let from = p.from.max(t);
                DensityPiece {
                    from: from - t,
                    to: p.to - t,
                    coeffs: poly::shift(&p.coeffs, t),
                }
            })
            .collect();
        Ok(SignedMeasure {
            atoms,
            density,
            domain_end: self.domain_end - t,
        })
    }

    /// ρ evaluated pointwise (0 outside all pieces). Atoms are not included.
    pub fn density_at(&self, y: f64) -> f64 {
        self.density
            .iter()
            .find(|p| p.from <= y && y < p.to)
            .map_or(0.0, |p| poly::eval(&p.coeffs, y))
    }

    /// Positions in (lo, hi) where the measure changes structure: atom
    /// positions and density piece endpoints. Sorted, deduplicated.
    pub fn structure_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.position)
            .chain(self.density.iter().flat_map(|p| [p.from, p.to]))
            .filter(|&p| p > lo && p < hi)
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

// ---------------------------------------------------------------------------
// Measure description files
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct RawPiece {
    from: f64,
    to: f64,
    coeffs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDomainEnd {
    Number(f64),
    Word(String),
}

#[derive(Deserialize)]
struct RawMeasure {
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    density: Vec<RawPiece>,
    domain_end: Option<RawDomainEnd>,
}

impl SignedMeasure {
    /// Parses a measure description from JSON text. Structural violations are
    /// rejected with the offending line where it can be located.
    pub fn from_json_str(src: &str) -> Result<Self> {
        let raw: RawMeasure = serde_json::from_str(src).map_err(|e| {
            Error::MeasureFile(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        let domain_end = match raw.domain_end {
            None => f64::INFINITY,
            Some(RawDomainEnd::Number(v)) => v,
            Some(RawDomainEnd::Word(w)) if w == "inf" => f64::INFINITY,
            Some(RawDomainEnd::Word(w)) => {
                return Err(Error::MeasureFile(format!(
                    "{}: domain_end must be a positive number or \"inf\", got {w:?}",
                    locate_key_line(src, "domain_end")
                )))
            }
        };
        let density = raw
            .density
            .into_iter()
            .map(|p| DensityPiece {
                from: p.from,
                to: p.to,
                coeffs: p.coeffs,
            })
            .collect();
        SignedMeasure::new(raw.atoms, density, domain_end).map_err(|e| match e {
            Error::Argument(msg) => {
                let line = msg
                    .split_once('[')
                    .and_then(|(prefix, rest)| {
                        let idx: usize = rest.split(']').next()?.parse().ok()?;
                        let key = if prefix.starts_with("atoms") {
                            "atoms"
                        } else {
                            "density"
                        };
                        locate_element_line(src, key, idx)
                    })
                    .map(|l| format!("line {l}: "))
                    .unwrap_or_default();
                Error::MeasureFile(format!("{line}{msg}"))
            }
            other => other,
        })
    }

    /// Loads a measure description file from disk.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::MeasureFile(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&src).map_err(|e| match e {
            Error::MeasureFile(msg) => Error::MeasureFile(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn line_at(src: &str, byte: usize) -> usize {
    src[..byte].bytes().filter(|&b| b == b'\n').count() + 1
}

fn locate_key_line(src: &str, key: &str) -> String {
    match src.find(&format!("\"{key}\"")) {
        Some(pos) => format!("line {}", line_at(src, pos)),
        None => key.to_string(),
    }
}

/// Best-effort line of the idx-th element of the top-level array under `key`.
fn locate_element_line(src: &str, key: &str, idx: usize) -> Option<usize> {
    let key_pos = src.find(&format!("\"{key}\""))?;
    let rest = &src[key_pos..];
    let open = rest.find('[')?;
    let mut depth = 0usize;
    let mut element = 0usize;
    for (off, ch) in rest[open..].char_indices() {
        match ch {
            '[' | '{' => {
                depth += 1;
                if depth == 2 {
                    if element == idx {
                        return Some(line_at(src, key_pos + open + off));
                    }
                    element += 1;
                }
            }
            ']' | '}' => {
                if depth == 0 {
                    break;
                }
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            _ => {}
        }
    }
    None
}
