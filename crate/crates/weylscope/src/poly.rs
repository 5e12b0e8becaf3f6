//! Small helpers for real polynomials in one variable (low degree).
//!
//! Coefficients are stored lowest power first: `p[j]` multiplies `x^j`.

/// Evaluates `p` at `x` by Horner's rule.
pub fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Product of two polynomials.
pub fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return vec![];
    }
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Antiderivative with constant term zero.
pub fn antiderivative(p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (j, &c) in p.iter().enumerate() {
        out[j + 1] = c / (j as f64 + 1.0);
    }
    out
}

/// ∫_a^b p(x) dx.
pub fn integral(p: &[f64], a: f64, b: f64) -> f64 {
    let ad = antiderivative(p);
    eval(&ad, b) - eval(&ad, a)
}

/// Coefficients of q(u) = p(u + c), the polynomial re-centered at c.
pub fn shift(p: &[f64], c: f64) -> Vec<f64> {
    // Synthetic Taylor shift: repeated Horner division by (u - (-c)).
    let mut work = p.to_vec();
    let n = work.len();
    let mut out = vec![0.0; n];
    for item in out.iter_mut().take(n) {
        let mut carry = 0.0;
        for w in work.iter_mut().rev() {
            carry = carry * c + *w;
            *w = carry;
        }
        *item = work.remove(0);
    }
    out
}

/// Coefficients of q(u) = p(s·u), the polynomial rescaled by s.
pub fn scale(p: &[f64], s: f64) -> Vec<f64> {
    let mut out = p.to_vec();
    let mut f = 1.0;
    for c in out.iter_mut() {
        *c *= f;
        f *= s;
    }
    out
}

/// Real roots of `p` (degree ≤ 3) strictly inside (lo, hi), ascending.
///
/// Used to split |p| into signed pieces, so roots on the boundary or
/// multiple roots may be reported approximately; that is harmless for
/// integrating |p|.
pub fn real_roots_in(p: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut c = p.to_vec();
    while c.last().is_some_and(|&t| t == 0.0) {
        c.pop();
    }
    let mut roots = match c.len() {
        0 | 1 => vec![],
        2 => vec![-c[0] / c[1]],
        3 => quadratic_roots(c[0], c[1], c[2]),
        4 => cubic_roots(c[0], c[1], c[2], c[3]),
        _ => unreachable!("density pieces are polynomials of degree <= 3"),
    };
    roots.retain(|r| r.is_finite() && *r > lo && *r < hi);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
    roots
}

fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // Citardauq form for the smaller-magnitude root avoids cancellation.
    let q = -0.5 * (c1 + c1.signum() * sq);
    let mut out = vec![];
    if q != 0.0 {
        out.push(c0 / q);
    }
    if c2 != 0.0 {
        out.push(q / c2);
    }
    out
}

fn cubic_roots(c0: f64, c1: f64, c2: f64, c3: f64) -> Vec<f64> {
    // Depressed cubic t^3 + pt + q with x = t - b/(3a).
    let (a, b, c, d) = (c3, c2, c1, c0);
    let shift = -b / (3.0 * a);
    let p = (3.0 * a * c - b * b) / (3.0 * a * a);
    let q = (2.0 * b * b * b - 9.0 * a * b * c + 27.0 * a * a * d) / (27.0 * a * a * a);
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let mut roots = if disc > 0.0 {
        // Three real roots: trigonometric form.
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    } else {
        // One real root: Cardano.
        let half_q = q / 2.0;
        let rad = (half_q * half_q + p * p * p / 27.0).max(0.0).sqrt();
        let u = (-half_q + rad).cbrt();
        let v = (-half_q - rad).cbrt();
        vec![u + v]
    };
    for r in roots.iter_mut() {
        *r += shift;
        // One Newton polish step on the original cubic.
        let f = eval(&[c0, c1, c2, c3], *r);
        let df = eval(&[c1, 2.0 * c2, 3.0 * c3], *r);
        if df != 0.0 {
            *r -= f / df;
        }
    }
    roots
}

/// ∫_a^b |p(x)| dx, exact via sign changes located at real roots.
pub fn integral_abs(p: &[f64], a: f64, b: f64) -> f64 {
    let mut cuts = vec![a];
    cuts.extend(real_roots_in(p, a, b));
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integral(p, w[0], w[1]).abs();
    }
    total
}
