//! Scenario runner: load a measure description, run fundamental solves,
//! Weyl-function estimates, asymptotic residual sweeps and distributional
//! checks, and emit machine-readable reports.
//!
//! Exit codes: 0 success, 1 input error (bad file, bad arguments), 2 numeric
//! failure (non-convergence, degenerate disk, violated invariant).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use weylscope::asymptotics::RaySpec;
use weylscope::fundamental::{solve_fundamental_with_grid_points, transfer_matrix_oracle_normalized};
use weylscope::weyl::{exact_m_compact, m_truncated, weyl_disk};
use weylscope::{
    bump, distributional_residual_sweep, residual_sweep, Error as CoreError, SignedMeasure,
    SpectralParameter,
};

mod report;

use report::{format_float, OutputSink};

#[derive(Parser)]
#[command(name = "weylscope", version, about = "Weyl m-function toolkit for measure potentials")]
struct Cli {
    /// Worker threads for sweeps (env WEYLSCOPE_JOBS overrides).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the fundamental system and dump it as CSV.
    Solve(SolveArgs),
    /// Estimate m(z) with its rigorous error band and the Weyl disk.
    Weyl(WeylArgs),
    /// Sweep the first-order asymptotic residual along a ray.
    Asym(AsymArgs),
    /// Sweep the distributional residual for a bump test function.
    Dist(DistArgs),
    /// Run the invariant suite against a measure.
    Check(CheckArgs),
}

#[derive(Args)]
struct CommonIo {
    /// Path to the measure description file (JSON).
    #[arg(long)]
    measure: PathBuf,
    /// Output file (stdout when omitted). Written atomically.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Picard tolerance for the solver.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    io: CommonIo,
    /// Spectral parameter, e.g. "0+1i", "-1", "1e4i".
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    /// Right end of the solve interval.
    #[arg(long, default_value_t = 1.0)]
    xmax: f64,
}

#[derive(Args)]
struct WeylArgs {
    #[command(flatten)]
    io: CommonIo,
    /// Spectral parameter(s); repeatable.
    #[arg(long, required = true, allow_hyphen_values = true)]
    z: Vec<String>,
    /// Truncation point.
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
}

#[derive(Args)]
struct RayArgs {
    /// Ray angle θ in (0, π); z = R e^{iθ}.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    #[arg(long)]
    rmin: f64,
    #[arg(long)]
    rmax: f64,
    #[arg(long = "points-per-decade", default_value_t = 4)]
    points_per_decade: usize,
}

#[derive(Args)]
struct AsymArgs {
    #[command(flatten)]
    io: CommonIo,
    #[command(flatten)]
    ray: RayArgs,
    /// Truncation point for the expansion and the truth estimate.
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    io: CommonIo,
    #[command(flatten)]
    ray: RayArgs,
    #[arg(long = "phi-center")]
    phi_center: f64,
    #[arg(long = "phi-width", default_value_t = 0.2)]
    phi_width: f64,
    #[arg(long = "phi-height", default_value_t = 1.0)]
    phi_height: f64,
    /// Inner truncation length for m(z, t).
    #[arg(long, default_value_t = 1.0)]
    x0: f64,
    /// Gauss nodes per quadrature panel.
    #[arg(long = "quad-points", default_value_t = 20)]
    quad_points: usize,
}

#[derive(Args)]
struct CheckArgs {
    /// Path to the measure description file (JSON).
    #[arg(long)]
    measure: PathBuf,
    /// Picard tolerance for the solver.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

/// Input problems exit 1; numeric problems exit 2.
#[derive(Debug)]
enum CliError {
    Input(String),
    Numeric(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_) | CoreError::Argument(_) | CoreError::MeasureFile(_) => {
                CliError::Input(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_jobs(cli.jobs);
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Weyl(args) => cmd_weyl(args),
        Command::Asym(args) => cmd_asym(args),
        Command::Dist(args) => cmd_dist(args),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn configure_jobs(flag: Option<usize>) {
    let jobs = std::env::var("WEYLSCOPE_JOBS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(flag);
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

/// Parses "RE+IMi" forms: "2", "-1.5", "i", "2i", "1+2i", "1e3-4.5e-2i".
fn parse_complex(s: &str) -> Result<Complex64, CliError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CliError::Input(format!("cannot parse complex number {s:?} (want RE+IMi)"));
    if t.is_empty() {
        return Err(bad());
    }
    if !t.ends_with('i') {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    }
    let body = &t[..t.len() - 1];
    // split at the last +/- that is neither leading nor part of an exponent
    let split = body
        .char_indices()
        .rev()
        .find(|&(i, c)| {
            (c == '+' || c == '-')
                && i > 0
                && !matches!(body.as_bytes()[i - 1], b'e' | b'E')
        })
        .map(|(i, _)| i);
    let (re_part, im_part) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("", body),
    };
    let re = if re_part.is_empty() {
        0.0
    } else {
        re_part.parse::<f64>().map_err(|_| bad())?
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}

fn load_measure(path: &Path) -> Result<SignedMeasure, CliError> {
    Ok(SignedMeasure::from_path(path)?)
}

fn spectral(s: &str) -> Result<SpectralParameter, CliError> {
    Ok(SpectralParameter::new(parse_complex(s)?)?)
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let measure = load_measure(&args.io.measure)?;
    let z = spectral(&args.z)?;
    let fs = solve_fundamental_with_grid_points(&measure, z, args.xmax, args.io.tol, &[])?;
    let mut sink = OutputSink::new(args.io.output.as_deref());
    if args.io.format == "json" {
        let rows: Vec<serde_json::Value> = (0..fs.len())
            .map(|i| {
                serde_json::json!({
                    "x": fs.grid()[i],
                    "c": [fs.c(i).re, fs.c(i).im],
                    "c_prime": [fs.c_prime(i).re, fs.c_prime(i).im],
                    "s": [fs.s(i).re, fs.s(i).im],
                    "s_prime": [fs.s_prime(i).re, fs.s_prime(i).im],
                })
            })
            .collect();
        let doc = serde_json::json!({
            "z": [z.z().re, z.z().im],
            "sweeps": fs.sweeps(),
            "grid": rows,
        });
        sink.push_line(&serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        sink.push_line("x,re_c,im_c,re_cp,im_cp,re_s,im_s,re_sp,im_sp");
        for i in 0..fs.len() {
            let (c, cp, s, sp) = (fs.c(i), fs.c_prime(i), fs.s(i), fs.s_prime(i));
            sink.push_line(&format!(
                "{},{},{},{},{},{},{},{},{}",
                format_float(fs.grid()[i]),
                format_float(c.re),
                format_float(c.im),
                format_float(cp.re),
                format_float(cp.im),
                format_float(s.re),
                format_float(s.im),
                format_float(sp.re),
                format_float(sp.im),
            ));
        }
    }
    sink.finish()?;
    Ok(())
}

fn cmd_weyl(args: WeylArgs) -> Result<(), CliError> {
    let measure = load_measure(&args.io.measure)?;
    let mut sink = OutputSink::new(args.io.output.as_deref());
    let mut json_rows = vec![];
    if args.io.format == "csv" {
        sink.push_line(
            "re_z,im_z,x0,re_m,im_m,error_radius,re_center,im_center,radius,log_radius,method",
        );
    }
    for zs in &args.z {
        let z = spectral(zs)?;
        let fs =
            solve_fundamental_with_grid_points(&measure, z, args.x0, args.io.tol, &[])?;
        let disk = weyl_disk(&fs, args.x0)?;
        let exact = measure.is_purely_atomic()
            && measure.domain_end().is_infinite()
            && measure.support_upper_bound().unwrap_or(0.0) < args.x0;
        let (m_value, error_radius, method) = if exact {
            (exact_m_compact(&measure, z)?, 0.0, "exact-compact")
        } else {
            let est = m_truncated(&fs, args.x0)?;
            (est.value, est.error_radius, "truncated")
        };
        if args.io.format == "json" {
            json_rows.push(serde_json::json!({
                "z": [z.z().re, z.z().im],
                "x0": args.x0,
                "m": [m_value.re, m_value.im],
                "error_radius": error_radius,
                "method": method,
                "disk": {
                    "center": [disk.center.re, disk.center.im],
                    "radius": disk.radius,
                    "log_radius": disk.log_radius,
                },
            }));
        } else {
            sink.push_line(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                format_float(z.z().re),
                format_float(z.z().im),
                format_float(args.x0),
                format_float(m_value.re),
                format_float(m_value.im),
                format_float(error_radius),
                format_float(disk.center.re),
                format_float(disk.center.im),
                format_float(disk.radius),
                format_float(disk.log_radius),
                method,
            ));
        }
    }
    if args.io.format == "json" {
        sink.push_line(
            &serde_json::to_string_pretty(&serde_json::Value::Array(json_rows)).expect("json"),
        );
    }
    sink.finish()?;
    Ok(())
}

fn cmd_asym(args: AsymArgs) -> Result<(), CliError> {
    let measure = load_measure(&args.io.measure)?;
    let ray = RaySpec::new(
        args.ray.theta,
        args.ray.rmin,
        args.ray.rmax,
        args.ray.points_per_decade,
    )?;
    guard_invariants(&measure, &ray, args.x0, args.io.tol)?;
    let rows = residual_sweep(&measure, args.x0, &ray, args.io.tol)?;
    let mut sink = OutputSink::new(args.io.output.as_deref());
    if args.io.format == "json" {
        let rows: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "R": r.r,
                    "theta": r.theta,
                    "z": [r.z.re, r.z.im],
                    "m_truth": [r.m_truth.re, r.m_truth.im],
                    "m_asym": [r.m_asym.re, r.m_asym.im],
                    "residual": r.residual,
                    "scaled_residual": r.scaled_residual,
                    "truth_error": r.truth_error,
                    "inconclusive": r.inconclusive,
                })
            })
            .collect();
        sink.push_line(&serde_json::to_string_pretty(&rows).expect("json"));
    } else {
        sink.push_line("R,theta,re_m_truth,im_m_truth,re_m_asym,im_m_asym,residual,scaled_residual");
        for r in &rows {
            sink.push_line(&format!(
                "{},{},{},{},{},{},{},{}",
                format_float(r.r),
                format_float(r.theta),
                format_float(r.m_truth.re),
                format_float(r.m_truth.im),
                format_float(r.m_asym.re),
                format_float(r.m_asym.im),
                format_float(r.residual),
                format_float(r.scaled_residual),
            ));
        }
    }
    sink.finish()?;
    Ok(())
}

fn cmd_dist(args: DistArgs) -> Result<(), CliError> {
    let measure = load_measure(&args.io.measure)?;
    let phi = bump(args.phi_center, args.phi_width, args.phi_height)?;
    let ray = RaySpec::new(
        args.ray.theta,
        args.ray.rmin,
        args.ray.rmax,
        args.ray.points_per_decade,
    )?;
    guard_invariants(&measure, &ray, args.x0, args.io.tol)?;
    let rows =
        distributional_residual_sweep(&measure, &phi, &ray, args.quad_points, args.x0, args.io.tol)?;
    let mut sink = OutputSink::new(args.io.output.as_deref());
    if args.io.format == "json" {
        let rows: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "R": r.r,
                    "theta": r.theta,
                    "z": [r.z.re, r.z.im],
                    "lhs": [r.lhs.re, r.lhs.im],
                    "rhs": [r.rhs.re, r.rhs.im],
                    "residual": r.residual,
                    "scaled_residual": r.scaled_residual,
                    "phi_center": r.phi_center,
                    "phi_width": r.phi_width,
                })
            })
            .collect();
        sink.push_line(&serde_json::to_string_pretty(&rows).expect("json"));
    } else {
        sink.push_line(
            "R,theta,re_m_truth,im_m_truth,re_m_asym,im_m_asym,residual,scaled_residual,phi_center,phi_width",
        );
        for r in &rows {
            sink.push_line(&format!(
                "{},{},{},{},{},{},{},{},{},{}",
                format_float(r.r),
                format_float(r.theta),
                format_float(r.lhs.re),
                format_float(r.lhs.im),
                format_float(r.rhs.re),
                format_float(r.rhs.im),
                format_float(r.residual),
                format_float(r.scaled_residual),
                format_float(r.phi_center),
                format_float(r.phi_width),
            ));
        }
    }
    sink.finish()?;
    Ok(())
}

/// Hard invariants verified before a sweep is trusted: Wronskian constancy
/// and disk nesting at the smallest ray magnitude (where both are resolvable
/// in f64). Violations are numeric failures.
fn guard_invariants(
    measure: &SignedMeasure,
    ray: &RaySpec,
    x0: f64,
    tol: f64,
) -> Result<(), CliError> {
    let r = ray.r_values[0];
    let z = ray.z_at(r)?;
    if 2.0 * z.k().re * x0 > 30.0 {
        return Ok(()); // checks below roundoff resolution at this magnitude
    }
    let fs = solve_fundamental_with_grid_points(measure, z, x0, tol, &[0.5 * x0])?;
    for i in 0..fs.len() {
        let dev = (fs.wronskian_at(i) - 1.0).norm();
        if dev > 1e-8 {
            return Err(CliError::Numeric(format!(
                "Wronskian invariant violated: |W-1| = {dev:.3e} at x = {}",
                fs.grid()[i]
            )));
        }
    }
    if z.z().im != 0.0 {
        let d0 = weyl_disk(&fs, 0.5 * x0)?;
        let d1 = weyl_disk(&fs, x0)?;
        if d0.log_radius > -600.0
            && (d1.center - d0.center).norm() + d1.radius > d0.radius * (1.0 + 1e-8)
        {
            return Err(CliError::Numeric(
                "disk nesting invariant violated during sweep setup".into(),
            ));
        }
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), CliError> {
    let measure = load_measure(&args.measure)?;
    let b = measure.domain_end();
    let x_max = if b.is_infinite() { 1.0 } else { 0.9 * b };
    let mut failures = 0usize;
    let mut ok = |name: &str, pass: bool, detail: String| {
        println!("check {name}: {} {detail}", if pass { "ok" } else { "FAIL" });
        if !pass {
            failures += 1;
        }
    };

    let zs = [
        Complex64::new(0.0, 1.0),
        Complex64::new(2.0, 2.0),
        Complex64::new(0.0, 4.0),
        Complex64::new(0.0, 25.0),
    ];
    let mut worst_w = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for &zv in &zs {
        let z = SpectralParameter::new(zv)?;
        let fs =
            solve_fundamental_with_grid_points(&measure, z, x_max, args.tol, &[0.5 * x_max])?;
        for i in 0..fs.len() {
            worst_w = worst_w.max((fs.wronskian_at(i) - 1.0).norm());
            let x = fs.grid()[i];
            let budget = if x > 0.0 {
                measure.total_variation(x).map(|t| t.value).unwrap_or(0.0)
            } else {
                0.0
            };
            let bound = (budget / z.k().norm()).exp() * 1.01;
            let excess = (fs.c_tilde(i).norm().max(fs.s_tilde(i).norm()) / bound - 1.0).max(0.0);
            worst_bound = worst_bound.max(excess);
        }
        if measure.is_purely_atomic() {
            for i in 0..fs.len() {
                let x = fs.grid()[i];
                if x <= 0.0 {
                    continue;
                }
                let (ct, cpt, st, spt) = transfer_matrix_oracle_normalized(&measure, z, x)?;
                let rel = |a: Complex64, b: Complex64| {
                    (a - b).norm() / a.norm().max(b.norm()).max(1e-3)
                };
                worst_oracle = worst_oracle
                    .max(rel(fs.c_tilde(i), ct))
                    .max(rel(fs.c_prime_tilde(i), cpt))
                    .max(rel(fs.s_tilde(i), st))
                    .max(rel(fs.s_prime_tilde(i), spt));
            }
        }
    }
    ok(
        "wronskian",
        worst_w <= 1e-10,
        format!("(max |W-1| = {worst_w:.3e})"),
    );
    ok(
        "normalized-bound",
        worst_bound == 0.0,
        format!("(max excess = {worst_bound:.3e})"),
    );
    if measure.is_purely_atomic() {
        ok(
            "oracle-equivalence",
            worst_oracle <= 1e-8,
            format!("(max rel = {worst_oracle:.3e})"),
        );
    }

    let mut nesting_pass = true;
    let mut interior_pass = true;
    let mut herglotz_pass = true;
    for &zv in &[Complex64::new(0.0, 4.0), Complex64::new(0.0, 100.0)] {
        let z = SpectralParameter::new(zv)?;
        let fs =
            solve_fundamental_with_grid_points(&measure, z, x_max, args.tol, &[0.5 * x_max])?;
        let d0 = weyl_disk(&fs, 0.5 * x_max)?;
        let d1 = weyl_disk(&fs, x_max)?;
        if (d1.center - d0.center).norm() + d1.radius > d0.radius * (1.0 + 1e-8) {
            nesting_pass = false;
        }
        let est = m_truncated(&fs, x_max)?;
        if (est.value - d1.center).norm() > d1.radius * (1.0 + 1e-8) {
            interior_pass = false;
        }
        if est.value.im <= 0.0 {
            herglotz_pass = false;
        }
        if measure.is_purely_atomic() && measure.domain_end().is_infinite() {
            let exact = exact_m_compact(&measure, z)?;
            if exact.im <= 0.0 {
                herglotz_pass = false;
            }
        }
    }
    ok("disk-nesting", nesting_pass, String::new());
    ok("disk-interior-membership", interior_pass, String::new());
    ok("herglotz", herglotz_pass, String::new());

    if failures > 0 {
        return Err(CliError::Numeric(format!("{failures} invariant check(s) failed")));
    }
    println!("all checks passed");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("2").unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(parse_complex("-1").unwrap(), Complex64::new(-1.0, 0.0));
        assert_eq!(parse_complex("i").unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("2i").unwrap(), Complex64::new(0.0, 2.0));
        assert_eq!(parse_complex("0+1i").unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(parse_complex("1-2i").unwrap(), Complex64::new(1.0, -2.0));
        assert_eq!(parse_complex("1e4i").unwrap(), Complex64::new(0.0, 1e4));
        assert_eq!(
            parse_complex("1.5e-2+2.5e+3i").unwrap(),
            Complex64::new(0.015, 2500.0)
        );
        assert_eq!(parse_complex(" 3 + 4i ").unwrap(), Complex64::new(3.0, 4.0));
        assert!(parse_complex("").is_err());
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("1+2j").is_err());
    }
}
