//! Command-line front end of the `ratbek` binary.
//!
//! Exit codes: 0 on success, 1 for usage, parse and input errors, 2 for
//! numeric failures (pole, singular `R(λ)`, shift failure, failed verification).

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::backward_error::{self, BackwardErrorReport};
use crate::error::Error;
use crate::linalg::{self, CMatrix};
use crate::linearize;
use crate::oracle;
use crate::perturb::{self, Regime};
use crate::problems::io::{self as fileio, format_real};
use crate::realization::{NormSelector, Realization, Tolerances};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "RATBEK_SEED";

/// Sweep points closer than this to a pole are skipped.
pub const SWEEP_POLE_DISTANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "ratbek", version, about = "Backward errors for rational eigenvalue problems in realization form")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    /// Relative pole threshold on sigma_min(A - lambda E)
    #[arg(long, global = true, value_name = "TOL")]
    pub tol_pole: Option<f64>,
    /// Relative singularity threshold on sigma_min(R(lambda))
    #[arg(long, global = true, value_name = "TOL")]
    pub tol_regular: Option<f64>,
    /// Pencil eigenpair residual threshold
    #[arg(long, global = true, value_name = "TOL")]
    pub tol_eig: Option<f64>,
    /// Relative threshold used by perturbation verification
    #[arg(long, global = true, value_name = "TOL")]
    pub tol_verify: Option<f64>,
    /// Absolute threshold used by perturbation verification
    #[arg(long, global = true, value_name = "TOL")]
    pub tol_verify_abs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    C,
    B,
    Poly,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print R(lambda) and its smallest singular value
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_complex_arg, allow_hyphen_values = true)]
        lambda: Complex64,
    },
    /// Eigenvalues and eigenvectors through the companion linearization
    Eigs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the eigentriples as JSON
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Full backward error report as JSON
    Bwerr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_complex_arg, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long, value_enum, default_value_t = Mode::C)]
        mode: Mode,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build the minimal perturbation making lambda exact
    Perturb {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_complex_arg, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long, value_enum, default_value_t = Mode::C)]
        mode: Mode,
        #[arg(long)]
        output: PathBuf,
    },
    /// Re-check a perturbation file against a realization
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        perturbation: PathBuf,
        /// Defaults to the perturbation's target
        #[arg(long, value_parser = parse_complex_arg, allow_hyphen_values = true)]
        lambda: Option<Complex64>,
    },
    /// Compare the brute-force B-regime minimum with both closed forms
    Adjudicate {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Feasible samples per instance
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// CSV of backward errors over a count x count grid centred at --center
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_complex_arg, allow_hyphen_values = true, default_value = "0")]
        center: Complex64,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long, default_value_t = 21)]
        count: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(Error),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Input(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        if err.is_numeric() {
            Failure::Numeric(err.to_string())
        } else {
            Failure::Input(err)
        }
    }
}

impl From<io::Error> for Failure {
    fn from(err: io::Error) -> Self {
        Failure::Input(Error::Io(err))
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) | Failure::Numeric(msg) => f.write_str(msg),
            Failure::Input(err) => write!(f, "{err}"),
        }
    }
}

fn is_decimal(text: &str) -> bool {
    let body = text.strip_prefix(['+', '-']).unwrap_or(text);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(k) => (&body[..k], Some(&body[k + 1..])),
        None => (body, None),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    let mantissa_ok = digits(int) && digits(frac) && !(int.is_empty() && frac.is_empty());
    let exponent_ok = exponent.is_none_or(|e| {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        !e.is_empty() && digits(e)
    });
    mantissa_ok && exponent_ok
}

fn parse_decimal(text: &str, original: &str) -> Result<f64, Error> {
    if !is_decimal(text) {
        return Err(Error::Parse(format!("invalid complex number '{original}'")));
    }
    text.parse()
        .map_err(|_| Error::Parse(format!("invalid complex number '{original}'")))
}

/// Parses `a`, `bi`, `a+bi` or `a-bi` with decimal a and b.
pub fn parse_complex(text: &str) -> Result<Complex64, Error> {
    let s = text.trim();
    let Some(body) = s.strip_suffix('i') else {
        return Ok(Complex64::new(parse_decimal(s, text)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(Complex64::new(
            parse_decimal(&body[..k], text)?,
            parse_decimal(&body[k..], text)?,
        )),
        None => Ok(Complex64::new(0.0, parse_decimal(body, text)?)),
    }
}

fn parse_complex_arg(text: &str) -> Result<Complex64, String> {
    parse_complex(text).map_err(|e| e.to_string())
}

impl ToleranceArgs {
    fn resolve(&self) -> Result<Tolerances, Failure> {
        let mut tol = Tolerances::default();
        let overrides = [
            (self.tol_pole, &mut tol.pole, "--tol-pole"),
            (self.tol_regular, &mut tol.regular, "--tol-regular"),
            (self.tol_eig, &mut tol.eig, "--tol-eig"),
            (self.tol_verify, &mut tol.verify, "--tol-verify"),
            (self.tol_verify_abs, &mut tol.verify_abs, "--tol-verify-abs"),
        ];
        for (value, slot, flag) in overrides {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Failure::Usage(format!("{flag} must be positive, got {v}")));
                }
                *slot = v;
            }
        }
        Ok(tol)
    }
}

fn resolve_seed(flag: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV} must be an unsigned integer, got '{text}'"))),
        Err(_) => Ok(flag),
    }
}

/// Six significant digits for human-readable tables.
pub fn fmt6(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{x:.6}")
    } else {
        format!("{x:.6e}")
    }
}

fn fmt6_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", fmt6(z.re), fmt6(z.im.abs()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn matrix_table(m: &CMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt6_complex(m[(i, j)])).collect();
        out.push_str("  ");
        out.push_str(&row.join("  "));
        out.push('\n');
    }
    out
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 1 } else { 0 };
        }
    };
    run(cli)
}

/// Runs a parsed command, printing any failure to stderr; returns the exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let tol = cli.tolerances.resolve()?;
    match cli.command {
        Command::Eval { input, lambda } => eval(&input, lambda, &tol),
        Command::Eigs { input, seed, output } => eigs(&input, resolve_seed(seed)?, output.as_deref(), &tol),
        Command::Bwerr {
            input,
            lambda,
            mode,
            output,
        } => bwerr(&input, lambda, mode, output.as_deref(), &tol),
        Command::Perturb {
            input,
            lambda,
            mode,
            output,
        } => perturb_cmd(&input, lambda, mode, &output, &tol),
        Command::Verify {
            input,
            perturbation,
            lambda,
        } => verify(&input, &perturbation, lambda, &tol),
        Command::Adjudicate {
            count,
            seed,
            restarts,
            samples,
            output,
        } => adjudicate(count, resolve_seed(seed)?, restarts, samples, output.as_deref(), &tol),
        Command::Sweep {
            input,
            center,
            radius,
            count,
            output,
        } => sweep(&input, center, radius, count, output.as_deref(), &tol),
    }
}

fn load(path: &Path) -> Result<Realization, Failure> {
    Ok(fileio::load_realization(path)?)
}

fn eval(input: &Path, lambda: Complex64, tol: &Tolerances) -> Result<(), Failure> {
    let rep = load(input)?;
    let value = rep.eval_r(lambda, tol)?;
    let text = format!(
        "R({}) =\n{}sigma_min = {}\n",
        fmt6_complex(lambda),
        matrix_table(&value),
        fmt6(linalg::sigma_min(&value))
    );
    write_output(None, &text)
}

fn eigs(input: &Path, seed: u64, output: Option<&Path>, tol: &Tolerances) -> Result<(), Failure> {
    let rep = load(input)?;
    let (spectrum, triples) = linearize::eigentriples(&rep, tol, seed)?;
    let mut text = format!(
        "{:>4}  {:>28}  {:>14}  {:>14}\n",
        "#", "lambda", "residual", "pencil_res"
    );
    for (k, t) in triples.iter().enumerate() {
        let pencil_res = spectrum
            .finite
            .iter()
            .find(|p| p.lambda == t.lambda)
            .map(|p| fmt6(p.residual))
            .unwrap_or_default();
        let residual = t.residual.map(fmt6).unwrap_or_else(|| "pole".into());
        text.push_str(&format!(
            "{k:>4}  {:>28}  {residual:>14}  {pencil_res:>14}\n",
            fmt6_complex(t.lambda)
        ));
    }
    text.push_str(&format!("infinite eigenvalues: {}\n", spectrum.infinite.len()));
    if spectrum.finite.iter().any(|p| p.flagged) {
        log::warn!("some pencil eigenpairs exceed the residual tolerance");
    }
    write_output(None, &text)?;
    if let Some(path) = output {
        fs::write(path, fileio::to_json_string(&triples)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ModeReport<'a> {
    mode: &'static str,
    /// The operative backward error for the selected mode.
    eta: f64,
    #[serde(flatten)]
    report: &'a BackwardErrorReport,
}

fn bwerr(input: &Path, lambda: Complex64, mode: Mode, output: Option<&Path>, tol: &Tolerances) -> Result<(), Failure> {
    let rep = load(input)?;
    let report = backward_error::report(&rep, lambda, NormSelector::FROBENIUS_2, None, tol)?;
    let (name, eta) = match mode {
        Mode::C => ("c", report.eta_c),
        Mode::B => ("b", report.eta_b_variational),
        Mode::Poly => ("poly", report.eta_poly_bound),
    };
    let mut text = fileio::to_json_string(&ModeReport {
        mode: name,
        eta,
        report: &report,
    })?;
    text.push('\n');
    write_output(output, &text)
}

fn perturb_cmd(input: &Path, lambda: Complex64, mode: Mode, output: &Path, tol: &Tolerances) -> Result<(), Failure> {
    let rep = load(input)?;
    let delta = match mode {
        Mode::C => perturb::construct_perturb_c(&rep, lambda, None, tol)?,
        Mode::B => perturb::construct_perturb_b(&rep, lambda, None, tol)?,
        Mode::Poly => {
            return Err(Failure::Usage(
                "perturb supports --mode c or --mode b; polynomial-only perturbations are not constructed".into(),
            ))
        }
    };
    fileio::save_perturbation(output, &delta)?;
    let check = perturb::verify_exactness(&rep, &delta, lambda, tol)?;
    println!(
        "regime = {}\nnorm = {}\nsigma_min = {}\nverified = {}",
        regime_name(delta.regime()),
        fmt6(delta.total_norm()),
        fmt6(check.sigma),
        check.ok
    );
    if !check.ok {
        return Err(Failure::Numeric("constructed perturbation failed verification".into()));
    }
    Ok(())
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::PolyAndC => "poly+C",
        Regime::PolyAndB => "poly+B",
    }
}

fn verify(input: &Path, perturbation: &Path, lambda: Option<Complex64>, tol: &Tolerances) -> Result<(), Failure> {
    let rep = load(input)?;
    let delta = fileio::load_perturbation(perturbation)?;
    let lambda = lambda.unwrap_or(delta.lambda_target());
    let check = perturb::verify_exactness(&rep, &delta, lambda, tol)?;
    println!(
        "lambda = {}\nsigma_min = {}\nscale = {}\nverified = {}",
        fmt6_complex(lambda),
        fmt6(check.sigma),
        fmt6(check.scale),
        check.ok
    );
    if !check.ok {
        return Err(Failure::Numeric(format!(
            "lambda = {lambda} is not an eigenvalue of the perturbed realization"
        )));
    }
    Ok(())
}

fn adjudicate(
    count: usize,
    seed: u64,
    restarts: usize,
    samples: usize,
    output: Option<&Path>,
    tol: &Tolerances,
) -> Result<(), Failure> {
    if count == 0 || restarts == 0 || samples == 0 {
        return Err(Failure::Usage("--count, --restarts and --samples must be positive".into()));
    }
    let mut records = Vec::with_capacity(count);
    for result in oracle::adjudicate_suite(count, seed, restarts, samples, tol) {
        let outcome = result?;
        if !outcome.verification.ok {
            log::warn!("instance {}: oracle perturbation failed verification", outcome.record.instance_id);
        }
        records.push(outcome.record);
    }
    let mut csv = Vec::new();
    oracle::write_adjudication_csv(&mut csv, &records)?;
    write_output(output, &String::from_utf8(csv).expect("CSV is UTF-8"))?;

    let mut table = format!(
        "{:>4}  {:>14}  {:>14}  {:>14}  {}\n",
        "id", "eta_oracle", "eta_variational", "eta_paper", "winner"
    );
    for r in &records {
        table.push_str(&format!(
            "{:>4}  {:>14}  {:>14}  {:>14}  {}\n",
            r.instance_id,
            fmt6(r.eta_oracle),
            fmt6(r.eta_variational),
            fmt6(r.eta_paper),
            r.winner
        ));
    }
    let tally = |w: oracle::Winner| records.iter().filter(|r| r.winner == w).count();
    table.push_str(&format!(
        "verdict: variational {}, paper {}, tie {} (of {})\n",
        tally(oracle::Winner::Variational),
        tally(oracle::Winner::Paper),
        tally(oracle::Winner::Tie),
        records.len()
    ));
    // The CSV may be on stdout, so the human-readable table goes to stderr.
    eprint!("{table}");
    Ok(())
}

/// Poles of the realization: eigenvalues of `E⁻¹A`.
fn poles(rep: &Realization) -> Result<Vec<Complex64>, Error> {
    if rep.r() == 0 {
        return Ok(Vec::new());
    }
    let m = linalg::solve(rep.e(), rep.a())?;
    Ok(linalg::eigen(&m)?.into_iter().map(|(mu, _)| mu).collect())
}

const SWEEP_HEADER: [&str; 12] = [
    "lambda_re",
    "lambda_im",
    "sigma_min_R",
    "eta_poly_bound",
    "eta_C",
    "eta_B_variational",
    "eta_B_paper",
    "eta_companion",
    "ratio",
    "bound",
    "holds",
    "status",
];

fn sweep_row(rep: &Realization, lambda: Complex64, poles: &[Complex64], tol: &Tolerances) -> Vec<String> {
    let mut row = vec![format_real(lambda.re), format_real(lambda.im)];
    if poles.iter().any(|p| (p - lambda).norm() <= SWEEP_POLE_DISTANCE) {
        row.extend(std::iter::repeat_n(String::new(), 9));
        row.push("skipped_pole".into());
        return row;
    }
    let report = match backward_error::report(rep, lambda, NormSelector::SPECTRAL_2, None, tol) {
        Ok(report) => report,
        Err(err) => {
            row.extend(std::iter::repeat_n(String::new(), 9));
            row.push(if matches!(err, Error::Pole { .. }) { "skipped_pole" } else { "error" }.into());
            return row;
        }
    };
    row.push(format_real(report.sigma_values.sigma_min_r));
    row.push(format_real(report.eta_poly_bound));
    row.push(format_real(report.eta_c));
    row.push(format_real(report.eta_b_variational));
    row.push(format_real(report.eta_b_sigma_min));
    row.push(report.eta_companion.map(format_real).unwrap_or_default());
    let ratio = if report.singular || lambda.norm() < 1.0 {
        None
    } else {
        backward_error::ratio_bound_check(rep, lambda, tol).ok()
    };
    match ratio {
        Some(r) => {
            row.push(format_real(r.ratio));
            row.push(format_real(r.bound));
            row.push(r.holds.to_string());
        }
        None => row.extend(std::iter::repeat_n(String::new(), 3)),
    }
    row.push(if report.singular { "eigenvalue" } else { "ok" }.into());
    row
}

/// The `count × count` grid over `center + [−radius, radius]²` in row-major order
/// (imaginary part outer, real part inner).
pub fn sweep_grid(center: Complex64, radius: f64, count: usize) -> Vec<Complex64> {
    let coord = |k: usize| {
        if count == 1 {
            0.0
        } else {
            -radius + 2.0 * radius * k as f64 / (count - 1) as f64
        }
    };
    (0..count)
        .flat_map(|j| (0..count).map(move |i| center + Complex64::new(coord(i), coord(j))))
        .collect()
}

fn sweep(
    input: &Path,
    center: Complex64,
    radius: f64,
    count: usize,
    output: Option<&Path>,
    tol: &Tolerances,
) -> Result<(), Failure> {
    if count == 0 || !(radius >= 0.0 && radius.is_finite()) {
        return Err(Failure::Usage("--count must be positive and --radius finite and nonnegative".into()));
    }
    let rep = load(input)?;
    let poles = poles(&rep)?;
    let rows: Vec<Vec<String>> = sweep_grid(center, radius, count)
        .into_par_iter()
        .map(|lambda| sweep_row(&rep, lambda, &poles, tol))
        .collect();
    let mut buf = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| Failure::Input(Error::Io(io::Error::other(e)));
        writer.write_record(SWEEP_HEADER).map_err(csv_err)?;
        for row in &rows {
            writer.write_record(row).map_err(csv_err)?;
        }
        writer.flush()?;
    }
    write_output(output, &String::from_utf8(buf).expect("CSV is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("1+0i").unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(parse_complex("-0.5i").unwrap(), Complex64::new(0.0, -0.5));
        assert_eq!(parse_complex("2.5").unwrap(), Complex64::new(2.5, 0.0));
        assert_eq!(parse_complex("-1.5-2i").unwrap(), Complex64::new(-1.5, -2.0));
        assert_eq!(parse_complex("1e-3+2E2i").unwrap(), Complex64::new(1e-3, 200.0));
        assert_eq!(parse_complex(".5-.25i").unwrap(), Complex64::new(0.5, -0.25));
    }

    #[test]
    fn complex_rejects() {
        for bad in ["1+i2", "i", "+i", "1+i", "", "abc", "1 + 2i", "nan", "inf", "1+2j", "1++2i", "1.2.3", "e5"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_order() {
        let g = sweep_grid(Complex64::new(1.0, 0.0), 1.0, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], Complex64::new(0.0, -1.0));
        assert_eq!(g[1], Complex64::new(1.0, -1.0));
        assert_eq!(g[8], Complex64::new(2.0, 1.0));
    }

    #[test]
    fn table_rounding() {
        assert_eq!(fmt6(2.414213562373095), "2.414214");
        assert_eq!(fmt6(1.5e-7), "1.500000e-7");
    }
}
