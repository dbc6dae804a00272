//! Command-line front end. Exit codes: 0 success or pass, 1 checked and
//! failed (a report is always written), 2 usage or input error, 3 numerical
//! failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::balanced::calibration;
use crate::correlators::{eval_strip, Profile, QuadratureConfig, StripPoint};
use crate::equilibrium::{
    check_lkms_momentum, check_lte, extract_temperature, validate_time_spectrum, ExtractionResult, LKMSReport,
    LTEReport, Verdict,
};
use crate::error::Error;
use crate::minkowski::{FourVector, InverseTemperatureVector, TimeDirection};
use crate::spectral::{StateSpec, HOTBANG_FACTOR};

pub const PROFILE_ENV: &str = "THERMALFIELD_PROFILE";

pub mod exit {
    pub const PASS: i32 = 0;
    pub const FAIL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Parser, Debug)]
#[command(
    name = "thermalfield",
    version,
    about = "Local thermal equilibrium diagnostics for free scalar field states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate the strip continuation on a (t, r) grid.
    Eval(EvalArgs),
    /// Run the LTE and/or local KMS checks against a candidate inverse temperature.
    Check(CheckArgs),
    /// Extract β(q) of a hot-bang state at several points.
    SweepHotbang(SweepArgs),
    /// Compare sampled time-axis correlators with the closed-form spectra.
    #[command(name = "validate-appendix-b")]
    ValidateSpectrum(CommonArgs),
    /// Print the calibrated thermal-function constants.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// State as a JSON file path or inline JSON.
    #[arg(long)]
    pub state: String,
    /// Center point t,x,y,z.
    #[arg(long, default_value = "1,0,0,0")]
    pub q: String,
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// t0,t1,n
    #[arg(long = "t-range")]
    pub t_range: String,
    /// r0,r1,n
    #[arg(long = "r-range")]
    pub r_range: String,
    #[arg(long)]
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Lte,
    Lkms,
    Both,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub which: Which,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Candidate inverse temperature vector b0,b1,b2,b3.
    #[arg(long, conflicts_with = "extract")]
    pub beta: Option<String>,
    /// Extract the candidate from the state instead of passing --beta.
    #[arg(long)]
    pub extract: bool,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Momentum band of the KMS identity; default 10/β.
    #[arg(long)]
    pub kmax: Option<f64>,
    /// Tolerance (default 1e-6 for LTE, 1e-8 for the momentum identity).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Semicolon-separated points, e.g. "1,0,0,0;2,0,0,0".
    #[arg(long)]
    pub qs: String,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Fast,
    Default,
    Strict,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Fast => Profile::Fast,
            ProfileArg::Default => Profile::Default,
            ProfileArg::Strict => Profile::Strict,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Reproducibility block embedded in every report.
#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    profile: Profile,
    config: QuadratureConfig,
    state: &'a StateSpec,
    q: FourVector,
    hotbang_factor: f64,
}

struct Loaded {
    state: StateSpec,
    q: FourVector,
    profile: Profile,
    config: QuadratureConfig,
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            f64::from_str(s.trim()).map_err(|_| Error::InvalidInput(format!("{what}: cannot parse {s:?} as a number")))
        })
        .collect()
}

fn parse_vector(text: &str, what: &str) -> Result<FourVector, Error> {
    match parse_list(text, what)?.as_slice() {
        [t, x, y, z] => FourVector::new(*t, *x, *y, *z),
        other => Err(Error::InvalidInput(format!(
            "{what}: expected 4 components, got {}",
            other.len()
        ))),
    }
}

fn parse_range(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(Error::InvalidInput(format!("{what}: expected start,end,count")));
    };
    let a = parse_list(a, what)?[0];
    let b = parse_list(b, what)?[0];
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{what}: bad count {n:?}")))?;
    match n {
        0 => Err(Error::InvalidInput(format!("{what}: count must be positive"))),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

fn resolve_profile(flag: Option<ProfileArg>) -> Result<Profile, Error> {
    if let Some(p) = flag {
        return Ok(p.into());
    }
    match std::env::var(PROFILE_ENV) {
        Ok(v) if !v.is_empty() => Profile::from_str(&v),
        _ => Ok(Profile::Default),
    }
}

fn load_state(arg: &str) -> Result<StateSpec, Error> {
    if arg.trim_start().starts_with('{') {
        StateSpec::from_json(arg)
    } else {
        StateSpec::from_json(&fs::read_to_string(arg)?)
    }
}

fn load(common: &CommonArgs) -> Result<Loaded, Error> {
    let state = load_state(&common.state)?;
    let q = parse_vector(&common.q, "--q")?;
    let profile = resolve_profile(common.profile)?;
    let config = profile.config();
    config.validate()?;
    Ok(Loaded {
        state,
        q,
        profile,
        config,
    })
}

fn run_info<'a>(command: &'a str, l: &'a Loaded) -> RunInfo<'a> {
    RunInfo {
        command,
        profile: l.profile,
        config: l.config,
        state: &l.state,
        q: l.q,
        hotbang_factor: HOTBANG_FACTOR,
    }
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, Error> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn code_for(err: &Error) -> i32 {
    match err {
        Error::Convergence { .. } | Error::Singular(_) | Error::Solver { .. } | Error::ExtractionFailed(_) => {
            exit::NUMERIC
        }
        Error::NoTemperature(_) => exit::FAIL,
        _ => exit::USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::PASS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            code_for(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32, Error> {
    match command {
        Command::Eval(a) => cmd_eval(&a),
        Command::Check(a) => cmd_check(&a),
        Command::SweepHotbang(a) => cmd_sweep_hotbang(&a),
        Command::ValidateSpectrum(a) => cmd_validate_spectrum(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<i32, Error> {
    let l = load(&a.common)?;
    let ts = parse_range(&a.t_range, "--t-range")?;
    let rs = parse_range(&a.r_range, "--r-range")?;
    let resolved = l.state.resolve(&l.q)?;
    let e = resolved.reference_direction();
    let beta_min = resolved
        .components
        .iter()
        .filter_map(|c| c.beta.map(|b| b.beta()))
        .fold(f64::INFINITY, f64::min);
    let grid: Vec<(f64, f64)> = ts.iter().flat_map(|&t| rs.iter().map(move |&r| (t, r))).collect();
    if !(a.sigma > 0.0) {
        if grid.iter().any(|&(t, r)| t.abs() == r.abs()) {
            return Err(Error::Singular(format!(
                "σ = {} reaches the light-cone singularity of the boundary value",
                a.sigma
            )));
        }
        return Err(Error::Domain(format!(
            "strip displacement must be positive, got {}",
            a.sigma
        )));
    }
    let point = |t: f64, r: f64| -> Result<StripPoint, Error> {
        let z = t * e.vector() + FourVector::new(0.0, r, 0.0, 0.0)?;
        if beta_min.is_finite() {
            StripPoint::new(z, a.sigma, &InverseTemperatureVector::new(beta_min, e)?)
        } else {
            StripPoint::vacuum(z, a.sigma, e)
        }
    };
    let values = grid
        .par_iter()
        .map(|&(t, r)| eval_strip(&l.state, &l.q, &point(t, r)?, &l.config))
        .collect::<Result<Vec<_>, Error>>()?;
    let bytes = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = grid
                .iter()
                .zip(&values)
                .map(|(&(t, r), v)| {
                    [t, r, a.sigma, v.value.re, v.value.im, v.error]
                        .iter()
                        .map(|x| x.to_string())
                        .collect()
                })
                .collect();
            csv_bytes(&["t", "r", "sigma", "re", "im", "err"], &rows)?
        }
        Format::Json => {
            let points: Vec<_> = grid
                .iter()
                .zip(&values)
                .map(|(&(t, r), v)| json!({"t": t, "r": r, "sigma": a.sigma, "re": v.value.re, "im": v.value.im, "err": v.error}))
                .collect();
            json_bytes(&json!({"run": run_info("eval", &l), "points": points}))?
        }
    };
    emit(&a.common.out, &bytes)?;
    Ok(exit::PASS)
}

#[derive(Serialize)]
struct CheckReport<'a> {
    run: RunInfo<'a>,
    which: &'static str,
    candidate: Option<InverseTemperatureVector>,
    extraction: Option<ExtractionResult>,
    extraction_error: Option<String>,
    lte: Option<LTEReport>,
    lkms: Option<LKMSReport>,
    verdict: Verdict,
}

fn cmd_check(a: &CheckArgs) -> Result<i32, Error> {
    let l = load(&a.common)?;
    let which = match a.which {
        Which::Lte => "lte",
        Which::Lkms => "lkms",
        Which::Both => "both",
    };
    let mut report = CheckReport {
        run: run_info("check", &l),
        which,
        candidate: None,
        extraction: None,
        extraction_error: None,
        lte: None,
        lkms: None,
        verdict: Verdict::Fail,
    };
    let candidate = if a.extract {
        match extract_temperature(&l.state, &l.q, 0.0, &l.config) {
            Ok(x) => {
                let b = x.beta_vec;
                report.extraction = Some(x);
                Some(b)
            }
            Err(e @ (Error::NoTemperature(_) | Error::ExtractionFailed(_))) => {
                report.extraction_error = Some(e.to_string());
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        let text = a
            .beta
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("either --beta or --extract is required".into()))?;
        Some(InverseTemperatureVector::from_vector(parse_vector(text, "--beta")?)?)
    };
    if let Some(b) = candidate {
        report.candidate = Some(b);
        if a.which != Which::Lkms {
            report.lte = Some(check_lte(
                &l.state,
                &l.q,
                &b,
                a.order,
                a.tol.unwrap_or(1e-6),
                &l.config,
            )?);
        }
        if a.which != Which::Lte {
            let kmax = a.kmax.unwrap_or(10.0 / b.beta());
            report.lkms = Some(check_lkms_momentum(
                &l.state,
                &l.q,
                &b,
                kmax,
                a.tol.unwrap_or(1e-8),
                &l.config,
            )?);
        }
        let ok = report.lte.as_ref().is_none_or(|r| r.verdict.passed())
            && report.lkms.as_ref().is_none_or(|r| r.verdict.passed());
        report.verdict = Verdict::from_bool(ok);
    }
    let bytes = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let mut rows = Vec::new();
            if let Some(r) = &report.lte {
                for o in &r.per_order {
                    rows.push(vec![
                        "lte".into(),
                        o.order.to_string(),
                        o.discrepancy.to_string(),
                        o.tolerance.to_string(),
                        json!(o.verdict).as_str().unwrap_or_default().to_string(),
                    ]);
                }
            }
            if let Some(r) = &report.lkms {
                for (k, res) in r.k_grid.iter().zip(&r.residual_profile) {
                    let v = Verdict::from_bool(*res <= r.tolerance);
                    rows.push(vec![
                        "lkms".into(),
                        k.to_string(),
                        res.to_string(),
                        r.tolerance.to_string(),
                        json!(v).as_str().unwrap_or_default().to_string(),
                    ]);
                }
                rows.push(vec![
                    "clustering".into(),
                    "20".into(),
                    r.clustering_metric.to_string(),
                    r.clustering_bound.to_string(),
                    json!(Verdict::from_bool(r.clustering_metric <= r.clustering_bound))
                        .as_str()
                        .unwrap_or_default()
                        .to_string(),
                ]);
            }
            csv_bytes(&["check", "index", "value", "tolerance", "verdict"], &rows)?
        }
    };
    emit(&a.common.out, &bytes)?;
    Ok(if report.verdict.passed() {
        exit::PASS
    } else {
        exit::FAIL
    })
}

#[derive(Serialize)]
struct SweepRow {
    q: FourVector,
    beta_vec: InverseTemperatureVector,
    beta: f64,
    ratio: f64,
}

fn cmd_sweep_hotbang(a: &SweepArgs) -> Result<i32, Error> {
    let l = load(&a.common)?;
    let StateSpec::HotBang { a: amplitude } = l.state else {
        return Err(Error::InvalidInput("sweep-hotbang needs a hot-bang state".into()));
    };
    let qs =
        a.qs.split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_vector(s, "--qs"))
            .collect::<Result<Vec<_>, Error>>()?;
    if qs.is_empty() {
        return Err(Error::InvalidInput("--qs lists no points".into()));
    }
    for q in &qs {
        if TimeDirection::new(*q).is_err() {
            return Err(Error::Domain(format!("point {q} is not in the open forward cone")));
        }
    }
    let rows = qs
        .par_iter()
        .map(|q| {
            let x = extract_temperature(&l.state, q, 0.0, &l.config)?;
            let beta = x.beta_vec.beta();
            Ok(SweepRow {
                q: *q,
                beta_vec: x.beta_vec,
                beta,
                ratio: beta / (amplitude * q.square().sqrt()),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mean = rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64;
    let spread = rows.iter().map(|r| (r.ratio - mean).abs()).fold(0.0, f64::max) / mean.abs();
    let verdict = Verdict::from_bool(spread <= a.tol);
    let bytes = match a.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let q = r.q.components();
                    let b = r.beta_vec.vector().components();
                    q.iter()
                        .chain(&b)
                        .chain([&r.beta, &r.ratio])
                        .map(|x| x.to_string())
                        .collect()
                })
                .collect();
            csv_bytes(
                &[
                    "q0", "q1", "q2", "q3", "beta0", "beta1", "beta2", "beta3", "beta", "ratio",
                ],
                &rows,
            )?
        }
        Format::Json => json_bytes(&json!({
            "run": run_info("sweep-hotbang", &l),
            "rows": rows,
            "ratio_mean": mean,
            "ratio_spread": spread,
            "verdict": verdict,
        }))?,
    };
    emit(&a.common.out, &bytes)?;
    Ok(if verdict.passed() { exit::PASS } else { exit::FAIL })
}

fn cmd_validate_spectrum(a: &CommonArgs) -> Result<i32, Error> {
    let l = load(a)?;
    let report = validate_time_spectrum(&l.state, &l.q, &l.config)?;
    let bytes = match a.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    [
                        r.k,
                        r.closed_form,
                        r.smoothed_closed_form,
                        r.smoothed_numeric_re,
                        r.smoothed_numeric_im,
                        r.residual,
                    ]
                    .iter()
                    .map(|x| x.to_string())
                    .collect()
                })
                .collect();
            csv_bytes(
                &[
                    "k",
                    "closed_form",
                    "smoothed_closed_form",
                    "smoothed_numeric_re",
                    "smoothed_numeric_im",
                    "residual",
                ],
                &rows,
            )?
        }
        Format::Json => json_bytes(&json!({"run": run_info("validate-appendix-b", &l), "report": report}))?,
    };
    emit(&a.out, &bytes)?;
    Ok(if report.verdict.passed() {
        exit::PASS
    } else {
        exit::FAIL
    })
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<i32, Error> {
    let table = calibration()?;
    emit(&a.out, &json_bytes(&table)?)?;
    Ok(exit::PASS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_vectors() {
        assert_eq!(parse_range("0,1,3", "t").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("2,5,1", "t").unwrap(), vec![2.0]);
        assert!(parse_range("0,1", "t").is_err());
        assert!(parse_range("0,1,0", "t").is_err());
        assert_eq!(parse_vector("1, 0,0,0", "q").unwrap(), FourVector::TIME_UNIT);
        assert!(parse_vector("1,0,0", "q").is_err());
        assert!(parse_vector("1,a,0,0", "q").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(
            code_for(&Error::Convergence {
                estimate: 1.0,
                tolerance: 0.1
            }),
            exit::NUMERIC
        );
        assert_eq!(code_for(&Error::Singular("x".into())), exit::NUMERIC);
        assert_eq!(code_for(&Error::InvalidInput("x".into())), exit::USAGE);
        assert_eq!(code_for(&Error::Domain("x".into())), exit::USAGE);
    }

    #[test]
    fn csv_uses_lf() {
        let b = csv_bytes(&["a", "b"], &[vec!["1".into(), "2".into()]]).unwrap();
        assert_eq!(b, b"a,b\n1,2\n");
    }

    #[test]
    fn help_and_unknown_flags() {
        assert_eq!(run(["thermalfield", "--help"]), exit::PASS);
        assert_eq!(run(["thermalfield", "eval", "--bogus"]), exit::USAGE);
        assert_eq!(run(["thermalfield", "frobnicate"]), exit::USAGE);
    }
}
