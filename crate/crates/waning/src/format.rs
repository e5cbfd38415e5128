//! Text renderings of streams, curves, fits and reports.
//!
//! Numbers are written with 15 significant digits in the style of C's `%.15g`
//! so that files are stable across platforms and easy to diff.

use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use waning_core::theory::SurvivalCurve;
use waning_core::{CutoffPowerLawFit, EmpiricalCcdf, EventStream, GofReport, MleFit};

const SIG_DIGITS: usize = 15;

/// Formats `x` like `printf("%.15g", x)`.
pub fn g15(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn stream_csv(stream: &EventStream) -> String {
    let mut out = String::from("time_days\n");
    for &t in stream.times() {
        out += &g15(t);
        out.push('\n');
    }
    out
}

pub fn ccdf_csv(ccdf: &EmpiricalCcdf) -> String {
    let mut out = String::from("t_days,survival\n");
    for &(t, s) in &ccdf.points {
        out += &format!("{},{}\n", g15(t), g15(s));
    }
    out
}

pub fn curves_csv(curves: &[SurvivalCurve]) -> String {
    let mut out = String::from("t_days,survival,method,n\n");
    for c in curves {
        for &(t, s) in &c.points {
            out += &format!("{},{},{},{}\n", g15(t), g15(s), c.method.as_str(), c.n);
        }
    }
    out
}

pub fn gof_text(report: &GofReport) -> String {
    format!(
        "ks_statistic={}\nsample_size={}\ncritical_value_1pct={}\npass={}\n",
        g15(report.ks_statistic),
        report.sample_size,
        g15(report.critical_value_1pct),
        report.pass
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct ParamsRecord {
    alpha: f64,
    beta: f64,
    b: f64,
}

#[derive(Serialize)]
struct MleRecord<'a> {
    params: ParamsRecord,
    log_likelihood: f64,
    converged: bool,
    iterations: usize,
    input_sha256: &'a str,
}

#[derive(Serialize)]
struct CcdfFitRecord<'a> {
    prefactor: f64,
    gamma: f64,
    t0: f64,
    beta: f64,
    sse: f64,
    n_points: usize,
    input_sha256: &'a str,
}

pub fn mle_record(fit: &MleFit, input_sha256: &str) -> String {
    let record = MleRecord {
        params: ParamsRecord {
            alpha: fit.params.alpha(),
            beta: fit.params.beta(),
            b: fit.params.b(),
        },
        log_likelihood: fit.log_likelihood,
        converged: fit.converged,
        iterations: fit.iterations,
        input_sha256,
    };
    serde_json::to_string_pretty(&record).expect("finite fields serialize") + "\n"
}

pub fn ccdf_fit_record(fit: &CutoffPowerLawFit, input_sha256: &str) -> String {
    let record = CcdfFitRecord {
        prefactor: fit.prefactor,
        gamma: fit.gamma,
        t0: fit.t0,
        beta: fit.beta,
        sse: fit.sse,
        n_points: fit.n_points,
        input_sha256,
    };
    serde_json::to_string_pretty(&record).expect("finite fields serialize") + "\n"
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    io::Write::write_all(&mut tmp, contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Parses a `t_days,survival` file back into a curve with no sample size.
pub fn read_ccdf_csv(text: &str) -> Result<EmpiricalCcdf, String> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing column {name:?}"))
    };
    let (ti, si) = (col("t_days")?, col("survival")?);
    let mut points = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, String> {
            row.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| format!("line {line}: not a number"))
        };
        points.push((num(ti)?, num(si)?));
    }
    EmpiricalCcdf::from_points(points, 0).map_err(|e| e.to_string())
}
