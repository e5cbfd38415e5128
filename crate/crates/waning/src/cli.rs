//! The `waning` command line.
//!
//! Exit status is 0 on success, 1 for usage errors (bad flags or flag
//! combinations, invalid model parameters) and 2 for data errors (unreadable
//! or malformed input, too little data, failed writes).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use waning_core::inference::{fit_ccdf_with, fit_mle, threshold_params, DEFAULT_EXCLUDE_LARGEST, THRESHOLD_LOGLIK};
use waning_core::simulate::{sample_stream_inversion, sample_stream_thinning};
use waning_core::stats::{empirical_ccdf, interarrivals, inverse_variance_weights, rescale_and_test, DEFAULT_LOG_BINS};
use waning_core::theory::{mc_exceedance_counts, survival_curve, CurveOptions, DEFAULT_MC_REPS};
use waning_core::{EmpiricalCcdf, ModelParams, SimulationSpec, StopRule, SurvivalCurve, SurvivalMethod};

use crate::format;
use crate::ingest::{parse_timestamps, DedupPolicy, IngestOptions, IngestedSeries, InputFormat, Origin};

/// Replications per Monte Carlo work unit. Fixed so results do not depend
/// on the number of worker threads.
const MC_CHUNK: u64 = 4096;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "waning", version, about = "Simulate, fit and test decaying-intensity event streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw an event stream and write it as `time_days` CSV
    Simulate(SimulateArgs),
    /// Empirical interarrival survival curve of a timestamp file
    Ccdf(CcdfArgs),
    /// Fit the model to a timestamp file
    Fit(FitArgs),
    /// Interarrival survival P{T_(n+1) > t} from the model
    Theory(TheoryArgs),
    /// Time-rescaling goodness-of-fit test of a timestamp file
    Gof(GofArgs),
    /// Classify parameters, given directly or fitted from a file
    Regime(RegimeArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct ParamArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    b: f64,
}

impl ParamArgs {
    fn params(&self) -> CliResult<ModelParams> {
        ModelParams::new(self.alpha, self.beta, self.b).map_err(usage)
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct SeedArg {
    /// Random seed; defaults to $WANING_SEED, then 0
    #[arg(long, env = "WANING_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Auto,
    Iso,
    Numeric,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DedupArg {
    Drop,
    Jitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OriginArg {
    /// The earliest record is t = 0 and not an event
    Earliest,
    /// Day counts are measured from 0 and every record is an event
    Zero,
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    /// CSV column holding the timestamps (implies --format csv)
    #[arg(long)]
    column: Option<String>,
    #[arg(long, value_enum, default_value_t = DedupArg::Drop)]
    dedup: DedupArg,
    #[arg(long, value_enum, default_value_t = OriginArg::Earliest)]
    origin: OriginArg,
    #[command(flatten)]
    seed: SeedArg,
}

impl InputArgs {
    fn load(&self) -> CliResult<(IngestedSeries, Vec<u8>)> {
        let format = match (self.format, &self.column) {
            (FormatArg::Csv | FormatArg::Auto, Some(c)) => InputFormat::Csv { column: c.clone() },
            (FormatArg::Csv, None) => return Err(usage("--format csv needs --column")),
            (_, Some(_)) => return Err(usage("--column only applies to csv input")),
            (FormatArg::Auto, None) => InputFormat::Auto,
            (FormatArg::Iso, None) => InputFormat::Iso8601,
            (FormatArg::Numeric, None) => InputFormat::Numeric,
        };
        let opts = IngestOptions {
            dedup: match self.dedup {
                DedupArg::Drop => DedupPolicy::Drop,
                DedupArg::Jitter => DedupPolicy::Jitter { seed: self.seed.seed },
            },
            origin: match self.origin {
                OriginArg::Earliest => Origin::EarliestRecord,
                OriginArg::Zero => Origin::Zero,
            },
        };
        let bytes = read_input(&self.input)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| data(format!("{}: {e}", self.input.display())))?;
        let series = parse_timestamps(text, &format, &opts).map_err(|e| data(format!("{}: {e}", self.input.display())))?;
        Ok((series, bytes))
    }
}

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

#[derive(Args, Debug, Clone)]
struct OutArg {
    /// Output file, written atomically; stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Inversion,
    Thinning,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("stop").required(true).args(["horizon", "events"])))]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Observe arrivals on (0, horizon], in days
    #[arg(long)]
    horizon: Option<f64>,
    /// Generate exactly this many arrivals
    #[arg(long)]
    events: Option<usize>,
    #[arg(long, value_enum, default_value_t = SamplerArg::Inversion)]
    sampler: SamplerArg,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug, Clone)]
struct CcdfOptions {
    /// Count the first arrival as a gap from t = 0
    #[arg(long)]
    include_first: bool,
    /// Number of geometrically spaced evaluation points
    #[arg(long, default_value_t = DEFAULT_LOG_BINS, conflicts_with = "unbinned")]
    log_bins: usize,
    /// Evaluate at every distinct gap instead of on a log grid
    #[arg(long)]
    unbinned: bool,
}

impl CcdfOptions {
    fn build(&self, series: &IngestedSeries) -> CliResult<EmpiricalCcdf> {
        let bins = if self.unbinned { None } else { Some(self.log_bins) };
        if bins == Some(0) {
            return Err(usage("--log-bins must be positive"));
        }
        let sample = interarrivals(&series.stream, self.include_first).map_err(data)?;
        empirical_ccdf(&sample, bins).map_err(data)
    }
}

#[derive(Args, Debug)]
struct CcdfArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    ccdf: CcdfOptions,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    Mle,
    Ccdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightArg {
    None,
    /// Reciprocal binomial variance of each log-survival value
    InverseVariance,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = FitMethod::Mle)]
    method: FitMethod,
    #[command(flatten)]
    ccdf: CcdfOptions,
    /// Treat the input as a `t_days,survival` CSV (ccdf method only)
    #[arg(long)]
    from_ccdf: bool,
    #[arg(long, value_enum, default_value_t = WeightArg::None)]
    weights: WeightArg,
    /// Leave out tail points resting on this many largest gaps
    #[arg(long, default_value_t = DEFAULT_EXCLUDE_LARGEST)]
    exclude_largest: usize,
    /// Also write the fitted intensity as `t_days,intensity` CSV (mle method only)
    #[arg(long)]
    intensity_out: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TheoryMethod {
    Closed,
    Quadrature,
    Mc,
    Asymptotic,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Which gap: T_(n+1) follows the n-th arrival
    #[arg(long, default_value_t = 0)]
    n: usize,
    /// Evaluation points (repeat the flag or separate with commas)
    #[arg(long, value_delimiter = ',', required_unless_present = "t_max")]
    t: Vec<f64>,
    /// Evenly spaced evaluation points on [0, t-max]
    #[arg(long, conflicts_with = "t")]
    t_max: Option<f64>,
    #[arg(long, default_value_t = 51, requires = "t_max")]
    points: usize,
    #[arg(long, value_enum, default_value_t = TheoryMethod::Quadrature)]
    method: TheoryMethod,
    /// Monte Carlo replications
    #[arg(long, default_value_t = DEFAULT_MC_REPS)]
    reps: u64,
    /// Upper integration limit for quadrature (needed when beta = 0)
    #[arg(long)]
    truncation: Option<f64>,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct GofArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["alpha", "input"])))]
struct RegimeArgs {
    #[arg(long, requires_all = ["beta", "b"])]
    alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    beta: Option<f64>,
    #[arg(long, requires = "alpha")]
    b: Option<f64>,
    /// Fit a timestamp file by maximum likelihood, then threshold
    #[arg(long, conflicts_with = "alpha")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    #[arg(long)]
    column: Option<String>,
    #[arg(long, value_enum, default_value_t = DedupArg::Drop)]
    dedup: DedupArg,
    #[arg(long, value_enum, default_value_t = OriginArg::Earliest)]
    origin: OriginArg,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    out: OutArg,
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Ccdf(a) => ccdf(a),
        Command::Fit(a) => fit(a),
        Command::Theory(a) => theory(a),
        Command::Gof(a) => gof(a),
        Command::Regime(a) => regime(a),
    }
}

fn emit(out: &OutArg, text: &str) -> CliResult<()> {
    emit_to(out.out.as_deref(), text)
}

fn emit_to(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => format::write_atomic(p, text).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(data)
        }
    }
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let params = a.params.params()?;
    let stop = match (a.horizon, a.events) {
        (Some(h), None) => StopRule::Horizon(h),
        (None, Some(n)) => StopRule::EventCount(n),
        _ => unreachable!("clap enforces exactly one stop rule"),
    };
    let spec = SimulationSpec::new(params, stop, a.seed.seed).map_err(usage)?;
    if a.sampler == SamplerArg::Thinning && matches!(stop, StopRule::EventCount(_)) && params.beta() == 0.0 {
        return Err(usage(
            "thinning with beta = 0 and an event count may never finish; use --sampler inversion",
        ));
    }
    let stream = match a.sampler {
        SamplerArg::Inversion => sample_stream_inversion(&spec),
        SamplerArg::Thinning => sample_stream_thinning(&spec),
    };
    emit(&a.out, &format::stream_csv(&stream))
}

fn ccdf(a: CcdfArgs) -> CliResult<()> {
    let (series, _) = a.input.load()?;
    let curve = a.ccdf.build(&series)?;
    emit(&a.out, &format::ccdf_csv(&curve))
}

fn fit(a: FitArgs) -> CliResult<()> {
    match a.method {
        FitMethod::Mle => {
            if a.from_ccdf {
                return Err(usage("--from-ccdf only applies to --method ccdf"));
            }
            let (series, bytes) = a.input.load()?;
            let result = fit_mle(&series.stream, None).map_err(data)?;
            if let Some(path) = &a.intensity_out {
                let horizon = series.stream.horizon();
                let mut text = String::from("t_days,intensity\n");
                for i in 0..=200 {
                    let t = horizon * i as f64 / 200.0;
                    text += &format!("{},{}\n", format::g15(t), format::g15(result.fitted_intensity(t)));
                }
                emit_to(Some(path), &text)?;
            }
            emit(&a.out, &format::mle_record(&result, &format::sha256_hex(&bytes)))
        }
        FitMethod::Ccdf => {
            if a.intensity_out.is_some() {
                return Err(usage("--intensity-out only applies to --method mle"));
            }
            let (curve, bytes) = if a.from_ccdf {
                let bytes = read_input(&a.input.input)?;
                let text = String::from_utf8_lossy(&bytes);
                let curve = format::read_ccdf_csv(&text).map_err(|e| data(format!("{}: {e}", a.input.input.display())))?;
                (curve, bytes)
            } else {
                let (series, bytes) = a.input.load()?;
                (a.ccdf.build(&series)?, bytes)
            };
            let weights = match a.weights {
                WeightArg::None => None,
                WeightArg::InverseVariance if curve.sample_size == 0 => {
                    return Err(usage("inverse-variance weights need a sample-based curve"))
                }
                WeightArg::InverseVariance => Some(inverse_variance_weights(&curve)),
            };
            let result = fit_ccdf_with(&curve, weights.as_deref(), a.exclude_largest).map_err(data)?;
            emit(&a.out, &format::ccdf_fit_record(&result, &format::sha256_hex(&bytes)))
        }
    }
}

fn theory(a: TheoryArgs) -> CliResult<()> {
    let params = a.params.params()?;
    let ts: Vec<f64> = match a.t_max {
        Some(t_max) => {
            if !(t_max.is_finite() && t_max > 0.0) || a.points < 2 {
                return Err(usage("--t-max must be positive and --points at least 2"));
            }
            (0..a.points).map(|i| t_max * i as f64 / (a.points - 1) as f64).collect()
        }
        None => a.t.clone(),
    };
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(usage("evaluation points must be finite and non-negative"));
    }
    let curve = match a.method {
        TheoryMethod::Mc => {
            if a.reps == 0 {
                return Err(usage("--reps must be positive"));
            }
            monte_carlo_curve(&params, a.n, &ts, a.reps, a.seed.seed)
        }
        method => {
            let method = match method {
                TheoryMethod::Closed => SurvivalMethod::ClosedForm,
                TheoryMethod::Quadrature => SurvivalMethod::Quadrature,
                _ => SurvivalMethod::Asymptotic,
            };
            let opts = CurveOptions {
                truncation: a.truncation,
                ..CurveOptions::default()
            };
            survival_curve(&params, a.n, &ts, method, &opts).map_err(usage)?
        }
    };
    emit(&a.out, &format::curves_csv(&[curve]))
}

/// Same estimate as the sequential sampler: replication `r` always uses the
/// seed derived from `(seed, r)`, and counts are summed exactly.
fn monte_carlo_curve(params: &ModelParams, n: usize, ts: &[f64], reps: u64, seed: u64) -> SurvivalCurve {
    let chunks: Vec<u64> = (0..reps.div_ceil(MC_CHUNK)).collect();
    let counts = chunks
        .par_iter()
        .map(|&c| {
            let range = c * MC_CHUNK..((c + 1) * MC_CHUNK).min(reps);
            mc_exceedance_counts(params, n, ts, seed, range)
        })
        .reduce(
            || vec![0; ts.len()],
            |mut acc, part| {
                acc.iter_mut().zip(part).for_each(|(a, p)| *a += p);
                acc
            },
        );
    SurvivalCurve {
        n,
        points: ts
            .iter()
            .zip(counts)
            .map(|(&t, c)| (t, c as f64 / reps as f64))
            .collect(),
        method: SurvivalMethod::MonteCarlo,
    }
}

fn gof(a: GofArgs) -> CliResult<()> {
    let params = a.params.params()?;
    let (series, _) = a.input.load()?;
    let report = rescale_and_test(&series.stream, &params).map_err(data)?;
    emit(&a.out, &format::gof_text(&report))
}

fn regime(a: RegimeArgs) -> CliResult<()> {
    let mut text = String::new();
    let params = match (a.alpha, a.beta, a.b, &a.input) {
        (Some(alpha), Some(beta), Some(b), None) => ParamArgs { alpha, beta, b }.params()?,
        (None, None, None, Some(input)) => {
            let input = InputArgs {
                input: input.clone(),
                format: a.format,
                column: a.column.clone(),
                dedup: a.dedup,
                origin: a.origin,
                seed: a.seed,
            };
            let (series, _) = input.load()?;
            let result = fit_mle(&series.stream, None).map_err(data)?;
            let flat = threshold_params(&series.stream, &result.params, THRESHOLD_LOGLIK);
            text += &format!(
                "fitted_alpha={}\nfitted_beta={}\nfitted_b={}\n",
                format::g15(result.params.alpha()),
                format::g15(result.params.beta()),
                format::g15(result.params.b())
            );
            flat
        }
        _ => return Err(usage("give either --alpha/--beta/--b or --input")),
    };
    text += &format!(
        "alpha={}\nbeta={}\nb={}\nregime={}\n",
        format::g15(params.alpha()),
        format::g15(params.beta()),
        format::g15(params.b()),
        params.classify_regime()
    );
    if let Some(rate) = params.exponential_rate() {
        text += &format!("exponential_rate={}\n", format::g15(rate));
    }
    emit(&a.out, &text)
}
