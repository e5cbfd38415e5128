//! Interarrival laws of the decaying-intensity process.
//!
//! The survival of the `(n+1)`-th gap averages the conditional survival over
//! the law of the `n`-th arrival time:
//!
//! ```text
//! P{T_{n+1} > t} = ∫_0^∞ f_{S_n}(x) · exp(-(Λ(x+t) - Λ(x))) dx
//! f_{S_n}(x)     = λ(x) Λ(x)^{n-1} / (n-1)! · exp(-Λ(x))
//! ```
//!
//! The density of `S_n` collapses the `n`-fold integral over ordered arrival
//! times: `∏ λ(x_i)` integrated over `0 < x_1 < ... < x_{n-1} < x` equals
//! `Λ(x)^{n-1} / (n-1)!`. The same reduction gives the tail constant
//!
//! ```text
//! c(n) = ∫_0^∞ e^{-βx} λ(x) Λ(x)^{n-1} / (n-1)! dx
//! ```
//!
//! with which `P{T_{n+1} > t} ~ c(n) (bt + 1)^{-α/b} e^{-βt}` as `t → ∞`.

use alloc::vec::Vec;
use core::ops::Range;

use libm::{exp, lgamma, log, pow};

use crate::error::{check_non_negative, Error, Result};
use crate::model::ModelParams;
use crate::quad::{integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::rng::{derive_seed, EventRng};
use crate::simulate::arrivals_by_inversion;

/// Default number of Monte Carlo replications.
pub const DEFAULT_MC_REPS: u64 = 100_000;

const SURVIVAL_RTOL: f64 = 1e-10;
const CONSTANT_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurvivalMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    Asymptotic,
}

impl SurvivalMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SurvivalMethod::ClosedForm => "closed_form",
            SurvivalMethod::Quadrature => "quadrature",
            SurvivalMethod::MonteCarlo => "monte_carlo",
            SurvivalMethod::Asymptotic => "asymptotic",
        }
    }
}

/// `(t, P{T_{n+1} > t})` pairs computed by one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub n: usize,
    pub points: Vec<(f64, f64)>,
    pub method: SurvivalMethod,
}

/// Settings for [`survival_curve`] that only some methods use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveOptions {
    /// Upper integration limit for quadrature; required when `beta = 0`.
    pub truncation: Option<f64>,
    pub mc_reps: u64,
    pub mc_seed: u64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            truncation: None,
            mc_reps: DEFAULT_MC_REPS,
            mc_seed: 0,
        }
    }
}

/// The large-`t` form `c b^{-γ} (t + 1/b)^{-γ} e^{-βt}` with `γ = α/b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticForm {
    pub c: f64,
    pub alpha_over_b: f64,
    pub one_over_b: f64,
    pub beta: f64,
}

impl AsymptoticForm {
    /// Tail form of `T_{n+1}` for the given parameters. For `n = 0` the form
    /// is exact with `c = 1`.
    pub fn from_params(params: &ModelParams, n: usize) -> Result<Self> {
        if params.b() == 0.0 {
            return Err(Error::Unsupported("asymptotic form needs b > 0"));
        }
        let c = if n == 0 { 1.0 } else { asymptotic_constant(params, n)? };
        Ok(Self {
            c,
            alpha_over_b: params.alpha() / params.b(),
            one_over_b: 1.0 / params.b(),
            beta: params.beta(),
        })
    }

    /// Builds the form from a curve written as `prefactor (t + t0)^{-γ} e^{-βt}`.
    pub fn from_prefactor(prefactor: f64, gamma: f64, t0: f64, beta: f64) -> Self {
        Self {
            c: prefactor * pow(t0, -gamma),
            alpha_over_b: gamma,
            one_over_b: t0,
            beta,
        }
    }

    /// `c b^{-γ}`, the leading constant when written in `(t + 1/b)` form.
    pub fn prefactor(&self) -> f64 {
        self.c * pow(self.one_over_b, self.alpha_over_b)
    }

    /// Not clamped to `[0, 1]`: the form is only meaningful for large `t`.
    pub fn survival(&self, t: f64) -> f64 {
        self.prefactor() * pow(t + self.one_over_b, -self.alpha_over_b) * exp(-self.beta * t)
    }
}

pub fn asymptotic_survival(form: &AsymptoticForm, t: f64) -> f64 {
    form.survival(t)
}

/// `ln(Λ(x)^{n-1} / (n-1)!)`, with `Λ^0 = 1` even at `x = 0`.
fn log_simplex_volume(params: &ModelParams, n: usize, x: f64) -> f64 {
    if n == 1 {
        0.0
    } else {
        let level = params.cumulative_unchecked(x);
        (n - 1) as f64 * log(level) - lgamma(n as f64)
    }
}

/// Density of the `n`-th arrival time `S_n`.
pub fn arrival_time_density(params: &ModelParams, n: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain { name: "n", value: 0.0 });
    }
    check_non_negative("x", x)?;
    Ok(density_unchecked(params, n, x))
}

fn density_unchecked(params: &ModelParams, n: usize, x: f64) -> f64 {
    let log_f = log(params.intensity_unchecked(x)) + log_simplex_volume(params, n, x)
        - params.cumulative_unchecked(x);
    exp(log_f)
}

/// `P{S_n > x}`: fewer than `n` events by time `x`.
fn arrival_tail(params: &ModelParams, n: usize, x: f64) -> f64 {
    let level = params.cumulative_unchecked(x);
    let mut term = exp(-level);
    let mut sum = term;
    for k in 1..n {
        term *= level / k as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// Breakpoints where the `S_n` density (and the `c(n)` integrand) lives.
fn bulk_breaks(params: &ModelParams, n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut breaks = Vec::new();
    breaks.push(0.0);
    for scale in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        breaks.push(params.inverse_unchecked(nf * scale));
    }
    if params.beta() > 0.0 {
        for scale in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            breaks.push(nf * scale / params.beta());
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

/// `∫_0^∞ f` by adaptive quadrature over the bulk plus a mapped tail.
fn integrate_half_line<F: Fn(f64) -> f64>(f: F, breaks: &[f64], rtol: f64) -> f64 {
    let opts = QuadOptions::relative(rtol);
    let bulk = integrate_with_breaks(&f, breaks, &opts).value;
    let last = *breaks.last().unwrap_or(&0.0);
    let tail_opts = QuadOptions {
        abs_tol: rtol * bulk.abs(),
        ..opts
    };
    bulk + integrate_to_infinity(&f, last, &tail_opts).value
}

/// `c(n) = ∫_0^∞ e^{-βx} λ(x) Λ(x)^{n-1} / (n-1)! dx`, which converges for `β > 0`.
pub fn asymptotic_constant(params: &ModelParams, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain { name: "n", value: 0.0 });
    }
    if params.beta() == 0.0 {
        return Err(Error::Unsupported("c(n) diverges or is unestablished for beta = 0"));
    }
    let beta = params.beta();
    let integrand = |x: f64| {
        exp(-beta * x + log(params.intensity_unchecked(x)) + log_simplex_volume(params, n, x))
    };
    Ok(integrate_half_line(integrand, &bulk_breaks(params, n), CONSTANT_RTOL))
}

/// `P{T_{n+1} > t}` by quadrature of the one-dimensional reduced integral.
///
/// `truncation` bounds the `S_n` integral at `X`; the omitted mass
/// `P{S_n > X}` is added at the midpoint of its bracket
/// `[P{S_n > X} · S(X, t), P{S_n > X} · e^{-βt}]`. Without a truncation bound
/// the integral runs to infinity, which is only supported for `β > 0`.
pub fn marginal_survival_quadrature(
    params: &ModelParams,
    n: usize,
    t: f64,
    truncation: Option<f64>,
) -> Result<f64> {
    check_non_negative("t", t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    if n == 0 {
        return Ok(params.conditional_survival_unchecked(0.0, t));
    }
    // f_{S_n}(x) · e^{-(Λ(x+t) - Λ(x))} = λ(x) Λ(x)^{n-1}/(n-1)! · e^{-Λ(x+t)}
    let integrand = |x: f64| {
        exp(log(params.intensity_unchecked(x)) + log_simplex_volume(params, n, x)
            - params.cumulative_unchecked(x + t))
    };
    let value = match truncation {
        Some(limit) => {
            if !(limit.is_finite() && limit > 0.0) {
                return Err(Error::Domain { name: "truncation", value: limit });
            }
            let mut breaks: Vec<f64> = bulk_breaks(params, n).into_iter().filter(|&x| x < limit).collect();
            breaks.push(limit);
            let body = integrate_with_breaks(integrand, &breaks, &QuadOptions::relative(SURVIVAL_RTOL)).value;
            let missing = arrival_tail(params, n, limit);
            let low = missing * params.conditional_survival_unchecked(limit, t);
            let high = missing * exp(-params.beta() * t);
            body + 0.5 * (low + high)
        }
        None => {
            if params.beta() == 0.0 {
                return Err(Error::Unsupported(
                    "quadrature with beta = 0 needs an explicit truncation bound",
                ));
            }
            integrate_half_line(integrand, &bulk_breaks(params, n), SURVIVAL_RTOL)
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// A Monte Carlo survival estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub survival: f64,
    pub std_error: f64,
    pub reps: u64,
}

impl McEstimate {
    pub fn from_count(exceed: u64, reps: u64) -> Self {
        let p = exceed as f64 / reps as f64;
        Self {
            survival: p,
            std_error: libm::sqrt(p * (1.0 - p) / reps as f64),
            reps,
        }
    }
}

/// For replications `reps` (indices into the seed sequence), counts how many
/// `(n+1)`-th gaps exceed each entry of `ts`.
///
/// Replication `r` draws `n + 1` arrivals by inversion from
/// `EventRng::new(derive_seed(seed, r))`, so counts over disjoint index
/// ranges can be computed independently and summed.
pub fn mc_exceedance_counts(params: &ModelParams, n: usize, ts: &[f64], seed: u64, reps: Range<u64>) -> Vec<u64> {
    let mut counts = alloc::vec![0u64; ts.len()];
    let mut arrivals = Vec::with_capacity(n + 1);
    for r in reps {
        let mut rng = EventRng::new(derive_seed(seed, r));
        arrivals_by_inversion(params, &mut rng, &mut arrivals, n + 1);
        let prev = if n == 0 { 0.0 } else { arrivals[n - 1] };
        let gap = arrivals[n] - prev;
        for (c, &t) in counts.iter_mut().zip(ts) {
            if gap > t {
                *c += 1;
            }
        }
    }
    counts
}

/// `P{T_{n+1} > t}` at each `t` from `reps` simulated streams.
pub fn marginal_survival_mc(params: &ModelParams, n: usize, ts: &[f64], reps: u64, seed: u64) -> Result<Vec<McEstimate>> {
    if reps == 0 {
        return Err(Error::Domain { name: "reps", value: 0.0 });
    }
    for &t in ts {
        check_non_negative("t", t)?;
    }
    Ok(mc_exceedance_counts(params, n, ts, seed, 0..reps)
        .into_iter()
        .map(|c| McEstimate::from_count(c, reps))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalMethod {
    Quadrature { truncation: Option<f64> },
    MonteCarlo { reps: u64, seed: u64 },
}

/// `P{T_{n+1} > t}`; `n = 0` and `t = 0` short-circuit to exact values.
pub fn marginal_survival(params: &ModelParams, n: usize, t: f64, method: MarginalMethod) -> Result<f64> {
    check_non_negative("t", t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    if n == 0 {
        return Ok(params.conditional_survival_unchecked(0.0, t));
    }
    match method {
        MarginalMethod::Quadrature { truncation } => marginal_survival_quadrature(params, n, t, truncation),
        MarginalMethod::MonteCarlo { reps, seed } => {
            Ok(marginal_survival_mc(params, n, &[t], reps, seed)?[0].survival)
        }
    }
}

/// Evaluates `P{T_{n+1} > t}` over `ts` with the chosen method.
///
/// `ClosedForm` exists for `n = 0` and for homogeneous parameters;
/// `Asymptotic` needs `b > 0` (and `β > 0` when `n ≥ 1`).
pub fn survival_curve(
    params: &ModelParams,
    n: usize,
    ts: &[f64],
    method: SurvivalMethod,
    opts: &CurveOptions,
) -> Result<SurvivalCurve> {
    for &t in ts {
        check_non_negative("t", t)?;
    }
    let values: Vec<f64> = match method {
        SurvivalMethod::ClosedForm => {
            if n == 0 {
                ts.iter().map(|&t| params.conditional_survival_unchecked(0.0, t)).collect()
            } else if let Some(rate) = params.exponential_rate() {
                ts.iter().map(|&t| exp(-rate * t)).collect()
            } else {
                return Err(Error::Unsupported(
                    "no closed form for n >= 1 unless the intensity is constant",
                ));
            }
        }
        SurvivalMethod::Quadrature => ts
            .iter()
            .map(|&t| marginal_survival_quadrature(params, n, t, opts.truncation))
            .collect::<Result<_>>()?,
        SurvivalMethod::MonteCarlo => marginal_survival_mc(params, n, ts, opts.mc_reps, opts.mc_seed)?
            .into_iter()
            .map(|e| e.survival)
            .collect(),
        SurvivalMethod::Asymptotic => {
            let form = AsymptoticForm::from_params(params, n)?;
            ts.iter().map(|&t| form.survival(t)).collect()
        }
    };
    Ok(SurvivalCurve {
        n,
        points: ts.iter().copied().zip(values).collect(),
        method,
    })
}
