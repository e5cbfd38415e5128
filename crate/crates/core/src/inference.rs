//! Parameter recovery from observed data.
//!
//! Two routes:
//!
//! * [`fit_mle`] maximizes the point-process likelihood of raw arrival
//!   times, `Σ ln λ(S_i) - Λ(horizon)`, by Nelder-Mead over log-parameters.
//! * [`fit_ccdf`] fits `prefactor · (t + t0)^{-γ} · e^{-βt}` to an empirical
//!   survival curve by least squares on log-survival. For fixed `(t0, β)` the
//!   problem is linear in `(ln prefactor, γ)` and solved exactly; the outer
//!   two-dimensional search runs on a grid and is then polished.
//!
//! `α` and `b` are only weakly identified from a single stream (the decay
//! trades off against the baseline), so recovered intensities `λ̂(t)` are far
//! more stable than the raw triple.

use alloc::vec::Vec;

use libm::{exp, log, pow};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::simulate::EventStream;
use crate::theory::AsymptoticForm;

pub const MIN_MLE_EVENTS: usize = 20;
pub const MIN_CCDF_POINTS: usize = 8;
/// Tail points resting on this many largest gaps are left out of CCDF fits.
pub const DEFAULT_EXCLUDE_LARGEST: usize = 2;
/// Log-likelihood loss below which [`threshold_params`] zeroes a parameter.
pub const THRESHOLD_LOGLIK: f64 = 0.5;

/// `Σ ln λ(S_i) - Λ(horizon)`: the log joint density of the arrivals together
/// with the probability of no further event up to the horizon.
pub fn log_likelihood(params: &ModelParams, stream: &EventStream) -> f64 {
    let (alpha, beta, b) = (params.alpha(), params.beta(), params.b());
    let sum: f64 = stream
        .times()
        .iter()
        .map(|&s| log(beta + alpha / (b * s + 1.0)))
        .sum();
    sum - params.cumulative_unchecked(stream.horizon())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub params: ModelParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl MleFit {
    pub fn fitted_intensity(&self, t: f64) -> f64 {
        self.params.intensity_unchecked(t)
    }
}

/// Starting point used when [`fit_mle`] is given no initial guess:
/// `β₀ = N / (2T)`, `b₀ = 10 / T`, and `α₀` chosen so that `λ(0)` matches the
/// event rate over the first decile of arrivals.
pub fn default_initial_guess(stream: &EventStream) -> Result<ModelParams> {
    let n = stream.len();
    if n == 0 {
        return Err(Error::TooFewEvents {
            needed: MIN_MLE_EVENTS,
            got: 0,
        });
    }
    let horizon = stream.horizon();
    let beta0 = n as f64 / horizon * 0.5;
    let b0 = 10.0 / horizon;
    let k = (n / 10).max(1);
    let early_rate = k as f64 / stream.times()[k - 1];
    let alpha0 = (early_rate - beta0).max(1e-3 * beta0);
    ModelParams::new(alpha0, beta0, b0)
}

/// Options for [`fit_mle_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub simplex: NelderMeadOptions,
    /// Extra Nelder-Mead runs started from the previous optimum.
    pub restarts: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            simplex: NelderMeadOptions {
                x_tol: 1e-8,
                max_iterations: 10_000,
                initial_step: 0.5,
            },
            restarts: 2,
        }
    }
}

pub fn fit_mle(stream: &EventStream, init: Option<ModelParams>) -> Result<MleFit> {
    fit_mle_with(stream, init, &MleOptions::default())
}

/// Maximizes the log-likelihood over `α, β, b ≥ 0` with parameters written as
/// `exp(u)` for unconstrained `u`. Zero components of the initial guess are
/// lifted to a small positive floor so they have a logarithm.
pub fn fit_mle_with(stream: &EventStream, init: Option<ModelParams>, opts: &MleOptions) -> Result<MleFit> {
    if stream.len() < MIN_MLE_EVENTS {
        return Err(Error::TooFewEvents {
            needed: MIN_MLE_EVENTS,
            got: stream.len(),
        });
    }
    let init = match init {
        Some(p) => p,
        None => default_initial_guess(stream)?,
    };
    let init_ll = log_likelihood(&init, stream);

    let rate_scale = stream.len() as f64 / stream.horizon();
    let floor = |v: f64, scale: f64| if v > 0.0 { v } else { 1e-6 * scale };
    let mut u = [
        log(floor(init.alpha(), rate_scale)),
        log(floor(init.beta(), rate_scale)),
        log(floor(init.b(), 1.0 / stream.horizon())),
    ];

    let to_params = |u: &[f64]| ModelParams::new(exp(u[0]), exp(u[1]), exp(u[2])).ok();
    let objective = |u: &[f64]| match to_params(u) {
        Some(p) => -log_likelihood(&p, stream),
        None => f64::INFINITY,
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut best_value = f64::INFINITY;
    for _ in 0..=opts.restarts {
        let run = nelder_mead(objective, &u, &opts.simplex);
        iterations += run.iterations;
        converged = run.converged;
        let improved = best_value - run.value;
        if run.value <= best_value {
            u.copy_from_slice(&run.x);
            best_value = run.value;
        }
        if !(improved > 1e-9) || iterations >= opts.simplex.max_iterations {
            break;
        }
    }

    let fitted = to_params(&u).ok_or(Error::InvalidParams("optimizer left the parameter domain"))?;
    let fitted_ll = log_likelihood(&fitted, stream);
    let (params, log_likelihood) = if fitted_ll >= init_ll {
        (fitted, fitted_ll)
    } else {
        (init, init_ll)
    };
    Ok(MleFit {
        params,
        log_likelihood,
        converged,
        iterations,
    })
}

/// Sets to zero each parameter whose removal costs less than `tolerance` in
/// log-likelihood, trying the cheapest removal first and re-checking after
/// each change. The cost of a removal is measured after refitting the
/// parameters that remain free. A removal that would leave `α = β = 0` is
/// never made.
pub fn threshold_params(stream: &EventStream, params: &ModelParams, tolerance: f64) -> ModelParams {
    let mut current = *params;
    let mut current_ll = log_likelihood(&current, stream);
    loop {
        let values = [current.alpha(), current.beta(), current.b()];
        let best = (0..3)
            .filter(|&i| values[i] > 0.0)
            .filter_map(|i| {
                let mut free = values.map(|v| v > 0.0);
                free[i] = false;
                refit_restricted(stream, &current, free)
            })
            .map(|c| (log_likelihood(&c, stream), c))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        match best {
            Some((ll, c)) if current_ll - ll < tolerance => {
                current = c;
                current_ll = ll;
            }
            _ => return current,
        }
    }
}

/// Maximum-likelihood refit with the parameters outside `free` fixed at zero,
/// starting from `start`. `None` if the restriction leaves no intensity.
fn refit_restricted(stream: &EventStream, start: &ModelParams, free: [bool; 3]) -> Option<ModelParams> {
    let [alpha, beta, b] = free;
    if !alpha && !beta {
        return None;
    }
    let rate = stream.len() as f64 / stream.horizon();
    // constant intensity: the Poisson rate N / T is the exact optimum
    if !alpha || !b {
        return if beta {
            ModelParams::new(0.0, rate, 0.0).ok()
        } else {
            ModelParams::new(rate, 0.0, 0.0).ok()
        };
    }
    let start_values = [start.alpha(), start.beta(), start.b()];
    let index: Vec<usize> = (0..3).filter(|&i| free[i]).collect();
    let u0: Vec<f64> = index.iter().map(|&i| log(start_values[i])).collect();
    let to_params = |u: &[f64]| {
        let mut v = [0.0; 3];
        for (&i, &x) in index.iter().zip(u) {
            v[i] = exp(x);
        }
        ModelParams::new(v[0], v[1], v[2]).ok()
    };
    let objective = |u: &[f64]| to_params(u).map_or(f64::INFINITY, |p| -log_likelihood(&p, stream));
    let run = nelder_mead(objective, &u0, &MleOptions::default().simplex);
    to_params(&run.x)
}

/// `prefactor · (t + t0)^{-γ} · e^{-βt}` fitted to an empirical survival curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPowerLawFit {
    pub prefactor: f64,
    pub gamma: f64,
    pub t0: f64,
    pub beta: f64,
    /// Sum of squared log-residuals (weighted, if weights were given).
    pub sse: f64,
    pub n_points: usize,
}

impl CutoffPowerLawFit {
    pub fn survival(&self, t: f64) -> f64 {
        self.prefactor * pow(t + self.t0, -self.gamma) * exp(-self.beta * t)
    }

    /// Model parameters implied by the fit: `b = 1/t0`, `α = γ/t0`.
    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.gamma / self.t0, self.beta, 1.0 / self.t0)
    }

    pub fn asymptotic_form(&self) -> AsymptoticForm {
        AsymptoticForm::from_prefactor(self.prefactor, self.gamma, self.t0, self.beta)
    }
}

pub fn fit_ccdf(ccdf: &crate::stats::EmpiricalCcdf, weights: Option<&[f64]>) -> Result<CutoffPowerLawFit> {
    fit_ccdf_with(ccdf, weights, DEFAULT_EXCLUDE_LARGEST)
}

struct LogCurve {
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

struct Profile {
    log_prefactor: f64,
    gamma: f64,
    sse: f64,
}

impl LogCurve {
    /// Exact weighted least squares for `(ln prefactor, γ ≥ 0)` at fixed `(t0, β)`.
    fn profile(&self, t0: f64, beta: f64) -> Profile {
        let (mut sw, mut sx, mut sz) = (0.0, 0.0, 0.0);
        for ((&t, &y), &w) in self.t.iter().zip(&self.y).zip(&self.w) {
            sw += w;
            sx += w * log(t + t0);
            sz += w * (y + beta * t);
        }
        let (mx, mz) = (sx / sw, sz / sw);
        let (mut sxx, mut sxz) = (0.0, 0.0);
        for ((&t, &y), &w) in self.t.iter().zip(&self.y).zip(&self.w) {
            let dx = log(t + t0) - mx;
            sxx += w * dx * dx;
            sxz += w * dx * (y + beta * t - mz);
        }
        let gamma = if sxx > 0.0 { (-sxz / sxx).max(0.0) } else { 0.0 };
        let log_prefactor = mz + gamma * mx;
        let sse = self
            .t
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&t, &y), &w)| {
                let r = y - (log_prefactor - gamma * log(t + t0) - beta * t);
                w * r * r
            })
            .sum();
        Profile {
            log_prefactor,
            gamma,
            sse,
        }
    }
}

/// [`fit_ccdf`] with an explicit tail exclusion: points whose survival rests
/// on `exclude_largest` or fewer sample values (`survival · n ≤ k`) are
/// dropped. Curves with `sample_size = 0` are not sample-based and keep every
/// point with positive survival.
pub fn fit_ccdf_with(
    ccdf: &crate::stats::EmpiricalCcdf,
    weights: Option<&[f64]>,
    exclude_largest: usize,
) -> Result<CutoffPowerLawFit> {
    if let Some(w) = weights {
        if w.len() != ccdf.points.len() {
            return Err(Error::Unsupported("weights must match the number of ccdf points"));
        }
        if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::Unsupported("weights must be finite and non-negative"));
        }
    }
    let n = ccdf.sample_size as f64;
    let mut curve = LogCurve {
        t: Vec::new(),
        y: Vec::new(),
        w: Vec::new(),
    };
    for (i, &(t, s)) in ccdf.points.iter().enumerate() {
        let exceed = libm::round(s * n);
        let w = weights.map_or(1.0, |w| w[i]);
        let resting_on_tail = ccdf.sample_size > 0 && exceed <= exclude_largest as f64;
        if s > 0.0 && t >= 0.0 && w > 0.0 && !resting_on_tail {
            curve.t.push(t);
            curve.y.push(log(s));
            curve.w.push(w);
        }
    }
    let used = curve.t.len();
    if used < MIN_CCDF_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_CCDF_POINTS,
            got: used,
        });
    }

    let t_first = curve.t[0];
    let t_last = curve.t[used - 1];
    let scale = t_last.max(f64::MIN_POSITIVE);
    let drop = curve.y[0] - curve.y[used - 1];
    let beta_max = (3.0 * drop / (t_last - t_first)).max(1e-6 / scale);

    const T0_STEPS: usize = 80;
    const BETA_STEPS: usize = 60;
    let t0_lo = 1e-4 * scale;
    let t0_ratio = 1e6;
    let t0_at = |i: usize| t0_lo * pow(t0_ratio, i as f64 / (T0_STEPS - 1) as f64);

    let mut grid: Vec<(f64, f64, f64)> = Vec::with_capacity(T0_STEPS * BETA_STEPS);
    for i in 0..T0_STEPS {
        let t0 = t0_at(i);
        for j in 0..BETA_STEPS {
            let beta = beta_max * j as f64 / (BETA_STEPS - 1) as f64;
            grid.push((curve.profile(t0, beta).sse, t0, beta));
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));

    let polish = NelderMeadOptions {
        x_tol: 1e-13,
        max_iterations: 20_000,
        initial_step: 0.1,
    };
    let objective = |v: &[f64]| {
        if v[1] < 0.0 {
            return f64::INFINITY;
        }
        curve.profile(exp(v[0]), v[1] * beta_max).sse
    };

    let mut best: Option<(f64, f64, f64)> = None;
    for &(sse, t0, beta) in grid.iter().take(5) {
        let mut x = [log(t0), beta / beta_max];
        let mut value = sse;
        for _ in 0..3 {
            let run = nelder_mead(objective, &x, &polish);
            if run.value <= value {
                x = [run.x[0], run.x[1]];
                value = run.value;
            }
            if run.converged && run.value >= value {
                break;
            }
        }
        if best.is_none_or(|b| value < b.0) {
            best = Some((value, exp(x[0]), x[1] * beta_max));
        }
    }
    let (_, t0, beta) = best.expect("grid is non-empty");
    let profile = curve.profile(t0, beta);
    Ok(CutoffPowerLawFit {
        prefactor: exp(profile.log_prefactor),
        gamma: profile.gamma,
        t0,
        beta,
        sse: profile.sse,
        n_points: used,
    })
}
