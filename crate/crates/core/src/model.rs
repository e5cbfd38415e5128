//! Model parameters, the intensity and its integral, and the regime taxonomy.

use core::fmt;

use libm::{exp, expm1, log1p};

use crate::error::{check_non_negative, Error, Result};

/// Parameters of the intensity `lambda(t) = beta + alpha / (b t + 1)`.
///
/// `alpha` and `beta` are rates (events per day), `b` is the decay rate of
/// the excess interest (per day). At least one of `alpha`, `beta` must be
/// positive, otherwise no event ever occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    b: f64,
}

/// The special cases of the model, keyed by which parameters vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeClass {
    /// `alpha = 0`: homogeneous Poisson process with rate `beta`.
    ExponentialBeta,
    /// `beta = 0, b = 0`: homogeneous with rate `alpha`.
    ExponentialAlpha,
    /// `b = 0`, both rates positive: homogeneous with rate `alpha + beta`.
    ExponentialAlphaPlusBeta,
    /// `beta = 0, b > 0`: pure power-law decay, fat-tailed gaps.
    PureFatTail,
    /// All positive: power law with an exponential cutoff.
    PowerLawExpCutoff,
}

impl RegimeClass {
    pub const ALL: [RegimeClass; 5] = [
        RegimeClass::ExponentialBeta,
        RegimeClass::ExponentialAlpha,
        RegimeClass::ExponentialAlphaPlusBeta,
        RegimeClass::PureFatTail,
        RegimeClass::PowerLawExpCutoff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeClass::ExponentialBeta => "ExponentialBeta",
            RegimeClass::ExponentialAlpha => "ExponentialAlpha",
            RegimeClass::ExponentialAlphaPlusBeta => "ExponentialAlphaPlusBeta",
            RegimeClass::PureFatTail => "PureFatTail",
            RegimeClass::PowerLawExpCutoff => "PowerLawExpCutoff",
        }
    }

    pub fn is_exponential(self) -> bool {
        matches!(
            self,
            RegimeClass::ExponentialBeta
                | RegimeClass::ExponentialAlpha
                | RegimeClass::ExponentialAlphaPlusBeta
        )
    }
}

impl fmt::Display for RegimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// Residual target |Lambda(t) - y| <= INVERSE_RTOL * max(1, y).
const INVERSE_RTOL: f64 = 1e-13;
const INVERSE_MAX_ITER: usize = 100;

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, b: f64) -> Result<Self> {
        let checks = [
            (alpha, "alpha must be finite and non-negative"),
            (beta, "beta must be finite and non-negative"),
            (b, "b must be finite and non-negative"),
        ];
        for (v, msg) in checks {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(msg));
            }
        }
        if alpha + beta <= 0.0 {
            return Err(Error::InvalidParams("alpha + beta must be positive"));
        }
        Ok(Self { alpha, beta, b })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// True when the intensity is constant in time (`alpha = 0` or `b = 0`).
    pub fn is_homogeneous(&self) -> bool {
        self.alpha == 0.0 || self.b == 0.0
    }

    /// `lambda(0) = alpha + beta`, the supremum of the intensity.
    pub fn peak_intensity(&self) -> f64 {
        self.alpha + self.beta
    }

    pub fn intensity(&self, t: f64) -> Result<f64> {
        check_non_negative("t", t)?;
        Ok(self.intensity_unchecked(t))
    }

    pub(crate) fn intensity_unchecked(&self, t: f64) -> f64 {
        self.beta + self.alpha / (self.b * t + 1.0)
    }

    /// `Lambda(t) = beta t + (alpha / b) ln(b t + 1)`.
    ///
    /// `b = 0` (compared exactly) takes the branch `(alpha + beta) t`; the
    /// logarithmic branch tends to it continuously as `b -> 0`.
    pub fn cumulative_intensity(&self, t: f64) -> Result<f64> {
        check_non_negative("t", t)?;
        Ok(self.cumulative_unchecked(t))
    }

    pub(crate) fn cumulative_unchecked(&self, t: f64) -> f64 {
        self.beta * t + self.excess_cumulative(t)
    }

    /// `(alpha / b) ln(b t + 1)`, the part of `Lambda` above the baseline.
    fn excess_cumulative(&self, t: f64) -> f64 {
        if self.alpha == 0.0 {
            0.0
        } else if self.b == 0.0 {
            self.alpha * t
        } else {
            self.alpha * (log1p(self.b * t) / self.b)
        }
    }

    /// Solves `Lambda(t) = y` for `t`.
    ///
    /// Homogeneous and `beta = 0` cases are inverted in closed form. The general
    /// case runs Newton's method from the lower bound `y / lambda(0)`, safeguarded
    /// by bisection on the bracket `[y / lambda(0), min(y / beta, (exp(y b / alpha) - 1) / b)]`.
    /// Because `Lambda` is concave, Newton iterates approach the root from below.
    pub fn inverse_cumulative_intensity(&self, y: f64) -> Result<f64> {
        check_non_negative("y", y)?;
        Ok(self.inverse_unchecked(y))
    }

    pub(crate) fn inverse_unchecked(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        if self.is_homogeneous() {
            return y / self.peak_intensity();
        }
        let ratio = self.alpha / self.b;
        if self.beta == 0.0 {
            return expm1(y / ratio) / self.b;
        }

        let mut lo = y / self.peak_intensity();
        let mut hi = y / self.beta;
        let log_bound = y / ratio;
        if log_bound < 700.0 {
            hi = hi.min(expm1(log_bound) / self.b);
        }
        let tol = INVERSE_RTOL * y.max(1.0);

        let mut t = lo;
        for _ in 0..INVERSE_MAX_ITER {
            let f = self.cumulative_unchecked(t) - y;
            if f.abs() <= tol {
                return t;
            }
            if f < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let next = t - f / self.intensity_unchecked(t);
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo <= f64::EPSILON * hi {
                return t;
            }
        }
        t
    }

    /// `P{next gap > t | last event at x} = exp(-(Lambda(x + t) - Lambda(x)))`,
    /// evaluated in the closed form `e^{-beta t} ((b(x+t)+1)/(bx+1))^{-alpha/b}`
    /// and clamped to `[0, 1]`.
    ///
    /// With `x = 0` this is the exact survival of the first arrival.
    pub fn conditional_survival(&self, x: f64, t: f64) -> Result<f64> {
        check_non_negative("x", x)?;
        check_non_negative("t", t)?;
        Ok(self.conditional_survival_unchecked(x, t))
    }

    pub(crate) fn conditional_survival_unchecked(&self, x: f64, t: f64) -> f64 {
        let excess = if self.alpha == 0.0 {
            0.0
        } else if self.b == 0.0 {
            self.alpha * t
        } else {
            let bt = self.b * t;
            self.alpha * (log1p(bt / (self.b * x + 1.0)) / self.b)
        };
        exp(-(self.beta * t + excess)).clamp(0.0, 1.0)
    }

    pub fn classify_regime(&self) -> RegimeClass {
        let (a, be, b) = (self.alpha > 0.0, self.beta > 0.0, self.b > 0.0);
        match (a, be, b) {
            (false, _, _) => RegimeClass::ExponentialBeta,
            (true, false, false) => RegimeClass::ExponentialAlpha,
            (true, true, false) => RegimeClass::ExponentialAlphaPlusBeta,
            (true, false, true) => RegimeClass::PureFatTail,
            (true, true, true) => RegimeClass::PowerLawExpCutoff,
        }
    }

    /// Rate of the homogeneous process, if the parameters describe one.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.classify_regime() {
            RegimeClass::ExponentialBeta => Some(self.beta),
            RegimeClass::ExponentialAlpha => Some(self.alpha),
            RegimeClass::ExponentialAlphaPlusBeta => Some(self.alpha + self.beta),
            _ => None,
        }
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(alpha={}, beta={}, b={})", self.alpha, self.beta, self.b)
    }
}

/// Validates parameters given as a raw triple and classifies them.
pub fn classify_regime(alpha: f64, beta: f64, b: f64) -> Result<RegimeClass> {
    ModelParams::new(alpha, beta, b).map(|p| p.classify_regime())
}
