//! Interarrival samples, empirical survival functions, and Kolmogorov-Smirnov
//! checks, including the time-rescaling goodness-of-fit test.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::simulate::EventStream;

/// Default number of geometric bins for log-scale CCDFs.
pub const DEFAULT_LOG_BINS: usize = 25;

/// Asymptotic two-sided KS coefficient at the 1% level.
pub const KS_COEFF_1PCT: f64 = 1.628;

/// Minimum stream length accepted by [`rescale_and_test`].
pub const MIN_GOF_EVENTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct InterarrivalSample {
    pub values: Vec<f64>,
    /// Gaps that are exactly zero (ties in coarsely timestamped data).
    pub zero_count: usize,
}

impl InterarrivalSample {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain {
                name: "gap",
                value: values
                    .iter()
                    .copied()
                    .find(|v| !(v.is_finite() && *v >= 0.0))
                    .unwrap_or(f64::NAN),
            });
        }
        let zero_count = values.iter().filter(|&&v| v == 0.0).count();
        Ok(Self { values, zero_count })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn positive_sorted(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.values.iter().copied().filter(|&x| x > 0.0).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Gaps between consecutive arrivals. With `include_first`, the first
/// arrival time itself (the gap from the origin `S_0 = 0`) is prepended.
pub fn interarrivals(stream: &EventStream, include_first: bool) -> Result<InterarrivalSample> {
    let times = stream.times();
    let mut values = Vec::with_capacity(times.len());
    if include_first {
        if let Some(&first) = times.first() {
            values.push(first);
        }
    }
    values.extend(times.windows(2).map(|w| w[1] - w[0]));
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    InterarrivalSample::from_values(values)
}

/// Points `(t, P{T > t})`; `t` strictly increasing, survival non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCcdf {
    pub points: Vec<(f64, f64)>,
    /// Number of positive gaps the estimate is based on.
    pub sample_size: usize,
}

impl EmpiricalCcdf {
    /// Wraps precomputed points, checking the ordering invariants.
    pub fn from_points(points: Vec<(f64, f64)>, sample_size: usize) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].0 > w[0].0) || w[1].1 > w[0].1) {
            return Err(Error::Unsupported(
                "ccdf points must have increasing t and non-increasing survival",
            ));
        }
        if points
            .iter()
            .any(|&(t, s)| !t.is_finite() || !(0.0..=1.0).contains(&s))
        {
            return Err(Error::Unsupported("ccdf survival values must lie in [0, 1]"));
        }
        Ok(Self {
            points,
            sample_size,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Empirical survival `#{values > t} / n` over the positive gaps.
///
/// Unbinned, it is evaluated at each distinct value. With `log_bins = Some(k)`
/// it is evaluated at `k` geometrically spaced abscissae between the smallest
/// and largest positive gap.
pub fn empirical_ccdf(sample: &InterarrivalSample, log_bins: Option<usize>) -> Result<EmpiricalCcdf> {
    let sorted = sample.positive_sorted();
    let n = sorted.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    let exceed = |t: f64| (n - sorted.partition_point(|&v| v <= t)) as f64 / nf;

    let points = match log_bins {
        None => {
            let mut pts: Vec<(f64, f64)> = Vec::new();
            for (i, &v) in sorted.iter().enumerate() {
                if i + 1 < n && sorted[i + 1] == v {
                    continue;
                }
                pts.push((v, (n - i - 1) as f64 / nf));
            }
            pts
        }
        Some(0) => return Err(Error::Domain { name: "log_bins", value: 0.0 }),
        Some(k) => {
            let (lo, hi) = (sorted[0], sorted[n - 1]);
            if k == 1 || lo == hi {
                alloc::vec![(lo, exceed(lo))]
            } else {
                let span = log(hi / lo);
                let mut pts: Vec<(f64, f64)> = Vec::with_capacity(k);
                for j in 0..k {
                    let t = if j + 1 == k {
                        hi
                    } else {
                        lo * exp(span * j as f64 / (k - 1) as f64)
                    };
                    if pts.last().is_some_and(|&(prev, _)| t <= prev) {
                        continue;
                    }
                    pts.push((t, exceed(t)));
                }
                pts
            }
        }
    };
    Ok(EmpiricalCcdf {
        points,
        sample_size: n,
    })
}

/// Weights `n·s / (1 - s)` for a least-squares fit of `ln s`: the reciprocal
/// of the binomial variance of the log of an empirical survival value.
/// Points with `s` equal to 0 or 1 get weight 0.
pub fn inverse_variance_weights(ccdf: &EmpiricalCcdf) -> Vec<f64> {
    let n = ccdf.sample_size as f64;
    ccdf.points
        .iter()
        .map(|&(_, s)| if s > 0.0 && s < 1.0 { n * s / (1.0 - s) } else { 0.0 })
        .collect()
}

/// One-sample KS distance between `values` and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// KS distance against the exponential law with the given rate.
pub fn ks_exponential(values: &[f64], rate: f64) -> f64 {
    ks_statistic(values, |x| if x <= 0.0 { 0.0 } else { -libm::expm1(-rate * x) })
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// 1% critical value for a one-sample KS test of size `n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_COEFF_1PCT / sqrt(n as f64)
}

/// 1% critical value for a two-sample KS test of sizes `n`, `m`.
pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.63 * sqrt((n + m) / (n * m))
}

/// Largest deviation a CDF estimate from `n` draws exceeds with probability
/// at most `delta` (Dvoretzky-Kiefer-Wolfowitz).
pub fn dkw_bound(n: usize, delta: f64) -> f64 {
    sqrt(log(2.0 / delta) / (2.0 * n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofReport {
    pub ks_statistic: f64,
    pub sample_size: usize,
    pub critical_value_1pct: f64,
    pub pass: bool,
}

impl GofReport {
    pub fn from_statistic(ks_statistic: f64, sample_size: usize) -> Self {
        let critical_value_1pct = ks_critical_1pct(sample_size);
        Self {
            ks_statistic,
            sample_size,
            critical_value_1pct,
            pass: ks_statistic < critical_value_1pct,
        }
    }
}

/// Gaps on the `Lambda` scale, `Lambda(S_k) - Lambda(S_{k-1})` with `S_0 = 0`.
pub fn rescaled_gaps(stream: &EventStream, params: &ModelParams) -> Vec<f64> {
    let mut prev = 0.0;
    stream
        .times()
        .iter()
        .map(|&s| {
            let level = params.cumulative_unchecked(s);
            let gap = level - prev;
            prev = level;
            gap
        })
        .collect()
}

/// Time-rescaling test: under the true parameters the rescaled gaps are
/// i.i.d. Exp(1); their KS distance is compared with the 1% critical value.
pub fn rescale_and_test(stream: &EventStream, params: &ModelParams) -> Result<GofReport> {
    if stream.len() < MIN_GOF_EVENTS {
        return Err(Error::TooFewEvents {
            needed: MIN_GOF_EVENTS,
            got: stream.len(),
        });
    }
    let gaps = rescaled_gaps(stream, params);
    Ok(GofReport::from_statistic(ks_exponential(&gaps, 1.0), gaps.len()))
}
