//! Exact samplers for the decaying-intensity process.
//!
//! Two independent algorithms are provided so each can check the other:
//!
//! * **Inversion** (time change): unit-rate exponential gaps `E_k` are
//!   accumulated on the `Lambda` scale and mapped back through the inverse
//!   cumulative intensity, `S_{k+1} = Lambda^{-1}(Lambda(S_k) + E_k)`.
//!   One exponential per event.
//! * **Thinning**: candidates arrive at the constant majorant `lambda(0)`
//!   and are kept with probability `lambda(t) / lambda(0)`. Each candidate
//!   consumes one exponential (the gap) followed by one uniform (acceptance).
//!
//! The two samplers are not bit-identical at the same seed.
//!
//! With `beta = 0` the thinning acceptance rate decays like `1 / (bt + 1)`
//! while the arrival times grow exponentially in the event index, so
//! event-count runs of more than a few dozen events are impractical there.
//! Inversion has no such cost.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::EventRng;

/// Arrival times `S_1 < S_2 < ... <= horizon`, in days since the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    times: Vec<f64>,
    horizon: f64,
    origin_label: Option<String>,
}

impl EventStream {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidStream("horizon must be positive and finite"));
        }
        if let Some(&first) = times.first() {
            if !(first > 0.0) {
                return Err(Error::InvalidStream("arrival times must be positive"));
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidStream("arrival times must be strictly increasing"));
        }
        if times.last().is_some_and(|&t| !(t <= horizon)) {
            return Err(Error::InvalidStream("arrival times must not exceed the horizon"));
        }
        Ok(Self {
            times,
            horizon,
            origin_label: None,
        })
    }

    pub fn with_origin_label(mut self, label: impl Into<String>) -> Self {
        self.origin_label = Some(label.into());
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn origin_label(&self) -> Option<&str> {
        self.origin_label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `N(t)`: number of arrivals in `(0, t]`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    pub fn into_times(self) -> Vec<f64> {
        self.times
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Observe on `(0, horizon]`.
    Horizon(f64),
    /// Generate exactly this many events; the horizon becomes the last arrival.
    EventCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub params: ModelParams,
    pub stop: StopRule,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(params: ModelParams, stop: StopRule, seed: u64) -> Result<Self> {
        match stop {
            StopRule::Horizon(h) if !(h.is_finite() && h > 0.0) => {
                Err(Error::Domain { name: "horizon", value: h })
            }
            StopRule::EventCount(0) => Err(Error::Domain { name: "event_count", value: 0.0 }),
            _ => Ok(Self { params, stop, seed }),
        }
    }

    pub fn with_horizon(params: ModelParams, horizon: f64, seed: u64) -> Result<Self> {
        Self::new(params, StopRule::Horizon(horizon), seed)
    }

    pub fn with_event_count(params: ModelParams, count: usize, seed: u64) -> Result<Self> {
        Self::new(params, StopRule::EventCount(count), seed)
    }
}

fn finish(times: Vec<f64>, stop: StopRule) -> EventStream {
    let horizon = match stop {
        StopRule::Horizon(h) => h,
        StopRule::EventCount(_) => *times.last().expect("event count is positive"),
    };
    EventStream {
        times,
        horizon,
        origin_label: None,
    }
}

pub fn sample_stream_inversion(spec: &SimulationSpec) -> EventStream {
    let mut rng = EventRng::new(spec.seed);
    let params = &spec.params;
    let mut times = Vec::new();
    let mut level = 0.0;
    match spec.stop {
        StopRule::Horizon(h) => {
            let top = params.cumulative_unchecked(h);
            loop {
                level += rng.standard_exponential();
                if level > top {
                    break;
                }
                times.push(params.inverse_unchecked(level).min(h));
            }
        }
        StopRule::EventCount(n) => {
            times.reserve(n);
            for _ in 0..n {
                level += rng.standard_exponential();
                times.push(params.inverse_unchecked(level));
            }
        }
    }
    finish(times, spec.stop)
}

pub fn sample_stream_thinning(spec: &SimulationSpec) -> EventStream {
    let mut rng = EventRng::new(spec.seed);
    let params = &spec.params;
    let majorant = params.peak_intensity();
    let mut times = Vec::new();
    let mut t = 0.0;
    let (horizon, count) = match spec.stop {
        StopRule::Horizon(h) => (h, usize::MAX),
        StopRule::EventCount(n) => (f64::INFINITY, n),
    };
    while times.len() < count {
        t += rng.standard_exponential() / majorant;
        if t > horizon {
            break;
        }
        let u = rng.uniform();
        if u < params.intensity_unchecked(t) / majorant {
            times.push(t);
        }
    }
    finish(times, spec.stop)
}

/// First `count` arrival times of a fresh stream drawn by inversion from `rng`.
pub(crate) fn arrivals_by_inversion(params: &ModelParams, rng: &mut EventRng, out: &mut Vec<f64>, count: usize) {
    out.clear();
    let mut level = 0.0;
    for _ in 0..count {
        level += rng.standard_exponential();
        out.push(params.inverse_unchecked(level));
    }
}
