//! Acceptance checks. Each prints one `PASS`/`FAIL` line; the process exits
//! non-zero if any check fails. Tolerances are fixed here and never tuned to
//! the outcome.

use std::time::{Duration, Instant};

use waning_core::inference::{fit_ccdf, fit_ccdf_with, fit_mle, threshold_params, THRESHOLD_LOGLIK};
use waning_core::rng::derive_seed;
use waning_core::simulate::{sample_stream_inversion, sample_stream_thinning};
use waning_core::stats::{
    dkw_bound, empirical_ccdf, interarrivals, inverse_variance_weights, ks_exponential, ks_statistic, ks_two_sample,
    ks_two_sample_critical_1pct, rescale_and_test,
};
use waning_core::theory::{asymptotic_constant, marginal_survival_quadrature};
use waning_core::{AsymptoticForm, EmpiricalCcdf, InterarrivalSample, ModelParams, SimulationSpec};

const BASE_SEED: u64 = 20_100_220;

struct Outcome {
    pass: bool,
    detail: String,
}

fn p(alpha: f64, beta: f64, b: f64) -> ModelParams {
    ModelParams::new(alpha, beta, b).unwrap()
}

fn first_arrivals(params: ModelParams, count: u64, seed: u64) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let spec = SimulationSpec::with_event_count(params, 1, derive_seed(seed, i)).unwrap();
            sample_stream_inversion(&spec).times()[0]
        })
        .collect()
}

fn first_interarrival_law() -> Outcome {
    let q = p(1.0, 0.1, 0.2);
    let n = 100_000;
    let start = Instant::now();
    let draws = first_arrivals(q, n, derive_seed(BASE_SEED, 1));
    // sup |F_n - F| over all t, which bounds every pointwise CCDF deviation
    let d = ks_statistic(&draws, |t| 1.0 - (-0.1 * t).exp() * (0.2 * t + 1.0).powf(-5.0));
    let bound = dkw_bound(n as usize, 0.01);
    let elapsed = start.elapsed();
    Outcome {
        pass: d <= bound && elapsed < Duration::from_secs(60),
        detail: format!("max deviation {d:.5} vs DKW {bound:.5}, {:.1}s", elapsed.as_secs_f64()),
    }
}

fn asymptote_ratio() -> Outcome {
    let q = p(1.0, 0.1, 0.2);
    let start = Instant::now();
    let form = AsymptoticForm::from_params(&q, 5).unwrap();
    let c5 = asymptotic_constant(&q, 5).unwrap();
    // T*: the asymptote equals 1e-3 (it is decreasing in t)
    let (mut lo, mut hi) = (0.0, 1e4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if form.survival(mid) > 1e-3 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_star = 0.5 * (lo + hi);
    let ratios: Vec<f64> = (0..=20)
        .map(|k| {
            let t = t_star * (1.0 + k as f64 / 20.0);
            marginal_survival_quadrature(&q, 5, t, None).unwrap() / form.survival(t)
        })
        .collect();
    let (min, max) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let far = marginal_survival_quadrature(&q, 5, 3000.0, None).unwrap() / form.survival(3000.0);
    let elapsed = start.elapsed();
    Outcome {
        pass: min >= 0.9 && max <= 1.1 && elapsed < Duration::from_secs(300),
        detail: format!(
            "c(5) = {c5:.4}, T* = {t_star:.2}, ratio on [T*, 2T*] in [{min:.4}, {max:.4}] (ratio at t=3000: {far:.4}), {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn regime_collapse() -> Outcome {
    let cases = [
        ("beta", p(0.0, 1.0, 0.5), 1.0),
        ("alpha", p(1.5, 0.0, 0.0), 1.5),
        ("alpha+beta", p(0.7, 0.3, 0.0), 1.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, params, rate)) in cases.into_iter().enumerate() {
        let passed = (0..100)
            .filter(|&s| {
                let seed = derive_seed(BASE_SEED + 3, 100 * i as u64 + s);
                let stream = sample_stream_inversion(&SimulationSpec::with_event_count(params, 1000, seed).unwrap());
                let gaps = interarrivals(&stream, true).unwrap().values;
                ks_exponential(&gaps, rate) < waning_core::stats::ks_critical_1pct(gaps.len())
            })
            .count();
        pass &= passed >= 97;
        // calibration over a wider sweep, reported but not judged
        let sweep = 2000u64;
        let rejected = (0..sweep)
            .filter(|&s| {
                let seed = derive_seed(BASE_SEED + 30 + i as u64, s);
                let stream = sample_stream_inversion(&SimulationSpec::with_event_count(params, 1000, seed).unwrap());
                let gaps = interarrivals(&stream, true).unwrap().values;
                ks_exponential(&gaps, rate) >= waning_core::stats::ks_critical_1pct(gaps.len())
            })
            .count();
        parts.push(format!(
            "{name}: {passed}/100 (rejection rate {:.2}% over {sweep} more seeds)",
            100.0 * rejected as f64 / sweep as f64
        ));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn sampler_equivalence() -> Outcome {
    let q = p(1.0, 0.1, 0.2);
    // Lambda(2000) = 200 + 5 ln 401, about 230 events per stream
    let horizon = 2000.0;
    let passed = (0..100u64)
        .filter(|&s| {
            let a = sample_stream_inversion(&SimulationSpec::with_horizon(q, horizon, derive_seed(BASE_SEED + 4, 2 * s)).unwrap());
            let b = sample_stream_thinning(&SimulationSpec::with_horizon(q, horizon, derive_seed(BASE_SEED + 4, 2 * s + 1)).unwrap());
            // given their count, arrival times on (0, T] are i.i.d. with density lambda / Lambda(T)
            ks_two_sample(a.times(), b.times()) < ks_two_sample_critical_1pct(a.len(), b.len())
        })
        .count();
    Outcome {
        pass: passed >= 97,
        detail: format!("{passed}/100 seeds below the 1% critical value"),
    }
}

/// 30 log-spaced samples on [1, 60]. Panel C's form exceeds 1 below t = 0.6,
/// so the grid starts at 1.
fn log_spaced_curve(f: impl Fn(f64) -> f64) -> EmpiricalCcdf {
    let points = (0..30)
        .map(|i| {
            let t = 60f64.powf(i as f64 / 29.0);
            (t, f(t))
        })
        .collect();
    EmpiricalCcdf::from_points(points, 0).unwrap()
}

fn survival_fit_round_trip() -> Outcome {
    let gamma = 0.5;
    let t0 = 7.7;
    let q = p(gamma / t0, 0.065, 1.0 / t0);
    let fit_ensemble = |seed: u64| {
        let sample = InterarrivalSample::from_values(first_arrivals(q, 50_000, seed)).unwrap();
        let ccdf = empirical_ccdf(&sample, Some(25)).unwrap();
        fit_ccdf_with(&ccdf, Some(&inverse_variance_weights(&ccdf)), 2).unwrap()
    };
    let in_band = |g: f64, b: f64| (g - 0.5).abs() <= 0.1 && (b - 0.065).abs() <= 0.01;

    let fit = fit_ensemble(derive_seed(BASE_SEED + 5, 0));
    let mut pass = in_band(fit.gamma, fit.beta);
    let spread = (1..=20)
        .filter(|&k| {
            let f = fit_ensemble(derive_seed(BASE_SEED + 5, k));
            in_band(f.gamma, f.beta)
        })
        .count();

    let published = [
        ("A", 1.85, 0.5, 7.7, 0.065),
        ("B", 1.19, 0.16, 4.0, 0.04),
        ("C", 1.95, 0.45, 3.0, 0.15),
        ("D", 1.08, 0.2, 1.6, 0.125),
    ];
    let mut worst = 0.0f64;
    for (_, pre, g, t0, beta) in published {
        let curve = log_spaced_curve(|t| pre * (t + t0).powf(-g) * (-beta * t).exp());
        let f = fit_ccdf(&curve, None).unwrap();
        for (got, want) in [(f.prefactor, pre), (f.gamma, g), (f.t0, t0), (f.beta, beta)] {
            worst = worst.max((got - want).abs());
        }
    }
    pass &= worst <= 1e-4;
    Outcome {
        pass,
        detail: format!(
            "ensemble fit gamma = {:.4}, beta = {:.5}; {spread}/20 further ensembles in band; noiseless A-D worst error {worst:.2e}",
            fit.gamma, fit.beta
        ),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = pk;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = pk;
                    }
                    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    return (x, 2.0 / ((1.0 - x * x) * dp * dp));
                }
            }
        })
        .collect()
}

/// Direct nested quadrature of the iterated integrals
/// `I_0 = 1`, `I_j(x) = ∫_0^x λ(u) I_{j-1}(u) du`, on unit panels.
struct Nested<'a> {
    lambda: &'a dyn Fn(f64) -> f64,
    rule: Vec<(f64, f64)>,
    /// `panel_ends[j][k] = I_j(k)`
    panel_ends: Vec<Vec<f64>>,
}

impl<'a> Nested<'a> {
    fn new(lambda: &'a dyn Fn(f64) -> f64, depth: usize, panels: usize) -> Self {
        let mut me = Self {
            lambda,
            rule: gauss_legendre(20),
            panel_ends: vec![vec![1.0; panels + 1]],
        };
        for j in 1..=depth {
            let mut ends = vec![0.0; panels + 1];
            for k in 0..panels {
                ends[k + 1] = ends[k] + me.partial(j, k as f64, k as f64 + 1.0);
            }
            me.panel_ends.push(ends);
        }
        me
    }

    fn partial(&self, j: usize, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.rule
            .iter()
            .map(|&(x, w)| {
                let u = mid + half * x;
                w * (self.lambda)(u) * self.value(j - 1, u)
            })
            .sum::<f64>()
            * half
    }

    fn value(&self, j: usize, x: f64) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let k = x.floor();
        self.panel_ends[j][k as usize] + self.partial(j, k, x)
    }

    /// `∫_0^X weight(x) λ(x) I_j(x) dx` over the panels.
    fn outer(&self, j: usize, weight: impl Fn(f64) -> f64) -> f64 {
        let panels = self.panel_ends[0].len() - 1;
        (0..panels)
            .map(|k| {
                let mid = k as f64 + 0.5;
                self.rule
                    .iter()
                    .map(|&(x, w)| {
                        let u = mid + 0.5 * x;
                        w * weight(u) * (self.lambda)(u) * self.value(j, u)
                    })
                    .sum::<f64>()
                    * 0.5
            })
            .sum()
    }
}

fn nested_reduction() -> Outcome {
    let (alpha, beta, b) = (1.0, 0.1, 0.2);
    let q = p(alpha, beta, b);
    let lambda = move |x: f64| beta + alpha / (b * x + 1.0);
    // e^{-0.1 x} is below 1e-30 beyond x = 700
    let nested = Nested::new(&lambda, 2, 700);
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [2usize, 3] {
        let direct = nested.outer(n - 1, |x| (-beta * x).exp());
        let reduced = asymptotic_constant(&q, n).unwrap();
        let rel = (reduced - direct).abs() / direct;
        pass &= rel <= 1e-6;
        parts.push(format!("c({n}) reduced {reduced:.10} vs nested {direct:.10} (rel {rel:.1e})"));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn mle_recovery() -> Outcome {
    let q = p(1.0, 0.1, 0.2);
    let mut worst_errors = Vec::new();
    let passed = (0..100u64)
        .filter(|&s| {
            let stream = sample_stream_inversion(&SimulationSpec::with_event_count(q, 10_000, derive_seed(BASE_SEED + 7, s)).unwrap());
            let fit = fit_mle(&stream, None).unwrap();
            let horizon = stream.horizon();
            // dense near the origin where the intensity changes fastest
            let worst = (0..=4000)
                .map(|i| {
                    let t = if i <= 2000 { 50.0 * (i as f64 / 2000.0).powi(2) } else { 50.0 + (horizon - 50.0) * (i - 2000) as f64 / 2000.0 };
                    let truth = q.intensity(t).unwrap();
                    (fit.fitted_intensity(t) - truth).abs() / truth
                })
                .fold(0.0f64, f64::max);
            worst_errors.push(worst);
            worst <= 0.1
        })
        .count();
    worst_errors.sort_by(f64::total_cmp);
    Outcome {
        pass: passed >= 90,
        detail: format!(
            "{passed}/100 seeds within 10% everywhere (median worst relative error {:.3})",
            worst_errors[worst_errors.len() / 2]
        ),
    }
}

fn time_rescaling() -> Outcome {
    let q = p(1.0, 0.1, 0.2);
    let constant = p(0.0, q.peak_intensity(), 0.0);
    let (mut true_pass, mut wrong_fail) = (0, 0);
    for s in 0..100u64 {
        let stream = sample_stream_inversion(&SimulationSpec::with_event_count(q, 10_000, derive_seed(BASE_SEED + 8, s)).unwrap());
        true_pass += usize::from(rescale_and_test(&stream, &q).unwrap().pass);
        wrong_fail += usize::from(!rescale_and_test(&stream, &constant).unwrap().pass);
    }
    Outcome {
        pass: true_pass >= 97 && wrong_fail >= 95,
        detail: format!("true parameters pass {true_pass}/100, constant rate lambda(0) fails {wrong_fail}/100"),
    }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let params = ["--alpha", "1", "--beta", "0.1", "--b", "0.2"];

    let run = |args: &[String]| {
        let argv = std::iter::once("waning".to_string()).chain(args.iter().cloned());
        waning::cli::run(argv)
    };
    let stream = path("stream.csv");
    let setup: Vec<String> = ["simulate", "--horizon", "3000", "--seed", "1", "--out", &stream]
        .into_iter()
        .chain(params)
        .map(String::from)
        .collect();
    if run(&setup) != 0 {
        return Outcome {
            pass: false,
            detail: "setup simulation failed".into(),
        };
    }
    let posts = path("posts.txt");
    std::fs::write(&posts, "2007-03-15\n2007-03-15\n2007-03-17\n2007-03-20\n2007-03-20\n2007-04-02\n").unwrap();

    let stream_in = ["--input", &stream, "--column", "time_days", "--origin", "zero"];
    let commands: Vec<Vec<&str>> = vec![
        [&["simulate", "--horizon", "800", "--seed", "42"][..], &params].concat(),
        [&["simulate", "--events", "500", "--seed", "42", "--sampler", "thinning"][..], &params].concat(),
        [&["ccdf", "--seed", "3", "--dedup", "jitter", "--input", &posts, "--unbinned"][..]].concat(),
        [&["ccdf", "--include-first"][..], &stream_in].concat(),
        [&["fit", "--method", "mle"][..], &stream_in].concat(),
        [&["fit", "--method", "ccdf"][..], &stream_in].concat(),
        [&["theory", "--n", "2", "--t", "1,5,20", "--method", "quadrature"][..], &params].concat(),
        [&["theory", "--n", "2", "--t", "1,5,20", "--method", "mc", "--reps", "20000", "--seed", "9"][..], &params].concat(),
        [&["theory", "--n", "0", "--t-max", "30", "--method", "closed"][..], &params].concat(),
        [&["theory", "--n", "3", "--t", "10,100", "--method", "asymptotic"][..], &params].concat(),
        [&["gof"][..], &stream_in, &params].concat(),
        [&["regime"][..], &stream_in].concat(),
    ];
    let mut mismatches = Vec::new();
    for (i, cmd) in commands.iter().enumerate() {
        let outputs: Vec<Option<Vec<u8>>> = (0..2)
            .map(|rep| {
                let out = path(&format!("out-{i}-{rep}"));
                let args: Vec<String> = cmd.iter().map(|s| s.to_string()).chain(["--out".into(), out.clone()]).collect();
                (run(&args) == 0).then(|| std::fs::read(&out).unwrap())
            })
            .collect();
        if outputs[0].is_none() || outputs[0] != outputs[1] {
            mismatches.push(cmd[0]);
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("{} seeded runs repeated, mismatched or failed: {mismatches:?}", commands.len()),
    }
}

fn homogeneous_mle_example() -> Outcome {
    let truth = p(0.0, 2.0, 0.0);
    let mut passed = 0;
    let mut regime_ok = 0;
    for s in 0..100u64 {
        let stream = sample_stream_inversion(&SimulationSpec::with_event_count(truth, 10_000, derive_seed(BASE_SEED + 10, s)).unwrap());
        let fit = fit_mle(&stream, None).unwrap();
        passed += usize::from((fit.params.beta() - 2.0).abs() <= 0.06 && (fit.fitted_intensity(0.0) - 2.0).abs() <= 0.1);
        let flat = threshold_params(&stream, &fit.params, THRESHOLD_LOGLIK);
        regime_ok += usize::from(flat.classify_regime().is_exponential());
    }
    Outcome {
        pass: passed == 100 && regime_ok == 100,
        detail: format!(
            "beta within 0.06 and lambda(0) within 5%: {passed}/100; thresholded fit exponential: {regime_ok}/100"
        ),
    }
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 10] = [
        ("criterion 1: first-interarrival law", first_interarrival_law),
        ("criterion 2: tail asymptote ratio", asymptote_ratio),
        ("criterion 3: exponential regimes", regime_collapse),
        ("criterion 4: sampler equivalence", sampler_equivalence),
        ("criterion 5: survival-curve fit round trip", survival_fit_round_trip),
        ("criterion 6: nested-integral reduction", nested_reduction),
        ("criterion 7: MLE intensity recovery", mle_recovery),
        ("criterion 8: time-rescaling test", time_rescaling),
        ("criterion 9: CLI determinism", cli_determinism),
        ("homogeneous MLE example and regime consistency", homogeneous_mle_example),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.pass);
        println!("{verdict} {name}: {}", outcome.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
