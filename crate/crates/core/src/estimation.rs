//! Per-receiver distance estimation: fit `(a, d)` of the empirical model to
//! a cumulative trace with Levenberg-Marquardt, and report fit quality.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::channel::{fit_model, fit_model_jacobian, FitParams, ModelContext};
use crate::error::{Error, Result};
use crate::lm::{lm_minimize, LmOptions};
use crate::scenario::{SamplingPlan, ValidatedScenario};
use crate::sim::{run_trials, SimSettings, TrialEnsemble};
use crate::trace::CumulativeTrace;

/// Initial gain of every fit.
pub const INITIAL_GAIN: f64 = 0.5;
/// Upper end of the distance search domain, in receiver radii.
pub const MAX_DISTANCE_RADII: f64 = 100.0;
/// Residual value returned for parameters outside the search domain.
const OUT_OF_DOMAIN_RESIDUAL: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    pub receiver_id: usize,
    pub a: f64,
    pub d: f64,
    /// Sum of squared residuals on the probability scale.
    pub sse: f64,
    /// `NaN` when the observations are constant.
    pub r_square: f64,
    pub iterations: usize,
    /// Fitted distance after each accepted LM iteration, starting with the
    /// initial guess.
    pub distance_trajectory: Vec<f64>,
}

/// `(sse, r²)` of a fit given its residuals and the observations on the
/// same scale.
pub fn goodness_of_fit(residuals: &[f64], observed: &[f64]) -> Result<(f64, f64)> {
    if residuals.len() != observed.len() {
        return Err(Error::LengthMismatch {
            expected: observed.len(),
            found: residuals.len(),
        });
    }
    if observed.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: observed.len(),
        });
    }
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let sst: f64 = observed.iter().map(|o| (o - mean) * (o - mean)).sum();
    if sst == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((sse, 1.0 - sse / sst))
}

pub fn normalized_distance_error(d_hat: f64, d_true: f64) -> f64 {
    ((d_hat - d_true) / d_true).abs()
}

/// Starting point derived from the long-time limit `Q·a·r/d` of the model.
pub fn initial_guess(trace: &CumulativeTrace, ctx: &ModelContext) -> FitParams {
    let r = ctx.radius;
    let p_end = trace.final_count() / ctx.molecule_budget;
    let d0 = (r * INITIAL_GAIN / p_end).max(1.5 * r).min(MAX_DISTANCE_RADII * r);
    FitParams::new(INITIAL_GAIN, d0)
}

/// Fit `(a, d)` to `trace` from the default starting point.
pub fn estimate_distance(trace: &CumulativeTrace, ctx: &ModelContext, opts: &LmOptions) -> Result<DistanceEstimate> {
    let init = initial_guess(trace, ctx);
    estimate_distance_from(trace, ctx, opts, init)
}

/// Fit `(a, d)` to `trace` from an explicit starting point.
pub fn estimate_distance_from(
    trace: &CumulativeTrace,
    ctx: &ModelContext,
    opts: &LmOptions,
    init: FitParams,
) -> Result<DistanceEstimate> {
    ctx.validate()?;
    let n = trace.counts.len();
    if n != ctx.sample_times.len() {
        return Err(Error::LengthMismatch {
            expected: ctx.sample_times.len(),
            found: n,
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, found: n });
    }
    if trace.counts.iter().all(|&c| c == 0.0) {
        return Err(Error::AllZeroTrace {
            receiver: trace.receiver_id,
        });
    }
    let q = ctx.molecule_budget;
    let r = ctx.radius;
    let d_max = MAX_DISTANCE_RADII * r;
    let observed: Vec<f64> = trace.counts.iter().map(|c| c / q).collect();

    let in_domain = |a: f64, d: f64| a >= 0.0 && d > r && d <= d_max;
    let residual_fn = |beta: &DVector<f64>| {
        let (a, d) = (beta[0], beta[1]);
        if !in_domain(a, d) {
            return DVector::from_element(n, OUT_OF_DOMAIN_RESIDUAL);
        }
        let p = FitParams::new(a, d);
        DVector::from_iterator(
            n,
            observed
                .iter()
                .zip(&ctx.sample_times)
                .map(|(o, &t)| o - fit_model(p, ctx, t).map_or(f64::NAN, |f| f / q)),
        )
    };
    let jacobian_fn = |beta: &DVector<f64>| {
        let p = FitParams::new(beta[0], beta[1]);
        let mut jac = DMatrix::zeros(n, 2);
        for (i, &t) in ctx.sample_times.iter().enumerate() {
            let (da, dd) = fit_model_jacobian(p, ctx, t).unwrap_or((f64::NAN, f64::NAN));
            jac[(i, 0)] = -da / q;
            jac[(i, 1)] = -dd / q;
        }
        jac
    };

    if !in_domain(init.a, init.d) {
        return Err(Error::DistanceInsideReceiver { d: init.d, r });
    }
    let out = lm_minimize(residual_fn, jacobian_fn, DVector::from_vec(vec![init.a, init.d]), opts)?;
    if !out.converged {
        return Err(Error::NoConvergence {
            receiver: trace.receiver_id,
            iterations: out.iterations,
        });
    }
    let res = residual_fn(&out.beta);
    let sse = res.norm_squared();
    let r_square = match goodness_of_fit(res.as_slice(), &observed) {
        Ok((_, r2)) => r2,
        Err(Error::DegenerateVariance) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(DistanceEstimate {
        receiver_id: trace.receiver_id,
        a: out.beta[0],
        d: out.beta[1],
        sse,
        r_square,
        iterations: out.iterations,
        distance_trajectory: out.iterates.iter().map(|b| b[1]).collect(),
    })
}

/// Model context for receiver `k` of a scenario.
pub fn receiver_context(scenario: &ValidatedScenario, k: usize, sample_times: Vec<f64>) -> Result<ModelContext> {
    let rx = scenario.receivers().get(k).ok_or(Error::IndexOutOfRange {
        index: k,
        len: scenario.receivers().len(),
    })?;
    ModelContext::new(
        scenario.molecule_budget() as f64,
        rx.radius,
        scenario.medium().diffusion_coefficient,
        sample_times,
    )
}

pub const ESTIMATE_CSV_HEADER: &str = "trial,receiver,a,d,sse,r_square,iterations";

pub fn write_estimate_row(out: &mut String, trial: usize, e: &DistanceEstimate) {
    let _ = writeln!(
        out,
        "{trial},{},{},{},{},{},{}",
        e.receiver_id, e.a, e.d, e.sse, e.r_square, e.iterations
    );
}

/// One candidate interval of a sample-interval sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub interval: f64,
    pub num_samples: usize,
    /// Mean normalized distance error per receiver (receiver order), over
    /// the trials whose fit succeeded; `NaN` if none did.
    pub mean_error: Vec<f64>,
    pub failures: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSweep {
    pub receiver_ids: Vec<usize>,
    pub rows: Vec<IntervalRow>,
    /// Per receiver: the largest interval of the plateau that starts at the
    /// finest interval, i.e. every interval up to it has error within
    /// `factor ×` the finest one.
    pub max_interval: Vec<Option<f64>>,
}

/// Re-sample one stored ensemble at each candidate interval and report the
/// mean distance error per receiver. Intervals are sorted ascending.
pub fn interval_sweep_on_ensemble(
    ensemble: &TrialEnsemble,
    intervals: &[f64],
    opts: &LmOptions,
    factor: f64,
) -> Result<IntervalSweep> {
    let mut intervals = intervals.to_vec();
    intervals.sort_by(f64::total_cmp);
    let scenario = &ensemble.scenario;
    let truth = scenario.distances();
    let k = scenario.receivers().len();
    let mut rows = Vec::with_capacity(intervals.len());
    for &interval in &intervals {
        let binned = ensemble.rebin(interval)?;
        let times = binned[0][0].sample_times.clone();
        let mut sums = vec![0.0; k];
        let mut ok = vec![0usize; k];
        let mut failures = vec![0usize; k];
        for traces in &binned {
            for (j, tr) in traces.iter().enumerate() {
                let ctx = receiver_context(scenario, j, times.clone())?;
                match estimate_distance(tr, &ctx, opts) {
                    Ok(e) => {
                        sums[j] += normalized_distance_error(e.d, truth[j]);
                        ok[j] += 1;
                    }
                    Err(_) => failures[j] += 1,
                }
            }
        }
        rows.push(IntervalRow {
            interval,
            num_samples: times.len(),
            mean_error: sums
                .iter()
                .zip(&ok)
                .map(|(s, &n)| if n > 0 { s / n as f64 } else { f64::NAN })
                .collect(),
            failures,
        });
    }
    let max_interval = (0..k)
        .map(|j| {
            let base = rows.first()?.mean_error[j];
            if !base.is_finite() {
                return None;
            }
            let mut best = None;
            for row in &rows {
                if row.mean_error[j] <= factor * base {
                    best = Some(row.interval);
                } else {
                    break;
                }
            }
            best
        })
        .collect();
    Ok(IntervalSweep {
        receiver_ids: scenario.receivers().iter().map(|r| r.id).collect(),
        rows,
        max_interval,
    })
}

/// Simulate `trials` trials at the finest candidate interval, then sweep.
#[allow(clippy::too_many_arguments)]
pub fn max_sample_interval_sweep(
    scenario: &ValidatedScenario,
    horizon: f64,
    settings: &SimSettings,
    intervals: &[f64],
    trials: usize,
    seed: u64,
    opts: &LmOptions,
    factor: f64,
) -> Result<IntervalSweep> {
    let finest = intervals.iter().copied().fold(f64::INFINITY, f64::min);
    if !finest.is_finite() {
        return Err(Error::TooFewSamples { required: 1, found: 0 });
    }
    let plan = SamplingPlan::new(finest, (horizon / finest).round() as usize)?;
    let ensemble = run_trials(scenario, &plan, settings, seed, trials)?;
    interval_sweep_on_ensemble(&ensemble, intervals, opts, factor)
}
