//! Closed-form single-receiver absorption model and the empirical
//! multi-receiver fit model `a · Q · (r/d) · erfc((d − r)/√(4Dt))`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::trace::CumulativeTrace;

/// Complementary error function.
///
/// Backed by the `libm` port of the FreeBSD implementation, which is
/// accurate to about one ulp; the test suite checks it against an
/// independent series/continued-fraction oracle.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Fitted parameters of the empirical model: gain `a` and distance `d` (μm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub a: f64,
    pub d: f64,
}

impl FitParams {
    pub fn new(a: f64, d: f64) -> Self {
        FitParams { a, d }
    }
}

/// Known constants of one receiver's channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelContext {
    pub molecule_budget: f64,
    pub radius: f64,
    pub diffusion_coefficient: f64,
    pub sample_times: Vec<f64>,
}

impl ModelContext {
    pub fn new(molecule_budget: f64, radius: f64, diffusion_coefficient: f64, sample_times: Vec<f64>) -> Result<Self> {
        let ctx = ModelContext {
            molecule_budget,
            radius,
            diffusion_coefficient,
            sample_times,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("molecule_budget", self.molecule_budget),
            ("radius", self.radius),
            ("diffusion_coefficient", self.diffusion_coefficient),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFiniteParameter { name });
            }
            if v <= 0.0 {
                return Err(Error::NonPositiveParameter { name, value: v });
            }
        }
        let mut prev = 0.0;
        for &t in &self.sample_times {
            if !(t > prev) || !t.is_finite() {
                return Err(Error::NonPositiveParameter {
                    name: "sample_times (strictly increasing, positive)",
                    value: t,
                });
            }
            prev = t;
        }
        Ok(())
    }

    fn diffusion_length(&self, t: f64) -> f64 {
        (4.0 * self.diffusion_coefficient * t).sqrt()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveParameter { name: "t", value: t })
    }
}

/// Expected cumulative number of molecules absorbed by a lone receiver at
/// distance `d` by time `t`.
pub fn siso_cumulative(ctx: &ModelContext, d: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let r = ctx.radius;
    if !(d >= r) {
        return Err(Error::DistanceInsideReceiver { d, r });
    }
    let u = (d - r) / ctx.diffusion_length(t);
    Ok(ctx.molecule_budget * (r / d) * erfc(u))
}

pub fn fit_model(params: FitParams, ctx: &ModelContext, t: f64) -> Result<f64> {
    Ok(params.a * siso_cumulative(ctx, params.d, t)?)
}

/// Analytic partial derivatives `(∂F/∂a, ∂F/∂d)` of [`fit_model`].
pub fn fit_model_jacobian(params: FitParams, ctx: &ModelContext, t: f64) -> Result<(f64, f64)> {
    check_time(t)?;
    let FitParams { a, d } = params;
    let r = ctx.radius;
    if !(d >= r) {
        return Err(Error::DistanceInsideReceiver { d, r });
    }
    let q = ctx.molecule_budget;
    let len = ctx.diffusion_length(t);
    let u = (d - r) / len;
    let tail = erfc(u);
    let d_da = q * (r / d) * tail;
    let gauss = (-u * u).exp();
    let d_dd = a * q * (-(r / (d * d)) * tail - (r / d) * (2.0 / PI.sqrt()) * gauss / len);
    Ok((d_da, d_dd))
}

/// Residuals of the fit on the probability scale:
/// `(counts[n] − F_fit(t_n)) / Q`.
pub fn residuals(params: FitParams, ctx: &ModelContext, trace: &CumulativeTrace) -> Result<Vec<f64>> {
    if trace.counts.len() != ctx.sample_times.len() {
        return Err(Error::LengthMismatch {
            expected: ctx.sample_times.len(),
            found: trace.counts.len(),
        });
    }
    let q = ctx.molecule_budget;
    trace
        .counts
        .iter()
        .zip(&ctx.sample_times)
        .map(|(&c, &t)| Ok((c - fit_model(params, ctx, t)?) / q))
        .collect()
}

/// Noise-free trace of the fit model at the context's sample times.
pub fn model_trace(receiver_id: usize, params: FitParams, ctx: &ModelContext) -> Result<CumulativeTrace> {
    let counts = ctx
        .sample_times
        .iter()
        .map(|&t| fit_model(params, ctx, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(CumulativeTrace {
        receiver_id,
        sample_times: ctx.sample_times.clone(),
        counts,
    })
}
