//! Particle-based Monte-Carlo simulation of molecules diffusing (with an
//! optional uniform drift) towards multiple fully absorbing spheres.
//!
//! All `Q` molecules are released from the transmitter at `t = 0`. Each
//! molecule owns an independent ChaCha stream selected by its index, so the
//! output depends only on the trial seed and never on how molecules are
//! scheduled across threads.
//!
//! Two accelerations keep desk-scale runs tractable without changing the
//! statistics in any measurable way:
//!
//! * far-field jumps: a molecule whose nearest receiver surface is more than
//!   `JUMP_SAFETY` standard deviations (plus drift) away aggregates several
//!   Gaussian steps into one draw;
//! * only absorption events are stored, never trajectories.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scenario::{validate_scenario, Medium, Receiver, SamplingPlan, Scenario, ValidatedScenario};
use crate::trace::{bin_events, steps_per_interval, AbsorptionEvent, CumulativeTrace};

/// Aggregated jumps must stay this many per-axis standard deviations away
/// from every receiver surface.
pub const JUMP_SAFETY: f64 = 10.0;

/// Bridge crossing probabilities below `exp(-BRIDGE_CUTOFF)` are skipped.
const BRIDGE_CUTOFF: f64 = 36.0;

/// How a step is tested for absorption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbsorptionPolicy {
    /// Absorbed iff the step ends inside a sphere.
    EndOfStep,
    /// End-of-step containment, plus a Brownian-bridge test for paths that
    /// touched a sphere between two outside positions. Uses the local
    /// planar crossing probability `exp(-2 h₀ h₁ / σ²)`.
    BrownianBridge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub sim_step: f64,
    pub policy: AbsorptionPolicy,
    pub far_field_jumps: bool,
}

impl SimSettings {
    pub fn new(sim_step: f64) -> Self {
        SimSettings {
            sim_step,
            policy: AbsorptionPolicy::EndOfStep,
            far_field_jumps: true,
        }
    }

    pub fn with_policy(mut self, policy: AbsorptionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_far_field_jumps(mut self, on: bool) -> Self {
        self.far_field_jumps = on;
        self
    }
}

/// Default step for D = 100 μm²/s.
pub const DEFAULT_SIM_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoleculeState {
    pub position: Vec3,
    pub alive: bool,
}

/// One Brownian step: `position + v·dt + g`, `g ~ N(0, 2·D·dt)` per axis.
pub fn step_molecule<R: Rng + ?Sized>(state: &MoleculeState, medium: &Medium, dt: f64, rng: &mut R) -> Vec3 {
    let sigma = (2.0 * medium.diffusion_coefficient * dt).sqrt();
    state.position + medium.flow * dt + gaussian3(rng) * sigma
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Id of the receiver whose sphere contains `next`, if any. Only the step
/// end is inspected; a chord passing through a sphere is not a hit.
pub fn detect_absorption(_prev: Vec3, next: Vec3, receivers: &[Receiver]) -> Option<usize> {
    receivers.iter().find(|rx| rx.contains(next)).map(|rx| rx.id)
}

/// Probability that a Brownian bridge between two points at surface gaps
/// `h0`, `h1` (both > 0) touched a plane, for per-axis step variance
/// `variance`.
pub fn bridge_crossing_probability(h0: f64, h1: f64, variance: f64) -> f64 {
    if h0 <= 0.0 || h1 <= 0.0 {
        return 1.0;
    }
    if variance <= 0.0 {
        return 0.0;
    }
    (-2.0 * h0 * h1 / variance).exp()
}

/// Seed of trial `index` under `master_seed`.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.next_u64()
}

struct Kernel<'a> {
    receivers: &'a [Receiver],
    start: Vec3,
    drift: Vec3,
    drift_len: f64,
    sigma: f64,
    variance: f64,
    total_steps: u64,
    policy: AbsorptionPolicy,
    jumps: bool,
}

impl<'a> Kernel<'a> {
    fn new(scenario: &'a ValidatedScenario, settings: &SimSettings, total_steps: u64) -> Self {
        let medium = scenario.medium();
        let dt = settings.sim_step;
        let variance = 2.0 * medium.diffusion_coefficient * dt;
        let drift = medium.flow * dt;
        Kernel {
            receivers: scenario.receivers(),
            start: scenario.transmitter(),
            drift,
            drift_len: drift.norm(),
            sigma: variance.sqrt(),
            variance,
            total_steps,
            policy: settings.policy,
            jumps: settings.far_field_jumps,
        }
    }

    /// Fills `gaps` with the surface gap to each receiver; returns the index
    /// of the nearest one and its gap.
    fn gaps(&self, p: Vec3, gaps: &mut [f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, (rx, g)) in self.receivers.iter().zip(gaps.iter_mut()).enumerate() {
            *g = rx.surface_gap(p);
            if *g < best.1 {
                best = (k, *g);
            }
        }
        best
    }

    /// Largest number of steps that can be aggregated from a position whose
    /// nearest surface is `gap` away.
    fn jump_len(&self, gap: f64) -> u64 {
        // Largest x = √m with drift·x² + JUMP_SAFETY·σ·x ≤ gap.
        let b = JUMP_SAFETY * self.sigma;
        let denom = b + (b * b + 4.0 * self.drift_len * gap).sqrt();
        let x = 2.0 * gap / denom;
        let m = x * x;
        if m.is_finite() && m < u64::MAX as f64 {
            m as u64
        } else {
            u64::MAX
        }
    }

    fn run(&self, rng: &mut ChaCha8Rng, prev_gaps: &mut Vec<f64>, next_gaps: &mut Vec<f64>) -> Option<AbsorptionEvent> {
        let k = self.receivers.len();
        prev_gaps.resize(k, 0.0);
        next_gaps.resize(k, 0.0);
        let mut pos = self.start;
        let (_, mut nearest) = self.gaps(pos, prev_gaps);
        let mut step = 0u64;
        while step < self.total_steps {
            if self.jumps {
                let m = self.jump_len(nearest).min(self.total_steps - step);
                if m >= 2 {
                    let scale = self.sigma * (m as f64).sqrt();
                    pos = pos + self.drift * m as f64 + gaussian3(rng) * scale;
                    step += m;
                    let (idx, g) = self.gaps(pos, prev_gaps);
                    if g <= 0.0 {
                        return Some(event(step, idx));
                    }
                    nearest = g;
                    continue;
                }
            }
            let next = pos + self.drift + gaussian3(rng) * self.sigma;
            step += 1;
            let (idx, g) = self.gaps(next, next_gaps);
            if g <= 0.0 {
                return Some(event(step, idx));
            }
            if self.policy == AbsorptionPolicy::BrownianBridge && self.variance > 0.0 {
                for (j, (&h0, &h1)) in prev_gaps.iter().zip(next_gaps.iter()).enumerate() {
                    let e = 2.0 * h0 * h1 / self.variance;
                    if e < BRIDGE_CUTOFF && rng.random::<f64>() < (-e).exp() {
                        return Some(event(step, j));
                    }
                }
            }
            pos = next;
            nearest = g;
            std::mem::swap(prev_gaps, next_gaps);
        }
        None
    }
}

fn event(step: u64, receiver: usize) -> AbsorptionEvent {
    AbsorptionEvent {
        step: u32::try_from(step).expect("step count fits in u32"),
        receiver: u16::try_from(receiver).expect("receiver count fits in u16"),
    }
}

/// Absorption events of one trial over `total_steps` steps, ordered by
/// molecule index.
pub fn simulate_events(
    scenario: &ValidatedScenario,
    total_steps: u64,
    settings: &SimSettings,
    seed: u64,
) -> Result<Vec<AbsorptionEvent>> {
    if !(settings.sim_step > 0.0) || !settings.sim_step.is_finite() {
        return Err(Error::NonPositiveParameter {
            name: "sim_step",
            value: settings.sim_step,
        });
    }
    if total_steps > u32::MAX as u64 {
        return Err(Error::NonPositiveParameter {
            name: "total_steps (too many)",
            value: total_steps as f64,
        });
    }
    let kernel = Kernel::new(scenario, settings, total_steps);
    let key = ChaCha8Rng::seed_from_u64(seed).get_seed();
    let q = usize::try_from(scenario.molecule_budget()).expect("molecule budget fits in usize");
    let events = (0..q)
        .into_par_iter()
        .with_min_len(512)
        .map_init(
            || (Vec::new(), Vec::new()),
            |(a, b), i| {
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(i as u64);
                kernel.run(&mut rng, a, b)
            },
        )
        .flatten()
        .collect();
    Ok(events)
}

fn total_steps(plan: &SamplingPlan, settings: &SimSettings) -> Result<(u64, u64)> {
    plan.validate()?;
    let spi = steps_per_interval(plan.sample_interval, settings.sim_step)?;
    Ok((spi, spi * plan.num_samples as u64))
}

fn receiver_ids(scenario: &ValidatedScenario) -> Vec<usize> {
    scenario.receivers().iter().map(|r| r.id).collect()
}

/// Simulate one trial and return one cumulative trace per receiver.
pub fn simulate_trial(
    scenario: &ValidatedScenario,
    plan: &SamplingPlan,
    settings: &SimSettings,
    seed: u64,
) -> Result<Vec<CumulativeTrace>> {
    let (spi, total) = total_steps(plan, settings)?;
    let events = simulate_events(scenario, total, settings, seed)?;
    Ok(bin_events(
        &events,
        &receiver_ids(scenario),
        plan.sample_interval,
        plan.num_samples,
        spi,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub events: Vec<AbsorptionEvent>,
    pub traces: Vec<CumulativeTrace>,
}

impl TrialRecord {
    pub fn absorbed(&self) -> u64 {
        self.events.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEnsemble {
    pub scenario: ValidatedScenario,
    pub plan: SamplingPlan,
    pub settings: SimSettings,
    pub master_seed: u64,
    pub trials: Vec<TrialRecord>,
}

impl TrialEnsemble {
    pub fn total_steps(&self) -> u64 {
        let spi =
            steps_per_interval(self.plan.sample_interval, self.settings.sim_step).expect("validated at construction");
        spi * self.plan.num_samples as u64
    }

    /// Re-bin the stored events at a different sample interval over the same
    /// horizon (`floor(horizon / interval)` samples).
    pub fn rebin(&self, sample_interval: f64) -> Result<Vec<Vec<CumulativeTrace>>> {
        let spi = steps_per_interval(sample_interval, self.settings.sim_step)?;
        let num_samples = (self.total_steps() / spi) as usize;
        if num_samples == 0 {
            return Err(Error::TooFewSamples { required: 1, found: 0 });
        }
        let ids = receiver_ids(&self.scenario);
        Ok(self
            .trials
            .iter()
            .map(|t| bin_events(&t.events, &ids, sample_interval, num_samples, spi))
            .collect())
    }
}

/// Run `n_trials` independent trials; trial `i` uses `trial_seed(master_seed, i)`.
pub fn run_trials(
    scenario: &ValidatedScenario,
    plan: &SamplingPlan,
    settings: &SimSettings,
    master_seed: u64,
    n_trials: usize,
) -> Result<TrialEnsemble> {
    if n_trials == 0 {
        return Err(Error::NonPositiveParameter {
            name: "trials",
            value: 0.0,
        });
    }
    let (spi, total) = total_steps(plan, settings)?;
    let ids = receiver_ids(scenario);
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(master_seed, i as u64);
            let events = simulate_events(scenario, total, settings, seed)?;
            let traces = bin_events(&events, &ids, plan.sample_interval, plan.num_samples, spi);
            Ok(TrialRecord {
                index: i,
                seed,
                events,
                traces,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialEnsemble {
        scenario: scenario.clone(),
        plan: *plan,
        settings: *settings,
        master_seed,
        trials,
    })
}

/// One cell of a receiving-probability map. `probability` is `None` when
/// the grid point is not a valid transmitter position.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityCell {
    pub position: Vec3,
    pub receiver_id: usize,
    pub probability: Option<f64>,
}

/// Fraction of the released molecules each receiver absorbs within the plan
/// horizon, for every transmitter position in `grid`, averaged over
/// `trials` trials per position.
pub fn receiving_probability_map(
    template: &Scenario,
    plan: &SamplingPlan,
    grid: &[Vec3],
    settings: &SimSettings,
    seed: u64,
    trials: usize,
) -> Result<Vec<ProbabilityCell>> {
    let (_, total) = total_steps(plan, settings)?;
    let trials = trials.max(1);
    let q = template.molecule_budget as f64;
    let per_point = grid
        .par_iter()
        .enumerate()
        .map(|(g, &pos)| {
            let mut s = template.clone();
            s.transmitter = pos;
            let cells = match validate_scenario(s) {
                Ok(v) => {
                    let mut hits = vec![0u64; v.receivers().len()];
                    let point_seed = trial_seed(seed, g as u64);
                    for t in 0..trials {
                        for ev in simulate_events(&v, total, settings, trial_seed(point_seed, t as u64))? {
                            hits[ev.receiver as usize] += 1;
                        }
                    }
                    v.receivers()
                        .iter()
                        .zip(hits)
                        .map(|(rx, h)| ProbabilityCell {
                            position: pos,
                            receiver_id: rx.id,
                            probability: Some(h as f64 / (q * trials as f64)),
                        })
                        .collect()
                }
                Err(_) => template
                    .receivers
                    .iter()
                    .map(|rx| ProbabilityCell {
                        position: pos,
                        receiver_id: rx.id,
                        probability: None,
                    })
                    .collect::<Vec<_>>(),
            };
            Ok(cells)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}
