//! Experiment drivers: end-to-end localization over trial ensembles,
//! parameter sweeps, and the brute-force oracle comparisons.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::{fit_model, fit_model_jacobian, model_trace, siso_cumulative, FitParams, ModelContext};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::localization::{
    gradient_h, localize, location_error, multilaterate_init, objective_h, steepest_descent, LocalizationResult,
    LocalizeOptions, SubsetSize,
};
use crate::scenario::{
    cube_receivers, octant_sphere_receivers, tetrahedral_receivers, validate_scenario, Receiver, SamplingPlan,
    Scenario, ValidatedScenario,
};
use crate::sim::{run_trials, simulate_trial, AbsorptionPolicy, SimSettings, TrialEnsemble};
use crate::stats::Summary;
use crate::trace::CumulativeTrace;

const ORACLE_SIM_STEP: f64 = 1e-4;
const ORACLE_MIN_MOLECULES: u64 = 100_000;

/// Gain used for noise-free synthetic traces.
pub const SYNTHETIC_GAIN: f64 = 0.6;

/// Traces generated from the fit model at the true distances.
pub fn synthetic_traces(scenario: &ValidatedScenario, plan: &SamplingPlan, gain: f64) -> Result<Vec<CumulativeTrace>> {
    let times = plan.sample_times();
    scenario
        .receivers()
        .iter()
        .zip(scenario.distances())
        .map(|(rx, &d)| {
            let ctx = ModelContext::new(
                scenario.molecule_budget() as f64,
                rx.radius,
                scenario.medium().diffusion_coefficient,
                times.clone(),
            )?;
            model_trace(rx.id, FitParams::new(gain, d), &ctx)
        })
        .collect()
}

/// Localize every trial of an ensemble independently.
pub fn localize_trials(
    traces: &[Vec<CumulativeTrace>],
    scenario: &ValidatedScenario,
    opts: &LocalizeOptions,
) -> Vec<Result<LocalizationResult>> {
    traces.par_iter().map(|t| localize(t, scenario, opts)).collect()
}

/// Location error per trial, `None` for a failed trial.
pub fn location_errors(results: &[Result<LocalizationResult>], truth: Vec3) -> Vec<Option<f64>> {
    results
        .iter()
        .map(|r| r.as_ref().ok().map(|r| location_error(r.p_hat, truth)))
        .collect()
}

/// Simulated ensemble plus per-trial localization.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub ensemble: TrialEnsemble,
    pub results: Vec<Result<LocalizationResult>>,
}

impl PipelineRun {
    pub fn errors(&self) -> Vec<Option<f64>> {
        location_errors(&self.results, self.ensemble.scenario.transmitter())
    }
}

pub fn run_pipeline(
    scenario: &ValidatedScenario,
    plan: &SamplingPlan,
    settings: &SimSettings,
    seed: u64,
    trials: usize,
    opts: &LocalizeOptions,
) -> Result<PipelineRun> {
    let ensemble = run_trials(scenario, plan, settings, seed, trials)?;
    let traces: Vec<Vec<CumulativeTrace>> = ensemble.trials.iter().map(|t| t.traces.clone()).collect();
    let results = localize_trials(&traces, scenario, opts);
    Ok(PipelineRun { ensemble, results })
}

/// Receiver layouts that can be compared in a topology sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    /// Four alternating vertices of the cube `[-h, h]³`.
    Tetrahedral(f64),
    /// All eight vertices of the cube `[-h, h]³`.
    Cube(f64),
    /// Eight receivers at distance `d` from the transmitter, one per octant.
    Sphere(f64),
}

impl Topology {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("topology `{s}`: expected tetra:H, cube:H or sphere:D"));
        let (name, arg) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = arg.parse().map_err(|_| bad())?;
        match name {
            "tetra" => Ok(Topology::Tetrahedral(v)),
            "cube" => Ok(Topology::Cube(v)),
            "sphere" => Ok(Topology::Sphere(v)),
            _ => Err(bad()),
        }
    }

    pub fn receivers(&self, transmitter: Vec3, radius: f64) -> Vec<Receiver> {
        match *self {
            Topology::Tetrahedral(h) => tetrahedral_receivers(h, radius),
            Topology::Cube(h) => cube_receivers(h, radius),
            Topology::Sphere(d) => octant_sphere_receivers(transmitter, d, radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Radius,
    Budget,
    Diffusion,
    FlowY,
    SampleInterval,
    Subset,
    Topology,
    /// Transmitter position only; the positions list is the axis.
    Position,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Radius => "radius",
            SweepAxis::Budget => "q",
            SweepAxis::Diffusion => "d",
            SweepAxis::FlowY => "flow",
            SweepAxis::SampleInterval => "interval",
            SweepAxis::Subset => "subset",
            SweepAxis::Topology => "topology",
            SweepAxis::Position => "tn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "radius" => SweepAxis::Radius,
            "q" => SweepAxis::Budget,
            "d" => SweepAxis::Diffusion,
            "flow" => SweepAxis::FlowY,
            "interval" => SweepAxis::SampleInterval,
            "subset" => SweepAxis::Subset,
            "topology" => SweepAxis::Topology,
            "tn" => SweepAxis::Position,
            _ => return Err(Error::Parse(format!("unknown sweep axis `{s}`"))),
        })
    }

    /// Axes whose values only change the estimation stage, so one
    /// simulated ensemble per transmitter position serves every value.
    pub fn reuses_events(&self) -> bool {
        matches!(self, SweepAxis::SampleInterval | SweepAxis::Subset)
    }
}

pub fn parse_subset(s: &str) -> Result<SubsetSize> {
    if s == "all" {
        return Ok(SubsetSize::All);
    }
    s.parse()
        .map(SubsetSize::Best)
        .map_err(|_| Error::Parse(format!("subset `{s}`: expected `all` or a receiver count")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Axis values as given; parsed per axis.
    pub values: Vec<String>,
    pub positions: Vec<Vec3>,
}

fn number(value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("axis value `{value}` is not a number")))
}

fn apply_value(base: &Scenario, axis: SweepAxis, value: &str) -> Result<Scenario> {
    let mut s = base.clone();
    match axis {
        SweepAxis::Radius => {
            let r = number(value)?;
            for rx in &mut s.receivers {
                rx.radius = r;
            }
        }
        SweepAxis::Budget => {
            s.molecule_budget = value
                .parse()
                .map_err(|_| Error::Parse(format!("molecule budget `{value}` is not an integer")))?;
        }
        SweepAxis::Diffusion => s.medium.diffusion_coefficient = number(value)?,
        SweepAxis::FlowY => s.medium.flow = Vec3::new(0.0, number(value)?, 0.0),
        SweepAxis::Topology => {
            let radius = base.receivers.first().map_or(1.0, |r| r.radius);
            s.receivers = Topology::parse(value)?.receivers(s.transmitter, radius);
        }
        SweepAxis::Position => {}
        SweepAxis::SampleInterval => {
            number(value)?;
        }
        SweepAxis::Subset => {
            parse_subset(value)?;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: String,
    pub position: Vec3,
    /// Per trial: location error, or the error kind of a failed trial.
    pub outcomes: Vec<std::result::Result<f64, &'static str>>,
}

impl SweepCell {
    pub fn summary(&self) -> Summary {
        let v: Vec<Option<f64>> = self.outcomes.iter().map(|o| o.ok()).collect();
        Summary::from_outcomes(&v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub axis: SweepAxis,
    /// Ordered by (axis value, position).
    pub cells: Vec<SweepCell>,
}

fn outcomes_of(results: &[Result<LocalizationResult>], truth: Vec3) -> Vec<std::result::Result<f64, &'static str>> {
    results
        .iter()
        .map(|r| match r {
            Ok(r) => Ok(location_error(r.p_hat, truth)),
            Err(e) => Err(e.kind()),
        })
        .collect()
}

/// Run a sweep. Every cell uses the same master seed, so trial `i` of two
/// cells shares its random stream and cells can be compared pairwise.
/// Failures (including invalid geometry) are recorded, never fatal.
pub fn run_sweep(
    base: &Scenario,
    plan: &SamplingPlan,
    settings: &SimSettings,
    seed: u64,
    trials: usize,
    spec: &SweepSpec,
    subset: Option<SubsetSize>,
) -> Result<SweepReport> {
    for v in &spec.values {
        apply_value(base, spec.axis, v)?;
    }
    let positions: Vec<Vec3> = if spec.positions.is_empty() {
        vec![base.transmitter]
    } else {
        spec.positions.clone()
    };
    let failed = |kind: &'static str| vec![Err(kind); trials];

    // Ensembles shared across axis values for estimation-stage sweeps.
    let shared: Vec<Option<Result<(ValidatedScenario, TrialEnsemble)>>> = if spec.axis.reuses_events() {
        positions
            .iter()
            .map(|&p| {
                let mut s = base.clone();
                s.transmitter = p;
                Some(validate_scenario(s).and_then(|v| {
                    let e = run_trials(&v, plan, settings, seed, trials)?;
                    Ok((v, e))
                }))
            })
            .collect()
    } else {
        vec![None; positions.len()]
    };

    let mut cells = Vec::new();
    for value in &spec.values {
        for (pi, &pos) in positions.iter().enumerate() {
            let outcomes = match &shared[pi] {
                Some(Err(e)) => failed(e.kind()),
                Some(Ok((v, ens))) => {
                    let mut opts = LocalizeOptions::for_scenario(v);
                    if let Some(s) = subset {
                        opts.subset = s;
                    }
                    let traces: Vec<Vec<CumulativeTrace>> = if spec.axis == SweepAxis::SampleInterval {
                        match ens.rebin(number(value)?) {
                            Ok(t) => t,
                            Err(e) => {
                                cells.push(SweepCell {
                                    value: value.clone(),
                                    position: pos,
                                    outcomes: failed(e.kind()),
                                });
                                continue;
                            }
                        }
                    } else {
                        opts.subset = parse_subset(value)?;
                        ens.trials.iter().map(|t| t.traces.clone()).collect()
                    };
                    outcomes_of(&localize_trials(&traces, v, &opts), pos)
                }
                None => {
                    let mut s = apply_value(base, spec.axis, value)?;
                    s.transmitter = pos;
                    if spec.axis == SweepAxis::Topology {
                        s = apply_value(&s, spec.axis, value)?;
                    }
                    match validate_scenario(s) {
                        Err(e) => failed(e.kind()),
                        Ok(v) => {
                            let mut opts = LocalizeOptions::for_scenario(&v);
                            if let Some(s) = subset {
                                opts.subset = s;
                            }
                            match run_pipeline(&v, plan, settings, seed, trials, &opts) {
                                Ok(run) => outcomes_of(&run.results, pos),
                                Err(e) => failed(e.kind()),
                            }
                        }
                    }
                }
            };
            cells.push(SweepCell {
                value: value.clone(),
                position: pos,
                outcomes,
            });
        }
    }
    Ok(SweepReport { axis: spec.axis, cells })
}

pub const SWEEP_RAW_HEADER: &str = "axis,value,tn_x,tn_y,tn_z,trial,delta_p,status";
pub const SWEEP_SUMMARY_HEADER: &str = "axis,value,tn_x,tn_y,tn_z,trials,failures,mean,median,q25,q75,max";

impl SweepReport {
    /// Rows of the per-trial CSV (without header).
    pub fn raw_rows(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let p = c.position;
            for (i, o) in c.outcomes.iter().enumerate() {
                let (dp, status) = match o {
                    Ok(v) => (v.to_string(), "ok"),
                    Err(kind) => (String::new(), *kind),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{i},{dp},{status}",
                    self.axis.name(),
                    c.value,
                    p.x,
                    p.y,
                    p.z
                );
            }
        }
        out
    }

    /// Rows of the summary CSV (without header).
    pub fn summary_rows(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{}",
                summary_row(self.axis.name(), &c.value, c.position, &c.summary())
            );
        }
        out
    }
}

pub fn summary_row(axis: &str, value: &str, p: Vec3, s: &Summary) -> String {
    format!(
        "{axis},{value},{},{},{},{},{},{},{},{},{},{}",
        p.x, p.y, p.z, s.trials, s.failures, s.mean, s.median, s.q25, s.q75, s.max
    )
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("range `{s}`: expected start:stop:step or a comma list"));
    if let Some((a, rest)) = s.split_once(':') {
        let (b, c) = rest.split_once(':').ok_or_else(bad)?;
        let (a, b, c): (f64, f64, f64) = (
            a.parse().map_err(|_| bad())?,
            b.parse().map_err(|_| bad())?,
            c.parse().map_err(|_| bad())?,
        );
        if !(c > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / c + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + c * i as f64).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// Largest per-axis distance between the steepest-descent result and
    /// the grid minimum of the objective.
    pub sd_grid_deviation: f64,
    pub grid_step: f64,
    /// Relative deviation of the simulated single-receiver absorption at
    /// the horizon from the closed form.
    pub siso_relative: f64,
    pub fit_jacobian_relative: f64,
    pub gradient_relative: f64,
}

impl OracleReport {
    pub fn render(&self) -> String {
        format!(
            "sd_grid_deviation = {}\ngrid_step = {}\nsd_within_one_cell = {}\nsiso_relative = {}\nsiso_within_3pct = {}\nfit_jacobian_relative = {}\ngradient_relative = {}\njacobians_within_1e-6 = {}\n",
            self.sd_grid_deviation,
            self.grid_step,
            self.sd_grid_deviation <= self.grid_step,
            self.siso_relative,
            self.siso_relative <= 0.03,
            self.fit_jacobian_relative,
            self.gradient_relative,
            self.fit_jacobian_relative <= 1e-6 && self.gradient_relative <= 1e-6,
        )
    }
}

/// Minimizer of `H` over a cubic grid of spacing `step` and half-width
/// `half` centered at `center`.
pub fn grid_minimum(center: Vec3, half: f64, step: f64, centers: &[Vec3], distances: &[f64]) -> Vec3 {
    let n = (2.0 * half / step).round() as i64;
    let corner = center - Vec3::new(half, half, half);
    (0..=n)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, center);
            for j in 0..=n {
                for k in 0..=n {
                    let p = corner + Vec3::new(i as f64, j as f64, k as f64) * step;
                    let h = objective_h(p, centers, distances);
                    if h < best.0 {
                        best = (h, p);
                    }
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, center), |a, b| if b.0 < a.0 { b } else { a })
        .1
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Worst relative deviation of the fit-model Jacobian from central
/// differences over a fixed parameter grid.
pub fn fit_jacobian_check() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in &[0.1, 1.0, 2.0] {
        let ctx = ModelContext::new(1e4, 1.0, 100.0, vec![t])?;
        for &a in &[0.2, 0.5, 1.0] {
            for &d in &[2.0, 5.0, 10.0, 20.0] {
                let (ja, jd) = fit_model_jacobian(FitParams::new(a, d), &ctx, t)?;
                let ha = 1e-6 * a;
                let hd = 1e-6 * d;
                let fa = (fit_model(FitParams::new(a + ha, d), &ctx, t)?
                    - fit_model(FitParams::new(a - ha, d), &ctx, t)?)
                    / (2.0 * ha);
                let fd = (fit_model(FitParams::new(a, d + hd), &ctx, t)?
                    - fit_model(FitParams::new(a, d - hd), &ctx, t)?)
                    / (2.0 * hd);
                worst = worst.max(relative(ja, fa)).max(relative(jd, fd));
            }
        }
    }
    Ok(worst)
}

/// Worst relative deviation of `∇H` from central differences at fixed
/// points around the given layout.
pub fn gradient_check(centers: &[Vec3], distances: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let t = i as f64;
        let p = Vec3::new(
            7.0 * (1.3 * t).sin(),
            7.0 * (0.7 * t + 1.0).cos(),
            5.0 * (2.1 * t).sin(),
        );
        let g = gradient_h(p, centers, distances);
        let h = 1e-5;
        let fd = |e: Vec3| {
            (objective_h(p + e * h, centers, distances) - objective_h(p - e * h, centers, distances)) / (2.0 * h)
        };
        let num = Vec3::new(
            fd(Vec3::new(1.0, 0.0, 0.0)),
            fd(Vec3::new(0.0, 1.0, 0.0)),
            fd(Vec3::new(0.0, 0.0, 1.0)),
        );
        worst = worst.max((g - num).norm() / g.norm().max(f64::MIN_POSITIVE));
    }
    worst
}

/// Brute-force checks on a configured scenario: steepest descent vs a
/// 0.05 μm grid (on distances estimated from one simulated trial), the
/// first receiver alone vs the closed form (fine-step bridge simulation),
/// and both analytic derivatives
/// vs finite differences.
pub fn run_oracles(
    scenario: &ValidatedScenario,
    plan: &SamplingPlan,
    settings: &SimSettings,
    seed: u64,
) -> Result<OracleReport> {
    let grid_step = 0.05;
    let traces = simulate_trial(scenario, plan, settings, seed)?;
    let fix = localize(&traces, scenario, &LocalizeOptions::for_scenario(scenario))?;
    let centers: Vec<Vec3> = fix
        .used_receivers
        .iter()
        .map(|id| {
            scenario
                .receivers()
                .iter()
                .find(|r| r.id == *id)
                .expect("used receiver exists")
                .center
        })
        .collect();
    let distances: Vec<f64> = fix.per_receiver_estimates.iter().map(|e| e.d).collect();
    let init = multilaterate_init(&centers, &distances)?;
    let sd = steepest_descent(init, &centers, &distances, &Default::default())?;
    let grid = grid_minimum(init, 2.0, grid_step, &centers, &distances);
    let dev = sd.p - grid;
    let sd_grid_deviation = dev.x.abs().max(dev.y.abs()).max(dev.z.abs());

    // The closed-form check targets the physics, so it always runs with a
    // fine step, the bridge refinement and enough molecules for ~1% noise.
    let first = scenario.receivers()[0];
    let horizon = plan.horizon();
    let half_steps = (horizon / 2.0 / ORACLE_SIM_STEP).ceil();
    let single = validate_scenario(Scenario {
        receivers: vec![first],
        molecule_budget: scenario.molecule_budget().max(ORACLE_MIN_MOLECULES),
        ..scenario.scenario().clone()
    })?;
    let fine = SimSettings::new(horizon / 2.0 / half_steps).with_policy(AbsorptionPolicy::BrownianBridge);
    let alone = simulate_trial(&single, &SamplingPlan::new(horizon / 2.0, 2)?, &fine, seed)?;
    let ctx = ModelContext::new(
        single.molecule_budget() as f64,
        first.radius,
        scenario.medium().diffusion_coefficient,
        vec![horizon],
    )?;
    let want = siso_cumulative(&ctx, single.distances()[0], horizon)?;
    let siso_relative = relative(alone[0].final_count(), want);

    let all_centers: Vec<Vec3> = scenario.receivers().iter().map(|r| r.center).collect();
    Ok(OracleReport {
        sd_grid_deviation,
        grid_step,
        siso_relative,
        fit_jacobian_relative: fit_jacobian_check()?,
        gradient_relative: gradient_check(&all_centers, scenario.distances()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Medium;

    fn base() -> Scenario {
        Scenario {
            transmitter: Vec3::ZERO,
            receivers: tetrahedral_receivers(5.0, 1.0),
            medium: Medium::still(100.0),
            molecule_budget: 400,
        }
    }

    #[test]
    fn synthetic_traces_localize_exactly() {
        let mut s = base();
        s.transmitter = Vec3::new(2.0, 6.0, -1.0);
        let v = validate_scenario(s).unwrap();
        let plan = SamplingPlan::new(0.02, 100).unwrap();
        let traces = synthetic_traces(&v, &plan, SYNTHETIC_GAIN).unwrap();
        let r = localize(&traces, &v, &LocalizeOptions::for_scenario(&v)).unwrap();
        assert!(location_error(r.p_hat, v.transmitter()) < 1e-4);
    }

    #[test]
    fn ranges_and_values_parse() {
        assert_eq!(parse_range("0:40:10").unwrap(), vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(parse_range("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_range("0:1").is_err());
        assert_eq!(parse_subset("all").unwrap(), SubsetSize::All);
        assert_eq!(parse_subset("6").unwrap(), SubsetSize::Best(6));
        assert_eq!(Topology::parse("cube:10").unwrap(), Topology::Cube(10.0));
        assert!(Topology::parse("ring:3").is_err());
        assert!(SweepAxis::parse("colour").is_err());
    }

    #[test]
    fn sweep_records_invalid_cells_and_keeps_going() {
        let plan = SamplingPlan::new(0.02, 20).unwrap();
        let spec = SweepSpec {
            axis: SweepAxis::Radius,
            values: vec!["1".into(), "9".into()],
            positions: vec![Vec3::ZERO],
        };
        let rep = run_sweep(&base(), &plan, &SimSettings::new(1e-3), 3, 2, &spec, None).unwrap();
        assert_eq!(rep.cells.len(), 2);
        assert_eq!(rep.cells[1].outcomes, vec![Err("OverlappingReceivers"); 2]);
        assert_eq!(rep.raw_rows().lines().count(), 4);
        assert_eq!(rep.cells[1].summary().failures, 2);
    }

    #[test]
    fn estimation_stage_sweeps_share_one_ensemble() {
        let plan = SamplingPlan::new(0.02, 50).unwrap();
        let st = SimSettings::new(1e-3);
        let subset = SweepSpec {
            axis: SweepAxis::Subset,
            values: vec!["all".into(), "4".into()],
            positions: vec![Vec3::new(0.0, 3.0, 0.0)],
        };
        let rep = run_sweep(&base(), &plan, &st, 5, 3, &subset, None).unwrap();
        // With four receivers both values select the same set.
        assert_eq!(rep.cells[0].outcomes, rep.cells[1].outcomes);

        let interval = SweepSpec {
            axis: SweepAxis::SampleInterval,
            values: vec!["0.02".into(), "0.0025".into()],
            positions: vec![Vec3::new(0.0, 3.0, 0.0)],
        };
        let rep = run_sweep(&base(), &plan, &st, 5, 3, &interval, None).unwrap();
        assert_eq!(rep.cells[1].outcomes, vec![Err("StepNotDividingSampleInterval"); 3]);
    }

    #[test]
    fn derivative_checks_pass() {
        assert!(fit_jacobian_check().unwrap() <= 1e-6);
        let cs: Vec<Vec3> = tetrahedral_receivers(5.0, 1.0).iter().map(|r| r.center).collect();
        assert!(gradient_check(&cs, &[6.0, 8.0, 9.0, 12.0]) <= 1e-6);
    }
}
