use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use mcvd_core::config::ExperimentConfig;
use mcvd_core::estimation::{estimate_distance, receiver_context, write_estimate_row, ESTIMATE_CSV_HEADER};
use mcvd_core::experiments::{
    localize_trials, parse_range, parse_subset, run_oracles, run_sweep, summary_row, synthetic_traces, SweepAxis,
    SweepSpec, SWEEP_RAW_HEADER, SWEEP_SUMMARY_HEADER, SYNTHETIC_GAIN,
};
use mcvd_core::lm::LmOptions;
use mcvd_core::localization::{location_error, write_result_section, LocalizeOptions, SubsetSize};
use mcvd_core::scenario::{validate_scenario, Scenario, ValidatedScenario};
use mcvd_core::sim::{receiving_probability_map, run_trials, AbsorptionPolicy, SimSettings};
use mcvd_core::stats::Summary;
use mcvd_core::trace::{parse_trace_csv, write_trace_rows, CumulativeTrace, TRACE_CSV_HEADER};
use mcvd_core::{Error, Vec3};

#[derive(Parser, Debug)]
#[command(
    name = "mcvd",
    version,
    about = "Diffusive channel simulation and transmitter localization"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the trial count from the config
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (wall time only, results do not change)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Absorption::EndOfStep)]
    absorption: Absorption,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Absorption {
    EndOfStep,
    Bridge,
}

impl Absorption {
    fn policy(self) -> AbsorptionPolicy {
        match self {
            Absorption::EndOfStep => AbsorptionPolicy::EndOfStep,
            Absorption::Bridge => AbsorptionPolicy::BrownianBridge,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Absorption::EndOfStep => "end-of-step",
            Absorption::Bridge => "bridge",
        }
    }
}

/// Transmitter positions along one axis; the other coordinates come from
/// the config.
#[derive(Args, Debug, Clone)]
struct Positions {
    #[arg(long, value_parser = ["x", "y", "z"], requires = "tn_range")]
    tn_axis: Option<String>,
    /// `start:stop:step` or a comma list
    #[arg(long, requires = "tn_axis", allow_hyphen_values = true)]
    tn_range: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate trials and write cumulative traces
    Simulate,
    /// Fit every receiver trace of every trial
    Fit {
        /// Trace CSV to fit instead of simulating
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Localize the transmitter from traces
    Localize {
        #[arg(long)]
        traces: Option<PathBuf>,
        /// `all` or a receiver count
        #[arg(long)]
        subset: Option<String>,
    },
    /// Simulate and localize, optionally at several transmitter positions
    Pipeline {
        #[command(flatten)]
        positions: Positions,
        #[arg(long)]
        subset: Option<String>,
        /// Use noise-free model traces instead of the particle simulator
        #[arg(long)]
        synthetic: bool,
    },
    /// Sweep one parameter and summarize the location error
    Sweep {
        /// radius, q, d, flow, interval, subset, topology or tn
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values
        #[arg(long, default_value = "-", allow_hyphen_values = true)]
        values: String,
        #[command(flatten)]
        positions: Positions,
        #[arg(long)]
        subset: Option<String>,
    },
    /// Receiving probability per receiver over a grid of transmitter positions
    Probmap {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        z: f64,
    },
    /// Brute-force checks of the optimizers and models
    Oracle,
}

struct Run {
    config: ExperimentConfig,
    settings: SimSettings,
    absorption: Absorption,
    out: PathBuf,
}

impl Run {
    fn provenance(&self) -> String {
        format!(
            "# config_hash={} seed={} trials={} sim_step={} absorption={}\n",
            self.config.hash(),
            self.config.seed,
            self.config.trials,
            self.config.sim_step,
            self.absorption.name()
        )
    }

    fn write(&self, name: &str, header: &str, body: &str) -> anyhow::Result<PathBuf> {
        let path = self.out.join(name);
        let mut text = self.provenance();
        if !header.is_empty() {
            text.push_str(header);
            text.push('\n');
        }
        text.push_str(body);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    fn scenario(&self) -> mcvd_core::Result<ValidatedScenario> {
        validate_scenario(self.config.scenario.clone())
    }

    fn positions(&self, p: &Positions) -> anyhow::Result<Vec<Vec3>> {
        let base = self.config.scenario.transmitter;
        let (Some(axis), Some(range)) = (&p.tn_axis, &p.tn_range) else {
            return Ok(vec![base]);
        };
        Ok(parse_range(range)?
            .into_iter()
            .map(|v| match axis.as_str() {
                "x" => Vec3::new(v, base.y, base.z),
                "y" => Vec3::new(base.x, v, base.z),
                _ => Vec3::new(base.x, base.y, v),
            })
            .collect())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> mcvd_core::Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn subset_option(s: &Option<String>) -> mcvd_core::Result<Option<SubsetSize>> {
    s.as_deref().map(parse_subset).transpose()
}

/// Traces from a CSV file, or freshly simulated from the config.
fn load_traces(
    run: &Run,
    scenario: &ValidatedScenario,
    path: &Option<PathBuf>,
) -> anyhow::Result<Vec<(usize, Vec<CumulativeTrace>)>> {
    match path {
        Some(p) => Ok(parse_trace_csv(&read(p)?)?),
        None => {
            let ens = run_trials(
                scenario,
                &run.config.plan,
                &run.settings,
                run.config.seed,
                run.config.trials,
            )?;
            Ok(ens.trials.into_iter().map(|t| (t.index, t.traces)).collect())
        }
    }
}

fn cmd_simulate(run: &Run) -> anyhow::Result<()> {
    let scenario = run.scenario()?;
    let ens = run_trials(
        &scenario,
        &run.config.plan,
        &run.settings,
        run.config.seed,
        run.config.trials,
    )?;
    let mut body = String::new();
    let budget = scenario.molecule_budget();
    let mut conserved = true;
    let mut absorbed = 0u64;
    for t in &ens.trials {
        write_trace_rows(&mut body, t.index, &t.traces);
        let counted: f64 = t.traces.iter().map(|tr| tr.final_count()).sum();
        conserved &= counted == t.absorbed() as f64 && t.absorbed() <= budget;
        absorbed += t.absorbed();
    }
    let path = run.write("traces.csv", TRACE_CSV_HEADER, &body)?;
    println!("wrote {}", path.display());
    println!(
        "conservation = {} trials = {} released_per_trial = {budget} absorbed_total = {absorbed}",
        if conserved { "ok" } else { "violated" },
        ens.trials.len()
    );
    anyhow::ensure!(conserved, "molecule count not conserved");
    Ok(())
}

fn cmd_fit(run: &Run, traces: &Option<PathBuf>) -> anyhow::Result<()> {
    let scenario = run.scenario()?;
    let trials = load_traces(run, &scenario, traces)?;
    let opts = LmOptions::default();
    let rows: Vec<String> = trials
        .par_iter()
        .map(|(trial, traces)| {
            let mut out = String::new();
            for tr in traces {
                let Some(k) = scenario.receivers().iter().position(|r| r.id == tr.receiver_id) else {
                    let _ = writeln!(out, "# trial {trial} receiver {}: not in config", tr.receiver_id);
                    continue;
                };
                let fit = receiver_context(&scenario, k, tr.sample_times.clone())
                    .and_then(|ctx| estimate_distance(tr, &ctx, &opts));
                match fit {
                    Ok(e) => write_estimate_row(&mut out, *trial, &e),
                    Err(e) => {
                        let _ = writeln!(out, "# trial {trial} receiver {}: {} {e}", tr.receiver_id, e.kind());
                    }
                }
            }
            out
        })
        .collect();
    let path = run.write("estimates.csv", ESTIMATE_CSV_HEADER, &rows.concat())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn localize_report(
    scenario: &ValidatedScenario,
    traces: &[(usize, Vec<CumulativeTrace>)],
    subset: Option<SubsetSize>,
) -> (String, Summary) {
    let mut opts = LocalizeOptions::for_scenario(scenario);
    if let Some(s) = subset {
        opts.subset = s;
    }
    let plain: Vec<Vec<CumulativeTrace>> = traces.iter().map(|(_, t)| t.clone()).collect();
    let results = localize_trials(&plain, scenario, &opts);
    let mut text = String::new();
    let _ = writeln!(text, "transmitter = {}", scenario.transmitter());
    let _ = writeln!(text, "trials = {}\n", results.len());
    let truth = scenario.transmitter();
    let mut errors = Vec::new();
    for ((trial, _), r) in traces.iter().zip(&results) {
        write_result_section(&mut text, *trial, r);
        if let Ok(r) = r {
            let _ = writeln!(text, "delta_p = {}\n", location_error(r.p_hat, truth));
        }
        errors.push(r.as_ref().ok().map(|r| location_error(r.p_hat, truth)));
    }
    (text, Summary::from_outcomes(&errors))
}

fn print_summary(p: Vec3, s: &Summary) {
    println!(
        "tn = {p} trials = {} failures = {} mean_delta_p = {} median_delta_p = {}",
        s.trials, s.failures, s.mean, s.median
    );
}

fn cmd_localize(run: &Run, traces: &Option<PathBuf>, subset: &Option<String>) -> anyhow::Result<()> {
    let scenario = run.scenario()?;
    let subset = subset_option(subset)?;
    let trials = load_traces(run, &scenario, traces)?;
    let (text, summary) = localize_report(&scenario, &trials, subset);
    let path = run.write("results.txt", "", &text)?;
    println!("wrote {}", path.display());
    print_summary(scenario.transmitter(), &summary);
    Ok(())
}

fn cmd_pipeline(run: &Run, positions: &Positions, subset: &Option<String>, synthetic: bool) -> anyhow::Result<()> {
    let subset = subset_option(subset)?;
    let mut results = String::new();
    let mut summaries = String::new();
    for p in run.positions(positions)? {
        let scenario = validate_scenario(Scenario {
            transmitter: p,
            ..run.config.scenario.clone()
        });
        let summary = match scenario {
            Err(e) => {
                let _ = writeln!(results, "# tn = {p} skipped: {} {e}\n", e.kind());
                Summary::from_outcomes(&vec![None; run.config.trials])
            }
            Ok(scenario) => {
                let traces: Vec<(usize, Vec<CumulativeTrace>)> = if synthetic {
                    let t = synthetic_traces(&scenario, &run.config.plan, SYNTHETIC_GAIN)?;
                    (0..run.config.trials).map(|i| (i, t.clone())).collect()
                } else {
                    load_traces(run, &scenario, &None)?
                };
                let (text, summary) = localize_report(&scenario, &traces, subset);
                results.push_str(&text);
                summary
            }
        };
        print_summary(p, &summary);
        let _ = writeln!(summaries, "{}", summary_row("tn", "-", p, &summary));
    }
    let a = run.write("results.txt", "", &results)?;
    let b = run.write("summary.csv", SWEEP_SUMMARY_HEADER, &summaries)?;
    println!("wrote {}\nwrote {}", a.display(), b.display());
    Ok(())
}

fn cmd_sweep(
    run: &Run,
    axis: &str,
    values: &str,
    positions: &Positions,
    subset: &Option<String>,
) -> anyhow::Result<()> {
    let spec = SweepSpec {
        axis: SweepAxis::parse(axis)?,
        values: values.split(',').map(|v| v.trim().to_string()).collect(),
        positions: run.positions(positions)?,
    };
    let report = run_sweep(
        &run.config.scenario,
        &run.config.plan,
        &run.settings,
        run.config.seed,
        run.config.trials,
        &spec,
        subset_option(subset)?,
    )?;
    let a = run.write("sweep_raw.csv", SWEEP_RAW_HEADER, &report.raw_rows())?;
    let b = run.write("sweep_summary.csv", SWEEP_SUMMARY_HEADER, &report.summary_rows())?;
    print!("{}", report.summary_rows());
    println!("wrote {}\nwrote {}", a.display(), b.display());
    Ok(())
}

fn cmd_probmap(run: &Run, xs: &str, ys: &str, z: f64) -> anyhow::Result<()> {
    let (xs, ys) = (parse_range(xs)?, parse_range(ys)?);
    let grid: Vec<Vec3> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Vec3::new(x, y, z)))
        .collect();
    let cells = receiving_probability_map(
        &run.config.scenario,
        &run.config.plan,
        &grid,
        &run.settings,
        run.config.seed,
        run.config.trials,
    )?;
    let mut body = String::new();
    for c in &cells {
        let p = c.position;
        match c.probability {
            Some(v) => {
                let _ = writeln!(body, "{},{},{},{},{v}", p.x, p.y, p.z, c.receiver_id);
            }
            None => {
                let _ = writeln!(body, "{},{},{},{},skipped", p.x, p.y, p.z, c.receiver_id);
            }
        }
    }
    let path = run.write("probmap.csv", "x,y,z,receiver,probability", &body)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_oracle(run: &Run) -> anyhow::Result<()> {
    let scenario = run.scenario()?;
    let report = run_oracles(&scenario, &run.config.plan, &run.settings, run.config.seed)?;
    let text = report.render();
    print!("{text}");
    let path = run.write("oracle.txt", "", &text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let g = cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    let path = g.config.ok_or_else(|| Error::Parse("--config is required".into()))?;
    let mut config = ExperimentConfig::parse(&read(&path)?)?;
    if let Some(s) = g.seed {
        config.seed = s;
    }
    if let Some(t) = g.trials {
        if t == 0 {
            return Err(Error::Parse("--trials must be at least 1".into()).into());
        }
        config.trials = t;
    }
    fs::create_dir_all(&g.out).map_err(|e| io_error(&g.out, e))?;
    let run = Run {
        settings: SimSettings::new(config.sim_step).with_policy(g.absorption.policy()),
        config,
        absorption: g.absorption,
        out: g.out,
    };
    match &cli.command {
        Command::Simulate => cmd_simulate(&run),
        Command::Fit { traces } => cmd_fit(&run, traces),
        Command::Localize { traces, subset } => cmd_localize(&run, traces, subset),
        Command::Pipeline {
            positions,
            subset,
            synthetic,
        } => cmd_pipeline(&run, positions, subset, *synthetic),
        Command::Sweep {
            axis,
            values,
            positions,
            subset,
        } => cmd_sweep(&run, axis, values, positions, subset),
        Command::Probmap { x, y, z } => cmd_probmap(&run, x, y, *z),
        Command::Oracle => cmd_oracle(&run),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<Error>().map_or("Runtime", Error::kind);
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error kind={kind} message={message}");
            ExitCode::FAILURE
        }
    }
}
