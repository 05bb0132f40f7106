//! Strict parser for the flat `key = value` scenario file.
//!
//! ```text
//! # comment
//! transmitter = 0 0 0
//! receiver = 1 0 5 0 1      # id x y z r, repeatable
//! D = 100
//! flow = 0 0 0
//! Q = 10000
//! sample_interval = 0.02
//! num_samples = 100
//! sim_step = 0.001
//! seed = 7
//! trials = 100
//! ```

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scenario::{Medium, Receiver, SamplingPlan, Scenario};
use crate::sim::DEFAULT_SIM_STEP;

/// Trials per run or sweep point when the file does not say.
pub const DEFAULT_TRIALS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub plan: SamplingPlan,
    pub sim_step: f64,
    pub seed: u64,
    pub trials: usize,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn floats(line: usize, key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != n {
        return Err(err(line, format!("`{key}` expects {n} number(s), got {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| {
            let v: f64 = p
                .parse()
                .map_err(|_| err(line, format!("`{key}`: `{p}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(line, format!("`{key}`: `{p}` is not finite")))
            }
        })
        .collect()
}

fn integer<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| err(line, format!("`{key}`: `{value}` is not a non-negative integer")))
}

fn vec3(line: usize, key: &str, value: &str) -> Result<Vec3> {
    let v = floats(line, key, value, 3)?;
    Ok(Vec3::new(v[0], v[1], v[2]))
}

impl ExperimentConfig {
    /// Parse config text. Unknown or repeated keys (other than
    /// `receiver`) are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut transmitter = None;
        let mut receivers = Vec::new();
        let mut d = None;
        let mut flow = None;
        let mut q = None;
        let mut interval = None;
        let mut num_samples = None;
        let mut sim_step = None;
        let mut seed = None;
        let mut trials = None;

        fn set<T>(slot: &mut Option<T>, v: T, line: usize, key: &str) -> Result<()> {
            if slot.is_some() {
                return Err(err(line, format!("`{key}` given more than once")));
            }
            *slot = Some(v);
            Ok(())
        }

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "transmitter" => set(&mut transmitter, vec3(line, key, value)?, line, key)?,
                "receiver" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 5 {
                        return Err(err(line, "`receiver` expects `id x y z r`"));
                    }
                    let id: usize = integer(line, "receiver id", parts[0])?;
                    let rest = floats(line, key, &parts[1..].join(" "), 4)?;
                    receivers.push(Receiver::new(id, Vec3::new(rest[0], rest[1], rest[2]), rest[3]));
                }
                "D" => set(&mut d, floats(line, key, value, 1)?[0], line, key)?,
                "flow" => set(&mut flow, vec3(line, key, value)?, line, key)?,
                "Q" => set(&mut q, integer::<u64>(line, key, value)?, line, key)?,
                "sample_interval" => set(&mut interval, floats(line, key, value, 1)?[0], line, key)?,
                "num_samples" => set(&mut num_samples, integer::<usize>(line, key, value)?, line, key)?,
                "sim_step" => set(&mut sim_step, floats(line, key, value, 1)?[0], line, key)?,
                "seed" => set(&mut seed, integer::<u64>(line, key, value)?, line, key)?,
                "trials" => set(&mut trials, integer::<usize>(line, key, value)?, line, key)?,
                other => return Err(err(line, format!("unknown key `{other}`"))),
            }
        }

        let missing = |key: &str| err(0, format!("missing required key `{key}`"));
        if receivers.is_empty() {
            return Err(missing("receiver"));
        }
        let trials = trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(err(0, "`trials` must be at least 1"));
        }
        Ok(ExperimentConfig {
            scenario: Scenario {
                transmitter: transmitter.ok_or_else(|| missing("transmitter"))?,
                receivers,
                medium: Medium {
                    diffusion_coefficient: d.ok_or_else(|| missing("D"))?,
                    flow: flow.unwrap_or(Vec3::ZERO),
                },
                molecule_budget: q.ok_or_else(|| missing("Q"))?,
            },
            plan: SamplingPlan {
                sample_interval: interval.ok_or_else(|| missing("sample_interval"))?,
                num_samples: num_samples.ok_or_else(|| missing("num_samples"))?,
            },
            sim_step: sim_step.unwrap_or(DEFAULT_SIM_STEP),
            seed: seed.unwrap_or(0),
            trials,
        })
    }

    /// Normalized text form: fixed key order, every key present, numbers in
    /// shortest round-trip notation. Parsing it gives back `self`.
    pub fn render(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let _ = writeln!(out, "transmitter = {}", s.transmitter);
        for r in &s.receivers {
            let _ = writeln!(out, "receiver = {} {} {}", r.id, r.center, r.radius);
        }
        let _ = writeln!(out, "D = {}", s.medium.diffusion_coefficient);
        let _ = writeln!(out, "flow = {}", s.medium.flow);
        let _ = writeln!(out, "Q = {}", s.molecule_budget);
        let _ = writeln!(out, "sample_interval = {}", self.plan.sample_interval);
        let _ = writeln!(out, "num_samples = {}", self.plan.num_samples);
        let _ = writeln!(out, "sim_step = {}", self.sim_step);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "trials = {}", self.trials);
        out
    }

    /// First 16 hex digits of the SHA-256 of [`render`](Self::render).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.render().as_bytes());
        hex::encode(&digest[..8])
    }
}
