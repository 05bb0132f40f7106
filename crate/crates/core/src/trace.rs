//! Cumulative per-receiver absorption traces and the absorption event log
//! they are binned from.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Cumulative absorbed-molecule counts of one receiver at the sample
/// instants. Simulated counts are integral; synthetic traces may carry
/// fractional values.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeTrace {
    pub receiver_id: usize,
    pub sample_times: Vec<f64>,
    pub counts: Vec<f64>,
}

impl CumulativeTrace {
    pub fn final_count(&self) -> f64 {
        self.counts.last().copied().unwrap_or(0.0)
    }

    pub fn is_monotone(&self) -> bool {
        self.counts.windows(2).all(|w| w[0] <= w[1])
    }
}

/// One molecule removed by a receiver at the end of simulation step `step`
/// (1-based, so the event time is `step * sim_step`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbsorptionEvent {
    pub step: u32,
    /// Index into the scenario's receiver list.
    pub receiver: u16,
}

/// Number of simulation steps in one sample interval, or an error when the
/// ratio is not an integer.
pub fn steps_per_interval(sample_interval: f64, sim_step: f64) -> Result<u64> {
    let err = Error::StepNotDividingSampleInterval {
        sim_step,
        sample_interval,
    };
    if !(sim_step > 0.0) || !(sample_interval > 0.0) {
        return Err(err);
    }
    let ratio = sample_interval / sim_step;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * rounded {
        return Err(err);
    }
    Ok(rounded as u64)
}

/// Bin absorption events into cumulative traces, one per receiver index.
///
/// An event at step `s` counts towards sample `n` iff `s ≤ n · steps_per_sample`.
pub fn bin_events(
    events: &[AbsorptionEvent],
    receiver_ids: &[usize],
    sample_interval: f64,
    num_samples: usize,
    steps_per_sample: u64,
) -> Vec<CumulativeTrace> {
    let mut per_bin = vec![vec![0u64; num_samples]; receiver_ids.len()];
    for ev in events {
        let bin = (ev.step as u64).saturating_sub(1) / steps_per_sample;
        if (bin as usize) < num_samples {
            per_bin[ev.receiver as usize][bin as usize] += 1;
        }
    }
    let sample_times: Vec<f64> = (1..=num_samples).map(|n| n as f64 * sample_interval).collect();
    receiver_ids
        .iter()
        .zip(per_bin)
        .map(|(&id, bins)| {
            let mut acc = 0u64;
            let counts = bins
                .into_iter()
                .map(|b| {
                    acc += b;
                    acc as f64
                })
                .collect();
            CumulativeTrace {
                receiver_id: id,
                sample_times: sample_times.clone(),
                counts,
            }
        })
        .collect()
}

/// Adds independent zero-mean Gaussian noise of the given variance to each
/// sample. Intended for exercising the estimator on synthetic traces.
pub fn with_additive_noise<R: Rng + ?Sized>(
    trace: &CumulativeTrace,
    variance: f64,
    rng: &mut R,
) -> Result<CumulativeTrace> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::NonPositiveParameter {
            name: "noise variance",
            value: variance,
        });
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite sigma");
    Ok(CumulativeTrace {
        receiver_id: trace.receiver_id,
        sample_times: trace.sample_times.clone(),
        counts: trace.counts.iter().map(|c| c + normal.sample(rng)).collect(),
    })
}

pub const TRACE_CSV_HEADER: &str = "trial,receiver,t,count";

/// Rows `trial,receiver,t,count` for one trial.
pub fn write_trace_rows(out: &mut String, trial: usize, traces: &[CumulativeTrace]) {
    for tr in traces {
        for (t, c) in tr.sample_times.iter().zip(&tr.counts) {
            let _ = writeln!(out, "{trial},{},{t:.9},{c}", tr.receiver_id);
        }
    }
}

/// Parse a trace CSV (comment lines starting with `#` are skipped) into
/// per-trial trace lists, ordered by trial then by first appearance of each
/// receiver.
pub fn parse_trace_csv(text: &str) -> Result<Vec<(usize, Vec<CumulativeTrace>)>> {
    let mut trials: Vec<(usize, Vec<CumulativeTrace>)> = Vec::new();
    let mut seen_header = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != TRACE_CSV_HEADER {
                return Err(Error::Parse(format!(
                    "line {}: expected header `{TRACE_CSV_HEADER}`",
                    lineno + 1
                )));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 fields", lineno + 1)));
        }
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
        let trial: usize = fields[0].parse().map_err(|_| bad("trial"))?;
        let receiver: usize = fields[1].parse().map_err(|_| bad("receiver"))?;
        let t: f64 = fields[2].parse().map_err(|_| bad("t"))?;
        let count: f64 = fields[3].parse().map_err(|_| bad("count"))?;
        if trials.last().map(|(i, _)| *i) != Some(trial) {
            trials.push((trial, Vec::new()));
        }
        let traces = &mut trials.last_mut().expect("pushed above").1;
        match traces.iter_mut().find(|tr| tr.receiver_id == receiver) {
            Some(tr) => {
                tr.sample_times.push(t);
                tr.counts.push(count);
            }
            None => traces.push(CumulativeTrace {
                receiver_id: receiver,
                sample_times: vec![t],
                counts: vec![count],
            }),
        }
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_ratio_must_be_integral() {
        assert_eq!(steps_per_interval(0.02, 1e-4).unwrap(), 200);
        assert_eq!(steps_per_interval(1e-4, 1e-4).unwrap(), 1);
        assert!(steps_per_interval(0.02, 3e-3).is_err());
        assert!(steps_per_interval(1e-5, 1e-4).is_err());
        assert!(steps_per_interval(0.02, 0.0).is_err());
    }

    #[test]
    fn binning_is_cumulative_and_inclusive() {
        let ev = |step, receiver| AbsorptionEvent { step, receiver };
        let events = [ev(1, 0), ev(10, 0), ev(11, 1), ev(20, 0), ev(31, 0)];
        let tr = bin_events(&events, &[7, 9], 0.1, 3, 10);
        assert_eq!(tr[0].receiver_id, 7);
        assert_eq!(tr[0].counts, vec![2.0, 3.0, 3.0]);
        assert_eq!(tr[1].counts, vec![0.0, 1.0, 1.0]);
        assert!((tr[0].sample_times[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let traces = vec![
            CumulativeTrace {
                receiver_id: 1,
                sample_times: vec![0.5, 1.0],
                counts: vec![3.0, 4.0],
            },
            CumulativeTrace {
                receiver_id: 2,
                sample_times: vec![0.5, 1.0],
                counts: vec![0.0, 2.0],
            },
        ];
        let mut out = format!("# seed=1\n{TRACE_CSV_HEADER}\n");
        write_trace_rows(&mut out, 0, &traces);
        write_trace_rows(&mut out, 1, &traces[..1]);
        let parsed = parse_trace_csv(&out).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].1, traces);
        assert_eq!(parsed[1].1, traces[..1].to_vec());
        assert!(out.contains("0,1,0.500000000,3"));
    }

    #[test]
    fn csv_rejects_wrong_header() {
        assert!(parse_trace_csv("a,b,c\n1,2,3\n").is_err());
    }

    #[test]
    fn additive_noise_zero_variance_is_identity() {
        let tr = CumulativeTrace {
            receiver_id: 1,
            sample_times: vec![1.0, 2.0],
            counts: vec![5.0, 6.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(with_additive_noise(&tr, 0.0, &mut rng).unwrap(), tr);
        let noisy = with_additive_noise(&tr, 4.0, &mut rng).unwrap();
        assert_ne!(noisy.counts, tr.counts);
        assert!(with_additive_noise(&tr, -1.0, &mut rng).is_err());
    }
}
