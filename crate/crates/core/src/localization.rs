//! Transmitter localization from per-receiver distance estimates: linear
//! multilateration for the starting point, then steepest descent on the
//! quartic sphere-consistency objective.

use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::estimation::{estimate_distance, receiver_context, DistanceEstimate};
use crate::geometry::Vec3;
use crate::lm::LmOptions;
use crate::scenario::{Receiver, ValidatedScenario};
use crate::trace::CumulativeTrace;

/// Condition number of `AᵀA` above which the receiver geometry is rejected.
pub const MAX_CONDITION: f64 = 1e10;
/// Minimum number of receivers for a 3-D fix.
pub const MIN_RECEIVERS: usize = 4;

/// `Σ_k (‖p − p_k‖² − d_k²)²`.
pub fn objective_h(p: Vec3, centers: &[Vec3], distances: &[f64]) -> f64 {
    centers
        .iter()
        .zip(distances)
        .map(|(&c, &d)| {
            let e = (p - c).norm_squared() - d * d;
            e * e
        })
        .sum()
}

pub fn gradient_h(p: Vec3, centers: &[Vec3], distances: &[f64]) -> Vec3 {
    let mut g = Vec3::ZERO;
    for (&c, &d) in centers.iter().zip(distances) {
        let diff = p - c;
        g += diff * (4.0 * (diff.norm_squared() - d * d));
    }
    g
}

fn check_lengths(centers: &[Vec3], distances: &[f64]) -> Result<()> {
    if centers.len() != distances.len() {
        return Err(Error::LengthMismatch {
            expected: centers.len(),
            found: distances.len(),
        });
    }
    if centers.len() < MIN_RECEIVERS {
        return Err(Error::TooFewReceivers { found: centers.len() });
    }
    Ok(())
}

/// Rows of the difference system, each relative to the last center.
fn difference_rows(centers: &[Vec3]) -> Vec<Vector3<f64>> {
    let last = centers[centers.len() - 1];
    centers[..centers.len() - 1]
        .iter()
        .map(|&c| {
            let r = (last - c) * 2.0;
            Vector3::new(r.x, r.y, r.z)
        })
        .collect()
}

/// Condition number of `AᵀA` for the multilateration system over `centers`.
/// Infinite when the matrix is singular.
pub fn geometry_condition(centers: &[Vec3]) -> f64 {
    if centers.len() < MIN_RECEIVERS {
        return f64::INFINITY;
    }
    let ata: Matrix3<f64> = difference_rows(centers).iter().map(|r| r * r.transpose()).sum();
    let eig = SymmetricEigen::new(ata).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Least-squares solution of the linearized sphere system.
pub fn multilaterate_init(centers: &[Vec3], distances: &[f64]) -> Result<Vec3> {
    check_lengths(centers, distances)?;
    let condition = geometry_condition(centers);
    if condition > MAX_CONDITION {
        return Err(Error::DegenerateGeometry { condition });
    }
    let rows = difference_rows(centers);
    let n = centers.len() - 1;
    let (ck, dk) = (centers[n], distances[n]);
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (i, row) in rows.iter().enumerate() {
        let b = -centers[i].norm_squared() + ck.norm_squared() + distances[i] * distances[i] - dk * dk;
        ata += row * row.transpose();
        atb += row * b;
    }
    let sol = ata
        .cholesky()
        .map(|c| c.solve(&atb))
        .or_else(|| ata.lu().solve(&atb))
        .ok_or(Error::SingularSystem)?;
    Ok(Vec3::new(sol.x, sol.y, sol.z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdOptions {
    /// Backtracking factor.
    pub lambda: f64,
    pub max_iters: usize,
    /// Gradient tolerance relative to `4·Σd_k²·d_rms`.
    pub grad_tol: f64,
    /// Smallest trial step relative to the initial one.
    pub min_step_ratio: f64,
}

impl Default for SdOptions {
    fn default() -> Self {
        SdOptions {
            lambda: 0.5,
            max_iters: 500,
            grad_tol: 1e-12,
            min_step_ratio: 1e-15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdOutcome {
    pub p: Vec3,
    pub iterations: usize,
    pub objective: f64,
}

/// Steepest descent with backtracking. Every step restarts from
/// `1 / (4·Σd_k²)` and shrinks by `lambda` until `H` strictly decreases.
pub fn steepest_descent(p0: Vec3, centers: &[Vec3], distances: &[f64], opts: &SdOptions) -> Result<SdOutcome> {
    check_lengths(centers, distances)?;
    if !(opts.lambda > 0.0 && opts.lambda < 1.0) {
        return Err(Error::NonPositiveParameter {
            name: "lambda",
            value: opts.lambda,
        });
    }
    let sum_d2: f64 = distances.iter().map(|d| d * d).sum();
    if !(sum_d2 > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "distances",
            value: sum_d2,
        });
    }
    let s0 = 1.0 / (4.0 * sum_d2);
    let d_rms = (sum_d2 / distances.len() as f64).sqrt();
    let grad_tol = opts.grad_tol * 4.0 * sum_d2 * d_rms;

    // Iterate relative to the centroid so rounding does not depend on where
    // the layout sits.
    let origin = centers.iter().fold(Vec3::ZERO, |acc, &c| acc + c) * (1.0 / centers.len() as f64);
    let local: Vec<Vec3> = centers.iter().map(|&c| c - origin).collect();
    let centers = &local[..];
    let mut p = p0 - origin;
    let mut h = objective_h(p, centers, distances);
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let g = gradient_h(p, centers, distances);
        if g.norm() < grad_tol {
            break;
        }
        let mut s = s0;
        let accepted = loop {
            let cand = p - g * s;
            let hc = objective_h(cand, centers, distances);
            if hc < h {
                break Some((cand, hc));
            }
            s *= opts.lambda;
            if s < opts.min_step_ratio * s0 {
                break None;
            }
        };
        match accepted {
            Some((cand, hc)) => {
                p = cand;
                h = hc;
                iterations += 1;
            }
            None => break,
        }
    }
    Ok(SdOutcome {
        p: if iterations == 0 { p0 } else { p + origin },
        iterations,
        objective: h,
    })
}

/// How many receivers feed the position fix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetSize {
    /// Every receiver that absorbed at least one molecule.
    All,
    /// The `k` receivers with the largest final counts.
    Best(usize),
}

impl SubsetSize {
    /// All receivers for a minimal layout, otherwise the best four.
    pub fn default_for(receivers: usize) -> Self {
        if receivers > MIN_RECEIVERS {
            SubsetSize::Best(MIN_RECEIVERS)
        } else {
            SubsetSize::All
        }
    }
}

/// Ids of the `k` receivers with the highest final counts, ties to the
/// lower id. Zero-count receivers are never selected.
pub fn select_receivers(final_counts: &[(usize, f64)], k: usize) -> Result<Vec<usize>> {
    Ok(rank_receivers(final_counts, k)?.into_iter().take(k).collect())
}

/// Every usable receiver id in selection order, after checking that at
/// least `k ≥ 4` of them exist.
fn rank_receivers(final_counts: &[(usize, f64)], k: usize) -> Result<Vec<usize>> {
    if k < MIN_RECEIVERS {
        return Err(Error::TooFewReceivers { found: k });
    }
    let mut usable: Vec<(usize, f64)> = final_counts.iter().copied().filter(|&(_, c)| c > 0.0).collect();
    if usable.len() < k {
        return Err(Error::TooFewUsableReceivers {
            requested: k,
            usable: usable.len(),
        });
    }
    usable.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(usable.into_iter().map(|(id, _)| id).collect())
}

/// Index combinations of size `k` from `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = (k <= n).then(|| (0..k).collect::<Vec<_>>());
    std::iter::from_fn(move || {
        let cur = next.take()?;
        let mut succ = cur.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if succ[i] < n - k + i {
                succ[i] += 1;
                for j in i + 1..k {
                    succ[j] = succ[j - 1] + 1;
                }
                next = Some(succ);
                break;
            }
        }
        Some(cur)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeOptions {
    pub subset: SubsetSize,
    pub lm: LmOptions,
    pub sd: SdOptions,
}

impl LocalizeOptions {
    pub fn for_scenario(scenario: &ValidatedScenario) -> Self {
        LocalizeOptions {
            subset: SubsetSize::default_for(scenario.receivers().len()),
            lm: LmOptions::default(),
            sd: SdOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub p_hat: Vec3,
    pub p_init: Vec3,
    pub objective: f64,
    pub sd_iterations: usize,
    pub used_receivers: Vec<usize>,
    pub per_receiver_estimates: Vec<DistanceEstimate>,
}

pub fn location_error(p_hat: Vec3, p_true: Vec3) -> f64 {
    p_hat.distance(p_true)
}

/// Choose the receiver subset. With `Best(k)`, a top-`k` set whose centers
/// are degenerate (e.g. coplanar) is replaced by the next combination in
/// rank order with usable geometry.
fn choose_subset(traces: &[CumulativeTrace], receivers: &[Receiver], subset: SubsetSize) -> Result<Vec<usize>> {
    if receivers.len() < MIN_RECEIVERS {
        return Err(Error::TooFewReceivers { found: receivers.len() });
    }
    let counts: Vec<(usize, f64)> = traces.iter().map(|t| (t.receiver_id, t.final_count())).collect();
    let center_of = |id: usize| receivers.iter().find(|r| r.id == id).map(|r| r.center);
    let (ranked, k) = match subset {
        SubsetSize::All => {
            let usable = counts.iter().filter(|c| c.1 > 0.0).count();
            let ranked = rank_receivers(&counts, usable.max(MIN_RECEIVERS)).map_err(|e| match e {
                Error::TooFewUsableReceivers { usable, .. } => Error::TooFewUsableReceivers {
                    requested: MIN_RECEIVERS,
                    usable,
                },
                e => e,
            })?;
            let k = ranked.len();
            (ranked, k)
        }
        SubsetSize::Best(k) => (rank_receivers(&counts, k)?, k),
    };
    let mut first_condition = None;
    for combo in combinations(ranked.len(), k) {
        let ids: Vec<usize> = combo.iter().map(|&i| ranked[i]).collect();
        let centers: Vec<Vec3> = ids
            .iter()
            .map(|&id| {
                center_of(id).ok_or(Error::IndexOutOfRange {
                    index: id,
                    len: receivers.len(),
                })
            })
            .collect::<Result<_>>()?;
        let condition = geometry_condition(&centers);
        if condition <= MAX_CONDITION {
            return Ok(ids);
        }
        first_condition.get_or_insert(condition);
    }
    Err(Error::DegenerateGeometry {
        condition: first_condition.unwrap_or(f64::INFINITY),
    })
}

/// Full pipeline for one trial: distance estimation on the selected
/// receivers, multilateration, then steepest-descent refinement.
pub fn localize(
    traces: &[CumulativeTrace],
    scenario: &ValidatedScenario,
    opts: &LocalizeOptions,
) -> Result<LocalizationResult> {
    let receivers = scenario.receivers();
    let used = choose_subset(traces, receivers, opts.subset)?;
    let mut estimates = Vec::with_capacity(used.len());
    let mut centers = Vec::with_capacity(used.len());
    for &id in &used {
        let k = receivers
            .iter()
            .position(|r| r.id == id)
            .expect("chosen from scenario receivers");
        let trace = traces.iter().find(|t| t.receiver_id == id).expect("chosen from traces");
        let ctx = receiver_context(scenario, k, trace.sample_times.clone())?;
        estimates.push(estimate_distance(trace, &ctx, &opts.lm)?);
        centers.push(receivers[k].center);
    }
    let distances: Vec<f64> = estimates.iter().map(|e| e.d).collect();
    let p_init = multilaterate_init(&centers, &distances)?;
    let sd = steepest_descent(p_init, &centers, &distances, &opts.sd)?;
    Ok(LocalizationResult {
        p_hat: sd.p,
        p_init,
        objective: sd.objective,
        sd_iterations: sd.iterations,
        used_receivers: used,
        per_receiver_estimates: estimates,
    })
}

/// Append one `[trial N]` section of the flat key-value result document.
pub fn write_result_section(out: &mut String, trial: usize, result: &Result<LocalizationResult>) {
    let _ = writeln!(out, "[trial {trial}]");
    match result {
        Ok(r) => {
            let ids: Vec<String> = r.used_receivers.iter().map(|id| id.to_string()).collect();
            let _ = writeln!(out, "status = ok");
            let _ = writeln!(out, "p_init = {}", r.p_init);
            let _ = writeln!(out, "p_hat = {}", r.p_hat);
            let _ = writeln!(out, "objective = {}", r.objective);
            let _ = writeln!(out, "sd_iterations = {}", r.sd_iterations);
            let _ = writeln!(out, "used_receivers = {}", ids.join(" "));
            for e in &r.per_receiver_estimates {
                let _ = writeln!(
                    out,
                    "estimate.{} = {} {} {} {}",
                    e.receiver_id, e.a, e.d, e.sse, e.r_square
                );
            }
        }
        Err(e) => {
            let _ = writeln!(out, "status = failed");
            let _ = writeln!(out, "error = {}", e.kind());
            let _ = writeln!(out, "message = {e}");
        }
    }
    out.push('\n');
}
