//! Geometric and physical configuration of a single-transmitter,
//! multi-receiver diffusion experiment.
//!
//! Units are fixed throughout the crate: micrometers, seconds, μm²/s and
//! molecule counts.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// An absorbing spherical receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub id: usize,
    pub center: Vec3,
    pub radius: f64,
}

impl Receiver {
    pub fn new(id: usize, center: Vec3, radius: f64) -> Self {
        Receiver { id, center, radius }
    }

    /// Signed distance from `p` to the sphere surface (negative inside).
    pub fn surface_gap(&self, p: Vec3) -> f64 {
        p.distance(self.center) - self.radius
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (p - self.center).norm_squared() <= self.radius * self.radius
    }
}

/// Propagation medium. The flow is a constant, spatially uniform vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    pub diffusion_coefficient: f64,
    pub flow: Vec3,
}

impl Medium {
    pub fn still(diffusion_coefficient: f64) -> Self {
        Medium {
            diffusion_coefficient,
            flow: Vec3::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub transmitter: Vec3,
    pub receivers: Vec<Receiver>,
    pub medium: Medium,
    /// Number of molecules released at t = 0.
    pub molecule_budget: u64,
}

/// Reporting schedule: counts are read at `n * sample_interval` for
/// `n = 1..=num_samples`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub sample_interval: f64,
    pub num_samples: usize,
}

impl SamplingPlan {
    pub fn new(sample_interval: f64, num_samples: usize) -> Result<Self> {
        let plan = SamplingPlan {
            sample_interval,
            num_samples,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sample_interval.is_finite() {
            return Err(Error::NonFiniteParameter {
                name: "sample_interval",
            });
        }
        if self.sample_interval <= 0.0 {
            return Err(Error::NonPositiveParameter {
                name: "sample_interval",
                value: self.sample_interval,
            });
        }
        if self.num_samples < 2 {
            return Err(Error::NonPositiveParameter {
                name: "num_samples",
                value: self.num_samples as f64,
            });
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.sample_interval * self.num_samples as f64
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (1..=self.num_samples)
            .map(|n| n as f64 * self.sample_interval)
            .collect()
    }
}

/// A scenario that passed [`validate_scenario`], with the true
/// transmitter-receiver distances attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedScenario {
    scenario: Scenario,
    distances: Vec<f64>,
}

impl ValidatedScenario {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn receivers(&self) -> &[Receiver] {
        &self.scenario.receivers
    }

    pub fn medium(&self) -> &Medium {
        &self.scenario.medium
    }

    pub fn transmitter(&self) -> Vec3 {
        self.scenario.transmitter
    }

    pub fn molecule_budget(&self) -> u64 {
        self.scenario.molecule_budget
    }

    /// True distances, in receiver order.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn into_inner(self) -> Scenario {
        self.scenario
    }
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteParameter { name })
    }
}

fn check_finite_vec(name: &'static str, v: Vec3) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteParameter { name })
    }
}

pub fn validate_scenario(scenario: Scenario) -> Result<ValidatedScenario> {
    check_finite_vec("transmitter", scenario.transmitter)?;
    check_finite_vec("flow", scenario.medium.flow)?;
    let diff = scenario.medium.diffusion_coefficient;
    check_finite("diffusion_coefficient", diff)?;
    if diff < 0.0 {
        return Err(Error::NonPositiveParameter {
            name: "diffusion_coefficient",
            value: diff,
        });
    }
    if scenario.molecule_budget == 0 {
        return Err(Error::NonPositiveParameter {
            name: "molecule_budget",
            value: 0.0,
        });
    }
    if scenario.receivers.is_empty() {
        return Err(Error::NonPositiveParameter {
            name: "receivers",
            value: 0.0,
        });
    }
    for (i, rx) in scenario.receivers.iter().enumerate() {
        check_finite_vec("receiver center", rx.center)?;
        check_finite("receiver radius", rx.radius)?;
        if rx.radius <= 0.0 {
            return Err(Error::NonPositiveParameter {
                name: "receiver radius",
                value: rx.radius,
            });
        }
        if scenario.receivers[..i].iter().any(|o| o.id == rx.id) {
            return Err(Error::DuplicateReceiverId { id: rx.id });
        }
    }
    for (i, a) in scenario.receivers.iter().enumerate() {
        for b in &scenario.receivers[i + 1..] {
            if a.center.distance(b.center) <= a.radius + b.radius {
                return Err(Error::OverlappingReceivers {
                    first: a.id,
                    second: b.id,
                });
            }
        }
    }
    let mut distances = Vec::with_capacity(scenario.receivers.len());
    for rx in &scenario.receivers {
        let d = scenario.transmitter.distance(rx.center);
        if d <= rx.radius {
            return Err(Error::TransmitterInsideReceiver { receiver: rx.id });
        }
        distances.push(d);
    }
    Ok(ValidatedScenario { scenario, distances })
}

/// Euclidean distance from the transmitter to the center of receiver `k`
/// (index into the receiver list, not the receiver id).
pub fn true_distance(scenario: &Scenario, k: usize) -> Result<f64> {
    scenario
        .receivers
        .get(k)
        .map(|rx| scenario.transmitter.distance(rx.center))
        .ok_or(Error::IndexOutOfRange {
            index: k,
            len: scenario.receivers.len(),
        })
}

/// The four-receiver tetrahedral layout on alternating vertices of a cube
/// with half-side `h`, ids 1..=4.
pub fn tetrahedral_receivers(h: f64, radius: f64) -> Vec<Receiver> {
    [
        Vec3::new(-h, h, h),
        Vec3::new(h, h, -h),
        Vec3::new(h, -h, h),
        Vec3::new(-h, -h, -h),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, c)| Receiver::new(i + 1, c, radius))
    .collect()
}

/// All eight vertices of a cube with half-side `h`, ids 1..=8.
pub fn cube_receivers(h: f64, radius: f64) -> Vec<Receiver> {
    let mut out = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(Receiver::new(out.len() + 1, Vec3::new(sx * h, sy * h, sz * h), radius));
            }
        }
    }
    out
}

/// Eight receivers on the sphere of radius `d` around `center`, one per
/// octant direction `(±1, ±1, ±1)/√3`.
pub fn octant_sphere_receivers(center: Vec3, d: f64, radius: f64) -> Vec<Receiver> {
    cube_receivers(d / 3f64.sqrt(), radius)
        .into_iter()
        .map(|mut rx| {
            rx.center += center;
            rx
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig6_scenario(tx: Vec3) -> Scenario {
        Scenario {
            transmitter: tx,
            receivers: tetrahedral_receivers(5.0, 4.0),
            medium: Medium::still(100.0),
            molecule_budget: 10_000,
        }
    }

    #[test]
    fn tetrahedral_layout_distances() {
        let v = validate_scenario(fig6_scenario(Vec3::new(0.0, 10.0, 0.0))).unwrap();
        let d = v.distances();
        assert!((d[0] - 75f64.sqrt()).abs() < 1e-12);
        assert!((d[1] - 75f64.sqrt()).abs() < 1e-12);
        assert!((d[2] - 275f64.sqrt()).abs() < 1e-12);
        assert!((d[3] - 275f64.sqrt()).abs() < 1e-12);
        assert!((d[0] - 8.660).abs() < 1e-3);
        assert!((d[2] - 16.583).abs() < 1e-3);
    }

    #[test]
    fn transmitter_inside_receiver_rejected() {
        let s = Scenario {
            transmitter: Vec3::new(0.0, 5.0, 0.0),
            receivers: vec![Receiver::new(1, Vec3::new(0.0, 5.0, 0.0), 1.0)],
            medium: Medium::still(100.0),
            molecule_budget: 10,
        };
        assert_eq!(
            validate_scenario(s),
            Err(Error::TransmitterInsideReceiver { receiver: 1 })
        );
    }

    #[test]
    fn overlapping_receivers_rejected() {
        let s = Scenario {
            transmitter: Vec3::new(10.0, 0.0, 0.0),
            receivers: vec![
                Receiver::new(1, Vec3::ZERO, 1.0),
                Receiver::new(2, Vec3::new(0.0, 0.0, 1.0), 1.0),
            ],
            medium: Medium::still(100.0),
            molecule_budget: 10,
        };
        assert_eq!(
            validate_scenario(s),
            Err(Error::OverlappingReceivers { first: 1, second: 2 })
        );
    }

    #[test]
    fn non_positive_parameters_rejected() {
        let mut s = fig6_scenario(Vec3::new(0.0, 10.0, 0.0));
        s.receivers[2].radius = 0.0;
        assert!(matches!(validate_scenario(s), Err(Error::NonPositiveParameter { .. })));
        let mut s = fig6_scenario(Vec3::new(0.0, 10.0, 0.0));
        s.medium.diffusion_coefficient = -1.0;
        assert!(matches!(validate_scenario(s), Err(Error::NonPositiveParameter { .. })));
        let mut s = fig6_scenario(Vec3::new(0.0, 10.0, 0.0));
        s.molecule_budget = 0;
        assert!(validate_scenario(s).is_err());
        let mut s = fig6_scenario(Vec3::new(0.0, 10.0, 0.0));
        s.transmitter.x = f64::NAN;
        assert!(matches!(validate_scenario(s), Err(Error::NonFiniteParameter { .. })));
    }

    #[test]
    fn true_distance_examples() {
        let mut s = Scenario {
            transmitter: Vec3::ZERO,
            receivers: vec![
                Receiver::new(1, Vec3::new(0.0, 5.0, 0.0), 1.0),
                Receiver::new(2, Vec3::new(0.0, 0.0, 10.0), 1.0),
            ],
            medium: Medium::still(100.0),
            molecule_budget: 10_000,
        };
        assert_eq!(true_distance(&s, 0).unwrap(), 5.0);
        assert_eq!(true_distance(&s, 1).unwrap(), 10.0);
        assert_eq!(true_distance(&s, 2), Err(Error::IndexOutOfRange { index: 2, len: 2 }));
        s.transmitter = s.receivers[0].center;
        assert_eq!(true_distance(&s, 0).unwrap(), 0.0);
    }

    #[test]
    fn validation_is_idempotent() {
        let v = validate_scenario(fig6_scenario(Vec3::new(1.0, 2.0, 0.0))).unwrap();
        let again = validate_scenario(v.scenario().clone()).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn sampling_plan_rules() {
        assert!(SamplingPlan::new(0.0, 10).is_err());
        assert!(SamplingPlan::new(0.1, 1).is_err());
        let p = SamplingPlan::new(0.5, 4).unwrap();
        assert_eq!(p.sample_times(), vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(p.horizon(), 2.0);
    }

    #[test]
    fn layouts_are_valid() {
        for rx in [
            tetrahedral_receivers(5.0, 4.0),
            cube_receivers(10.0, 1.0),
            octant_sphere_receivers(Vec3::ZERO, 10.0, 1.0),
        ] {
            let s = Scenario {
                transmitter: Vec3::ZERO,
                receivers: rx,
                medium: Medium::still(100.0),
                molecule_budget: 1,
            };
            validate_scenario(s).unwrap();
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point() -> impl Strategy<Value = Vec3> {
            (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
        }

        fn single(tx: Vec3, c: Vec3) -> Scenario {
            Scenario {
                transmitter: tx,
                receivers: vec![Receiver::new(0, c, 0.5)],
                medium: Medium::still(1.0),
                molecule_budget: 1,
            }
        }

        proptest! {
            #[test]
            fn distance_symmetric(a in point(), b in point()) {
                let d1 = true_distance(&single(a, b), 0).unwrap();
                let d2 = true_distance(&single(b, a), 0).unwrap();
                prop_assert_eq!(d1, d2);
            }

            #[test]
            fn triangle_inequality(a in point(), b in point(), c in point()) {
                let ab = a.distance(b);
                let bc = b.distance(c);
                let ac = a.distance(c);
                prop_assert!(ac <= ab + bc + 1e-9);
            }
        }
    }
}
