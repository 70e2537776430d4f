//! Applied studies: joint measurement through universal cloning, and an
//! eavesdropper on BB84 who measures both bases at once.
//!
//! BB84 bases differ by 45 degrees in polarization, which is 90 degrees on the
//! Bloch sphere, so the physically faithful angle is [`BB84_BLOCH_ANGLE`].

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::joint::{max_symmetric_alpha, optimal_joint_povm, outcome_value, JointSpec};
use crate::povm::outcome_probabilities;
use crate::qubit::{QubitState, UnitVector3};
use crate::sampler::{cumulative, pick, run_chunked, SampleMetadata, SeededStream};
use crate::scalar::Real;

/// Bloch-sphere angle between the two BB84 bases.
pub const BB84_BLOCH_ANGLE: f64 = std::f64::consts::FRAC_PI_2;

/// Shrink factor of the optimal universal qubit cloner.
pub const OPTIMAL_CLONER_ETA: f64 = 2.0 / 3.0;

/// Joint measurement obtained by cloning and measuring each clone sharply,
/// against the best symmetric joint measurement at the same angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloningScenario<T> {
    pub eta: T,
    pub theta: T,
    pub alpha_clone: T,
    pub alpha_optimal: T,
    /// `alpha_optimal - alpha_clone`
    pub gap: T,
}

pub fn cloning_joint<T: Real>(theta: T, eta: T) -> Result<CloningScenario<T>> {
    if !eta.is_finite() || !theta.is_finite() {
        return Err(Error::NonFinite);
    }
    if eta <= T::zero() || eta > T::lit(OPTIMAL_CLONER_ETA) + T::EXACT_TOL {
        return Err(Error::EtaOutOfRange {
            eta: eta.to_f64_lossy(),
        });
    }
    let alpha_optimal = max_symmetric_alpha(theta);
    Ok(CloningScenario {
        eta,
        theta,
        alpha_clone: eta,
        alpha_optimal,
        gap: alpha_optimal - eta,
    })
}

/// `points` angles evenly spaced over `[0, pi]`, both ends included.
pub fn theta_grid<T: Real>(points: usize) -> Vec<T> {
    let last = T::lit((points.max(2) - 1) as f64);
    (0..points)
        .map(|i| T::PI() * T::lit(i as f64) / last)
        .collect()
}

/// Scenario with the smallest gap over a `points`-angle grid.
pub fn min_cloning_gap<T: Real>(eta: T, points: usize) -> Result<CloningScenario<T>> {
    let mut best: Option<CloningScenario<T>> = None;
    for theta in theta_grid(points) {
        let s = cloning_joint(theta, eta)?;
        if best.is_none_or(|b| s.gap < b.gap) {
            best = Some(s);
        }
    }
    best.ok_or(Error::EmptySample)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bb84EveReport<T> {
    pub theta: T,
    pub alpha: T,
    /// `(1 + alpha) / 2`, the chance of reading the bit once the basis is announced.
    pub guess_success_prob_after_announcement: T,
    pub empirical_success: T,
    pub trials: u64,
    pub successes: u64,
    pub stderr: T,
    pub metadata: SampleMetadata,
}

impl<T: Real> Bb84EveReport<T> {
    /// Deviation of the empirical rate from the analytic one in units of the
    /// analytic binomial standard deviation; zero when that deviation is zero
    /// and the rates agree.
    pub fn z_score(&self) -> T {
        let p = self.guess_success_prob_after_announcement;
        let sigma = (p * (T::one() - p) / T::lit(self.trials as f64)).sqrt();
        let diff = self.empirical_success - p;
        if sigma > T::zero() {
            diff / sigma
        } else if diff.abs() <= T::EXACT_TOL {
            T::zero()
        } else {
            T::infinity()
        }
    }
}

/// Eve measures the optimal symmetric joint POVM for bases `z` and the
/// `xz`-plane direction at `theta` on `4 n` random BB84 states, then keeps the
/// outcome slot of the announced basis.
///
/// Each trial consumes two uniforms: one picks basis and bit, one the outcome.
pub fn bb84_eve<T: Real>(theta: T, n: u64, stream: &SeededStream) -> Result<Bb84EveReport<T>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let bases = [UnitVector3::<T>::z(), UnitVector3::polar_xz(theta)];
    let spec = JointSpec::optimal_symmetric(bases[0], bases[1]);
    let povm = optimal_joint_povm(&spec)?;
    let labels = povm.labels();

    // index 2 * basis + bit, bit 0 meaning spin +1 along the basis
    let mut cdfs = Vec::with_capacity(4);
    for basis in &bases {
        for dir in [*basis, basis.negate()] {
            let probs: Vec<T> = outcome_probabilities(&povm, &QubitState::spin_up(&dir))?
                .into_iter()
                .map(|o| o.probability)
                .collect();
            cdfs.push(cumulative(&probs));
        }
    }
    let reads: Vec<[i8; 2]> = labels
        .iter()
        .map(|l| {
            [
                outcome_value(l, 0).unwrap_or(0),
                outcome_value(l, 1).unwrap_or(0),
            ]
        })
        .collect();

    let trials = 4 * n;
    let successes = run_chunked(
        stream,
        trials,
        2,
        || 0u64,
        |acc, rng| {
            let case = ((rng.random::<f64>() * 4.0) as usize).min(3);
            let outcome = pick(&cdfs[case], rng.random::<f64>());
            let (basis, bit) = (case / 2, case % 2);
            let sent = if bit == 0 { 1 } else { -1 };
            if reads[outcome][basis] == sent {
                *acc += 1;
            }
        },
        |a, b| a + b,
    );
    let rate = successes as f64 / trials as f64;
    let alpha = spec.alpha();
    Ok(Bb84EveReport {
        theta,
        alpha,
        guess_success_prob_after_announcement: (T::one() + alpha) / T::lit(2.0),
        empirical_success: T::lit(rate),
        trials,
        successes,
        stderr: T::lit((rate * (1.0 - rate) / trials as f64).sqrt()),
        metadata: SampleMetadata::new(stream, trials),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn cloning_examples() {
        let s = cloning_joint(FRAC_PI_2, 2.0f64 / 3.0).unwrap();
        assert!((s.alpha_optimal - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s.gap - (FRAC_1_SQRT_2 - 2.0 / 3.0)).abs() < 1e-12);
        assert!((s.gap - 0.040440114519).abs() < 1e-11);
        let s = cloning_joint(0.0f64, 2.0 / 3.0).unwrap();
        assert!((s.gap - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            cloning_joint(1.0f64, 0.7),
            Err(Error::EtaOutOfRange { .. })
        ));
        assert!(matches!(
            cloning_joint(1.0f64, 0.0),
            Err(Error::EtaOutOfRange { .. })
        ));
    }

    #[test]
    fn cloning_gap_positive_everywhere() {
        let grid = theta_grid::<f64>(181);
        assert_eq!(grid.len(), 181);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[180], std::f64::consts::PI);
        assert!((grid[90] - FRAC_PI_2).abs() < 1e-15);
        let worst = min_cloning_gap(2.0f64 / 3.0, 181).unwrap();
        assert!(worst.gap > 0.0);
        assert!((worst.theta - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn bb84_success_rates() {
        for (theta, expected) in [
            (BB84_BLOCH_ANGLE, 0.853553390593),
            (FRAC_PI_4, 0.882683432365),
        ] {
            let r = bb84_eve::<f64>(theta, 100_000, &SeededStream::new(7, 0)).unwrap();
            assert!((r.guess_success_prob_after_announcement - expected).abs() < 1e-11);
            assert!(r.z_score().abs() < 5.0, "theta {theta}: z {}", r.z_score());
            assert!(r.empirical_success < 1.0);
            assert_eq!(r.trials, 400_000);
        }
    }

    #[test]
    fn bb84_single_basis_limit_is_perfect() {
        let r = bb84_eve(0.0f64, 10_000, &SeededStream::new(1, 0)).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.successes, r.trials);
        assert_eq!(r.z_score(), 0.0);
    }

    #[test]
    fn bb84_is_reproducible() {
        let s = SeededStream::new(99, 3);
        assert_eq!(
            bb84_eve(1.0f64, 50_000, &s).unwrap(),
            bb84_eve(1.0f64, 50_000, &s).unwrap()
        );
    }
}
