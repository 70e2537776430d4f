//! Joint (unsharp) measurement of two spin components `a.sigma` and `a'.sigma`.
//!
//! A joint measurement returns a `+-1` value for each direction. Its averages
//! track the sharp expectations up to sharpness factors `alpha`, `alpha'`, and
//! such a measurement exists exactly when
//!
//! ```text
//! |alpha a + alpha' a'| + |alpha a - alpha' a'| <= 2
//! ```
//!
//! The module provides the three equivalent admissibility tests, the optimal
//! four-outcome POVM at equality, the general non-optimal family, the
//! probabilistic-switch realization, and the joint variances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::{projective_povm, Effect, Povm};
use crate::qubit::{
    half_identity_plus, hermitian_eigenvalues_tol, ComplexMatrix2, QubitState, UnitVector3, Vector3,
};
use crate::scalar::Real;

/// Outcome labels of the four-outcome joint measurement; the first character is `A_J`.
pub const JOINT_LABELS: [&str; 4] = ["++", "--", "+-", "-+"];

/// Parameters `(a, a', alpha, alpha')` of a joint measurement.
///
/// `theta` is always derived from `a.a'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec<T>", into = "RawSpec<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct JointSpec<T> {
    a: UnitVector3<T>,
    a_prime: UnitVector3<T>,
    alpha: T,
    alpha_prime: T,
    theta: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
struct RawSpec<T> {
    a: UnitVector3<T>,
    a_prime: UnitVector3<T>,
    alpha: T,
    alpha_prime: T,
}

impl<T: Real> TryFrom<RawSpec<T>> for JointSpec<T> {
    type Error = Error;
    fn try_from(raw: RawSpec<T>) -> Result<Self> {
        JointSpec::new(raw.a, raw.a_prime, raw.alpha, raw.alpha_prime)
    }
}

impl<T: Real> From<JointSpec<T>> for RawSpec<T> {
    fn from(s: JointSpec<T>) -> Self {
        RawSpec {
            a: s.a,
            a_prime: s.a_prime,
            alpha: s.alpha,
            alpha_prime: s.alpha_prime,
        }
    }
}

fn check_alpha<T: Real>(value: T) -> Result<T> {
    if !value.is_finite() {
        return Err(Error::NonFinite);
    }
    if value.abs() > T::one() + T::EXACT_TOL {
        return Err(Error::AlphaOutOfRange {
            value: value.to_f64_lossy(),
        });
    }
    Ok(value)
}

/// Angle between two unit vectors in `[0, pi]`, stable at both ends.
pub fn angle_between<T: Real>(a: &Vector3<T>, b: &Vector3<T>) -> T {
    a.cross(b).norm().atan2(a.dot(b))
}

impl<T: Real> JointSpec<T> {
    /// Negative sharpness factors are accepted; only `|alpha|` enters the bound.
    pub fn new(
        a: UnitVector3<T>,
        a_prime: UnitVector3<T>,
        alpha: T,
        alpha_prime: T,
    ) -> Result<Self> {
        let alpha = check_alpha(alpha)?;
        let alpha_prime = check_alpha(alpha_prime)?;
        let theta = angle_between(&a, &a_prime);
        Ok(Self {
            a,
            a_prime,
            alpha,
            alpha_prime,
            theta,
        })
    }

    /// Like [`JointSpec::new`] but also checks a caller-supplied angle against `a.a'`.
    pub fn with_theta(
        a: UnitVector3<T>,
        a_prime: UnitVector3<T>,
        alpha: T,
        alpha_prime: T,
        theta: T,
    ) -> Result<Self> {
        let spec = Self::new(a, a_prime, alpha, alpha_prime)?;
        let in_range = theta >= T::zero() && theta <= T::PI();
        if !in_range || (theta.cos() - spec.cos_theta()).abs() > T::EXACT_TOL {
            return Err(Error::InconsistentTheta {
                given: theta.to_f64_lossy(),
                derived: spec.theta.to_f64_lossy(),
            });
        }
        Ok(spec)
    }

    /// `alpha = alpha' = 1/sqrt(1 + |sin theta|)`, the sharpest symmetric joint measurement.
    pub fn optimal_symmetric(a: UnitVector3<T>, a_prime: UnitVector3<T>) -> Self {
        let alpha = max_symmetric_alpha(angle_between(&a, &a_prime));
        Self::new(a, a_prime, alpha, alpha).expect("symmetric optimum lies in [0, 1]")
    }

    pub fn a(&self) -> UnitVector3<T> {
        self.a
    }

    pub fn a_prime(&self) -> UnitVector3<T> {
        self.a_prime
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn alpha_prime(&self) -> T {
        self.alpha_prime
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn cos_theta(&self) -> T {
        self.a.dot(&self.a_prime)
    }

    pub fn sin_theta(&self) -> T {
        self.a.cross(&self.a_prime).norm()
    }

    /// `alpha a + alpha' a'`, one diagonal of the parallelogram.
    pub fn sum_vector(&self) -> Vector3<T> {
        self.a.scale(self.alpha) + self.a_prime.scale(self.alpha_prime)
    }

    /// `alpha a - alpha' a'`, the other diagonal.
    pub fn difference_vector(&self) -> Vector3<T> {
        self.a.scale(self.alpha) - self.a_prime.scale(self.alpha_prime)
    }
}

/// Sum of the parallelogram diagonals, `|alpha a + alpha' a'| + |alpha a - alpha' a'|`.
pub fn bound_lhs<T: Real>(spec: &JointSpec<T>) -> T {
    spec.sum_vector().norm() + spec.difference_vector().norm()
}

/// `alpha^2 + alpha'^2 - alpha^2 alpha'^2 cos^2 theta`; at most 1 exactly when the bound holds.
pub fn product_form_check<T: Real>(spec: &JointSpec<T>) -> T {
    let a2 = spec.alpha * spec.alpha;
    let b2 = spec.alpha_prime * spec.alpha_prime;
    let c = spec.cos_theta();
    a2 + b2 - a2 * b2 * c * c
}

/// Smallest eigenvalue over the four effects of the general family.
pub fn general_min_eigenvalue<T: Real>(spec: &JointSpec<T>) -> T {
    general_joint_effects(spec)
        .iter()
        .map(|e| {
            hermitian_eigenvalues_tol(&e.op, T::infinity())
                .map(|(lo, _)| lo)
                .unwrap_or(T::nan())
        })
        .fold(T::infinity(), T::min)
}

/// Verdicts of the three equivalent admissibility tests, sharing one tolerance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    pub by_diagonals: bool,
    pub by_product_form: bool,
    pub by_positivity: bool,
}

impl Admissibility {
    pub fn agree(&self) -> bool {
        self.by_diagonals == self.by_product_form && self.by_product_form == self.by_positivity
    }
}

pub fn admissibility<T: Real>(spec: &JointSpec<T>) -> Admissibility {
    let tol = T::ADMISSIBILITY_TOL;
    Admissibility {
        by_diagonals: bound_lhs(spec) <= T::lit(2.0) + tol,
        by_product_form: product_form_check(spec) <= T::one() + tol,
        by_positivity: general_min_eigenvalue(spec) >= -tol,
    }
}

pub fn is_admissible<T: Real>(spec: &JointSpec<T>) -> bool {
    bound_lhs(spec) <= T::lit(2.0) + T::ADMISSIBILITY_TOL
}

pub fn is_saturating<T: Real>(spec: &JointSpec<T>) -> bool {
    (bound_lhs(spec) - T::lit(2.0)).abs() <= T::ADMISSIBILITY_TOL
}

/// Largest `alpha = alpha'` on the boundary for directions at angle `theta`.
///
/// With `alpha = alpha'` the product form reads `2 alpha^2 - alpha^4 cos^2 = 1`,
/// whose root in `[0, 1]` is `alpha^2 = 1 / (1 + |sin theta|)`.
pub fn max_symmetric_alpha<T: Real>(theta: T) -> T {
    (T::one() + theta.sin().abs()).sqrt().recip()
}

/// `alpha'` that puts `(alpha, alpha')` on the boundary for a given `cos theta`.
///
/// Solves `alpha^2 + alpha'^2 (1 - alpha^2 cos^2) = 1`; returns 1 when any
/// `alpha'` works (`alpha = 1` with parallel directions).
pub fn boundary_alpha_prime<T: Real>(alpha: T, cos_theta: T) -> T {
    let a2 = alpha * alpha;
    let denom = T::one() - a2 * cos_theta * cos_theta;
    if denom <= T::zero() {
        return T::one();
    }
    ((T::one() - a2) / denom)
        .max(T::zero())
        .sqrt()
        .min(T::one())
}

fn four_effects<T: Real>(spec: &JointSpec<T>, w_sum: T, w_diff: T) -> Vec<Effect<T>> {
    let quarter = T::lit(0.5);
    let s = spec.sum_vector();
    let d = spec.difference_vector();
    // half_identity_plus gives (w 1 + v.sigma)/2; halve again for the 1/4 prefactor
    let op = |w: T, v: &Vector3<T>| half_identity_plus(w, v).scale(quarter);
    vec![
        Effect::new(JOINT_LABELS[0], op(w_sum, &s)),
        Effect::new(JOINT_LABELS[1], op(w_sum, &-s)),
        Effect::new(JOINT_LABELS[2], op(w_diff, &d)),
        Effect::new(JOINT_LABELS[3], op(w_diff, &-d)),
    ]
}

/// The optimal joint measurement:
/// `Pi_{++/--} = (|s| 1 +- s.sigma)/4`, `Pi_{+-/-+} = (|d| 1 +- d.sigma)/4`
/// with `s = alpha a + alpha' a'`, `d = alpha a - alpha' a'`.
///
/// Only complete when the bound is saturated.
pub fn optimal_joint_povm<T: Real>(spec: &JointSpec<T>) -> Result<Povm<T>> {
    if !is_saturating(spec) {
        return Err(Error::NotSaturating {
            bound_lhs: bound_lhs(spec).to_f64_lossy(),
        });
    }
    let w_sum = spec.sum_vector().norm();
    let w_diff = spec.difference_vector().norm();
    Ok(Povm::new(four_effects(spec, w_sum, w_diff)))
}

/// Effects of the general family with weights `(1 +- alpha alpha' a.a')/4` on
/// the identity, without any positivity check.
pub fn general_joint_effects<T: Real>(spec: &JointSpec<T>) -> Vec<Effect<T>> {
    let k = spec.alpha * spec.alpha_prime * spec.cos_theta();
    four_effects(spec, T::one() + k, T::one() - k)
}

/// The general (not necessarily optimal) joint measurement. Fails with
/// [`Error::BoundViolated`] when an effect has a negative eigenvalue.
pub fn general_joint_povm<T: Real>(spec: &JointSpec<T>) -> Result<Povm<T>> {
    let min_eigenvalue = general_min_eigenvalue(spec);
    if min_eigenvalue.is_nan() || min_eigenvalue < -T::ADMISSIBILITY_TOL {
        return Err(Error::BoundViolated {
            min_eigenvalue: min_eigenvalue.to_f64_lossy(),
        });
    }
    Ok(Povm::new(general_joint_effects(spec)))
}

/// Marginal effects `(Pi_+, Pi_-)` for one slot of a two-character labelled POVM.
///
/// `slot = 0` reads `A_J`, `slot = 1` reads `A'_J`.
pub fn marginal_effects<T: Real>(
    povm: &Povm<T>,
    slot: usize,
) -> (ComplexMatrix2<T>, ComplexMatrix2<T>) {
    let mut plus = ComplexMatrix2::zero();
    let mut minus = ComplexMatrix2::zero();
    for e in &povm.effects {
        match outcome_value(&e.label, slot) {
            Some(1) => plus = plus + e.op,
            Some(-1) => minus = minus + e.op,
            _ => {}
        }
    }
    (plus, minus)
}

/// `+1` / `-1` for the `slot`-th character of a label, `None` otherwise.
pub fn outcome_value(label: &str, slot: usize) -> Option<i8> {
    match label.as_bytes().get(slot)? {
        b'+' => Some(1),
        b'-' => Some(-1),
        _ => None,
    }
}

/// Constructed averages `(mean A_J, mean A'_J)` of a four-outcome POVM on a state.
pub fn constructed_averages<T: Real>(povm: &Povm<T>, state: &QubitState<T>) -> (T, T) {
    let avg = |slot| {
        povm.effects.iter().fold(T::zero(), |acc, e| {
            let v = outcome_value(&e.label, slot).unwrap_or(0);
            acc + T::lit(v as f64) * (e.op * *state.matrix()).trace().re
        })
    };
    (avg(0), avg(1))
}

/// Joint and bare variances of the two measured spin components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReport<T> {
    /// `1 - alpha^2 <A>^2`
    pub var_joint: T,
    /// `1 - alpha'^2 <A'>^2`
    pub var_joint_prime: T,
    /// `1 - <A>^2`
    pub var_bare: T,
    pub var_bare_prime: T,
}

pub fn joint_variances<T: Real>(spec: &JointSpec<T>, state: &QubitState<T>) -> VarianceReport<T> {
    let ea = state.spin_expectation(&spec.a);
    let eap = state.spin_expectation(&spec.a_prime);
    let one = T::one();
    VarianceReport {
        var_joint: one - spec.alpha * spec.alpha * ea * ea,
        var_joint_prime: one - spec.alpha_prime * spec.alpha_prime * eap * eap,
        var_bare: one - ea * ea,
        var_bare_prime: one - eap * eap,
    }
}

/// Measure `c.sigma` with probability `p`, otherwise `c'.sigma`.
///
/// `C = +1` reads as `A_J = A'_J = +1`, `C' = +1` as `A_J = +1, A'_J = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct SwitchRealization<T> {
    pub p: T,
    pub c: UnitVector3<T>,
    pub c_prime: UnitVector3<T>,
}

impl<T: Real> SwitchRealization<T> {
    /// Mixes the two relabelled projective measurements into a four-outcome POVM.
    pub fn povm(&self) -> Povm<T> {
        let branch = |weight: T, dir: &UnitVector3<T>, plus: &'static str, minus: &'static str| {
            projective_povm(dir)
                .effects
                .into_iter()
                .map(|e| {
                    let label = if e.label == "+" { plus } else { minus };
                    Effect::new(label, e.op.scale(weight))
                })
                .collect::<Vec<_>>()
        };
        let mut effects = branch(self.p, &self.c, JOINT_LABELS[0], JOINT_LABELS[1]);
        effects.extend(branch(
            T::one() - self.p,
            &self.c_prime,
            JOINT_LABELS[2],
            JOINT_LABELS[3],
        ));
        Povm::new(effects)
    }
}

/// `p = |s|/2`, `c = s/|s|`, `c' = d/|d|`. Defined only at saturation.
pub fn switch_realization<T: Real>(spec: &JointSpec<T>) -> Result<SwitchRealization<T>> {
    if !is_saturating(spec) {
        return Err(Error::NotSaturating {
            bound_lhs: bound_lhs(spec).to_f64_lossy(),
        });
    }
    let s = spec.sum_vector();
    let c = UnitVector3::normalize_named(s, "alpha a + alpha' a'")?;
    let c_prime = UnitVector3::normalize_named(spec.difference_vector(), "alpha a - alpha' a'")?;
    Ok(SwitchRealization {
        p: s.norm() * T::lit(0.5),
        c,
        c_prime,
    })
}
