//! Uncertainty relations for the two jointly measured spin components, evaluated
//! exactly from Bloch data.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::joint::{general_min_eigenvalue, is_admissible, joint_variances, JointSpec};
use crate::qubit::{pauli_dot, QubitState, UnitVector3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationId {
    ProductForm,
    Robertson,
    TotalJoint,
    ArthursGoodman,
    Schroedinger,
    CirelsonProduct,
}

impl RelationId {
    pub const ALL: [RelationId; 6] = [
        RelationId::ProductForm,
        RelationId::Robertson,
        RelationId::TotalJoint,
        RelationId::ArthursGoodman,
        RelationId::Schroedinger,
        RelationId::CirelsonProduct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationId::ProductForm => "product_form",
            RelationId::Robertson => "robertson",
            RelationId::TotalJoint => "total_joint",
            RelationId::ArthursGoodman => "arthurs_goodman",
            RelationId::Schroedinger => "schroedinger",
            RelationId::CirelsonProduct => "cirelson_product",
        }
    }
}

impl std::fmt::Display for RelationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `lhs >= rhs` evaluated for one relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct UncertaintyReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub slack: T,
    pub relation_id: RelationId,
    /// Unit normal `a x a' / |a x a'|`; absent when the directions are collinear.
    pub a_perp: Option<UnitVector3<T>>,
}

impl<T: Real> UncertaintyReport<T> {
    fn new(relation_id: RelationId, lhs: T, rhs: T, a_perp: Option<UnitVector3<T>>) -> Self {
        Self {
            lhs,
            rhs,
            slack: lhs - rhs,
            relation_id,
            a_perp,
        }
    }

    pub fn holds(&self) -> bool {
        self.slack >= -T::VALIDATION_TOL
    }
}

/// `a x a' / |a x a'|`, or `None` when `|a x a'|` is below the exact tolerance.
pub fn a_perp<T: Real>(a: &UnitVector3<T>, a_prime: &UnitVector3<T>) -> Option<UnitVector3<T>> {
    let n = a.cross(a_prime);
    if n.norm() <= T::EXACT_TOL {
        return None;
    }
    UnitVector3::normalize(n).ok()
}

fn require_perp<T: Real>(a: &UnitVector3<T>, a_prime: &UnitVector3<T>) -> Result<UnitVector3<T>> {
    a_perp(a, a_prime).ok_or(Error::CollinearDirections)
}

fn alpha_sq_product<T: Real>(spec: &JointSpec<T>) -> Result<T> {
    let p = spec.alpha() * spec.alpha() * spec.alpha_prime() * spec.alpha_prime();
    if p == T::zero() {
        return Err(Error::ZeroAlpha);
    }
    Ok(p)
}

fn sin_sq<T: Real>(spec: &JointSpec<T>) -> T {
    let s = spec.sin_theta();
    s * s
}

/// `(1 - alpha^2)(1 - alpha'^2) / (alpha^2 alpha'^2) >= sin^2 theta`.
pub fn product_form<T: Real>(spec: &JointSpec<T>) -> Result<UncertaintyReport<T>> {
    let den = alpha_sq_product(spec)?;
    let one = T::one();
    let (a2, ap2) = (
        spec.alpha() * spec.alpha(),
        spec.alpha_prime() * spec.alpha_prime(),
    );
    let lhs = (one - a2) * (one - ap2) / den;
    Ok(UncertaintyReport::new(
        RelationId::ProductForm,
        lhs,
        sin_sq(spec),
        a_perp(&spec.a(), &spec.a_prime()),
    ))
}

/// Bare variance product against the commutator term:
/// `(1 - <A>^2)(1 - <A'>^2) >= sin^2 theta <a_perp.sigma>^2`.
pub fn robertson<T: Real>(
    state: &QubitState<T>,
    a: &UnitVector3<T>,
    a_prime: &UnitVector3<T>,
) -> Result<UncertaintyReport<T>> {
    let perp = require_perp(a, a_prime)?;
    let one = T::one();
    let (ea, eap) = (state.spin_expectation(a), state.spin_expectation(a_prime));
    let x = state.spin_expectation(&perp);
    let s = a.cross(a_prime).norm();
    Ok(UncertaintyReport::new(
        RelationId::Robertson,
        (one - ea * ea) * (one - eap * eap),
        s * s * x * x,
        Some(perp),
    ))
}

struct JointTerms<T> {
    lhs: T,
    sin_sq: T,
    x: T,
    perp: UnitVector3<T>,
}

fn joint_terms<T: Real>(spec: &JointSpec<T>, state: &QubitState<T>) -> Result<JointTerms<T>> {
    if !is_admissible(spec) {
        return Err(Error::BoundViolated {
            min_eigenvalue: general_min_eigenvalue(spec).to_f64_lossy(),
        });
    }
    let den = alpha_sq_product(spec)?;
    let perp = require_perp(&spec.a(), &spec.a_prime())?;
    let v = joint_variances(spec, state);
    Ok(JointTerms {
        lhs: v.var_joint * v.var_joint_prime / den,
        sin_sq: sin_sq(spec),
        x: state.spin_expectation(&perp),
        perp,
    })
}

/// `Var(A_J) Var(A'_J) / (alpha^2 alpha'^2) >= sin^2 theta (1 + |<a_perp.sigma>|)^2`.
pub fn total_joint<T: Real>(
    spec: &JointSpec<T>,
    state: &QubitState<T>,
) -> Result<UncertaintyReport<T>> {
    let t = joint_terms(spec, state)?;
    let f = T::one() + t.x.abs();
    Ok(UncertaintyReport::new(
        RelationId::TotalJoint,
        t.lhs,
        t.sin_sq * f * f,
        Some(t.perp),
    ))
}

/// Same left side as [`total_joint`] against `|<[A, A']>|^2 = 4 sin^2 theta <a_perp.sigma>^2`.
pub fn arthurs_goodman<T: Real>(
    spec: &JointSpec<T>,
    state: &QubitState<T>,
) -> Result<UncertaintyReport<T>> {
    let t = joint_terms(spec, state)?;
    let rhs = T::lit(4.0) * t.sin_sq * t.x * t.x;
    Ok(UncertaintyReport::new(
        RelationId::ArthursGoodman,
        t.lhs,
        rhs,
        Some(t.perp),
    ))
}

/// Per-state comparison of the two lower bounds on the joint variance product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundComparison<T> {
    pub total_joint_rhs: T,
    pub arthurs_goodman_rhs: T,
    /// `<a_perp.sigma>` for the state.
    pub x: T,
    /// `(1 + |x|)^2 >= 4 x^2`, which holds exactly when `|x| <= 1`.
    pub total_joint_at_least_as_strong: bool,
}

pub fn compare_joint_bounds<T: Real>(
    spec: &JointSpec<T>,
    state: &QubitState<T>,
) -> Result<BoundComparison<T>> {
    let tj = total_joint(spec, state)?;
    let ag = arthurs_goodman(spec, state)?;
    let x = state.spin_expectation(&tj.a_perp.expect("total_joint always sets a_perp"));
    Ok(BoundComparison {
        total_joint_rhs: tj.rhs,
        arthurs_goodman_rhs: ag.rhs,
        x,
        total_joint_at_least_as_strong: tj.rhs >= ag.rhs - T::EXACT_TOL,
    })
}

/// Bare variance product against the commutator plus covariance terms,
/// both computed from operator products on the density matrix.
pub fn schroedinger<T: Real>(
    state: &QubitState<T>,
    a: &UnitVector3<T>,
    a_prime: &UnitVector3<T>,
) -> Result<UncertaintyReport<T>> {
    let perp = require_perp(a, a_prime)?;
    let (sa, sap) = (pauli_dot(a), pauli_dot(a_prime));
    let rho = *state.matrix();
    let commutator = (rho * (sa * sap - sap * sa)).trace().norm();
    let anticommutator = (rho * (sa * sap + sap * sa)).trace().re;
    let one = T::one();
    let quarter = T::lit(0.25);
    let (ea, eap) = (state.spin_expectation(a), state.spin_expectation(a_prime));
    let cov = anticommutator - T::lit(2.0) * ea * eap;
    Ok(UncertaintyReport::new(
        RelationId::Schroedinger,
        (one - ea * ea) * (one - eap * eap),
        quarter * commutator * commutator + quarter * cov * cov,
        Some(perp),
    ))
}

/// `(2 - alpha^2)(2 - alpha'^2) / (alpha^2 alpha'^2) >= sin^2 theta`; holds even for `alpha = alpha' = 1`.
pub fn cirelson_product<T: Real>(spec: &JointSpec<T>) -> Result<UncertaintyReport<T>> {
    let den = alpha_sq_product(spec)?;
    let two = T::lit(2.0);
    let lhs =
        (two - spec.alpha() * spec.alpha()) * (two - spec.alpha_prime() * spec.alpha_prime()) / den;
    Ok(UncertaintyReport::new(
        RelationId::CirelsonProduct,
        lhs,
        sin_sq(spec),
        a_perp(&spec.a(), &spec.a_prime()),
    ))
}

/// All six relations for one spec and state, in [`RelationId::ALL`] order.
pub fn all_relations<T: Real>(
    spec: &JointSpec<T>,
    state: &QubitState<T>,
) -> Result<Vec<UncertaintyReport<T>>> {
    Ok(vec![
        product_form(spec)?,
        robertson(state, &spec.a(), &spec.a_prime())?,
        total_joint(spec, state)?,
        arthurs_goodman(spec, state)?,
        schroedinger(state, &spec.a(), &spec.a_prime())?,
        cirelson_product(spec)?,
    ])
}
