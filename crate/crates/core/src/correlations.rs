//! Two-observer singlet experiment.
//!
//! Observer 1 performs the joint measurement of `a` and `a'`; observer 2
//! measures spin sharply along `b` or `b'`. Correlations of joint-measurement
//! outcomes obey `|E(A_J,B) + E(A'_J,B)| + |E(A_J,B') - E(A'_J,B')| <= 2`,
//! while sharp measurements reach up to `2 sqrt 2`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::joint::{general_joint_povm, outcome_value, JointSpec};
use crate::povm::{projective_povm, two_party_probabilities, Povm, ProbabilityTable};
use crate::qubit::{pauli_dot, TwoQubitState, UnitVector3};
use crate::scalar::Real;

/// Observer 2's two measurement directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct Settings<T> {
    pub b: UnitVector3<T>,
    pub b_prime: UnitVector3<T>,
}

/// `E(A_J,B), E(A'_J,B), E(A_J,B'), E(A'_J,B')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet<T> {
    pub e_ab: T,
    pub e_apb: T,
    pub e_abp: T,
    pub e_apbp: T,
}

impl<T: Real> CorrelationSet<T> {
    pub fn zero() -> Self {
        Self {
            e_ab: T::zero(),
            e_apb: T::zero(),
            e_abp: T::zero(),
            e_apbp: T::zero(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self.e_ab - other.e_ab)
            .abs()
            .max((self.e_apb - other.e_apb).abs())
            .max((self.e_abp - other.e_abp).abs())
            .max((self.e_apbp - other.e_apbp).abs())
    }
}

pub fn singlet<T: Real>() -> TwoQubitState<T> {
    TwoQubitState::singlet()
}

/// Singlet correlation of sharp spin measurements, `-a.b`.
pub fn sharp_correlation<T: Real>(a: &UnitVector3<T>, b: &UnitVector3<T>) -> T {
    -a.dot(b)
}

/// `<psi-| a.sigma_1 b.sigma_2 |psi->` evaluated as a 4x4 trace.
pub fn sharp_correlation_trace<T: Real>(a: &UnitVector3<T>, b: &UnitVector3<T>) -> T {
    singlet::<T>().expectation(&pauli_dot(a), &pauli_dot(b))
}

/// Closed-form correlations for sharp measurements of `a`, `a'` on qubit 1.
pub fn sharp_correlations<T: Real>(
    a: &UnitVector3<T>,
    a_prime: &UnitVector3<T>,
    settings: &Settings<T>,
) -> CorrelationSet<T> {
    CorrelationSet {
        e_ab: sharp_correlation(a, &settings.b),
        e_apb: sharp_correlation(a_prime, &settings.b),
        e_abp: sharp_correlation(a, &settings.b_prime),
        e_apbp: sharp_correlation(a_prime, &settings.b_prime),
    }
}

/// Closed form `E(A_J,B) = -alpha a.b` and its three siblings.
pub fn joint_correlations<T: Real>(
    spec: &JointSpec<T>,
    settings: &Settings<T>,
) -> Result<CorrelationSet<T>> {
    // admissibility is decided by the same positivity test the POVM uses
    general_joint_povm(spec)?;
    let (a, ap) = (spec.a(), spec.a_prime());
    Ok(CorrelationSet {
        e_ab: spec.alpha() * sharp_correlation(&a, &settings.b),
        e_apb: spec.alpha_prime() * sharp_correlation(&ap, &settings.b),
        e_abp: spec.alpha() * sharp_correlation(&a, &settings.b_prime),
        e_apbp: spec.alpha_prime() * sharp_correlation(&ap, &settings.b_prime),
    })
}

/// `sum_ij A(i) B(j) p_ij` where `A(i)` is read from character `slot` of the row label.
pub fn correlation_from_table<T: Real>(table: &ProbabilityTable<T>, slot: usize) -> T {
    let mut acc = T::zero();
    for (i, row) in table.row_labels.iter().enumerate() {
        let Some(x) = outcome_value(row, slot) else {
            continue;
        };
        for (j, col) in table.col_labels.iter().enumerate() {
            let Some(y) = outcome_value(col, 0) else {
                continue;
            };
            acc = acc + T::lit(f64::from(x * y)) * table.p[i][j];
        }
    }
    acc
}

/// Two-party Born tables for observer 1's joint POVM against `b` and `b'`.
pub fn joint_tables<T: Real>(
    spec: &JointSpec<T>,
    settings: &Settings<T>,
) -> Result<(ProbabilityTable<T>, ProbabilityTable<T>)> {
    let povm = general_joint_povm(spec)?;
    let state = singlet();
    Ok((
        two_party_probabilities(&povm, &projective_povm(&settings.b), &state)?,
        two_party_probabilities(&povm, &projective_povm(&settings.b_prime), &state)?,
    ))
}

/// The same correlations as [`joint_correlations`], obtained from the Born rule
/// on the singlet with the four-outcome labels decoded.
pub fn born_joint_correlations<T: Real>(
    spec: &JointSpec<T>,
    settings: &Settings<T>,
) -> Result<CorrelationSet<T>> {
    let (tb, tbp) = joint_tables(spec, settings)?;
    Ok(CorrelationSet {
        e_ab: correlation_from_table(&tb, 0),
        e_apb: correlation_from_table(&tb, 1),
        e_abp: correlation_from_table(&tbp, 0),
        e_apbp: correlation_from_table(&tbp, 1),
    })
}

/// Born-rule correlations for sharp measurements of `a` and `a'`.
pub fn born_sharp_correlations<T: Real>(
    a: &UnitVector3<T>,
    a_prime: &UnitVector3<T>,
    settings: &Settings<T>,
) -> Result<CorrelationSet<T>> {
    let state = singlet();
    let e = |x: &Povm<T>, y: &UnitVector3<T>| -> Result<T> {
        Ok(correlation_from_table(
            &two_party_probabilities(x, &projective_povm(y), &state)?,
            0,
        ))
    };
    let (pa, pap) = (projective_povm(a), projective_povm(a_prime));
    Ok(CorrelationSet {
        e_ab: e(&pa, &settings.b)?,
        e_apb: e(&pap, &settings.b)?,
        e_abp: e(&pa, &settings.b_prime)?,
        e_apbp: e(&pap, &settings.b_prime)?,
    })
}

/// `|E(A_J,B) + E(A'_J,B)| + |E(A_J,B') - E(A'_J,B')|`.
pub fn chsh_value<T: Real>(corr: &CorrelationSet<T>) -> T {
    (corr.e_ab + corr.e_apb).abs() + (corr.e_abp - corr.e_apbp).abs()
}

/// `b` along `alpha a + alpha' a'`, `b'` along `alpha a - alpha' a'`.
pub fn optimal_settings<T: Real>(spec: &JointSpec<T>) -> Result<Settings<T>> {
    Ok(Settings {
        b: UnitVector3::normalize_named(spec.sum_vector(), "alpha a + alpha' a'")?,
        b_prime: UnitVector3::normalize_named(spec.difference_vector(), "alpha a - alpha' a'")?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CirelsonCheck<T> {
    pub chsh: T,
    pub bound: T,
    pub holds: bool,
}

/// Compares a CHSH value with the quantum maximum `2 sqrt 2`.
pub fn cirelson_check<T: Real>(corr: &CorrelationSet<T>) -> CirelsonCheck<T> {
    let chsh = chsh_value(corr);
    let bound = T::lit(2.0) * T::SQRT_2();
    CirelsonCheck {
        chsh,
        bound,
        holds: chsh <= bound + T::ADMISSIBILITY_TOL,
    }
}

/// Directions reaching `2 sqrt 2` with sharp measurements:
/// `a = z`, `a' = x`, `b = (z+x)/sqrt 2`, `b' = (z-x)/sqrt 2`.
pub fn tsirelson_configuration<T: Real>() -> (UnitVector3<T>, UnitVector3<T>, Settings<T>) {
    let (z, x) = (UnitVector3::z(), UnitVector3::x());
    let settings = Settings {
        b: UnitVector3::normalize(z.get() + x.get()).expect("nonzero"),
        b_prime: UnitVector3::normalize(z.get() - x.get()).expect("nonzero"),
    };
    (z, x, settings)
}

/// Probability that observer 1 records `A_J = A'_J`, computed from the full
/// two-party distribution once with observer 2 measuring `b` and once `b'`.
pub fn no_signalling_probe<T: Real>(spec: &JointSpec<T>, settings: &Settings<T>) -> Result<(T, T)> {
    let (tb, tbp) = joint_tables(spec, settings)?;
    let same = |t: &ProbabilityTable<T>| {
        let mut acc = T::zero();
        for (i, label) in t.row_labels.iter().enumerate() {
            if outcome_value(label, 0) == outcome_value(label, 1) {
                acc = t.p[i].iter().fold(acc, |a, &b| a + b);
            }
        }
        acc
    };
    Ok((same(&tb), same(&tbp)))
}

/// Triple probabilities feeding the CHSH-type derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaturationDiagnostics<T> {
    /// `p(A_J = A'_J = B)`
    pub equal_eq_b: T,
    /// `p(A_J = A'_J = -B)`
    pub equal_eq_minus_b: T,
    /// `p(A_J = -A'_J = B')`
    pub opposite_eq_bp: T,
    /// `p(A_J = -A'_J = -B')`
    pub opposite_eq_minus_bp: T,
}

impl<T: Real> SaturationDiagnostics<T> {
    /// The inequality chain is tight iff one member of each pair vanishes.
    pub fn is_tight(&self, tol: T) -> bool {
        let one_zero = |x: T, y: T| (x.abs() <= tol) != (y.abs() <= tol);
        one_zero(self.equal_eq_b, self.equal_eq_minus_b)
            && one_zero(self.opposite_eq_bp, self.opposite_eq_minus_bp)
    }
}

pub fn saturation_diagnostics<T: Real>(
    spec: &JointSpec<T>,
    settings: &Settings<T>,
) -> Result<SaturationDiagnostics<T>> {
    let (tb, tbp) = joint_tables(spec, settings)?;
    // sums p(i, j) over rows where A_J == sign * A'_J and B == relation * A_J
    let tally = |t: &ProbabilityTable<T>, sign: i8, relation: i8| {
        let mut acc = T::zero();
        for (i, row) in t.row_labels.iter().enumerate() {
            let (Some(x), Some(xp)) = (outcome_value(row, 0), outcome_value(row, 1)) else {
                continue;
            };
            if x != sign * xp {
                continue;
            }
            for (j, col) in t.col_labels.iter().enumerate() {
                if outcome_value(col, 0) == Some(relation * x) {
                    acc = acc + t.p[i][j];
                }
            }
        }
        acc
    };
    Ok(SaturationDiagnostics {
        equal_eq_b: tally(&tb, 1, 1),
        equal_eq_minus_b: tally(&tb, 1, -1),
        opposite_eq_bp: tally(&tbp, -1, 1),
        opposite_eq_minus_bp: tally(&tbp, -1, -1),
    })
}
