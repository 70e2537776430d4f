//! Generalized measurements (POVMs) on one and two qubits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{
    half_identity_plus, hermitian_eigenvalues_tol, ComplexMatrix2, QubitState, TwoQubitState,
    UnitVector3,
};
use crate::scalar::Real;

/// One labelled outcome operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct Effect<T> {
    pub label: String,
    pub op: ComplexMatrix2<T>,
}

impl<T: Real> Effect<T> {
    pub fn new(label: impl Into<String>, op: ComplexMatrix2<T>) -> Self {
        Self {
            label: label.into(),
            op,
        }
    }
}

/// An ordered list of effects. Construction does not validate; see [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct Povm<T> {
    pub effects: Vec<Effect<T>>,
}

impl<T: Real> Povm<T> {
    pub fn new(effects: Vec<Effect<T>>) -> Self {
        Self { effects }
    }

    /// Builds the POVM and rejects it unless it passes [`validate`] at `tol`.
    pub fn validated(effects: Vec<Effect<T>>, tol: T) -> Result<Self> {
        let povm = Self::new(effects);
        let report = validate_tol(&povm, tol);
        if report.passed {
            Ok(povm)
        } else {
            Err(Error::InvalidPovm(report.describe()))
        }
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.effects.iter().map(|e| e.label.clone()).collect()
    }

    pub fn effect(&self, label: &str) -> Option<&Effect<T>> {
        self.effects.iter().find(|e| e.label == label)
    }

    /// Sum of all effects.
    pub fn total(&self) -> ComplexMatrix2<T> {
        self.effects.iter().map(|e| e.op).sum()
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string(self).expect("POVM serialization is infallible")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error>
    where
        T: for<'de> Deserialize<'de>,
    {
        serde_json::from_str(s)
    }
}

/// Von Neumann measurement of `a.sigma`: effects `(1 +- a.sigma)/2` labelled `+` and `-`.
pub fn projective_povm<T: Real>(a: &UnitVector3<T>) -> Povm<T> {
    let a = a.get();
    Povm::new(vec![
        Effect::new("+", half_identity_plus(T::one(), &a)),
        Effect::new("-", half_identity_plus(T::one(), &-a)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectDiagnostics<T> {
    pub label: String,
    pub min_eigenvalue: T,
    pub max_eigenvalue: T,
    pub hermiticity_defect: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport<T> {
    pub effects: Vec<EffectDiagnostics<T>>,
    /// `max |sum(effects) - 1|` entrywise.
    pub completeness_defect: T,
    pub tolerance: T,
    pub passed: bool,
}

impl<T: Real> ValidationReport<T> {
    pub fn min_eigenvalue(&self) -> T {
        self.effects
            .iter()
            .map(|e| e.min_eigenvalue)
            .fold(T::infinity(), T::min)
    }

    fn describe(&self) -> String {
        let mut problems = Vec::new();
        for e in &self.effects {
            if e.hermiticity_defect.is_nan() || e.hermiticity_defect > self.tolerance {
                problems.push(format!("effect {:?} not Hermitian", e.label));
            } else if e.min_eigenvalue < -self.tolerance {
                problems.push(format!(
                    "effect {:?} has eigenvalue {}",
                    e.label, e.min_eigenvalue
                ));
            }
        }
        if self.completeness_defect.is_nan() || self.completeness_defect > self.tolerance {
            problems.push(format!(
                "effects sum off identity by {}",
                self.completeness_defect
            ));
        }
        if self.effects.is_empty() {
            problems.push("no effects".into());
        }
        problems.join("; ")
    }
}

/// Checks positivity of every effect and completeness at [`Real::VALIDATION_TOL`].
pub fn validate<T: Real>(povm: &Povm<T>) -> ValidationReport<T> {
    validate_tol(povm, T::VALIDATION_TOL)
}

pub fn validate_tol<T: Real>(povm: &Povm<T>, tol: T) -> ValidationReport<T> {
    let effects: Vec<_> = povm
        .effects
        .iter()
        .map(|e| {
            let hermiticity_defect = e.op.hermiticity_defect();
            // eigenvalues of the Hermitian part; a non-Hermitian effect fails on its own
            let herm = (e.op + e.op.dagger()).scale(T::lit(0.5));
            let (lo, hi) =
                hermitian_eigenvalues_tol(&herm, T::infinity()).unwrap_or((T::nan(), T::nan()));
            EffectDiagnostics {
                label: e.label.clone(),
                min_eigenvalue: lo,
                max_eigenvalue: hi,
                hermiticity_defect,
            }
        })
        .collect();
    let completeness_defect = povm.total().max_abs_diff(&ComplexMatrix2::identity());
    let passed = !effects.is_empty()
        && effects
            .iter()
            .all(|e| e.hermiticity_defect <= tol && e.min_eigenvalue >= -tol)
        && completeness_defect <= tol;
    ValidationReport {
        effects,
        completeness_defect,
        tolerance: tol,
        passed,
    }
}

/// Born-rule probability of one outcome. Slightly negative values from
/// rounding are clamped to zero and flagged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome<T> {
    pub label: String,
    pub probability: T,
    pub clamped: bool,
}

fn clamp_probability<T: Real>(p: T) -> (T, bool) {
    if p < T::zero() {
        (T::zero(), true)
    } else {
        (p, false)
    }
}

fn require_valid<T: Real>(povm: &Povm<T>) -> Result<()> {
    let report = validate(povm);
    if report.passed {
        Ok(())
    } else {
        Err(Error::InvalidPovm(report.describe()))
    }
}

/// `Tr(Pi_i rho)` for every effect, in POVM order.
pub fn outcome_probabilities<T: Real>(
    povm: &Povm<T>,
    state: &QubitState<T>,
) -> Result<Vec<Outcome<T>>> {
    require_valid(povm)?;
    let state = QubitState::from_matrix(*state.matrix())?;
    Ok(povm
        .effects
        .iter()
        .map(|e| {
            let (probability, clamped) = clamp_probability((e.op * *state.matrix()).trace().re);
            Outcome {
                label: e.label.clone(),
                probability,
                clamped,
            }
        })
        .collect())
}

/// Joint outcome table for local POVMs on the two halves of a two-qubit state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityTable<T> {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// `p[i][j] = Re Tr[(Pi_i (x) Pi_j) rho]`.
    pub p: Vec<Vec<T>>,
    /// Number of entries clamped from a small negative value to zero.
    pub clamped: usize,
}

impl<T: Real> ProbabilityTable<T> {
    /// Observer-1 marginals, summed over observer 2's outcomes.
    pub fn row_marginals(&self) -> Vec<T> {
        self.p
            .iter()
            .map(|row| row.iter().fold(T::zero(), |a, &b| a + b))
            .collect()
    }

    pub fn col_marginals(&self) -> Vec<T> {
        (0..self.col_labels.len())
            .map(|j| self.p.iter().fold(T::zero(), |a, row| a + row[j]))
            .collect()
    }

    pub fn total(&self) -> T {
        self.p.iter().flatten().fold(T::zero(), |a, &b| a + b)
    }

    pub fn get(&self, row: &str, col: &str) -> Option<T> {
        let i = self.row_labels.iter().position(|l| l == row)?;
        let j = self.col_labels.iter().position(|l| l == col)?;
        Some(self.p[i][j])
    }

    /// Row-major flattening, the order used by the two-party sampler.
    pub fn flattened(&self) -> Vec<T> {
        self.p.iter().flatten().copied().collect()
    }
}

pub fn two_party_probabilities<T: Real>(
    povm1: &Povm<T>,
    povm2: &Povm<T>,
    state: &TwoQubitState<T>,
) -> Result<ProbabilityTable<T>> {
    require_valid(povm1)?;
    require_valid(povm2)?;
    let state = TwoQubitState::new(*state.matrix())?;
    let mut clamped = 0;
    let p = povm1
        .effects
        .iter()
        .map(|e1| {
            povm2
                .effects
                .iter()
                .map(|e2| {
                    let (v, c) = clamp_probability(state.expectation(&e1.op, &e2.op));
                    clamped += usize::from(c);
                    v
                })
                .collect()
        })
        .collect();
    Ok(ProbabilityTable {
        row_labels: povm1.labels(),
        col_labels: povm2.labels(),
        p,
        clamped,
    })
}
