//! Family-level checks: equal moments across members, distinct densities,
//! and the structural conditions each construction relies on.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::charfun::MAX_DERIVATIVE_ORDER;
use crate::charfun::{moments_from_charfun, moments_from_density, MomentVector, ToleranceSchedule};
use crate::error::{Error, Result};
use crate::grid::{distance, CharFn, DensityFunction, Metric, NEG_TOL, NORM_TOL};

/// Default L1 separation required between any two members.
pub const DISTINCTNESS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Stieltjes,
    Operator,
}

impl FamilyKind {
    /// Name of the family parameter, used in CSV headers.
    pub fn parameter(&self) -> &'static str {
        match self {
            FamilyKind::Stieltjes => "eps",
            FamilyKind::Operator => "beta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    MomentSpread,
    Distinctness,
    Negativity,
    Normalization,
    ConditionCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Verdict {
    #[serde(rename = "M_INDETERMINATE_CONFIRMED")]
    Confirmed,
    #[serde(rename = "FAILED")]
    Failed {
        gate: Gate,
        detail: String,
        #[serde(with = "extended_float")]
        value: f64,
    },
}

impl Verdict {
    pub fn confirmed(&self) -> bool {
        matches!(self, Verdict::Confirmed)
    }

    pub fn failed_gate(&self) -> Option<Gate> {
        match self {
            Verdict::Confirmed => None,
            Verdict::Failed { gate, .. } => Some(*gate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub pass: bool,
    #[serde(with = "extended_float")]
    pub value: f64,
}

impl ConditionCheck {
    pub fn new(name: impl Into<String>, pass: bool, value: f64) -> Self {
        Self {
            name: name.into(),
            pass,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub family_kind: FamilyKind,
    pub n_max: usize,
    pub parameters: Vec<f64>,
    /// `moment_table[member][n]`.
    pub moment_table: Vec<Vec<f64>>,
    pub reference: MomentVector,
    pub tolerances: Vec<f64>,
    pub max_moment_spread: Vec<f64>,
    /// `+∞` for a family of one; serialized as `null`.
    #[serde(with = "extended_float")]
    pub min_pairwise_l1: f64,
    pub distinctness_threshold: f64,
    pub normalization_errors: Vec<f64>,
    pub negativity_worst: Vec<f64>,
    pub condition_checks: Vec<ConditionCheck>,
    pub verdict: Verdict,
}

/// Settings for [`FamilyVerifier::verify`].
#[derive(Debug, Clone)]
pub struct FamilyVerifier {
    pub kind: FamilyKind,
    pub n_max: usize,
    pub distinctness_threshold: f64,
    pub tolerance: ToleranceSchedule,
    /// Moments the tolerances are scaled by; the first member's if `None`.
    pub reference: Option<MomentVector>,
    pub condition_checks: Vec<ConditionCheck>,
}

impl FamilyVerifier {
    pub fn new(kind: FamilyKind, n_max: usize) -> Self {
        Self {
            kind,
            n_max,
            distinctness_threshold: DISTINCTNESS_THRESHOLD,
            tolerance: ToleranceSchedule::default(),
            reference: None,
            condition_checks: Vec::new(),
        }
    }

    pub fn with_checks(mut self, checks: Vec<ConditionCheck>) -> Self {
        self.condition_checks = checks;
        self
    }

    pub fn with_reference(mut self, reference: MomentVector) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn verify(&self, members: &[(f64, DensityFunction)]) -> Result<VerificationReport> {
        let Some((_, first)) = members.first() else {
            return Err(Error::EmptyFamily);
        };
        let grid = *first.grid();
        if let Some((p, _)) = members.iter().find(|(_, d)| !d.grid().same_as(&grid)) {
            return Err(Error::GridMismatch(format!(
                "member {p} is not on the first member's grid"
            )));
        }

        let moments = members
            .iter()
            .map(|(_, d)| moments_from_density(d, self.n_max))
            .collect::<Result<Vec<_>>>()?;
        let reference = self.reference.clone().unwrap_or_else(|| moments[0].clone());
        if reference.values.len() <= self.n_max {
            return Err(Error::OrderTooHigh {
                requested: self.n_max,
                cap: reference.n_max(),
            });
        }
        let tolerances: Vec<f64> = (0..=self.n_max)
            .map(|n| self.tolerance.tol(n, reference.sigma_ref, reference.get(n)))
            .collect();
        let max_moment_spread: Vec<f64> = (0..=self.n_max)
            .map(|n| {
                let (lo, hi) = moments
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, m| {
                        (acc.0.min(m.get(n)), acc.1.max(m.get(n)))
                    });
                hi - lo
            })
            .collect();

        let mut min_pairwise_l1 = f64::INFINITY;
        let mut closest = (0, 0);
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let d = distance(members[i].1.base(), members[j].1.base(), Metric::L1)?;
                if d < min_pairwise_l1 {
                    min_pairwise_l1 = d;
                    closest = (i, j);
                }
            }
        }

        let normalization_errors: Vec<f64> = members
            .iter()
            .map(|(_, d)| d.normalization_error())
            .collect();
        let negativity_worst: Vec<f64> = members.iter().map(|(_, d)| d.negativity()).collect();
        let parameters: Vec<f64> = members.iter().map(|(p, _)| *p).collect();

        let verdict = self.judge(
            &max_moment_spread,
            &tolerances,
            min_pairwise_l1,
            (parameters.get(closest.0), parameters.get(closest.1)),
            &normalization_errors,
            &negativity_worst,
            &parameters,
        );

        Ok(VerificationReport {
            family_kind: self.kind,
            n_max: self.n_max,
            parameters,
            moment_table: moments.into_iter().map(|m| m.values).collect(),
            reference,
            tolerances,
            max_moment_spread,
            min_pairwise_l1,
            distinctness_threshold: self.distinctness_threshold,
            normalization_errors,
            negativity_worst,
            condition_checks: self.condition_checks.clone(),
            verdict,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn judge(
        &self,
        spread: &[f64],
        tolerances: &[f64],
        min_l1: f64,
        closest: (Option<&f64>, Option<&f64>),
        normalization: &[f64],
        negativity: &[f64],
        parameters: &[f64],
    ) -> Verdict {
        let worst_order = spread
            .iter()
            .zip(tolerances)
            .enumerate()
            .filter(|(_, (s, t))| !(*s <= *t))
            .max_by(|a, b| (a.1 .0 / a.1 .1).total_cmp(&(b.1 .0 / b.1 .1)));
        if let Some((n, (s, t))) = worst_order {
            return Verdict::Failed {
                gate: Gate::MomentSpread,
                detail: format!("order {n}: spread {s:e} exceeds tolerance {t:e}"),
                value: *s,
            };
        }
        if !(min_l1 >= self.distinctness_threshold) {
            let pair = match closest {
                (Some(a), Some(b)) => format!(" between {a} and {b}"),
                _ => String::new(),
            };
            return Verdict::Failed {
                gate: Gate::Distinctness,
                detail: format!(
                    "minimum L1 distance {min_l1:e}{pair} is below {:e}",
                    self.distinctness_threshold
                ),
                value: min_l1,
            };
        }
        if let Some((i, v)) = worst(negativity).filter(|(_, v)| !(*v <= NEG_TOL)) {
            return Verdict::Failed {
                gate: Gate::Negativity,
                detail: format!("member {} has relative negativity {v:e}", parameters[i]),
                value: v,
            };
        }
        if let Some((i, v)) = worst(normalization).filter(|(_, v)| !(*v <= NORM_TOL)) {
            return Verdict::Failed {
                gate: Gate::Normalization,
                detail: format!("member {} integrates to 1 ± {v:e}", parameters[i]),
                value: v,
            };
        }
        if let Some(check) = self.condition_checks.iter().find(|c| !c.pass) {
            return Verdict::Failed {
                gate: Gate::ConditionCheck,
                detail: format!("{} failed", check.name),
                value: check.value,
            };
        }
        Verdict::Confirmed
    }
}

fn worst(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Verification with default settings and no extra condition checks.
pub fn verify_family(
    kind: FamilyKind,
    members: &[(f64, DensityFunction)],
    n_max: usize,
    distinctness_threshold: f64,
) -> Result<VerificationReport> {
    let mut verifier = FamilyVerifier::new(kind, n_max);
    verifier.distinctness_threshold = distinctness_threshold;
    verifier.verify(members)
}

/// `|m_n(P) − m_n(M)|` for `n ≤ min(n_max, 4)`, moments of `P` by quadrature
/// and of `M` by differences at 0.
pub fn two_path_moment_check(p: &DensityFunction, m: &CharFn, n_max: usize) -> Result<Vec<f64>> {
    let top = n_max.min(MAX_DERIVATIVE_ORDER);
    let by_density = moments_from_density(p, top)?;
    let by_charfun = moments_from_charfun(m, top)?;
    Ok(by_density
        .values
        .iter()
        .zip(&by_charfun.values)
        .map(|(a, b)| (a - b).abs())
        .collect())
}

/// Non-finite floats as JSON `null` (`+∞`) or the strings `"-inf"`/`"nan"`.
mod extended_float {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Word(w) => match w.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}
