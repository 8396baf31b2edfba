//! Fit-quality metrics and hypothesis tests.

pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::FamilyKind;
use crate::rates::{ARRIVAL_TICKS, CANCEL_TICKS};

pub use special::{ln_beta, ln_gamma, reg_inc_beta, reg_inc_gamma_lower, reg_inc_gamma_upper};

/// Degrees of freedom of the 10-category uniformity test.
pub const CHI_SQUARE_DF: f64 = (CANCEL_TICKS - 1) as f64;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("vector sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("need at least 2 observations per sample, got {0}")]
    InsufficientData(usize),
    #[error("all observed counts are zero")]
    AllZero,
    #[error("{0} did not converge")]
    ConvergenceFailure(&'static str),
}

/// Sum of absolute differences between observed and fitted tick masses.
pub fn l1_error(observed: &[f64], fitted: &[f64]) -> Result<f64, StatsError> {
    for v in [observed, fitted] {
        if v.len() != ARRIVAL_TICKS {
            return Err(StatsError::LengthMismatch {
                expected: ARRIVAL_TICKS,
                got: v.len(),
            });
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(StatsError::NotNormalized(s));
        }
    }
    Ok(observed
        .iter()
        .zip(fitted)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Normalized performance scores: each error over the smallest error.
///
/// The best entry scores exactly 1. When the minimum is zero every other
/// zero-error entry also scores 1 and positive errors score infinity.
pub fn nps(errors: &[f64]) -> Vec<f64> {
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    errors
        .iter()
        .map(|&e| if e == min { 1.0 } else { e / min })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub family: FamilyKind,
    pub l1_error: f64,
    pub nps: f64,
}

/// Scores of competing families on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance: String,
    pub scores: Vec<FamilyScore>,
}

impl InstanceScore {
    pub fn new(instance: impl Into<String>, errors: &[(FamilyKind, f64)]) -> Self {
        let raw: Vec<f64> = errors.iter().map(|(_, e)| *e).collect();
        let scores = errors
            .iter()
            .zip(nps(&raw))
            .map(|(&(family, l1_error), nps)| FamilyScore {
                family,
                l1_error,
                nps,
            })
            .collect();
        Self {
            instance: instance.into(),
            scores,
        }
    }

    pub fn nps_of(&self, family: FamilyKind) -> Option<f64> {
        self.scores
            .iter()
            .find(|s| s.family == family)
            .map(|s| s.nps)
    }

    pub fn best(&self) -> Option<FamilyKind> {
        self.scores.iter().find(|s| s.nps == 1.0).map(|s| s.family)
    }
}

/// Mean and sample standard deviation (n - 1 denominator).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    #[default]
    Two,
    /// One-sided alternative: the first sample has the smaller mean.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    /// Both samples were constant; the p-value follows a fixed convention.
    pub zero_variance: bool,
}

/// Two-sided tail probability of Student's t.
pub fn student_t_two_sided(t: f64, df: f64) -> Result<f64, StatsError> {
    if df.is_nan() || df <= 0.0 {
        return Err(StatsError::DomainError(format!(
            "df must be positive, got {df}"
        )));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Welch's unequal-variance t-test.
pub fn welch_t_test(a: &[f64], b: &[f64], tail: Tail) -> Result<TestResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::InsufficientData(s.len()));
        }
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::DomainError("samples must be finite".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let va = sa * sa / na;
    let vb = sb * sb / nb;
    let se2 = va + vb;

    if se2 == 0.0 {
        let diff = ma - mb;
        let (statistic, two_sided) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TestResult {
            statistic,
            degrees_of_freedom: na + nb - 2.0,
            p_value: tail_p(statistic, two_sided, tail),
            zero_variance: true,
        });
    }

    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let two_sided = student_t_two_sided(t, df)?;
    Ok(TestResult {
        statistic: t,
        degrees_of_freedom: df,
        p_value: tail_p(t, two_sided, tail),
        zero_variance: false,
    })
}

fn tail_p(t: f64, two_sided: f64, tail: Tail) -> f64 {
    match tail {
        Tail::Two => two_sided,
        Tail::Less if t <= 0.0 => 0.5 * two_sided,
        Tail::Less => 1.0 - 0.5 * two_sided,
    }
}

/// Integer counts from cancellation ratios: `round(100 * r)`, half away from zero.
pub fn ratios_to_counts(ratios: &[f64]) -> Result<Vec<u64>, StatsError> {
    ratios
        .iter()
        .map(|&r| {
            if (0.0..=1.0).contains(&r) {
                Ok((100.0 * r).round() as u64)
            } else {
                Err(StatsError::DomainError(format!("ratio {r} outside [0, 1]")))
            }
        })
        .collect()
}

/// Pearson chi-square test of observed counts against equal expected counts.
pub fn chi_square_equal_counts(observed: &[u64]) -> Result<TestResult, StatsError> {
    if observed.len() < 2 {
        return Err(StatsError::InsufficientData(observed.len()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(StatsError::AllZero);
    }
    let expected = total as f64 / observed.len() as f64;
    let statistic: f64 = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let df = (observed.len() - 1) as f64;
    Ok(TestResult {
        statistic,
        degrees_of_freedom: df,
        p_value: reg_inc_gamma_upper(df / 2.0, statistic / 2.0)?,
        zero_variance: false,
    })
}

/// Uniformity test of the 10 per-tick cancellation ratios (df = 9).
pub fn chi_square_uniformity(ratios: &[f64]) -> Result<TestResult, StatsError> {
    if ratios.len() != CANCEL_TICKS {
        return Err(StatsError::LengthMismatch {
            expected: CANCEL_TICKS,
            got: ratios.len(),
        });
    }
    chi_square_equal_counts(&ratios_to_counts(ratios)?)
}
