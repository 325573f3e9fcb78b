//! Driver-satisfaction model: maps per-segment delay times to segment
//! reliabilities through a Weibull patience distribution.

use crate::numerics::adaptive_simpson;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SatisfactionError {
    #[error("delay {0} is negative")]
    NegativeDelay(f64),
    #[error("Weibull parameter {name} must be positive, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("patience mixture weights sum to {0}, expected 1")]
    UnnormalizedMixture(f64),
    #[error("expected {expected} delays, got {got}")]
    DelayCountMismatch { expected: usize, got: usize },
}

/// Weibull patience model: the probability a driver tolerates a delay.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeibullPatience {
    /// Scale in seconds.
    pub lambda: f64,
    /// Shape.
    pub k: f64,
}

impl WeibullPatience {
    /// Parameters adopted for the traffic scenario: lambda = 30 s, k = 2.92.
    pub const DEFAULT: Self = Self { lambda: 30.0, k: 2.92 };

    pub fn new(lambda: f64, k: f64) -> Result<Self, SatisfactionError> {
        if !(lambda > 0.0) {
            return Err(SatisfactionError::InvalidParameter { name: "lambda", value: lambda });
        }
        if !(k > 0.0) {
            return Err(SatisfactionError::InvalidParameter { name: "k", value: k });
        }
        Ok(Self { lambda, k })
    }

    /// `Q(delay) = exp(-(delay/lambda)^k)`: probability the driver's patience
    /// threshold exceeds the delay. Strictly decreasing, Q(0) = 1.
    pub fn satisfaction_probability(&self, delay: f64) -> Result<f64, SatisfactionError> {
        if delay < 0.0 {
            return Err(SatisfactionError::NegativeDelay(delay));
        }
        Ok((-(delay / self.lambda).powf(self.k)).exp())
    }

    /// Elementwise satisfaction probabilities; the reliability vector fed to
    /// the structure and importance modules.
    pub fn delays_to_reliability_vector(
        &self,
        delays: &[f64],
        expected_len: usize,
    ) -> Result<Vec<f64>, SatisfactionError> {
        if delays.len() != expected_len {
            return Err(SatisfactionError::DelayCountMismatch {
                expected: expected_len,
                got: delays.len(),
            });
        }
        delays.iter().map(|&d| self.satisfaction_probability(d)).collect()
    }
}

/// One component of a patience-threshold distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatienceComponent {
    /// All drivers share one threshold.
    PointMass(f64),
    /// Weibull-distributed thresholds.
    Weibull { lambda: f64, k: f64 },
    /// Uniform thresholds on [a, b].
    Uniform { a: f64, b: f64 },
}

impl PatienceComponent {
    /// Upper integration limit leaving < 1e-10 tail mass.
    fn support_end(&self) -> f64 {
        match *self {
            PatienceComponent::PointMass(t) => t,
            PatienceComponent::Weibull { lambda, k } => {
                lambda * (10.0 * std::f64::consts::LN_10).powf(1.0 / k)
            }
            PatienceComponent::Uniform { b, .. } => b,
        }
    }

    fn pdf(&self, t: f64) -> f64 {
        match *self {
            PatienceComponent::PointMass(_) => 0.0,
            PatienceComponent::Weibull { lambda, k } => {
                if t <= 0.0 {
                    0.0
                } else {
                    let z = t / lambda;
                    k / lambda * z.powf(k - 1.0) * (-z.powf(k)).exp()
                }
            }
            PatienceComponent::Uniform { a, b } => {
                if (a..=b).contains(&t) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Weighted mixture of patience-threshold distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PatienceMixture {
    components: Vec<(PatienceComponent, f64)>,
}

impl PatienceMixture {
    pub fn new(components: Vec<(PatienceComponent, f64)>) -> Result<Self, SatisfactionError> {
        let total: f64 = components.iter().map(|&(_, w)| w).sum();
        if components.iter().any(|&(_, w)| w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(SatisfactionError::UnnormalizedMixture(total));
        }
        Ok(Self { components })
    }

    pub fn point_mass(threshold: f64) -> Self {
        Self { components: vec![(PatienceComponent::PointMass(threshold), 1.0)] }
    }
}

const MEAN_RELIABILITY_TOL: f64 = 1e-8;

/// Mean segment reliability: the satisfaction probability averaged over the
/// patience-threshold distribution.
///
/// `acceptable(t)` is the probability that the realized delay stays strictly
/// below the threshold `t`. For a point-mass mixture this reduces to a single
/// evaluation; continuous components are integrated by adaptive Simpson.
pub fn mean_reliability(
    acceptable: impl Fn(f64) -> f64,
    patience: &PatienceMixture,
) -> f64 {
    let mut total = 0.0;
    for &(component, weight) in &patience.components {
        if weight == 0.0 {
            continue;
        }
        total += weight
            * match component {
                PatienceComponent::PointMass(t) => acceptable(t),
                _ => {
                    let end = component.support_end();
                    let f = |t: f64| acceptable(t) * component.pdf(t);
                    // fixed panels first so narrow features are not missed
                    let panels = 64;
                    let width = end / panels as f64;
                    (0..panels)
                        .map(|i| {
                            let a = i as f64 * width;
                            adaptive_simpson(&f, a, a + width, MEAN_RELIABILITY_TOL)
                        })
                        .sum::<f64>()
                }
            };
    }
    total
}

/// Acceptability curve of a deterministic delay under the strict boundary
/// convention: satisfied iff delay < threshold.
pub fn deterministic_delay(delay: f64) -> impl Fn(f64) -> f64 {
    move |threshold| if delay < threshold { 1.0 } else { 0.0 }
}
