//! Reliability, structural, and Barlow-Proschan importance measures for the
//! components of a coherent structure.
//!
//! Birnbaum importance is the partial derivative of the reliability function;
//! Barlow-Proschan importance is its integral over a shared scalar component
//! reliability, equivalently a weighted count of critical path vectors. The
//! two Barlow-Proschan routes are computed independently and must agree.

use crate::numerics::adaptive_simpson;
use crate::structure::{EvaluationMode, StructureError, StructureFunction};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("time {t} outside (0, {t_max}]")]
    TimeOutOfRange { t: f64, t_max: f64 },
    #[error("lifetime spec has {got} curves, system has {expected} components")]
    LifetimeDimensionMismatch { expected: usize, got: usize },
    #[error("total failure mass on [0, {t}] is zero; ratios undefined")]
    DegenerateLifetimes { t: f64 },
}

/// Ranking measure for importance reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Birnbaum,
    BarlowProschan,
}

/// Per-component importance values.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ComponentImportance {
    pub component: usize,
    pub birnbaum: f64,
    pub birnbaum_functioning: f64,
    pub birnbaum_failure: f64,
    pub barlow_proschan: f64,
}

/// Importance values for every component plus a ranking permutation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ImportanceReport {
    pub records: Vec<ComponentImportance>,
    pub mode: EvaluationMode,
    pub measure: Measure,
    pub ranking: Vec<usize>,
}

/// `B(i|p) = h(1_i, p) - h(0_i, p)` under the selected evaluation mode.
pub fn birnbaum_reliability(
    phi: &StructureFunction,
    p: &[f64],
    i: usize,
    mode: EvaluationMode,
) -> Result<f64, ImportanceError> {
    match mode {
        EvaluationMode::Exact => {
            let mut hi = p.to_vec();
            let mut lo = p.to_vec();
            if i >= phi.component_count() {
                return Err(StructureError::ComponentOutOfRange { index: i, n: phi.component_count() }
                    .into());
            }
            hi[i] = 1.0;
            lo[i] = 0.0;
            Ok(phi.reliability_exact(&hi)? - phi.reliability_exact(&lo)?)
        }
        EvaluationMode::PaperNaive => naive_partial_derivative(phi, p, i),
    }
}

/// Partial derivative of the naive path-product expression, differentiating
/// every occurrence of `p_i` across paths jointly.
fn naive_partial_derivative(
    phi: &StructureFunction,
    p: &[f64],
    i: usize,
) -> Result<f64, ImportanceError> {
    if p.len() != phi.component_count() {
        return Err(StructureError::DimensionMismatch {
            expected: phi.component_count(),
            got: p.len(),
        }
        .into());
    }
    if i >= phi.component_count() {
        return Err(
            StructureError::ComponentOutOfRange { index: i, n: phi.component_count() }.into()
        );
    }
    let masks = phi.path_masks();
    let path_rel: Vec<f64> = masks
        .iter()
        .map(|&m| {
            let mut prod = 1.0;
            let mut bits = m;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                prod *= p[j];
                bits &= bits - 1;
            }
            prod
        })
        .collect();
    let mut total = 0.0;
    for (k, &mask) in masks.iter().enumerate() {
        if mask & (1 << i) == 0 {
            continue;
        }
        // d pi_k / d p_i: product over the path without component i
        let mut partial = 1.0;
        let mut bits = mask & !(1u64 << i);
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            partial *= p[j];
            bits &= bits - 1;
        }
        let mut rest = 1.0;
        for (l, &rel) in path_rel.iter().enumerate() {
            if l != k {
                rest *= 1.0 - rel;
            }
        }
        total += partial * rest;
    }
    Ok(total)
}

/// Splits Birnbaum importance into its functioning and failure parts:
/// `((1 - p_i) * B(i|p), p_i * B(i|p))`.
pub fn birnbaum_split(
    phi: &StructureFunction,
    p: &[f64],
    i: usize,
    mode: EvaluationMode,
) -> Result<(f64, f64), ImportanceError> {
    let b = birnbaum_reliability(phi, p, i, mode)?;
    Ok(((1.0 - p[i]) * b, p[i] * b))
}

/// Structural importance: Birnbaum importance at `p = (1/2, ..., 1/2)`.
///
/// Computed as the exact rational derivative and as `2^{-n} sum_x delta_i(x)`;
/// the two must agree bit-exactly.
pub fn birnbaum_structural(phi: &StructureFunction, i: usize) -> Result<f64, ImportanceError> {
    let exact = birnbaum_structural_rational(phi, i)?;
    Ok(exact.to_f64().expect("structural importance fits in f64"))
}

pub(crate) fn birnbaum_structural_rational(
    phi: &StructureFunction,
    i: usize,
) -> Result<BigRational, ImportanceError> {
    let n = phi.component_count();
    if i >= n {
        return Err(StructureError::ComponentOutOfRange { index: i, n }.into());
    }
    if n > 63 {
        return Err(StructureError::EnumerationCapExceeded { n, cap: 63 }.into());
    }
    // combinatorial route: count pivotal states of the other n-1 components
    let count = count_pivotal_by_size(phi, i)
        .iter()
        .sum::<u64>();
    let combinatorial = BigRational::new(BigInt::from(count), BigInt::from(1u64 << (n - 1)));

    // derivative route at p = 1/2, exact rationals via inclusion-exclusion
    if phi.path_masks().len() <= 24 {
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let mut hi = vec![half.clone(); n];
        let mut lo = vec![half; n];
        hi[i] = BigRational::one();
        lo[i] = BigRational::zero();
        let derivative = phi.reliability_rational(&hi) - phi.reliability_rational(&lo);
        assert_eq!(
            derivative, combinatorial,
            "structural importance routes disagree for component {i}"
        );
    }
    Ok(combinatorial)
}

/// Number of pivotal state vectors for component `i`, bucketed by the size
/// `r = 1 + #functioning others` of the critical path vector.
fn count_pivotal_by_size(phi: &StructureFunction, i: usize) -> Vec<u64> {
    let n = phi.component_count();
    let mut counts = vec![0u64; n + 1];
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    for sub in 0u64..(1 << (n - 1)) {
        let mut mask = 0u64;
        for (bit, &j) in others.iter().enumerate() {
            if sub & (1 << bit) != 0 {
                mask |= 1 << j;
            }
        }
        let up = phi
            .path_masks()
            .iter()
            .any(|&path| path & (mask | (1 << i)) == path);
        if !up {
            continue;
        }
        let down = phi.path_masks().iter().any(|&path| path & (mask & !(1u64 << i)) == path);
        if !down {
            let r = 1 + sub.count_ones() as usize;
            counts[r] += 1;
        }
    }
    counts
}

/// Barlow-Proschan importance by exact polynomial integration of
/// `h(1_i, p) - h(0_i, p)` over the shared scalar reliability `p`.
pub fn barlow_proschan(phi: &StructureFunction, i: usize) -> Result<f64, ImportanceError> {
    Ok(barlow_proschan_rational(phi, i)?
        .to_f64()
        .expect("Barlow-Proschan value fits in f64"))
}

pub(crate) fn barlow_proschan_rational(
    phi: &StructureFunction,
    i: usize,
) -> Result<BigRational, ImportanceError> {
    let n = phi.component_count();
    if i >= n {
        return Err(StructureError::ComponentOutOfRange { index: i, n }.into());
    }
    let masks = phi.path_masks();
    let m = masks.len();
    assert!(m <= 24, "inclusion-exclusion route needs <= 24 paths, got {m}");
    // coefficient of p^e in h(1_i, p) minus h(0_i, p), from path-union sizes
    let mut coeff: Vec<BigInt> = vec![BigInt::zero(); n + 1];
    for subset in 1u64..(1 << m) {
        let mut union = 0u64;
        for (k, &path) in masks.iter().enumerate() {
            if subset & (1 << k) != 0 {
                union |= path;
            }
        }
        let sign = if subset.count_ones() % 2 == 1 { 1 } else { -1 };
        let e_pinned = (union & !(1u64 << i)).count_ones() as usize;
        coeff[e_pinned] += sign;
        if union & (1 << i) == 0 {
            // subset survives when component i is failed
            coeff[union.count_ones() as usize] -= sign;
        }
    }
    let mut total = BigRational::zero();
    for (e, c) in coeff.iter().enumerate() {
        if !c.is_zero() {
            total += BigRational::new(c.clone(), BigInt::from(e as u64 + 1));
        }
    }
    Ok(total)
}

/// Barlow-Proschan importance by counting critical path vectors, with exact
/// factorial weights `(r-1)!(n-r)!/n!`.
pub fn barlow_proschan_combinatorial(
    phi: &StructureFunction,
    i: usize,
) -> Result<f64, ImportanceError> {
    Ok(barlow_proschan_combinatorial_rational(phi, i)?
        .to_f64()
        .expect("Barlow-Proschan value fits in f64"))
}

pub(crate) fn barlow_proschan_combinatorial_rational(
    phi: &StructureFunction,
    i: usize,
) -> Result<BigRational, ImportanceError> {
    let n = phi.component_count();
    if i >= n {
        return Err(StructureError::ComponentOutOfRange { index: i, n }.into());
    }
    if n > 20 {
        return Err(StructureError::EnumerationCapExceeded { n, cap: 20 }.into());
    }
    let counts = count_pivotal_by_size(phi, i);
    let n_fact = factorial(n);
    let mut total = BigRational::zero();
    for (r, &c) in counts.iter().enumerate().skip(1) {
        if c == 0 {
            continue;
        }
        let weight = BigRational::new(factorial(r - 1) * factorial(n - r), n_fact.clone());
        total += weight * BigRational::from(BigInt::from(c));
    }
    Ok(total)
}

fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, v| acc * BigInt::from(v))
}

/// Per-component lifetime distribution as callable cdf/pdf curves.
#[derive(Clone)]
pub struct LifetimeCurve {
    cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl LifetimeCurve {
    pub fn new(
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { cdf: Arc::new(cdf), pdf: Arc::new(pdf) }
    }

    /// Uniform lifetimes on [0, 1].
    pub fn uniform_unit() -> Self {
        Self::new(
            |t| t.clamp(0.0, 1.0),
            |t| if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 },
        )
    }

    pub fn exponential(rate: f64) -> Self {
        Self::new(
            move |t| if t <= 0.0 { 0.0 } else { 1.0 - (-rate * t).exp() },
            move |t| if t <= 0.0 { 0.0 } else { rate * (-rate * t).exp() },
        )
    }

    pub fn cdf(&self, t: f64) -> f64 {
        (self.cdf)(t)
    }

    pub fn pdf(&self, t: f64) -> f64 {
        (self.pdf)(t)
    }
}

impl std::fmt::Debug for LifetimeCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LifetimeCurve").finish_non_exhaustive()
    }
}

/// Lifetime distributions for every component plus an integration horizon.
#[derive(Debug, Clone)]
pub struct LifetimeSpec {
    pub curves: Vec<LifetimeCurve>,
    pub t_max: f64,
}

impl LifetimeSpec {
    /// Identical lifetime curves for all `n` components.
    pub fn iid(curve: LifetimeCurve, n: usize, t_max: f64) -> Self {
        Self { curves: vec![curve; n], t_max }
    }
}

/// Probability share that a system failure on [0, t] was caused by each
/// component: unnormalized numerator and the normalized ratio.
#[derive(Debug, Clone, Copy)]
pub struct LifetimeShare {
    pub component: usize,
    pub numerator: f64,
    pub ratio: f64,
}

const LIFETIME_QUAD_TOL: f64 = 1e-8;

/// Time-dependent Barlow-Proschan decomposition over component lifetimes.
pub fn barlow_proschan_lifetime(
    phi: &StructureFunction,
    lifetimes: &LifetimeSpec,
    t: f64,
) -> Result<Vec<LifetimeShare>, ImportanceError> {
    let n = phi.component_count();
    if lifetimes.curves.len() != n {
        return Err(ImportanceError::LifetimeDimensionMismatch {
            expected: n,
            got: lifetimes.curves.len(),
        });
    }
    if !(t > 0.0 && t <= lifetimes.t_max) {
        return Err(ImportanceError::TimeOutOfRange { t, t_max: lifetimes.t_max });
    }
    let survival = |u: f64| -> Vec<f64> {
        lifetimes.curves.iter().map(|c| (1.0 - c.cdf(u)).clamp(0.0, 1.0)).collect()
    };
    let mut numerators = Vec::with_capacity(n);
    for i in 0..n {
        let integrand = |u: f64| {
            let mut hi = survival(u);
            let mut lo = hi.clone();
            hi[i] = 1.0;
            lo[i] = 0.0;
            (phi.reliability_ie(&hi) - phi.reliability_ie(&lo)) * lifetimes.curves[i].pdf(u)
        };
        numerators.push(adaptive_simpson(&integrand, 0.0, t, LIFETIME_QUAD_TOL));
    }
    let denom: f64 = numerators.iter().sum();
    if denom <= 0.0 {
        return Err(ImportanceError::DegenerateLifetimes { t });
    }
    Ok(numerators
        .iter()
        .enumerate()
        .map(|(component, &numerator)| LifetimeShare {
            component,
            numerator,
            ratio: numerator / denom,
        })
        .collect())
}

/// Barlow-Proschan value under the selected mode. The naive mode integrates
/// the naive partial derivative over the shared scalar reliability.
fn barlow_proschan_mode(
    phi: &StructureFunction,
    i: usize,
    mode: EvaluationMode,
) -> Result<f64, ImportanceError> {
    match mode {
        EvaluationMode::Exact => barlow_proschan(phi, i),
        EvaluationMode::PaperNaive => {
            let f = |p: f64| {
                let vec = vec![p; phi.component_count()];
                naive_partial_derivative(phi, &vec, i).expect("validated dimensions")
            };
            Ok(adaptive_simpson(&f, 0.0, 1.0, 1e-10))
        }
    }
}

/// Computes the full importance report for a reliability vector.
pub fn compute_report(
    phi: &StructureFunction,
    p: &[f64],
    mode: EvaluationMode,
    measure: Measure,
) -> Result<ImportanceReport, ImportanceError> {
    let n = phi.component_count();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let birnbaum = birnbaum_reliability(phi, p, i, mode)?;
        let (functioning, failure) = ((1.0 - p[i]) * birnbaum, p[i] * birnbaum);
        let bp = barlow_proschan_mode(phi, i, mode)?;
        records.push(ComponentImportance {
            component: i,
            birnbaum,
            birnbaum_functioning: functioning,
            birnbaum_failure: failure,
            barlow_proschan: bp,
        });
    }
    let ranking = rank(&records, measure);
    Ok(ImportanceReport { records, mode, measure, ranking })
}

/// Components ordered by the chosen measure, descending; ties broken by
/// ascending component id. Deterministic.
pub fn rank(records: &[ComponentImportance], measure: Measure) -> Vec<usize> {
    let value = |r: &ComponentImportance| match measure {
        Measure::Birnbaum => r.birnbaum,
        Measure::BarlowProschan => r.barlow_proschan,
    };
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        value(&records[b])
            .partial_cmp(&value(&records[a]))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(records[a].component.cmp(&records[b].component))
    });
    order.iter().map(|&idx| records[idx].component).collect()
}
