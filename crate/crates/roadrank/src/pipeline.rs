//! Experiment orchestration: intensity sweeps over the scenario network,
//! delay aggregation, reliability and importance tables, and CSV emission.
//!
//! Each (segment, intensity, replication) run is seeded deterministically
//! from the scenario seed, so a full sweep is reproducible end to end.

use crate::importance::{self, ImportanceError};
use crate::intersection::{ConflictStream, JunctionRoad};
use crate::satisfaction::WeibullPatience;
use crate::scenario::{Scenario, Segment};
use crate::sim::Road;
use crate::structure::{EvaluationMode, StructureError};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("intensity {0} outside [0,1]")]
    InvalidIntensity(f64),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Importance(#[from] ImportanceError),
    #[error("satisfaction model: {0}")]
    Satisfaction(#[from] crate::satisfaction::SatisfactionError),
    #[error("cannot write results: {0}")]
    Io(#[from] std::io::Error),
}

/// How the per-segment reliability is derived from the delay sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReliabilitySource {
    /// Satisfaction of the mean delay (default).
    QOfMeanDelay,
    /// Mean of per-vehicle satisfactions.
    MeanOfQ,
}

/// Delay summary for one segment at one intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayStats {
    pub segment_id: u32,
    pub name: String,
    /// Mean delay in seconds; `f64::INFINITY` when saturated.
    pub mean: f64,
    /// 50th, 90th and 99th percentile delays (nearest-rank).
    pub quantiles: [f64; 3],
    pub completed: u64,
    pub saturated: bool,
    /// Mean of per-vehicle satisfaction probabilities.
    pub mean_q: f64,
}

/// One intensity point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityResult {
    pub intensity: f64,
    pub delays: Vec<DelayStats>,
    /// Per-segment reliabilities, ordered by ascending segment id.
    pub p: Vec<f64>,
    pub system_reliability: f64,
    /// (route name, series-product reliability).
    pub route_reliabilities: Vec<(String, f64)>,
    /// Per-segment Birnbaum importance, ordered by ascending segment id.
    pub birnbaum: Vec<f64>,
}

/// Complete sweep output plus reproducibility metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario_name: String,
    pub mode: EvaluationMode,
    pub source: ReliabilitySource,
    pub seed: u64,
    pub replications: u32,
    pub warmup_steps: u64,
    pub measure_steps: u64,
    pub points: Vec<IntensityResult>,
}

/// SplitMix64; spreads structured (seed, tag...) tuples into stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, segment_id: u32, intensity: f64, replication: u32, stream: u32) -> u64 {
    let mut z = mix(seed);
    z = mix(z ^ u64::from(segment_id));
    z = mix(z ^ intensity.to_bits());
    z = mix(z ^ u64::from(replication));
    mix(z ^ (u64::from(stream) << 32))
}

/// Travel times (seconds) of vehicles that entered after the warm-up and
/// completed the segment within the horizon, for one replication.
fn run_replication(
    scenario: &Scenario,
    segment: &Segment,
    intensity: f64,
    replication: u32,
) -> Vec<u64> {
    let seed = scenario.sweep.seed;
    let road_seed = derive_seed(seed, segment.id, intensity, replication, 0);
    let road = Road::new(segment.length_cells(), scenario.sim, road_seed);
    let conflicts = segment
        .conflicts
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            ConflictStream::new(
                spec.length_cells(),
                scenario.sim,
                derive_seed(seed, segment.id, intensity, replication, 1 + k as u32),
                intensity,
                spec.rule,
                spec.applies_mask(),
            )
        })
        .collect();
    let mut junction = JunctionRoad::new(road, segment.maneuver, segment.light, conflicts);
    let horizon = scenario.sweep.warmup_steps + scenario.sweep.measure_steps;
    for _ in 0..horizon {
        junction.step(intensity);
    }
    junction
        .drain_exits()
        .into_iter()
        .filter(|e| e.entry_step > scenario.sweep.warmup_steps)
        .map(|e| e.travel_time())
        .collect()
}

fn thread_count() -> usize {
    std::env::var("ROADRANK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every replication of one segment at one intensity and pools the
/// travel times. Replications are distributed over worker threads; results
/// land in per-replication slots, so the pooled sample is independent of
/// scheduling.
fn pooled_travel_times(scenario: &Scenario, segment: &Segment, intensity: f64) -> Vec<u64> {
    let replications = scenario.sweep.replications;
    let workers = thread_count().min(replications as usize).max(1);
    let slots: Mutex<Vec<Option<Vec<u64>>>> = Mutex::new(vec![None; replications as usize]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let rep = next.fetch_add(1, Ordering::Relaxed);
                if rep >= replications as usize {
                    break;
                }
                let sample = run_replication(scenario, segment, intensity, rep as u32);
                slots.lock().expect("worker poisoned")[rep] = Some(sample);
            });
        }
    });
    let mut pooled = Vec::new();
    for slot in slots.into_inner().expect("worker poisoned") {
        pooled.extend(slot.expect("all replications filled"));
    }
    pooled
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::INFINITY;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Per-segment delay statistics at one intensity.
///
/// Delay of a vehicle is its travel time minus the smallest travel time in
/// the pooled batch for that segment. A segment with no completed vehicle is
/// reported saturated (infinite mean delay).
pub fn measure_delays(
    scenario: &Scenario,
    intensity: f64,
    patience: &WeibullPatience,
) -> Result<Vec<DelayStats>, PipelineError> {
    if !(0.0..=1.0).contains(&intensity) {
        return Err(PipelineError::InvalidIntensity(intensity));
    }
    let mut stats = Vec::new();
    for segment in scenario.segments_by_id() {
        let travels = pooled_travel_times(scenario, segment, intensity);
        if travels.is_empty() {
            stats.push(DelayStats {
                segment_id: segment.id,
                name: segment.name.clone(),
                mean: f64::INFINITY,
                quantiles: [f64::INFINITY; 3],
                completed: 0,
                saturated: true,
                mean_q: 0.0,
            });
            continue;
        }
        let min = *travels.iter().min().expect("nonempty");
        let mut delays: Vec<f64> =
            travels.iter().map(|&t| (t - min) as f64 * scenario.sim.step_seconds).collect();
        delays.sort_by(|a, b| a.partial_cmp(b).expect("finite delays"));
        let mean = delays.iter().sum::<f64>() / delays.len() as f64;
        let mut mean_q = 0.0;
        for &d in &delays {
            mean_q += patience.satisfaction_probability(d)?;
        }
        mean_q /= delays.len() as f64;
        stats.push(DelayStats {
            segment_id: segment.id,
            name: segment.name.clone(),
            mean,
            quantiles: [
                nearest_rank(&delays, 0.50),
                nearest_rank(&delays, 0.90),
                nearest_rank(&delays, 0.99),
            ],
            completed: delays.len() as u64,
            saturated: false,
            mean_q,
        });
    }
    Ok(stats)
}

/// Full pipeline: sweep the intensity grid, map delays to reliabilities,
/// evaluate system/route reliability and per-segment Birnbaum importance.
pub fn run_sweep(
    scenario: &Scenario,
    mode: EvaluationMode,
    source: ReliabilitySource,
) -> Result<SweepResult, PipelineError> {
    let patience = WeibullPatience::new(scenario.satisfaction.lambda, scenario.satisfaction.k)?;
    let phi = scenario.structure_function()?;
    let index = scenario.id_to_index();
    let mut points = Vec::new();
    for intensity in scenario.sweep.intensities() {
        let delays = measure_delays(scenario, intensity, &patience)?;
        let p: Vec<f64> = delays
            .iter()
            .map(|d| {
                if d.saturated {
                    return Ok(0.0);
                }
                match source {
                    ReliabilitySource::QOfMeanDelay => patience.satisfaction_probability(d.mean),
                    ReliabilitySource::MeanOfQ => Ok(d.mean_q),
                }
            })
            .collect::<Result<_, _>>()?;
        let system_reliability = phi.reliability(&p, mode)?;
        let route_reliabilities = scenario
            .routes
            .iter()
            .map(|route| {
                let product: f64 = route.segments.iter().map(|id| p[index[id]]).product();
                (route.name.clone(), product)
            })
            .collect();
        let birnbaum = (0..phi.component_count())
            .map(|i| importance::birnbaum_reliability(&phi, &p, i, mode))
            .collect::<Result<Vec<f64>, _>>()?;
        points.push(IntensityResult {
            intensity,
            delays,
            p,
            system_reliability,
            route_reliabilities,
            birnbaum,
        });
    }
    Ok(SweepResult {
        scenario_name: scenario.name.clone(),
        mode,
        source,
        seed: scenario.sweep.seed,
        replications: scenario.sweep.replications,
        warmup_steps: scenario.sweep.warmup_steps,
        measure_steps: scenario.sweep.measure_steps,
        points,
    })
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

/// Long-format importance table: one row per (intensity, segment).
pub fn importance_csv(result: &SweepResult) -> String {
    let mut out = String::from("intensity,segment_id,name,p,birnbaum\n");
    for point in &result.points {
        for (k, d) in point.delays.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt(point.intensity),
                d.segment_id,
                d.name,
                fmt(point.p[k]),
                fmt(point.birnbaum[k]),
            ));
        }
    }
    out
}

/// Per-segment delay table: one row per (intensity, segment).
pub fn delays_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "intensity,segment_id,name,mean_delay_s,p50_s,p90_s,p99_s,completed,saturated\n",
    );
    for point in &result.points {
        for d in &point.delays {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                fmt(point.intensity),
                d.segment_id,
                d.name,
                fmt(d.mean),
                fmt(d.quantiles[0]),
                fmt(d.quantiles[1]),
                fmt(d.quantiles[2]),
                d.completed,
                d.saturated,
            ));
        }
    }
    out
}

/// System and per-route reliability per intensity.
pub fn system_csv(result: &SweepResult) -> String {
    let mut out = String::from("intensity,system_reliability,route,route_reliability\n");
    for point in &result.points {
        for (name, r) in &point.route_reliabilities {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt(point.intensity),
                fmt(point.system_reliability),
                name,
                fmt(*r),
            ));
        }
    }
    out
}

/// Human-readable run summary with reproducibility metadata.
pub fn summary_text(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenario: {}\n", result.scenario_name));
    out.push_str(&format!("mode: {}\n", result.mode));
    out.push_str(&format!(
        "reliability source: {}\n",
        match result.source {
            ReliabilitySource::QOfMeanDelay => "q-of-mean-delay",
            ReliabilitySource::MeanOfQ => "mean-of-q",
        }
    ));
    out.push_str(&format!("seed: {}\n", result.seed));
    out.push_str(&format!("replications: {}\n", result.replications));
    out.push_str(&format!(
        "steps: {} warm-up + {} measured\n",
        result.warmup_steps, result.measure_steps
    ));
    out.push_str(&format!("intensity points: {}\n\n", result.points.len()));
    for point in &result.points {
        out.push_str(&format!(
            "intensity {}: system reliability {}\n",
            fmt(point.intensity),
            fmt(point.system_reliability)
        ));
    }
    out
}

/// Writes the result files into `out_dir` (created if missing).
pub fn emit(result: &SweepResult, out_dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir)?;
    for (file, content) in [
        ("importance.csv", importance_csv(result)),
        ("delays.csv", delays_csv(result)),
        ("system.csv", system_csv(result)),
        ("summary.txt", summary_text(result)),
    ] {
        let mut f = std::fs::File::create(out_dir.join(file))?;
        f.write_all(content.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn small_scenario() -> Scenario {
        let mut scenario = Scenario::bundled();
        scenario.sweep.replications = 2;
        scenario.sweep.warmup_steps = 50;
        scenario.sweep.measure_steps = 200;
        scenario.sweep.intensity_start = 0.05;
        scenario.sweep.intensity_stop = 0.10;
        scenario.sweep.intensity_step = 0.05;
        scenario
    }

    #[test]
    fn seeds_differ_across_axes() {
        let base = derive_seed(1, 2, 0.05, 3, 0);
        assert_ne!(base, derive_seed(2, 2, 0.05, 3, 0));
        assert_ne!(base, derive_seed(1, 3, 0.05, 3, 0));
        assert_ne!(base, derive_seed(1, 2, 0.075, 3, 0));
        assert_ne!(base, derive_seed(1, 2, 0.05, 4, 0));
        assert_ne!(base, derive_seed(1, 2, 0.05, 3, 1));
        assert_eq!(base, derive_seed(1, 2, 0.05, 3, 0));
    }

    #[test]
    fn near_zero_intensity_gives_near_zero_delays() {
        let mut scenario = small_scenario();
        scenario.sweep.replications = 4;
        scenario.sweep.measure_steps = 400;
        let patience = WeibullPatience::DEFAULT;
        // a trickle of probe vehicles on the priority streets flows freely
        let stats = measure_delays(&scenario, 0.01, &patience).unwrap();
        for d in &stats {
            if ["Nyska 1", "Sieradzka 1", "Sieradzka 2"].contains(&d.name.as_str()) {
                assert!(!d.saturated, "{} saturated", d.name);
                assert!(d.mean < 3.0, "{}: mean delay {}", d.name, d.mean);
            }
        }
    }

    #[test]
    fn sweep_is_deterministic_and_emits_identical_files() {
        let scenario = small_scenario();
        let a = run_sweep(&scenario, EvaluationMode::Exact, ReliabilitySource::QOfMeanDelay)
            .unwrap();
        let b = run_sweep(&scenario, EvaluationMode::Exact, ReliabilitySource::QOfMeanDelay)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(importance_csv(&a), importance_csv(&b));
        assert_eq!(delays_csv(&a), delays_csv(&b));
    }

    #[test]
    fn route_reliability_is_series_product_and_system_dominates() {
        let scenario = small_scenario();
        let result =
            run_sweep(&scenario, EvaluationMode::Exact, ReliabilitySource::QOfMeanDelay).unwrap();
        let index = scenario.id_to_index();
        for point in &result.points {
            for (route, (_, r)) in scenario.routes.iter().zip(&point.route_reliabilities) {
                let product: f64 = route.segments.iter().map(|id| point.p[index[id]]).product();
                assert_eq!(*r, product); // bit-exact by construction
                assert!(point.system_reliability >= *r - 1e-12);
            }
        }
    }

    #[test]
    fn csv_columns_are_stable() {
        let scenario = small_scenario();
        let result =
            run_sweep(&scenario, EvaluationMode::Exact, ReliabilitySource::QOfMeanDelay).unwrap();
        let csv = importance_csv(&result);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("intensity,segment_id,name,p,birnbaum"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.050000,1,Dolna,"), "{first}");
        let rows = csv.lines().count() - 1;
        assert_eq!(rows, result.points.len() * scenario.segments.len());
    }

    #[test]
    fn intensity_outside_unit_interval_is_rejected() {
        let scenario = small_scenario();
        let patience = WeibullPatience::DEFAULT;
        assert!(matches!(
            measure_delays(&scenario, 1.5, &patience),
            Err(PipelineError::InvalidIntensity(_))
        ));
    }
}
