//! Scenario files: the network description consumed by the sweep pipeline.
//!
//! A scenario lists the road segments with their end-of-road maneuvers,
//! conflict streams and optional signals, the minimal path sets over segment
//! ids, the named routes, the satisfaction parameters, and the sweep grid.
//! The format is TOML with a versioned schema; the city network the tool
//! ships with is available through [`Scenario::bundled`].

use crate::intersection::{ConflictRule, ManeuverKind, ManeuverSpec, TrafficLight};
use crate::sim::{RouteChoice, SimParams};
use crate::structure::{StructureError, StructureFunction};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Meters per lattice cell; segment lengths must be exact multiples.
pub const CELL_METERS: f64 = 2.5;

const BUNDLED_SCENARIO: &str = include_str!("../scenarios/zdunska-wola.toml");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {found}, this build reads version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("scenario declares no segments")]
    NoSegments,
    #[error("duplicate segment id {0}")]
    DuplicateSegment(u32),
    #[error("segment {id} ({name}): length {length_m} m is not a whole number of {CELL_METERS} m cells")]
    NonIntegralLength { id: u32, name: String, length_m: f64 },
    #[error("{context} references undeclared segment {id}")]
    UnknownSegment { context: &'static str, id: u32 },
    #[error("segment {id} ({name}): {message}")]
    InvalidSegment { id: u32, name: String, message: String },
    #[error("routes do not match the minimal path sets: {0}")]
    RoutesMismatch(String),
    #[error("satisfaction parameter {name} must be positive, got {value}")]
    InvalidSatisfaction { name: &'static str, value: f64 },
    #[error("sweep configuration invalid: {0}")]
    InvalidSweep(String),
    #[error("simulation parameters invalid: {0}")]
    InvalidSimParams(String),
    #[error("structure invalid: {0}")]
    Structure(#[from] StructureError),
}

/// Satisfaction-model parameters carried by the scenario.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SatisfactionParams {
    pub lambda: f64,
    pub k: f64,
}

impl Default for SatisfactionParams {
    fn default() -> Self {
        Self { lambda: 30.0, k: 2.92 }
    }
}

/// Intensity grid and experiment bookkeeping for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub intensity_start: f64,
    pub intensity_stop: f64,
    pub intensity_step: f64,
    pub replications: u32,
    pub seed: u64,
    /// Vehicles entering during this initial span are discarded.
    pub warmup_steps: u64,
    /// Measured span following the warm-up.
    pub measure_steps: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            intensity_start: 0.050,
            intensity_stop: 0.600,
            intensity_step: 0.025,
            replications: 1000,
            seed: 42,
            warmup_steps: 500,
            measure_steps: 2000,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |m: String| Err(ScenarioError::InvalidSweep(m));
        if !(self.intensity_step > 0.0) {
            return err(format!("intensity_step {} must be positive", self.intensity_step));
        }
        if self.intensity_start > self.intensity_stop {
            return err(format!(
                "intensity_start {} exceeds intensity_stop {}",
                self.intensity_start, self.intensity_stop
            ));
        }
        if !(0.0..=1.0).contains(&self.intensity_start)
            || !(0.0..=1.0).contains(&self.intensity_stop)
        {
            return err("intensities must lie in [0,1]".into());
        }
        if self.replications == 0 {
            return err("replications must be at least 1".into());
        }
        if self.measure_steps == 0 {
            return err("measure_steps must be at least 1".into());
        }
        Ok(())
    }

    /// The intensity grid, inclusive of both endpoints.
    pub fn intensities(&self) -> Vec<f64> {
        let n = ((self.intensity_stop - self.intensity_start) / self.intensity_step + 0.5)
            .floor() as usize;
        (0..=n)
            .map(|i| self.intensity_start + i as f64 * self.intensity_step)
            .filter(|&x| x <= self.intensity_stop + 1e-12)
            .collect()
    }
}

/// An independent conflicting vehicle stream at a segment's end.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConflictStreamSpec {
    pub rule: ConflictRule,
    /// Route choices of the subject segment this stream constrains.
    pub applies_to: Vec<RouteChoice>,
    #[serde(default = "default_conflict_length")]
    pub length_m: f64,
}

fn default_conflict_length() -> f64 {
    500.0
}

impl ConflictStreamSpec {
    pub fn applies_mask(&self) -> [bool; 3] {
        let mut mask = [false; 3];
        for route in &self.applies_to {
            match route {
                RouteChoice::Straight => mask[0] = true,
                RouteChoice::Left => mask[1] = true,
                RouteChoice::Right => mask[2] = true,
            }
        }
        mask
    }

    pub fn length_cells(&self) -> i64 {
        (self.length_m / CELL_METERS).round() as i64
    }
}

/// One road segment of the network.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub id: u32,
    pub name: String,
    pub length_m: f64,
    pub maneuver: ManeuverSpec,
    #[serde(default)]
    pub light: Option<TrafficLight>,
    #[serde(default)]
    pub conflicts: Vec<ConflictStreamSpec>,
}

impl Segment {
    pub fn length_cells(&self) -> i64 {
        (self.length_m / CELL_METERS).round() as i64
    }
}

/// Minimal path sets over segment ids.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StructureSpec {
    pub min_paths: Vec<Vec<u32>>,
}

/// A named route; must coincide with one of the minimal paths.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RouteSpec {
    pub name: String,
    pub segments: Vec<u32>,
}

/// A validated network description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub satisfaction: SatisfactionParams,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub segments: Vec<Segment>,
    pub structure: StructureSpec,
    #[serde(default)]
    pub routes: Vec<RouteSpec>,
}

impl Scenario {
    /// Parse and validate a scenario from TOML text.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Load and validate a scenario file.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The city network the tool ships with: 12 segments, 4 routes.
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_SCENARIO).expect("bundled scenario must be valid")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::UnsupportedVersion {
                found: self.schema_version,
                supported: SCHEMA_VERSION,
            });
        }
        if self.segments.is_empty() {
            return Err(ScenarioError::NoSegments);
        }
        let mut ids = BTreeSet::new();
        for seg in &self.segments {
            if !ids.insert(seg.id) {
                return Err(ScenarioError::DuplicateSegment(seg.id));
            }
            let cells = seg.length_m / CELL_METERS;
            if (cells - cells.round()).abs() > 1e-9 || cells < 1.0 {
                return Err(ScenarioError::NonIntegralLength {
                    id: seg.id,
                    name: seg.name.clone(),
                    length_m: seg.length_m,
                });
            }
            let invalid = |message: String| ScenarioError::InvalidSegment {
                id: seg.id,
                name: seg.name.clone(),
                message,
            };
            seg.maneuver.validate().map_err(|e| invalid(e.to_string()))?;
            let signalized = matches!(
                seg.maneuver.kind,
                ManeuverKind::SignalizedStraight | ManeuverKind::SignalizedLeftCross
            );
            if signalized && seg.light.is_none() {
                return Err(invalid("signalized maneuver without a light schedule".into()));
            }
            if !signalized && seg.light.is_some() {
                return Err(invalid("light schedule on an unsignalized maneuver".into()));
            }
            if let Some(light) = &seg.light {
                if light.offset >= crate::intersection::LIGHT_CYCLE_SECONDS {
                    return Err(invalid(format!(
                        "light offset {} outside the {} s cycle",
                        light.offset,
                        crate::intersection::LIGHT_CYCLE_SECONDS
                    )));
                }
            }
            for stream in &seg.conflicts {
                let c = stream.length_m / CELL_METERS;
                if (c - c.round()).abs() > 1e-9 || c < 1.0 {
                    return Err(invalid(format!(
                        "conflict stream length {} m is not a whole number of cells",
                        stream.length_m
                    )));
                }
                if stream.applies_to.is_empty() {
                    return Err(invalid("conflict stream constrains no routes".into()));
                }
            }
        }
        self.sim.validate().map_err(ScenarioError::InvalidSimParams)?;
        if !(self.satisfaction.lambda > 0.0) {
            return Err(ScenarioError::InvalidSatisfaction {
                name: "lambda",
                value: self.satisfaction.lambda,
            });
        }
        if !(self.satisfaction.k > 0.0) {
            return Err(ScenarioError::InvalidSatisfaction {
                name: "k",
                value: self.satisfaction.k,
            });
        }
        self.sweep.validate()?;
        if self.structure.min_paths.is_empty() {
            return Err(ScenarioError::Structure(StructureError::NoPaths));
        }
        for path in &self.structure.min_paths {
            for &id in path {
                if !ids.contains(&id) {
                    return Err(ScenarioError::UnknownSegment { context: "structure", id });
                }
            }
        }
        for route in &self.routes {
            for &id in &route.segments {
                if !ids.contains(&id) {
                    return Err(ScenarioError::UnknownSegment { context: "routes", id });
                }
            }
        }
        if !self.routes.is_empty() {
            let paths: BTreeSet<BTreeSet<u32>> = self
                .structure
                .min_paths
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect();
            let routes: BTreeSet<BTreeSet<u32>> =
                self.routes.iter().map(|r| r.segments.iter().copied().collect()).collect();
            if paths != routes {
                return Err(ScenarioError::RoutesMismatch(format!(
                    "{} paths vs {} distinct routes",
                    paths.len(),
                    routes.len()
                )));
            }
        }
        // the structure itself must be constructible
        self.structure_function()?;
        Ok(())
    }

    /// Segment ids in ascending order; component index = position here.
    pub fn segment_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.segments.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Map from segment id to component index.
    pub fn id_to_index(&self) -> BTreeMap<u32, usize> {
        self.segment_ids().into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    }

    /// Segments sorted by id, parallel to the component indexing.
    pub fn segments_by_id(&self) -> Vec<&Segment> {
        let mut segs: Vec<&Segment> = self.segments.iter().collect();
        segs.sort_by_key(|s| s.id);
        segs
    }

    /// The coherent structure over component indices.
    pub fn structure_function(&self) -> Result<StructureFunction, StructureError> {
        let index = self.id_to_index();
        let paths: Vec<Vec<usize>> = self
            .structure
            .min_paths
            .iter()
            .map(|p| p.iter().map(|id| index[id]).collect())
            .collect();
        StructureFunction::from_paths(self.segments.len(), paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_loads_and_validates() {
        let scenario = Scenario::bundled();
        assert_eq!(scenario.segments.len(), 12);
        assert_eq!(scenario.structure.min_paths.len(), 4);
        assert_eq!(scenario.routes.len(), 4);
        let phi = scenario.structure_function().unwrap();
        assert_eq!(phi.min_paths().len(), 4);
    }

    #[test]
    fn bundled_lengths_match_city_table() {
        let scenario = Scenario::bundled();
        let by_id = scenario.segments_by_id();
        let expected = [
            (1, "Dolna", 120),
            (2, "Zlota", 140),
            (3, "Mickiewicza", 200),
            (4, "Piwna 1", 180),
            (5, "Nyska 1", 64),
            (6, "Zlotnickiego", 200),
            (7, "Piwna 2", 72),
            (8, "Jasna", 160),
            (9, "Nyska 2", 80),
            (10, "Laska", 200),
            (11, "Sieradzka 1", 200),
            (12, "Sieradzka 2", 200),
        ];
        for ((id, name, cells), seg) in expected.iter().zip(by_id) {
            assert_eq!(seg.id, *id);
            assert_eq!(seg.name, *name);
            assert_eq!(seg.length_cells(), *cells, "{name}");
        }
    }

    #[test]
    fn minimal_single_segment_scenario() {
        let text = r#"
            schema_version = 1
            name = "tiny"
            [structure]
            min_paths = [[7]]
            [[segments]]
            id = 7
            name = "only"
            length_m = 100.0
            maneuver = { kind = "straight_priority" }
        "#;
        let scenario = Scenario::from_toml(text).unwrap();
        assert_eq!(scenario.segments[0].length_cells(), 40);
        let phi = scenario.structure_function().unwrap();
        assert_eq!(phi.component_count(), 1);
    }

    #[test]
    fn undeclared_segment_in_structure_is_rejected() {
        let text = r#"
            schema_version = 1
            name = "bad"
            [structure]
            min_paths = [[7, 13]]
            [[segments]]
            id = 7
            name = "only"
            length_m = 100.0
            maneuver = { kind = "straight_priority" }
        "#;
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownSegment { id: 13, .. }), "{err}");
    }

    #[test]
    fn non_integral_length_is_rejected() {
        let text = r#"
            schema_version = 1
            name = "bad"
            [structure]
            min_paths = [[1]]
            [[segments]]
            id = 1
            name = "odd"
            length_m = 101.0
            maneuver = { kind = "straight_priority" }
        "#;
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(matches!(err, ScenarioError::NonIntegralLength { id: 1, .. }), "{err}");
    }

    #[test]
    fn route_path_mismatch_is_rejected() {
        let text = r#"
            schema_version = 1
            name = "bad"
            [structure]
            min_paths = [[1]]
            [[routes]]
            name = "r"
            segments = [2]
            [[segments]]
            id = 1
            name = "a"
            length_m = 100.0
            maneuver = { kind = "straight_priority" }
            [[segments]]
            id = 2
            name = "b"
            length_m = 100.0
            maneuver = { kind = "straight_priority" }
        "#;
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(matches!(err, ScenarioError::RoutesMismatch(_)), "{err}");
    }

    #[test]
    fn future_schema_version_is_rejected() {
        let text = r#"
            schema_version = 2
            name = "future"
            [structure]
            min_paths = [[1]]
            [[segments]]
            id = 1
            name = "a"
            length_m = 100.0
            maneuver = { kind = "straight_priority" }
        "#;
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(matches!(err, ScenarioError::UnsupportedVersion { found: 2, .. }), "{err}");
    }

    #[test]
    fn signalized_segment_requires_light() {
        let text = r#"
            schema_version = 1
            name = "bad"
            [structure]
            min_paths = [[1]]
            [[segments]]
            id = 1
            name = "a"
            length_m = 100.0
            maneuver = { kind = "signalized_straight" }
        "#;
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(matches!(err, ScenarioError::InvalidSegment { .. }), "{err}");
    }

    #[test]
    fn default_sweep_grid_has_23_points() {
        let grid = SweepConfig::default().intensities();
        assert_eq!(grid.len(), 23);
        assert!((grid[0] - 0.050).abs() < 1e-12);
        assert!((grid[22] - 0.600).abs() < 1e-12);
        for pair in grid.windows(2) {
            assert!((pair[1] - pair[0] - 0.025).abs() < 1e-12);
        }
    }

    #[test]
    fn scenario_roundtrips_through_toml() {
        let scenario = Scenario::bundled();
        let text = toml::to_string(&scenario).unwrap();
        let again = Scenario::from_toml(&text).unwrap();
        assert_eq!(scenario, again);
    }
}
