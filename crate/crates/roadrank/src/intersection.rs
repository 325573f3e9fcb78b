//! Right-of-way control at road ends: merging into a priority road,
//! crossing opposing traffic, mandatory slow-downs, and traffic lights.
//!
//! Waiting is enforced through a virtual stationary blocker at the stop
//! line, so the car-following rules brake approaching vehicles naturally.

use crate::sim::{safe_distances, Road, RouteChoice, SimParams, StepControl};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntersectionError {
    #[error("crossing speed {0} exceeds 2; the maneuver requires slowing down first")]
    CrossingTooFast(u8),
    #[error("slow_to must be 0, 1 or 2, got {0}")]
    InvalidSlowTo(u8),
    #[error("branch probabilities sum to {0}, expected 1")]
    UnnormalizedBranches(f64),
}

/// Whether a vehicle waiting at the stop line may join the priority road,
/// given the nearest upstream priority-road vehicle at distance `l_x` cells
/// with speed `v_x`.
///
/// The inequality is evaluated verbatim in cell units:
/// `l_x - v_x - sum_{dv=2}^{v_max} min(v_max, v_x + dv - 1)
///  + sum_{dv=2}^{v_max} dv > d_keep_x`,
/// where `d_keep_x` is the keep-speed safe distance of the priority-road
/// vehicle with the merging vehicle's projected entry state as its leader.
pub fn can_merge(l_x: i64, v_x: u8, params: &SimParams, d_keep_x: i64) -> bool {
    let v_max = i64::from(params.v_max);
    let v = i64::from(v_x);
    let mut lhs = l_x - v;
    for dv in 2..=v_max {
        lhs -= v_max.min(v + dv - 1);
        lhs += dv;
    }
    lhs > d_keep_x
}

/// Seconds the junction stays occupied while a vehicle at speed `v_n`
/// crosses the opposing road.
pub fn crossing_time(v_n: u8) -> Result<u8, IntersectionError> {
    match v_n {
        2 => Ok(1),
        1 => Ok(2),
        0 => Ok(3),
        v => Err(IntersectionError::CrossingTooFast(v)),
    }
}

/// Whether a slowed vehicle at speed `v_n` may cross the opposing road,
/// given the nearest opposing vehicle at distance `l_x` with speed `v_x`.
///
/// `l_x - sum_{dv=0}^{tau_n} min(v_max, v_x + dv - 1) > d_dec_x`, with the
/// crossing duration `tau_n` looked up from `v_n`.
pub fn can_cross(
    l_x: i64,
    v_x: u8,
    v_n: u8,
    params: &SimParams,
    d_dec_x: i64,
) -> Result<bool, IntersectionError> {
    let tau = i64::from(crossing_time(v_n)?);
    let v_max = i64::from(params.v_max);
    let v = i64::from(v_x);
    let mut lhs = l_x;
    for dv in 0..=tau {
        lhs -= v_max.min(v + dv - 1).max(0);
    }
    Ok(lhs > d_dec_x)
}

/// Signal phases of the fixed 124 s cycle:
/// red 60 s, red-yellow 1 s, green 60 s, yellow 3 s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LightState {
    Red,
    RedYellow,
    Green,
    Yellow,
}

pub const LIGHT_CYCLE_SECONDS: u64 = 124;

/// A traffic light with the fixed phase schedule and a phase offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TrafficLight {
    /// Seconds by which the cycle is shifted; must lie in [0, 124).
    pub offset: u64,
}

impl TrafficLight {
    pub fn new(offset: u64) -> Self {
        assert!(offset < LIGHT_CYCLE_SECONDS, "offset {offset} outside cycle");
        Self { offset }
    }

    pub fn state(&self, step: u64) -> LightState {
        match (step + self.offset) % LIGHT_CYCLE_SECONDS {
            0..=59 => LightState::Red,
            60 => LightState::RedYellow,
            61..=120 => LightState::Green,
            _ => LightState::Yellow,
        }
    }
}

/// Distance a vehicle needs to stop with comfortable braking (delta_v per
/// step): `sum_{i>=1} max(v - i*delta_v, 0)`.
fn comfortable_stop_distance(v: u8, params: &SimParams) -> i64 {
    let dv = i64::from(params.delta_v);
    let mut dist = 0;
    let mut speed = i64::from(v) - dv;
    while speed > 0 {
        dist += speed;
        speed -= dv;
    }
    dist
}

/// Whether a vehicle approaching the stop line may pass the signal.
///
/// Green allows entry; red and red-yellow never do. On yellow a vehicle
/// passes only when stopping before the line would require braking harder
/// than the comfortable rate.
pub fn may_pass_light(
    state: LightState,
    velocity: u8,
    distance_to_line: i64,
    params: &SimParams,
) -> bool {
    match state {
        LightState::Green => true,
        LightState::Red | LightState::RedYellow => false,
        LightState::Yellow => comfortable_stop_distance(velocity, params) > distance_to_line,
    }
}

/// The maneuver a road's traffic performs at its far end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverKind {
    MergeRight,
    MergeLeftCross,
    TurnWithPriority,
    StraightPriority,
    SignalizedStraight,
    SignalizedLeftCross,
}

/// Probabilities of the turn directions taken at the end of the road.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BranchProbabilities {
    pub straight: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for BranchProbabilities {
    fn default() -> Self {
        Self { straight: 1.0, left: 0.0, right: 0.0 }
    }
}

impl BranchProbabilities {
    pub fn validate(&self) -> Result<(), IntersectionError> {
        let sum = self.straight + self.left + self.right;
        if (sum - 1.0).abs() > 1e-9 || self.straight < 0.0 || self.left < 0.0 || self.right < 0.0 {
            return Err(IntersectionError::UnnormalizedBranches(sum));
        }
        Ok(())
    }
}

/// End-of-road maneuver description.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ManeuverSpec {
    pub kind: ManeuverKind,
    /// Mandatory approach speed cap for yielding routes (0, 1 or 2).
    pub slow_to: Option<u8>,
    #[serde(default)]
    pub branch_probabilities: BranchProbabilities,
}

impl ManeuverSpec {
    pub fn validate(&self) -> Result<(), IntersectionError> {
        if let Some(s) = self.slow_to {
            if s > 2 {
                return Err(IntersectionError::InvalidSlowTo(s));
            }
        }
        self.branch_probabilities.validate()
    }

    pub fn straight_priority() -> Self {
        Self {
            kind: ManeuverKind::StraightPriority,
            slow_to: None,
            branch_probabilities: BranchProbabilities::default(),
        }
    }

    /// Routes that must obey the approach speed cap near the stop line.
    fn slow_routes(&self) -> [bool; 3] {
        match self.kind {
            ManeuverKind::StraightPriority | ManeuverKind::SignalizedStraight => [false; 3],
            ManeuverKind::MergeRight | ManeuverKind::MergeLeftCross => [true; 3],
            // through traffic keeps priority; every turner slows down
            ManeuverKind::TurnWithPriority => [false, true, true],
            ManeuverKind::SignalizedLeftCross => [false, true, false],
        }
    }
}

/// Which right-of-way rule a conflict stream imposes on which routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictRule {
    /// The subject vehicle merges into this stream (Rule 1).
    Merge,
    /// The subject vehicle crosses this stream (Rule 2).
    Cross,
}

/// An independent priority/opposing vehicle stream observed at the junction.
///
/// The stream runs the same car-following model with its own RNG and flows
/// freely through the junction; only its nearest vehicle to the conflict
/// point is inspected by the rules.
#[derive(Debug, Clone)]
pub struct ConflictStream {
    road: Road,
    intensity: f64,
    rule: ConflictRule,
    /// Routes of the subject road this stream constrains.
    applies_to: [bool; 3],
}

impl ConflictStream {
    pub fn new(
        length_cells: i64,
        params: SimParams,
        seed: u64,
        intensity: f64,
        rule: ConflictRule,
        applies_to: [bool; 3],
    ) -> Self {
        Self {
            road: Road::new(length_cells, params, seed),
            intensity,
            rule,
            applies_to,
        }
    }

    fn step(&mut self) {
        self.road.step(&StepControl::free(self.intensity));
        self.road.drain_exits();
    }

    /// Nearest vehicle upstream of the conflict point: (distance, speed).
    fn observe(&self) -> Option<(i64, u8)> {
        self.road
            .front()
            .map(|v| (self.road.length_cells - 1 - v.position, v.velocity))
    }
}

/// One recorded right-of-way decision, for invariant audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionEvent {
    pub step: u64,
    pub rule: ConflictRule,
    pub granted: bool,
    pub subject_speed: u8,
}

/// A road coupled to its end-of-road maneuver, optional signal, and
/// conflict streams. Each step the controller decides whether the front
/// vehicle may leave, then advances the road and all streams one second.
#[derive(Debug)]
pub struct JunctionRoad {
    pub road: Road,
    maneuver: ManeuverSpec,
    light: Option<TrafficLight>,
    conflicts: Vec<ConflictStream>,
    log_decisions: bool,
    decisions: Vec<DecisionEvent>,
}

impl JunctionRoad {
    pub fn new(
        road: Road,
        maneuver: ManeuverSpec,
        light: Option<TrafficLight>,
        conflicts: Vec<ConflictStream>,
    ) -> Self {
        maneuver.validate().expect("invalid maneuver spec");
        let b = maneuver.branch_probabilities;
        let road = road.with_route_probs(b.straight, b.left, b.right);
        Self {
            road,
            maneuver,
            light,
            conflicts,
            log_decisions: false,
            decisions: Vec::new(),
        }
    }

    pub fn with_decision_log(mut self) -> Self {
        self.log_decisions = true;
        self
    }

    pub fn decisions(&self) -> &[DecisionEvent] {
        &self.decisions
    }

    pub fn maneuver(&self) -> &ManeuverSpec {
        &self.maneuver
    }

    /// Advance the junction-coupled system by one second.
    pub fn step(&mut self, spawn_intensity: f64) {
        let ctrl = self.control(spawn_intensity);
        self.road.step(&ctrl);
        for stream in &mut self.conflicts {
            stream.step();
        }
    }

    fn control(&mut self, spawn_intensity: f64) -> StepControl {
        let base = StepControl {
            front_may_exit: true,
            slow_to: self.maneuver.slow_to,
            slow_routes: self.maneuver.slow_routes(),
            spawn_intensity,
        };
        let front = match self.road.front() {
            Some(v) => *v,
            None => return base,
        };
        let dist = self.road.length_cells - 1 - front.position;

        // signal gate first: red blocks everything, yellow only lets a
        // vehicle through when it cannot stop comfortably any more
        if let Some(light) = self.light {
            let state = light.state(self.road.step_count());
            let passes = may_pass_light(state, front.velocity, dist, self.road.params());
            if self.log_decisions && dist <= i64::from(self.road.params().v_max) {
                self.decisions.push(DecisionEvent {
                    step: self.road.step_count(),
                    rule: ConflictRule::Cross,
                    granted: passes,
                    subject_speed: front.velocity,
                });
            }
            if !passes {
                return StepControl { front_may_exit: false, ..base };
            }
        }

        let route_idx = match front.route {
            RouteChoice::Straight => 0,
            RouteChoice::Left => 1,
            RouteChoice::Right => 2,
        };
        if !self.conflicts.iter().any(|s| s.applies_to[route_idx]) {
            return base;
        }

        // the yielding vehicle must first have slowed down at the line
        let speed_limit = self.maneuver.slow_to.unwrap_or(2).max(1);
        if front.velocity > speed_limit || dist > i64::from(speed_limit) {
            return StepControl { front_may_exit: false, ..base };
        }

        let params = *self.road.params();
        let mut granted = true;
        for stream in &self.conflicts {
            if !stream.applies_to[route_idx] {
                continue;
            }
            let ok = match stream.observe() {
                None => true,
                Some((l_x, v_x)) => match stream.rule {
                    ConflictRule::Merge => {
                        // projected entry at speed 1 as the main-road
                        // vehicle's new leader
                        let (_, d_keep_x, _) = safe_distances(v_x, 1, &params);
                        can_merge(l_x, v_x, &params, d_keep_x)
                    }
                    ConflictRule::Cross => {
                        // junction treated as blocked while occupied
                        let (_, _, d_dec_x) = safe_distances(v_x, 0, &params);
                        can_cross(l_x, v_x, front.velocity.min(2), &params, d_dec_x)
                            .expect("speed clamped to crossing range")
                    }
                },
            };
            if self.log_decisions {
                self.decisions.push(DecisionEvent {
                    step: self.road.step_count(),
                    rule: stream.rule,
                    granted: ok,
                    subject_speed: front.velocity,
                });
            }
            if !ok {
                granted = false;
            }
        }
        StepControl { front_may_exit: granted, ..base }
    }

    pub fn drain_exits(&mut self) -> Vec<crate::sim::ExitRecord> {
        self.road.drain_exits()
    }
}
