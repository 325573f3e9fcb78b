//! Single-lane cellular-automaton traffic simulator with safe-distance
//! driving rules, limited acceleration/braking, and open boundaries.
//!
//! The road is a row of 2.5 m cells; a vehicle occupies two cells and is
//! addressed by its front bumper. Each global step runs: parallel speed
//! update from the time-t state, position update, exit bookkeeping, then one
//! spawn attempt at the entry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// Simulation parameters in cell/step units (1 cell = 2.5 m, 1 step = 1 s).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Maximum speed in cells/step (5 = 45 km/h).
    pub v_max: u8,
    /// Acceleration per step in cells/step^2.
    pub delta_v: u8,
    /// Emergency deceleration in cells/step^2 (2 = 5 m/s^2).
    pub emergency_decel: u8,
    /// Acceleration probability at standstill.
    pub accel_prob_standing: f64,
    /// Acceleration probability at or above the threshold speed.
    pub accel_prob_fast: f64,
    /// Speed above which acceleration comes easily (3 = 27 km/h).
    pub threshold_speed: u8,
    /// Random-slowdown probability. Not fixed by the traffic model here;
    /// 0.1 keeps a small but nonzero disturbance level.
    pub random_slow_prob: f64,
    /// Vehicle length in cells (2 = 5 m).
    pub vehicle_len: i64,
    /// Cell length in meters.
    pub cell_meters: f64,
    /// Step duration in seconds.
    pub step_seconds: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            v_max: 5,
            delta_v: 1,
            emergency_decel: 2,
            accel_prob_standing: 0.8,
            accel_prob_fast: 1.0,
            threshold_speed: 3,
            random_slow_prob: 0.1,
            vehicle_len: 2,
            cell_meters: 2.5,
            step_seconds: 1.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta_v > 0 && self.delta_v <= self.emergency_decel) {
            return Err(format!(
                "need 0 < delta_v <= M, got delta_v={} M={}",
                self.delta_v, self.emergency_decel
            ));
        }
        if self.emergency_decel > self.v_max {
            return Err(format!(
                "need M <= v_max, got M={} v_max={}",
                self.emergency_decel, self.v_max
            ));
        }
        for (name, p) in [
            ("accel_prob_standing", self.accel_prob_standing),
            ("accel_prob_fast", self.accel_prob_fast),
            ("random_slow_prob", self.random_slow_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} outside [0,1]"));
            }
        }
        if self.vehicle_len < 1 {
            return Err(format!("vehicle_len must be >= 1, got {}", self.vehicle_len));
        }
        Ok(())
    }
}

/// Stopping distance of a vehicle braking with maximum force from `v`:
/// the sum `v + (v - M) + (v - 2M) + ...` over non-negative terms.
/// Negative speeds contribute nothing.
fn stopping_distance(v: i64, decel: i64) -> i64 {
    if v < 0 {
        return 0;
    }
    let terms = v / decel + 1;
    (0..terms).map(|i| v - i * decel).sum()
}

/// Gaps needed to safely accelerate, keep speed, or brake gently, given the
/// leader may brake with maximum force until stopped.
///
/// The hypothetical accelerated speed is clamped to `v_max`; speed arguments
/// that go negative yield empty sums.
pub fn safe_distances(v_n: u8, v_next: u8, params: &SimParams) -> (i64, i64, i64) {
    let m = i64::from(params.emergency_decel);
    let dv = i64::from(params.delta_v);
    let v = i64::from(v_n);
    let leader = stopping_distance(i64::from(v_next) - m, m);
    let accelerated = (v + dv).min(i64::from(params.v_max));
    let d_acc = (stopping_distance(accelerated, m) - leader).max(0);
    let d_keep = (stopping_distance(v, m) - leader).max(0);
    let d_dec = (stopping_distance(v - dv, m) - leader).max(0);
    (d_acc, d_keep, d_dec)
}

/// Probability of acceleration at speed `v`: linear from the standstill
/// probability up to the fast probability at the threshold speed.
pub fn acceleration_probability(v: u8, params: &SimParams) -> f64 {
    let r0 = params.accel_prob_standing;
    let rd = params.accel_prob_fast;
    let ramp = r0 + f64::from(v) * (rd - r0) / f64::from(params.threshold_speed);
    ramp.min(rd)
}

/// Direction a vehicle takes at the end of its road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteChoice {
    Straight,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vehicle {
    pub id: u64,
    /// Front-bumper cell index.
    pub position: i64,
    pub velocity: u8,
    pub entry_step: u64,
    pub route: RouteChoice,
}

impl Vehicle {
    /// Rear-bumper cell index.
    pub fn rear(&self, params: &SimParams) -> i64 {
        self.position - params.vehicle_len + 1
    }
}

/// Travel record of a vehicle that left the road.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitRecord {
    pub id: u64,
    pub entry_step: u64,
    pub exit_step: u64,
    pub route: RouteChoice,
}

impl ExitRecord {
    pub fn travel_time(&self) -> u64 {
        self.exit_step - self.entry_step
    }
}

/// Per-step constraints imposed by the road end (intersection rules, lights).
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Front vehicle may leave through the far end this step.
    pub front_may_exit: bool,
    /// Approach speed cap near the stop line, for matching route choices.
    pub slow_to: Option<u8>,
    /// Route choices the cap applies to; empty means all.
    pub slow_routes: [bool; 3],
    /// Per-step probability of a spawn attempt at the entry.
    pub spawn_intensity: f64,
}

impl StepControl {
    /// Free-flowing open road.
    pub fn free(spawn_intensity: f64) -> Self {
        Self {
            front_may_exit: true,
            slow_to: None,
            slow_routes: [true; 3],
            spawn_intensity,
        }
    }

    fn cap_applies(&self, route: RouteChoice) -> bool {
        match route {
            RouteChoice::Straight => self.slow_routes[0],
            RouteChoice::Left => self.slow_routes[1],
            RouteChoice::Right => self.slow_routes[2],
        }
    }
}

/// Precomputed safe-distance triples indexed by (follower, leader) speed.
#[derive(Debug, Clone)]
struct SafeDistanceTable {
    table: Vec<(i64, i64, i64)>,
    width: usize,
}

impl SafeDistanceTable {
    fn new(params: &SimParams) -> Self {
        let width = usize::from(params.v_max) + 1;
        let mut table = Vec::with_capacity(width * width);
        for v_n in 0..width {
            for v_next in 0..width {
                table.push(safe_distances(v_n as u8, v_next as u8, params));
            }
        }
        Self { table, width }
    }

    #[inline]
    fn get(&self, v_n: u8, v_next: u8) -> (i64, i64, i64) {
        self.table[usize::from(v_n) * self.width + usize::from(v_next)]
    }
}

/// A single-lane road with open boundaries and a deterministic per-road RNG.
///
/// Vehicles are kept ordered front (index 0) to rear; the no-overlap
/// invariant is checked after every position update.
#[derive(Debug, Clone)]
pub struct Road {
    pub length_cells: i64,
    params: SimParams,
    table: SafeDistanceTable,
    vehicles: VecDeque<Vehicle>,
    rng: ChaCha8Rng,
    step: u64,
    next_id: u64,
    /// Probabilities for (straight, left, right) route choices at spawn.
    route_probs: [f64; 3],
    exits: Vec<ExitRecord>,
    new_velocities: Vec<u8>,
    emergency_events: u64,
    blocked_spawns: u64,
}

impl Road {
    pub fn new(length_cells: i64, params: SimParams, seed: u64) -> Self {
        params.validate().expect("invalid simulation parameters");
        Self {
            length_cells,
            table: SafeDistanceTable::new(&params),
            params,
            vehicles: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
            next_id: 0,
            route_probs: [1.0, 0.0, 0.0],
            exits: Vec::new(),
            new_velocities: Vec::new(),
            emergency_events: 0,
            blocked_spawns: 0,
        }
    }

    pub fn with_route_probs(mut self, straight: f64, left: f64, right: f64) -> Self {
        let sum = straight + left + right;
        assert!((sum - 1.0).abs() < 1e-9, "route probabilities must sum to 1");
        self.route_probs = [straight, left, right];
        self
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.iter()
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    /// Front vehicle (closest to the exit), if any.
    pub fn front(&self) -> Option<&Vehicle> {
        self.vehicles.front()
    }

    /// Cells between the front vehicle's bumper and the stop line.
    pub fn front_distance_to_line(&self) -> Option<i64> {
        self.front().map(|v| self.length_cells - 1 - v.position)
    }

    /// Number of emergency-braking applications so far.
    pub fn emergency_events(&self) -> u64 {
        self.emergency_events
    }

    /// Spawn attempts dropped because the entry cells were occupied.
    pub fn blocked_spawns(&self) -> u64 {
        self.blocked_spawns
    }

    /// Completed travel records; drained by the caller.
    pub fn drain_exits(&mut self) -> Vec<ExitRecord> {
        std::mem::take(&mut self.exits)
    }

    /// Gap from follower `n` to its leader: front-to-rear distance in cells.
    pub fn gap(&self, follower: &Vehicle, leader: &Vehicle) -> i64 {
        let gap = leader.position - follower.position - self.params.vehicle_len;
        debug_assert!(gap >= 0, "vehicle ordering violated");
        gap
    }

    /// Places a vehicle directly; test and warm-start helper.
    pub fn insert_vehicle(&mut self, position: i64, velocity: u8, route: RouteChoice) {
        let vehicle = Vehicle {
            id: self.next_id,
            position,
            velocity,
            entry_step: self.step,
            route,
        };
        self.next_id += 1;
        let idx = self
            .vehicles
            .iter()
            .position(|v| v.position < position)
            .unwrap_or(self.vehicles.len());
        self.vehicles.insert(idx, vehicle);
        self.assert_no_overlap();
    }

    /// Distance consumed before the speed first drops to `cap` when braking
    /// by delta_v each step, starting from speed `v`.
    fn distance_to_reach_cap(&self, v: i64, cap: i64) -> i64 {
        let dv = i64::from(self.params.delta_v);
        let mut dist = 0;
        let mut speed = v;
        while speed > cap {
            dist += speed;
            speed -= dv;
        }
        dist
    }

    /// Largest admissible speed so the vehicle can still pass the stop line
    /// at or below `cap`, given `dist` cells remain.
    fn approach_cap(&self, dist: i64, cap: i64) -> i64 {
        let mut best = cap;
        for w in (cap + 1)..=i64::from(self.params.v_max) {
            if self.distance_to_reach_cap(w, cap) <= dist {
                best = w;
            }
        }
        best
    }

    /// One global step: parallel speed update, position update, exit
    /// bookkeeping, then a spawn attempt.
    pub fn step(&mut self, ctrl: &StepControl) {
        self.update_velocities(ctrl);
        self.update_positions();
        self.spawn(ctrl);
        self.step += 1;
    }

    fn update_velocities(&mut self, ctrl: &StepControl) {
        let params = self.params;
        let m = params.emergency_decel;
        let dv = params.delta_v;
        self.new_velocities.clear();
        for idx in 0..self.vehicles.len() {
            let vehicle = self.vehicles[idx];
            // leader state: the vehicle ahead, a virtual blocker at the stop
            // line, or free road
            let (gap, leader_v) = if idx > 0 {
                let leader = self.vehicles[idx - 1];
                (self.gap(&vehicle, &leader), leader.velocity)
            } else if ctrl.front_may_exit {
                (i64::MAX, params.v_max)
            } else {
                // stationary blocker whose rear bumper sits just past the end
                (self.length_cells - 1 - vehicle.position, 0)
            };
            let (d_acc, d_keep, d_dec) = self.table.get(vehicle.velocity, leader_v);
            let v = vehicle.velocity;
            let mut new_v = if gap > d_acc {
                let r_a = acceleration_probability(v, &params);
                if r_a >= 1.0 || self.rng.gen::<f64>() < r_a {
                    (v + dv).min(params.v_max)
                } else {
                    v
                }
            } else if gap >= d_keep {
                if self.rng.gen::<f64>() < params.random_slow_prob {
                    v.saturating_sub(dv)
                } else {
                    v
                }
            } else if gap >= d_dec {
                v.saturating_sub(dv)
            } else {
                self.emergency_events += 1;
                v.saturating_sub(m)
            };
            // mandatory slow-down near the stop line for yielding maneuvers;
            // applies even to a released front vehicle so turns happen at the
            // capped speed
            if let Some(cap) = ctrl.slow_to {
                if ctrl.cap_applies(vehicle.route) {
                    let dist = self.length_cells - 1 - vehicle.position;
                    let allowed = self.approach_cap(dist.max(0), i64::from(cap));
                    let floor = i64::from(v) - i64::from(m);
                    new_v = new_v.min(allowed.max(floor).max(0) as u8);
                }
            }
            self.new_velocities.push(new_v);
        }
        for (vehicle, &nv) in self.vehicles.iter_mut().zip(&self.new_velocities) {
            vehicle.velocity = nv;
        }
    }

    fn update_positions(&mut self) {
        for vehicle in self.vehicles.iter_mut() {
            vehicle.position += i64::from(vehicle.velocity);
        }
        while let Some(front) = self.vehicles.front() {
            if front.position >= self.length_cells {
                let v = self.vehicles.pop_front().expect("front exists");
                self.exits.push(ExitRecord {
                    id: v.id,
                    entry_step: v.entry_step,
                    exit_step: self.step + 1,
                    route: v.route,
                });
            } else {
                break;
            }
        }
        self.assert_no_overlap();
    }

    fn spawn(&mut self, ctrl: &StepControl) {
        if self.rng.gen::<f64>() >= ctrl.spawn_intensity {
            return;
        }
        let entry_front = self.params.vehicle_len - 1;
        let entry_speed = 2u8.min(self.params.v_max);
        if let Some(last) = self.vehicles.back() {
            let gap = last.rear(&self.params) - entry_front - 1;
            let (_, d_keep, _) = self.table.get(entry_speed, last.velocity);
            if gap < d_keep {
                self.blocked_spawns += 1;
                return; // entry blocked; attempt dropped, not queued
            }
        } else if self.length_cells < self.params.vehicle_len {
            self.blocked_spawns += 1;
            return;
        }
        let route = self.draw_route();
        let vehicle = Vehicle {
            id: self.next_id,
            position: entry_front,
            velocity: entry_speed,
            entry_step: self.step + 1,
            route,
        };
        self.next_id += 1;
        self.vehicles.push_back(vehicle);
    }

    fn draw_route(&mut self) -> RouteChoice {
        let draw = self.rng.gen::<f64>();
        if draw < self.route_probs[0] {
            RouteChoice::Straight
        } else if draw < self.route_probs[0] + self.route_probs[1] {
            RouteChoice::Left
        } else {
            RouteChoice::Right
        }
    }

    fn assert_no_overlap(&self) {
        for pair in 0..self.vehicles.len().saturating_sub(1) {
            let leader = &self.vehicles[pair];
            let follower = &self.vehicles[pair + 1];
            assert!(
                leader.rear(&self.params) > follower.position,
                "cell overlap at step {}: leader rear {} follower front {}",
                self.step,
                leader.rear(&self.params),
                follower.position
            );
        }
    }
}
