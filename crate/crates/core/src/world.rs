//! Wall-bounded 2D world with independently moving point obstacles.
//!
//! Obstacles never react to the agent, so the world can be simulated ahead of
//! the agent's clock. The trajectory log is the ground truth: a piecewise
//! linear track per obstacle with a breakpoint at every micro-step and at
//! every mid-step turn.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Segment};
use crate::seeds::{self, StreamRng};

/// Length of one observation interval; also the unit of time.
pub const OBSERVATION_INTERVAL: f64 = 1.0;

const PARABOLA_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub width: f64,
    pub height: f64,
}

impl MapSpec {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        let map = Self { width, height };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return Err(Error::Config(format!("map must have positive finite size, got {}x{}", self.width, self.height)));
        }
        Ok(())
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    /// Distance to the closest wall.
    pub fn wall_distance(&self, p: Point2) -> f64 {
        p.x.min(self.width - p.x).min(p.y).min(self.height - p.y).max(0.0)
    }

    fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    fn sample_point(&self, rng: &mut StreamRng) -> Point2 {
        Point2::new(rng.gen::<f64>() * self.width, rng.gen::<f64>() * self.height)
    }
}

/// Wall-proximity turning law for linear obstacles.
///
/// Per unit of time an obstacle at wall distance `d` picks a fresh target with
/// probability `clamp(1 - d / D, 0, 1) * p_max`, `D = range_fraction * diagonal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallTurn {
    pub range_fraction: f64,
    pub p_max: f64,
}

impl Default for WallTurn {
    fn default() -> Self {
        Self { range_fraction: 0.15, p_max: 0.5 }
    }
}

impl WallTurn {
    /// Turn probability per unit time.
    pub fn probability(&self, map: &MapSpec, p: Point2) -> f64 {
        let range = self.range_fraction * map.diagonal();
        if range <= 0.0 {
            return 0.0;
        }
        (1.0 - map.wall_distance(p) / range).clamp(0.0, 1.0) * self.p_max
    }

    /// Turn probability for a step of length `dt`, consistent across step sizes.
    pub fn step_probability(&self, map: &MapSpec, p: Point2, dt: f64) -> f64 {
        let per_unit = self.probability(map, p);
        1.0 - (1.0 - per_unit).powf(dt)
    }
}

/// Parabolic arc from `a` to `b`, bulging by `arc_height` along the left normal,
/// sampled as a fine polyline and parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicPath {
    pub a: Point2,
    pub b: Point2,
    pub arc_height: f64,
    vertices: Vec<Point2>,
    cumulative: Vec<f64>,
}

impl ParabolicPath {
    pub fn new(a: Point2, b: Point2, arc_height: f64) -> Self {
        let chord = b - a;
        let len = chord.norm();
        let normal = if len > 0.0 { Point2::new(-chord.y / len, chord.x / len) } else { Point2::new(0.0, 0.0) };
        let vertices: Vec<Point2> = (0..=PARABOLA_SAMPLES)
            .map(|i| {
                let s = i as f64 / PARABOLA_SAMPLES as f64;
                a.lerp(b, s) + normal * (arc_height * 4.0 * s * (1.0 - s))
            })
            .collect();
        let mut cumulative = Vec::with_capacity(vertices.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in vertices.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative.push(acc);
        }
        Self { a, b, arc_height, vertices, cumulative }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn apex(&self) -> Point2 {
        self.vertices[PARABOLA_SAMPLES / 2]
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    /// Point at arc-length fraction `f` in `[0, 1]`.
    pub fn point_at_fraction(&self, f: f64) -> Point2 {
        let total = self.length();
        if total == 0.0 {
            return self.a;
        }
        let target = f.clamp(0.0, 1.0) * total;
        let idx = self.cumulative.partition_point(|&c| c < target);
        if idx == 0 {
            return self.vertices[0];
        }
        if idx >= self.vertices.len() {
            return *self.vertices.last().expect("non-empty");
        }
        let (c0, c1) = (self.cumulative[idx - 1], self.cumulative[idx]);
        let s = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        self.vertices[idx - 1].lerp(self.vertices[idx], s)
    }

    pub fn inside(&self, map: &MapSpec) -> bool {
        self.vertices.iter().all(|&v| map.contains(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionModel {
    /// Never moves. Used for tests and stationary training populations.
    Stationary,
    LinearRandomTarget { target: Point2 },
    /// `phase` is the arc-length fraction from `a` towards `b`; the obstacle
    /// travels a -> b while `forward`, then back.
    ParabolicOscillator { path: ParabolicPath, phase: f64, forward: bool },
}

impl MotionModel {
    pub fn kind(&self) -> &'static str {
        match self {
            MotionModel::Stationary => "stationary",
            MotionModel::LinearRandomTarget { .. } => "linear",
            MotionModel::ParabolicOscillator { .. } => "parabolic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleState {
    pub id: usize,
    pub position: Point2,
    pub speed: f64,
    pub motion: MotionModel,
}

impl ObstacleState {
    pub fn stationary(id: usize, position: Point2) -> Self {
        Self { id, position, speed: 0.0, motion: MotionModel::Stationary }
    }

    pub fn linear(id: usize, position: Point2, target: Point2, speed: f64) -> Self {
        Self { id, position, speed, motion: MotionModel::LinearRandomTarget { target } }
    }

    pub fn parabolic(id: usize, path: ParabolicPath, phase: f64, forward: bool, speed: f64) -> Self {
        let position = path.point_at_fraction(phase);
        Self { id, position, speed, motion: MotionModel::ParabolicOscillator { path, phase, forward } }
    }

    pub fn validate(&self, map: &MapSpec) -> Result<()> {
        if !self.position.is_finite() || !map.contains(self.position) {
            return Err(Error::Config(format!("obstacle {} starts outside the map at {:?}", self.id, self.position)));
        }
        match &self.motion {
            MotionModel::Stationary => Ok(()),
            MotionModel::LinearRandomTarget { target } => {
                if !(self.speed > 0.0 && self.speed.is_finite()) {
                    return Err(Error::Config(format!("obstacle {} needs a positive speed", self.id)));
                }
                if !map.contains(*target) {
                    return Err(Error::Config(format!("obstacle {} target outside the map", self.id)));
                }
                Ok(())
            }
            MotionModel::ParabolicOscillator { path, phase, .. } => {
                if !(self.speed > 0.0 && self.speed.is_finite()) {
                    return Err(Error::Config(format!("obstacle {} needs a positive speed", self.id)));
                }
                if !path.inside(map) {
                    return Err(Error::Config(format!("obstacle {} parabola leaves the map", self.id)));
                }
                if !(0.0..=1.0).contains(phase) {
                    return Err(Error::Config(format!("obstacle {} phase {phase} outside [0,1]", self.id)));
                }
                Ok(())
            }
        }
    }
}

/// Result of one kinematic step: the new state plus any turning points
/// passed inside the step, as `(time offset within the step, position)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: ObstacleState,
    pub corners: Vec<(f64, Point2)>,
}

/// Advances one obstacle by `dt`.
pub fn step_obstacle(state: &ObstacleState, map: &MapSpec, wall: &WallTurn, dt: f64, rng: &mut StreamRng) -> StepOutcome {
    let mut next = state.clone();
    let mut corners = Vec::new();
    match &mut next.motion {
        MotionModel::Stationary => {}
        MotionModel::LinearRandomTarget { target } => {
            // One draw per step keeps the stream aligned regardless of the outcome.
            let u: f64 = rng.gen();
            if u < wall.step_probability(map, state.position, dt) {
                *target = map.sample_point(rng);
            }
            let mut pos = state.position;
            let mut remaining = state.speed * dt;
            let mut elapsed = 0.0;
            loop {
                let to_target = *target - pos;
                let dist = to_target.norm();
                if dist > remaining {
                    pos = pos + to_target * (remaining / dist);
                    break;
                }
                pos = *target;
                remaining -= dist;
                elapsed += dist / state.speed;
                *target = map.sample_point(rng);
                if remaining <= 0.0 {
                    break;
                }
                corners.push((elapsed, pos));
            }
            next.position = map.clamp(pos);
        }
        MotionModel::ParabolicOscillator { path, phase, forward } => {
            let total = path.length();
            if total > 0.0 {
                let mut remaining = state.speed * dt / total;
                let mut elapsed = 0.0;
                while remaining > 0.0 {
                    let room = if *forward { 1.0 - *phase } else { *phase };
                    if room > remaining {
                        *phase += if *forward { remaining } else { -remaining };
                        break;
                    }
                    *phase = if *forward { 1.0 } else { 0.0 };
                    remaining -= room;
                    elapsed += room * total / state.speed;
                    *forward = !*forward;
                    if remaining > 0.0 {
                        corners.push((elapsed, path.point_at_fraction(*phase)));
                    }
                }
                next.position = map.clamp(path.point_at_fraction(*phase));
            }
        }
    }
    StepOutcome { state: next, corners }
}

/// Ground-truth breakpoints per obstacle, `(time, position)` with increasing time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    tracks: Vec<Vec<(f64, Point2)>>,
}

/// One linear piece of an obstacle's track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub segment: Segment,
}

impl TimedSegment {
    pub fn position_at(&self, t: f64) -> Point2 {
        let span = self.t_end - self.t_start;
        if span <= 0.0 {
            return self.segment.a;
        }
        self.segment.point_at(((t - self.t_start) / span).clamp(0.0, 1.0))
    }
}

impl TrajectoryLog {
    pub fn new(obstacles: usize) -> Self {
        Self { tracks: vec![Vec::new(); obstacles] }
    }

    /// Builds a log from explicit breakpoints; times must be strictly increasing.
    pub fn from_tracks(tracks: Vec<Vec<(f64, Point2)>>) -> Result<Self> {
        for (id, track) in tracks.iter().enumerate() {
            if track.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Config(format!("track {id} has non-increasing times")));
            }
        }
        Ok(Self { tracks })
    }

    pub fn obstacle_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn track(&self, obstacle: usize) -> &[(f64, Point2)] {
        &self.tracks[obstacle]
    }

    fn push(&mut self, obstacle: usize, t: f64, p: Point2) {
        let track = &mut self.tracks[obstacle];
        if let Some(last) = track.last() {
            if t <= last.0 {
                return;
            }
        }
        track.push((t, p));
    }

    /// Time span covered by every track.
    pub fn coverage(&self) -> (f64, f64) {
        let start = self.tracks.iter().filter_map(|t| t.first().map(|p| p.0)).fold(f64::NEG_INFINITY, f64::max);
        let end = self.tracks.iter().filter_map(|t| t.last().map(|p| p.0)).fold(f64::INFINITY, f64::min);
        (start, end)
    }

    pub fn segments(&self, obstacle: usize) -> impl Iterator<Item = TimedSegment> + '_ {
        self.tracks[obstacle].windows(2).map(|w| TimedSegment {
            t_start: w[0].0,
            t_end: w[1].0,
            segment: Segment::new(w[0].1, w[1].1),
        })
    }

    /// Interpolated position; `None` outside the logged span.
    pub fn position_at(&self, obstacle: usize, t: f64) -> Option<Point2> {
        let track = &self.tracks[obstacle];
        let first = track.first()?;
        let last = track.last()?;
        if t < first.0 || t > last.0 {
            return None;
        }
        let idx = track.partition_point(|&(bt, _)| bt < t);
        if idx < track.len() && track[idx].0 == t {
            return Some(track[idx].1);
        }
        let (t0, p0) = track[idx - 1];
        let (t1, p1) = track[idx];
        Some(p0.lerp(p1, (t - t0) / (t1 - t0)))
    }

    /// Pieces of the track overlapping `[ta, tb]`, clipped to that window.
    pub fn clipped_segments(&self, obstacle: usize, ta: f64, tb: f64) -> Vec<TimedSegment> {
        let track = &self.tracks[obstacle];
        let start = track.partition_point(|&(t, _)| t < ta).saturating_sub(1);
        let mut out = Vec::new();
        for w in track[start..].windows(2) {
            let (t0, t1) = (w[0].0, w[1].0);
            if t0 > tb {
                break;
            }
            if t1 < ta {
                continue;
            }
            let piece = TimedSegment { t_start: t0, t_end: t1, segment: Segment::new(w[0].1, w[1].1) };
            let (ca, cb) = (t0.max(ta), t1.min(tb));
            out.push(TimedSegment {
                t_start: ca,
                t_end: cb,
                segment: Segment::new(piece.position_at(ca), piece.position_at(cb)),
            });
        }
        out
    }

    /// Writes `t,obstacle_id,x,y` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "obstacle_id", "x", "y"])?;
        for (id, track) in self.tracks.iter().enumerate() {
            for &(t, p) in track {
                w.write_record([t.to_string(), id.to_string(), p.x.to_string(), p.y.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("trajectory csv", e))?;
        Ok(())
    }

    /// Drops breakpoints that end before `t`, keeping the piece that spans it.
    pub fn forget_before(&mut self, t: f64) {
        for track in &mut self.tracks {
            let idx = track.partition_point(|&(bt, _)| bt < t).saturating_sub(1);
            if idx > 0 {
                track.drain(..idx);
            }
        }
    }
}

/// True iff some obstacle's motion crosses `edge` at a time inside `[ta, tb]`.
pub fn detect_collision(edge: &Segment, ta: f64, tb: f64, log: &TrajectoryLog) -> Result<bool> {
    if !(ta < tb) {
        return Err(Error::Precondition(format!("usage interval [{ta}, {tb}] is empty")));
    }
    let (start, end) = log.coverage();
    if start > ta || end < tb {
        return Err(Error::LogGap { start: ta, end: tb, covered_start: start, covered_end: end });
    }
    let bbox = edge.bounding_box();
    for obstacle in 0..log.obstacle_count() {
        for piece in log.clipped_segments(obstacle, ta, tb) {
            if bbox.overlaps(&piece.segment.bounding_box()) && piece.segment.touches(edge) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub map: MapSpec,
    pub obstacle_count: usize,
    /// Share of obstacles following a parabolic oscillation; the rest move linearly.
    pub parabolic_fraction: f64,
    pub linear_speed: f64,
    pub parabolic_speed: f64,
    /// Kinematic step; must divide the observation interval.
    pub micro_step: f64,
    pub wall_turn: WallTurn,
    pub parabola_min_chord: f64,
    pub parabola_max_arc_height: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            map: MapSpec { width: 30.0, height: 30.0 },
            obstacle_count: 8,
            parabolic_fraction: 0.5,
            linear_speed: 1.0,
            parabolic_speed: 1.0,
            micro_step: 0.05,
            wall_turn: WallTurn::default(),
            parabola_min_chord: 8.0,
            parabola_max_arc_height: 6.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        if !(0.0..=1.0).contains(&self.parabolic_fraction) {
            return Err(Error::Config("parabolic_fraction must lie in [0,1]".into()));
        }
        for (name, v) in [("linear_speed", self.linear_speed), ("parabolic_speed", self.parabolic_speed)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        self.steps_per_observation()?;
        if self.parabola_min_chord >= self.map.width.min(self.map.height) {
            return Err(Error::Config("parabola_min_chord does not fit in the map".into()));
        }
        Ok(())
    }

    pub fn max_speed(&self) -> f64 {
        self.linear_speed.max(self.parabolic_speed)
    }

    pub fn steps_per_observation(&self) -> Result<u64> {
        if !(self.micro_step > 0.0 && self.micro_step <= OBSERVATION_INTERVAL) {
            return Err(Error::Config(format!("micro_step {} must lie in (0, 1]", self.micro_step)));
        }
        let n = (OBSERVATION_INTERVAL / self.micro_step).round();
        if (n * self.micro_step - OBSERVATION_INTERVAL).abs() > 1e-9 {
            return Err(Error::Config(format!("micro_step {} must divide the observation interval", self.micro_step)));
        }
        Ok(n as u64)
    }

    pub fn parabolic_count(&self) -> usize {
        (self.obstacle_count as f64 * self.parabolic_fraction).round() as usize
    }

    /// Draws initial obstacle states from the target-placement stream.
    pub fn spawn_obstacles(&self, rng: &mut StreamRng) -> Vec<ObstacleState> {
        let parabolic = self.parabolic_count();
        (0..self.obstacle_count)
            .map(|id| {
                if id < parabolic {
                    let path = self.sample_parabola(rng);
                    let phase: f64 = rng.gen();
                    let forward = rng.gen_bool(0.5);
                    ObstacleState::parabolic(id, path, phase, forward, self.parabolic_speed)
                } else {
                    let position = self.map.sample_point(rng);
                    let target = self.map.sample_point(rng);
                    ObstacleState::linear(id, position, target, self.linear_speed)
                }
            })
            .collect()
    }

    fn sample_parabola(&self, rng: &mut StreamRng) -> ParabolicPath {
        loop {
            let a = self.map.sample_point(rng);
            let b = self.map.sample_point(rng);
            let height = (rng.gen::<f64>() * 2.0 - 1.0) * self.parabola_max_arc_height;
            if a.distance(b) < self.parabola_min_chord {
                continue;
            }
            let path = ParabolicPath::new(a, b, height);
            if path.inside(&self.map) {
                return path;
            }
        }
    }
}

/// Simulation state. Single writer; clones are independent.
#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    obstacles: Vec<ObstacleState>,
    motion_rng: StreamRng,
    steps_per_observation: u64,
    dt: f64,
    steps_done: u64,
    log: TrajectoryLog,
    /// Exact positions at every observation time, indexed `[t][obstacle]`.
    observations: Vec<Vec<Point2>>,
}

impl World {
    /// Spawns obstacles from the config's seeded streams.
    pub fn new(config: WorldConfig, master_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut placement = seeds::stream(master_seed, seeds::TARGET_PLACEMENT);
        let obstacles = config.spawn_obstacles(&mut placement);
        Self::with_obstacles(config, obstacles, master_seed)
    }

    /// World with hand-placed obstacles.
    pub fn with_obstacles(config: WorldConfig, obstacles: Vec<ObstacleState>, master_seed: u64) -> Result<Self> {
        config.map.validate()?;
        let steps_per_observation = config.steps_per_observation()?;
        for (i, o) in obstacles.iter().enumerate() {
            if o.id != i {
                return Err(Error::Config(format!("obstacle ids must be dense, found {} at index {i}", o.id)));
            }
            o.validate(&config.map)?;
        }
        let mut log = TrajectoryLog::new(obstacles.len());
        for o in &obstacles {
            log.push(o.id, 0.0, o.position);
        }
        let observations = vec![obstacles.iter().map(|o| o.position).collect()];
        Ok(Self {
            dt: OBSERVATION_INTERVAL / steps_per_observation as f64,
            config,
            obstacles,
            motion_rng: seeds::stream(master_seed, seeds::OBSTACLE_MOTION),
            steps_per_observation,
            steps_done: 0,
            log,
            observations,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn map(&self) -> &MapSpec {
        &self.config.map
    }

    pub fn obstacles(&self) -> &[ObstacleState] {
        &self.obstacles
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    fn step_time(&self, step: u64) -> f64 {
        let whole = step / self.steps_per_observation;
        let sub = step % self.steps_per_observation;
        whole as f64 * OBSERVATION_INTERVAL + sub as f64 * self.dt
    }

    /// Simulated time so far.
    pub fn time(&self) -> f64 {
        self.step_time(self.steps_done)
    }

    fn step(&mut self) {
        let t0 = self.time();
        let wall = self.config.wall_turn;
        for i in 0..self.obstacles.len() {
            let outcome = step_obstacle(&self.obstacles[i], &self.config.map, &wall, self.dt, &mut self.motion_rng);
            for (offset, p) in outcome.corners {
                self.log.push(i, t0 + offset, p);
            }
            self.obstacles[i] = outcome.state;
        }
        self.steps_done += 1;
        let t1 = self.time();
        for o in &self.obstacles {
            self.log.push(o.id, t1, o.position);
        }
        if self.steps_done.is_multiple_of(self.steps_per_observation) {
            self.observations.push(self.obstacles.iter().map(|o| o.position).collect());
        }
    }

    /// Simulates until the world clock reaches at least `t`.
    pub fn advance_to(&mut self, t: f64) {
        while self.time() < t - 1e-12 {
            self.step();
        }
    }

    fn observation_index(t: f64) -> Result<usize> {
        let k = (t / OBSERVATION_INTERVAL).round();
        if t < 0.0 || !t.is_finite() || (k * OBSERVATION_INTERVAL - t).abs() > 1e-9 {
            return Err(Error::NotObservationTime(t));
        }
        Ok(k as usize)
    }

    /// Exact positions of all obstacles at observation time `t`.
    pub fn observe(&mut self, t: f64) -> Result<Vec<(usize, Point2)>> {
        let k = Self::observation_index(t)?;
        self.advance_to(k as f64 * OBSERVATION_INTERVAL);
        Ok(self.observations[k].iter().copied().enumerate().collect())
    }

    /// Up to `max_len` observed positions of one obstacle ending at time `t`,
    /// oldest first.
    pub fn history(&mut self, obstacle: usize, t: f64, max_len: usize) -> Result<Vec<Point2>> {
        let k = Self::observation_index(t)?;
        self.advance_to(k as f64 * OBSERVATION_INTERVAL);
        let first = (k + 1).saturating_sub(max_len);
        Ok(self.observations[first..=k].iter().map(|row| row[obstacle]).collect())
    }

    /// Forgets log pieces before `t` to bound memory on long runs.
    pub fn forget_before(&mut self, t: f64) {
        self.log.forget_before(t);
    }
}
