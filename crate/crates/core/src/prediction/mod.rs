//! Obstacle motion prediction.
//!
//! Two output formats are produced for horizons `t = 1..=H`: a point per
//! horizon (regression) or a relative occupancy grid per horizon
//! (classification). Grids are centered on the obstacle's newest observed
//! position and have `(2t·m)²` square cells covering the square of half-width
//! `t · v_max`, where `m` is the granularity multiplier.

pub mod dataset;
pub mod lstm;
pub mod model;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};
use crate::world::{TrajectoryLog, OBSERVATION_INTERVAL};

pub use dataset::{generate_training_data, Sequence, TrainingDataset};
pub use model::{train, Head, TrainHyperparams, TrainedModel, TrainedModelSet, TrainedPredictor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionConfig {
    /// Number of unit time steps predicted.
    pub horizon: usize,
    /// Maximum number of observations fed to a predictor.
    pub history: usize,
    /// Upper bound on obstacle speed; sets the grid radius `t · v_max`.
    pub v_max: f64,
    /// Cells per side are `2 · t · grid_multiplier`.
    pub grid_multiplier: usize,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self { horizon: 4, history: 16, v_max: 1.0, grid_multiplier: 1 }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.history == 0 || self.grid_multiplier == 0 {
            return Err(Error::Config("horizon, history and grid_multiplier must be positive".into()));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::Config("v_max must be positive".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self, horizon: usize) -> GridSpec {
        GridSpec::new(horizon, self.v_max, self.grid_multiplier)
    }
}

/// Up to `capacity` consecutive observations of one obstacle, oldest first;
/// the last entry is the newest (relative time 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBuffer {
    positions: Vec<Point2>,
}

impl ObservationBuffer {
    pub fn new(positions: Vec<Point2>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Precondition("observation buffer needs at least one observation".into()));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Precondition("observation buffer holds non-finite positions".into()));
        }
        Ok(Self { positions })
    }

    /// Keeps at most the newest `capacity` observations.
    pub fn truncated(mut self, capacity: usize) -> Self {
        if self.positions.len() > capacity {
            self.positions.drain(..self.positions.len() - capacity);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    pub fn newest(&self) -> Point2 {
        *self.positions.last().expect("non-empty by construction")
    }

    pub fn translated(&self, by: Point2) -> Self {
        Self { positions: self.positions.iter().map(|&p| p + by).collect() }
    }
}

/// Future positions for `t = 1..=H`, read as a polyline starting at `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPrediction {
    pub anchor: Point2,
    pub points: Vec<Point2>,
}

impl TrajectoryPrediction {
    /// Predicted position at horizon `t` (1-based); `t = 0` is the anchor.
    pub fn at(&self, t: usize) -> Point2 {
        if t == 0 {
            self.anchor
        } else {
            self.points[t - 1]
        }
    }
}

/// Geometry of the relative grid for one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub horizon: usize,
    pub half_width: f64,
    pub cells_per_side: usize,
}

impl GridSpec {
    pub fn new(horizon: usize, v_max: f64, multiplier: usize) -> Self {
        Self { horizon, half_width: horizon as f64 * v_max, cells_per_side: 2 * horizon * multiplier }
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn cell_size(&self) -> f64 {
        2.0 * self.half_width / self.cells_per_side as f64
    }

    /// Cell holding a relative offset. Offsets on the outer boundary belong to
    /// the outermost cells; beyond it is an error.
    pub fn cell_of_offset(&self, offset: Point2) -> Result<usize> {
        let tol = 1e-9 * self.half_width.max(1.0);
        if offset.x.abs() > self.half_width + tol || offset.y.abs() > self.half_width + tol || !offset.is_finite() {
            return Err(Error::OutsideGrid { dx: offset.x, dy: offset.y, horizon: self.horizon, half_width: self.half_width });
        }
        let n = self.cells_per_side;
        let size = self.cell_size();
        let col = (((offset.x + self.half_width) / size).floor().max(0.0) as usize).min(n - 1);
        let row = (((offset.y + self.half_width) / size).floor().max(0.0) as usize).min(n - 1);
        Ok(row * n + col)
    }

    /// Offset clamped onto the grid square.
    pub fn clamp_offset(&self, offset: Point2) -> Point2 {
        Point2::new(offset.x.clamp(-self.half_width, self.half_width), offset.y.clamp(-self.half_width, self.half_width))
    }

    /// Closed cell square in offset coordinates.
    pub fn cell_rect(&self, index: usize) -> Rect {
        let n = self.cells_per_side;
        let size = self.cell_size();
        let (row, col) = (index / n, index % n);
        let min = Point2::new(-self.half_width + col as f64 * size, -self.half_width + row as f64 * size);
        Rect { min, max: Point2::new(min.x + size, min.y + size) }
    }
}

/// Probability mass per cell of one horizon's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    /// Newest observed position; cell coordinates are relative to it.
    pub center: Point2,
    pub probabilities: Vec<f64>,
}

impl OccupancyGrid {
    pub fn one_hot(spec: GridSpec, center: Point2, cell: usize) -> Self {
        let mut probabilities = vec![0.0; spec.cell_count()];
        probabilities[cell] = 1.0;
        Self { spec, center, probabilities }
    }

    /// Cell square in map coordinates.
    pub fn cell_rect(&self, index: usize) -> Rect {
        let r = self.spec.cell_rect(index);
        Rect { min: r.min + self.center, max: r.max + self.center }
    }

    pub fn extent(&self) -> Rect {
        let h = Point2::new(self.spec.half_width, self.spec.half_width);
        Rect { min: self.center - h, max: self.center + h }
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn max_mass(&self) -> f64 {
        self.probabilities.iter().copied().fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> usize {
        self.probabilities
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }
}

/// Grids for `t = 1..=H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGridSet {
    pub grids: Vec<OccupancyGrid>,
}

/// Interchangeable source of obstacle predictions.
pub trait Predictor {
    fn predict_trajectory(&self, obstacle: usize, buffer: &ObservationBuffer) -> Result<TrajectoryPrediction>;
    fn predict_grids(&self, obstacle: usize, buffer: &ObservationBuffer) -> Result<OccupancyGridSet>;
}

/// Extrapolates the last observed displacement; stationary with one observation.
#[derive(Debug, Clone, Copy)]
pub struct ConstantVelocity {
    pub config: PredictionConfig,
}

impl ConstantVelocity {
    pub fn new(config: PredictionConfig) -> Self {
        Self { config }
    }

    fn velocity(buffer: &ObservationBuffer) -> Point2 {
        let p = buffer.positions();
        if p.len() < 2 {
            Point2::default()
        } else {
            (p[p.len() - 1] - p[p.len() - 2]) * (1.0 / OBSERVATION_INTERVAL)
        }
    }
}

impl Predictor for ConstantVelocity {
    fn predict_trajectory(&self, _obstacle: usize, buffer: &ObservationBuffer) -> Result<TrajectoryPrediction> {
        let anchor = buffer.newest();
        let v = Self::velocity(buffer);
        let points = (1..=self.config.horizon).map(|t| anchor + v * t as f64).collect();
        Ok(TrajectoryPrediction { anchor, points })
    }

    fn predict_grids(&self, _obstacle: usize, buffer: &ObservationBuffer) -> Result<OccupancyGridSet> {
        let anchor = buffer.newest();
        let v = Self::velocity(buffer);
        let grids = (1..=self.config.horizon)
            .map(|t| {
                let spec = self.config.grid_spec(t);
                let cell = spec.cell_of_offset(spec.clamp_offset(v * t as f64))?;
                Ok(OccupancyGrid::one_hot(spec, anchor, cell))
            })
            .collect::<Result<_>>()?;
        Ok(OccupancyGridSet { grids })
    }
}

/// Reads the true future from the world's trajectory log. Test and
/// experiment use only: isolates planning quality from learning quality.
#[derive(Debug, Clone, Copy)]
pub struct OraclePredictor<'a> {
    pub log: &'a TrajectoryLog,
    /// Absolute time of the newest observation.
    pub observed_at: f64,
    pub config: PredictionConfig,
}

impl<'a> OraclePredictor<'a> {
    pub fn new(log: &'a TrajectoryLog, observed_at: f64, config: PredictionConfig) -> Self {
        Self { log, observed_at, config }
    }

    fn future(&self, obstacle: usize, t: usize) -> Result<Point2> {
        let at = self.observed_at + t as f64 * OBSERVATION_INTERVAL;
        self.log.position_at(obstacle, at).ok_or_else(|| {
            let (covered_start, covered_end) = self.log.coverage();
            Error::LogGap { start: self.observed_at, end: at, covered_start, covered_end }
        })
    }
}

impl Predictor for OraclePredictor<'_> {
    fn predict_trajectory(&self, obstacle: usize, buffer: &ObservationBuffer) -> Result<TrajectoryPrediction> {
        let points = (1..=self.config.horizon).map(|t| self.future(obstacle, t)).collect::<Result<_>>()?;
        Ok(TrajectoryPrediction { anchor: buffer.newest(), points })
    }

    fn predict_grids(&self, obstacle: usize, buffer: &ObservationBuffer) -> Result<OccupancyGridSet> {
        let anchor = buffer.newest();
        let grids = (1..=self.config.horizon)
            .map(|t| {
                let spec = self.config.grid_spec(t);
                let cell = spec.cell_of_offset(self.future(obstacle, t)? - anchor)?;
                Ok(OccupancyGrid::one_hot(spec, anchor, cell))
            })
            .collect::<Result<_>>()?;
        Ok(OccupancyGridSet { grids })
    }
}
