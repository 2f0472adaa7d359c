//! Time-dependent edge collision risk built from obstacle predictions.
//!
//! A [`StepRiskFunction`] holds one probability level per unit interval
//! `(k, k+1]` of the prediction horizon (relative to the newest observation)
//! and is zero afterwards. Period functions turn it into the risk of using an
//! edge during `[t, t + d]`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect, Segment};
use crate::prediction::{OccupancyGrid, OccupancyGridSet, TrajectoryPrediction};
use crate::roadmap::{EdgeId, Roadmap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRiskFunction {
    levels: Vec<f64>,
}

impl StepRiskFunction {
    pub fn zero(horizon: usize) -> Self {
        Self { levels: vec![0.0; horizon] }
    }

    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Precondition(format!("risk levels must lie in [0,1]: {levels:?}")));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(|&l| l == 0.0)
    }

    /// Level at instant `t`; intervals are `(k, k+1]`.
    pub fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = t.ceil() as usize - 1;
        self.levels.get(k).copied().unwrap_or(0.0)
    }

    /// `(level, overlap length)` for each level sharing positive time with `[t, t + d]`.
    fn overlaps(&self, t: f64, d: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let end = t + d;
        self.levels.iter().enumerate().filter_map(move |(k, &level)| {
            let (lo, hi) = (k as f64, k as f64 + 1.0);
            let overlap = end.min(hi) - t.max(lo);
            (overlap > 0.0).then_some((level, overlap))
        })
    }
}

/// Highest level touched by the usage window `[t, t + d]`.
pub fn period_max(f: &StepRiskFunction, t: f64, d: f64) -> f64 {
    f.overlaps(t, d).map(|(l, _)| l).fold(0.0, f64::max)
}

/// Levels in `[t, t + d]` weighted by their share of the window; time past
/// the horizon counts as zero risk.
pub fn period_weighted_avg(f: &StepRiskFunction, t: f64, d: f64) -> f64 {
    if d <= 0.0 {
        return f.at(t);
    }
    f.overlaps(t, d).map(|(l, w)| l * w).sum::<f64>() / d
}

/// Per horizon step `t`, the edges predicted to be cut during `(t-1, t]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionEdgeSets {
    pub sets: Vec<BTreeSet<EdgeId>>,
}

impl CollisionEdgeSets {
    pub fn contains(&self, step: usize, edge: EdgeId) -> bool {
        self.sets.get(step - 1).is_some_and(|s| s.contains(&edge))
    }
}

/// Intersects each predicted trajectory piece with every edge; union over obstacles.
pub fn regression_to_edge_sets(g: &Roadmap, trajectories: &[TrajectoryPrediction]) -> CollisionEdgeSets {
    let horizon = trajectories.iter().map(|tr| tr.points.len()).max().unwrap_or(0);
    let mut sets = vec![BTreeSet::new(); horizon];
    let edges: Vec<(Segment, Rect)> = (0..g.edge_count()).map(|e| (g.segment(e), g.segment(e).bounding_box())).collect();
    for tr in trajectories {
        for t in 1..=tr.points.len() {
            let piece = Segment::new(tr.at(t - 1), tr.at(t));
            let bbox = piece.bounding_box();
            for (id, (seg, ebox)) in edges.iter().enumerate() {
                if ebox.overlaps(&bbox) && seg.touches(&piece) {
                    sets[t - 1].insert(id);
                }
            }
        }
    }
    CollisionEdgeSets { sets }
}

/// Binary step function: 1 on `(t-1, t]` iff the edge is in `K_t`.
pub fn edge_sets_to_step(edge: EdgeId, sets: &CollisionEdgeSets) -> StepRiskFunction {
    StepRiskFunction { levels: sets.sets.iter().map(|s| if s.contains(&edge) { 1.0 } else { 0.0 }).collect() }
}

/// Cells whose closed square the edge touches, in increasing index order.
pub fn cells_for_edge(edge: &Segment, grid: &OccupancyGrid) -> Vec<usize> {
    let extent = grid.extent();
    let bbox = edge.bounding_box();
    if !extent.overlaps(&bbox) {
        return Vec::new();
    }
    let n = grid.spec.cells_per_side;
    let size = grid.spec.cell_size();
    let index_range = |lo: f64, hi: f64, origin: f64| {
        let first = (((lo - origin) / size).floor() - 1.0).max(0.0) as usize;
        let last = ((((hi - origin) / size).floor() + 1.0).max(0.0) as usize).min(n - 1);
        first..=last
    };
    let mut cells = Vec::new();
    for row in index_range(bbox.min.y, bbox.max.y, extent.min.y) {
        for col in index_range(bbox.min.x, bbox.max.x, extent.min.x) {
            let idx = row * n + col;
            if edge.intersects_rect(&grid.cell_rect(idx)) {
                cells.push(idx);
            }
        }
    }
    cells
}

/// Sum of assigned cell values, capped at 1.
pub fn sum_cell_values(values: &[f64]) -> f64 {
    values.iter().sum::<f64>().min(1.0)
}

/// Risk that one obstacle cuts the edge at the grid's horizon step.
pub fn edge_risk_single_obstacle(edge: &Segment, grid: &OccupancyGrid) -> f64 {
    let values: Vec<f64> = cells_for_edge(edge, grid).into_iter().map(|c| grid.probabilities[c]).collect();
    sum_cell_values(&values)
}

/// Probability that at least one of several independent obstacles cuts the edge.
pub fn combine_obstacles(risks: &[f64]) -> f64 {
    1.0 - risks.iter().map(|k| 1.0 - k).product::<f64>()
}

/// How a step function is turned into the risk of a usage window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodRule {
    Max,
    WeightedAverage,
}

/// Risk of using `edge` during `[depart, depart + duration]`.
pub trait EdgeRisk {
    fn period_risk(&self, edge: EdgeId, depart: f64, duration: f64) -> f64;
}

/// Every edge is always safe.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoRisk;

impl EdgeRisk for NoRisk {
    fn period_risk(&self, _edge: EdgeId, _depart: f64, _duration: f64) -> f64 {
        0.0
    }
}

/// Per-edge step functions plus the period rule, as used by the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    pub rule: PeriodRule,
    pub functions: Vec<StepRiskFunction>,
}

impl RiskTable {
    /// Binary risks from predicted trajectories, read with the max rule.
    pub fn from_regression(g: &Roadmap, trajectories: &[TrajectoryPrediction], horizon: usize) -> Self {
        let sets = regression_to_edge_sets(g, trajectories);
        let functions = (0..g.edge_count())
            .map(|e| {
                let mut f = edge_sets_to_step(e, &sets);
                f.levels.resize(horizon, 0.0);
                f
            })
            .collect();
        Self { rule: PeriodRule::Max, functions }
    }

    /// Probabilistic risks from occupancy grids, read with the weighted average.
    pub fn from_classification(g: &Roadmap, grid_sets: &[OccupancyGridSet], horizon: usize) -> Self {
        let segments: Vec<(Segment, Rect)> =
            (0..g.edge_count()).map(|e| (g.segment(e), g.segment(e).bounding_box())).collect();
        let mut per_obstacle: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); horizon]; g.edge_count()];
        for set in grid_sets {
            for (k, grid) in set.grids.iter().enumerate().take(horizon) {
                let extent = grid.extent();
                for (e, (seg, bbox)) in segments.iter().enumerate() {
                    if !bbox.overlaps(&extent) {
                        continue;
                    }
                    let risk = edge_risk_single_obstacle(seg, grid);
                    if risk > 0.0 {
                        per_obstacle[e][k].push(risk);
                    }
                }
            }
        }
        let functions =
            per_obstacle.into_iter().map(|steps| StepRiskFunction { levels: steps.iter().map(|r| combine_obstacles(r)).collect() }).collect();
        Self { rule: PeriodRule::WeightedAverage, functions }
    }

    pub fn function(&self, edge: EdgeId) -> &StepRiskFunction {
        &self.functions[edge]
    }

    /// Edge id to levels, for visualization dumps.
    pub fn to_json(&self) -> Result<String> {
        let map: BTreeMap<EdgeId, &[f64]> =
            self.functions.iter().enumerate().filter(|(_, f)| !f.is_zero()).map(|(e, f)| (e, f.levels())).collect();
        Ok(serde_json::to_string(&map)?)
    }
}

impl EdgeRisk for RiskTable {
    fn period_risk(&self, edge: EdgeId, depart: f64, duration: f64) -> f64 {
        let f = &self.functions[edge];
        match self.rule {
            PeriodRule::Max => period_max(f, depart, duration),
            PeriodRule::WeightedAverage => period_weighted_avg(f, depart, duration),
        }
    }
}

/// Re-centers the grids of a set on a new anchor; used by translation tests.
pub fn shift_grids(set: &OccupancyGridSet, by: Point2) -> OccupancyGridSet {
    OccupancyGridSet { grids: set.grids.iter().map(|g| OccupancyGrid { center: g.center + by, ..g.clone() }).collect() }
}
