//! Closed-loop episodes, risk-parameter sweeps and result export.

mod config;
mod export;

pub use config::{ExperimentConfig, ExperimentSection, PlannerConfig, PredictorKind, Scenario};
pub use export::{
    plot_rows, read_rows_csv, replay, rows_to_csv, write_outputs, OutputPaths, PlotRow, ReplayReport, RunLog,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{plan, EscapeState, Pipeline, PlanQuery};
use crate::prediction::{
    ConstantVelocity, ObservationBuffer, OraclePredictor, Predictor, TrainedModelSet, TrainedPredictor,
};
use crate::riskgraph::{EdgeRisk, NoRisk, RiskTable};
use crate::roadmap::{build_roadmap, NodeId, Roadmap};
use crate::seeds;
use crate::world::{detect_collision, World};

/// What happened on the way to one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target: NodeId,
    pub length: f64,
    pub collisions: usize,
    pub edges: usize,
    pub replans: usize,
    pub escapes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub r: f64,
    pub pipeline: Pipeline,
    pub start: NodeId,
    pub total_length: f64,
    pub collisions: usize,
    pub escapes: usize,
    pub targets: Vec<TargetRecord>,
}

/// Roadmap shared by every episode of a configuration.
pub fn scenario_roadmap(cfg: &ExperimentConfig) -> Result<Roadmap> {
    let mut rng = seeds::stream(cfg.experiment.master_seed, seeds::ROADMAP);
    build_roadmap(&cfg.world.map, &cfg.roadmap, &mut rng)
}

/// Start node followed by the target sequence; each target differs from its predecessor.
pub fn target_sequence(g: &Roadmap, master_seed: u64, count: usize) -> (NodeId, Vec<NodeId>) {
    let mut rng = seeds::stream(master_seed, seeds::AGENT_TARGETS);
    let n = g.node_count();
    let start = rng.gen_range(0..n);
    let mut current = start;
    let targets = (0..count)
        .map(|_| {
            let k = rng.gen_range(0..n - 1);
            current = if k >= current { k + 1 } else { k };
            current
        })
        .collect();
    (start, targets)
}

fn load_models(cfg: &ExperimentConfig) -> Result<Option<TrainedModelSet>> {
    if cfg.experiment.predictor != PredictorKind::Trained {
        return Ok(None);
    }
    let path = cfg.experiment.model.as_ref().ok_or_else(|| Error::Config("missing experiment.model".into()))?;
    let set = TrainedModelSet::load(path)?;
    if set.prediction != cfg.prediction {
        return Err(Error::Model("model was trained with a different prediction config".into()));
    }
    Ok(Some(set))
}

fn risk_table(
    cfg: &ExperimentConfig,
    g: &Roadmap,
    world: &mut World,
    observed_at: f64,
    models: Option<&TrainedModelSet>,
) -> Result<RiskTable> {
    let pred_cfg = cfg.prediction;
    world.advance_to(observed_at + pred_cfg.horizon as f64);
    let buffers = (0..world.obstacles().len())
        .map(|o| ObservationBuffer::new(world.history(o, observed_at, pred_cfg.history)?))
        .collect::<Result<Vec<_>>>()?;
    let oracle;
    let trained;
    let baseline = ConstantVelocity::new(pred_cfg);
    let predictor: &dyn Predictor = match cfg.experiment.predictor {
        PredictorKind::Baseline => &baseline,
        PredictorKind::Oracle => {
            oracle = OraclePredictor::new(world.log(), observed_at, pred_cfg);
            &oracle
        }
        PredictorKind::Trained => {
            let set = models.ok_or_else(|| Error::Model("trained predictor selected without models".into()))?;
            trained = TrainedPredictor::new(set, &pred_cfg);
            &trained
        }
    };
    match cfg.experiment.pipeline {
        Pipeline::Regression => {
            let trajectories = buffers
                .iter()
                .enumerate()
                .map(|(o, b)| predictor.predict_trajectory(o, b))
                .collect::<Result<Vec<_>>>()?;
            Ok(RiskTable::from_regression(g, &trajectories, pred_cfg.horizon))
        }
        Pipeline::Classification => {
            let grids =
                buffers.iter().enumerate().map(|(o, b)| predictor.predict_grids(o, b)).collect::<Result<Vec<_>>>()?;
            Ok(RiskTable::from_classification(g, &grids, pred_cfg.horizon))
        }
        Pipeline::None => Err(Error::Precondition("no risk table for pipeline 'none'".into())),
    }
}

/// Runs the agent over the shared target sequence with risk parameter `r`.
pub fn run_episode(cfg: &ExperimentConfig, r: f64, models: Option<&TrainedModelSet>) -> Result<EpisodeMetrics> {
    cfg.validate()?;
    let g = scenario_roadmap(cfg)?;
    let mut world = World::new(cfg.world.clone(), cfg.experiment.master_seed)?;
    run_episode_in(cfg, &g, &mut world, r, models)
}

/// Like [`run_episode`] but on a caller-supplied roadmap and world.
pub fn run_episode_in(
    cfg: &ExperimentConfig,
    g: &Roadmap,
    world: &mut World,
    r: f64,
    models: Option<&TrainedModelSet>,
) -> Result<EpisodeMetrics> {
    let (start, targets) = target_sequence(g, cfg.experiment.master_seed, cfg.experiment.targets);
    run_route(cfg, g, world, r, start, &targets, models)
}

/// Drives the agent from `start` through `targets` in order.
pub fn run_route(
    cfg: &ExperimentConfig,
    g: &Roadmap,
    world: &mut World,
    r: f64,
    start: NodeId,
    targets: &[NodeId],
    models: Option<&TrainedModelSet>,
) -> Result<EpisodeMetrics> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Precondition(format!("risk parameter must be finite and non-negative, got {r}")));
    }
    g.check_node(start)?;
    for &t in targets {
        g.check_node(t)?;
    }
    let pipeline = cfg.experiment.pipeline;
    let mut escape = EscapeState::new(cfg.planner.escape, r);
    let mut metrics =
        EpisodeMetrics { r, pipeline, start, total_length: 0.0, collisions: 0, escapes: 0, targets: Vec::new() };
    let mut current = start;
    let mut now = 0.0_f64;

    for (index, &target) in targets.iter().enumerate() {
        let goal = g.position(target);
        escape.new_target(current, g.position(current).distance(goal));
        let before = escape.activations();
        let mut record = TargetRecord { target, length: 0.0, collisions: 0, edges: 0, replans: 0, escapes: 0 };
        while current != target {
            if record.edges >= cfg.planner.step_budget {
                return Err(Error::StepBudget { budget: cfg.planner.step_budget, target_index: index, target });
            }
            let observed_at = now.floor();
            let t0 = now - observed_at;
            let r_eff = escape.effective_r();
            let table;
            let risk: &dyn EdgeRisk = if r_eff == 0.0 || pipeline == Pipeline::None {
                &NoRisk
            } else {
                table = risk_table(cfg, g, world, observed_at, models)?;
                &table
            };
            let query = PlanQuery { start: current, dest: target, t0, r: r_eff, pipeline };
            let path = plan(&query, g, risk)?
                .ok_or_else(|| Error::Roadmap(format!("node {target} unreachable from {current}")))?;
            record.replans += 1;
            let step = &path.edges[0];
            let segment = g.segment(step.edge);
            world.advance_to(now + step.length);
            if detect_collision(&segment, now, now + step.length, world.log())? {
                record.collisions += 1;
            }
            now += step.length;
            record.length += step.length;
            record.edges += 1;
            current = step.to;
            escape.on_arrival(current, g.position(current).distance(goal));
            world.forget_before(now.floor() - 1.0);
        }
        record.escapes = escape.activations() - before;
        metrics.total_length += record.length;
        metrics.collisions += record.collisions;
        metrics.escapes += record.escapes;
        metrics.targets.push(record);
    }
    Ok(metrics)
}

/// One line of a sweep: an `r` value against the `r = 0` baseline.
/// With repeats, values are means and the `_std` fields hold the spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub r: f64,
    pub repeats: usize,
    pub collisions: f64,
    pub path_length: f64,
    pub avoided_abs: f64,
    pub avoided_pct: f64,
    pub detour_pct: f64,
    pub avoided_pct_std: f64,
    pub detour_pct_std: f64,
}

/// `(avoided %, detour %)` of one episode against its baseline.
pub fn relative_to_baseline(baseline: &EpisodeMetrics, run: &EpisodeMetrics) -> (f64, f64) {
    let avoided = if baseline.collisions == 0 {
        0.0
    } else {
        100.0 * (baseline.collisions as f64 - run.collisions as f64) / baseline.collisions as f64
    };
    let detour = 100.0 * (run.total_length - baseline.total_length) / baseline.total_length;
    (avoided, detour)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seed of repeat `k`; repeat 0 uses the master seed itself.
pub fn repeat_seed(master_seed: u64, k: usize) -> u64 {
    if k == 0 {
        master_seed
    } else {
        seeds::indexed_stream(master_seed, "repeat", k as u64).gen()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<ComparisonRow>,
    /// `episodes[repeat][i]` ran with `r_values[i]`.
    pub episodes: Vec<Vec<EpisodeMetrics>>,
}

/// One episode per `r` and repeat on shared targets and obstacle motion.
pub fn sweep(cfg: &ExperimentConfig, models: Option<&TrainedModelSet>) -> Result<SweepResult> {
    cfg.validate()?;
    let r_values = &cfg.experiment.r_values;
    let base_idx = r_values
        .iter()
        .position(|&r| r == 0.0)
        .ok_or_else(|| Error::Config("r_values must include 0 for the baseline".into()))?;
    let loaded;
    let models = match (models, cfg.experiment.predictor) {
        (Some(m), _) => Some(m),
        (None, PredictorKind::Trained) => {
            loaded = load_models(cfg)?;
            loaded.as_ref()
        }
        (None, _) => None,
    };
    let mut episodes = Vec::with_capacity(cfg.experiment.repeats);
    for k in 0..cfg.experiment.repeats {
        let mut rep = cfg.clone();
        rep.experiment.master_seed = repeat_seed(cfg.experiment.master_seed, k);
        let g = scenario_roadmap(&rep)?;
        let template = World::new(rep.world.clone(), rep.experiment.master_seed)?;
        let runs = r_values
            .iter()
            .map(|&r| run_episode_in(&rep, &g, &mut template.clone(), r, models))
            .collect::<Result<Vec<_>>>()?;
        episodes.push(runs);
    }
    let rows = r_values
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let per_rep: Vec<(f64, f64, f64, f64, f64)> = episodes
                .iter()
                .map(|runs| {
                    let (base, run) = (&runs[base_idx], &runs[i]);
                    let (avoided, detour) = relative_to_baseline(base, run);
                    let abs = base.collisions as f64 - run.collisions as f64;
                    (run.collisions as f64, run.total_length, abs, avoided, detour)
                })
                .collect();
            let col = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| per_rep.iter().map(f).collect::<Vec<_>>();
            let (avoided_pct, avoided_pct_std) = mean_std(&col(|v| v.3));
            let (detour_pct, detour_pct_std) = mean_std(&col(|v| v.4));
            ComparisonRow {
                r,
                repeats: per_rep.len(),
                collisions: mean_std(&col(|v| v.0)).0,
                path_length: mean_std(&col(|v| v.1)).0,
                avoided_abs: mean_std(&col(|v| v.2)).0,
                avoided_pct,
                detour_pct,
                avoided_pct_std,
                detour_pct_std,
            }
        })
        .collect();
    Ok(SweepResult { rows, episodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadmap::shortest_path_static;

    fn small(seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::scenario(Scenario::B, seed);
        cfg.experiment.targets = 15;
        cfg
    }

    #[test]
    fn targets_never_repeat_consecutively() {
        let cfg = small(4);
        let g = scenario_roadmap(&cfg).unwrap();
        let (start, targets) = target_sequence(&g, 4, 500);
        let mut prev = start;
        for t in targets {
            assert_ne!(t, prev);
            assert!(t < g.node_count());
            prev = t;
        }
    }

    #[test]
    fn obstacle_free_episode_follows_static_shortest_paths() {
        let mut cfg = small(5);
        cfg.experiment.scenario = None;
        cfg.world.obstacle_count = 0;
        let g = scenario_roadmap(&cfg).unwrap();
        let (start, targets) = target_sequence(&g, 5, cfg.experiment.targets);
        let mut expected = 0.0;
        let mut prev = start;
        for &t in &targets {
            expected += shortest_path_static(&g, prev, t).unwrap().unwrap().length;
            prev = t;
        }
        for r in [0.0, 100.0] {
            let m = run_episode(&cfg, r, None).unwrap();
            assert_eq!(m.collisions, 0);
            assert!((m.total_length - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn accounting_and_determinism() {
        let cfg = small(6);
        let a = run_episode(&cfg, 10.0, None).unwrap();
        let b = run_episode(&cfg, 10.0, None).unwrap();
        assert_eq!(a, b);
        let sum: f64 = a.targets.iter().map(|t| t.length).sum();
        assert!((a.total_length - sum).abs() < 1e-9);
        assert_eq!(a.collisions, a.targets.iter().map(|t| t.collisions).sum::<usize>());
        assert_eq!(a.targets.len(), cfg.experiment.targets);
    }

    #[test]
    fn zero_r_ignores_the_pipeline() {
        let mut cfg = small(7);
        cfg.experiment.pipeline = Pipeline::None;
        let none = run_episode(&cfg, 0.0, None).unwrap();
        cfg.experiment.pipeline = Pipeline::Classification;
        let cls = run_episode(&cfg, 0.0, None).unwrap();
        assert_eq!(none.targets, cls.targets);
    }

    #[test]
    fn sweep_baseline_row_is_zero() {
        let mut cfg = small(8);
        cfg.experiment.r_values = vec![0.0, 50.0];
        let res = sweep(&cfg, None).unwrap();
        assert_eq!(res.rows[0].avoided_pct, 0.0);
        assert_eq!(res.rows[0].detour_pct, 0.0);
        assert!(res.rows[1].detour_pct >= -1e-9);
        cfg.experiment.r_values = vec![1.0];
        assert!(sweep(&cfg, None).is_err());
    }

    #[test]
    fn repeats_report_spread() {
        let mut cfg = small(9);
        cfg.experiment.targets = 5;
        cfg.experiment.repeats = 3;
        cfg.experiment.r_values = vec![0.0, 100.0];
        let res = sweep(&cfg, None).unwrap();
        assert_eq!(res.episodes.len(), 3);
        assert_eq!(res.rows[1].repeats, 3);
        assert!(res.rows[1].detour_pct_std.is_finite());
        assert_ne!(repeat_seed(9, 1), repeat_seed(9, 2));
    }

    #[test]
    fn tiny_budget_aborts_with_diagnostic() {
        let mut cfg = small(10);
        cfg.planner.step_budget = 1;
        match run_episode(&cfg, 0.0, None) {
            Err(Error::StepBudget { budget: 1, .. }) => {}
            other => panic!("expected step budget error, got {other:?}"),
        }
    }
}
