//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::Instant;

use pcmp_core::harness::{replay, sweep, write_outputs, ComparisonRow, ExperimentConfig, RunLog, Scenario};
use pcmp_core::planner::{plan, Pipeline, PlanQuery};
use pcmp_core::prediction::lstm::{softmax, Lstm};
use pcmp_core::prediction::model::{constant_velocity_mse, cross_entropy, model_mse};
use pcmp_core::prediction::{generate_training_data, Head, PredictionConfig, TrainHyperparams, TrainedModelSet};
use pcmp_core::riskgraph::{combine_obstacles, period_weighted_avg, sum_cell_values, PeriodRule, StepRiskFunction};
use pcmp_core::roadmap::{build_roadmap, shortest_path_static, RoadmapConfig};
use pcmp_core::seeds;
use pcmp_core::world::{MapSpec, WorldConfig};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn arithmetic_identities() -> Outcome {
    let cell_sum = sum_cell_values(&[0.25, 0.009]);
    let f = StepRiskFunction::new(vec![0.0, 0.5, 0.8, 0.0]).unwrap();
    let w1 = period_weighted_avg(&f, 0.5, 2.0);
    let w2 = period_weighted_avg(&f, 1.0, 2.0);
    let mut ok = (cell_sum - 0.259).abs() <= 1e-12 && (w1 - 0.45).abs() <= 1e-12 && (w2 - 0.65).abs() <= 1e-12;
    let mut rng = common::rng(1);
    let mut violations = 0;
    for _ in 0..10_000 {
        let k: f64 = rng.gen();
        let n = rng.gen_range(1..6);
        let mut risks: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let identity = (combine_obstacles(&[k]) - k).abs() <= 1e-12;
        let base = combine_obstacles(&risks);
        risks.shuffle(&mut rng);
        let commutative = (combine_obstacles(&risks) - base).abs() <= 1e-12;
        risks.push(1.0);
        risks.shuffle(&mut rng);
        let absorbing = (combine_obstacles(&risks) - 1.0).abs() <= 1e-12;
        if !(identity && commutative && absorbing) {
            violations += 1;
        }
    }
    ok &= violations == 0;
    outcome(ok, format!("cell sum={cell_sum} wavg=({w1}, {w2}) combine violations={violations}/10000"))
}

fn planner_oracle() -> Outcome {
    let mut rng = common::rng(2);
    let (mut agree, mut logged) = (0, 0);
    for case in 0..100 {
        let g = common::random_instance(&mut rng, 12, 10);
        let rule = if rng.gen_bool(0.5) { PeriodRule::Max } else { PeriodRule::WeightedAverage };
        let table = common::random_table(&mut rng, &g, rule);
        let (s, d) = (0, g.node_count() - 1);
        let r = rng.gen_range(0.0..1000.0);
        let t0 = rng.gen_range(0.0..1.0);
        let q = PlanQuery { start: s, dest: d, t0, r, pipeline: Pipeline::Classification };
        let p = plan(&q, &g, &table).unwrap().expect("connected instance");
        let best = common::exhaustive_optimum(&g, &table, s, d, t0, r).unwrap();
        if (p.total_cost - best.cost).abs() <= 1e-9 {
            agree += 1;
        } else if let Some(w) = common::non_fifo_witness(&g, &table, &best.nodes, t0, r) {
            logged += 1;
            println!(
                "    case {case}: planner {:.6} vs optimum {:.6}; non-FIFO witness at node {}: optimal prefix cost {:.6} (arrives {:.3}) > cheapest label {:.6} (arrives {:.3})",
                p.total_cost, best.cost, w.node, w.optimal_prefix_cost, w.optimal_prefix_arrival, w.cheapest_cost, w.cheapest_arrival
            );
        } else {
            println!("    case {case}: planner {:.6} vs optimum {:.6}; no witness found", p.total_cost, best.cost);
        }
    }
    let mismatches = 100 - agree;
    outcome(agree >= 95 && logged == mismatches, format!("{agree}/100 optimal, {logged}/{mismatches} mismatches with witness"))
}

fn zero_r_reduction() -> Outcome {
    let map = MapSpec { width: 30.0, height: 30.0 };
    let mut worst: f64 = 0.0;
    for k in 0..50u64 {
        let cfg = if k % 2 == 0 { RoadmapConfig::DENSE } else { RoadmapConfig::SPARSE };
        let g = build_roadmap(&map, &cfg, &mut seeds::indexed_stream(3, seeds::ROADMAP, k)).unwrap();
        let mut rng = common::rng(k);
        let table = common::random_table(&mut rng, &g, PeriodRule::WeightedAverage);
        let (s, d) = (rng.gen_range(0..g.node_count()), rng.gen_range(0..g.node_count()));
        let q = PlanQuery { start: s, dest: d, t0: rng.gen_range(0.0..1.0), r: 0.0, pipeline: Pipeline::Classification };
        let p = plan(&q, &g, &table).unwrap().unwrap();
        let fixed = shortest_path_static(&g, s, d).unwrap().unwrap();
        worst = worst.max((p.total_length - fixed.length).abs());
    }
    outcome(worst <= 1e-9, format!("max |plan - static| = {worst:e} over 50 roadmaps"))
}

fn scalarization_monotonicity() -> Outcome {
    let mut rng = common::rng(4);
    let mut violations = 0;
    for _ in 0..50 {
        let g = common::random_instance(&mut rng, 10, 8);
        let rule = if rng.gen_bool(0.5) { PeriodRule::Max } else { PeriodRule::WeightedAverage };
        let table = common::random_table(&mut rng, &g, rule);
        let t0 = rng.gen_range(0.0..1.0);
        let d = g.node_count() - 1;
        for _ in 0..5 {
            let a: f64 = rng.gen_range(0.0..1000.0);
            let b: f64 = rng.gen_range(0.0..1000.0);
            let (r1, r2) = (a.min(b), a.max(b));
            if r1 == r2 {
                continue;
            }
            let o1 = common::exhaustive_optimum(&g, &table, 0, d, t0, r1).unwrap();
            let o2 = common::exhaustive_optimum(&g, &table, 0, d, t0, r2).unwrap();
            if o2.risk > o1.risk + 1e-9 || o2.length < o1.length - 1e-9 {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations over 50 instances x 5 r-pairs"))
}

fn scenario(s: Scenario, pipeline: Pipeline, r_values: &[f64]) -> Vec<ComparisonRow> {
    let mut cfg = ExperimentConfig::scenario(s, 2024);
    cfg.experiment.pipeline = pipeline;
    cfg.experiment.r_values = r_values.to_vec();
    sweep(&cfg, None).expect("sweep runs").rows
}

fn describe(rows: &[ComparisonRow]) -> String {
    rows.iter()
        .map(|r| format!("r={}: {} coll, {:.1}% avoided, {:.2}% detour", r.r, r.collisions, r.avoided_pct, r.detour_pct))
        .collect::<Vec<_>>()
        .join("; ")
}

fn row(rows: &[ComparisonRow], r: f64) -> &ComparisonRow {
    rows.iter().find(|x| x.r == r).expect("r was swept")
}

fn regression_trend() -> Outcome {
    let start = Instant::now();
    let rows = scenario(Scenario::A, Pipeline::Regression, &[0.0, 1.0, 10.0, 50.0, 100.0, 500.0, 1000.0]);
    let ok = row(&rows, 1.0).avoided_pct >= 20.0
        && rows.iter().filter(|x| x.r >= 50.0).all(|x| x.avoided_pct >= 40.0)
        && rows.iter().all(|x| x.detour_pct <= 5.0);
    outcome(ok, format!("{} [{:.0}s]", describe(&rows), start.elapsed().as_secs_f64()))
}

fn classification_trend() -> Outcome {
    let start = Instant::now();
    let rows = scenario(Scenario::A, Pipeline::Classification, &[0.0, 1.0, 10.0, 100.0]);
    let (a1, a10, a100) = (row(&rows, 1.0), row(&rows, 10.0), row(&rows, 100.0));
    let ok = a1.avoided_pct <= a10.avoided_pct
        && a10.avoided_pct <= a100.avoided_pct
        && a100.avoided_pct >= 70.0
        && a100.detour_pct >= a1.detour_pct
        && a100.detour_pct <= 60.0;
    outcome(ok, format!("{} [{:.0}s]", describe(&rows), start.elapsed().as_secs_f64()))
}

/// Smallest detour among rows that avoid at least `floor` percent of collisions.
fn matched_detour(rows: &[ComparisonRow], floor: f64) -> Option<f64> {
    rows.iter().filter(|r| r.r > 0.0 && r.avoided_pct >= floor).map(|r| r.detour_pct).min_by(f64::total_cmp)
}

fn scenario_contrasts() -> Outcome {
    let start = Instant::now();
    let rs = [0.0, 1.0, 10.0, 100.0, 500.0, 1000.0];
    let a = scenario(Scenario::A, Pipeline::Classification, &rs);
    let b = scenario(Scenario::B, Pipeline::Classification, &rs);
    let c = scenario(Scenario::C, Pipeline::Classification, &rs);
    let (da, db) = (matched_detour(&a, 70.0), matched_detour(&b, 70.0));
    let sparse_ok = matches!((da, db), (Some(x), Some(y)) if y >= 1.2 * x);
    let crowded_ok = row(&c, 100.0).detour_pct > row(&a, 100.0).detour_pct;
    outcome(
        sparse_ok && crowded_ok,
        format!(
            "matched detour (avoided>=70%): a={da:?} b={db:?}; r=100 detour a={:.2}% c={:.2}% [{:.0}s]",
            row(&a, 100.0).detour_pct,
            row(&c, 100.0).detour_pct,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn gradient_check() -> f64 {
    let mut rng = seeds::stream(8, seeds::TRAINING_INIT);
    let mut net = Lstm::new(2, 6, 4, &mut rng);
    let seq: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..1.0)).collect();
    let loss = |n: &Lstm| -softmax(&n.predict(&seq))[2].ln();
    let (out, cache) = net.forward(&seq);
    let mut d = softmax(&out);
    d[2] -= 1.0;
    let mut grad = vec![0.0; net.params.len()];
    net.backward(&cache, &d, &mut grad);
    let mut worst: f64 = 0.0;
    for k in 0..net.params.len() {
        let orig = net.params[k];
        net.params[k] = orig + 1e-6;
        let up = loss(&net);
        net.params[k] = orig - 1e-6;
        let down = loss(&net);
        net.params[k] = orig;
        let numeric = (up - down) / 2e-6;
        worst = worst.max((numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-6));
    }
    worst
}

fn learned_models() -> Outcome {
    let start = Instant::now();
    let world = WorldConfig::default();
    let pred = PredictionConfig::default();
    let train_set = generate_training_data(&world, &pred, 20_000, 100).unwrap();
    let held = generate_training_data(&world, &pred, 2_000, 200).unwrap();
    let hyper = TrainHyperparams::default();
    let set = TrainedModelSet::train(&train_set, &[Head::Regression, Head::Classification], &pred, &hyper, 7, "acceptance".into())
        .unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for t in 1..=pred.horizon {
        let ce = cross_entropy(&set.classification[t - 1], &held).unwrap();
        let uniform = (pred.grid_spec(t).cell_count() as f64).ln();
        let mse = model_mse(&set.regression[t - 1], &held);
        let cv = constant_velocity_mse(&held, t);
        ok &= ce < uniform && mse < cv;
        parts.push(format!("t={t}: CE {ce:.3} vs {uniform:.3}, MSE {mse:.2e} vs CV {cv:.2e}"));
    }
    let grad = gradient_check();
    ok &= grad < 1e-4;
    outcome(ok, format!("{}; gradient rel err {grad:.1e} [{:.0}s]", parts.join("; "), start.elapsed().as_secs_f64()))
}

fn replay_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::scenario(Scenario::A, 77);
    cfg.experiment.targets = 30;
    cfg.experiment.r_values = vec![0.0, 10.0, 100.0];
    cfg.experiment.pipeline = Pipeline::Classification;
    let res = sweep(&cfg, None).unwrap();
    let log = RunLog::new(cfg, res.rows, res.episodes).unwrap();
    let paths = write_outputs(dir.path(), &log).unwrap();
    let report = replay(&paths.run_log).unwrap();
    outcome(report.identical, format!("{} differing CSV lines", report.differences.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 arithmetic identities", arithmetic_identities),
        ("2 planner vs exhaustive oracle", planner_oracle),
        ("3 r=0 reduction", zero_r_reduction),
        ("4 scalarization monotonicity", scalarization_monotonicity),
        ("5 regression trend", regression_trend),
        ("6 classification trend", classification_trend),
        ("7 scenario contrasts", scenario_contrasts),
        ("8 learned-model sanity", learned_models),
        ("9 replay determinism", replay_determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let o = run();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
