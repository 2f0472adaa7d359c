mod common;

use std::collections::BTreeSet;

use pcmp_core::geometry::{Point2, Rect, Segment};
use pcmp_core::prediction::{GridSpec, OccupancyGrid, OccupancyGridSet, TrajectoryPrediction};
use pcmp_core::riskgraph::{
    cells_for_edge, combine_obstacles, period_max, period_weighted_avg, regression_to_edge_sets, shift_grids,
    EdgeRisk, RiskTable, StepRiskFunction,
};
use pcmp_core::roadmap::Roadmap;
use proptest::prelude::*;
use rand::Rng;

fn rect_distance(r: &Rect, p: Point2) -> f64 {
    let dx = (r.min.x - p.x).max(0.0).max(p.x - r.max.x);
    let dy = (r.min.y - p.y).max(0.0).max(p.y - r.max.y);
    dx.hypot(dy)
}

#[test]
fn cells_agree_with_dense_sampling() {
    let mut rng = common::rng(41);
    let spec = GridSpec::new(4, 1.0, 1);
    for _ in 0..300 {
        let center = Point2::new(rng.gen_range(5.0..25.0), rng.gen_range(5.0..25.0));
        let grid = OccupancyGrid { spec, center, probabilities: vec![0.0; spec.cell_count()] };
        let p = |rng: &mut common::TestRng| center + Point2::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
        let edge = Segment::new(p(&mut rng), p(&mut rng));
        let exact: BTreeSet<usize> = cells_for_edge(&edge, &grid).into_iter().collect();

        let samples = 4000;
        let points: Vec<Point2> = (0..=samples).map(|k| edge.point_at(k as f64 / samples as f64)).collect();
        let resolution = edge.length() / samples as f64 + 1e-9;
        for cell in 0..spec.cell_count() {
            let rect = grid.cell_rect(cell);
            let nearest = points.iter().map(|&q| rect_distance(&rect, q)).fold(f64::INFINITY, f64::min);
            if nearest == 0.0 {
                assert!(exact.contains(&cell), "sampled point inside cell {cell} missed for {edge:?}");
            } else if nearest > resolution {
                assert!(!exact.contains(&cell), "cell {cell} reported but edge stays {nearest} away");
            }
        }
    }
}

#[test]
fn regression_sets_match_pairwise_intersection() {
    let mut rng = common::rng(42);
    for _ in 0..50 {
        let g = common::random_instance(&mut rng, 12, 10);
        let mut pt = || Point2::new(rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0));
        let tr = TrajectoryPrediction { anchor: pt(), points: (0..4).map(|_| pt()).collect() };
        let sets = regression_to_edge_sets(&g, std::slice::from_ref(&tr));
        for t in 1..=4 {
            let piece = Segment::new(tr.at(t - 1), tr.at(t));
            for e in 0..g.edge_count() {
                let hit = g.segment(e).distance_to_segment(&piece) <= 1e-9;
                assert_eq!(sets.contains(t, e), hit);
            }
        }
        let table = RiskTable::from_regression(&g, &[tr], 4);
        for e in 0..g.edge_count() {
            assert!(table.function(e).levels().iter().all(|&l| l == 0.0 || l == 1.0));
        }
    }
}

fn lattice(rng: &mut common::TestRng) -> f64 {
    f64::from(rng.gen_range(0..30 * 1024)) / 1024.0
}

#[test]
fn classification_risk_is_translation_invariant() {
    let mut rng = common::rng(43);
    let spec = GridSpec::new(4, 1.0, 1);
    for _ in 0..50 {
        let nodes: Vec<Point2> = (0..8).map(|_| Point2::new(lattice(&mut rng), lattice(&mut rng))).collect();
        let pairs: Vec<(usize, usize)> = (1..8).map(|i| (i, rng.gen_range(0..i))).collect();
        let g = Roadmap::from_parts(nodes.clone(), &pairs).unwrap();
        let center = Point2::new(lattice(&mut rng), lattice(&mut rng));
        let set = OccupancyGridSet {
            grids: (0..4)
                .map(|_| {
                    let mut p: Vec<f64> = (0..spec.cell_count()).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let total: f64 = p.iter().sum();
                    p.iter_mut().for_each(|x| *x /= total);
                    OccupancyGrid { spec, center, probabilities: p }
                })
                .collect(),
        };
        let shift = Point2::new(f64::from(rng.gen_range(-64..64)) / 8.0, f64::from(rng.gen_range(-64..64)) / 8.0);
        let moved = Roadmap::from_parts(nodes.iter().map(|&p| p + shift).collect(), &pairs).unwrap();
        let a = RiskTable::from_classification(&g, std::slice::from_ref(&set), 4);
        let b = RiskTable::from_classification(&moved, &[shift_grids(&set, shift)], 4);
        for e in 0..g.edge_count() {
            for (x, y) in a.function(e).levels().iter().zip(b.function(e).levels()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

fn levels() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0], 4)
}

proptest! {
    #[test]
    fn weighted_average_lies_between_touched_levels(l in levels(), t in 0.0f64..5.0, d in 0.01f64..4.0) {
        let f = StepRiskFunction::new(l).unwrap();
        let avg = period_weighted_avg(&f, t, d);
        let max = period_max(&f, t, d);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&avg));
        prop_assert!(avg <= max + 1e-12);
        // Time outside the horizon counts as zero, so zero joins the touched levels there.
        let mut touched: Vec<f64> = (0..4)
            .filter(|&k| (t + d).min(k as f64 + 1.0) - t.max(k as f64) > 0.0)
            .map(|k| f.levels()[k])
            .collect();
        if t + d > 4.0 {
            touched.push(0.0);
        }
        let lo = touched.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(touched.is_empty() || avg >= lo - 1e-12);
    }

    #[test]
    fn max_grows_with_the_window(l in levels(), t in 0.0f64..4.0, d in 0.01f64..3.0, extra in 0.0f64..2.0) {
        let f = StepRiskFunction::new(l).unwrap();
        prop_assert!(period_max(&f, t, d) <= period_max(&f, t, d + extra));
        prop_assert!(period_max(&f, t, d) >= f.at(t + d));
    }

    #[test]
    fn windows_past_the_horizon_are_safe(l in levels(), t in 4.0f64..10.0, d in 0.0f64..3.0) {
        let f = StepRiskFunction::new(l).unwrap();
        prop_assert_eq!(period_max(&f, t, d), 0.0);
        prop_assert_eq!(period_weighted_avg(&f, t, d), 0.0);
    }

    #[test]
    fn combining_obstacles(risks in prop::collection::vec(0.0f64..=1.0, 0..6), extra in 0.0f64..=1.0) {
        let c = combine_obstacles(&risks);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        for &k in &risks {
            prop_assert!(c >= k - 1e-12);
        }
        let mut more = risks.clone();
        more.push(extra);
        prop_assert!(combine_obstacles(&more) >= c - 1e-12);
        let mut reversed = risks.clone();
        reversed.reverse();
        prop_assert!((combine_obstacles(&reversed) - c).abs() < 1e-12);
    }

    #[test]
    fn table_reads_through_its_rule(seed in 0u64..1000, t in 0.0f64..5.0, d in 0.0f64..4.0) {
        let mut rng = common::rng(seed);
        let g = common::random_instance(&mut rng, 8, 4);
        for rule in [pcmp_core::riskgraph::PeriodRule::Max, pcmp_core::riskgraph::PeriodRule::WeightedAverage] {
            let table = common::random_table(&mut rng, &g, rule);
            for e in 0..g.edge_count() {
                let k = table.period_risk(e, t, d);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&k));
                prop_assert!(k <= period_max(table.function(e), t, d) + 1e-12 || d == 0.0);
            }
        }
    }
}
