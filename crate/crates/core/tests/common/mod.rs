//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use pcmp_core::geometry::{Point2, Segment};
use pcmp_core::riskgraph::{EdgeRisk, PeriodRule, RiskTable, StepRiskFunction};
use pcmp_core::roadmap::{NodeId, Roadmap};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected random graph: a random spanning tree plus extra short edges.
pub fn random_instance(rng: &mut ChaCha8Rng, max_nodes: usize, extra_edges: usize) -> Roadmap {
    let n = rng.gen_range(3..=max_nodes);
    let nodes: Vec<Point2> = (0..n).map(|_| Point2::new(rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0))).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let has = |pairs: &[(usize, usize)], a: usize, b: usize| pairs.iter().any(|&(u, v)| (u, v) == (a, b) || (u, v) == (b, a));
    for i in 1..n {
        let j = rng.gen_range(0..i);
        pairs.push((i, j));
    }
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !has(&pairs, a, b) && nodes[a].distance(nodes[b]) > 1e-6 {
            pairs.push((a, b));
        }
    }
    Roadmap::from_parts(nodes, &pairs).expect("valid instance")
}

/// Random step functions over a 4-step horizon; about half the edges are risk-free.
pub fn random_table(rng: &mut ChaCha8Rng, g: &Roadmap, rule: PeriodRule) -> RiskTable {
    let functions = (0..g.edge_count())
        .map(|_| {
            if rng.gen_bool(0.5) {
                return StepRiskFunction::zero(4);
            }
            let levels = (0..4)
                .map(|_| match rule {
                    PeriodRule::Max => f64::from(u8::from(rng.gen_bool(0.5))),
                    PeriodRule::WeightedAverage => if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.0) },
                })
                .collect();
            StepRiskFunction::new(levels).unwrap()
        })
        .collect();
    RiskTable { rule, functions }
}

/// Cost breakdown of a node sequence, computed from first principles.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCost {
    pub nodes: Vec<NodeId>,
    pub cost: f64,
    pub length: f64,
    pub risk: f64,
}

pub fn path_cost(g: &Roadmap, risk: &dyn EdgeRisk, nodes: &[NodeId], t0: f64, r: f64) -> PathCost {
    let (mut t, mut cost, mut length, mut total_risk) = (t0, 0.0, 0.0, 0.0);
    for w in nodes.windows(2) {
        let e = g.edge_between(w[0], w[1]).expect("consecutive nodes are adjacent");
        let l = g.edge(e).length;
        let k = risk.period_risk(e, t, l);
        cost += l + r * k;
        length += l;
        total_risk += k;
        t += l;
    }
    PathCost { nodes: nodes.to_vec(), cost, length, risk: total_risk }
}

/// Every simple path from `s` to `d`.
pub fn simple_paths(g: &Roadmap, s: NodeId, d: NodeId) -> Vec<Vec<NodeId>> {
    fn walk(g: &Roadmap, d: NodeId, path: &mut Vec<NodeId>, seen: &mut [bool], out: &mut Vec<Vec<NodeId>>) {
        let v = *path.last().unwrap();
        if v == d {
            out.push(path.clone());
            return;
        }
        for &(w, _) in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                path.push(w);
                walk(g, d, path, seen, out);
                path.pop();
                seen[w] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut seen = vec![false; g.node_count()];
    seen[s] = true;
    walk(g, d, &mut vec![s], &mut seen, &mut out);
    out
}

/// Minimum-cost simple path by enumeration; ties go to the shorter path.
pub fn exhaustive_optimum(g: &Roadmap, risk: &dyn EdgeRisk, s: NodeId, d: NodeId, t0: f64, r: f64) -> Option<PathCost> {
    simple_paths(g, s, d)
        .into_iter()
        .map(|p| path_cost(g, risk, &p, t0, r))
        .min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.length.total_cmp(&b.length)))
}

/// First node on `optimal` whose prefix costs more than the cheapest way to
/// reach it: there label setting keeps the cheap label and loses the optimum.
#[derive(Debug, Clone)]
pub struct NonFifoWitness {
    pub node: NodeId,
    pub optimal_prefix_cost: f64,
    pub optimal_prefix_arrival: f64,
    pub cheapest_cost: f64,
    pub cheapest_arrival: f64,
}

pub fn non_fifo_witness(g: &Roadmap, risk: &dyn EdgeRisk, optimal: &[NodeId], t0: f64, r: f64) -> Option<NonFifoWitness> {
    for i in 1..optimal.len() {
        let v = optimal[i];
        let prefix = path_cost(g, risk, &optimal[..=i], t0, r);
        let best = exhaustive_optimum(g, risk, optimal[0], v, t0, r)?;
        if prefix.cost > best.cost + 1e-9 {
            return Some(NonFifoWitness {
                node: v,
                optimal_prefix_cost: prefix.cost,
                optimal_prefix_arrival: t0 + prefix.length,
                cheapest_cost: best.cost,
                cheapest_arrival: t0 + best.length,
            });
        }
    }
    None
}

/// Densely sampled check whether a moving point comes within `eps` of a
/// static segment; independent of the closed-form detector.
pub fn sampled_min_distance(edge: &Segment, a: Point2, b: Point2, samples: usize) -> f64 {
    (0..=samples)
        .map(|k| {
            let s = k as f64 / samples as f64;
            edge.distance_to_point(a + (b - a) * s)
        })
        .fold(f64::INFINITY, f64::min)
}
