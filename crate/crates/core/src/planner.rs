//! Time- and risk-dependent A* on the roadmap.
//!
//! Edge costs are `l + r * k_period(t(v))`, where `t(v)` is the time at which
//! the agent leaves `v`, measured from the newest observation. The search is
//! plain label setting: a node's label is final once it is expanded.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskgraph::EdgeRisk;
use crate::roadmap::{EdgeId, NodeId, Roadmap};

/// Which prediction pipeline feeds the risk tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Regression,
    Classification,
    None,
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Self::Regression),
            "classification" => Ok(Self::Classification),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown pipeline '{other}'"))),
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Regression => "regression",
            Self::Classification => "classification",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanQuery {
    pub start: NodeId,
    pub dest: NodeId,
    /// Time since the newest observation, in `[0, 1)`.
    pub t0: f64,
    pub r: f64,
    pub pipeline: Pipeline,
}

impl PlanQuery {
    pub fn validate(&self, g: &Roadmap) -> Result<()> {
        g.check_node(self.start)?;
        g.check_node(self.dest)?;
        if !(0.0..1.0).contains(&self.t0) {
            return Err(Error::Precondition(format!("t0 must lie in [0,1), got {}", self.t0)));
        }
        if !self.r.is_finite() || self.r < 0.0 {
            return Err(Error::Precondition(format!("risk parameter must be finite and non-negative, got {}", self.r)));
        }
        Ok(())
    }
}

/// One traversal in a plan with its cost breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub edge: EdgeId,
    pub depart: f64,
    pub length: f64,
    pub risk: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<PlannedEdge>,
    pub total_cost: f64,
    pub total_length: f64,
    /// Sum of the period risks of the used edges.
    pub total_risk: f64,
    /// `r` times `total_risk`.
    pub risk_cost: f64,
}

impl PlanResult {
    pub fn departures(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.depart).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Time at which the agent reaches the end of a prefix of edges.
pub fn arrival_time(t0: f64, prefix_lengths: &[f64]) -> f64 {
    prefix_lengths.iter().fold(t0, |t, l| t + l)
}

/// `(cost, period risk)` of leaving along `edge` at `depart`.
pub fn edge_cost(g: &Roadmap, edge: EdgeId, depart: f64, r: f64, risk: &dyn EdgeRisk) -> (f64, f64) {
    let length = g.edge(edge).length;
    if r == 0.0 {
        return (length, 0.0);
    }
    let k = risk.period_risk(edge, depart, length);
    (length + r * k, k)
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    node: NodeId,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.g.total_cmp(&self.g)).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Unmarked,
    Marked,
    Finished,
}

/// Label-setting A* with Euclidean heuristic. `Ok(None)` if `dest` is unreachable.
pub fn plan(query: &PlanQuery, g: &Roadmap, risk: &dyn EdgeRisk) -> Result<Option<PlanResult>> {
    query.validate(g)?;
    let r = if query.pipeline == Pipeline::None { 0.0 } else { query.r };
    let n = g.node_count();
    let goal = g.position(query.dest);
    let h = |v: NodeId| g.position(v).distance(goal);

    let mut cost = vec![f64::INFINITY; n];
    let mut time = vec![f64::NAN; n];
    let mut pred: Vec<Option<(NodeId, EdgeId)>> = vec![None; n];
    let mut state = vec![State::Unmarked; n];
    let mut open = BinaryHeap::new();

    cost[query.start] = 0.0;
    time[query.start] = query.t0;
    state[query.start] = State::Marked;
    open.push(Open { f: h(query.start), g: 0.0, node: query.start });

    while let Some(Open { g: gv, node: v, .. }) = open.pop() {
        if state[v] == State::Finished || gv > cost[v] {
            continue;
        }
        state[v] = State::Finished;
        if v == query.dest {
            break;
        }
        for &(w, e) in g.neighbors(v) {
            if state[w] == State::Finished {
                continue;
            }
            let (c, _) = edge_cost(g, e, time[v], r, risk);
            let candidate = cost[v] + c;
            if candidate < cost[w] {
                cost[w] = candidate;
                time[w] = time[v] + g.edge(e).length;
                pred[w] = Some((v, e));
                state[w] = State::Marked;
                open.push(Open { f: candidate + h(w), g: candidate, node: w });
            }
        }
    }

    if state[query.dest] != State::Finished {
        return Ok(None);
    }
    let mut hops = Vec::new();
    let mut cur = query.dest;
    while let Some((p, e)) = pred[cur] {
        hops.push((p, cur, e));
        cur = p;
    }
    hops.reverse();
    Ok(Some(evaluate_path(g, query, r, risk, &hops)))
}

fn evaluate_path(g: &Roadmap, query: &PlanQuery, r: f64, risk: &dyn EdgeRisk, hops: &[(NodeId, NodeId, EdgeId)]) -> PlanResult {
    let mut nodes = vec![query.start];
    let mut edges = Vec::with_capacity(hops.len());
    let (mut t, mut total_cost, mut total_length, mut total_risk) = (query.t0, 0.0, 0.0, 0.0);
    for &(from, to, edge) in hops {
        let (c, k) = edge_cost(g, edge, t, r, risk);
        let length = g.edge(edge).length;
        edges.push(PlannedEdge { from, to, edge, depart: t, length, risk: k, cost: c });
        nodes.push(to);
        total_cost += c;
        total_length += length;
        total_risk += k;
        t += length;
    }
    PlanResult { nodes, edges, total_cost, total_length, total_risk, risk_cost: r * total_risk }
}

/// Cost breakdown of an explicit node sequence under the same cost model as [`plan`].
pub fn evaluate_nodes(g: &Roadmap, query: &PlanQuery, risk: &dyn EdgeRisk, nodes: &[NodeId]) -> Result<PlanResult> {
    query.validate(g)?;
    if nodes.first() != Some(&query.start) {
        return Err(Error::Precondition("path must begin at the query start".into()));
    }
    let hops = nodes
        .windows(2)
        .map(|w| {
            g.edge_between(w[0], w[1])
                .map(|e| (w[0], w[1], e))
                .ok_or_else(|| Error::Precondition(format!("no edge between {} and {}", w[0], w[1])))
        })
        .collect::<Result<Vec<_>>>()?;
    let r = if query.pipeline == Pipeline::None { 0.0 } else { query.r };
    Ok(evaluate_path(g, query, r, risk, &hops))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EscapeConfig {
    pub enabled: bool,
    /// Number of recent arrivals inspected for loops.
    pub window: usize,
    /// Visits to the same node within the window that count as a loop.
    pub repeat_visits: usize,
    pub reduction_factor: f64,
    /// Consecutive progress steps after which the configured `r` returns.
    pub restore_after: usize,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        Self { enabled: true, window: 12, repeat_visits: 3, reduction_factor: 2.0, restore_after: 5 }
    }
}

impl EscapeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.repeat_visits == 0 || self.restore_after == 0 || !(self.reduction_factor > 1.0) {
            return Err(Error::Config(format!("invalid escape settings: {self:?}")));
        }
        Ok(())
    }
}

/// `r` after `triggers` reductions.
pub fn escape_dead_end(configured_r: f64, triggers: u32, config: &EscapeConfig) -> f64 {
    configured_r / config.reduction_factor.powi(triggers as i32)
}

/// Loop detector that lowers the effective risk parameter while the agent
/// circles without getting closer to its target.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeState {
    config: EscapeConfig,
    configured_r: f64,
    triggers: u32,
    recent: VecDeque<NodeId>,
    best_distance: f64,
    progress_streak: usize,
    activations: usize,
}

impl EscapeState {
    pub fn new(config: EscapeConfig, configured_r: f64) -> Self {
        Self {
            config,
            configured_r,
            triggers: 0,
            recent: VecDeque::with_capacity(config.window),
            best_distance: f64::INFINITY,
            progress_streak: 0,
            activations: 0,
        }
    }

    pub fn effective_r(&self) -> f64 {
        escape_dead_end(self.configured_r, self.triggers, &self.config)
    }

    /// Escape activations since construction.
    pub fn activations(&self) -> usize {
        self.activations
    }

    /// Starts tracking a new target from `node`.
    pub fn new_target(&mut self, node: NodeId, distance: f64) {
        self.triggers = 0;
        self.recent.clear();
        self.recent.push_back(node);
        self.best_distance = distance;
        self.progress_streak = 0;
    }

    /// Records an arrival; returns whether the escape fired.
    pub fn on_arrival(&mut self, node: NodeId, distance: f64) -> bool {
        if !self.config.enabled {
            return false;
        }
        if self.recent.len() == self.config.window {
            self.recent.pop_front();
        }
        self.recent.push_back(node);
        if distance < self.best_distance {
            self.best_distance = distance;
            self.progress_streak += 1;
            if self.progress_streak >= self.config.restore_after {
                self.triggers = 0;
            }
            return false;
        }
        self.progress_streak = 0;
        let visits = self.recent.iter().filter(|&&v| v == node).count();
        if visits >= self.config.repeat_visits {
            self.triggers += 1;
            self.activations += 1;
            self.recent.clear();
            return true;
        }
        false
    }
}
