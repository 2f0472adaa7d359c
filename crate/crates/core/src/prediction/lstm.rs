//! Single-layer LSTM with a ReLU on the final hidden state and a dense head,
//! trained by backpropagation through time.
//!
//! Parameters live in one flat vector so optimizers and gradient checks can
//! treat them uniformly. Layout: gate weights `[4H x (I+H)]` (gate order
//! input, forget, candidate, output), gate biases `[4H]`, head weights
//! `[O x H]`, head biases `[O]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seeds::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct StepCache {
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    steps: Vec<StepCache>,
    h_final: Vec<f64>,
    feature: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Lstm {
    pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
        4 * hidden * (input + hidden) + 4 * hidden + output * hidden + output
    }

    /// Xavier-uniform weights, zero biases except a forget-gate bias of 1.
    pub fn new(input: usize, hidden: usize, output: usize, rng: &mut StreamRng) -> Self {
        let mut net = Self { input, hidden, output, params: vec![0.0; Self::param_count(input, hidden, output)] };
        let gate_bound = (6.0 / ((input + hidden) + hidden) as f64).sqrt();
        let head_bound = (6.0 / (hidden + output) as f64).sqrt();
        let (gw, gb, hw, _) = net.offsets();
        for w in &mut net.params[gw..gb] {
            *w = rng.gen_range(-gate_bound..gate_bound);
        }
        for b in &mut net.params[gb + hidden..gb + 2 * hidden] {
            *b = 1.0;
        }
        let hb = hw + output * hidden;
        for w in &mut net.params[hw..hb] {
            *w = rng.gen_range(-head_bound..head_bound);
        }
        net
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let gate_w = 0;
        let gate_b = 4 * self.hidden * (self.input + self.hidden);
        let head_w = gate_b + 4 * self.hidden;
        let head_b = head_w + self.output * self.hidden;
        (gate_w, gate_b, head_w, head_b)
    }

    /// Runs the recurrence over `seq` (row-major, `input` values per step).
    pub fn forward(&self, seq: &[f64]) -> (Vec<f64>, ForwardCache) {
        let (h_n, i_n) = (self.hidden, self.input);
        let cols = i_n + h_n;
        let (gw, gb, hw, hb) = self.offsets();
        let mut h = vec![0.0; h_n];
        let mut c = vec![0.0; h_n];
        let mut cache = ForwardCache::default();
        let mut z = vec![0.0; 4 * h_n];
        for x in seq.chunks_exact(i_n) {
            let mut xh = Vec::with_capacity(cols);
            xh.extend_from_slice(x);
            xh.extend_from_slice(&h);
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &self.params[gw + r * cols..gw + (r + 1) * cols];
                *zr = self.params[gb + r] + row.iter().zip(&xh).map(|(w, v)| w * v).sum::<f64>();
            }
            let mut step = StepCache {
                xh,
                c_prev: c.clone(),
                i: Vec::with_capacity(h_n),
                f: Vec::with_capacity(h_n),
                g: Vec::with_capacity(h_n),
                o: Vec::with_capacity(h_n),
                tanh_c: Vec::with_capacity(h_n),
            };
            for k in 0..h_n {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[h_n + k]);
                let g = z[2 * h_n + k].tanh();
                let o = sigmoid(z[3 * h_n + k]);
                c[k] = f * c[k] + i * g;
                let tc = c[k].tanh();
                h[k] = o * tc;
                step.i.push(i);
                step.f.push(f);
                step.g.push(g);
                step.o.push(o);
                step.tanh_c.push(tc);
            }
            cache.steps.push(step);
        }
        let feature: Vec<f64> = h.iter().map(|&v| v.max(0.0)).collect();
        let out = (0..self.output)
            .map(|o| {
                let row = &self.params[hw + o * h_n..hw + (o + 1) * h_n];
                self.params[hb + o] + row.iter().zip(&feature).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        cache.h_final = h;
        cache.feature = feature;
        (out, cache)
    }

    pub fn predict(&self, seq: &[f64]) -> Vec<f64> {
        self.forward(seq).0
    }

    /// Accumulates into `grad` the gradient of a loss whose derivative with
    /// respect to the raw outputs is `d_out`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        let (h_n, i_n) = (self.hidden, self.input);
        let cols = i_n + h_n;
        let (gw, gb, hw, hb) = self.offsets();

        let mut dh = vec![0.0; h_n];
        for (o, &d) in d_out.iter().enumerate() {
            grad[hb + o] += d;
            for k in 0..h_n {
                grad[hw + o * h_n + k] += d * cache.feature[k];
                dh[k] += d * self.params[hw + o * h_n + k];
            }
        }
        for k in 0..h_n {
            if cache.h_final[k] <= 0.0 {
                dh[k] = 0.0;
            }
        }

        let mut dc = vec![0.0; h_n];
        let mut dz = vec![0.0; 4 * h_n];
        for step in cache.steps.iter().rev() {
            for k in 0..h_n {
                let (i, f, g, o, tc) = (step.i[k], step.f[k], step.g[k], step.o[k], step.tanh_c[k]);
                let d_o = dh[k] * tc;
                dc[k] += dh[k] * o * (1.0 - tc * tc);
                dz[k] = dc[k] * g * i * (1.0 - i);
                dz[h_n + k] = dc[k] * step.c_prev[k] * f * (1.0 - f);
                dz[2 * h_n + k] = dc[k] * i * (1.0 - g * g);
                dz[3 * h_n + k] = d_o * o * (1.0 - o);
                dc[k] *= f;
            }
            dh.iter_mut().for_each(|v| *v = 0.0);
            for (r, &d) in dz.iter().enumerate() {
                grad[gb + r] += d;
                let row = gw + r * cols;
                for (j, &v) in step.xh.iter().enumerate() {
                    grad[row + j] += d * v;
                }
                for k in 0..h_n {
                    dh[k] += d * self.params[row + i_n + k];
                }
            }
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: usize, learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, m: vec![0.0; params], v: vec![0.0; params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, p) in params.iter_mut().enumerate() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            *p -= self.learning_rate * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.epsilon);
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
