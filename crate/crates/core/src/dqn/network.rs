use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::replay::Transition;
use super::STATE_DIM;

/// One hidden rectifier layer between a 3-value state and one Q-value per action.
///
/// Weights are row-major: `w1[j * STATE_DIM + i]` maps input `i` to hidden
/// unit `j`, `w2[a * hidden + j]` maps hidden unit `j` to action `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub hidden: usize,
    pub actions: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl QNetwork {
    pub fn zeros(hidden: usize, actions: usize) -> Self {
        Self {
            hidden,
            actions,
            w1: vec![0.0; hidden * STATE_DIM],
            b1: vec![0.0; hidden],
            w2: vec![0.0; actions * hidden],
            b2: vec![0.0; actions],
        }
    }

    /// He-uniform hidden layer; the output layer starts `output_scale` times
    /// smaller than usual so initial Q-values sit near zero.
    pub fn random(hidden: usize, actions: usize, output_scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut net = Self::zeros(hidden, actions);
        let b1 = (6.0 / STATE_DIM as f64).sqrt();
        net.w1.iter_mut().for_each(|w| *w = rng.random_range(-b1..b1));
        let b2 = output_scale * (1.0 / hidden as f64).sqrt();
        if b2 > 0.0 {
            net.w2.iter_mut().for_each(|w| *w = rng.random_range(-b2..b2));
        }
        net
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|x| x.is_finite())
    }

    /// Finiteness of the hidden layer and the given output rows.
    pub fn rows_finite(&self, rows: &[usize]) -> bool {
        let h = self.hidden;
        self.w1.iter().chain(&self.b1).all(|x| x.is_finite())
            && rows
                .iter()
                .all(|&a| self.b2[a].is_finite() && self.w2[a * h..(a + 1) * h].iter().all(|x| x.is_finite()))
    }

    /// Hidden pre-activations.
    fn pre_activation(&self, state: &[f64; STATE_DIM], out: &mut [f64]) {
        for (j, z) in out.iter_mut().enumerate() {
            let row = &self.w1[j * STATE_DIM..(j + 1) * STATE_DIM];
            *z = self.b1[j] + row[0] * state[0] + row[1] * state[1] + row[2] * state[2];
        }
    }

    fn hidden_into(&self, state: &[f64; STATE_DIM], out: &mut [f64]) {
        self.pre_activation(state, out);
        out.iter_mut().for_each(|z| *z = z.max(0.0));
    }

    fn row_value(&self, action: usize, hidden: &[f64]) -> f64 {
        let row = &self.w2[action * self.hidden..(action + 1) * self.hidden];
        self.b2[action] + row.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>()
    }

    pub fn forward(&self, state: &[f64; STATE_DIM]) -> Vec<f64> {
        let mut h = vec![0.0; self.hidden];
        self.hidden_into(state, &mut h);
        (0..self.actions).map(|a| self.row_value(a, &h)).collect()
    }

    pub fn max_value(&self, state: &[f64; STATE_DIM]) -> f64 {
        self.forward(state).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn argmax(&self, state: &[f64; STATE_DIM]) -> usize {
        argmax(&self.forward(state))
    }

    /// TD targets `r + gamma * max_a' Q_target(s', a')`, no bootstrap on terminals.
    pub fn td_targets(target: &QNetwork, batch: &[Transition], gamma: f64) -> Vec<f64> {
        batch
            .iter()
            .map(|t| {
                if t.terminal || gamma == 0.0 {
                    t.reward
                } else {
                    t.reward + gamma * target.max_value(&t.next_state)
                }
            })
            .collect()
    }

    /// Mean squared TD error against precomputed targets.
    pub fn loss(&self, batch: &[Transition], targets: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        let sum: f64 = batch
            .iter()
            .zip(targets)
            .map(|(t, y)| {
                self.hidden_into(&t.state, &mut h);
                let d = self.row_value(t.action, &h) - y;
                d * d
            })
            .sum();
        sum / batch.len() as f64
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &[Transition], targets: &[f64], grad: &mut Gradient) -> f64 {
        grad.reset(self);
        let n = batch.len() as f64;
        let mut pre = vec![0.0; self.hidden];
        let mut h = vec![0.0; self.hidden];
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(targets) {
            self.pre_activation(&t.state, &mut pre);
            for (hj, zj) in h.iter_mut().zip(&pre) {
                *hj = zj.max(0.0);
            }
            let delta = self.row_value(t.action, &h) - y;
            loss += delta * delta;
            let dq = 2.0 * delta / n;

            let a = t.action;
            grad.touch(a);
            grad.b2[a] += dq;
            let row = a * self.hidden..(a + 1) * self.hidden;
            for (g, hj) in grad.w2[row].iter_mut().zip(&h) {
                *g += dq * hj;
            }
            let w_row = &self.w2[a * self.hidden..(a + 1) * self.hidden];
            for j in 0..self.hidden {
                if pre[j] > 0.0 {
                    let dz = dq * w_row[j];
                    grad.b1[j] += dz;
                    let g1 = &mut grad.w1[j * STATE_DIM..(j + 1) * STATE_DIM];
                    g1[0] += dz * t.state[0];
                    g1[1] += dz * t.state[1];
                    g1[2] += dz * t.state[2];
                }
            }
        }
        loss / n
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Dense gradient plus the output rows that received any signal.
#[derive(Debug, Clone, Default)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    touched: Vec<usize>,
    marked: Vec<bool>,
}

impl Gradient {
    fn reset(&mut self, net: &QNetwork) {
        if self.w2.len() != net.w2.len() || self.w1.len() != net.w1.len() {
            *self = Self {
                w1: vec![0.0; net.w1.len()],
                b1: vec![0.0; net.b1.len()],
                w2: vec![0.0; net.w2.len()],
                b2: vec![0.0; net.b2.len()],
                touched: Vec::new(),
                marked: vec![false; net.actions],
            };
            return;
        }
        self.w1.fill(0.0);
        self.b1.fill(0.0);
        for &a in &self.touched {
            self.w2[a * net.hidden..(a + 1) * net.hidden].fill(0.0);
            self.b2[a] = 0.0;
            self.marked[a] = false;
        }
        self.touched.clear();
    }

    fn touch(&mut self, action: usize) {
        if !self.marked[action] {
            self.marked[action] = true;
            self.touched.push(action);
        }
    }

    pub fn touched_rows(&self) -> &[usize] {
        &self.touched
    }

    /// Flattened in the same order as [`QNetwork::params_mut`].
    pub fn flat(&self) -> Vec<f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied().collect()
    }
}

impl QNetwork {
    /// Mutable access to every parameter in a fixed order (w1, b1, w2, b2).
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(self.b2.iter_mut())
    }
}

/// Adam that only advances the output rows present in the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: QNetwork,
    v: QNetwork,
}

impl Adam {
    pub fn new(net: &QNetwork, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: QNetwork::zeros(net.hidden, net.actions),
            v: QNetwork::zeros(net.hidden, net.actions),
        }
    }

    pub fn step(&mut self, net: &mut QNetwork, grad: &Gradient) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let lr_t = self.lr * (1.0 - b2.powi(self.t as i32)).sqrt() / (1.0 - b1.powi(self.t as i32));
        let eps = self.eps;
        let update = |p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
            for (((p, m), v), g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr_t * *m / (v.sqrt() + eps);
            }
        };
        update(&mut net.w1, &mut self.m.w1, &mut self.v.w1, &grad.w1);
        update(&mut net.b1, &mut self.m.b1, &mut self.v.b1, &grad.b1);
        let h = net.hidden;
        for &a in grad.touched_rows() {
            let r = a * h..(a + 1) * h;
            update(&mut net.w2[r.clone()], &mut self.m.w2[r.clone()], &mut self.v.w2[r.clone()], &grad.w2[r]);
            update(&mut net.b2[a..=a], &mut self.m.b2[a..=a], &mut self.v.b2[a..=a], &grad.b2[a..=a]);
        }
    }
}
