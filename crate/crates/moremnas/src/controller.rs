//! Recurrent controller for reinforced mutation: embedding -> single-layer
//! LSTM -> softmax, sampling one cell index per step, trained by REINFORCE
//! with a terminal clipped reward. Forward and backward passes are
//! self-contained; parameters live in one flat vector so gradient checks
//! and checkpoints stay trivial.

use rand::Rng;

use crate::error::{Error, Result};

/// Gate order everywhere: input, forget, cell candidate, output.
const GATES: usize = 4;

/// Flat parameter store. Layout: embedding rows (vocab + 1, the extra row
/// is the null start token), then W/U/b per gate, then the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    pub vocab: usize,
    pub d_e: usize,
    pub d_h: usize,
    theta: Vec<f64>,
}

struct Layout {
    emb: usize,
    w: [usize; GATES],
    u: [usize; GATES],
    b: [usize; GATES],
    w_out: usize,
    b_out: usize,
    total: usize,
}

fn layout(vocab: usize, d_e: usize, d_h: usize) -> Layout {
    let mut at = 0;
    let emb = at;
    at += (vocab + 1) * d_e;
    let mut w = [0; GATES];
    for slot in &mut w {
        *slot = at;
        at += d_h * d_e;
    }
    let mut u = [0; GATES];
    for slot in &mut u {
        *slot = at;
        at += d_h * d_h;
    }
    let mut b = [0; GATES];
    for slot in &mut b {
        *slot = at;
        at += d_h;
    }
    let w_out = at;
    at += vocab * d_h;
    let b_out = at;
    at += vocab;
    Layout { emb, w, u, b, w_out, b_out, total: at }
}

impl ControllerParams {
    pub fn zeros(vocab: usize, d_e: usize, d_h: usize) -> Self {
        let total = layout(vocab, d_e, d_h).total;
        ControllerParams { vocab, d_e, d_h, theta: vec![0.0; total] }
    }

    /// Uniform init in [-0.1, 0.1], drawn in layout order.
    pub fn init<R: Rng>(vocab: usize, d_e: usize, d_h: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(vocab, d_e, d_h);
        for v in &mut p.theta {
            *v = rng.random::<f64>() * 0.2 - 0.1;
        }
        p
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn flatten(&self) -> &[f64] {
        &self.theta
    }

    /// Inverse of [`flatten`]; bit-exact round trip.
    pub fn from_flat(vocab: usize, d_e: usize, d_h: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = layout(vocab, d_e, d_h).total;
        if theta.len() != expected {
            return Err(Error::Config(format!(
                "controller parameter vector has {} entries, expected {expected}",
                theta.len()
            )));
        }
        Ok(ControllerParams { vocab, d_e, d_h, theta })
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Token id of the null start input.
    pub fn start_token(&self) -> usize {
        self.vocab
    }
}

/// One sampled genome with everything needed to replay it: the actions are
/// the per-step inputs (shifted by the null start token), so they fully
/// determine the teacher-forced forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub actions: Vec<u16>,
    pub log_probs: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    None,
    MovingAverage { decay: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ReinforceConfig {
    pub batch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub reward_cap: f64,
    pub baseline: Baseline,
    pub d_e: usize,
    pub d_h: usize,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        ReinforceConfig {
            batch_size: 8,
            gamma: 1.0,
            learning_rate: 1e-3,
            reward_cap: 5.0,
            baseline: Baseline::None,
            d_e: 16,
            d_h: 64,
        }
    }
}

impl ReinforceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("rl.batch_size must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("rl.gamma must lie in (0, 1]".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config("rl.learning_rate must be positive".into()));
        }
        if !(self.reward_cap > -0.5) {
            return Err(Error::Config("rl.reward_cap must exceed -0.5".into()));
        }
        if let Baseline::MovingAverage { decay } = self.baseline {
            if !(0.0..1.0).contains(&decay) {
                return Err(Error::Config("rl.baseline decay must lie in [0, 1)".into()));
            }
        }
        if self.d_e < 1 || self.d_h < 1 {
            return Err(Error::Config("rl.d_e and rl.d_h must be >= 1".into()));
        }
        Ok(())
    }
}

/// Clipped terminal reward: min(0.001 / mse - 0.5, cap).
pub fn reward_from_mse(mse: f64, cap: f64) -> Result<f64> {
    if !(mse > 0.0) {
        return Err(Error::Config(format!("reward_from_mse needs mse > 0, got {mse}")));
    }
    Ok((0.001 / mse - 0.5).min(cap))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct StepCache {
    input: usize,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    h_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
}

/// One LSTM step plus softmax head, given the input token id.
fn step(p: &ControllerParams, token: usize, h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let lay = layout(p.vocab, p.d_e, p.d_h);
    let (d_e, d_h, vocab) = (p.d_e, p.d_h, p.vocab);
    let th = &p.theta;
    let x = &th[lay.emb + token * d_e..lay.emb + (token + 1) * d_e];

    let mut z = vec![vec![0.0f64; d_h]; GATES];
    for gate in 0..GATES {
        let w = &th[lay.w[gate]..lay.w[gate] + d_h * d_e];
        let u = &th[lay.u[gate]..lay.u[gate] + d_h * d_h];
        let b = &th[lay.b[gate]..lay.b[gate] + d_h];
        for hh in 0..d_h {
            let mut acc = b[hh];
            let wrow = &w[hh * d_e..(hh + 1) * d_e];
            for e in 0..d_e {
                acc += wrow[e] * x[e];
            }
            let urow = &u[hh * d_h..(hh + 1) * d_h];
            for j in 0..d_h {
                acc += urow[j] * h_prev[j];
            }
            z[gate][hh] = acc;
        }
    }
    let i: Vec<f64> = z[0].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = z[1].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = z[2].iter().map(|&v| v.tanh()).collect();
    let o: Vec<f64> = z[3].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..d_h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..d_h).map(|k| o[k] * tanh_c[k]).collect();

    let w_out = &th[lay.w_out..lay.w_out + vocab * d_h];
    let b_out = &th[lay.b_out..lay.b_out + vocab];
    let mut logits = vec![0.0f64; vocab];
    for a in 0..vocab {
        let mut acc = b_out[a];
        let row = &w_out[a * d_h..(a + 1) * d_h];
        for j in 0..d_h {
            acc += row[j] * h[j];
        }
        logits[a] = acc;
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    for v in &mut probs {
        *v /= sum;
    }

    StepCache {
        input: token,
        i,
        f,
        g,
        o,
        c_prev: c_prev.to_vec(),
        h_prev: h_prev.to_vec(),
        tanh_c,
        h,
        probs,
    }
}

fn replay(p: &ControllerParams, actions: &[u16]) -> Result<Vec<StepCache>> {
    let mut caches = Vec::with_capacity(actions.len());
    let mut h = vec![0.0; p.d_h];
    let mut c = vec![0.0; p.d_h];
    let mut token = p.start_token();
    for &a in actions {
        if (a as usize) >= p.vocab {
            return Err(Error::Config(format!("action {a} outside vocab {}", p.vocab)));
        }
        let cache = step(p, token, &h, &c);
        h = cache.h.clone();
        c = (0..p.d_h).map(|k| cache.f[k] * cache.c_prev[k] + cache.i[k] * cache.g[k]).collect();
        token = a as usize;
        caches.push(cache);
    }
    Ok(caches)
}

/// Samples an n-step episode: zero initial state, null start token, each
/// sampled action's embedding feeds the next step. One uniform draw per
/// step.
pub fn sample_genome<R: Rng>(p: &ControllerParams, n: usize, rng: &mut R) -> Episode {
    let mut actions = Vec::with_capacity(n);
    let mut log_probs = Vec::with_capacity(n);
    let mut h = vec![0.0; p.d_h];
    let mut c = vec![0.0; p.d_h];
    let mut token = p.start_token();
    for _ in 0..n {
        let cache = step(p, token, &h, &c);
        let u: f64 = rng.random();
        let mut chosen = p.vocab - 1;
        let mut cum = 0.0;
        for (a, &pr) in cache.probs.iter().enumerate() {
            cum += pr;
            if u < cum {
                chosen = a;
                break;
            }
        }
        actions.push(chosen as u16);
        log_probs.push(cache.probs[chosen].ln());
        h = cache.h.clone();
        c = (0..p.d_h).map(|k| cache.f[k] * cache.c_prev[k] + cache.i[k] * cache.g[k]).collect();
        token = chosen;
    }
    Episode { actions, log_probs, reward: 0.0 }
}

/// Discounted episode objective sum_t gamma^t * r * log p(a_t | s_t),
/// with t counted from 1, evaluated by teacher-forced replay.
pub fn episode_log_prob(p: &ControllerParams, actions: &[u16], reward: f64, gamma: f64) -> Result<f64> {
    let caches = replay(p, actions)?;
    let mut total = 0.0;
    let mut kappa = 1.0;
    for (cache, &a) in caches.iter().zip(actions) {
        kappa *= gamma;
        total += kappa * reward * cache.probs[a as usize].ln();
    }
    Ok(total)
}

/// Analytic gradient of [`episode_log_prob`] with respect to every
/// parameter, via backpropagation through softmax, LSTM, and embedding.
pub fn episode_log_prob_grad(p: &ControllerParams, ep: &Episode, gamma: f64) -> Result<Vec<f64>> {
    grad_with_reward(p, &ep.actions, ep.reward, gamma)
}

fn grad_with_reward(p: &ControllerParams, actions: &[u16], reward: f64, gamma: f64) -> Result<Vec<f64>> {
    let caches = replay(p, actions)?;
    let lay = layout(p.vocab, p.d_e, p.d_h);
    let (d_e, d_h, vocab) = (p.d_e, p.d_h, p.vocab);
    let th = &p.theta;
    let mut grad = vec![0.0f64; lay.total];

    let mut dh_next = vec![0.0f64; d_h];
    let mut dc_next = vec![0.0f64; d_h];
    for (t, cache) in caches.iter().enumerate().rev() {
        let kappa = gamma.powi(t as i32 + 1) * reward;
        let a = actions[t] as usize;
        // d objective / d logits = kappa * (onehot(a) - p).
        let mut dh = dh_next.clone();
        for act in 0..vocab {
            let dlogit = kappa * ((act == a) as u8 as f64 - cache.probs[act]);
            grad[lay.b_out + act] += dlogit;
            let wrow = lay.w_out + act * d_h;
            for j in 0..d_h {
                grad[wrow + j] += dlogit * cache.h[j];
                dh[j] += th[lay.w_out + act * d_h + j] * dlogit;
            }
        }
        // LSTM cell backward.
        let mut dz = vec![vec![0.0f64; d_h]; GATES];
        let mut dc_prev = vec![0.0f64; d_h];
        for k in 0..d_h {
            let d_o = dh[k] * cache.tanh_c[k];
            let dc = dc_next[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
            let d_i = dc * cache.g[k];
            let d_g = dc * cache.i[k];
            let d_f = dc * cache.c_prev[k];
            dc_prev[k] = dc * cache.f[k];
            dz[0][k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
            dz[1][k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
            dz[2][k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
            dz[3][k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
        }
        let x_off = lay.emb + cache.input * d_e;
        let x: Vec<f64> = th[x_off..x_off + d_e].to_vec();
        let mut dh_prev = vec![0.0f64; d_h];
        let mut dx = vec![0.0f64; d_e];
        for gate in 0..GATES {
            for k in 0..d_h {
                let d = dz[gate][k];
                grad[lay.b[gate] + k] += d;
                let wrow = lay.w[gate] + k * d_e;
                for e in 0..d_e {
                    grad[wrow + e] += d * x[e];
                    dx[e] += th[wrow + e] * d;
                }
                let urow = lay.u[gate] + k * d_h;
                for j in 0..d_h {
                    grad[urow + j] += d * cache.h_prev[j];
                    dh_prev[j] += th[urow + j] * d;
                }
            }
        }
        for e in 0..d_e {
            grad[x_off + e] += dx[e];
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    Ok(grad)
}

/// One gradient-ascent step on the mini-batch mean gradient. A non-finite
/// gradient aborts the step with the parameters untouched. The moving
/// average baseline, when enabled, is updated after the step.
pub fn reinforce_update(
    p: &mut ControllerParams,
    batch: &[Episode],
    cfg: &ReinforceConfig,
    baseline: &mut Option<f64>,
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let base = match cfg.baseline {
        Baseline::None => 0.0,
        Baseline::MovingAverage { .. } => baseline.unwrap_or(0.0),
    };
    let mut mean = vec![0.0f64; p.num_params()];
    for ep in batch {
        let g = grad_with_reward(p, &ep.actions, ep.reward - base, cfg.gamma)?;
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for m in &mut mean {
        *m *= scale;
        if !m.is_finite() {
            return Err(Error::NonFinite { context: "reinforce gradient" });
        }
    }
    for (t, m) in p.theta.iter_mut().zip(&mean) {
        *t += cfg.learning_rate * m;
    }
    if let Baseline::MovingAverage { decay } = cfg.baseline {
        let mean_r = batch.iter().map(|e| e.reward).sum::<f64>() / batch.len() as f64;
        *baseline = Some(match *baseline {
            Some(old) => decay * old + (1.0 - decay) * mean_r,
            None => mean_r,
        });
    }
    Ok(())
}
