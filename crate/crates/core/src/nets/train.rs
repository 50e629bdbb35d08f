//! Adam optimisation and the supervised training loops.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{cross_entropy, mse, Net};
use crate::error::{Error, Result};
use crate::rng::{self, substream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOpts {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl TrainOpts {
    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.batch == 0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} and batch {} must be positive",
                self.lr, self.batch
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Runs minibatch Adam over `n` examples. `sample_grad(i, rng, grad)` adds
/// the gradient of example `i` to `grad` and returns its loss. Returns the
/// mean training loss of every epoch.
pub(crate) fn optimise(
    params: &mut [f64],
    n: usize,
    opts: &TrainOpts,
    stream: u64,
    mut sample_grad: impl FnMut(&[f64], usize, &mut Rng, &mut [f64]) -> f64,
) -> Result<Vec<f64>> {
    opts.validate()?;
    if n == 0 && opts.epochs > 0 {
        return Err(Error::InsufficientData("no training examples".into()));
    }
    let mut rng = substream(opts.seed, rng::stream::TRAIN + stream);
    let mut adam = Adam::new(params.len(), opts.lr);
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(opts.batch) {
            grad.fill(0.0);
            for &i in chunk {
                total += sample_grad(params, i, &mut rng, &mut grad);
            }
            let scale = 1.0 / chunk.len() as f64;
            for g in &mut grad {
                *g *= scale;
            }
            adam.step(params, &grad);
        }
        let mean = total / n as f64;
        if !mean.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!(
                "training diverged in epoch {epoch} (mean loss {mean})"
            )));
        }
        log::debug!("epoch {epoch}: loss {mean:.6}");
        history.push(mean);
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub net: Net,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
}

/// Trains `net` in place as a two-class classifier (softmax cross-entropy).
pub fn train_classifier(mut net: Net, inputs: &[Vec<f64>], labels: &[usize], opts: &TrainOpts) -> Result<Trained> {
    if inputs.len() != labels.len() {
        return Err(Error::Shape("inputs and labels differ in length".into()));
    }
    let mut params = net.params.clone();
    let losses = optimise(&mut params, inputs.len(), opts, 0, |p, i, rng, grad| {
        let trace = net
            .forward_trace_with(p, &inputs[i], Some(rng))
            .expect("input shape checked");
        let (loss, g) = cross_entropy(trace.output(), labels[i]);
        net.backward_with(p, &trace, &g, grad);
        loss
    });
    net.params = params;
    let losses = losses?;
    net.round_to_f32();
    Ok(Trained { net, losses })
}

/// Trains `net` in place as a regressor (mean squared error).
pub fn train_estimator(mut net: Net, inputs: &[Vec<f64>], targets: &[Vec<f64>], opts: &TrainOpts) -> Result<Trained> {
    if inputs.len() != targets.len() {
        return Err(Error::Shape("inputs and targets differ in length".into()));
    }
    if let Some(t) = targets.first() {
        if t.len() != net.output_size() {
            return Err(Error::Shape(format!(
                "targets of {} values, network outputs {}",
                t.len(),
                net.output_size()
            )));
        }
    }
    let mut params = net.params.clone();
    let losses = optimise(&mut params, inputs.len(), opts, 1, |p, i, rng, grad| {
        let trace = net
            .forward_trace_with(p, &inputs[i], Some(rng))
            .expect("input shape checked");
        let (loss, g) = mse(trace.output(), &targets[i]);
        net.backward_with(p, &trace, &g, grad);
        loss
    });
    net.params = params;
    let losses = losses?;
    net.round_to_f32();
    Ok(Trained { net, losses })
}

/// Loss and gradient of `mse(est(y), s) + ce(cls(est(y)), l)` for one example.
/// Gradients for the estimator and classifier go to `g_est` and `g_cls`.
#[allow(clippy::too_many_arguments)]
pub fn combined_grad(
    est: &Net,
    cls: &Net,
    obs: &[f64],
    states: &[f64],
    label: usize,
    mut rng: Option<&mut Rng>,
    g_est: &mut [f64],
    g_cls: &mut [f64],
) -> Result<f64> {
    let t_est = est.forward_trace(obs, rng.as_deref_mut())?;
    let t_cls = cls.forward_trace(t_est.output(), rng)?;
    let (l_ce, g_out) = cross_entropy(t_cls.output(), label);
    let through = cls.backward(&t_cls, &g_out, g_cls);
    let (l_mse, mut g_rec) = mse(t_est.output(), states);
    for (a, b) in g_rec.iter_mut().zip(&through) {
        *a += b;
    }
    est.backward(&t_est, &g_rec, g_est);
    Ok(l_mse + l_ce)
}

/// Jointly updates an estimator and a classifier on the combined loss.
/// Divergence leaves both networks untouched and is reported as an error.
pub fn fine_tune(
    est: &Net,
    cls: &Net,
    obs: &[Vec<f64>],
    states: &[Vec<f64>],
    labels: &[usize],
    opts: &TrainOpts,
) -> Result<(Net, Net, Vec<f64>)> {
    if obs.len() != states.len() || obs.len() != labels.len() {
        return Err(Error::Shape("fine-tuning inputs differ in length".into()));
    }
    if opts.epochs == 0 {
        return Ok((est.clone(), cls.clone(), Vec::new()));
    }
    let n_est = est.n_params();
    let mut params: Vec<f64> = est.params.iter().chain(&cls.params).copied().collect();
    let mut e = est.clone();
    let mut c = cls.clone();
    let losses = optimise(&mut params, obs.len(), opts, 2, |p, i, rng, grad| {
        e.params.copy_from_slice(&p[..n_est]);
        c.params.copy_from_slice(&p[n_est..]);
        let (ge, gc) = grad.split_at_mut(n_est);
        combined_grad(&e, &c, &obs[i], &states[i], labels[i], Some(rng), ge, gc).expect("input shape checked")
    })?;
    e.params.copy_from_slice(&params[..n_est]);
    c.params.copy_from_slice(&params[n_est..]);
    e.round_to_f32();
    c.round_to_f32();
    Ok((e, c, losses))
}
