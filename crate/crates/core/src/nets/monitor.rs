//! End-to-end and two-step reachability monitors: architectures, training
//! pipelines, prediction and checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{softmax, to_channel_major, to_time_major, Activation, LayerSpec, Net, NetSpec};
use super::train::{fine_tune, train_classifier, train_estimator, TrainOpts};
use crate::data::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::rng::{self, substream};
use crate::store::{self, Array};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    EndToEnd,
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Small networks and short schedules that train on a CPU in minutes.
    Desk,
    /// Full-size networks and the original optimiser settings.
    Paper,
}

const DROPOUT: f64 = 0.2;

fn conv(filters: usize, kernel: usize, activation: Activation) -> LayerSpec {
    LayerSpec::Conv {
        filters,
        kernel,
        activation,
    }
}

impl Profile {
    /// Classifier over a `channels x len` window with a nonnegative two-unit head.
    pub fn classifier_spec(self, channels: usize, len: usize) -> NetSpec {
        let (filters, depth, hidden) = match self {
            Profile::Desk => (32, 2, 64),
            Profile::Paper => (128, 4, 100),
        };
        let mut layers: Vec<LayerSpec> = (0..depth).map(|_| conv(filters, 3, Activation::LeakyRelu)).collect();
        layers.push(LayerSpec::Dropout { rate: DROPOUT });
        layers.push(LayerSpec::Dense {
            width: hidden,
            activation: Activation::LeakyRelu,
        });
        layers.push(LayerSpec::Dense {
            width: 2,
            activation: Activation::Relu,
        });
        NetSpec {
            in_channels: channels,
            in_len: len,
            layers,
        }
    }

    /// Fully convolutional estimator mapping observations to states in `[-1, 1]`.
    pub fn estimator_spec(self, obs_dim: usize, state_dim: usize, len: usize) -> NetSpec {
        let (filters, hidden) = match self {
            Profile::Desk => (32, 2),
            Profile::Paper => (128, 4),
        };
        let mut layers: Vec<LayerSpec> = (0..hidden).map(|_| conv(filters, 5, Activation::LeakyRelu)).collect();
        layers.push(LayerSpec::Dropout { rate: DROPOUT });
        layers.push(conv(state_dim, 5, Activation::Tanh));
        NetSpec {
            in_channels: obs_dim,
            in_len: len,
            layers,
        }
    }

    pub fn schedule(self, seed: u64) -> Schedule {
        let opts = |lr, epochs| TrainOpts {
            lr,
            epochs,
            batch: 64,
            seed,
        };
        match self {
            Profile::Desk => Schedule {
                end_to_end: opts(1e-3, 40),
                estimator: opts(1e-3, 40),
                classifier: opts(1e-3, 40),
                fine_tune: opts(1e-4, 10),
            },
            Profile::Paper => Schedule {
                end_to_end: opts(1e-5, 200),
                estimator: opts(1e-6, 200),
                classifier: opts(1e-6, 200),
                fine_tune: opts(1e-7, 100),
            },
        }
    }
}

/// Optimiser settings of every training phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub end_to_end: TrainOpts,
    pub estimator: TrainOpts,
    pub classifier: TrainOpts,
    pub fine_tune: TrainOpts,
}

impl Schedule {
    pub fn with_seed(mut self, seed: u64) -> Self {
        for o in [
            &mut self.end_to_end,
            &mut self.estimator,
            &mut self.classifier,
            &mut self.fine_tune,
        ] {
            o.seed = seed;
        }
        self
    }

    /// Multiplies every epoch count by `factor`, rounding up.
    pub fn scale_epochs(mut self, factor: f64) -> Self {
        for o in [
            &mut self.end_to_end,
            &mut self.estimator,
            &mut self.classifier,
            &mut self.fine_tune,
        ] {
            o.epochs = (o.epochs as f64 * factor).ceil() as usize;
        }
        self
    }
}

/// Scaled, channel-major network inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub obs_dim: usize,
    pub state_dim: usize,
    pub window: usize,
    pub obs: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn from_dataset(ds: &Dataset, scaler: &Scaler) -> Self {
        Self {
            obs_dim: ds.obs_dim,
            state_dim: ds.state_dim,
            window: ds.window,
            obs: ds
                .samples
                .iter()
                .map(|s| to_channel_major(&scaler.scale_obs(&s.obs), ds.obs_dim))
                .collect(),
            states: ds
                .samples
                .iter()
                .map(|s| to_channel_major(&scaler.scale_states(&s.states), ds.state_dim))
                .collect(),
            labels: ds.samples.iter().map(|s| s.label.index()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            obs: idx.iter().map(|&i| self.obs[i].clone()).collect(),
            states: idx.iter().map(|&i| self.states[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            ..*self
        }
    }

    pub fn extend(&mut self, other: &Examples) {
        self.obs.extend(other.obs.iter().cloned());
        self.states.extend(other.states.iter().cloned());
        self.labels.extend(other.labels.iter().copied());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    /// Softmax-normalised class likelihoods.
    pub likelihoods: [f64; 2],
    /// Reconstructed scaled state window (channel-major), two-step only.
    pub states: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub schedule: Schedule,
    pub seed: u64,
    /// Per-epoch training losses of each phase, in the order they ran.
    pub losses: BTreeMap<String, Vec<f64>>,
    /// Set when fine-tuning was discarded for diverging or hurting held-out accuracy.
    pub fine_tune_reverted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorModel {
    pub kind: MonitorKind,
    /// The end-to-end classifier, or the state classifier of a two-step monitor.
    pub classifier: Net,
    pub estimator: Option<Net>,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub window: usize,
    pub meta: TrainMeta,
}

/// Largest likelihood wins; ties go to label 0.
fn decide(out: &[f64]) -> ([f64; 2], usize) {
    let p = softmax(out);
    let lik = [p[0], p[1]];
    (lik, usize::from(lik[1] > lik[0]))
}

/// Accuracy guard for fine-tuning: tolerated drop on held-out data.
const FINE_TUNE_TOLERANCE: f64 = 0.005;

impl MonitorModel {
    /// Freshly initialised, untrained monitor.
    pub fn init(kind: MonitorKind, profile: Profile, ex: &Examples, seed: u64) -> Result<Self> {
        let classifier_in = match kind {
            MonitorKind::EndToEnd => ex.obs_dim,
            MonitorKind::TwoStep => ex.state_dim,
        };
        let classifier = Net::init(
            profile.classifier_spec(classifier_in, ex.window),
            &mut substream(seed, rng::stream::INIT),
        )?;
        let estimator = match kind {
            MonitorKind::EndToEnd => None,
            MonitorKind::TwoStep => Some(Net::init(
                profile.estimator_spec(ex.obs_dim, ex.state_dim, ex.window),
                &mut substream(seed, rng::stream::INIT + 1),
            )?),
        };
        Ok(Self {
            kind,
            classifier,
            estimator,
            obs_dim: ex.obs_dim,
            state_dim: ex.state_dim,
            window: ex.window,
            meta: TrainMeta {
                schedule: profile.schedule(seed),
                seed,
                losses: BTreeMap::new(),
                fine_tune_reverted: false,
            },
        })
    }

    /// Initialises and trains a monitor. `holdout`, when given, guards the
    /// two-step fine-tuning phase.
    pub fn train(
        kind: MonitorKind,
        profile: Profile,
        schedule: &Schedule,
        train: &Examples,
        holdout: Option<&Examples>,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::init(kind, profile, train, seed)?;
        model.fit(schedule, train, holdout)?;
        Ok(model)
    }

    /// Continues training from the current weights.
    pub fn fit(&mut self, schedule: &Schedule, train: &Examples, holdout: Option<&Examples>) -> Result<()> {
        self.meta.schedule = *schedule;
        match self.kind {
            MonitorKind::EndToEnd => {
                let t = train_classifier(self.classifier.clone(), &train.obs, &train.labels, &schedule.end_to_end)?;
                self.classifier = t.net;
                self.meta.losses.insert("end_to_end".into(), t.losses);
            }
            MonitorKind::TwoStep => {
                let est = self.estimator.clone().expect("two-step monitor has an estimator");
                let t_est = train_estimator(est, &train.obs, &train.states, &schedule.estimator)?;
                let t_cls = train_classifier(
                    self.classifier.clone(),
                    &train.states,
                    &train.labels,
                    &schedule.classifier,
                )?;
                self.estimator = Some(t_est.net);
                self.classifier = t_cls.net;
                self.meta.losses.insert("estimator".into(), t_est.losses);
                self.meta.losses.insert("classifier".into(), t_cls.losses);
                self.fine_tune_guarded(schedule, train, holdout)?;
            }
        }
        Ok(())
    }

    fn fine_tune_guarded(&mut self, schedule: &Schedule, train: &Examples, holdout: Option<&Examples>) -> Result<()> {
        let est = self.estimator.as_ref().expect("two-step monitor has an estimator");
        let tuned = fine_tune(
            est,
            &self.classifier,
            &train.obs,
            &train.states,
            &train.labels,
            &schedule.fine_tune,
        );
        let (e, c, losses) = match tuned {
            Ok(t) => t,
            Err(Error::Numerical(msg)) => {
                log::warn!("fine-tuning diverged, keeping pre-trained weights: {msg}");
                self.meta.fine_tune_reverted = true;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let candidate = Self {
            classifier: c,
            estimator: Some(e),
            ..self.clone()
        };
        if let Some(h) = holdout {
            let before = self.accuracy(h)?;
            let after = candidate.accuracy(h)?;
            if after < before - FINE_TUNE_TOLERANCE {
                log::warn!("fine-tuning lowered held-out accuracy {before:.4} -> {after:.4}; reverted");
                self.meta.fine_tune_reverted = true;
                self.meta.losses.insert("fine_tune".into(), losses);
                return Ok(());
            }
        }
        self.classifier = candidate.classifier;
        self.estimator = candidate.estimator;
        self.meta.fine_tune_reverted = false;
        self.meta.losses.insert("fine_tune".into(), losses);
        Ok(())
    }

    /// Reconstructed scaled state window, channel-major (two-step only).
    pub fn estimate(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let est = self
            .estimator
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("end-to-end monitors do not estimate states".into()))?;
        est.forward(obs)
    }

    /// Predicts from a scaled, channel-major observation window.
    pub fn predict(&self, obs: &[f64]) -> Result<Prediction> {
        match self.kind {
            MonitorKind::EndToEnd => {
                let (likelihoods, label) = decide(&self.classifier.forward(obs)?);
                Ok(Prediction {
                    label,
                    likelihoods,
                    states: None,
                })
            }
            MonitorKind::TwoStep => {
                let states = self.estimate(obs)?;
                let (likelihoods, label) = decide(&self.classifier.forward(&states)?);
                Ok(Prediction {
                    label,
                    likelihoods,
                    states: Some(states),
                })
            }
        }
    }

    pub fn predict_all(&self, ex: &Examples) -> Result<Vec<Prediction>> {
        ex.obs.iter().map(|o| self.predict(o)).collect()
    }

    pub fn accuracy(&self, ex: &Examples) -> Result<f64> {
        if ex.is_empty() {
            return Err(Error::InsufficientData("accuracy of an empty set".into()));
        }
        let preds = self.predict_all(ex)?;
        let hits = preds.iter().zip(&ex.labels).filter(|(p, l)| p.label == **l).count();
        Ok(hits as f64 / ex.len() as f64)
    }

    /// Reconstructed state window in physical units, time-major.
    pub fn estimate_physical(&self, obs: &[f64], scaler: &Scaler) -> Result<Vec<f64>> {
        let cm = self.estimate(obs)?;
        Ok(scaler.unscale_states(&to_time_major(&cm, self.state_dim)))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = CheckpointMeta {
            kind: self.kind,
            obs_dim: self.obs_dim,
            state_dim: self.state_dim,
            window: self.window,
            classifier: self.classifier.spec().clone(),
            estimator: self.estimator.as_ref().map(|e| e.spec().clone()),
            train: self.meta.clone(),
        };
        let f32s = |n: &Net| Array::F32(n.params.iter().map(|&p| p as f32).collect());
        let mut arrays = vec![("classifier", f32s(&self.classifier))];
        if let Some(e) = &self.estimator {
            arrays.push(("estimator", f32s(e)));
        }
        store::write(dir, CHECKPOINT_KIND, &meta, &arrays)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (meta, mut arrays): (CheckpointMeta, _) = store::read(dir, CHECKPOINT_KIND)?;
        let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
        let classifier = Net::from_params(meta.classifier, widen(arrays.take_f32("classifier")?))?;
        let estimator = match meta.estimator {
            Some(spec) => Some(Net::from_params(spec, widen(arrays.take_f32("estimator")?))?),
            None => None,
        };
        let model = Self {
            kind: meta.kind,
            classifier,
            estimator,
            obs_dim: meta.obs_dim,
            state_dim: meta.state_dim,
            window: meta.window,
            meta: meta.train,
        };
        if !model.classifier.is_finite() || model.estimator.as_ref().is_some_and(|e| !e.is_finite()) {
            return Err(Error::Integrity {
                path: dir.to_path_buf(),
                reason: "non-finite weights".into(),
            });
        }
        if (model.kind == MonitorKind::TwoStep) != model.estimator.is_some() {
            return Err(Error::Meta {
                path: dir.join("meta.json"),
                reason: "estimator presence does not match monitor kind".into(),
            });
        }
        Ok(model)
    }
}

const CHECKPOINT_KIND: &str = "monitor";

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: MonitorKind,
    obs_dim: usize,
    state_dim: usize,
    window: usize,
    classifier: NetSpec,
    estimator: Option<NetSpec>,
    train: TrainMeta,
}
