use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, GenMode, Sample, Scaler};
use crate::error::{Error, Result};
use crate::reach::ReachLabel;
use crate::store::{self, Array};

const KIND: &str = "dataset";

#[derive(Serialize, Deserialize)]
struct Meta {
    model: String,
    mode: GenMode,
    count: usize,
    window: usize,
    state_dim: usize,
    obs_dim: usize,
    seq_len: usize,
    seed: u64,
    scaler: Option<Scaler>,
}

pub fn save(ds: &Dataset, dir: &Path) -> Result<()> {
    let meta = Meta {
        model: ds.model.clone(),
        mode: ds.mode,
        count: ds.len(),
        window: ds.window,
        state_dim: ds.state_dim,
        obs_dim: ds.obs_dim,
        seq_len: ds.seq_len,
        seed: ds.seed,
        scaler: ds.scaler.clone(),
    };
    let cat_f32 = |f: fn(&Sample) -> &[f32]| -> Array {
        Array::F32(ds.samples.iter().flat_map(|s| f(s).iter().copied()).collect())
    };
    store::write(
        dir,
        KIND,
        &meta,
        &[
            ("states", cat_f32(|s| &s.states)),
            ("observations", cat_f32(|s| &s.obs)),
            (
                "labels",
                Array::U8(ds.samples.iter().map(|s| s.label.as_u8()).collect()),
            ),
            (
                "modes",
                Array::U8(ds.samples.iter().flat_map(|s| s.modes.iter().copied()).collect()),
            ),
            ("trajectories", Array::U32(ds.samples.iter().map(|s| s.traj).collect())),
        ],
    )
}

pub fn load(dir: &Path) -> Result<Dataset> {
    let (meta, mut arrays): (Meta, _) = store::read(dir, KIND)?;
    let states = arrays.take_f32("states")?;
    let obs = arrays.take_f32("observations")?;
    let labels = arrays.take_u8("labels")?;
    let modes = arrays.take_u8("modes")?;
    let trajs = arrays.take_u32("trajectories")?;
    let n = meta.count;
    let bad = |what: &str| Error::Meta {
        path: dir.join("meta.json"),
        reason: format!("{what} inconsistent with {n} samples"),
    };
    let sw = meta.window * meta.state_dim;
    let ow = meta.window * meta.obs_dim;
    if states.len() != n * sw {
        return Err(bad("states"));
    }
    if obs.len() != n * ow {
        return Err(bad("observations"));
    }
    if labels.len() != n || trajs.len() != n {
        return Err(bad("labels"));
    }
    if modes.len() != n * meta.window {
        return Err(bad("modes"));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let label = ReachLabel::from_u8(labels[i]).map_err(|_| bad("label values"))?;
        samples.push(Sample {
            obs: obs[i * ow..(i + 1) * ow].to_vec(),
            states: states[i * sw..(i + 1) * sw].to_vec(),
            modes: modes[i * meta.window..(i + 1) * meta.window].to_vec(),
            label,
            traj: trajs[i],
        });
    }
    Ok(Dataset {
        model: meta.model,
        mode: meta.mode,
        window: meta.window,
        state_dim: meta.state_dim,
        obs_dim: meta.obs_dim,
        seq_len: meta.seq_len,
        seed: meta.seed,
        samples,
        scaler: meta.scaler,
    })
}
