use std::f64::consts::FRAC_PI_4;

use super::{
    load_linear_system, CoupledVanDerPol, Dynamics, HybridSystemSpec, InvertedPendulum, LaubLoomis, SpikingNeuron,
    WaterTank,
};
use crate::error::{Error, Result};

pub const MODEL_NAMES: [&str; 5] = ["ip", "sn", "cvdp", "lalo", "twt"];

/// Looks up a benchmark by name; `linear:<path>` loads a linear system file.
///
/// Noise levels are standard deviations; the benchmark variances are 0.005
/// (IP), 0.1 (SN) and 0.01 (CVDP, LALO, TWT).
pub fn by_name(name: &str) -> Result<HybridSystemSpec> {
    if let Some(path) = name.strip_prefix("linear:") {
        return load_linear_system(path);
    }
    let spec = match name {
        "ip" => HybridSystemSpec {
            name: "ip".into(),
            dynamics: Dynamics::InvertedPendulum(InvertedPendulum::default()),
            state_dim: 2,
            obs_dim: 1,
            noise_std: vec![0.005f64.sqrt()],
            init_domain: vec![(-FRAC_PI_4, FRAC_PI_4), (-1.5, 1.5)],
            past_horizon: 1,
            future_horizon: 5,
            dt: 0.05,
            substeps: 1,
        },
        "sn" => HybridSystemSpec {
            name: "sn".into(),
            dynamics: Dynamics::SpikingNeuron(SpikingNeuron::default()),
            state_dim: 2,
            obs_dim: 1,
            noise_std: vec![0.1f64.sqrt()],
            init_domain: vec![(-68.5, 30.0), (0.0, 25.0)],
            past_horizon: 4,
            future_horizon: 16,
            dt: 0.05,
            substeps: 5,
        },
        "cvdp" => HybridSystemSpec {
            name: "cvdp".into(),
            dynamics: Dynamics::CoupledVanDerPol(CoupledVanDerPol::default()),
            state_dim: 4,
            obs_dim: 2,
            noise_std: vec![0.1; 2],
            init_domain: vec![(1.25, 1.55), (2.35, 2.45), (1.25, 1.55), (2.35, 2.45)],
            past_horizon: 8,
            future_horizon: 7,
            dt: 0.05,
            substeps: 1,
        },
        "lalo" => HybridSystemSpec {
            name: "lalo".into(),
            dynamics: Dynamics::LaubLoomis(LaubLoomis::default()),
            state_dim: 7,
            obs_dim: 6,
            noise_std: vec![0.1; 6],
            init_domain: vec![(1.0, 1.4); 7],
            past_horizon: 5,
            future_horizon: 20,
            dt: 0.05,
            substeps: 1,
        },
        "twt" => HybridSystemSpec {
            name: "twt".into(),
            dynamics: Dynamics::WaterTank(WaterTank::default()),
            state_dim: 3,
            obs_dim: 3,
            noise_std: vec![0.1; 3],
            init_domain: vec![(4.5, 5.5); 3],
            past_horizon: 1,
            future_horizon: 1,
            dt: 0.1,
            substeps: 1,
        },
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    Ok(spec)
}
