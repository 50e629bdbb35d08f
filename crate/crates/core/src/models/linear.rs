//! User-supplied linear systems `v' = A v` loaded from a plain-text file.
//!
//! The file is a header of `key value...` lines followed by the matrix:
//!
//! ```text
//! # lines starting with '#' are comments
//! name           heli          (optional)
//! dim            3
//! dt             0.1
//! substeps       1             (optional, default 1)
//! past_horizon   5
//! future_horizon 5
//! observe        2             (0-based observed components)
//! noise_std      1.0           (one per observed component, or one value)
//! unsafe         2 <= 0.0      (component, `<=` or `>=`, threshold)
//! init           -1 1 -1 1 0 2 (optional low/high pairs, default [-1, 1])
//! A
//! a11 a12 a13
//! a21 a22 a23
//! a31 a32 a33
//! ```
//!
//! Rows of `A` are whitespace separated and given in row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dynamics, HybridSystemSpec, Plant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearSystem {
    pub dim: usize,
    /// Row-major `dim x dim`.
    pub a: Vec<f64>,
    pub observed: Vec<usize>,
    pub unsafe_dim: usize,
    pub comparison: Comparison,
    pub threshold: f64,
}

impl Plant for LinearSystem {
    fn derivative(&self, v: &[f64], _q: u32, _a: &[f64], dv: &mut [f64]) {
        for (i, row) in self.a.chunks_exact(self.dim).enumerate() {
            dv[i] = row.iter().zip(v).map(|(x, y)| x * y).sum();
        }
    }

    fn observe(&self, v: &[f64], _q: u32) -> Vec<f64> {
        self.observed.iter().map(|&i| v[i]).collect()
    }

    fn is_unsafe(&self, v: &[f64], _q: u32) -> bool {
        let x = v[self.unsafe_dim];
        match self.comparison {
            Comparison::AtMost => x <= self.threshold,
            Comparison::AtLeast => x >= self.threshold,
        }
    }
}

pub fn load_linear_system(path: impl AsRef<Path>) -> Result<HybridSystemSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "linear".into());
    parse_linear_system(&format!("linear:{stem}"), &text)
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedSystem(msg.into())
}

fn num<T: std::str::FromStr>(tok: &str, key: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| malformed(format!("bad value `{tok}` for `{key}`")))
}

pub fn parse_linear_system(default_name: &str, text: &str) -> Result<HybridSystemSpec> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());

    let mut name = default_name.to_string();
    let mut dim = None;
    let mut dt = None;
    let mut substeps = 1usize;
    let mut hp = None;
    let mut hf = None;
    let mut observed: Option<Vec<usize>> = None;
    let mut noise: Option<Vec<f64>> = None;
    let mut unsafe_rule = None;
    let mut init: Option<Vec<f64>> = None;
    let mut saw_matrix = false;

    for line in lines.by_ref() {
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let rest: Vec<&str> = toks.collect();
        fn single<'a>(key: &str, rest: &[&'a str]) -> Result<&'a str> {
            match rest {
                [v] => Ok(v),
                _ => Err(malformed(format!("`{key}` takes exactly one value"))),
            }
        }
        match key {
            "name" => name = single(key, &rest)?.to_string(),
            "dim" => dim = Some(num::<usize>(single(key, &rest)?, key)?),
            "dt" => dt = Some(num::<f64>(single(key, &rest)?, key)?),
            "substeps" => substeps = num(single(key, &rest)?, key)?,
            "past_horizon" => hp = Some(num::<usize>(single(key, &rest)?, key)?),
            "future_horizon" => hf = Some(num::<usize>(single(key, &rest)?, key)?),
            "observe" => observed = Some(rest.iter().map(|t| num(t, key)).collect::<Result<_>>()?),
            "noise_std" => noise = Some(rest.iter().map(|t| num(t, key)).collect::<Result<_>>()?),
            "init" => init = Some(rest.iter().map(|t| num(t, key)).collect::<Result<_>>()?),
            "unsafe" => {
                let [idx, op, thr] = rest[..] else {
                    return Err(malformed("`unsafe` expects `<index> <=|>= <threshold>`"));
                };
                let cmp = match op {
                    "<=" => Comparison::AtMost,
                    ">=" => Comparison::AtLeast,
                    _ => return Err(malformed(format!("unknown comparison `{op}`"))),
                };
                unsafe_rule = Some((num::<usize>(idx, key)?, cmp, num::<f64>(thr, key)?));
            }
            "A" => {
                saw_matrix = true;
                break;
            }
            other => return Err(malformed(format!("unknown key `{other}`"))),
        }
    }

    let dim = dim.ok_or_else(|| malformed("missing `dim`"))?;
    if dim == 0 {
        return Err(malformed("`dim` must be positive"));
    }
    if !saw_matrix {
        return Err(malformed("missing `A` block"));
    }
    let mut a = Vec::with_capacity(dim * dim);
    for line in lines {
        let row: Vec<f64> = line.split_whitespace().map(|t| num(t, "A")).collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(malformed(format!(
                "matrix row has {} entries, expected {dim}",
                row.len()
            )));
        }
        a.extend(row);
    }
    if a.len() != dim * dim {
        return Err(malformed(format!("matrix has {} rows, expected {dim}", a.len() / dim)));
    }

    let observed = observed.ok_or_else(|| malformed("missing `observe`"))?;
    if observed.is_empty() || observed.iter().any(|&i| i >= dim) {
        return Err(malformed("observed indices must be in 0..dim"));
    }
    let noise_std = match noise {
        Some(v) if v.len() == observed.len() => v,
        Some(v) if v.len() == 1 => vec![v[0]; observed.len()],
        Some(_) => return Err(malformed("noise_std length must match observe")),
        None => vec![0.0; observed.len()],
    };
    let (unsafe_dim, comparison, threshold) = unsafe_rule.ok_or_else(|| malformed("missing `unsafe`"))?;
    if unsafe_dim >= dim {
        return Err(malformed("unsafe component out of range"));
    }
    let init_domain = match init {
        None => vec![(-1.0, 1.0); dim],
        Some(v) if v.len() == 2 * dim => v.chunks_exact(2).map(|p| (p[0], p[1])).collect(),
        Some(_) => return Err(malformed("init needs a low/high pair per dimension")),
    };

    let spec = HybridSystemSpec {
        name,
        obs_dim: observed.len(),
        dynamics: Dynamics::Linear(LinearSystem {
            dim,
            a,
            observed,
            unsafe_dim,
            comparison,
            threshold,
        }),
        state_dim: dim,
        noise_std,
        init_domain,
        past_horizon: hp.ok_or_else(|| malformed("missing `past_horizon`"))?,
        future_horizon: hf.ok_or_else(|| malformed("missing `future_horizon`"))?,
        dt: dt.ok_or_else(|| malformed("missing `dt`"))?,
        substeps,
    };
    spec.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HybridState;

    const DECAY: &str = "\
# scalar exponential decay
dim 1
dt 0.1
past_horizon 1
future_horizon 3
observe 0
noise_std 0.0
unsafe 0 <= 0.0
A
-1
";

    #[test]
    fn one_rk4_step_of_exponential_decay() {
        let spec = parse_linear_system("decay", DECAY).unwrap();
        let next = spec.step(&HybridState::new(vec![1.0], 0)).unwrap();
        assert!((next.v[0] - 0.9048375).abs() < 1e-6);
        assert!((next.v[0] - (-0.1f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_matrix_gives_constant_trajectory() {
        let text = DECAY.replace("\n-1\n", "\n0\n");
        let spec = parse_linear_system("zero", &text).unwrap();
        let tr = spec.simulate(&HybridState::new(vec![0.7], 0), 5).unwrap();
        assert!(tr.states.iter().all(|s| s.v == vec![0.7]));
    }

    #[test]
    fn altitude_threshold_predicate() {
        let text =
            "dim 2\ndt 0.1\npast_horizon 5\nfuture_horizon 5\nobserve 1\nnoise_std 1\nunsafe 1 <= 0\nA\n0 1\n0 0\n";
        let spec = parse_linear_system("alt", text).unwrap();
        for z in [-1.0, -1e-12, 0.0, 1e-12, 2.0] {
            let s = HybridState::new(vec![0.0, z], 0);
            assert_eq!(spec.is_unsafe(&s), z <= 0.0, "z = {z}");
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let cases = [
            DECAY.replace("dim 1", "dim 2"),
            DECAY.replace("A\n", ""),
            DECAY.replace("observe 0", "observe 3"),
            DECAY.replace("dt 0.1", "dt fast"),
            DECAY.replace("unsafe 0 <= 0.0", "unsafe 0 < 0.0"),
            DECAY.replace("dim 1", "dim 1\nwhatever 2"),
        ];
        for text in cases {
            assert!(
                matches!(parse_linear_system("x", &text), Err(Error::MalformedSystem(_))),
                "accepted:\n{text}"
            );
        }
    }
}
