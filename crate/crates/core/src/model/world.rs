use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ObservationModel;
use crate::error::{Error, Result};
use crate::graph::{FactorGraph, Surgery};
use crate::rng::{categorical, seeded};

/// Hidden assignment plus every observation of one realization.
/// `reveal[i]` is `Some(x[i])` when the reveal channel fired, `None` for `*`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    pub reveal: Vec<Option<usize>>,
}

impl World {
    /// Checks lengths and symbol ranges against a graph and model.
    pub fn check(&self, g: &FactorGraph, model: &ObservationModel) -> Result<()> {
        let (n, m, q) = (g.n(), g.m(), model.q());
        for (name, len, want) in [("x", self.x.len(), n), ("z", self.z.len(), n), ("reveal", self.reveal.len(), n), ("y", self.y.len(), m)] {
            if len != want {
                return Err(Error::Validation(format!("world.{name} has length {len}, graph needs {want}")));
            }
        }
        let s_side = model.side_kernel().output_alphabet();
        for i in 0..n {
            if self.x[i] >= q {
                return Err(Error::Validation(format!("world.x[{i}] = {} outside alphabet of size {q}", self.x[i])));
            }
            if self.z[i] >= s_side {
                return Err(Error::Validation(format!("world.z[{i}] = {} outside R outputs", self.z[i])));
            }
            if let Some(v) = self.reveal[i] {
                if v >= q {
                    return Err(Error::Validation(format!("world.reveal[{i}] = {v} outside alphabet")));
                }
            }
        }
        for a in 0..m {
            let s = model.factor_kernel(g.fac_neighbors(a).len())?.output_alphabet();
            if self.y[a] >= s {
                return Err(Error::Validation(format!("world.y[{a}] = {} outside Q outputs", self.y[a])));
            }
        }
        Ok(())
    }

    /// Observations that survive graph surgery, re-indexed to the new graph.
    pub fn restrict(&self, surgery: &Surgery) -> World {
        let vars = surgery.var_origin();
        let facs = surgery.fac_origin();
        World {
            x: vars.iter().map(|&i| self.x[i]).collect(),
            z: vars.iter().map(|&i| self.z[i]).collect(),
            reveal: vars.iter().map(|&i| self.reveal[i]).collect(),
            y: facs.iter().map(|&a| self.y[a]).collect(),
        }
    }

    /// Copy with the reveal at each listed variable replaced by `*`.
    pub fn masked(&self, vars: &[usize]) -> World {
        let mut w = self.clone();
        for &i in vars {
            w.reveal[i] = None;
        }
        w
    }
}

/// A world before the reveal mask is fixed: each variable carries a uniform
/// `u[i]` and is revealed at level `theta` iff `u[i] < theta`. Evaluating
/// the same draw at several `theta` gives common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct CrnWorld {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    pub u: Vec<f64>,
}

impl CrnWorld {
    pub fn at(&self, theta: f64) -> World {
        World {
            x: self.x.clone(),
            y: self.y.clone(),
            z: self.z.clone(),
            reveal: self
                .x
                .iter()
                .zip(&self.u)
                .map(|(&x, &u)| (u < theta).then_some(x))
                .collect(),
        }
    }
}

/// Draws `x` iid from the prior, then `z_i ~ R(.|x_i)`, then
/// `y_a ~ Q^(|da|)(.|x_da)`, then the reveal uniforms.
pub fn sample_crn_world<R: Rng + ?Sized>(g: &FactorGraph, model: &ObservationModel, rng: &mut R) -> Result<CrnWorld> {
    let kernels = (0..g.m())
        .map(|a| model.factor_kernel(g.fac_neighbors(a).len()))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<usize> = (0..g.n()).map(|_| categorical(rng, model.prior().probs())).collect();
    let side = model.side_kernel();
    let z = x.iter().map(|&xi| categorical(rng, side.dist(&[xi]))).collect();
    let mut inputs = Vec::new();
    let y = (0..g.m())
        .map(|a| {
            inputs.clear();
            inputs.extend(g.fac_neighbors(a).iter().map(|&i| x[i]));
            categorical(rng, kernels[a].dist(&inputs))
        })
        .collect();
    let u = (0..g.n()).map(|_| rng.random::<f64>()).collect();
    Ok(CrnWorld { x, y, z, u })
}

pub fn sample_world_with<R: Rng + ?Sized>(g: &FactorGraph, model: &ObservationModel, theta: f64, rng: &mut R) -> Result<World> {
    Ok(sample_crn_world(g, model, rng)?.at(theta))
}

/// Samples a world at the model's own `theta`.
pub fn sample_world(g: &FactorGraph, model: &ObservationModel, seed: u64) -> Result<World> {
    sample_world_with(g, model, model.theta(), &mut seeded(seed))
}
