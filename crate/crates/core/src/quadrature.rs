//! Gauss-Hermite rule for `int exp(-x^2) f(x) dx`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use crate::error::{Error, Result};

/// Nodes in increasing order and weights of the `order`-point rule.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        let n = NonZeroUsize::new(order)
            .ok_or_else(|| Error::InvalidConfig("quadrature order must be >= 1".into()))?;
        let mut pairs = gauss_quad::hermite::GaussHermite::new(n).into_node_weight_pairs().into_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if nodes.windows(2).any(|w| w[0] >= w[1]) || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig(format!("Gauss-Hermite rule of order {order} is ill-formed")));
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E[f(X)]` for `X` with density proportional to `exp(-(x - mu)^2 / s^2)`.
    pub fn expectation(&self, mu: f64, s: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let norm = PI.sqrt().recip();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * norm * f(mu + s * x))
            .sum()
    }
}
