//! Stacked KAN layers with cached forward and reverse-mode backward.

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::bspline::Grid;
use super::layer::KanLayer;
use crate::error::{contract, Result};
use crate::linalg::RngStream;
use crate::scalar::Real;

/// How a fresh network's parameters are set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkInit {
    #[default]
    Random,
    /// All parameters zero, so the network outputs zero.
    Zero,
}

/// Architecture and initialization of a KAN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KanSpec {
    /// Hidden layer widths; empty means one layer from input to output.
    pub hidden: Vec<usize>,
    pub grid_size: usize,
    pub order: usize,
    pub range: (f64, f64),
    pub coef_std: f64,
    pub init: NetworkInit,
}

impl Default for KanSpec {
    fn default() -> Self {
        Self {
            hidden: Vec::new(),
            grid_size: 5,
            order: 3,
            range: (-1.0, 1.0),
            coef_std: 0.1,
            init: NetworkInit::Random,
        }
    }
}

impl KanSpec {
    pub fn validate(&self) -> Result<()> {
        contract!(self.grid_size >= 1, "grid_size must be at least 1");
        contract!(self.order >= 1, "spline order must be at least 1");
        contract!(self.range.0 < self.range.1, "grid range must be increasing");
        contract!(self.coef_std >= 0.0, "coef_std must be non-negative");
        contract!(self.hidden.iter().all(|&h| h > 0), "hidden widths must be positive");
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KanNetwork<T: Real> {
    layers: Vec<KanLayer<T>>,
}

/// Build a network `n_in → hidden… → n_out` from `spec`.
pub fn init_kan<T: Real>(n_in: usize, n_out: usize, spec: &KanSpec, rng: &mut RngStream) -> Result<KanNetwork<T>> {
    spec.validate()?;
    contract!(n_in > 0 && n_out > 0, "network widths must be positive");
    let grid = Grid::uniform(spec.grid_size, spec.order, T::of(spec.range.0), T::of(spec.range.1))?;
    let mut widths = vec![n_in];
    widths.extend(&spec.hidden);
    widths.push(n_out);
    let layers = widths
        .windows(2)
        .map(|w| match spec.init {
            NetworkInit::Random => KanLayer::random(w[0], w[1], grid.clone(), spec.coef_std, rng),
            NetworkInit::Zero => KanLayer::zeros(w[0], w[1], grid.clone()),
        })
        .collect();
    Ok(KanNetwork { layers })
}

impl<T: Real> KanNetwork<T> {
    pub fn from_layers(layers: Vec<KanLayer<T>>) -> Result<Self> {
        contract!(!layers.is_empty(), "network needs at least one layer");
        for w in layers.windows(2) {
            contract!(
                w[0].n_out() == w[1].n_in(),
                "layer widths do not chain: {} then {}",
                w[0].n_out(),
                w[1].n_in()
            );
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[KanLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer<T>] {
        &mut self.layers
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(KanLayer::n_params).sum()
    }

    /// All parameters concatenated layer by layer.
    pub fn flat_params(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.params().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        contract!(flat.len() == self.n_params(), "expected {} params, got {}", self.n_params(), flat.len());
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.n_params();
            l.params_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Accumulated gradients concatenated layer by layer.
    pub fn flat_grads(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| {
                let g = l.grads();
                if g.is_empty() {
                    vec![T::zero(); l.n_params()]
                } else {
                    g.to_vec()
                }
            })
            .collect()
    }

    pub fn forward(&mut self, x: &[T]) -> Result<Vec<T>> {
        let mut h = x.to_vec();
        for l in &mut self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    /// Accumulate parameter gradients for upstream `dy`; returns `∂/∂x`.
    pub fn backward(&mut self, dy: &[T]) -> Result<Vec<T>> {
        self.backward_batch(dy)
    }

    /// Apply the network to `batch` inputs stored back to back.
    pub fn forward_batch(&mut self, x: &[T], batch: usize) -> Result<Vec<T>> {
        let mut h = x.to_vec();
        for l in &mut self.layers {
            h = l.forward_batch(&h, batch)?;
        }
        Ok(h)
    }

    /// Backward pass for the last forward call; parameter gradients are
    /// summed over the batch.
    pub fn backward_batch(&mut self, dy: &[T]) -> Result<Vec<T>> {
        let mut g = dy.to_vec();
        for l in self.layers.iter_mut().rev() {
            g = l.backward_batch(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            l.zero_grad();
        }
    }

    /// Apply one optimizer step with the accumulated gradients.
    pub fn apply(&mut self, adam: &mut Adam<T>) {
        adam.step_slices(self.layers.iter_mut().map(|l| l.params_and_grads()));
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)?;
        Self::from_layers(net.layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(spec: &KanSpec, seed: u64) -> KanNetwork<f64> {
        init_kan(3, 2, spec, &mut RngStream::new(seed)).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = KanSpec {
            init: NetworkInit::Zero,
            hidden: vec![4],
            ..KanSpec::default()
        };
        let mut n = net(&spec, 1);
        assert_eq!(n.forward(&[0.3, -2.0, 0.9]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn param_count() {
        let spec = KanSpec {
            hidden: vec![4],
            ..KanSpec::default()
        };
        // 7 basis functions + two edge weights per edge
        assert_eq!(net(&spec, 1).n_params(), (3 * 4 + 4 * 2) * 9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let spec = KanSpec {
            hidden: vec![3],
            ..KanSpec::default()
        };
        let mut n = net(&spec, 7);
        let x = [0.21, -0.64, 0.47];
        let w = [0.7, -1.3];
        let objective = |n: &mut KanNetwork<f64>, x: &[f64]| -> f64 {
            n.forward(x).unwrap().iter().zip(&w).map(|(y, w)| y * w).sum()
        };
        n.zero_grad();
        n.forward(&x).unwrap();
        let dx = n.backward(&w).unwrap();
        let grads = n.flat_grads();
        let theta = n.flat_params();
        let h = 1e-6;
        for i in (0..theta.len()).step_by(5) {
            let mut tp = theta.clone();
            tp[i] += h;
            n.set_flat_params(&tp).unwrap();
            let fp = objective(&mut n, &x);
            tp[i] -= 2.0 * h;
            n.set_flat_params(&tp).unwrap();
            let fm = objective(&mut n, &x);
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - grads[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grads[i]);
        }
        n.set_flat_params(&theta).unwrap();
        for p in 0..3 {
            let mut xp = x;
            xp[p] += h;
            let fp = objective(&mut n, &xp);
            xp[p] -= 2.0 * h;
            let fm = objective(&mut n, &xp);
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - dx[p]).abs() < 1e-7, "input {p}: {fd} vs {}", dx[p]);
        }
    }

    #[test]
    fn json_roundtrip_preserves_outputs() {
        let mut a = net(&KanSpec::default(), 3);
        let s = a.to_json().unwrap();
        let mut b = KanNetwork::<f64>::from_json(&s).unwrap();
        let x = [0.1, 0.2, -0.3];
        assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
    }

    #[test]
    fn mismatched_layers_rejected() {
        let g = Grid::uniform(5, 3, -1.0, 1.0).unwrap();
        let l1 = KanLayer::<f64>::zeros(2, 3, g.clone());
        let l2 = KanLayer::<f64>::zeros(4, 1, g);
        assert!(KanNetwork::from_layers(vec![l1, l2]).is_err());
    }
}
