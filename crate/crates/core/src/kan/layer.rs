//! One KAN layer: every input-output edge carries
//! `φ(x) = w_b·silu(x) + w_s·Σ_i c_i B_i(x)`.

use serde::{Deserialize, Serialize};

use super::bspline::{BasisEval, Grid};
use crate::error::{dims, Error, Result};
use crate::linalg::RngStream;
use crate::scalar::Real;

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `silu(x) = x·σ(x)`.
#[inline]
pub fn silu<T: Real>(x: T) -> T {
    x * sigmoid(x)
}

/// `silu'(x) = σ(x)·(1 + x·(1 − σ(x)))`.
#[inline]
pub fn silu_deriv<T: Real>(x: T) -> T {
    let s = sigmoid(x);
    s * (T::one() + x * (T::one() - s))
}

/// Values kept from the last forward pass, one block per sample.
#[derive(Clone, Debug, Default)]
struct Cache<T> {
    batch: usize,
    silu: Vec<T>,
    silu_d: Vec<T>,
    basis: Vec<BasisEval<T>>,
    /// spline sum per sample and edge, `[b·n_edges + q·n_in + p]`
    spline: Vec<T>,
}

/// Parameters are stored flat as `[coefficients | w_base | w_spline]` with
/// coefficients laid out `[q][p][i]` (output, input, basis).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KanLayer<T: Real> {
    n_in: usize,
    n_out: usize,
    grid: Grid<T>,
    params: Vec<T>,
    #[serde(skip)]
    grads: Vec<T>,
    #[serde(skip)]
    cache: Option<Cache<T>>,
}

impl<T: Real> KanLayer<T> {
    /// Layer with all parameters zero; every edge outputs zero.
    pub fn zeros(n_in: usize, n_out: usize, grid: Grid<T>) -> Self {
        let n = n_in * n_out * (grid.n_basis() + 2);
        Self {
            n_in,
            n_out,
            grid,
            params: vec![T::zero(); n],
            grads: vec![T::zero(); n],
            cache: None,
        }
    }

    /// Coefficients `~ N(0, coef_std²)`, `w_b = w_s = 1/√n_in`.
    pub fn random(n_in: usize, n_out: usize, grid: Grid<T>, coef_std: f64, rng: &mut RngStream) -> Self {
        let mut layer = Self::zeros(n_in, n_out, grid);
        let nc = layer.n_coef();
        for c in &mut layer.params[..nc] {
            *c = rng.normal(coef_std);
        }
        let w = T::of(1.0 / (n_in as f64).sqrt());
        for v in &mut layer.params[nc..] {
            *v = w;
        }
        layer
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    fn n_coef(&self) -> usize {
        self.n_in * self.n_out * self.grid.n_basis()
    }

    fn n_edges(&self) -> usize {
        self.n_in * self.n_out
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn grads(&self) -> &[T] {
        &self.grads
    }

    /// Parameters and accumulated gradients together, for optimizer steps.
    pub fn params_and_grads(&mut self) -> (&mut [T], &[T]) {
        if self.grads.len() != self.params.len() {
            self.grads = vec![T::zero(); self.params.len()];
        }
        (&mut self.params, &self.grads)
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
        self.grads.resize(self.params.len(), T::zero());
    }

    /// Coefficient of basis `i` on edge `p → q`.
    pub fn coef(&self, q: usize, p: usize, i: usize) -> T {
        self.params[(q * self.n_in + p) * self.grid.n_basis() + i]
    }

    pub fn w_base(&self, q: usize, p: usize) -> T {
        self.params[self.n_coef() + q * self.n_in + p]
    }

    pub fn w_spline(&self, q: usize, p: usize) -> T {
        self.params[self.n_coef() + self.n_edges() + q * self.n_in + p]
    }

    /// `φ_{q,p}(x)` for a single edge.
    pub fn edge(&self, q: usize, p: usize, x: T) -> T {
        let mut e = BasisEval::default();
        self.grid.eval(x, &mut e);
        let base = (q * self.n_in + p) * self.grid.n_basis() + e.start;
        let s = e
            .values
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (j, b)| acc + self.params[base + j] * *b);
        self.w_base(q, p) * silu(x) + self.w_spline(q, p) * s
    }

    /// Forward pass for one input vector.
    pub fn forward(&mut self, x: &[T]) -> Result<Vec<T>> {
        dims!(x.len() == self.n_in, "layer expects {} inputs, got {}", self.n_in, x.len());
        self.forward_batch(x, 1)
    }

    /// Forward pass over `batch` samples stored back to back in `x`,
    /// caching what [`KanLayer::backward_batch`] needs.
    pub fn forward_batch(&mut self, x: &[T], batch: usize) -> Result<Vec<T>> {
        dims!(
            x.len() == self.n_in * batch,
            "layer expects {}x{} inputs, got {}",
            batch,
            self.n_in,
            x.len()
        );
        let nb = self.grid.n_basis();
        let nc = self.n_coef();
        let ne = self.n_edges();
        let mut cache = self.cache.take().unwrap_or_default();
        cache.batch = batch;
        cache.silu.clear();
        cache.silu_d.clear();
        cache.basis.resize_with(x.len(), BasisEval::default);
        cache.spline.clear();
        cache.spline.resize(ne * batch, T::zero());
        for (i, &xp) in x.iter().enumerate() {
            cache.silu.push(silu(xp));
            cache.silu_d.push(silu_deriv(xp));
            self.grid.eval(xp, &mut cache.basis[i]);
        }

        let mut y = vec![T::zero(); self.n_out * batch];
        let (coef, rest) = self.params.split_at(nc);
        let (wb, ws) = rest.split_at(ne);
        for b in 0..batch {
            let xi = b * self.n_in;
            for q in 0..self.n_out {
                let mut acc = T::zero();
                for p in 0..self.n_in {
                    let e = &cache.basis[xi + p];
                    let edge = q * self.n_in + p;
                    let c = &coef[edge * nb + e.start..edge * nb + e.start + e.values.len()];
                    let s = c
                        .iter()
                        .zip(&e.values)
                        .fold(T::zero(), |a, (ci, bi)| a + *ci * *bi);
                    cache.spline[b * ne + edge] = s;
                    acc = acc + wb[edge] * cache.silu[xi + p] + ws[edge] * s;
                }
                y[b * self.n_out + q] = acc;
            }
        }
        self.cache = Some(cache);
        Ok(y)
    }

    /// Accumulate parameter gradients for upstream `dy` and return `∂/∂x`.
    pub fn backward(&mut self, dy: &[T]) -> Result<Vec<T>> {
        self.backward_batch(dy)
    }

    /// Backward pass matching the last [`KanLayer::forward_batch`]; parameter
    /// gradients are summed over the batch.
    pub fn backward_batch(&mut self, dy: &[T]) -> Result<Vec<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Contract("backward called before forward".into()))?;
        let batch = cache.batch;
        dims!(
            dy.len() == self.n_out * batch,
            "layer expects {}x{} output grads, got {}",
            batch,
            self.n_out,
            dy.len()
        );
        if self.grads.len() != self.params.len() {
            self.grads = vec![T::zero(); self.params.len()];
        }
        let nb = self.grid.n_basis();
        let nc = self.n_coef();
        let ne = self.n_edges();
        let (coef, rest) = self.params.split_at(nc);
        let (wb, ws) = rest.split_at(ne);
        let (g_coef, g_rest) = self.grads.split_at_mut(nc);
        let (g_wb, g_ws) = g_rest.split_at_mut(ne);

        let mut dx = vec![T::zero(); self.n_in * batch];
        for b in 0..batch {
            let xi = b * self.n_in;
            for q in 0..self.n_out {
                let d = dy[b * self.n_out + q];
                if d == T::zero() {
                    continue;
                }
                for p in 0..self.n_in {
                    let e = &cache.basis[xi + p];
                    let edge = q * self.n_in + p;
                    let off = edge * nb + e.start;
                    g_wb[edge] = g_wb[edge] + d * cache.silu[xi + p];
                    g_ws[edge] = g_ws[edge] + d * cache.spline[b * ne + edge];
                    let dws = d * ws[edge];
                    let mut ds = T::zero();
                    for j in 0..e.values.len() {
                        g_coef[off + j] = g_coef[off + j] + dws * e.values[j];
                        ds = ds + coef[off + j] * e.derivs[j];
                    }
                    dx[xi + p] = dx[xi + p] + d * wb[edge] * cache.silu_d[xi + p] + dws * ds;
                }
            }
        }
        Ok(dx)
    }
}
