//! Adam with bias correction. Steps move against the gradient.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        contract!(self.lr > 0.0 && self.lr.is_finite(), "learning rate must be positive, got {}", self.lr);
        contract!((0.0..1.0).contains(&self.beta1), "beta1 must lie in [0, 1)");
        contract!((0.0..1.0).contains(&self.beta2), "beta2 must lie in [0, 1)");
        contract!(self.eps > 0.0, "eps must be positive");
        Ok(())
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for a fixed-size parameter vector.
#[derive(Clone, Debug)]
pub struct Adam<T: Real> {
    config: AdamConfig,
    t: u32,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            config,
            t: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// One step over a parameter vector split into consecutive slices.
    pub fn step_slices<'a, I>(&mut self, slices: I)
    where
        I: IntoIterator<Item = (&'a mut [T], &'a [T])>,
    {
        self.t += 1;
        let b1 = T::of(self.config.beta1);
        let b2 = T::of(self.config.beta2);
        let c1 = T::one() - b1.powi(self.t as i32);
        let c2 = T::one() - b2.powi(self.t as i32);
        let lr = T::of(self.config.lr);
        let eps = T::of(self.config.eps);
        let mut off = 0;
        for (p, g) in slices {
            assert_eq!(p.len(), g.len(), "parameter and gradient slices differ in length");
            for (j, (pj, gj)) in p.iter_mut().zip(g).enumerate() {
                let i = off + j;
                self.m[i] = b1 * self.m[i] + (T::one() - b1) * *gj;
                self.v[i] = b2 * self.v[i] + (T::one() - b2) * *gj * *gj;
                let mh = self.m[i] / c1;
                let vh = self.v[i] / c2;
                *pj = *pj - lr * mh / (vh.sqrt() + eps);
            }
            off += p.len();
        }
        assert_eq!(off, self.m.len(), "Adam state sized for {} params, got {off}", self.m.len());
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        self.step_slices(std::iter::once((params, grads)));
    }
}

/// Single Adam update of `params` in place, for callers holding their own moments.
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u32,
    config: &AdamConfig,
) {
    let mut adam = Adam {
        config: config.clone(),
        t: t.saturating_sub(1),
        m: m.to_vec(),
        v: v.to_vec(),
    };
    adam.step(params, grads);
    m.copy_from_slice(&adam.m);
    v.copy_from_slice(&adam.v);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        let mut adam = Adam::<f64>::new(AdamConfig::default(), 2);
        let mut p = vec![0.0, 0.0];
        adam.step(&mut p, &[1.0, -3.0]);
        assert!((p[0] + 1e-3).abs() < 1e-10);
        assert!((p[1] - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::<f64>::new(AdamConfig::with_lr(0.05), 1);
        let mut x = vec![3.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 1.0)];
            adam.step(&mut x, &g);
        }
        assert!((x[0] - 1.0).abs() < 1e-3, "{}", x[0]);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::<f64>::new(AdamConfig::default(), 3);
        let mut p = vec![0.5, -0.25, 2.0];
        adam.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![0.5, -0.25, 2.0]);
    }

    #[test]
    fn free_function_matches_state() {
        let cfg = AdamConfig::default();
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        let mut p1 = vec![1.0, 2.0];
        let mut p2 = p1.clone();
        let mut adam = Adam::<f64>::new(cfg.clone(), 2);
        for t in 1..=3 {
            let g = vec![0.3 * t as f64, -0.1];
            adam_step(&mut p1, &g, &mut m, &mut v, t, &cfg);
            adam.step(&mut p2, &g);
        }
        assert_eq!(p1, p2);
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::with_lr(0.0).validate().is_err());
        assert!(AdamConfig::default().validate().is_ok());
    }
}
