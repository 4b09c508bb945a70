//! B-spline bases on a static knot grid.
//!
//! `order` follows de Boor: order 1 is piecewise constant, order 3 is
//! piecewise quadratic. A grid with `G` intervals on `[lo, hi]` is extended by
//! `order − 1` knots on each side, giving `G + order − 1` basis functions that
//! form a partition of unity on `[lo, hi]`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Grid<T: Real> {
    knots: Vec<T>,
    order: usize,
}

/// Non-zero basis values at one point: `values[j]` belongs to basis
/// `start + j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BasisEval<T> {
    pub start: usize,
    pub values: Vec<T>,
    pub derivs: Vec<T>,
    /// The point was clamped into the base interval, so `d/dx` is zero.
    pub clamped: bool,
}

impl<T: Real> Grid<T> {
    /// Uniform grid of `intervals` cells on `[lo, hi]`.
    pub fn uniform(intervals: usize, order: usize, lo: T, hi: T) -> Result<Self> {
        contract!(intervals >= 1, "grid needs at least one interval");
        contract!(lo < hi, "grid range must be increasing");
        let step = (hi - lo) / T::of(intervals as f64);
        let ext = order.saturating_sub(1) as isize;
        let knots = (-ext..=(intervals as isize + ext))
            .map(|i| lo + step * T::of(i as f64))
            .collect();
        Self::from_knots(knots, order)
    }

    /// Arbitrary strictly increasing extended knot vector.
    pub fn from_knots(knots: Vec<T>, order: usize) -> Result<Self> {
        contract!(order >= 1, "spline order must be at least 1");
        contract!(
            knots.len() >= 2 * order,
            "{} knots cannot carry an order-{} basis on a non-empty interval",
            knots.len(),
            order
        );
        contract!(
            knots.windows(2).all(|w| w[0] < w[1]),
            "knots must be strictly increasing"
        );
        Ok(Self { knots, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.order
    }

    /// Base interval `[lo, hi]` on which the basis sums to one.
    pub fn range(&self) -> (T, T) {
        (self.knots[self.order - 1], self.knots[self.n_basis()])
    }

    /// Index `s` of the base cell `[t_s, t_{s+1})` holding `x` (clamped).
    fn span(&self, x: T) -> usize {
        let first = self.order - 1;
        let last = self.n_basis() - 1;
        // knots are few; linear scan beats a binary search here
        let mut s = first;
        while s < last && x >= self.knots[s + 1] {
            s += 1;
        }
        s
    }

    /// Non-zero basis values and derivatives at `x`, clamped into the base interval.
    pub fn eval(&self, x: T, out: &mut BasisEval<T>) {
        let (lo, hi) = self.range();
        let clamped = !(x > lo && x < hi);
        let x = x.max(lo).min(hi);
        let k = self.order;
        let s = self.span(x);
        let t = &self.knots;

        // triangular Cox–de Boor over the k active functions s−k+1..=s
        out.values.clear();
        out.values.resize(k, T::zero());
        out.derivs.clear();
        out.derivs.resize(k, T::zero());
        out.start = s + 1 - k;
        out.clamped = clamped;

        // lower[j] holds B_{s−o+1+j, o} for the current order o
        let mut lower = vec![T::zero(); k];
        lower[0] = T::one();
        for o in 2..=k {
            let mut next = vec![T::zero(); k];
            for j in 0..o {
                let i = s + 1 + j - o; // basis index
                let mut v = T::zero();
                if j >= 1 {
                    // B_{i,o−1} term
                    let b = lower[j - 1];
                    let den = t[i + o - 1] - t[i];
                    v = v + (x - t[i]) / den * b;
                }
                if j < o - 1 {
                    // B_{i+1,o−1} term
                    let b = lower[j];
                    let den = t[i + o] - t[i + 1];
                    v = v + (t[i + o] - x) / den * b;
                }
                next[j] = v;
            }
            if o == k {
                // derivative from the order k−1 values still in `lower`
                let kf = T::of((k - 1) as f64);
                for j in 0..k {
                    let i = s + 1 + j - k;
                    let mut d = T::zero();
                    if j >= 1 {
                        d = d + kf * lower[j - 1] / (t[i + k - 1] - t[i]);
                    }
                    if j < k - 1 {
                        d = d - kf * lower[j] / (t[i + k] - t[i + 1]);
                    }
                    out.derivs[j] = if clamped { T::zero() } else { d };
                }
            }
            lower = next;
        }
        out.values.copy_from_slice(&lower);
    }

    /// Dense vector of all `n_basis` values at `x`.
    pub fn basis(&self, x: T) -> Vec<T> {
        let mut e = BasisEval::default();
        self.eval(x, &mut e);
        let mut all = vec![T::zero(); self.n_basis()];
        for (j, v) in e.values.iter().enumerate() {
            all[e.start + j] = *v;
        }
        all
    }
}

/// Dense basis values, `bspline_basis(x, grid)`.
pub fn bspline_basis<T: Real>(x: T, grid: &Grid<T>) -> Vec<T> {
    grid.basis(x)
}
