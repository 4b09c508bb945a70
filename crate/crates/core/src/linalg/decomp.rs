//! Hermitian eigendecomposition, singular value decomposition, pseudo-inverse
//! and dense linear solves.
//!
//! Both the eigensolver and the SVD are Jacobi methods built on the same
//! 2×2 Hermitian rotation. They converge quadratically, keep eigenvectors
//! orthonormal to working precision, and resolve tiny singular values with
//! high relative accuracy, which is what the pseudo-inverse truncation needs.

use num_complex::Complex;

use super::matrix::{vdot, CMatrix};
use crate::error::{contract, Error, Result};
use crate::scalar::{cr, czero, Real, C};

const MAX_SWEEPS: usize = 80;

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct HermEigResult<T: Real> {
    pub eigenvalues: Vec<T>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: CMatrix<T>,
}

impl<T: Real> HermEigResult<T> {
    /// `V Λ Vᴴ`.
    pub fn reconstruct(&self) -> CMatrix<T> {
        let v = &self.eigenvectors;
        let vl = CMatrix::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * self.eigenvalues[j]);
        vl.matmul_adjoint(v)
    }

    pub fn min_eigenvalue(&self) -> T {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Unitary `V = [[c, s], [-s·e^{-iφ}, c·e^{-iφ}]]` that diagonalizes the
/// Hermitian 2×2 block `[[a, b], [b̄, d]]` under `Vᴴ·G·V`.
#[derive(Clone, Copy, Debug)]
struct Rotation<T: Real> {
    c: T,
    s: T,
    phase: C<T>, // e^{-iφ}
}

impl<T: Real> Rotation<T> {
    fn new(a: T, d: T, b: C<T>) -> Self {
        let mag = b.norm();
        let phase = (b / mag).conj();
        let zeta = (d - a) / (T::of(2.0) * mag);
        let t = if zeta >= T::zero() {
            T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
        } else {
            -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
        };
        let c = T::one() / (T::one() + t * t).sqrt();
        Self { c, s: t * c, phase }
    }

    #[inline]
    fn v(&self) -> [[C<T>; 2]; 2] {
        [
            [cr(self.c), cr(self.s)],
            [-self.phase * self.s, self.phase * self.c],
        ]
    }

    /// Columns `p, q` of `m` ← `[m_p, m_q]·V`.
    fn apply_right(&self, m: &mut CMatrix<T>, p: usize, q: usize) {
        let v = self.v();
        for i in 0..m.rows() {
            let x = m[(i, p)];
            let y = m[(i, q)];
            m[(i, p)] = x * v[0][0] + y * v[1][0];
            m[(i, q)] = x * v[0][1] + y * v[1][1];
        }
    }

    /// Rows `p, q` of `m` ← `Vᴴ·[m_p; m_q]`.
    fn apply_left_adjoint(&self, m: &mut CMatrix<T>, p: usize, q: usize) {
        let v = self.v();
        for j in 0..m.cols() {
            let x = m[(p, j)];
            let y = m[(q, j)];
            m[(p, j)] = v[0][0].conj() * x + v[1][0].conj() * y;
            m[(q, j)] = v[0][1].conj() * x + v[1][1].conj() * y;
        }
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Fails if `a` is not square or its Hermitian defect `‖A − Aᴴ‖/‖A‖`
/// exceeds `1e-12`.
pub fn herm_eig<T: Real>(a: &CMatrix<T>) -> Result<HermEigResult<T>> {
    contract!(a.is_square(), "herm_eig needs a square matrix, got {:?}", a.shape());
    let defect = a.hermitian_defect();
    contract!(
        defect <= T::of(1e-12),
        "herm_eig input is not Hermitian (defect {defect})"
    );
    let n = a.rows();
    // symmetrize so the rotations see an exactly Hermitian matrix
    let mut m = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            cr(a[(i, i)].re)
        } else {
            (a[(i, j)] + a[(j, i)].conj()) * T::of(0.5)
        }
    });
    let mut v = CMatrix::identity(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off + m[(i, j)].norm_sqr();
                }
            }
        }
        let scale = m.frob_norm_sqr();
        if off <= eps * eps * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = m[(p, q)];
                let bm = b.norm();
                if bm == T::zero() {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                // skip rotations that cannot change the diagonal at working precision
                if bm <= eps * T::of(0.5) * (app.abs() * aqq.abs()).sqrt() {
                    m[(p, q)] = czero();
                    m[(q, p)] = czero();
                    continue;
                }
                let rot = Rotation::new(app, aqq, b);
                rot.apply_right(&mut m, p, q);
                rot.apply_left_adjoint(&mut m, p, q);
                m[(p, q)] = czero();
                m[(q, p)] = czero();
                m[(p, p)] = cr(m[(p, p)].re);
                m[(q, q)] = cr(m[(q, q)].re);
                rot.apply_right(&mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.partial_cmp(&m[(i, i)].re).expect("finite eigenvalues"));
    let eigenvalues = order.iter().map(|&i| m[(i, i)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermEigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Thin singular value decomposition `A = U·diag(σ)·Vᴴ`, σ descending.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    pub u: CMatrix<T>,
    pub singular_values: Vec<T>,
    pub v: CMatrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd<T: Real>(a: &CMatrix<T>) -> Svd<T> {
    if a.rows() < a.cols() {
        // A = U S Vᴴ  ⇔  Aᴴ = V S Uᴴ
        let t = svd(&a.adjoint());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let (m, n) = a.shape();
    // work on columns: store them contiguously
    let mut cols: Vec<Vec<C<T>>> = (0..n).map(|j| a.col(j)).collect();
    let mut v = CMatrix::identity(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: T = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: T = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = vdot(&cols[p], &cols[q]);
                let gm = gamma.norm();
                if gm == T::zero() || gm <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let rot = Rotation::new(alpha, beta, gamma);
                let r = rot.v();
                for i in 0..m {
                    let x = cols[p][i];
                    let y = cols[q][i];
                    cols[p][i] = x * r[0][0] + y * r[1][0];
                    cols[q][i] = x * r[0][1] + y * r[1][1];
                }
                rot.apply_right(&mut v, p, q);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = cols
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite singular values"));
    let singular_values: Vec<T> = order.iter().map(|&i| norms[i]).collect();
    let u = CMatrix::from_fn(m, n, |i, j| {
        let s = norms[order[j]];
        if s > T::zero() {
            cols[order[j]][i] / s
        } else {
            czero()
        }
    });
    let v = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Svd {
        u,
        singular_values,
        v,
    }
}

/// Largest singular value; the Euclidean norm for row or column vectors.
pub fn spectral_norm<T: Real>(a: &CMatrix<T>) -> T {
    if a.rows() == 0 || a.cols() == 0 {
        return T::zero();
    }
    if a.rows() == 1 || a.cols() == 1 {
        return a.frob_norm();
    }
    svd(a).singular_values[0]
}

/// Moore–Penrose pseudo-inverse; singular values below `1e-12·σ_max` are
/// treated as zero.
pub fn pinv<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return CMatrix::zeros(n, m);
    }
    let s = svd(a);
    let smax = s.singular_values[0];
    let tol = T::of(1e-12) * smax;
    let k = s.singular_values.len();
    // A⁺ = V Σ⁺ Uᴴ
    let mut vs = CMatrix::zeros(n, k);
    for j in 0..k {
        let sj = s.singular_values[j];
        if sj > tol && sj > T::zero() {
            let inv = T::one() / sj;
            for i in 0..n {
                vs[(i, j)] = s.v[(i, j)] * inv;
            }
        }
    }
    vs.matmul_adjoint(&s.u)
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<T: Real> {
    lu: CMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &CMatrix<T>) -> Result<Self> {
        contract!(a.is_square(), "LU needs a square matrix, got {:?}", a.shape());
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let (piv, pmag) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, T::neg_infinity()), |b, c| if c.1 > b.1 { c } else { b });
            if pmag <= T::epsilon() * scale * T::of(n as f64) || pmag == T::zero() {
                return Err(Error::Domain(format!("singular matrix at pivot {k}")));
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f.re == T::zero() && f.im == T::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - f * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[C<T>]) -> Vec<C<T>> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "LU solve dimension");
        let mut x: Vec<C<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc = acc - self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &CMatrix<T>) -> CMatrix<T> {
        let mut out = CMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve_vec(&b.col(j)));
        }
        out
    }
}

/// Solve `A x = b` for square nonsingular `A`.
pub fn solve<T: Real>(a: &CMatrix<T>, b: &[C<T>]) -> Result<Vec<C<T>>> {
    Ok(Lu::new(a)?.solve_vec(b))
}

pub fn inverse<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    Ok(Lu::new(a)?.solve(&CMatrix::identity(a.rows())))
}

/// Phase-normalize a vector so its first entry with non-negligible magnitude
/// is real and positive.
pub fn normalize_phase<T: Real>(v: &mut [C<T>]) {
    let peak = v.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    if peak == T::zero() {
        return;
    }
    let thresh = peak * T::of(1e-8);
    if let Some(z) = v.iter().find(|z| z.norm() > thresh).copied() {
        let rot = (z / z.norm()).conj();
        for x in v.iter_mut() {
            *x = *x * rot;
        }
        // remove residual imaginary round-off on the pivot
        if let Some(p) = v.iter_mut().find(|z| z.norm() > thresh) {
            *p = Complex::new(p.norm(), T::zero());
        }
    }
}
