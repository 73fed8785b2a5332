//! Iterative eigensolvers: block LOBPCG for grid operators and Lanczos with
//! full reorthogonalization for sparse many-body Hamiltonians.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lattice::Field;
use crate::linalg::{eigh, tridiagonal_eigh, CMatrix};
use crate::real::Real;

/// Modified Gram-Schmidt (applied twice) over `basis`, appending the
/// surviving directions of `candidates`. Directions whose norm collapses
/// below `drop_ratio` of their original norm are discarded.
pub fn orthonormalize_into<T: Real>(basis: &mut Vec<Field<T>>, candidates: Vec<Field<T>>, drop_ratio: T) {
    for mut v in candidates {
        let n0 = v.norm();
        if !(n0 > T::zero()) {
            continue;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let c = b.inner(&v);
                v.axpy(-c, b);
            }
        }
        let n1 = v.norm();
        if n1 > drop_ratio * n0 && n1 > T::min_positive_value() {
            v.scale_real(T::one() / n1);
            basis.push(v);
        }
    }
}

/// Gram-Schmidt orthonormalization preserving order; fails if the set is
/// numerically dependent.
pub fn gram_schmidt<T: Real>(fields: &mut [Field<T>]) -> Result<()> {
    for i in 0..fields.len() {
        let (done, rest) = fields.split_at_mut(i);
        let v = &mut rest[0];
        let n0 = v.norm();
        for _ in 0..2 {
            for b in done.iter() {
                let c = b.inner(v);
                v.axpy(-c, b);
            }
        }
        let n1 = v.norm();
        if !(n1 > T::lit(1e-12) * n0) || !(n1 > T::zero()) {
            return Err(Error::InvalidState("orbitals are linearly dependent".into()));
        }
        v.scale_real(T::one() / n1);
    }
    Ok(())
}

fn combine<T: Real>(fields: &[Field<T>], coeffs: &CMatrix<T>, col: usize, rows: std::ops::Range<usize>) -> Field<T> {
    let mut out = Field::zeros(fields[0].grid());
    for (f, r) in fields.iter().zip(rows) {
        out.axpy(coeffs[(r, col)], f);
    }
    out
}

pub struct EigenOutput<T: Real> {
    pub values: Vec<T>,
    pub vectors: Vec<Field<T>>,
    pub residuals: Vec<T>,
    pub iterations: usize,
}

/// Lowest `want` eigenpairs of a Hermitian grid operator by LOBPCG.
///
/// `precond(r, shift)` should approximate `(A - shift)^{-1}` on high modes;
/// residuals are `‖A x - θ x‖₂` in the grid L² norm.
pub fn lobpcg<T, A, P>(op: A, precond: P, initial: Vec<Field<T>>, want: usize, tol: T, max_iter: usize) -> Result<EigenOutput<T>>
where
    T: Real,
    A: Fn(&Field<T>) -> Field<T>,
    P: Fn(&Field<T>, T) -> Field<T>,
{
    let drop = T::lit(1e-10);
    let mut x: Vec<Field<T>> = Vec::new();
    orthonormalize_into(&mut x, initial, drop);
    if x.len() < want {
        return Err(Error::Invalid("initial block is rank deficient".into()));
    }
    let b = x.len();
    let mut ax: Vec<Field<T>> = x.iter().map(&op).collect();
    let mut theta;
    {
        let g = CMatrix::from_fn(b, |i, j| x[i].inner(&ax[j]));
        let (vals, y) = eigh(&g);
        let nx: Vec<_> = (0..b).map(|k| combine(&x, &y, k, 0..b)).collect();
        let nax: Vec<_> = (0..b).map(|k| combine(&ax, &y, k, 0..b)).collect();
        x = nx;
        ax = nax;
        theta = vals;
    }
    let mut p: Vec<Field<T>> = Vec::new();
    let mut residuals = vec![T::infinity(); b];

    for iter in 0..max_iter {
        let r: Vec<Field<T>> = (0..b)
            .map(|i| {
                let mut ri = ax[i].clone();
                ri.axpy_real(-theta[i], &x[i]);
                ri
            })
            .collect();
        residuals = r.iter().map(|f| f.norm()).collect();
        if residuals[..want].iter().all(|&v| v <= tol) {
            return Ok(EigenOutput {
                values: theta[..want].to_vec(),
                vectors: x[..want].to_vec(),
                residuals: residuals[..want].to_vec(),
                iterations: iter,
            });
        }
        let shift = theta[0].abs().max(T::one());
        let w: Vec<Field<T>> = r
            .iter()
            .zip(&residuals)
            .filter(|(_, &n)| n > tol * T::lit(1e-3))
            .map(|(ri, _)| precond(ri, shift))
            .collect();

        let mut s = x.clone();
        orthonormalize_into(&mut s, w, drop);
        // images of W and P are recomputed since orthogonalization mixes them
        orthonormalize_into(&mut s, p.clone(), drop);
        let mut as_: Vec<Field<T>> = ax.clone();
        for v in &s[b..] {
            as_.push(op(v));
        }
        let ns = s.len();
        let g = CMatrix::from_fn(ns, |i, j| s[i].inner(&as_[j]));
        let (vals, y) = eigh(&g);
        let nx: Vec<_> = (0..b).map(|k| combine(&s, &y, k, 0..ns)).collect();
        let nax: Vec<_> = (0..b).map(|k| combine(&as_, &y, k, 0..ns)).collect();
        if ns > b {
            p = (0..b).map(|k| combine(&s[b..], &y, k, b..ns)).collect();
        } else {
            p.clear();
        }
        x = nx;
        ax = nax;
        theta = vals[..b].to_vec();
        // re-orthonormalize X against drift every few steps
        if iter % 16 == 15 {
            let mut fresh = Vec::new();
            orthonormalize_into(&mut fresh, x.clone(), drop);
            if fresh.len() == b {
                x = fresh;
                ax = x.iter().map(&op).collect();
                let g = CMatrix::from_fn(b, |i, j| x[i].inner(&ax[j]));
                let (vals, y) = eigh(&g);
                let nx: Vec<_> = (0..b).map(|k| combine(&x, &y, k, 0..b)).collect();
                let nax: Vec<_> = (0..b).map(|k| combine(&ax, &y, k, 0..b)).collect();
                x = nx;
                ax = nax;
                theta = vals;
                p.clear();
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: residuals[..want].iter().fold(0.0, |a, r| a.max(r.as_f64())),
    })
}

/// Sparse Hermitian matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseHermitian<T: Real> {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex<T>>,
}

impl<T: Real> SparseHermitian<T> {
    /// Builds from unsorted `(row, col, value)` triplets; duplicates add.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex<T>)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_start = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex<T>> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_start[r + 1] += 1;
            cols.push(c);
            vals.push(v);
            last = Some((r, c));
        }
        for r in 0..dim {
            row_start[r + 1] += row_start[r];
        }
        Self {
            dim,
            row_start,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex::zero();
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.dim);
        for r in 0..self.dim {
            for k in self.row_start[r]..self.row_start[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

fn vdot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt()
}

/// Ground state of a sparse Hermitian matrix by restarted Lanczos with full
/// reorthogonalization. Returns `(E, v, ‖Hv − Ev‖)`.
pub fn lanczos_ground<T: Real>(
    h: &SparseHermitian<T>,
    start: Vec<Complex<T>>,
    tol: T,
    max_krylov: usize,
    max_restarts: usize,
) -> Result<(T, Vec<Complex<T>>, T)> {
    let dim = h.dim();
    let mut v0 = start;
    let mut last_res = T::infinity();
    let mut hv = vec![Complex::zero(); dim];
    for _restart in 0..=max_restarts {
        let n0 = vnorm(&v0);
        if !(n0 > T::zero()) {
            return Err(Error::Invalid("zero Lanczos start vector".into()));
        }
        for c in v0.iter_mut() {
            *c = *c / n0;
        }
        let kmax = max_krylov.min(dim).max(1);
        let mut basis: Vec<Vec<Complex<T>>> = vec![v0.clone()];
        let mut alpha: Vec<T> = Vec::new();
        let mut beta: Vec<T> = Vec::new();
        loop {
            let j = basis.len() - 1;
            h.matvec(&basis[j], &mut hv);
            let a = vdot(&basis[j], &hv).re;
            alpha.push(a);
            let mut w = hv.clone();
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= vi * a;
            }
            if j > 0 {
                let b = beta[j - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= vi * b;
                }
            }
            for _ in 0..2 {
                for q in &basis {
                    let c = vdot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= qi * c;
                    }
                }
            }
            let bnext = vnorm(&w);
            let m = alpha.len();
            let exhausted = m >= kmax || bnext <= T::lit(T::EPS) * T::lit(10.0) * alpha.iter().fold(T::one(), |acc, x| acc.max(x.abs()));
            // convergence estimate from the tridiagonal problem
            let check = exhausted || m % 8 == 0;
            if check {
                let (_, vecs) = tridiagonal_eigh(&alpha, &beta);
                let est = bnext * vecs[m - 1].abs();
                if exhausted || est <= tol * T::lit(0.1) {
                    let mut x = vec![Complex::zero(); dim];
                    for (i, q) in basis.iter().enumerate() {
                        let c = vecs[i];
                        for (xi, qi) in x.iter_mut().zip(q) {
                            *xi += qi * c;
                        }
                    }
                    let nx = vnorm(&x);
                    for c in x.iter_mut() {
                        *c = *c / nx;
                    }
                    h.matvec(&x, &mut hv);
                    let e = vdot(&x, &hv).re;
                    let res = hv
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b * e).norm_sqr())
                        .sum::<T>()
                        .sqrt();
                    if res <= tol {
                        return Ok((e, x, res));
                    }
                    last_res = res;
                    v0 = x;
                    break;
                }
            }
            beta.push(bnext);
            for c in w.iter_mut() {
                *c = *c / bnext;
            }
            basis.push(w);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_restarts * max_krylov,
        residual: last_res.as_f64(),
    })
}
