//! Exact diagonalization of the second-quantized Hamiltonian
//! `H = Σ e_j a†_j a_j + ½ Σ W_ijkl a†_i a†_j a_k a_l` on a few modes, the
//! unsymmetrized (absolute) ground state of the same truncated model, and
//! numerical coherent-state identities.

use std::collections::HashMap;

use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::{lanczos_ground, SparseHermitian};
use crate::error::{Error, Result};
use crate::lattice::Field;
use crate::linalg::{eigh, CMatrix};
use crate::model::ModelSpec;
use crate::real::Real;
use crate::scatter::{scale_potential, RadialPotential};

pub const MAX_MODES: usize = 6;
pub const MAX_PARTICLES: usize = 10;
pub const MAX_BOSONIC_DIM: usize = 100_000;
pub const MAX_PRODUCT_DIM: usize = 10_000;

/// Matrices up to this size are diagonalized densely.
const DENSE_LIMIT: usize = 400;
const SYMMETRY_TOL: f64 = 1e-10;

/// Number of ways to put `n` bosons into `m` modes.
pub fn bosonic_dimension(m: usize, n: usize) -> usize {
    // C(n + m - 1, m - 1) computed incrementally, exact in u128
    let mut c: u128 = 1;
    for i in 1..m as u128 {
        c = c * (n as u128 + i) / i;
    }
    c.min(usize::MAX as u128) as usize
}

/// Flat index of `W_ijkl` in an `m⁴` tensor.
#[inline]
pub fn w_index(m: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * m + j) * m + k) * m + l
}

/// Largest violations of `W_ijkl = W_jilk` and `W_ijkl = conj(W_klij)`.
pub fn w_symmetry_defects<T: Real>(w: &[Complex<T>], m: usize) -> (T, T) {
    let mut exchange = T::zero();
    let mut hermitian = T::zero();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let x = w[w_index(m, i, j, k, l)];
                    exchange = exchange.max((x - w[w_index(m, j, i, l, k)]).norm());
                    hermitian = hermitian.max((x - w[w_index(m, k, l, i, j)].conj()).norm());
                }
            }
        }
    }
    (exchange, hermitian)
}

/// Averages `W` over the orbit generated by particle exchange and Hermitian
/// conjugation.
pub fn symmetrize_w<T: Real>(w: &mut [Complex<T>], m: usize) {
    let src = w.to_vec();
    let quarter = T::lit(0.25);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let s = src[w_index(m, i, j, k, l)]
                        + src[w_index(m, j, i, l, k)]
                        + src[w_index(m, k, l, i, j)].conj()
                        + src[w_index(m, l, k, j, i)].conj();
                    w[w_index(m, i, j, k, l)] = s * quarter;
                }
            }
        }
    }
}

/// Truncated many-body problem: `M` modes with energies `e_j`, pair tensor
/// `W`, and `N` bosons.
#[derive(Clone, Debug)]
pub struct FockProblem<T: Real> {
    modes: usize,
    particles: usize,
    e: Vec<T>,
    w: Vec<Complex<T>>,
}

impl<T: Real> FockProblem<T> {
    pub fn new(e: Vec<T>, w: Vec<Complex<T>>, particles: usize) -> Result<Self> {
        let m = e.len();
        if m == 0 || m > MAX_MODES {
            return Err(Error::Invalid(format!("mode count must be in 1..={MAX_MODES}, got {m}")));
        }
        if particles == 0 || particles > MAX_PARTICLES {
            return Err(Error::Invalid(format!(
                "particle count must be in 1..={MAX_PARTICLES}, got {particles}"
            )));
        }
        if w.len() != m * m * m * m {
            return Err(Error::Invalid(format!("W has {} entries, expected {}", w.len(), m * m * m * m)));
        }
        if e.iter().any(|x| !x.is_finite()) || w.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::Invalid("non-finite mode energies or W".into()));
        }
        let scale = w.iter().fold(T::one(), |a, x| a.max(x.norm()));
        let (ex, he) = w_symmetry_defects(&w, m);
        if ex > T::lit(SYMMETRY_TOL) * scale || he > T::lit(SYMMETRY_TOL) * scale {
            return Err(Error::Invalid(format!(
                "W violates its symmetries (exchange {ex:e}, hermiticity {he:e})"
            )));
        }
        let dim = bosonic_dimension(m, particles);
        if dim > MAX_BOSONIC_DIM {
            return Err(Error::DimensionTooLarge {
                dim,
                limit: MAX_BOSONIC_DIM,
            });
        }
        Ok(Self { modes: m, particles, e, w })
    }

    /// Noninteracting problem.
    pub fn free(e: Vec<T>, particles: usize) -> Result<Self> {
        let m = e.len();
        Self::new(e, vec![Complex::zero(); m * m * m * m], particles)
    }

    pub fn with_particles(&self, particles: usize) -> Result<Self> {
        Self::new(self.e.clone(), self.w.clone(), particles)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn energies(&self) -> &[T] {
        &self.e
    }

    pub fn tensor(&self) -> &[Complex<T>] {
        &self.w
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize, k: usize, l: usize) -> Complex<T> {
        self.w[w_index(self.modes, i, j, k, l)]
    }

    /// Occupation-number basis of the `N`-particle sector in lexicographic
    /// order of the occupation tuples (largest first).
    pub fn basis(&self) -> Vec<Vec<u8>> {
        occupation_basis(self.modes, self.particles)
    }

    /// Sparse matrix of `H` on the `N`-particle sector.
    pub fn hamiltonian(&self) -> (Vec<Vec<u8>>, SparseHermitian<T>) {
        let basis = self.basis();
        let index: HashMap<&[u8], usize> = basis.iter().enumerate().map(|(i, b)| (b.as_slice(), i)).collect();
        let m = self.modes;
        let half = T::lit(0.5);
        let mut trip = Vec::new();
        let mut work = vec![0u8; m];
        for (col, occ) in basis.iter().enumerate() {
            let diag: T = occ.iter().zip(&self.e).map(|(&n, &e)| e * T::from_usize(n as usize)).sum();
            trip.push((col, col, Complex::new(diag, T::zero())));
            for k in 0..m {
                for l in 0..m {
                    work.copy_from_slice(occ);
                    let Some(amp_l) = lower(&mut work, l) else { continue };
                    let Some(amp_k) = lower(&mut work, k) else { continue };
                    let removed = amp_l * amp_k;
                    for i in 0..m {
                        for j in 0..m {
                            let wijkl = self.w(i, j, k, l);
                            if wijkl.is_zero() {
                                continue;
                            }
                            let mut out = work.clone();
                            let amp_j = raise(&mut out, j);
                            let amp_i = raise(&mut out, i);
                            let row = index[out.as_slice()];
                            let amp = T::lit(removed * amp_j * amp_i).sqrt();
                            trip.push((row, col, wijkl * (half * amp)));
                        }
                    }
                }
            }
        }
        let dim = basis.len();
        (basis, SparseHermitian::from_triplets(dim, trip))
    }
}

/// `a_j` on an occupation tuple; returns `n_j` (the squared amplitude).
fn lower(occ: &mut [u8], j: usize) -> Option<f64> {
    if occ[j] == 0 {
        return None;
    }
    let n = occ[j] as f64;
    occ[j] -= 1;
    Some(n)
}

/// `a†_j` on an occupation tuple; returns `n_j + 1`.
fn raise(occ: &mut [u8], j: usize) -> f64 {
    occ[j] += 1;
    occ[j] as f64
}

pub fn occupation_basis(m: usize, n: usize) -> Vec<Vec<u8>> {
    fn rec(m: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() + 1 == m {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k as u8);
            rec(m, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::with_capacity(bosonic_dimension(m, n));
    rec(m, n, &mut Vec::with_capacity(m), &mut out);
    out
}

/// Bosonic ground state of a [`FockProblem`].
#[derive(Clone, Debug)]
pub struct FockResult<T: Real> {
    pub e0: T,
    /// `γ_jk = ⟨a†_k a_j⟩`.
    pub gamma1: CMatrix<T>,
    pub condensate_fraction: T,
    pub residual: T,
    pub dimension: usize,
}

fn random_start<T: Real>(dim: usize, seed: u64) -> Vec<Complex<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| Complex::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0))))
        .collect()
}

/// Lowest eigenpair and residual `‖Hv − Ev‖`.
fn ground_pair<T: Real>(h: &SparseHermitian<T>, tol: T) -> Result<(T, Vec<Complex<T>>, T)> {
    let dim = h.dim();
    if dim <= DENSE_LIMIT {
        let (vals, vecs) = eigh(&h.to_dense());
        let v: Vec<Complex<T>> = (0..dim).map(|i| vecs[(i, 0)]).collect();
        let mut hv = vec![Complex::zero(); dim];
        h.matvec(&v, &mut hv);
        let res = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * vals[0]).norm_sqr())
            .sum::<T>()
            .sqrt();
        return Ok((vals[0], v, res));
    }
    lanczos_ground(h, random_start(dim, 0x1a2c05), tol, 120, 60)
}

pub fn ground_state_bosonic<T: Real>(p: &FockProblem<T>) -> Result<FockResult<T>> {
    let (basis, h) = p.hamiltonian();
    let (e0, v, residual) = ground_pair(&h, T::lit(1e-9))?;
    if !(residual <= T::lit(1e-8)) {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: residual.as_f64(),
        });
    }
    let gamma1 = one_body_density(&basis, &v, p.modes());
    let (occ, _) = eigh(&gamma1);
    let top = occ.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(FockResult {
        e0,
        condensate_fraction: top / T::from_usize(p.particles()),
        gamma1,
        residual,
        dimension: basis.len(),
    })
}

/// `γ_jk = ⟨ψ| a†_k a_j |ψ⟩` for a vector in the occupation basis.
pub fn one_body_density<T: Real>(basis: &[Vec<u8>], psi: &[Complex<T>], m: usize) -> CMatrix<T> {
    let index: HashMap<&[u8], usize> = basis.iter().enumerate().map(|(i, b)| (b.as_slice(), i)).collect();
    let mut g = CMatrix::zeros(m);
    for (s, occ) in basis.iter().enumerate() {
        let c = psi[s];
        if c.is_zero() {
            continue;
        }
        for j in 0..m {
            if occ[j] == 0 {
                continue;
            }
            for k in 0..m {
                let mut out = occ.clone();
                let nj = lower(&mut out, j).unwrap_or(0.0);
                let nk = raise(&mut out, k);
                let t = index[out.as_slice()];
                g[(j, k)] += psi[t].conj() * c * T::lit(nj * nk).sqrt();
            }
        }
    }
    g
}

/// Ground energy of the first-quantized truncated Hamiltonian
/// `Σ_p h^(p) + Σ_{p<q} v^(pq)` on the full `M^N`-dimensional tensor power,
/// without any exchange symmetry.
pub fn ground_state_absolute<T: Real>(p: &FockProblem<T>) -> Result<T> {
    let m = p.modes();
    let n = p.particles();
    let dim = (m as u128).pow(n as u32);
    if dim > MAX_PRODUCT_DIM as u128 {
        return Err(Error::DimensionTooLarge {
            dim: dim.min(usize::MAX as u128) as usize,
            limit: MAX_PRODUCT_DIM,
        });
    }
    let dim = dim as usize;
    let mut pow = vec![1usize; n];
    for q in 1..n {
        pow[q] = pow[q - 1] * m;
    }
    let digit = |s: usize, q: usize| (s / pow[q]) % m;
    let mut trip = Vec::new();
    for s in 0..dim {
        let diag: T = (0..n).map(|q| p.energies()[digit(s, q)]).sum();
        trip.push((s, s, Complex::new(diag, T::zero())));
        for q1 in 0..n {
            for q2 in q1 + 1..n {
                let (c, d) = (digit(s, q1), digit(s, q2));
                let base = s - c * pow[q1] - d * pow[q2];
                for a in 0..m {
                    for b in 0..m {
                        let x = p.w(a, b, c, d);
                        if !x.is_zero() {
                            trip.push((base + a * pow[q1] + b * pow[q2], s, x));
                        }
                    }
                }
            }
        }
    }
    let h = SparseHermitian::from_triplets(dim, trip);
    let (e, _, res) = ground_pair(&h, T::lit(1e-9))?;
    if !(res <= T::lit(1e-8)) {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: res.as_f64(),
        });
    }
    Ok(e)
}

/// Pair interaction used to build `W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairPotential<T: Real> {
    /// `8πa δ(x − y)` on the grid: the first-Born surrogate of a potential
    /// with scattering length `a`.
    Delta { a: T },
    /// Radial potential evaluated at minimum-image separations.
    Radial(RadialPotential<T>),
}

/// Family `a ↦ v_a` used by the GP-limit scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairModel<T: Real> {
    Delta,
    /// `a⁻² w(x/a)` for a base potential `w` of unit scattering length.
    Scaled(RadialPotential<T>),
}

impl<T: Real> PairModel<T> {
    pub fn at(&self, a: T) -> Result<PairPotential<T>> {
        match self {
            PairModel::Delta => Ok(PairPotential::Delta { a }),
            PairModel::Scaled(w) => {
                if a == T::zero() {
                    Ok(PairPotential::Delta { a })
                } else {
                    Ok(PairPotential::Radial(scale_potential(w, a)?))
                }
            }
        }
    }
}

/// `W_ijkl = ∫∫ φ̄_i(x) φ̄_j(y) v(x − y) φ_k(x) φ_l(y)` by grid quadrature,
/// symmetrized.
pub fn build_w_tensor<T: Real>(modes: &[Field<T>], v: &PairPotential<T>) -> Result<Vec<Complex<T>>> {
    let m = modes.len();
    if m == 0 || m > MAX_MODES {
        return Err(Error::Invalid(format!("mode count must be in 1..={MAX_MODES}, got {m}")));
    }
    let grid = modes[0].grid().clone();
    if modes.iter().any(|f| !std::sync::Arc::ptr_eq(f.grid(), &grid) && **f.grid() != *grid) {
        return Err(Error::Invalid("modes live on different grids".into()));
    }
    let len = grid.len();
    let dv = grid.cell_volume();
    // pair products P_ik = φ̄_i φ_k
    let mut pairs = Vec::with_capacity(m * m);
    for i in 0..m {
        for k in 0..m {
            let p: Vec<Complex<T>> = modes[i]
                .values()
                .iter()
                .zip(modes[k].values())
                .map(|(a, b)| a.conj() * b)
                .collect();
            pairs.push(p);
        }
    }
    let mut w = vec![Complex::zero(); m * m * m * m];
    let smeared: Vec<Vec<Complex<T>>> = match v {
        PairPotential::Delta { a } => {
            let s = T::lit(8.0) * T::PI() * *a;
            if s == T::zero() {
                return Ok(w);
            }
            pairs.iter().map(|p| p.iter().map(|x| *x * s).collect()).collect()
        }
        PairPotential::Radial(pot) => {
            pot.validate()?;
            if matches!(pot, RadialPotential::HardSphere { .. }) {
                return Err(Error::Invalid("a hard core has no finite matrix elements".into()));
            }
            let kernel = periodic_kernel(&grid, pot);
            let mut khat = kernel;
            grid.forward(&mut khat);
            let scale = T::from_usize(len) * dv;
            pairs
                .iter()
                .map(|p| {
                    let mut f = p.clone();
                    grid.forward(&mut f);
                    for (x, k) in f.iter_mut().zip(&khat) {
                        *x = *x * *k * scale;
                    }
                    grid.inverse(&mut f);
                    f
                })
                .collect()
        }
    };
    for i in 0..m {
        for k in 0..m {
            let pik = &pairs[i * m + k];
            for j in 0..m {
                for l in 0..m {
                    let s: Complex<T> = pik.iter().zip(&smeared[j * m + l]).map(|(a, b)| a * b).sum();
                    w[w_index(m, i, j, k, l)] = s * dv;
                }
            }
        }
    }
    symmetrize_w(&mut w, m);
    Ok(w)
}

/// `v` sampled at minimum-image displacements, laid out so that a circular
/// convolution with it applies the pair potential.
fn periodic_kernel<T: Real>(grid: &crate::lattice::Grid<T>, pot: &RadialPotential<T>) -> Vec<Complex<T>> {
    let d = grid.dim();
    let mut idx = vec![0usize; d];
    (0..grid.len())
        .map(|flat| {
            grid.multi_index(flat, &mut idx);
            let mut r2 = T::zero();
            for a in 0..d {
                let n = grid.points()[a];
                let i = idx[a] as isize;
                let wrapped = if i < (n / 2) as isize { i } else { i - n as isize };
                let x = T::lit(wrapped as f64) * grid.spacing()[a];
                r2 += x * x;
            }
            Complex::new(pot.value(r2.sqrt()), T::zero())
        })
        .collect()
}

/// Quartic tensor `8π ∫ φ̄_i φ̄_j φ_k φ_l`, so that the GP interaction of
/// `φ = Σ c_j φ_j` is `½ g Σ Q_ijkl c̄_i c̄_j c_k c_l`.
pub fn gp_quartic_tensor<T: Real>(modes: &[Field<T>]) -> Result<Vec<Complex<T>>> {
    build_w_tensor(modes, &PairPotential::Delta { a: T::one() })
}

/// `min_{‖c‖=1} Σ e_j |c_j|² + ½ g Σ Q_ijkl c̄_i c̄_j c_k c_l`, the GP
/// functional restricted to the span of the modes. Returns the energy and
/// the minimizing coefficients.
pub fn truncated_gp_energy<T: Real>(e: &[T], q: &[Complex<T>], g: T, restarts: usize, seed: u64) -> (T, Vec<Complex<T>>) {
    let m = e.len();
    let energy = |c: &[Complex<T>]| -> T {
        let mut quad = T::zero();
        for j in 0..m {
            quad += e[j] * c[j].norm_sqr();
        }
        let mut quart = Complex::zero();
        for i in 0..m {
            for j in 0..m {
                let cij = (c[i] * c[j]).conj();
                for k in 0..m {
                    for l in 0..m {
                        quart += q[w_index(m, i, j, k, l)] * cij * c[k] * c[l];
                    }
                }
            }
        }
        quad + T::lit(0.5) * g * quart.re
    };
    let gradient = |c: &[Complex<T>]| -> Vec<Complex<T>> {
        (0..m)
            .map(|i| {
                let mut s = c[i] * e[i];
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            s += q[w_index(m, i, j, k, l)] * c[j].conj() * c[k] * c[l] * g;
                        }
                    }
                }
                s
            })
            .collect()
    };
    let normalize = |c: &mut Vec<Complex<T>>| {
        let n = c.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt();
        for x in c.iter_mut() {
            *x = *x / n;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (T::infinity(), Vec::new());
    for r in 0..=restarts {
        let mut c: Vec<Complex<T>> = if r == 0 {
            let lowest = (0..m).fold(0, |b, j| if e[j] < e[b] { j } else { b });
            (0..m)
                .map(|j| if j == lowest { Complex::new(T::one(), T::zero()) } else { Complex::zero() })
                .collect()
        } else {
            (0..m)
                .map(|_| Complex::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0))))
                .collect()
        };
        normalize(&mut c);
        let mut f = energy(&c);
        let mut tau = T::lit(0.1);
        for _ in 0..20000 {
            let gr = gradient(&c);
            let mu: Complex<T> = c.iter().zip(&gr).map(|(a, b)| a.conj() * b).sum();
            let dir: Vec<Complex<T>> = gr.iter().zip(&c).map(|(g, x)| g - x * mu.re).collect();
            let res = dir.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt();
            if res <= T::lit(1e-13) {
                break;
            }
            let mut moved = false;
            for _ in 0..60 {
                let mut trial: Vec<Complex<T>> = c.iter().zip(&dir).map(|(x, d)| x - d * tau).collect();
                normalize(&mut trial);
                let ft = energy(&trial);
                if ft <= f {
                    c = trial;
                    f = ft;
                    tau = tau * T::lit(1.5);
                    moved = true;
                    break;
                }
                tau = tau * T::lit(0.5);
            }
            if !moved {
                break;
            }
        }
        if f < best.0 {
            best = (f, c);
        }
    }
    best
}

/// One row of a GP-limit scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow<T: Real> {
    pub n: usize,
    pub a: T,
    pub e0_over_n: T,
    pub e_gp_truncated: T,
    pub condensate_fraction: T,
    pub e_abs: Option<T>,
}

/// `E0(N, g/N)/N` for each `N` next to the GP minimum over the span of the
/// lowest `m` eigenmodes of `H₀`.
pub fn gp_limit_scan<T: Real>(
    spec: &ModelSpec<T>,
    m: usize,
    g: T,
    n_list: &[usize],
    pair: &PairModel<T>,
    with_absolute: bool,
) -> Result<Vec<ScanRow<T>>> {
    if n_list.iter().any(|&n| !(2..=MAX_PARTICLES).contains(&n)) {
        return Err(Error::Invalid(format!("particle counts must lie in 2..={MAX_PARTICLES}")));
    }
    let pairs = spec.lowest_eigenpairs(m)?;
    let e: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let modes: Vec<Field<T>> = pairs.into_iter().map(|p| p.1).collect();
    let q = gp_quartic_tensor(&modes)?;
    let (e_gp, _) = truncated_gp_energy(&e, &q, g, 16, 0x6e);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let a = g / T::from_usize(n);
        let w = build_w_tensor(&modes, &pair.at(a)?)?;
        let prob = FockProblem::new(e.clone(), w, n)?;
        let res = ground_state_bosonic(&prob)?;
        let e_abs = if with_absolute {
            Some(ground_state_absolute(&prob)? / T::from_usize(n))
        } else {
            None
        };
        rows.push(ScanRow {
            n,
            a,
            e0_over_n: res.e0 / T::from_usize(n),
            e_gp_truncated: e_gp,
            condensate_fraction: res.condensate_fraction,
            e_abs,
        });
    }
    Ok(rows)
}

/// Outcome of the single-mode coherent-state checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentReport<T: Real> {
    /// `⟨z|a|z⟩`.
    pub annihilation_mean: Complex<T>,
    /// `⟨z|a†a|z⟩`.
    pub number_mean: T,
    /// `‖∫dz |z⟩⟨z| − 1‖` on `span{n ≤ n_max}` (Frobenius).
    pub completeness_error: T,
    /// The same with the radial and angular steps halved.
    pub completeness_error_refined: T,
    /// `‖∫dz (|z|²−1)|z⟩⟨z| − a†a‖` on the span.
    pub upper_symbol_error: T,
    /// `‖∫dz |z|²|z⟩⟨z| − (a†a + 1)‖` on the span.
    pub shifted_symbol_error: T,
}

/// Polar quadrature resolution over the disc `|z| ≤ Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolarQuadrature {
    pub radial: usize,
    pub angular: usize,
}

impl Default for PolarQuadrature {
    fn default() -> Self {
        Self {
            radial: 128,
            angular: 256,
        }
    }
}

/// Truncated coherent vector `e^{−|z|²/2} zⁿ/√n!`, `n < d`.
pub fn coherent_vector<T: Real>(z: Complex<T>, d: usize) -> Vec<Complex<T>> {
    let mut out = Vec::with_capacity(d);
    let mut c = Complex::new((-z.norm_sqr() / T::lit(2.0)).exp(), T::zero());
    for n in 0..d {
        out.push(c);
        c = c * z / T::from_usize(n + 1).sqrt();
    }
    out
}

/// `∫_{|z|≤Z} dz f(|z|²) |z⟩⟨z|` restricted to `n, m ≤ n_max`, midpoint rule
/// in the radius and uniform in the angle, `dz = π⁻¹ dx dy`.
pub fn coherent_quadrature<T: Real>(big_z: T, n_max: usize, quad: PolarQuadrature, f: impl Fn(T) -> T) -> CMatrix<T> {
    let dim = n_max + 1;
    let mut acc = CMatrix::zeros(dim);
    let dr = big_z / T::from_usize(quad.radial);
    let dth = T::lit(2.0) * T::PI() / T::from_usize(quad.angular);
    let measure = dr * dth / T::PI();
    for ir in 0..quad.radial {
        let r = (T::from_usize(ir) + T::lit(0.5)) * dr;
        let weight = measure * r * f(r * r);
        for it in 0..quad.angular {
            let th = dth * T::from_usize(it);
            let z = Complex::from_polar(r, th);
            let v = coherent_vector(z, dim);
            for i in 0..dim {
                for j in 0..dim {
                    acc[(i, j)] += v[i] * v[j].conj() * weight;
                }
            }
        }
    }
    acc
}

fn frobenius_distance<T: Real>(a: &CMatrix<T>, diag: impl Fn(usize) -> T) -> T {
    let n = a.dim();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { diag(i) } else { T::zero() };
            s += (a[(i, j)] - Complex::new(target, T::zero())).norm_sqr();
        }
    }
    s.sqrt()
}

/// Moments of the truncated coherent state and quadrature versions of the
/// completeness relation and of the upper symbol of `a†a`.
pub fn coherent_state_checks<T: Real>(d: usize, z: Complex<T>, big_z: T, n_max: usize, quad: PolarQuadrature) -> Result<CoherentReport<T>> {
    if d < 32 {
        return Err(Error::Invalid(format!("truncation must be at least 32, got {d}")));
    }
    if z.norm() > big_z / T::lit(4.0) {
        return Err(Error::Invalid(format!("|z| = {} exceeds Z/4", z.norm())));
    }
    if n_max + 1 > d {
        return Err(Error::Invalid("test span exceeds the truncation".into()));
    }
    let v = coherent_vector(z, d);
    let mut a_mean = Complex::zero();
    let mut n_mean = T::zero();
    for n in 0..d {
        if n + 1 < d {
            a_mean += v[n].conj() * v[n + 1] * T::from_usize(n + 1).sqrt();
        }
        n_mean += v[n].norm_sqr() * T::from_usize(n);
    }
    let one = |_: T| T::one();
    let refined = PolarQuadrature {
        radial: quad.radial * 2,
        angular: quad.angular * 2,
    };
    let completeness = coherent_quadrature(big_z, n_max, quad, one);
    let completeness_refined = coherent_quadrature(big_z, n_max, refined, one);
    let upper = coherent_quadrature(big_z, n_max, quad, |r2| r2 - T::one());
    let shifted = coherent_quadrature(big_z, n_max, quad, |r2| r2);
    Ok(CoherentReport {
        annihilation_mean: a_mean,
        number_mean: n_mean,
        completeness_error: frobenius_distance(&completeness, |_| T::one()),
        completeness_error_refined: frobenius_distance(&completeness_refined, |_| T::one()),
        upper_symbol_error: frobenius_distance(&upper, |n| T::from_usize(n)),
        shifted_symbol_error: frobenius_distance(&shifted, |n| T::from_usize(n + 1)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Grid;
    use crate::model::{RotationSpec, Trap};

    fn toy_w(m: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w: Vec<Complex<f64>> = (0..m * m * m * m)
            .map(|_| Complex::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)))
            .collect();
        symmetrize_w(&mut w, m);
        w
    }

    #[test]
    fn basis_size_and_order() {
        let b = occupation_basis(3, 2);
        assert_eq!(b.len(), bosonic_dimension(3, 2));
        assert_eq!(b[0], vec![2, 0, 0]);
        assert_eq!(b.last().unwrap(), &vec![0, 0, 2]);
        assert_eq!(bosonic_dimension(6, 10), 3003);
    }

    #[test]
    fn single_mode_closed_form() {
        let w = vec![Complex::new(0.37, 0.0)];
        for n in 1..=10 {
            let p = FockProblem::new(vec![1.25], w.clone(), n).unwrap();
            let r = ground_state_bosonic(&p).unwrap();
            let nf = n as f64;
            let exact = nf * 1.25 + 0.5 * nf * (nf - 1.0) * 0.37;
            assert!((r.e0 - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn free_bosons_condense() {
        let p = FockProblem::free(vec![2.0f64, 4.0, 4.0, 6.0], 8).unwrap();
        let r = ground_state_bosonic(&p).unwrap();
        assert!((r.e0 - 16.0).abs() < 1e-10);
        assert!((r.condensate_fraction - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_modes_two_particles_dense() {
        let w = toy_w(2, 5);
        let e = vec![0.3, 1.1];
        let p = FockProblem::new(e.clone(), w.clone(), 2).unwrap();
        let r = ground_state_bosonic(&p).unwrap();
        // explicit 3×3 matrix on |2,0⟩, |1,1⟩, |0,2⟩
        let wv = |i, j, k, l| w[w_index(2, i, j, k, l)];
        let s2 = 2f64.sqrt();
        let mut h = CMatrix::<f64>::zeros(3);
        h[(0, 0)] = Complex::new(2.0 * e[0], 0.0) + wv(0, 0, 0, 0);
        h[(2, 2)] = Complex::new(2.0 * e[1], 0.0) + wv(1, 1, 1, 1);
        h[(1, 1)] = Complex::new(e[0] + e[1], 0.0) + wv(0, 1, 0, 1) + wv(0, 1, 1, 0);
        h[(0, 2)] = wv(0, 0, 1, 1);
        h[(2, 0)] = wv(1, 1, 0, 0);
        h[(0, 1)] = (wv(0, 0, 0, 1) + wv(0, 0, 1, 0)) * (0.5 * s2);
        h[(1, 0)] = h[(0, 1)].conj();
        h[(2, 1)] = (wv(1, 1, 0, 1) + wv(1, 1, 1, 0)) * (0.5 * s2);
        h[(1, 2)] = h[(2, 1)].conj();
        let (vals, _) = eigh(&h);
        assert!((r.e0 - vals[0]).abs() < 1e-10, "{} vs {}", r.e0, vals[0]);
    }

    #[test]
    fn gamma_is_a_density() {
        let p = FockProblem::new(vec![0.0, 0.5, 0.7], toy_w(3, 9), 4).unwrap();
        let r = ground_state_bosonic(&p).unwrap();
        assert!((r.gamma1.trace().re - 4.0).abs() < 1e-8);
        assert!(r.gamma1.hermiticity_defect() < 1e-10);
        let (vals, _) = eigh(&r.gamma1);
        assert!(vals.iter().all(|&v| v > -1e-10));
        assert!(r.condensate_fraction > 0.0 && r.condensate_fraction <= 1.0 + 1e-12);
    }

    #[test]
    fn absolute_below_bosonic() {
        let p = FockProblem::new(vec![0.0, 0.2, 0.9], toy_w(3, 11), 3).unwrap();
        let e0 = ground_state_bosonic(&p).unwrap().e0;
        let ea = ground_state_absolute(&p).unwrap();
        assert!(ea <= e0 + 1e-10);
        let free = FockProblem::free(vec![1.0f64, 2.0, 3.0], 4).unwrap();
        assert!((ground_state_absolute(&free).unwrap() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn absolute_rejects_large_spaces() {
        let p = FockProblem::free(vec![0.0; 6], 6).unwrap();
        assert!(matches!(ground_state_absolute(&p), Err(Error::DimensionTooLarge { .. })));
    }

    #[test]
    fn delta_tensor_of_gaussian() {
        let grid = Grid::<f64>::cubic(2, 8.0, 64).unwrap().shared();
        let phi = Field::from_fn(&grid, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            Complex::new((-r2 / 2.0).exp() / std::f64::consts::PI.sqrt(), 0.0)
        });
        let a = 0.3f64;
        let w = build_w_tensor(&[phi.clone()], &PairPotential::Delta { a }).unwrap();
        assert!((w[0].re - 4.0 * a).abs() < 1e-6);
        let zero = build_w_tensor(&[phi], &PairPotential::Delta { a: 0.0 }).unwrap();
        assert_eq!(zero[0], Complex::zero());
    }

    #[test]
    fn radial_tensor_is_symmetric() {
        let grid = Grid::<f64>::cubic(2, 6.0, 32).unwrap().shared();
        let spec = ModelSpec::new(grid, Trap::harmonic_isotropic(2, 1.0), RotationSpec::about_z(0.5), 0.0).unwrap();
        let modes: Vec<_> = spec.lowest_eigenpairs(3).unwrap().into_iter().map(|p| p.1).collect();
        let v = PairPotential::Radial(RadialPotential::Gaussian {
            amplitude: 2.0,
            width: 0.7,
        });
        let w = build_w_tensor(&modes, &v).unwrap();
        let (ex, he) = w_symmetry_defects(&w, 3);
        assert!(ex < 1e-12 && he < 1e-12);
        assert!(w[0].re > 0.0);
    }

    #[test]
    fn coherent_moments() {
        let r = coherent_state_checks(64, Complex::new(1.0f64, 1.0), 8.0, 8, PolarQuadrature::default()).unwrap();
        assert!((r.annihilation_mean - Complex::new(1.0, 1.0)).norm() < 1e-10);
        assert!((r.number_mean - 2.0).abs() < 1e-10);
        assert!(r.completeness_error < 1e-3);
        assert!(r.completeness_error_refined < r.completeness_error);
        assert!(r.upper_symbol_error < 1e-3);
        assert!(r.shifted_symbol_error < 1e-3);
        let vac = coherent_vector(Complex::<f64>::zero(), 32);
        assert_eq!(vac[0], Complex::new(1.0, 0.0));
        assert!(vac[1..].iter().all(|c| c.is_zero()));
    }
}
