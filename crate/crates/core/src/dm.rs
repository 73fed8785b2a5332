//! Density-matrix functional `Tr[H₀γ] + 4πg∫ρ_γ²` over rank-`n` states
//! `γ = Σ λ_i |φ_i⟩⟨φ_i|`.
//!
//! Minimization alternates an exact weight update on the simplex (orbitals
//! fixed) with orbital steps on the Stiefel manifold (weights fixed). Orbitals
//! carrying zero weight do not enter the energy; they are relaxed separately
//! towards the lowest states of the mean-field operator `H₀ + 8πgρ_γ` in the
//! complement of the occupied ones, so that rank can grow.

use num_complex::Complex;

use crate::eigen::{gram_schmidt, orthonormalize_into};
use crate::error::{Error, Result};
use crate::gp::{flow, noise_seed, restart_seed};
use crate::lattice::{kinetic_preconditioner, Field};
use crate::linalg::{eigh, CMatrix};
use crate::model::{oscillator_block, ModelSpec};
use crate::real::Real;

pub const MAX_RANK: usize = 8;
const ORTHO_TOL: f64 = 1e-10;
const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DmState<T: Real> {
    orbitals: Vec<Field<T>>,
    weights: Vec<T>,
}

impl<T: Real> DmState<T> {
    /// Validates orthonormality (1e-10) and simplex membership (1e-12).
    pub fn new(orbitals: Vec<Field<T>>, weights: Vec<T>) -> Result<Self> {
        let n = orbitals.len();
        if n == 0 || n > MAX_RANK {
            return Err(Error::InvalidState(format!("rank must be in 1..={MAX_RANK}, got {n}")));
        }
        if weights.len() != n {
            return Err(Error::InvalidState(format!("{} weights for {n} orbitals", weights.len())));
        }
        if orbitals.iter().any(|o| !o.same_grid(&orbitals[0])) {
            return Err(Error::InvalidState("orbitals live on different grids".into()));
        }
        for i in 0..n {
            for j in i..n {
                let ip = orbitals[i].inner(&orbitals[j]);
                let want = if i == j { T::one() } else { T::zero() };
                if (ip - Complex::new(want, T::zero())).norm().as_f64() > ORTHO_TOL {
                    return Err(Error::InvalidState(format!("orbitals {i} and {j} are not orthonormal")));
                }
            }
        }
        let tol = T::lit(SIMPLEX_TOL);
        if weights.iter().any(|&w| !(w >= -tol)) {
            return Err(Error::InvalidState("negative weight".into()));
        }
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidState(format!("weights sum to {sum}")));
        }
        let weights = weights.into_iter().map(|w| w.max(T::zero())).collect();
        Ok(Self { orbitals, weights })
    }

    /// Pure state `|φ⟩⟨φ|` padded to rank `n` with zero-weight orbitals
    /// drawn from the low oscillator states.
    pub fn from_pure(phi: &Field<T>, n: usize, seed: u64) -> Result<Self> {
        if n == 0 || n > MAX_RANK {
            return Err(Error::InvalidState(format!("rank must be in 1..={MAX_RANK}, got {n}")));
        }
        let mut basis = vec![phi.clone().normalized()];
        let extra = oscillator_block(phi.grid(), n + 4, seed);
        orthonormalize_into(&mut basis, extra, T::lit(1e-6));
        basis.truncate(n);
        let mut weights = vec![T::zero(); n];
        weights[0] = T::one();
        Self::new(basis, weights)
    }

    /// The same density matrix as a rank-`n` state, padded with unoccupied
    /// orbitals; used to warm-start a larger rank from a smaller one.
    pub fn padded(&self, n: usize, seed: u64) -> Result<Self> {
        if n < self.rank() || n > MAX_RANK {
            return Err(Error::InvalidState(format!("cannot pad rank {} to {n}", self.rank())));
        }
        let mut basis = self.orbitals.clone();
        let extra = oscillator_block(basis[0].grid(), n + 4, seed);
        orthonormalize_into(&mut basis, extra, T::lit(1e-6));
        basis.truncate(n);
        let mut weights = self.weights.clone();
        weights.resize(n, T::zero());
        Self::new(basis, weights)
    }

    pub fn rank(&self) -> usize {
        self.orbitals.len()
    }

    pub fn orbitals(&self) -> &[Field<T>] {
        &self.orbitals
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `ρ_γ(x) = Σ λ_i |φ_i(x)|²`
    pub fn density(&self) -> Vec<T> {
        let mut rho = vec![T::zero(); self.orbitals[0].values().len()];
        for (o, &w) in self.orbitals.iter().zip(&self.weights) {
            if w == T::zero() {
                continue;
            }
            for (r, v) in rho.iter_mut().zip(o.values()) {
                *r += w * v.norm_sqr();
            }
        }
        rho
    }

    fn check_grid(&self, spec: &ModelSpec<T>) -> Result<()> {
        if **self.orbitals[0].grid() != **spec.grid() {
            return Err(Error::InvalidState("state and model use different grids".into()));
        }
        Ok(())
    }
}

fn four_pi<T: Real>() -> T {
    T::lit(4.0) * T::PI()
}

/// `Σ λ_i ⟨φ_i|H₀|φ_i⟩ + 4πg∫ρ_γ²`
pub fn dm_energy<T: Real>(spec: &ModelSpec<T>, state: &DmState<T>) -> Result<T> {
    state.check_grid(spec)?;
    let state = DmState::new(state.orbitals.clone(), state.weights.clone())?;
    let mut e = T::zero();
    for (o, &w) in state.orbitals.iter().zip(&state.weights) {
        if w != T::zero() {
            e += w * spec.h0_expectation(o);
        }
    }
    let rho = state.density();
    let rho2: Vec<T> = rho.iter().map(|r| *r * *r).collect();
    Ok(e + four_pi::<T>() * spec.coupling() * spec.grid().integrate(&rho2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DmOptions {
    /// Threshold on the combined orbital, weight and idle-orbital residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Noise-initialized restarts in addition to the oscillator start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for DmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 20_000,
            restarts: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DmResult<T: Real> {
    pub state: DmState<T>,
    pub energy: T,
    /// `⟨φ_i|H₀|φ_i⟩` per orbital.
    pub orbital_h0: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

/// Orbital energies `⟨φ_i|H₀|φ_i⟩` (all orbitals, or occupied ones only)
/// and the density of the weighted state.
struct Eval<T: Real> {
    h: Vec<T>,
    rho: Vec<T>,
}

fn evaluate<T: Real>(spec: &ModelSpec<T>, orbitals: &[Field<T>], weights: &[T], all: bool) -> Eval<T> {
    let h = orbitals
        .iter()
        .zip(weights)
        .map(|(o, &w)| if all || w > T::zero() { spec.h0_expectation(o) } else { T::zero() })
        .collect();
    let mut rho = vec![T::zero(); orbitals[0].values().len()];
    for (o, &w) in orbitals.iter().zip(weights) {
        if w > T::zero() {
            for (r, v) in rho.iter_mut().zip(o.values()) {
                *r += w * v.norm_sqr();
            }
        }
    }
    Eval { h, rho }
}

/// `(H₀ + 8πgρ) φ`
fn apply_heff<T: Real>(spec: &ModelSpec<T>, rho: &[T], phi: &Field<T>) -> Field<T> {
    let mut out = spec.apply_h0(phi);
    let c = T::lit(2.0) * four_pi::<T>() * spec.coupling();
    if c != T::zero() {
        for ((o, v), r) in out.values_mut().iter_mut().zip(phi.values()).zip(rho) {
            *o += *v * (c * *r);
        }
    }
    out
}

fn overlap_matrix<T: Real>(orbitals: &[Field<T>], grid_integrate: impl Fn(&[T]) -> T) -> Vec<Vec<T>> {
    let n = orbitals.len();
    let dens: Vec<Vec<T>> = orbitals.iter().map(|o| o.density()).collect();
    let mut q = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let prod: Vec<T> = dens[i].iter().zip(&dens[j]).map(|(a, b)| *a * *b).collect();
            let v = grid_integrate(&prod);
            q[i][j] = v;
            q[j][i] = v;
        }
    }
    q
}

fn quad_value<T: Real>(h: &[T], q: &[Vec<T>], c: T, lambda: &[T]) -> T {
    let n = h.len();
    let mut v = T::zero();
    for i in 0..n {
        v += h[i] * lambda[i];
        for j in 0..n {
            v += c * lambda[i] * q[i][j] * lambda[j];
        }
    }
    v
}

fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()))
        .max(T::min_positive_value());
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
        if a[piv][col].abs() <= T::lit(1e-13) * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let t = a[col][k];
                a[r][k] -= f * t;
            }
            let t = b[col];
            b[r] -= f * t;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

/// Minimizes `hᵀλ + c λᵀQλ` over the probability simplex.
///
/// `Q` is a Gram matrix (positive semidefinite), so the problem is convex;
/// every face's stationarity system is solved and the best feasible point
/// kept, which is exact up to rounding for `n ≤ 8`.
pub fn simplex_quadratic_min<T: Real>(h: &[T], q: &[Vec<T>], c: T) -> Vec<T> {
    let n = h.len();
    let mut best: Option<(T, Vec<T>)> = None;
    for mask in 1u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let s = support.len();
        let mut a = vec![vec![T::zero(); s + 1]; s + 1];
        let mut b = vec![T::zero(); s + 1];
        for (r, &i) in support.iter().enumerate() {
            for (k, &j) in support.iter().enumerate() {
                a[r][k] = T::lit(2.0) * c * q[i][j];
            }
            a[r][s] = -T::one();
            b[r] = -h[i];
        }
        for k in 0..s {
            a[s][k] = T::one();
        }
        b[s] = T::one();
        let Some(x) = solve_dense(a, b) else {
            continue;
        };
        if x[..s].iter().any(|&v| v < -T::lit(1e-14)) {
            continue;
        }
        let mut lambda = vec![T::zero(); n];
        let total: T = x[..s].iter().map(|v| v.max(T::zero())).sum();
        for (k, &i) in support.iter().enumerate() {
            lambda[i] = x[k].max(T::zero()) / total;
        }
        let f = quad_value(h, q, c, &lambda);
        if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
            best = Some((f, lambda));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| {
        let mut l = vec![T::zero(); n];
        let i = (0..n).min_by(|&a, &b| h[a].partial_cmp(&h[b]).unwrap()).unwrap();
        l[i] = T::one();
        l
    })
}

/// Largest `Σλ_i d_i − min_i d_i`, the duality gap of the weight problem.
fn frank_wolfe_gap<T: Real>(h: &[T], q: &[Vec<T>], c: T, lambda: &[T]) -> T {
    let n = h.len();
    let d: Vec<T> = (0..n)
        .map(|i| h[i] + T::lit(2.0) * c * (0..n).map(|j| q[i][j] * lambda[j]).sum::<T>())
        .collect();
    let avg: T = d.iter().zip(lambda).map(|(a, b)| *a * *b).sum();
    let min = d.iter().copied().fold(T::infinity(), T::min);
    (avg - min).max(T::zero())
}

/// Orders orbitals by decreasing weight (occupied first).
fn sort_by_weight<T: Real>(orbitals: &mut Vec<Field<T>>, weights: &mut Vec<T>) {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap());
    let o: Vec<Field<T>> = idx.iter().map(|&i| orbitals[i].clone()).collect();
    let w: Vec<T> = idx.iter().map(|&i| weights[i]).collect();
    *orbitals = o;
    *weights = w;
}

fn noise_floor<T: Real>(e: T) -> T {
    T::lit(1e-13_f64.max(64.0 * T::EPS)) * e.abs().max(T::one())
}

/// Relaxes the idle (zero-weight) orbitals towards the lowest states of
/// `H_eff` orthogonal to the occupied ones. Leaves the energy unchanged.
fn relax_idle<T: Real>(spec: &ModelSpec<T>, orbitals: &mut [Field<T>], active: usize, rho: &[T], shift: T) {
    let n = orbitals.len();
    if active == n {
        return;
    }
    let idle: Vec<Field<T>> = orbitals[active..].to_vec();
    let heff_idle: Vec<Field<T>> = idle.iter().map(|o| apply_heff(spec, rho, o)).collect();
    let mut candidates = idle.clone();
    for ho in &heff_idle {
        let mut r = ho.clone();
        for b in orbitals.iter() {
            let c = b.inner(&r);
            r.axpy(-c, b);
        }
        candidates.push(kinetic_preconditioner(&r, shift));
    }
    let mut basis: Vec<Field<T>> = orbitals[..active].to_vec();
    orthonormalize_into(&mut basis, candidates, T::lit(1e-8));
    let sub: Vec<Field<T>> = basis.split_off(active);
    if sub.len() < n - active {
        return;
    }
    let hsub: Vec<Field<T>> = sub.iter().map(|o| apply_heff(spec, rho, o)).collect();
    let m = sub.len();
    let h = CMatrix::from_fn(m, |i, j| sub[i].inner(&hsub[j]));
    let (_, vecs) = eigh(&h);
    for k in 0..n - active {
        let mut f = Field::zeros(sub[0].grid());
        for (i, s) in sub.iter().enumerate() {
            f.axpy(vecs[(i, k)], s);
        }
        orbitals[active + k] = f.normalized();
    }
}

/// Norm of the part of `H_eff φ` outside the orbital span, summed over
/// the idle orbitals.
fn idle_residual<T: Real>(spec: &ModelSpec<T>, orbitals: &[Field<T>], active: usize, rho: &[T]) -> T {
    let mut acc = T::zero();
    for o in &orbitals[active..] {
        let mut r = apply_heff(spec, rho, o);
        for b in orbitals {
            let ip = b.inner(&r);
            r.axpy(-ip, b);
        }
        acc += r.norm_sq();
    }
    acc.sqrt()
}

/// Orthonormal orbitals and weights of `γ = Σ_i |ψ_i⟩⟨ψ_i|`, largest weight
/// first; directions with weight below `1e-13` are dropped.
fn canonicalize<T: Real>(psi: &[Field<T>]) -> (Vec<Field<T>>, Vec<T>) {
    let m = psi.len();
    let gram = CMatrix::from_fn(m, |i, j| psi[i].inner(&psi[j]));
    let (vals, vecs) = eigh(&gram);
    let mut orbitals = Vec::new();
    let mut weights = Vec::new();
    for k in (0..m).rev() {
        if !(vals[k] > T::lit(1e-13)) {
            continue;
        }
        let mut f = Field::zeros(psi[0].grid());
        for (i, p) in psi.iter().enumerate() {
            f.axpy(vecs[(i, k)], p);
        }
        f.scale_real(T::one() / vals[k].sqrt());
        orbitals.push(f);
        weights.push(vals[k]);
    }
    let total: T = weights.iter().copied().sum();
    for w in weights.iter_mut() {
        *w = *w / total;
    }
    (orbitals, weights)
}

/// Flow steps between weight updates.
const INNER_STEPS: usize = 2000;

/// Cap on idle-orbital relaxation sweeps per round.
const IDLE_SWEEPS: usize = 200;

/// Minimization from a given state.
///
/// Each round applies the exact weight update, relaxes the idle orbitals,
/// and then moves the occupied part `ψ_i = √λ_i φ_i` by the normalized
/// conjugate-gradient flow of the GP solver on the product sphere
/// `Σ‖ψ_i‖² = 1`, after which orbitals and weights are re-extracted from the
/// Gram matrix of the `ψ_i`.
pub fn minimize_dm_from<T: Real>(spec: &ModelSpec<T>, init: DmState<T>, opts: &DmOptions) -> Result<DmResult<T>> {
    spec.ensure_stable()?;
    init.check_grid(spec)?;
    let tol = T::lit(opts.tol);
    let n = init.rank();
    let c = four_pi::<T>() * spec.coupling();
    let DmState { mut orbitals, mut weights } = init;
    gram_schmidt(&mut orbitals)?;

    let mut iterations = 0;
    let mut residual;
    loop {
        // exact weight update, orbitals fixed
        let q = overlap_matrix(&orbitals, |d| spec.grid().integrate(d));
        let ev = evaluate(spec, &orbitals, &vec![T::one(); n], true);
        let f_old = quad_value(&ev.h, &q, c, &weights);
        let candidate = simplex_quadratic_min(&ev.h, &q, c);
        if quad_value(&ev.h, &q, c, &candidate) <= f_old {
            weights = candidate;
        }
        let f_new = quad_value(&ev.h, &q, c, &weights);
        assert!(f_new <= f_old + noise_floor(f_old), "weight update raised the energy");
        let gap = frank_wolfe_gap(&ev.h, &q, c, &weights);
        sort_by_weight(&mut orbitals, &mut weights);
        let active = weights.iter().filter(|&&w| w > T::zero()).count();

        let ev = evaluate(spec, &orbitals, &weights, false);
        let level = ev.h.iter().take(active).fold(T::one(), |m, v| m.max(v.abs()));
        let mut idle_res = idle_residual(spec, &orbitals, active, &ev.rho);
        for _ in 0..IDLE_SWEEPS {
            if idle_res <= tol / T::lit(4.0) {
                break;
            }
            relax_idle(spec, &mut orbitals, active, &ev.rho, level);
            idle_res = idle_residual(spec, &orbitals, active, &ev.rho);
        }

        let psi: Vec<Field<T>> = orbitals[..active]
            .iter()
            .zip(&weights)
            .map(|(o, &w)| {
                let mut p = o.clone();
                p.scale_real(w.sqrt());
                p
            })
            .collect();
        let budget = INNER_STEPS.min(opts.max_iter.saturating_sub(iterations));
        let out = flow(spec, psi, tol / T::lit(2.0), budget, false);
        residual = out.residual + gap + idle_res;
        if (out.iterations == 0 && residual <= tol) || iterations >= opts.max_iter {
            break;
        }
        iterations += out.iterations.max(1);

        let (mut occupied, mut w) = canonicalize(&out.psi);
        let idle: Vec<Field<T>> = orbitals[active..].to_vec();
        let filler = oscillator_block(spec.grid(), n + 4, opts.seed);
        orthonormalize_into(&mut occupied, idle, T::lit(1e-6));
        orthonormalize_into(&mut occupied, filler, T::lit(1e-6));
        occupied.truncate(n);
        w.resize(n, T::zero());
        gram_schmidt(&mut occupied)?;
        orbitals = occupied;
        weights = w;
    }

    if !(residual <= tol) {
        return Err(Error::NoConvergence {
            iterations,
            residual: residual.as_f64(),
        });
    }
    sort_by_weight(&mut orbitals, &mut weights);
    let state = DmState::new(orbitals, weights)?;
    let orbital_h0 = state.orbitals.iter().map(|o| spec.h0_expectation(o)).collect();
    let energy = dm_energy(spec, &state)?;
    Ok(DmResult {
        state,
        energy,
        orbital_h0,
        residual,
        iterations,
    })
}

/// Best of the oscillator-state start and `opts.restarts` noise starts.
pub fn minimize_dm<T: Real>(spec: &ModelSpec<T>, n: usize, opts: &DmOptions) -> Result<DmResult<T>> {
    if n == 0 || n > MAX_RANK {
        return Err(Error::InvalidState(format!("rank must be in 1..={MAX_RANK}, got {n}")));
    }
    spec.ensure_stable()?;
    let grid = spec.grid();
    let mut starts = Vec::new();
    let eig = spec.lowest_eigenpairs(n)?;
    let mut w = vec![T::zero(); n];
    w[0] = T::one();
    starts.push(DmState::new(eig.into_iter().map(|p| p.1).collect(), w.clone())?);
    for k in 0..opts.restarts {
        let seed = restart_seed(opts.seed ^ 0xD3, k);
        let mut basis = Vec::new();
        let cands: Vec<Field<T>> = (0..n + 2).map(|j| noise_seed(grid, seed.wrapping_add(97 * j as u64))).collect();
        orthonormalize_into(&mut basis, cands, T::lit(1e-6));
        basis.truncate(n);
        let uniform = vec![T::one() / T::from_usize(n); n];
        starts.push(DmState::new(basis, uniform)?);
    }
    best_of(spec, starts, opts)
}

/// Lowest-energy converged run over the given starts.
pub fn best_of<T: Real>(spec: &ModelSpec<T>, starts: Vec<DmState<T>>, opts: &DmOptions) -> Result<DmResult<T>> {
    let mut best: Option<DmResult<T>> = None;
    let mut last_err = None;
    for s in starts {
        match minimize_dm_from(spec, s, opts) {
            Ok(r) => {
                if best.as_ref().map_or(true, |b| r.energy < b.energy) {
                    best = Some(r);
                }
            }
            Err(e @ Error::NoConvergence { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::Invalid("no starting states".into())))
}
