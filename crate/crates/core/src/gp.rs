//! Gross-Pitaevskii functional `⟨φ|H₀|φ⟩ + 4πg∫|φ|⁴`, its gradient, the
//! chemical potential, and minimization on the unit L² sphere.
//!
//! Minimization is a preconditioned nonlinear conjugate-gradient flow along
//! great circles of the sphere. Every accepted step has energy no larger
//! than the previous one (up to a rounding floor of `1e-13·max(1,|E|)`).

use std::sync::Arc;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lattice::{kinetic_preconditioner, Field, Grid};
use crate::model::ModelSpec;
use crate::real::Real;

const NORM_TOL: f64 = 1e-8;
const ROUNDING_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpBreakdown<T: Real> {
    pub kinetic: T,
    pub potential: T,
    pub rotational: T,
    pub interaction: T,
    pub total: T,
}

/// How a minimization run was initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    /// `(x + iy)^q e^{-|x|²/2}`
    Winding(u32),
    /// Gaussian-modulated complex noise, `k`-th restart.
    Noise(usize),
    /// Caller-supplied field.
    Given,
}

#[derive(Clone, Debug)]
pub struct GpResult<T: Real> {
    pub phi: Field<T>,
    pub energy: T,
    pub mu: T,
    pub breakdown: GpBreakdown<T>,
    pub residual: T,
    pub iterations: usize,
    pub restarts_used: usize,
    pub start: Start,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpOptions {
    /// Convergence threshold on `‖∇𝓔 - μφ‖₂`.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of noise-initialized restarts.
    pub restarts: usize,
    pub seed: u64,
    /// Windings `q` of the deterministic vortex-seeded starts.
    pub windings: Vec<u32>,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200_000,
            restarts: 4,
            seed: 0,
            windings: vec![0, 1, 2, 3],
        }
    }
}

fn check_norm<T: Real>(phi: &Field<T>) -> Result<()> {
    let n2 = phi.norm_sq().as_f64();
    if (n2 - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(n2));
    }
    Ok(())
}

fn four_pi<T: Real>() -> T {
    T::lit(4.0) * T::PI()
}

/// `4πg ∫|φ|⁴`
pub fn interaction_energy<T: Real>(spec: &ModelSpec<T>, phi: &Field<T>) -> T {
    if spec.coupling() == T::zero() {
        return T::zero();
    }
    let rho2: Vec<T> = phi.values().iter().map(|v| v.norm_sqr() * v.norm_sqr()).collect();
    four_pi::<T>() * spec.coupling() * spec.grid().integrate(&rho2)
}

/// Term-by-term functional value without a normalization check.
pub fn gp_functional<T: Real>(spec: &ModelSpec<T>, phi: &Field<T>) -> GpBreakdown<T> {
    let terms = spec.h0_terms(phi);
    let kinetic = phi.inner(&terms.kinetic).re;
    let potential = phi.inner(&terms.potential).re;
    let rotational = phi.inner(&terms.rotational).re;
    let interaction = interaction_energy(spec, phi);
    GpBreakdown {
        kinetic,
        potential,
        rotational,
        interaction,
        total: kinetic + potential + rotational + interaction,
    }
}

/// GP energy of a normalized field.
pub fn gp_energy<T: Real>(spec: &ModelSpec<T>, phi: &Field<T>) -> Result<GpBreakdown<T>> {
    check_norm(phi)?;
    Ok(gp_functional(spec, phi))
}

/// Unconstrained functional derivative `H₀φ + 8πg|φ|²φ`.
pub fn gp_gradient<T: Real>(spec: &ModelSpec<T>, phi: &Field<T>) -> Field<T> {
    let mut out = spec.apply_h0(phi);
    add_nonlinearity(spec, phi, &mut out);
    out
}

fn add_nonlinearity<T: Real>(spec: &ModelSpec<T>, phi: &Field<T>, out: &mut Field<T>) {
    let c = T::lit(2.0) * four_pi::<T>() * spec.coupling();
    if c == T::zero() {
        return;
    }
    for (o, v) in out.values_mut().iter_mut().zip(phi.values()) {
        *o += *v * (c * v.norm_sqr());
    }
}

/// `μ = 𝓔[φ] + 4πg∫|φ|⁴`
pub fn chemical_potential<T: Real>(spec: &ModelSpec<T>, phi: &Field<T>) -> Result<T> {
    let b = gp_energy(spec, phi)?;
    Ok(b.total + b.interaction)
}

/// `(x + iy)^q e^{-|x|²/2}`, normalized.
pub fn vortex_seed<T: Real>(grid: &Arc<Grid<T>>, q: u32) -> Field<T> {
    Field::from_fn(grid, |x| {
        let r2: T = x.iter().map(|&v| v * v).sum();
        Complex::new(x[0], x[1]).powu(q) * (-r2 / T::lit(2.0)).exp()
    })
    .normalized()
}

/// Complex Gaussian noise modulated by `e^{-|x|²/2}`, normalized.
pub fn noise_seed<T: Real>(grid: &Arc<Grid<T>>, seed: u64) -> Field<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(grid, |x| {
        let r2: T = x.iter().map(|&v| v * v).sum();
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        Complex::new(T::lit(a), T::lit(b)) * (-r2 / T::lit(2.0)).exp()
    })
    .normalized()
}

/// Seed of the `k`-th noise restart derived from the run seed.
pub fn restart_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64 + 1)
}

/// Several fields treated as one vector of the product space, with the
/// inner product summed over members.
type Block<T> = Vec<Field<T>>;

fn b_inner<T: Real>(a: &[Field<T>], b: &[Field<T>]) -> Complex<T> {
    a.iter().zip(b).map(|(x, y)| x.inner(y)).sum()
}

fn b_norm<T: Real>(a: &[Field<T>]) -> T {
    a.iter().map(|x| x.norm_sq()).sum::<T>().sqrt()
}

fn b_axpy<T: Real>(y: &mut [Field<T>], a: Complex<T>, x: &[Field<T>]) {
    for (u, v) in y.iter_mut().zip(x) {
        u.axpy(a, v);
    }
}

fn b_axpy_real<T: Real>(y: &mut [Field<T>], a: T, x: &[Field<T>]) {
    for (u, v) in y.iter_mut().zip(x) {
        u.axpy_real(a, v);
    }
}

fn b_scale<T: Real>(y: &mut [Field<T>], a: T) {
    for u in y.iter_mut() {
        u.scale_real(a);
    }
}

fn b_normalized<T: Real>(mut y: Block<T>) -> Block<T> {
    let n = b_norm(&y);
    if n > T::zero() {
        b_scale(&mut y, T::one() / n);
    }
    y
}

/// Everything the flow needs at one point of the sphere. The density is
/// `Σ_i |ψ_i|²`; a single member is the GP functional itself.
struct Point<T: Real> {
    psi: Block<T>,
    grad: Block<T>,
    breakdown: GpBreakdown<T>,
    mu: T,
    residual: Block<T>,
    res_norm: T,
}

impl<T: Real> Point<T> {
    fn at(spec: &ModelSpec<T>, psi: Block<T>) -> Self {
        let (mut kinetic, mut potential, mut rotational) = (T::zero(), T::zero(), T::zero());
        let mut grad = Vec::with_capacity(psi.len());
        for p in &psi {
            let terms = spec.h0_terms(p);
            kinetic += p.inner(&terms.kinetic).re;
            potential += p.inner(&terms.potential).re;
            rotational += p.inner(&terms.rotational).re;
            grad.push(terms.sum());
        }
        let mut rho = vec![T::zero(); psi[0].values().len()];
        for p in &psi {
            for (r, v) in rho.iter_mut().zip(p.values()) {
                *r += v.norm_sqr();
            }
        }
        let interaction = if spec.coupling() == T::zero() {
            T::zero()
        } else {
            let rho2: Vec<T> = rho.iter().map(|r| *r * *r).collect();
            four_pi::<T>() * spec.coupling() * spec.grid().integrate(&rho2)
        };
        let c = T::lit(2.0) * four_pi::<T>() * spec.coupling();
        if c != T::zero() {
            for (g, p) in grad.iter_mut().zip(&psi) {
                for ((o, v), r) in g.values_mut().iter_mut().zip(p.values()).zip(&rho) {
                    *o += *v * (c * *r);
                }
            }
        }
        let mu = b_inner(&psi, &grad).re;
        let mut residual = grad.clone();
        b_axpy_real(&mut residual, -mu, &psi);
        let res_norm = b_norm(&residual);
        Self {
            psi,
            grad,
            breakdown: GpBreakdown {
                kinetic,
                potential,
                rotational,
                interaction,
                total: kinetic + potential + rotational + interaction,
            },
            mu,
            residual,
            res_norm,
        }
    }

    fn energy(&self) -> T {
        self.breakdown.total
    }
}

fn project_tangent<T: Real>(psi: &[Field<T>], v: &mut [Field<T>]) {
    let c = b_inner(psi, v);
    b_axpy(v, -c, psi);
}

/// Point on the great circle `cos θ ψ + sin θ d`.
fn along<T: Real>(psi: &[Field<T>], dir: &[Field<T>], theta: T) -> Block<T> {
    let mut out = psi.to_vec();
    b_scale(&mut out, theta.cos());
    b_axpy_real(&mut out, theta.sin(), dir);
    // keep the constraint exact against accumulated rounding
    b_normalized(out)
}

/// `dE/dθ` along the great circle at angle `θ`.
fn slope_at<T: Real>(p: &Point<T>, psi0: &[Field<T>], dir: &[Field<T>], theta: T) -> T {
    let mut tangent = psi0.to_vec();
    b_scale(&mut tangent, -theta.sin());
    b_axpy_real(&mut tangent, theta.cos(), dir);
    T::lit(2.0) * b_inner(&tangent, &p.grad).re
}

pub(crate) struct FlowOutcome<T: Real> {
    pub psi: Block<T>,
    pub breakdown: GpBreakdown<T>,
    pub mu: T,
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
    pub energies: Vec<T>,
}

/// Normalized gradient flow from `init` until the residual reaches `tol`.
pub(crate) fn flow<T: Real>(spec: &ModelSpec<T>, init: Block<T>, tol: T, max_iter: usize, keep_trace: bool) -> FlowOutcome<T> {
    let mut cur = Point::at(spec, b_normalized(init));
    let mut energies = Vec::new();
    if keep_trace {
        energies.push(cur.energy());
    }
    let mut prev_dir: Option<Block<T>> = None;
    let mut prev_pr: Option<(Block<T>, T)> = None; // (P r, ⟨r|P r⟩)
    let mut theta_guess = T::lit(0.05);
    let mut iterations = 0;
    let mut converged = false;
    let two = T::lit(2.0);

    while iterations < max_iter {
        if cur.res_norm <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let shift = cur.mu.abs().max(T::one());
        let mut pr: Block<T> = cur.residual.iter().map(|r| kinetic_preconditioner(r, shift)).collect();
        project_tangent(&cur.psi, &mut pr);
        let rpr = b_inner(&cur.residual, &pr).re;

        let mut beta = T::zero();
        if let (Some((old_pr, old_rpr)), Some(_)) = (&prev_pr, &prev_dir) {
            // Polak-Ribière+ with the preconditioned inner product
            let mut diff = pr.clone();
            b_axpy_real(&mut diff, -T::one(), old_pr);
            let num = b_inner(&cur.residual, &diff).re;
            if *old_rpr > T::zero() {
                beta = (num / *old_rpr).max(T::zero());
            }
        }
        let mut found = None;
        for attempt in 0..2 {
            let mut dir = pr.clone();
            b_scale(&mut dir, -T::one());
            if attempt == 0 && beta > T::zero() {
                if let Some(pd) = &prev_dir {
                    let mut carried = pd.clone();
                    project_tangent(&cur.psi, &mut carried);
                    b_axpy_real(&mut dir, beta, &carried);
                }
            }
            let dnorm = b_norm(&dir);
            if !(dnorm > T::zero()) {
                break;
            }
            b_scale(&mut dir, T::one() / dnorm);
            let s0 = two * b_inner(&dir, &cur.grad).re;
            if !(s0 < T::zero()) {
                continue;
            }
            if let Some((next, theta)) = line_search(spec, &cur, &dir, s0, theta_guess) {
                found = Some((next, dir, theta, dnorm));
                break;
            }
            if beta == T::zero() {
                break;
            }
        }
        let Some((next, dir, theta, dnorm)) = found else {
            break;
        };
        debug_assert!(next.energy() <= cur.energy() + noise_floor(cur.energy()));
        theta_guess = (theta * T::lit(1.5)).min(T::lit(0.5));
        let mut carried = dir;
        b_scale(&mut carried, dnorm);
        prev_dir = Some(carried);
        prev_pr = Some((pr, rpr));
        cur = next;
        if keep_trace {
            energies.push(cur.energy());
        }
    }
    if !converged && cur.res_norm <= tol {
        converged = true;
    }
    FlowOutcome {
        residual: cur.res_norm,
        breakdown: cur.breakdown,
        mu: cur.mu,
        psi: cur.psi,
        iterations,
        converged,
        energies,
    }
}

fn noise_floor<T: Real>(e: T) -> T {
    T::lit(ROUNDING_FLOOR.max(64.0 * T::EPS)) * e.abs().max(T::one())
}

fn acceptable<T: Real>(cur: &Point<T>, trial: &Point<T>, s0: T, theta: T) -> bool {
    let e0 = cur.energy();
    let e1 = trial.energy();
    if e1 > e0 + noise_floor(e0) {
        return false;
    }
    // sufficient decrease, or (inside the rounding floor) a smaller residual
    e1 <= e0 + T::lit(1e-4) * s0 * theta || trial.res_norm < cur.res_norm
}

fn line_search<T: Real>(spec: &ModelSpec<T>, cur: &Point<T>, dir: &[Field<T>], s0: T, guess: T) -> Option<(Point<T>, T)> {
    let mut theta0 = guess;
    for _ in 0..40 {
        let p1 = Point::at(spec, along(&cur.psi, dir, theta0));
        let s1 = slope_at(&p1, &cur.psi, dir, theta0);
        let mut best: Option<(Point<T>, T)> = None;
        if s1 > s0 {
            let theta_star = (theta0 * s0 / (s0 - s1))
                .max(theta0 * T::lit(0.05))
                .min(theta0 * T::lit(8.0))
                .min(T::FRAC_PI_4());
            if (theta_star - theta0).abs() > T::lit(1e-3) * theta0 {
                let ps = Point::at(spec, along(&cur.psi, dir, theta_star));
                if acceptable(cur, &ps, s0, theta_star) && ps.energy() <= p1.energy() {
                    best = Some((ps, theta_star));
                }
            }
        }
        if best.is_none() && acceptable(cur, &p1, s0, theta0) {
            best = Some((p1, theta0));
        }
        if best.is_some() {
            return best;
        }
        theta0 = theta0 * T::lit(0.25);
        if theta0 < T::lit(1e-14) {
            break;
        }
    }
    None
}

fn to_result<T: Real>(out: FlowOutcome<T>, start: Start, restarts_used: usize) -> GpResult<T> {
    GpResult {
        energy: out.breakdown.total,
        mu: out.mu,
        breakdown: out.breakdown,
        residual: out.residual,
        iterations: out.iterations,
        restarts_used,
        start,
        phi: out.psi.into_iter().next().expect("single member"),
    }
}

/// Single minimization run from a given field.
pub fn minimize_gp_from<T: Real>(spec: &ModelSpec<T>, init: Field<T>, opts: &GpOptions) -> Result<GpResult<T>> {
    spec.ensure_stable()?;
    let out = flow(spec, vec![init], T::lit(opts.tol), opts.max_iter, false);
    if !out.converged {
        return Err(Error::NoConvergence {
            iterations: out.iterations,
            residual: out.residual.as_f64(),
        });
    }
    Ok(to_result(out, Start::Given, 1))
}

/// Energy trace of a single run; each entry is an accepted iterate.
pub fn energy_trace<T: Real>(spec: &ModelSpec<T>, init: Field<T>, opts: &GpOptions) -> Result<(GpResult<T>, Vec<T>)> {
    spec.ensure_stable()?;
    let mut out = flow(spec, vec![init], T::lit(opts.tol), opts.max_iter, true);
    let trace = std::mem::take(&mut out.energies);
    let converged = out.converged;
    let res = to_result(out, Start::Given, 1);
    if !converged {
        return Err(Error::NoConvergence {
            iterations: res.iterations,
            residual: res.residual.as_f64(),
        });
    }
    Ok((res, trace))
}

/// All converged runs (vortex seeds first, then noise restarts), sorted by
/// energy. Fails with `NoConvergence` only when no run converges.
pub fn minimize_gp_all<T: Real>(spec: &ModelSpec<T>, opts: &GpOptions) -> Result<Vec<GpResult<T>>> {
    spec.ensure_stable()?;
    let grid = spec.grid();
    let mut starts: Vec<(Start, Field<T>)> = opts
        .windings
        .iter()
        .map(|&q| (Start::Winding(q), vortex_seed(grid, q)))
        .collect();
    for k in 0..opts.restarts {
        starts.push((Start::Noise(k), noise_seed(grid, restart_seed(opts.seed, k))));
    }
    if starts.is_empty() {
        return Err(Error::Invalid("no starting points requested".into()));
    }
    let used = starts.len();
    let mut worst = (0, f64::INFINITY);
    let mut results = Vec::new();
    for (start, init) in starts {
        let out = flow(spec, vec![init], T::lit(opts.tol), opts.max_iter, false);
        if out.converged {
            results.push(to_result(out, start, used));
        } else if worst.1.is_infinite() || out.residual.as_f64() < worst.1 {
            worst = (out.iterations, out.residual.as_f64());
        }
    }
    if results.is_empty() {
        return Err(Error::NoConvergence {
            iterations: worst.0,
            residual: worst.1,
        });
    }
    results.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    Ok(results)
}

/// Best of all restarts.
pub fn minimize_gp<T: Real>(spec: &ModelSpec<T>, opts: &GpOptions) -> Result<GpResult<T>> {
    Ok(minimize_gp_all(spec, opts)?.swap_remove(0))
}

/// Runs whose energy is within `window` of the lowest one.
pub fn minimizer_family<T: Real>(results: &[GpResult<T>], window: T) -> Vec<&GpResult<T>> {
    let Some(best) = results.iter().map(|r| r.energy).reduce(T::min) else {
        return Vec::new();
    };
    results.iter().filter(|r| r.energy <= best + window).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RotationSpec, Trap};
    use std::f64::consts::PI;

    fn spec2(n: usize, l: f64, omega: f64, g: f64) -> ModelSpec<f64> {
        let grid = Grid::cubic(2, l, n).unwrap().shared();
        ModelSpec::new(grid, Trap::harmonic_isotropic(2, 1.0), RotationSpec::about_z(omega), g).unwrap()
    }

    #[test]
    fn oscillator_energy_and_mu() {
        let grid = Grid::cubic(3, 8.0, 32).unwrap().shared();
        let spec = ModelSpec::new(grid.clone(), Trap::harmonic_isotropic(3, 1.0), RotationSpec::none(), 0.0).unwrap();
        let phi = Field::from_fn(&grid, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex::new(PI.powf(-0.75) * (-r2 / 2.0).exp(), 0.0)
        });
        let b = gp_energy(&spec, &phi).unwrap();
        assert!((b.total - 3.0).abs() < 1e-8);
        assert_eq!(b.interaction, 0.0);
        assert!((chemical_potential(&spec, &phi).unwrap() - 3.0).abs() < 1e-8);
        let grad = gp_gradient(&spec, &phi);
        assert!(grad.max_abs_diff(&phi.map(|v| v * 3.0)) < 1e-8);
        assert_eq!(grad.max_abs_diff(&spec.apply_h0(&phi)), 0.0);
    }

    #[test]
    fn constant_density_in_free_box() {
        let grid = Grid::<f64>::cubic(2, 4.0, 16).unwrap().shared();
        let g = 0.7;
        let spec = ModelSpec::new(grid.clone(), Trap::Sampled { values: vec![0.0; grid.len()] }, RotationSpec::none(), g).unwrap();
        let vol = grid.volume();
        let phi = Field::from_fn(&grid, |_| Complex::new(vol.powf(-0.5), 0.0));
        let b = gp_energy(&spec, &phi).unwrap();
        assert!((b.total - 4.0 * PI * g / vol).abs() < 1e-12);
        assert!((chemical_potential(&spec, &phi).unwrap() - 8.0 * PI * g / vol).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized() {
        let spec = spec2(16, 6.0, 0.0, 1.0);
        let phi = vortex_seed(spec.grid(), 0).map(|v| v * 1.1);
        assert!(matches!(gp_energy(&spec, &phi), Err(Error::NotNormalized(_))));
        assert!(matches!(chemical_potential(&spec, &phi), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn breakdown_sums_to_total() {
        let spec = spec2(32, 6.0, 0.8, 3.0);
        let phi = noise_seed(spec.grid(), 9);
        let b = gp_energy(&spec, &phi).unwrap();
        assert!((b.kinetic + b.potential + b.rotational + b.interaction - b.total).abs() < 1e-12 * b.total.abs().max(1.0));
        assert!(b.kinetic >= 0.0 && b.interaction >= 0.0);
    }

    #[test]
    fn rotating_linear_minimum() {
        let spec = spec2(64, 8.0, 1.0, 0.0);
        let opts = GpOptions { restarts: 2, seed: 1, ..Default::default() };
        let r = minimize_gp(&spec, &opts).unwrap();
        assert!((r.energy - 2.0).abs() < 1e-6, "{}", r.energy);
        let lz = r.phi.inner(&crate::model::apply_lz(&r.phi)).re;
        assert!(lz.abs() < 1e-6);
        assert!((r.phi.norm_sq() - 1.0).abs() < 1e-10);
        assert!(r.residual <= opts.tol);
        assert_eq!(r.restarts_used, 6);
    }

    #[test]
    fn energy_never_increases() {
        let spec = spec2(32, 7.0, 0.9, 5.0);
        let opts = GpOptions { tol: 1e-7, ..Default::default() };
        let (res, trace) = energy_trace(&spec, noise_seed(spec.grid(), 4), &opts).unwrap();
        assert!(trace.len() > 2);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-13 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        let mu = chemical_potential(&spec, &res.phi).unwrap();
        assert!((mu - res.mu).abs() < 1e-10);
        assert!((res.mu - (res.energy + res.breakdown.interaction)).abs() < 1e-10);
        let mut r = gp_gradient(&spec, &res.phi);
        r.axpy_real(-mu, &res.phi);
        assert!(r.norm() <= opts.tol);
    }

    #[test]
    fn unstable_model_is_rejected() {
        let spec = spec2(16, 6.0, 2.5, 1.0);
        assert!(matches!(minimize_gp(&spec, &GpOptions::default()), Err(Error::Unstable { .. })));
    }

    #[test]
    fn single_precision_flow_runs() {
        let grid = Grid::<f32>::cubic(2, 6.0, 32).unwrap().shared();
        let spec = ModelSpec::new(grid, Trap::harmonic_isotropic(2, 1.0), RotationSpec::none(), 1.0).unwrap();
        let opts = GpOptions { tol: 1e-3, restarts: 0, windings: vec![0], ..Default::default() };
        let r = minimize_gp(&spec, &opts).unwrap();
        assert!(r.energy > 3.0 && r.energy < 2.0 * 3f32.sqrt(), "{}", r.energy);
    }
}
