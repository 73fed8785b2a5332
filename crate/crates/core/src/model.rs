//! Traps, rotation, and the one-particle Hamiltonian `H₀ = -Δ + V - Ω·L`
//! with `L = -i x ∧ ∇`, in units `ħ = 2m = 1`.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eigen::lobpcg;
use crate::error::{Error, Result};
use crate::lattice::{kinetic_preconditioner, Field, Grid};
use crate::linalg::{eigh, CMatrix};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Trap<T: Real> {
    /// `V = Σ ν_i² x_i²`
    Harmonic { nu: Vec<T> },
    /// `V = Σ ν_i² x_i² + λ |x|⁴`, `λ > 0`
    Quartic { nu: Vec<T>, lambda: T },
    /// Values given directly on the grid.
    Sampled { values: Vec<T> },
}

impl<T: Real> Trap<T> {
    pub fn harmonic_isotropic(dim: usize, nu: T) -> Self {
        Trap::Harmonic { nu: vec![nu; dim] }
    }

    pub fn evaluate(&self, grid: &Grid<T>) -> Result<Vec<T>> {
        match self {
            Trap::Harmonic { nu } | Trap::Quartic { nu, .. } => {
                if nu.len() != grid.dim() {
                    return Err(Error::Invalid(format!(
                        "trap has {} frequencies for a {}D grid",
                        nu.len(),
                        grid.dim()
                    )));
                }
                let lambda = match self {
                    Trap::Quartic { lambda, .. } => {
                        if !(*lambda > T::zero()) {
                            return Err(Error::Invalid("quartic coefficient must be positive".into()));
                        }
                        *lambda
                    }
                    _ => T::zero(),
                };
                Ok(grid.sample(|x| {
                    let quad: T = x.iter().zip(nu).map(|(&xi, &n)| n * n * xi * xi).sum();
                    let r2: T = x.iter().map(|&xi| xi * xi).sum();
                    quad + lambda * r2 * r2
                }))
            }
            Trap::Sampled { values } => {
                if values.len() != grid.len() {
                    return Err(Error::Invalid("sampled trap does not match grid".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("sampled trap has non-finite values".into()));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Angular velocity vector. In 2D only the out-of-plane component may be
/// nonzero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationSpec<T: Real> {
    pub omega: [T; 3],
}

impl<T: Real> RotationSpec<T> {
    pub fn none() -> Self {
        Self { omega: [T::zero(); 3] }
    }

    pub fn about_z(omega_z: T) -> Self {
        Self {
            omega: [T::zero(), T::zero(), omega_z],
        }
    }

    pub fn magnitude_sq(&self) -> T {
        self.omega.iter().map(|&w| w * w).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.omega.iter().all(|w| w.is_zero())
    }

    /// Unit axis, defaulting to `z` when there is no rotation.
    pub fn axis(&self) -> [T; 3] {
        let m = self.magnitude_sq().sqrt();
        if m > T::zero() {
            [self.omega[0] / m, self.omega[1] / m, self.omega[2] / m]
        } else {
            [T::zero(), T::zero(), T::one()]
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stability<T: Real> {
    Stable,
    Unstable { witness: Vec<T> },
}

impl<T: Real> Stability<T> {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }
}

fn snap_to_grid<T: Real>(grid: &Grid<T>, point: &[T]) -> Vec<T> {
    (0..grid.dim())
        .map(|a| {
            let h = grid.spacing()[a];
            let l = grid.half_width()[a];
            let i = ((point[a] + l) / h).round().max(T::zero()).min(T::from_usize(grid.points()[a] - 1));
            -l + i * h
        })
        .collect()
}

/// `V(x) - ¼|Ω ∧ x|²` at a point (2D points live in the `z = 0` plane).
fn effective_potential<T: Real>(v: T, x: &[T], rotation: &RotationSpec<T>) -> T {
    let p = [x[0], x[1], if x.len() > 2 { x[2] } else { T::zero() }];
    let w = rotation.omega;
    let c = [
        w[1] * p[2] - w[2] * p[1],
        w[2] * p[0] - w[0] * p[2],
        w[0] * p[1] - w[1] * p[0],
    ];
    v - T::lit(0.25) * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
}

/// Confinement check for `lim (V - ¼|Ω∧x|²) = +∞`.
///
/// Harmonic traps use the closed form (the quadratic form
/// `diag(ν²) - ¼(|Ω|² I - Ω Ωᵀ)` must be positive definite); quartic traps
/// are always confining. Sampled traps use a boundary-shell heuristic: the
/// minimum of the effective potential over the two outermost layers must
/// exceed its value at the grid center by `margin`.
pub fn check_stability<T: Real>(trap: &Trap<T>, rotation: &RotationSpec<T>, grid: &Grid<T>, margin: T) -> Stability<T> {
    let dim = grid.dim();
    match trap {
        Trap::Quartic { .. } => Stability::Stable,
        Trap::Harmonic { nu } => {
            let w = rotation.omega;
            let w2 = rotation.magnitude_sq();
            let q = CMatrix::from_fn(dim, |i, j| {
                let mut v = -T::lit(0.25) * (if i == j { w2 } else { T::zero() } - w[i] * w[j]);
                if i == j {
                    v += nu[i] * nu[i];
                }
                Complex::new(v, T::zero())
            });
            let (vals, vecs) = eigh(&q);
            if vals[0] > T::zero() {
                Stability::Stable
            } else {
                let reach = grid.half_width().iter().copied().fold(T::infinity(), T::min) * T::lit(0.75);
                let dir: Vec<T> = (0..dim).map(|i| vecs[(i, 0)].re * reach).collect();
                Stability::Unstable {
                    witness: snap_to_grid(grid, &dir),
                }
            }
        }
        Trap::Sampled { values } => {
            let mut idx = vec![0; dim];
            let mut x = vec![T::zero(); dim];
            let center_idx: Vec<usize> = grid.points().iter().map(|n| n / 2).collect();
            let center_flat = grid.flat_index(&center_idx);
            grid.position(center_flat, &mut x);
            let center = effective_potential(values[center_flat], &x, rotation);
            let mut worst = T::infinity();
            let mut witness = x.clone();
            for flat in 0..grid.len() {
                grid.multi_index(flat, &mut idx);
                let on_shell = idx.iter().zip(grid.points()).any(|(&i, &n)| i < 2 || i + 2 >= n);
                if !on_shell {
                    continue;
                }
                grid.position(flat, &mut x);
                let w = effective_potential(values[flat], &x, rotation);
                if w < worst {
                    worst = w;
                    witness = x.clone();
                }
            }
            if worst > center + margin {
                Stability::Stable
            } else {
                Stability::Unstable { witness }
            }
        }
    }
}

/// Trap, rotation and coupling on a grid.
#[derive(Clone, Debug)]
pub struct ModelSpec<T: Real> {
    grid: Arc<Grid<T>>,
    trap: Trap<T>,
    rotation: RotationSpec<T>,
    g: T,
    potential: Vec<T>,
    // (Ω ∧ x)_a at every grid point, for axes with a nonzero contribution
    swirl: Vec<Option<Vec<T>>>,
    stability_margin: T,
}

impl<T: Real> ModelSpec<T> {
    pub fn new(grid: Arc<Grid<T>>, trap: Trap<T>, rotation: RotationSpec<T>, g: T) -> Result<Self> {
        if !(g >= T::zero()) || !g.is_finite() {
            return Err(Error::Invalid("coupling g must be nonnegative".into()));
        }
        if grid.dim() == 2 && !(rotation.omega[0].is_zero() && rotation.omega[1].is_zero()) {
            return Err(Error::Invalid("2D rotation must be about the z axis".into()));
        }
        if rotation.omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("rotation must be finite".into()));
        }
        let potential = trap.evaluate(&grid)?;
        let w = rotation.omega;
        let dim = grid.dim();
        let swirl = (0..dim)
            .map(|a| {
                // (Ω × x)_a
                let coeff = |x: &[T]| {
                    let p = [x[0], x[1], if dim > 2 { x[2] } else { T::zero() }];
                    match a {
                        0 => w[1] * p[2] - w[2] * p[1],
                        1 => w[2] * p[0] - w[0] * p[2],
                        _ => w[0] * p[1] - w[1] * p[0],
                    }
                };
                let values = grid.sample(coeff);
                values.iter().any(|v| !v.is_zero()).then_some(values)
            })
            .collect();
        Ok(Self {
            grid,
            trap,
            rotation,
            g,
            potential,
            swirl,
            stability_margin: T::zero(),
        })
    }

    pub fn with_stability_margin(mut self, margin: T) -> Self {
        self.stability_margin = margin;
        self
    }

    /// Same trap and grid with different coupling.
    pub fn with_coupling(&self, g: T) -> Result<Self> {
        Self::new(self.grid.clone(), self.trap.clone(), self.rotation, g)
            .map(|s| s.with_stability_margin(self.stability_margin))
    }

    pub fn with_rotation(&self, rotation: RotationSpec<T>) -> Result<Self> {
        Self::new(self.grid.clone(), self.trap.clone(), rotation, self.g)
            .map(|s| s.with_stability_margin(self.stability_margin))
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn trap(&self) -> &Trap<T> {
        &self.trap
    }

    pub fn rotation(&self) -> &RotationSpec<T> {
        &self.rotation
    }

    pub fn coupling(&self) -> T {
        self.g
    }

    pub fn potential(&self) -> &[T] {
        &self.potential
    }

    pub fn stability(&self) -> Stability<T> {
        check_stability(&self.trap, &self.rotation, &self.grid, self.stability_margin)
    }

    pub fn ensure_stable(&self) -> Result<()> {
        match self.stability() {
            Stability::Stable => Ok(()),
            Stability::Unstable { witness } => Err(Error::Unstable {
                witness: witness.iter().map(|v| v.as_f64()).collect(),
            }),
        }
    }

    /// Whether the trap is symmetric about the rotation axis (z when Ω = 0).
    pub fn is_axisymmetric(&self) -> bool {
        let axis = self.rotation.axis();
        let dim = self.grid.dim();
        match &self.trap {
            Trap::Harmonic { nu } | Trap::Quartic { nu, .. } => {
                if nu.iter().all(|&n| n == nu[0]) {
                    return true;
                }
                if dim == 2 {
                    return nu[0] == nu[1];
                }
                let along = (0..3).find(|&a| axis[a].abs() == T::one());
                match along {
                    Some(a) => {
                        let others: Vec<T> = (0..3).filter(|&b| b != a).map(|b| nu[b]).collect();
                        others[0] == others[1]
                    }
                    None => false,
                }
            }
            Trap::Sampled { values } => {
                if axis[2] != T::one() || !self.grid.supports_quarter_turn() {
                    return false;
                }
                let f = Field::from_raw(
                    self.grid.clone(),
                    values.iter().map(|&v| Complex::new(v, T::zero())).collect(),
                );
                let scale = values.iter().fold(T::zero(), |a, v| a.max(v.abs())).max(T::one());
                match f.rotate_quarter() {
                    Ok(r) => r.max_abs_diff(&f) <= T::lit(1e-12) * scale,
                    Err(_) => false,
                }
            }
        }
    }

    fn check_grid(&self, phi: &Field<T>) {
        assert!(
            Arc::ptr_eq(phi.grid(), &self.grid) || **phi.grid() == *self.grid,
            "field and model live on different grids"
        );
    }

    /// The three pieces of `H₀φ`: `-Δφ`, `Vφ`, `-Ω·Lφ`.
    pub fn h0_terms(&self, phi: &Field<T>) -> H0Terms<T> {
        self.check_grid(phi);
        let grid = &self.grid;
        let spec = phi.spectrum();
        let mut kin: Vec<Complex<T>> = spec
            .iter()
            .zip(grid.k_squared())
            .map(|(c, &k2)| *c * k2)
            .collect();
        grid.inverse(&mut kin);
        let pot: Vec<Complex<T>> = phi
            .values()
            .iter()
            .zip(&self.potential)
            .map(|(v, &p)| *v * p)
            .collect();
        // -Ω·L φ = i (Ω ∧ x)·∇φ
        let mut rot = vec![Complex::zero(); grid.len()];
        for (a, coeff) in self.swirl.iter().enumerate() {
            if let Some(c) = coeff {
                let d = grid.derivative_from_spectrum(&spec, a);
                for ((r, dv), &cv) in rot.iter_mut().zip(&d).zip(c) {
                    *r += Complex::new(-dv.im, dv.re) * cv;
                }
            }
        }
        H0Terms {
            kinetic: Field::from_raw(grid.clone(), kin),
            potential: Field::from_raw(grid.clone(), pot),
            rotational: Field::from_raw(grid.clone(), rot),
        }
    }

    /// `H₀φ = -Δφ + Vφ - Ω·Lφ` with spectral derivatives.
    pub fn apply_h0(&self, phi: &Field<T>) -> Field<T> {
        let t = self.h0_terms(phi);
        t.sum()
    }

    /// `⟨H₀⟩` for a normalized field.
    pub fn h0_expectation(&self, phi: &Field<T>) -> T {
        phi.inner(&self.apply_h0(phi)).re
    }

    /// Lowest `m` eigenpairs of the discretized `H₀`.
    pub fn lowest_eigenpairs(&self, m: usize) -> Result<Vec<(T, Field<T>)>> {
        self.lowest_eigenpairs_with(m, T::lit(1e-8), 5000, 0x5eed)
    }

    pub fn lowest_eigenpairs_with(&self, m: usize, tol: T, max_iter: usize, seed: u64) -> Result<Vec<(T, Field<T>)>> {
        if m == 0 || m > 16 {
            return Err(Error::Invalid(format!("eigenpair count must be in 1..=16, got {m}")));
        }
        self.ensure_stable()?;
        let block = m + 2;
        let initial = oscillator_block(&self.grid, block, seed);
        let out = lobpcg(
            |f| self.apply_h0(f),
            |r, shift| kinetic_preconditioner(r, shift),
            initial,
            m,
            tol,
            max_iter,
        )?;
        Ok(out.values.into_iter().zip(out.vectors).collect())
    }
}

pub struct H0Terms<T: Real> {
    pub kinetic: Field<T>,
    pub potential: Field<T>,
    pub rotational: Field<T>,
}

impl<T: Real> H0Terms<T> {
    pub fn sum(self) -> Field<T> {
        let mut out = self.kinetic;
        out.axpy_real(T::one(), &self.potential);
        out.axpy_real(T::one(), &self.rotational);
        out
    }
}

/// `L_z φ = -i (x ∂_y - y ∂_x) φ`.
pub fn apply_lz<T: Real>(phi: &Field<T>) -> Field<T> {
    let grid = phi.grid();
    let spec = phi.spectrum();
    let dx = grid.derivative_from_spectrum(&spec, 0);
    let dy = grid.derivative_from_spectrum(&spec, 1);
    let mut pos = vec![T::zero(); grid.dim()];
    let vals = (0..grid.len())
        .map(|i| {
            grid.position(i, &mut pos);
            let t = dy[i] * pos[0] - dx[i] * pos[1];
            Complex::new(t.im, -t.re)
        })
        .collect();
    Field::from_raw(grid.clone(), vals)
}

/// Gaussian-weighted low-order monomials plus a little seeded noise; a
/// good starting block for trapped one-body problems.
pub fn oscillator_block<T: Real>(grid: &Arc<Grid<T>>, count: usize, seed: u64) -> Vec<Field<T>> {
    let dim = grid.dim();
    let mut powers: Vec<Vec<u32>> = Vec::new();
    let mut degree = 0u32;
    while powers.len() < count {
        let mut level = Vec::new();
        let mut p = vec![0u32; dim];
        loop {
            if p.iter().sum::<u32>() == degree {
                level.push(p.clone());
            }
            let mut a = 0;
            loop {
                if a == dim {
                    break;
                }
                p[a] += 1;
                if p[a] <= degree {
                    break;
                }
                p[a] = 0;
                a += 1;
            }
            if a == dim {
                break;
            }
        }
        powers.extend(level);
        degree += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    powers
        .into_iter()
        .take(count)
        .map(|pw| {
            let mut f = Field::from_fn(grid, |x| {
                let r2: T = x.iter().map(|&v| v * v).sum();
                let mono = x
                    .iter()
                    .zip(&pw)
                    .fold(T::one(), |acc, (&xi, &k)| acc * xi.powi(k as i32));
                Complex::new(mono * (-r2 / T::lit(2.0)).exp(), T::zero())
            });
            f.normalize();
            let envelope = grid.sample(|x| {
                let r2: T = x.iter().map(|&v| v * v).sum();
                (-r2 / T::lit(2.0)).exp()
            });
            for (v, e) in f.values_mut().iter_mut().zip(envelope) {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                *v += Complex::new(T::lit(a), T::lit(b)) * (e * T::lit(1e-3));
            }
            f
        })
        .collect()
}
