//! Periodic Cartesian grids, complex fields on them, and plane-wave
//! spectral differentiation.
//!
//! The box along axis `a` is `[-L_a, L_a)` sampled at `n_a` points with
//! spacing `2 L_a / n_a`. Storage is row-major with the last axis contiguous.
//! Forward transforms carry the `1/N` normalization so that a forward/inverse
//! round trip is the identity and the forward coefficients are the Fourier
//! series coefficients of the band-limited interpolant.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::LatticeError;
use crate::real::{LineTransform, Real};

pub struct Grid<T: Real> {
    half_width: Vec<T>,
    points: Vec<usize>,
    spacing: Vec<T>,
    strides: Vec<usize>,
    coords: Vec<Vec<T>>,
    wavenumbers: Vec<Vec<T>>,
    // per flat index
    k_sq: Vec<T>,
    forward: Vec<(LineTransform<T>, usize)>,
    inverse: Vec<(LineTransform<T>, usize)>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_width", &self.half_width)
            .field("points", &self.points)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.half_width == other.half_width && self.points == other.points
    }
}

impl<T: Real> Grid<T> {
    pub fn new(half_width: &[T], points: &[usize]) -> Result<Self, LatticeError> {
        let dim = points.len();
        if !(2..=3).contains(&dim) || half_width.len() != dim {
            return Err(LatticeError::Dimension(dim));
        }
        for (&n, &l) in points.iter().zip(half_width) {
            if n < 8 || n % 2 != 0 {
                return Err(LatticeError::Points(n));
            }
            if !(l > T::zero()) || !l.is_finite() {
                return Err(LatticeError::HalfWidth(l.as_f64()));
            }
        }

        let spacing: Vec<T> = points
            .iter()
            .zip(half_width)
            .map(|(&n, &l)| (l + l) / T::from_usize(n))
            .collect();
        let mut strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            strides[a] = strides[a + 1] * points[a + 1];
        }
        let coords = (0..dim)
            .map(|a| {
                (0..points[a])
                    .map(|i| -half_width[a] + T::from_usize(i) * spacing[a])
                    .collect()
            })
            .collect();
        let wavenumbers: Vec<Vec<T>> = (0..dim)
            .map(|a| {
                let n = points[a];
                let base = T::PI() / half_width[a];
                (0..n)
                    .map(|i| {
                        let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                        base * T::lit(m)
                    })
                    .collect()
            })
            .collect();
        let total: usize = points.iter().product();
        let mut k_sq = vec![T::zero(); total];
        for (idx, slot) in k_sq.iter_mut().enumerate() {
            let mut rem = idx;
            for a in 0..dim {
                let i = rem / strides[a];
                rem %= strides[a];
                let k = wavenumbers[a][i];
                *slot += k * k;
            }
        }
        let forward = points.iter().map(|&n| T::line_transform(n, false)).collect();
        let inverse = points.iter().map(|&n| T::line_transform(n, true)).collect();

        Ok(Self {
            half_width: half_width.to_vec(),
            points: points.to_vec(),
            spacing,
            strides,
            coords,
            wavenumbers,
            k_sq,
            forward,
            inverse,
        })
    }

    /// Same box and resolution along every axis.
    pub fn cubic(dim: usize, half_width: T, points: usize) -> Result<Self, LatticeError> {
        Self::new(&vec![half_width; dim], &vec![points; dim])
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn half_width(&self) -> &[T] {
        &self.half_width
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.k_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_sq.is_empty()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Coordinates of the sample points along `axis`.
    pub fn axis_coords(&self, axis: usize) -> &[T] {
        &self.coords[axis]
    }

    /// Wavenumbers `π m / L` along `axis`, in FFT ordering.
    pub fn wavenumbers(&self, axis: usize) -> &[T] {
        &self.wavenumbers[axis]
    }

    /// `|k|²` for every flat spectral index.
    pub fn k_squared(&self) -> &[T] {
        &self.k_sq
    }

    /// Quadrature weight of a single cell: the product of the spacings.
    pub fn cell_volume(&self) -> T {
        self.spacing.iter().fold(T::one(), |acc, &h| acc * h)
    }

    pub fn volume(&self) -> T {
        self.half_width
            .iter()
            .fold(T::one(), |acc, &l| acc * (l + l))
    }

    pub fn multi_index(&self, flat: usize, out: &mut [usize]) {
        let mut rem = flat;
        for a in 0..self.dim() {
            out[a] = rem / self.strides[a];
            rem %= self.strides[a];
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Position of the sample with the given flat index.
    pub fn position(&self, flat: usize, out: &mut [T]) {
        let mut rem = flat;
        for a in 0..self.dim() {
            let i = rem / self.strides[a];
            rem %= self.strides[a];
            out[a] = self.coords[a][i];
        }
    }

    /// Evaluates `f` at every grid position.
    pub fn sample<U>(&self, mut f: impl FnMut(&[T]) -> U) -> Vec<U> {
        let mut x = vec![T::zero(); self.dim()];
        (0..self.len())
            .map(|i| {
                self.position(i, &mut x);
                f(&x)
            })
            .collect()
    }

    /// Rectangle-rule integral of a real density; exact for band-limited
    /// periodic integrands.
    pub fn integrate(&self, density: &[T]) -> T {
        debug_assert_eq!(density.len(), self.len());
        density.iter().copied().sum::<T>() * self.cell_volume()
    }

    pub fn integrate_complex(&self, density: &[Complex<T>]) -> Complex<T> {
        debug_assert_eq!(density.len(), self.len());
        density.iter().copied().sum::<Complex<T>>() * self.cell_volume()
    }

    fn transform_axis(&self, data: &mut [Complex<T>], axis: usize, inverse: bool) {
        let (plan, scratch_len) = if inverse {
            &self.inverse[axis]
        } else {
            &self.forward[axis]
        };
        let n = self.points[axis];
        let stride = self.strides[axis];
        let mut scratch = vec![Complex::zero(); *scratch_len];
        if stride == 1 {
            for line in data.chunks_exact_mut(n) {
                plan(line, &mut scratch);
            }
            return;
        }
        let mut line = vec![Complex::zero(); n];
        let block = stride * n;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                plan(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }

    /// Forward transform in place, normalized by `1/N`.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        debug_assert_eq!(data.len(), self.len());
        for a in 0..self.dim() {
            self.transform_axis(data, a, false);
        }
        let inv_n = T::one() / T::from_usize(self.len());
        for v in data.iter_mut() {
            *v = *v * inv_n;
        }
    }

    /// Unnormalized inverse transform in place.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        debug_assert_eq!(data.len(), self.len());
        for a in 0..self.dim() {
            self.transform_axis(data, a, true);
        }
    }

    /// Wavenumber used by first-derivative operators along `axis` for a flat
    /// spectral index; the Nyquist row is zeroed.
    #[inline]
    pub fn derivative_wavenumber(&self, flat: usize, axis: usize) -> T {
        let n = self.points[axis];
        let i = (flat / self.strides[axis]) % n;
        if i == n / 2 {
            T::zero()
        } else {
            self.wavenumbers[axis][i]
        }
    }

    /// Multiplies spectral coefficients by `i k_axis` and transforms back.
    pub fn derivative_from_spectrum(&self, spectrum: &[Complex<T>], axis: usize) -> Vec<Complex<T>> {
        let mut out: Vec<Complex<T>> = spectrum
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let k = self.derivative_wavenumber(idx, axis);
                Complex::new(-c.im * k, c.re * k)
            })
            .collect();
        self.inverse(&mut out);
        out
    }

    /// Multiplies spectral coefficients by `-|k|²` and transforms back.
    pub fn laplacian_from_spectrum(&self, spectrum: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out: Vec<Complex<T>> = spectrum
            .iter()
            .zip(&self.k_sq)
            .map(|(c, &k2)| *c * (-k2))
            .collect();
        self.inverse(&mut out);
        out
    }

    /// Whether a quarter turn about the third axis maps the grid onto itself.
    pub fn supports_quarter_turn(&self) -> bool {
        self.points[0] == self.points[1] && self.half_width[0] == self.half_width[1]
    }
}

/// Complex amplitude on every point of a grid.
#[derive(Clone)]
pub struct Field<T: Real> {
    grid: Arc<Grid<T>>,
    values: Vec<Complex<T>>,
}

impl<T: Real> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("norm", &self.norm())
            .finish()
    }
}

impl<T: Real> Field<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<Complex<T>>) -> Result<Self, LatticeError> {
        if values.len() != grid.len() {
            return Err(LatticeError::Length {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(LatticeError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex::zero(); grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid<T>>, f: impl FnMut(&[T]) -> Complex<T>) -> Self {
        Self {
            grid: grid.clone(),
            values: grid.sample(f),
        }
    }

    pub(crate) fn from_raw(grid: Arc<Grid<T>>, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `⟨self|other⟩` with the conjugate on the left.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        debug_assert!(self.same_grid(other));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex<T>>()
            * self.grid.cell_volume()
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|v| v.norm_sqr()).sum::<T>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Rescales to unit L² norm; returns the previous norm.
    pub fn normalize(&mut self) -> T {
        let n = self.norm();
        if n > T::zero() {
            let inv = T::one() / n;
            self.scale_real(inv);
        }
        n
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn density(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn scale(&mut self, a: Complex<T>) {
        for v in &mut self.values {
            *v = *v * a;
        }
    }

    pub fn scale_real(&mut self, a: T) {
        for v in &mut self.values {
            *v = *v * a;
        }
    }

    /// `self += a · other`
    pub fn axpy(&mut self, a: Complex<T>, other: &Self) {
        debug_assert!(self.same_grid(other));
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s = *s + a * o;
        }
    }

    pub fn axpy_real(&mut self, a: T, other: &Self) {
        debug_assert!(self.same_grid(other));
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s = *s + *o * a;
        }
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest pointwise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn spectrum(&self) -> Vec<Complex<T>> {
        let mut s = self.values.clone();
        self.grid.forward(&mut s);
        s
    }

    /// Squared norm from the spectral coefficients (Parseval).
    pub fn spectral_norm_sq(&self) -> T {
        self.spectrum().iter().map(|c| c.norm_sqr()).sum::<T>() * self.grid.volume()
    }

    /// Field rotated by +90° about the third axis: `ψ(x, y) = φ(y, -x)`.
    pub fn rotate_quarter(&self) -> Result<Self, LatticeError> {
        let g = &self.grid;
        if !g.supports_quarter_turn() {
            return Err(LatticeError::NotSquare);
        }
        let n = g.points()[0];
        let mut out = vec![Complex::zero(); g.len()];
        let mut idx = vec![0; g.dim()];
        for (flat, slot) in out.iter_mut().enumerate() {
            g.multi_index(flat, &mut idx);
            let (i, j) = (idx[0], idx[1]);
            idx[0] = j;
            idx[1] = (n - i) % n;
            *slot = self.values[g.flat_index(&idx)];
        }
        Ok(Self::from_raw(g.clone(), out))
    }
}

/// Integral of a real density over the grid.
pub fn integrate<T: Real>(grid: &Grid<T>, density: &[T]) -> T {
    grid.integrate(density)
}

/// `∂φ/∂x_axis` by multiplication with `i k` in spectral space.
pub fn gradient_spectral<T: Real>(phi: &Field<T>, axis: usize) -> Field<T> {
    let grid = phi.grid();
    let spec = phi.spectrum();
    Field::from_raw(grid.clone(), grid.derivative_from_spectrum(&spec, axis))
}

/// All first derivatives from a single forward transform.
pub fn gradient_all<T: Real>(phi: &Field<T>) -> Vec<Field<T>> {
    let grid = phi.grid();
    let spec = phi.spectrum();
    (0..grid.dim())
        .map(|a| Field::from_raw(grid.clone(), grid.derivative_from_spectrum(&spec, a)))
        .collect()
}

/// `Δφ` (note the sign: callers negate for the kinetic operator).
pub fn laplacian_spectral<T: Real>(phi: &Field<T>) -> Field<T> {
    let grid = phi.grid();
    let spec = phi.spectrum();
    Field::from_raw(grid.clone(), grid.laplacian_from_spectrum(&spec))
}

/// `∫|∇φ|²` evaluated from the spectral coefficients.
pub fn kinetic_energy<T: Real>(phi: &Field<T>) -> T {
    let grid = phi.grid();
    let spec = phi.spectrum();
    spec.iter()
        .zip(grid.k_squared())
        .map(|(c, &k2)| c.norm_sqr() * k2)
        .sum::<T>()
        * grid.volume()
}

/// Applies `(|k|² + shift)^{-1}` in spectral space.
pub fn kinetic_preconditioner<T: Real>(field: &Field<T>, shift: T) -> Field<T> {
    let grid = field.grid();
    let mut spec = field.spectrum();
    for (c, &k2) in spec.iter_mut().zip(grid.k_squared()) {
        *c = *c / (k2 + shift);
    }
    grid.inverse(&mut spec);
    Field::from_raw(grid.clone(), spec)
}

/// Complex unit `i`.
#[inline]
pub fn imag_unit<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(l: f64, n: usize) -> Arc<Grid<f64>> {
        Grid::cubic(2, l, n).unwrap().shared()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::<f64>::new(&[1.0], &[8]).is_err());
        assert!(Grid::<f64>::new(&[1.0, 1.0], &[8, 7]).is_err());
        assert!(Grid::<f64>::new(&[1.0, 1.0], &[6, 6]).is_err());
        assert!(Grid::<f64>::new(&[1.0, -1.0], &[8, 8]).is_err());
        assert!(Grid::<f64>::cubic(4, 1.0, 8).is_err());
    }

    #[test]
    fn spacing_times_points_is_box() {
        let g = Grid::<f64>::new(&[3.0, 5.5, 2.0], &[8, 12, 10]).unwrap();
        for a in 0..3 {
            assert_eq!(g.spacing()[a] * g.points()[a] as f64, 2.0 * g.half_width()[a]);
        }
    }

    #[test]
    fn constant_integrates_to_area() {
        let g = grid2(4.0, 32);
        let ones = vec![1.0; g.len()];
        assert_eq!(g.integrate(&ones), 64.0);
        let zero = vec![0.0; g.len()];
        assert_eq!(integrate(&g, &zero), 0.0);
    }

    #[test]
    fn gaussian_3d_integral() {
        let g = Grid::<f64>::cubic(3, 8.0, 64).unwrap();
        let d = g.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let v = g.integrate(&d);
        let exact = std::f64::consts::PI.powf(1.5);
        assert!(((v - exact) / exact).abs() < 1e-10, "{v} vs {exact}");
    }

    #[test]
    fn plane_wave_derivative() {
        let g = grid2(4.0, 32);
        let k0 = 3.0 * std::f64::consts::PI / 4.0;
        let phi = Field::from_fn(&g, |x| Complex::from_polar(1.0, k0 * x[0]));
        let d = gradient_spectral(&phi, 0);
        let expect = phi.map(|v| Complex::new(0.0, k0) * v);
        assert!(d.max_abs_diff(&expect) < 1e-12);
        let dy = gradient_spectral(&phi, 1);
        assert!(dy.values().iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = grid2(4.0, 16);
        let phi = Field::from_fn(&g, |_| Complex::new(2.0, -1.0));
        assert!(gradient_spectral(&phi, 1).values().iter().all(|v| v.norm() < 1e-13));
        assert!(laplacian_spectral(&phi).values().iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn mixed_product_derivative() {
        let g = grid2(8.0, 64);
        let k0 = std::f64::consts::PI / 4.0;
        let phi = Field::from_fn(&g, |x| Complex::new((k0 * x[0]).sin() * (-x[1] * x[1]).exp(), 0.0));
        let d = gradient_spectral(&phi, 1);
        let expect = Field::from_fn(&g, |x| {
            Complex::new((k0 * x[0]).sin() * (-2.0 * x[1]) * (-x[1] * x[1]).exp(), 0.0)
        });
        assert!(d.max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn plane_wave_laplacian() {
        let g = grid2(4.0, 32);
        let (kx, ky) = (std::f64::consts::PI / 2.0, std::f64::consts::PI);
        let phi = Field::from_fn(&g, |x| Complex::from_polar(1.0, kx * x[0] + ky * x[1]));
        let lap = laplacian_spectral(&phi);
        let expect = phi.map(|v| v * -(kx * kx + ky * ky));
        assert!(lap.max_abs_diff(&expect) < 1e-11);
    }

    #[test]
    fn gaussian_laplacian_3d() {
        let g = Grid::<f64>::cubic(3, 8.0, 48).unwrap().shared();
        let phi = Field::from_fn(&g, |x| {
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            Complex::new((-r2 / 2.0).exp(), 0.0)
        });
        let lap = laplacian_spectral(&phi);
        // Δ e^{-r²/2} = (r² - d) e^{-r²/2}
        let expect = Field::from_fn(&g, |x| {
            let r2 = x.iter().map(|v| v * v).sum::<f64>();
            Complex::new((r2 - 3.0) * (-r2 / 2.0).exp(), 0.0)
        });
        assert!(lap.max_abs_diff(&expect) < 1e-8);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = Grid::<f64>::new(&[3.0, 4.0], &[8, 12]).unwrap().shared();
        let phi = Field::from_fn(&g, |x| Complex::new(x[0].sin(), x[1] * x[0]));
        let mut s = phi.values().to_vec();
        g.forward(&mut s);
        g.inverse(&mut s);
        let back = Field::new(g.clone(), s).unwrap();
        assert!(back.max_abs_diff(&phi) < 1e-13);
    }

    #[test]
    fn quarter_turn_four_times_is_identity() {
        let g = Grid::<f64>::cubic(3, 4.0, 8).unwrap().shared();
        let phi = Field::from_fn(&g, |x| Complex::new(x[0] + 2.0 * x[1], x[2] - x[1]));
        let mut r = phi.clone();
        for _ in 0..4 {
            r = r.rotate_quarter().unwrap();
        }
        assert_eq!(r.max_abs_diff(&phi), 0.0);
        // x ↦ ψ(x, y) = φ(y, -x): for φ = x, ψ = y
        let g2 = grid2(4.0, 8);
        let fx = Field::from_fn(&g2, |x| Complex::new(x[0], 0.0));
        let rot = fx.rotate_quarter().unwrap();
        let fy = Field::from_fn(&g2, |x| Complex::new(x[1], 0.0));
        assert!(rot.max_abs_diff(&fy) < 1e-14);
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = grid2(4.0, 8);
        let mut v = vec![Complex::new(0.0, 0.0); g.len()];
        v[3] = Complex::new(f64::NAN, 0.0);
        assert!(matches!(Field::new(g, v), Err(LatticeError::NonFinite)));
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid::<f32>::cubic(2, 4.0, 16).unwrap().shared();
        let k0 = std::f32::consts::PI / 2.0;
        let phi = Field::from_fn(&g, |x| Complex::from_polar(1.0, k0 * x[1]));
        let d = gradient_spectral(&phi, 1);
        let expect = phi.map(|v| Complex::new(0.0, k0) * v);
        assert!(d.max_abs_diff(&expect) < 1e-4);
        assert!((phi.norm_sq() - 64.0).abs() < 1e-3);
    }
}
