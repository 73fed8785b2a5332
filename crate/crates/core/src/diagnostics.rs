//! Vortex detection, angular momentum and symmetry-breaking measures.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::gp::GpResult;
use crate::lattice::{Field, Grid};
use crate::model::{apply_lz, ModelSpec};
use crate::real::Real;

/// Relative density floor applied when none is given.
pub const DEFAULT_FLOOR: f64 = 1e-6;
pub const DEFAULT_ENERGY_TOL: f64 = 1e-6;
pub const DEFAULT_DISTANCE_TOL: f64 = 1e-3;

const POLAR_RINGS: usize = 256;
const POLAR_ANGLES: usize = 512;
const FINE_POINTS: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct Vortex<T: Real> {
    /// Plaquette centre (or grid node for a core sitting on a node).
    pub position: [T; 2],
    pub winding: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VortexReport<T: Real> {
    pub vortices: Vec<Vortex<T>>,
    pub total_winding: i32,
    pub lz_expectation: T,
    pub density_floor_used: T,
}

impl<T: Real> VortexReport<T> {
    pub fn count_with_winding(&self, w: i32) -> usize {
        self.vortices.iter().filter(|v| v.winding == w).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport<T: Real> {
    /// `s` of the lowest-energy state; `None` for traps without axial symmetry.
    pub azimuthal_deviation: Option<T>,
    pub n_distinct_minimizers: usize,
    /// Upper triangle, row by row, over the near-degenerate runs.
    pub pairwise_density_distances: Vec<T>,
}

/// `Re⟨φ|L_z φ⟩ / ‖φ‖²`
pub fn lz_expectation<T: Real>(phi: &Field<T>) -> T {
    let n2 = phi.norm_sq();
    if n2 == T::zero() {
        return T::zero();
    }
    phi.inner(&apply_lz(phi)).re / n2
}

/// The `x₃ = 0` plane of a 3D field (the field itself in 2D).
pub fn xy_slice<T: Real>(phi: &Field<T>) -> Field<T> {
    let grid = phi.grid();
    if grid.dim() == 2 {
        return phi.clone();
    }
    let pts = grid.points();
    let hw = grid.half_width();
    let plane = Grid::new(&hw[..2], &pts[..2]).expect("sub-grid of a valid grid").shared();
    let k = pts[2] / 2;
    let values = (0..pts[0] * pts[1])
        .map(|ij| phi.values()[ij * pts[2] + k])
        .collect();
    Field::from_raw(plane, values)
}

fn wrap<T: Real>(d: T) -> T {
    let two_pi = T::TAU();
    let mut v = d - two_pi * (d / two_pi).round();
    if v <= -T::PI() {
        v += two_pi;
    }
    v
}

/// Phase-winding vortex detector on the `x₃ = 0` plane.
///
/// `floor` is an absolute density floor; `None` uses `1e-6 · max|φ|²`.
/// A core sitting exactly on a grid node (so that every plaquette around it
/// has a sub-floor corner) is found by circulating the ring of nodes around
/// the sub-floor patch and reported at the patch centre.
///
/// Nodes on the first row and column (`x = −L`) are left out, so that the
/// scanned plaquettes map onto themselves under a quarter turn.
pub fn detect_vortices<T: Real>(phi: &Field<T>, floor: Option<T>) -> VortexReport<T> {
    let lz = lz_expectation(phi);
    let plane = xy_slice(phi);
    let grid = plane.grid();
    let (nx, ny) = (grid.points()[0], grid.points()[1]);
    let xs = grid.axis_coords(0);
    let ys = grid.axis_coords(1);
    let (hx, hy) = (grid.spacing()[0], grid.spacing()[1]);
    let vals = plane.values();
    let rho: Vec<T> = vals.iter().map(|v| v.norm_sqr()).collect();
    let peak = rho.iter().fold(T::zero(), |a, &b| a.max(b));
    let floor = floor.unwrap_or(T::lit(DEFAULT_FLOOR) * peak);
    let at = |i: usize, j: usize| i * ny + j;
    let phase: Vec<T> = vals.iter().map(|v| v.arg()).collect();
    let edge = |a: usize, b: usize| wrap(phase[b] - phase[a]);
    let above = |i: usize, j: usize| rho[at(i, j)] > floor;
    let circulation = |loop_nodes: &[(usize, usize)]| -> T {
        let mut s = T::zero();
        for w in 0..loop_nodes.len() {
            let (a, b) = (loop_nodes[w], loop_nodes[(w + 1) % loop_nodes.len()]);
            s += edge(at(a.0, a.1), at(b.0, b.1));
        }
        s
    };
    let winding_of = |s: T| (s / T::TAU()).round().to_i32().unwrap_or(0);

    let mut vortices = Vec::new();
    // plaquette windings, counter-clockwise in the (x, y) plane
    let mut plaquette = vec![0i32; nx * ny];
    let mut valid = vec![false; nx * ny];
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            if !(above(i, j) && above(i + 1, j) && above(i + 1, j + 1) && above(i, j + 1)) {
                continue;
            }
            valid[at(i, j)] = true;
            let w = winding_of(circulation(&[(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]));
            plaquette[at(i, j)] = w;
            if w != 0 {
                vortices.push(Vortex {
                    position: [xs[i] + hx / T::lit(2.0), ys[j] + hy / T::lit(2.0)],
                    winding: w,
                });
            }
        }
    }

    // sub-floor patches enclosed by above-floor nodes
    let mut seen = vec![false; nx * ny];
    for i0 in 1..nx - 1 {
        for j0 in 1..ny - 1 {
            if above(i0, j0) || seen[at(i0, j0)] {
                continue;
            }
            let mut patch = vec![(i0, j0)];
            seen[at(i0, j0)] = true;
            let mut k = 0;
            let mut open = false;
            while k < patch.len() && patch.len() <= 64 {
                let (i, j) = patch[k];
                k += 1;
                if i <= 1 || j <= 1 || i + 1 >= nx || j + 1 >= ny {
                    open = true;
                    continue;
                }
                for (a, b) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
                    if !above(a, b) && !seen[at(a, b)] {
                        seen[at(a, b)] = true;
                        patch.push((a, b));
                    }
                }
            }
            if open || patch.len() > 64 {
                continue;
            }
            let imin = patch.iter().map(|p| p.0).min().unwrap() - 1;
            let imax = patch.iter().map(|p| p.0).max().unwrap() + 1;
            let jmin = patch.iter().map(|p| p.1).min().unwrap() - 1;
            let jmax = patch.iter().map(|p| p.1).max().unwrap() + 1;
            let mut ring = Vec::new();
            for i in imin..imax {
                ring.push((i, jmin));
            }
            for j in jmin..jmax {
                ring.push((imax, j));
            }
            for i in (imin + 1..=imax).rev() {
                ring.push((i, jmax));
            }
            for j in (jmin + 1..=jmax).rev() {
                ring.push((imin, j));
            }
            if !ring.iter().all(|&(i, j)| above(i, j)) {
                continue;
            }
            let total = winding_of(circulation(&ring));
            let mut inside = 0;
            for i in imin..imax {
                for j in jmin..jmax {
                    if valid[at(i, j)] {
                        inside += plaquette[at(i, j)];
                    }
                }
            }
            let w = total - inside;
            if w != 0 {
                let cnt = T::from_usize(patch.len());
                let cx = patch.iter().map(|p| xs[p.0]).sum::<T>() / cnt;
                let cy = patch.iter().map(|p| ys[p.1]).sum::<T>() / cnt;
                vortices.push(Vortex { position: [cx, cy], winding: w });
            }
        }
    }

    let total_winding = vortices.iter().map(|v| v.winding).sum();
    VortexReport {
        vortices,
        total_winding,
        lz_expectation: lz,
        density_floor_used: floor,
    }
}

/// Winding of the phase around the rectangle of grid nodes with corners
/// `(i0, j0)` and `(i1, j1)` on the `x₃ = 0` plane, counter-clockwise.
pub fn contour_winding<T: Real>(phi: &Field<T>, i0: usize, j0: usize, i1: usize, j1: usize) -> i32 {
    let plane = xy_slice(phi);
    let ny = plane.grid().points()[1];
    let ph: Vec<T> = plane.values().iter().map(|v| v.arg()).collect();
    let mut ring = Vec::new();
    for i in i0..i1 {
        ring.push((i, j0));
    }
    for j in j0..j1 {
        ring.push((i1, j));
    }
    for i in (i0 + 1..=i1).rev() {
        ring.push((i, j1));
    }
    for j in (j0 + 1..=j1).rev() {
        ring.push((i0, j));
    }
    let mut s = T::zero();
    for w in 0..ring.len() {
        let (a, b) = (ring[w], ring[(w + 1) % ring.len()]);
        s += wrap(ph[b.0 * ny + b.1] - ph[a.0 * ny + a.1]);
    }
    (s / T::TAU()).round().to_i32().unwrap_or(0)
}

/// Band-limited interpolation of the `x₃ = 0` plane onto a finer grid with at
/// least `FINE_POINTS` samples per axis (zero padding in spectral space).
fn upsample<T: Real>(plane: &Field<T>) -> Field<T> {
    let grid = plane.grid();
    let (nx, ny) = (grid.points()[0], grid.points()[1]);
    let fx = FINE_POINTS.div_ceil(nx).max(1);
    let fy = FINE_POINTS.div_ceil(ny).max(1);
    if fx == 1 && fy == 1 {
        return plane.clone();
    }
    let (mx, my) = (nx * fx, ny * fy);
    let fine = Grid::new(grid.half_width(), &[mx, my]).expect("refined grid").shared();
    let spec = plane.spectrum();
    let mut out = vec![Complex::zero(); mx * my];
    let map = |i: usize, n: usize, m: usize| -> Vec<(usize, T)> {
        if i < n / 2 {
            vec![(i, T::one())]
        } else if i > n / 2 {
            vec![(m - (n - i), T::one())]
        } else {
            // split the Nyquist coefficient between ±n/2
            vec![(n / 2, T::lit(0.5)), (m - n / 2, T::lit(0.5))]
        }
    };
    for i in 0..nx {
        for (ii, wi) in map(i, nx, mx) {
            for j in 0..ny {
                for (jj, wj) in map(j, ny, my) {
                    out[ii * my + jj] += spec[i * ny + j] * (wi * wj);
                }
            }
        }
    }
    fine.inverse(&mut out);
    Field::from_raw(fine, out)
}

fn lagrange4<T: Real>(t: T) -> [T; 4] {
    let one = T::one();
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    [
        -t * (t - one) * (t - two) / six,
        (t + one) * (t - one) * (t - two) / two,
        -(t + one) * t * (t - two) / two,
        (t + one) * t * (t - one) / six,
    ]
}

/// Samples of `|φ|²` on polar rings around the origin of the `x₃ = 0`
/// plane, as `(radius, values per angle)`.
pub fn polar_density<T: Real>(phi: &Field<T>, rings: usize, angles: usize) -> Vec<(T, Vec<T>)> {
    let fine = upsample(&xy_slice(phi));
    let grid = fine.grid().clone();
    let (mx, my) = (grid.points()[0], grid.points()[1]);
    let (lx, ly) = (grid.half_width()[0], grid.half_width()[1]);
    let (hx, hy) = (grid.spacing()[0], grid.spacing()[1]);
    let rho: Vec<T> = fine.values().iter().map(|v| v.norm_sqr()).collect();
    let rmax = lx.min(ly);
    let sample = |x: T, y: T| -> T {
        let fx = (x + lx) / hx;
        let fy = (y + ly) / hy;
        let ix = fx.floor();
        let iy = fy.floor();
        let wx = lagrange4(fx - ix);
        let wy = lagrange4(fy - iy);
        let ix = ix.to_i64().unwrap();
        let iy = iy.to_i64().unwrap();
        let mut acc = T::zero();
        for (a, wa) in wx.iter().enumerate() {
            let i = (ix - 1 + a as i64).rem_euclid(mx as i64) as usize;
            for (b, wb) in wy.iter().enumerate() {
                let j = (iy - 1 + b as i64).rem_euclid(my as i64) as usize;
                acc += *wa * *wb * rho[i * my + j];
            }
        }
        acc
    };
    (0..rings)
        .map(|k| {
            let r = (T::from_usize(k) + T::lit(0.5)) * rmax / T::from_usize(rings);
            let vals = (0..angles)
                .map(|m| {
                    let th = T::TAU() * T::from_usize(m) / T::from_usize(angles);
                    sample(r * th.cos(), r * th.sin())
                })
                .collect();
            (r, vals)
        })
        .collect()
}

/// `s = ‖ρ - ρ̄‖₁ / ‖ρ‖₁` with `ρ̄` the azimuthal average of the density.
///
/// The density is evaluated on 256 polar rings after band-limited
/// refinement of the grid and bicubic interpolation.
pub fn symmetry_breaking_metric<T: Real>(spec: &ModelSpec<T>, phi: &Field<T>) -> Result<T> {
    if !spec.is_axisymmetric() || !spec.grid().supports_quarter_turn() {
        return Err(Error::NotAxisymmetricTrap);
    }
    if spec.grid().dim() == 3 {
        let axis = spec.rotation().axis();
        if !(axis[2] == T::one() || spec.rotation().is_zero()) {
            return Err(Error::NotAxisymmetricTrap);
        }
    }
    Ok(azimuthal_deviation(phi))
}

/// The metric itself, without checking the trap.
pub fn azimuthal_deviation<T: Real>(phi: &Field<T>) -> T {
    let rings = polar_density(phi, POLAR_RINGS, POLAR_ANGLES);
    let mut dev = T::zero();
    let mut mass = T::zero();
    for (r, vals) in &rings {
        let mean = vals.iter().copied().sum::<T>() / T::from_usize(vals.len());
        dev += *r * vals.iter().map(|&v| (v - mean).abs()).sum::<T>();
        mass += *r * vals.iter().map(|v| v.abs()).sum::<T>();
    }
    if mass == T::zero() {
        T::zero()
    } else {
        dev / mass
    }
}

/// `∫ | |φ|² − |ψ|² |` for fields on the same grid.
pub fn density_l1_distance<T: Real>(a: &Field<T>, b: &Field<T>) -> T {
    let d: Vec<T> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs())
        .collect();
    a.grid().integrate(&d)
}

/// Groups near-degenerate runs into distinct minimizers by density distance
/// (single linkage).
pub fn minimizer_family_analysis<T: Real>(
    spec: &ModelSpec<T>,
    results: &[GpResult<T>],
    energy_tol: T,
    distance_tol: T,
) -> SymmetryReport<T> {
    let Some(best) = results.iter().min_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap()) else {
        return SymmetryReport {
            azimuthal_deviation: None,
            n_distinct_minimizers: 0,
            pairwise_density_distances: Vec::new(),
        };
    };
    let near: Vec<&Field<T>> = results
        .iter()
        .filter(|r| r.energy <= best.energy + energy_tol)
        .map(|r| &r.phi)
        .collect();
    let (n, distances) = cluster_fields(&near, distance_tol);
    SymmetryReport {
        azimuthal_deviation: symmetry_breaking_metric(spec, &best.phi).ok(),
        n_distinct_minimizers: n,
        pairwise_density_distances: distances,
    }
}

/// Number of single-linkage clusters at density distance `tol`, plus the
/// pairwise distances (upper triangle).
pub fn cluster_fields<T: Real>(fields: &[&Field<T>], tol: T) -> (usize, Vec<T>) {
    let n = fields.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut distances = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = density_l1_distance(fields[i], fields[j]);
            distances.push(d);
            if d < tol {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let clusters = (0..n).filter(|&i| root(&mut parent, i) == i).count();
    (clusters, distances)
}

/// Rotated copy used for covariance checks.
pub fn quarter_turned<T: Real>(phi: &Field<T>) -> Result<Field<T>> {
    Ok(phi.rotate_quarter()?)
}
