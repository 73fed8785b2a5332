use std::sync::Arc;

use proptest::prelude::*;
use rotbec::gp::{gp_functional, gp_gradient};
use rotbec::lattice::{gradient_spectral, laplacian_spectral};
use rotbec::{Field64, Grid64, ModelSpec64, RotationSpec, Trap64, C64};

/// A few complex Gaussian bumps well inside the box.
#[derive(Clone, Debug)]
struct Bumps(Vec<([f64; 3], f64, C64, [f64; 3])>);

fn bumps(width: std::ops::Range<f64>, reach: f64) -> impl Strategy<Value = Bumps> {
    let one = (
        prop::array::uniform3(-reach..reach),
        width,
        (-1.0..1.0f64, -1.0..1.0f64),
        prop::array::uniform3(-0.8..0.8f64),
    )
        .prop_map(|(c, s, (re, im), k)| (c, s, C64::new(re, im), k));
    prop::collection::vec(one, 1..4).prop_map(Bumps)
}

impl Bumps {
    fn field(&self, grid: &Arc<Grid64>) -> Field64 {
        Field64::from_fn(grid, |x| {
            let mut v = C64::new(0.0, 0.0);
            for (c, s, amp, k) in &self.0 {
                let mut r2 = 0.0;
                let mut phase = 0.0;
                for a in 0..x.len() {
                    r2 += (x[a] - c[a]).powi(2);
                    phase += k[a] * x[a];
                }
                v += amp * (-r2 / (2.0 * s * s)).exp() * C64::from_polar(1.0, phase);
            }
            v
        })
    }
}

fn grid(dim: usize, half: f64, n: usize) -> Arc<Grid64> {
    Grid64::cubic(dim, half, n).unwrap().shared()
}

fn rotating(grid: &Arc<Grid64>, omega: [f64; 3], g: f64) -> ModelSpec64 {
    ModelSpec64::new(grid.clone(), Trap64::harmonic_isotropic(grid.dim(), 1.0), RotationSpec { omega }, g).unwrap()
}

fn rel(a: C64, b: C64, scale: f64) -> f64 {
    (a - b).norm() / scale.max(1e-300)
}

/// `Σ_k (i∂_k + A_k)² ψ - |A|² ψ` with `A = Ω∧x/2`.
fn magnetic_form(omega: [f64; 3], psi: &Field64) -> Field64 {
    let grid = psi.grid().clone();
    let dim = grid.dim();
    let mut pos = vec![0.0; dim];
    let potential: Vec<[f64; 3]> = (0..grid.len())
        .map(|i| {
            grid.position(i, &mut pos);
            let x = [pos[0], pos[1], if dim == 3 { pos[2] } else { 0.0 }];
            [
                0.5 * (omega[1] * x[2] - omega[2] * x[1]),
                0.5 * (omega[2] * x[0] - omega[0] * x[2]),
                0.5 * (omega[0] * x[1] - omega[1] * x[0]),
            ]
        })
        .collect();
    let covariant = |f: &Field64, k: usize| -> Field64 {
        let d = gradient_spectral(f, k);
        let vals = d
            .values()
            .iter()
            .zip(f.values())
            .zip(&potential)
            .map(|((dv, v), a)| C64::new(-dv.im, dv.re) + v * a[k])
            .collect();
        Field64::new(grid.clone(), vals).unwrap()
    };
    let mut out = Field64::zeros(&grid);
    for k in 0..dim {
        out.axpy_real(1.0, &covariant(&covariant(psi, k), k));
    }
    for ((o, v), a) in out.values_mut().iter_mut().zip(psi.values()).zip(&potential) {
        let a2: f64 = (0..3).map(|k| a[k] * a[k]).sum();
        *o -= v * a2;
    }
    out
}

fn interior_max_diff(a: &Field64, b: &Field64, frac: f64) -> (f64, f64) {
    let grid = a.grid();
    let half = grid.half_width()[0];
    let mut pos = vec![0.0; grid.dim()];
    let mut diff: f64 = 0.0;
    let mut size: f64 = 0.0;
    for i in 0..grid.len() {
        grid.position(i, &mut pos);
        if pos.iter().all(|x| x.abs() < frac * half) {
            diff = diff.max((a.values()[i] - b.values()[i]).norm());
            size = size.max(a.values()[i].norm());
        }
    }
    (diff, size)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn h0_is_hermitian(f in bumps(0.8..1.4, 2.0), h in bumps(0.8..1.4, 2.0), wz in -1.8..1.8f64) {
        let gr = grid(2, 6.0, 32);
        let spec = rotating(&gr, [0.0, 0.0, wz], 0.0);
        let (phi, psi) = (f.field(&gr), h.field(&gr));
        let lhs = phi.inner(&spec.apply_h0(&psi));
        let rhs = spec.apply_h0(&phi).inner(&psi);
        prop_assert!(rel(lhs, rhs, phi.norm() * spec.apply_h0(&psi).norm()) < 1e-10);
    }

    #[test]
    fn h0_is_hermitian_3d_tilted(f in bumps(0.9..1.3, 1.5), h in bumps(0.9..1.3, 1.5), w in prop::array::uniform3(-1.0..1.0f64)) {
        let gr = grid(3, 6.0, 24);
        let spec = rotating(&gr, w, 0.0);
        let (phi, psi) = (f.field(&gr), h.field(&gr));
        let lhs = phi.inner(&spec.apply_h0(&psi));
        let rhs = spec.apply_h0(&phi).inner(&psi);
        prop_assert!(rel(lhs, rhs, phi.norm() * spec.apply_h0(&psi).norm()) < 1e-10);
    }

    #[test]
    fn magnetic_identity_2d(f in bumps(0.7..0.85, 1.5), wz in -1.9..1.9f64) {
        let gr = grid(2, 8.0, 64);
        let spec = rotating(&gr, [0.0, 0.0, wz], 0.0);
        let psi = f.field(&gr);
        let t = spec.h0_terms(&psi);
        let mut lhs = t.kinetic;
        lhs.axpy_real(1.0, &t.rotational);
        let rhs = magnetic_form([0.0, 0.0, wz], &psi);
        let (d, s) = interior_max_diff(&lhs, &rhs, 0.75);
        prop_assert!(d <= 1e-8 * s.max(1.0), "diff {d:e} scale {s:e}");
    }

    #[test]
    fn quarter_turn_leaves_h0_expectation(f in bumps(0.6..1.0, 1.5), wz in -1.8..1.8f64) {
        let gr = grid(2, 8.0, 48);
        let spec = rotating(&gr, [0.0, 0.0, wz], 0.0);
        let phi = f.field(&gr);
        let turned = phi.rotate_quarter().unwrap();
        let a = phi.inner(&spec.apply_h0(&phi)).re;
        let b = turned.inner(&spec.apply_h0(&turned)).re;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} {b}");
    }

    #[test]
    fn gp_energy_gauge_and_rotation(f in bumps(0.6..1.0, 1.5), alpha in 0.0..6.3f64, wz in 0.0..1.8f64, g in 0.0..30.0f64) {
        let gr = grid(2, 8.0, 48);
        let spec = rotating(&gr, [0.0, 0.0, wz], g);
        let phi = f.field(&gr).normalized();
        let e = gp_functional(&spec, &phi).total;
        let mut gauged = phi.clone();
        gauged.scale(C64::from_polar(1.0, alpha));
        let eg = gp_functional(&spec, &gauged).total;
        let er = gp_functional(&spec, &phi.rotate_quarter().unwrap()).total;
        prop_assert!((e - eg).abs() <= 1e-12 * e.abs().max(1.0));
        prop_assert!((e - er).abs() <= 1e-10 * e.abs().max(1.0), "{e} {er}");
    }

    #[test]
    fn gradient_matches_finite_difference(f in bumps(0.8..1.4, 2.0), h in bumps(0.8..1.4, 2.0), wz in 0.0..1.8f64, g in 0.0..20.0f64) {
        let gr = grid(2, 6.0, 32);
        let spec = rotating(&gr, [0.0, 0.0, wz], g);
        let phi = f.field(&gr);
        let psi = h.field(&gr);
        // the energy is quartic along the line, where this stencil is exact
        let t = 1e-2;
        let energy = |s: f64| {
            let mut p = phi.clone();
            p.axpy_real(s, &psi);
            gp_functional(&spec, &p).total
        };
        let fd = (8.0 * (energy(t) - energy(-t)) - (energy(2.0 * t) - energy(-2.0 * t))) / (12.0 * t);
        let exact = 2.0 * psi.inner(&gp_gradient(&spec, &phi)).re;
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "fd {fd} exact {exact}");
    }

    #[test]
    fn parseval(f in bumps(0.5..1.5, 3.0)) {
        for gr in [grid(2, 5.0, 32), grid(3, 5.0, 16)] {
            let phi = f.field(&gr);
            let a = phi.norm_sq();
            prop_assert!((a - phi.spectral_norm_sq()).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn laplacian_is_symmetric(f in bumps(0.6..1.5, 2.0), h in bumps(0.6..1.5, 2.0)) {
        let gr = grid(2, 6.0, 32);
        let (phi, psi) = (f.field(&gr), h.field(&gr));
        let lhs = phi.inner(&laplacian_spectral(&psi));
        let rhs = laplacian_spectral(&phi).inner(&psi);
        prop_assert!(rel(lhs, rhs, phi.norm() * laplacian_spectral(&psi).norm()) < 1e-10);
    }

    #[test]
    fn derivatives_commute_and_are_linear(f in bumps(0.6..1.5, 2.0), h in bumps(0.6..1.5, 2.0), a in -2.0..2.0f64) {
        let gr = grid(3, 6.0, 16);
        let (phi, psi) = (f.field(&gr), h.field(&gr));
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let pq = gradient_spectral(&gradient_spectral(&phi, p), q);
            let qp = gradient_spectral(&gradient_spectral(&phi, q), p);
            prop_assert!(pq.max_abs_diff(&qp) <= 1e-10 * pq.values().iter().map(|v| v.norm()).fold(1.0, f64::max));
        }
        let mut comb = phi.clone();
        comb.axpy_real(a, &psi);
        let mut sep = gradient_spectral(&phi, 0);
        sep.axpy_real(a, &gradient_spectral(&psi, 0));
        prop_assert!(gradient_spectral(&comb, 0).max_abs_diff(&sep) <= 1e-10 * sep.norm().max(1.0));
    }
}

#[test]
fn magnetic_identity_tilted_3d() {
    let gr = grid(3, 8.0, 48);
    let omega = [0.3, -0.5, 1.1];
    let spec = rotating(&gr, omega, 0.0);
    let f = Bumps(vec![
        ([0.4, -0.3, 0.2], 0.8, C64::new(1.0, 0.3), [0.2, -0.1, 0.4]),
        ([-0.6, 0.5, -0.4], 0.75, C64::new(-0.4, 0.7), [0.0, 0.3, -0.2]),
    ]);
    let psi = f.field(&gr);
    let t = spec.h0_terms(&psi);
    let mut lhs = t.kinetic;
    lhs.axpy_real(1.0, &t.rotational);
    let rhs = magnetic_form(omega, &psi);
    let (d, s) = interior_max_diff(&lhs, &rhs, 0.75);
    assert!(d <= 1e-8 * s.max(1.0), "diff {d:e} scale {s:e}");
}
