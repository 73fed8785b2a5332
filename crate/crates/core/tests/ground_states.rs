use rotbec::gp::{minimize_gp, minimize_gp_from, noise_seed, restart_seed, GpOptions};
use rotbec::{Grid64, ModelSpec64, RotationSpec, Trap64};

fn spec(trap: Trap64, omega_z: f64, g: f64, half: f64, n: usize) -> ModelSpec64 {
    let grid = Grid64::cubic(2, half, n).unwrap().shared();
    ModelSpec64::new(grid, trap, RotationSpec::about_z(omega_z), g).unwrap()
}

#[test]
fn nonrotating_minimizer_has_constant_phase() {
    let s = spec(Trap64::harmonic_isotropic(2, 1.0), 0.0, 10.0, 6.0, 32);
    let r = minimize_gp(&s, &GpOptions { restarts: 2, ..Default::default() }).unwrap();
    let vals = r.phi.values();
    let peak = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let anchor = vals.iter().find(|v| v.norm() == peak).unwrap();
    let gauge = anchor.conj() / peak;
    for v in vals {
        if v.norm_sqr() > 1e-8 {
            let w = v * gauge;
            assert!((w - w.norm()).norm() < 1e-6, "phase deviates at {v}");
        }
    }
    assert!(r.mu >= r.energy);
}

#[test]
fn ground_eigenvalue_is_the_variational_minimum() {
    let trap = Trap64::Quartic { nu: vec![1.0, 1.0], lambda: 0.05 };
    let s = spec(trap, 1.2, 0.0, 6.0, 32);
    let e0 = s.lowest_eigenpairs(1).unwrap()[0].0;
    let opts = GpOptions { restarts: 0, windings: vec![], ..Default::default() };
    let best = (0..20)
        .map(|k| {
            let init = noise_seed(s.grid(), restart_seed(42, k));
            minimize_gp_from(&s, init, &opts).unwrap().energy
        })
        .fold(f64::INFINITY, f64::min);
    assert!((best - e0).abs() < 1e-6, "{best} vs {e0}");
}

#[test]
fn rotating_linear_spectrum() {
    let s = spec(Trap64::harmonic_isotropic(2, 1.0), 1.0, 0.0, 8.0, 64);
    let e: Vec<f64> = s.lowest_eigenpairs(4).unwrap().iter().map(|p| p.0).collect();
    // 2(2n_r + |m| + 1) − Ωm, sorted
    let mut oracle = Vec::new();
    for nr in 0..4 {
        for m in -6i32..=6 {
            oracle.push(2.0 * (2 * nr + m.abs() + 1) as f64 - m as f64);
        }
    }
    oracle.sort_by(f64::total_cmp);
    for (a, b) in e.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6, "{e:?} vs {:?}", &oracle[..4]);
    }
}

#[test]
fn quartic_trap_confines_any_rotation() {
    let trap = Trap64::Quartic { nu: vec![1.0, 1.0], lambda: 0.5 };
    let s = spec(trap, 3.0, 5.0, 6.0, 32);
    assert!(s.stability().is_stable());
    let r = minimize_gp(&s, &GpOptions { restarts: 1, windings: vec![0, 1], ..Default::default() }).unwrap();
    assert!(r.residual <= 1e-8);
}
