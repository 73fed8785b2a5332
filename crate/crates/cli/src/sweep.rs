//! Per-point analysis shared by `gp-min`, `dm-min` and `sweep`.

use rayon::prelude::*;

use rotbec::diagnostics::{
    detect_vortices, minimizer_family_analysis, xy_slice, SymmetryReport, VortexReport, DEFAULT_DISTANCE_TOL,
    DEFAULT_ENERGY_TOL,
};
use rotbec::dm::{minimize_dm_from, DmResult, DmState};
use rotbec::gp::{minimize_gp_all, GpResult};
use rotbec::{Error, ModelSpec64};

use crate::config::SolverConfig;

/// GP minimizers and their diagnostics at one model point.
#[derive(Clone, Debug)]
pub struct GpAnalysis {
    /// Converged runs, lowest energy first.
    pub runs: Vec<GpResult<f64>>,
    pub vortices: VortexReport<f64>,
    pub symmetry: SymmetryReport<f64>,
}

impl GpAnalysis {
    pub fn best(&self) -> &GpResult<f64> {
        &self.runs[0]
    }
}

pub fn analyze_gp(spec: &ModelSpec64, solver: &SolverConfig) -> Result<GpAnalysis, Error> {
    let runs = minimize_gp_all(spec, &solver.gp_options())?;
    let vortices = detect_vortices(&xy_slice(&runs[0].phi), None);
    let symmetry = minimizer_family_analysis(spec, &runs, DEFAULT_ENERGY_TOL, DEFAULT_DISTANCE_TOL);
    Ok(GpAnalysis {
        runs,
        vortices,
        symmetry,
    })
}

/// Density-matrix minima at increasing ranks, each warm-started from the
/// previous one (the first from the GP minimizer).
pub fn dm_chain(spec: &ModelSpec64, gp_best: &GpResult<f64>, solver: &SolverConfig) -> Result<Vec<(usize, DmResult<f64>)>, Error> {
    let opts = solver.dm_options();
    let mut ranks = solver.dm_ranks.clone();
    ranks.sort_unstable();
    ranks.dedup();
    let mut out: Vec<(usize, DmResult<f64>)> = Vec::with_capacity(ranks.len());
    for r in ranks {
        let init = match out.last() {
            Some((_, prev)) => prev.state.padded(r, solver.seed)?,
            None => DmState::from_pure(&gp_best.phi, r, solver.seed)?,
        };
        let res = minimize_dm_from(spec, init, &opts)?;
        out.push((r, res));
    }
    Ok(out)
}

/// Everything a sweep row reports.
#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub g: f64,
    pub omega_z: f64,
    pub gp: GpAnalysis,
    pub dm: Vec<(usize, DmResult<f64>)>,
}

impl PointOutcome {
    pub fn e_gp(&self) -> f64 {
        self.gp.best().energy
    }

    /// Lowest DM energy over the computed ranks.
    pub fn e_dm(&self) -> Option<f64> {
        self.dm.iter().map(|(_, r)| r.energy).reduce(f64::min)
    }

    pub fn dm_at(&self, rank: usize) -> Option<&DmResult<f64>> {
        self.dm.iter().find(|(r, _)| *r == rank).map(|(_, d)| d)
    }
}

pub fn evaluate_point(spec: &ModelSpec64, solver: &SolverConfig) -> Result<PointOutcome, Error> {
    let gp = analyze_gp(spec, solver)?;
    let dm = dm_chain(spec, gp.best(), solver)?;
    Ok(PointOutcome {
        g: spec.coupling(),
        omega_z: spec.rotation().omega[2],
        gp,
        dm,
    })
}

/// Evaluates every point on a pool of `workers` threads; results keep the
/// input order.
pub fn evaluate_all(specs: &[ModelSpec64], solver: &SolverConfig, workers: usize) -> Result<Vec<PointOutcome>, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    pool.install(|| specs.par_iter().map(|s| evaluate_point(s, solver)).collect())
}
