//! Subcommand bodies. Each writes its results under `outputs.directory`.

use std::path::Path;

use serde_json::{json, Map, Value};

use rotbec::diagnostics::{xy_slice, VortexReport};
use rotbec::dm::DmResult;
use rotbec::gp::{GpResult, Start};
use rotbec::manybody::{coherent_state_checks, gp_limit_scan, PairModel, PolarQuadrature};
use rotbec::scatter::{born_check, deviation_ratios, scale_potential, scattering_length, unit_gaussian, RadialPotential};
use rotbec::C64;

use crate::config::{Loaded, PairConfig, SweepParameter};
use crate::output::{num, nums, round12, write_csv, write_field, write_images, write_json, Cell};
use crate::sweep::{analyze_gp, dm_chain, evaluate_all, GpAnalysis, PointOutcome};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GpMin,
    DmMin,
    Sweep,
    Fock,
    Coherent,
    Scatter,
}

pub struct Context {
    pub run: Loaded,
    pub workers: usize,
    pub verbose: bool,
}

impl Context {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn run(cmd: Command, ctx: &Context) -> Result<(), CliError> {
    let dir = ctx.run.output_dir();
    std::fs::create_dir_all(&dir)?;
    match cmd {
        Command::GpMin => gp_min(ctx, &dir),
        Command::DmMin => dm_min(ctx, &dir),
        Command::Sweep => sweep(ctx, &dir),
        Command::Fock => fock(ctx, &dir),
        Command::Coherent => coherent(ctx, &dir),
        Command::Scatter => scatter(ctx, &dir),
    }
}

fn start_label(s: Start) -> String {
    match s {
        Start::Winding(q) => format!("winding:{q}"),
        Start::Noise(k) => format!("noise:{k}"),
        Start::Given => "given".into(),
    }
}

fn gp_json(r: &GpResult<f64>) -> Map<String, Value> {
    let b = &r.breakdown;
    let mut m = Map::new();
    m.insert("energy".into(), num(r.energy));
    m.insert("mu".into(), num(r.mu));
    m.insert(
        "breakdown".into(),
        json!({
            "kinetic": num(b.kinetic),
            "potential": num(b.potential),
            "rotational": num(b.rotational),
            "interaction": num(b.interaction),
            "total": num(b.total),
        }),
    );
    m.insert("residual".into(), num(r.residual));
    m.insert("iterations".into(), Value::from(r.iterations));
    m.insert("restarts_used".into(), Value::from(r.restarts_used));
    m.insert("start".into(), Value::String(start_label(r.start)));
    m
}

fn vortex_json(v: &VortexReport<f64>) -> Value {
    json!({
        "vortices": v.vortices.iter().map(|x| json!({
            "position": nums(x.position),
            "winding": x.winding,
        })).collect::<Vec<_>>(),
        "total_winding": v.total_winding,
        "lz_expectation": num(v.lz_expectation),
        "density_floor_used": num(v.density_floor_used),
    })
}

fn analysis_json(a: &GpAnalysis) -> Map<String, Value> {
    let mut m = gp_json(a.best());
    m.insert("vortex_report".into(), vortex_json(&a.vortices));
    m.insert(
        "symmetry_report".into(),
        json!({
            "azimuthal_deviation": a.symmetry.azimuthal_deviation.map_or(Value::Null, num),
            "n_distinct_minimizers": a.symmetry.n_distinct_minimizers,
            "pairwise_density_distances": nums(a.symmetry.pairwise_density_distances.iter().copied()),
        }),
    );
    m.insert(
        "runs".into(),
        Value::Array(
            a.runs
                .iter()
                .map(|r| json!({"start": start_label(r.start), "energy": num(r.energy), "residual": num(r.residual)}))
                .collect(),
        ),
    );
    m
}

fn dm_json(rank: usize, r: &DmResult<f64>) -> Value {
    json!({
        "rank": rank,
        "energy": num(r.energy),
        "weights": nums(r.state.weights().iter().copied()),
        "orbital_h0": nums(r.orbital_h0.iter().copied()),
        "residual": num(r.residual),
        "iterations": r.iterations,
    })
}

fn gp_min(ctx: &Context, dir: &Path) -> Result<(), CliError> {
    let run = &ctx.run;
    let spec = run.spec()?;
    spec.ensure_stable()?;
    ctx.note("gp-min: minimizing");
    let a = analyze_gp(&spec, &run.config.solver)?;
    write_json(run, &dir.join("gp.json"), analysis_json(&a))?;
    if run.config.outputs.emit_fields {
        write_field(run, dir, "phi", &a.best().phi)?;
    }
    if run.config.outputs.emit_images {
        write_images(run, dir, "phi", &xy_slice(&a.best().phi))?;
    }
    ctx.note(format!("gp-min: E = {}", round12(a.best().energy)));
    Ok(())
}

fn dm_min(ctx: &Context, dir: &Path) -> Result<(), CliError> {
    let run = &ctx.run;
    let spec = run.spec()?;
    spec.ensure_stable()?;
    if run.config.solver.dm_ranks.is_empty() {
        return Err(CliError::Config("solver.dm_ranks is empty".into()));
    }
    ctx.note("dm-min: GP warm start");
    let a = analyze_gp(&spec, &run.config.solver)?;
    let chain = dm_chain(&spec, a.best(), &run.config.solver)?;
    let mut m = Map::new();
    let (rank, best) = chain
        .iter()
        .min_by(|x, y| x.1.energy.total_cmp(&y.1.energy))
        .expect("nonempty rank list");
    m.insert("energy".into(), num(best.energy));
    m.insert("rank".into(), Value::from(*rank));
    m.insert("weights".into(), nums(best.state.weights().iter().copied()));
    m.insert("orbital_h0".into(), nums(best.orbital_h0.iter().copied()));
    m.insert("e_gp".into(), num(a.best().energy));
    m.insert("gap".into(), num(best.energy - a.best().energy));
    m.insert("ranks".into(), Value::Array(chain.iter().map(|(r, d)| dm_json(*r, d)).collect()));
    write_json(run, &dir.join("dm.json"), m)?;
    if run.config.outputs.emit_fields {
        for (i, o) in best.state.orbitals().iter().enumerate() {
            write_field(run, dir, &format!("orbital_{i}"), o)?;
        }
    }
    Ok(())
}

const SIGNIFICANT_WEIGHT: f64 = 1e-3;

fn sweep(ctx: &Context, dir: &Path) -> Result<(), CliError> {
    let run = &ctx.run;
    let Some(sw) = &run.config.sweep else {
        return Err(CliError::Config("sweep section missing".into()));
    };
    if sw.values.is_empty() {
        return Err(CliError::Config("sweep.values is empty".into()));
    }
    let mut specs = Vec::with_capacity(sw.values.len());
    for &v in &sw.values {
        let spec = match sw.parameter {
            SweepParameter::G => run.spec_with(Some(v), None)?,
            SweepParameter::OmegaZ => run.spec_with(None, Some(v))?,
        };
        specs.push(spec);
    }
    // refuse the whole sweep before running anything
    for s in &specs {
        s.ensure_stable()?;
    }
    ctx.note(format!("sweep: {} points on {} workers", specs.len(), ctx.workers));
    let points = evaluate_all(&specs, &run.config.solver, ctx.workers)?;
    let mut ranks = run.config.solver.dm_ranks.clone();
    ranks.sort_unstable();
    ranks.dedup();

    let mut columns: Vec<String> = [
        "g",
        "omega_z",
        "e_gp",
        "mu",
        "residual",
        "vortex_count",
        "positive_vortices",
        "total_winding",
        "lz",
        "s_metric",
        "n_minimizers",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for r in &ranks {
        columns.push(format!("e_dm_{r}"));
        columns.push(format!("weights_above_1e-3_rank_{r}"));
    }
    columns.push("dm_gap".into());
    let rows: Vec<Vec<Cell>> = points.iter().map(|p| sweep_row(p, &ranks)).collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    write_csv(run, &dir.join("sweep.csv"), &cols, &rows)?;

    let mut m = Map::new();
    m.insert(
        "parameter".into(),
        Value::String(match sw.parameter {
            SweepParameter::G => "g".into(),
            SweepParameter::OmegaZ => "omega_z".into(),
        }),
    );
    m.insert(
        "points".into(),
        Value::Array(
            points
                .iter()
                .map(|p| {
                    let mut o = analysis_json(&p.gp);
                    o.insert("g".into(), num(p.g));
                    o.insert("omega_z".into(), num(p.omega_z));
                    o.insert("dm".into(), Value::Array(p.dm.iter().map(|(r, d)| dm_json(*r, d)).collect()));
                    Value::Object(o)
                })
                .collect(),
        ),
    );
    write_json(run, &dir.join("sweep.json"), m)?;
    Ok(())
}

fn sweep_row(p: &PointOutcome, ranks: &[usize]) -> Vec<Cell> {
    let best = p.gp.best();
    let v = &p.gp.vortices;
    let mut row = vec![
        Cell::Num(p.g),
        Cell::Num(p.omega_z),
        Cell::Num(best.energy),
        Cell::Num(best.mu),
        Cell::Num(best.residual),
        Cell::Int(v.vortices.len() as i64),
        Cell::Int(v.count_with_winding(1) as i64),
        Cell::Int(v.total_winding as i64),
        Cell::Num(v.lz_expectation),
        p.gp.symmetry.azimuthal_deviation.map_or(Cell::Empty, Cell::Num),
        Cell::Int(p.gp.symmetry.n_distinct_minimizers as i64),
    ];
    for r in ranks {
        match p.dm_at(*r) {
            Some(d) => {
                row.push(Cell::Num(d.energy));
                let k = d.state.weights().iter().filter(|&&w| w > SIGNIFICANT_WEIGHT).count();
                row.push(Cell::Int(k as i64));
            }
            None => {
                row.push(Cell::Empty);
                row.push(Cell::Empty);
            }
        }
    }
    row.push(p.e_dm().map_or(Cell::Empty, |e| Cell::Num(e - p.e_gp())));
    row
}

fn fock(ctx: &Context, dir: &Path) -> Result<(), CliError> {
    let run = &ctx.run;
    let Some(fc) = &run.config.fock else {
        return Err(CliError::Config("fock section missing".into()));
    };
    let spec = run.spec()?;
    spec.ensure_stable()?;
    let g = fc.g.unwrap_or(run.config.model.g);
    let pair = match fc.pair {
        PairConfig::Delta => PairModel::Delta,
        PairConfig::Gaussian { width } => PairModel::Scaled(unit_gaussian(width)?),
    };
    ctx.note("fock: scanning particle numbers");
    let rows = gp_limit_scan(&spec, fc.modes, g, &fc.particles, &pair, fc.absolute).map_err(CliError::from_model)?;
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Int(r.n as i64),
                Cell::Num(r.a),
                Cell::Num(r.e0_over_n),
                Cell::Num(r.e_gp_truncated),
                Cell::Num(r.condensate_fraction),
                r.e_abs.map_or(Cell::Empty, Cell::Num),
            ]
        })
        .collect();
    write_csv(
        run,
        &dir.join("fock.csv"),
        &["N", "a", "E0_over_N", "E_gp_truncated", "condensate_fraction", "E_abs"],
        &cells,
    )
}

fn coherent(ctx: &Context, dir: &Path) -> Result<(), CliError> {
    let run = &ctx.run;
    let cc = run.config.coherent.clone().unwrap_or_default();
    let z = C64::new(cc.z[0], cc.z[1]);
    let quad = PolarQuadrature {
        radial: cc.radial,
        angular: cc.angular,
    };
    let r = coherent_state_checks(cc.truncation, z, cc.radius, cc.n_max, quad).map_err(CliError::from_model)?;
    let mut m = Map::new();
    m.insert("z".into(), nums([z.re, z.im]));
    m.insert("annihilation_mean".into(), nums([r.annihilation_mean.re, r.annihilation_mean.im]));
    m.insert("number_mean".into(), num(r.number_mean));
    m.insert("completeness_error".into(), num(r.completeness_error));
    m.insert("completeness_error_refined".into(), num(r.completeness_error_refined));
    m.insert("upper_symbol_error".into(), num(r.upper_symbol_error));
    m.insert("shifted_symbol_error".into(), num(r.shifted_symbol_error));
    write_json(run, &dir.join("coherent.json"), m)
}

fn scatter(ctx: &Context, dir: &Path) -> Result<(), CliError> {
    let run = &ctx.run;
    let Some(sc) = &run.config.scatter else {
        return Err(CliError::Config("scatter section missing".into()));
    };
    let mut rows = Vec::new();
    for p in &sc.potentials {
        let w = p.build();
        w.validate().map_err(CliError::from_model)?;
        let a = scattering_length(&w)?;
        rows.push(vec![Cell::Text(p.label().into()), Cell::Num(1.0), Cell::Num(a), Cell::Num(a)]);
        for &s in &sc.scales {
            let v: RadialPotential<f64> = scale_potential(&w, s).map_err(CliError::from_model)?;
            let sa = scattering_length(&v)?;
            rows.push(vec![Cell::Text(p.label().into()), Cell::Num(s), Cell::Num(sa), Cell::Num(s * a)]);
        }
    }
    write_csv(
        run,
        &dir.join("scatter.csv"),
        &["potential", "scale", "scattering_length", "scaled_expectation"],
        &rows,
    )?;
    if let Some(b) = &sc.born {
        let u = RadialPotential::soft_shell(b.inner, b.outer);
        let table = born_check(&u, &b.a).map_err(CliError::from_model)?;
        let cells: Vec<Vec<Cell>> = table
            .iter()
            .map(|r| vec![Cell::Num(r.a), Cell::Num(r.s), Cell::Num(r.rel_deviation)])
            .collect();
        write_csv(run, &dir.join("born.csv"), &["a", "s_of_a", "rel_deviation"], &cells)?;
        let ratios = deviation_ratios(&table);
        ctx.note(format!("born: deviation ratios {ratios:?}"));
    }
    Ok(())
}
