//! Subcommands: `relax`, `transport1d`, `chu-compare`, `validate-closure`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use polykin::chu::{full_vs_reduced_check, Boundary, SpatialField1D, TransportOptions};
use polykin::closure::{
    delta_admissible_interval, energy_constraint_residual, exchange_fluxes, gamma_bound, InterspeciesState,
    MacroMoments, RelaxedState,
};
use polykin::dynamics::{
    all_passed, build_grids, validate_htheorem_preconditions, Integrator, Model, SystemState,
};
use polykin::grid::{moments_from_reduced, theta_from_lambda};
use polykin::rng::Lcg64;

use crate::config::RunConfig;
use crate::output::{write_summary, CsvRow, MomentsWriter, PreconditionFlag, SpeciesRow, Summary};

/// Relative tolerance on an entropy increase.
pub const DH_TOL: f64 = 1e-10;
/// Per-species mass must be conserved to this relative tolerance.
pub const MASS_TOL: f64 = 1e-12;
pub const CHU_TOL: f64 = 1e-8;
pub const CLOSURE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub second_order: bool,
    /// Abort on the first entropy increase when the preconditions hold.
    pub strict_h: bool,
}

fn base_summary(command: &str, cfg: &RunConfig) -> Summary {
    let sp = cfg.species_params();
    let c = cfg.coupling_params();
    let d = cfg.grid.d;
    Summary {
        command: command.into(),
        scenario: cfg.scenario.clone(),
        gamma: c.gamma,
        gamma_bound: gamma_bound(sp[0].mass, sp[1].mass, c.epsilon, c.delta, d).value,
        gamma_bound_d3_only: d != 3,
        ..Default::default()
    }
}

fn finish(out: &Path, mut s: Summary, start: Instant) -> anyhow::Result<Summary> {
    s.wall_time_s = start.elapsed().as_secs_f64();
    s.ok = s.tripped.is_empty();
    write_summary(&out.join("summary.json"), &s)?;
    Ok(s)
}

fn species_rows(c: &polykin::dynamics::ClosureState) -> [SpeciesRow; 2] {
    [
        SpeciesRow::new(&c.moments[0], c.temps[0].lambda, c.temps[0].theta),
        SpeciesRow::new(&c.moments[1], c.temps[1].lambda, c.temps[1].theta),
    ]
}

/// Space-homogeneous relaxation.
pub fn relax(cfg: &RunConfig, opts: &RunOptions) -> anyhow::Result<Summary> {
    let start = Instant::now();
    fs::create_dir_all(&opts.out)?;
    let model = cfg.model()?;
    let init = cfg.initial_states();
    let grids = build_grids(&model, &init, cfg.grid_spec())?;
    let state = SystemState::from_initial(&model, &grids, &init)?;
    let mut it = Integrator::new(model.clone(), state)?;
    it.cfl = cfg.time.cfl_relax;
    let mut s = base_summary("relax", cfg);

    let c0 = it.closure()?;
    let flags = validate_htheorem_preconditions(&c0.moments, &model.species, &model.coupling);
    let h_checked = all_passed(&flags);
    s.preconditions = flags.iter().map(PreconditionFlag::from).collect();
    for f in flags.iter().filter(|f| !f.passed) {
        warn!("entropy precondition {} fails: {}", f.name, f.detail);
    }

    let mut csv = MomentsWriter::create(&opts.out.join("moments.csv"), model.dim())?;
    csv.write(&CsvRow {
        t: 0.0,
        species: species_rows(&c0),
        h: it.entropy,
        dh: 0.0,
        mass_residual: [0.0; 2],
        momentum_residual: 0.0,
        energy_residual: 0.0,
        clipped_mass: [0.0; 2],
    })?;

    let dt = cfg.time.dt.unwrap_or_else(|| it.stable_dt());
    let t_end = cfg.time.t_end;
    let mut max_dh = f64::NEG_INFINITY;
    let mut above = 0;
    while it.state.t < t_end * (1.0 - 1e-14) {
        let h = dt.min(t_end - it.state.t);
        let rep = match it.step(h) {
            Ok(r) => r,
            Err(e) => {
                s.tripped.push(format!("integration failed at t = {}: {e}", it.state.t));
                break;
            }
        };
        let rel = rep.delta_entropy / rep.entropy.abs();
        max_dh = max_dh.max(rel);
        if rel > DH_TOL {
            above += 1;
            if h_checked {
                warn!("entropy increased by {rel:e} at t = {}", rep.t);
                if opts.strict_h {
                    s.tripped.push(format!("entropy increased by {rel:e} at t = {}", rep.t));
                    break;
                }
            }
        }
        for k in 0..2 {
            s.max_mass_drift[k] = s.max_mass_drift[k].max(rep.mass_residual[k]);
            s.clipped_mass[k] += rep.clipped_mass[k];
        }
        s.max_momentum_drift = s.max_momentum_drift.max(rep.momentum_residual);
        s.max_energy_drift = s.max_energy_drift.max(rep.energy_residual);
        if it.steps % cfg.time.stride == 0 || it.state.t >= t_end * (1.0 - 1e-14) {
            let rows = [
                SpeciesRow::new(&rep.moments[0], rep.lambda[0], rep.theta[0]),
                SpeciesRow::new(&rep.moments[1], rep.lambda[1], rep.theta[1]),
            ];
            csv.write(&CsvRow {
                t: rep.t,
                species: rows,
                h: rep.entropy,
                dh: rep.delta_entropy,
                mass_residual: rep.mass_residual,
                momentum_residual: rep.momentum_residual,
                energy_residual: rep.energy_residual,
                clipped_mass: rep.clipped_mass,
            })?;
        }
    }
    if h_checked && above > 0 && !opts.strict_h {
        s.tripped.push(format!("{above} steps with entropy increase above {DH_TOL:e}"));
    }
    if s.max_mass_drift.iter().any(|&m| m > MASS_TOL) {
        s.tripped.push(format!("species mass drift {:?} above {MASS_TOL:e}", s.max_mass_drift));
    }
    s.steps = it.steps;
    s.t_final = it.state.t;
    s.max_delta_h = Some(if it.steps > 0 { max_dh } else { 0.0 });
    s.steps_delta_h_above_tol = Some(above);
    s.equilibrium_residual = model.equilibrium_residual(&it.state).ok().map(|e| e.max);
    println!(
        "relax: {} steps to t = {:.6}, equilibrium residual {:.3e}, max dH/|H| {:.3e}",
        s.steps,
        s.t_final,
        s.equilibrium_residual.unwrap_or(f64::NAN),
        s.max_delta_h.unwrap_or(0.0)
    );
    finish(&opts.out, s, start)
}

/// Domain-averaged moments of a 1D field.
fn averaged_rows(model: &Model, f: &SpatialField1D) -> anyhow::Result<[SpeciesRow; 2]> {
    let d = model.dim();
    let mut rows = Vec::new();
    for k in 0..2 {
        let nv = f.grids[k].v.len();
        let mut g = vec![0.0; nv];
        let mut h = vec![0.0; nv];
        for iv in 0..nv {
            let sl = iv * f.n_x..(iv + 1) * f.n_x;
            g[iv] = f.g[k][sl.clone()].iter().sum::<f64>() / f.n_x as f64;
            h[iv] = f.h[k][sl].iter().sum::<f64>() / f.n_x as f64;
        }
        let sp = &model.species[k];
        let m = moments_from_reduced(&f.grids[k].v, &g, &h, sp.mass, sp.dof_internal)?;
        let lam = f.lambda_ten[k].iter().map(|x| x.trace()).sum::<f64>() / (d * f.n_x) as f64;
        let theta = theta_from_lambda(m.t_tr, m.t_rot, lam, d, sp.dof_internal).unwrap_or(f64::NAN);
        rows.push(SpeciesRow::new(&m, lam, theta));
    }
    let r1 = rows.pop().expect("two species");
    let r0 = rows.pop().expect("two species");
    Ok([r0, r1])
}

fn write_profile(path: &Path, model: &Model, f: &SpatialField1D) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "n1", "u1", "Tt1", "Tr1", "n2", "u2", "Tt2", "Tr2"])?;
    for ix in 0..f.n_x {
        let m = f.cell_moments(model, ix)?;
        let x = (ix as f64 + 0.5) * f.dx;
        let mut rec = vec![x.to_string()];
        for mk in &m {
            rec.extend([mk.n, mk.u[0], mk.t_tr, mk.t_rot].map(|v| v.to_string()));
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// 1D Riemann problem on the unit interval with the reduced system.
pub fn transport1d(cfg: &RunConfig, opts: &RunOptions) -> anyhow::Result<Summary> {
    let start = Instant::now();
    fs::create_dir_all(&opts.out)?;
    let model = cfg.model()?;
    let left = cfg.initial_states();
    let right = cfg.right_states();
    let all: Vec<_> = left.iter().chain(right.iter()).cloned().collect();
    let grids = build_grids(&model, &all, cfg.grid_spec())?;
    let mut field = SpatialField1D::riemann(&model, grids, cfg.grid.n_x, &left, &right, cfg.grid.boundary)?;
    let mut s = base_summary("transport1d", cfg);
    let t_opts = TransportOptions {
        second_order: opts.second_order,
        cfl_adv: cfg.time.cfl_adv,
        cfl_relax: cfg.time.cfl_relax,
        collisionless: false,
    };
    let first = field.totals(&model);
    let scale_p: f64 = (0..2)
        .map(|k| first.mass[k] * model.species[k].mass * (left[k].t_tr / model.species[k].mass).sqrt())
        .sum();
    let mut csv = MomentsWriter::create(&opts.out.join("moments.csv"), model.dim())?;
    let mut last_h = first.g_entropy;
    csv.write(&CsvRow {
        t: 0.0,
        species: averaged_rows(&model, &field)?,
        h: last_h,
        dh: 0.0,
        mass_residual: [0.0; 2],
        momentum_residual: 0.0,
        energy_residual: 0.0,
        clipped_mass: [0.0; 2],
    })?;
    let dt = cfg.time.dt.unwrap_or_else(|| field.advection_dt(cfg.time.cfl_adv));
    let t_end = cfg.time.t_end;
    let mut evaluations = 0;
    let mut mismatches = 0;
    let mut steps = 0;
    while field.t < t_end * (1.0 - 1e-14) {
        let h = dt.min(t_end - field.t);
        let rep = match field.step_transport(&model, h, t_opts) {
            Ok(r) => r,
            Err(e) => {
                s.tripped.push(format!("transport failed at t = {}: {e}", field.t));
                break;
            }
        };
        steps += 1;
        evaluations += rep.stats.closure_evaluations;
        mismatches += rep.stats.theta21_mismatches;
        let tot = field.totals(&model);
        let mass_res = [0, 1].map(|k| (tot.mass[k] - first.mass[k]).abs() / first.mass[k]);
        let mom_res = (tot.momentum_x - first.momentum_x).abs() / scale_p;
        let en_res = (tot.energy - first.energy).abs() / first.energy;
        for k in 0..2 {
            s.max_mass_drift[k] = s.max_mass_drift[k].max(mass_res[k]);
            s.clipped_mass[k] += rep.stats.clipped_mass[k];
        }
        s.max_momentum_drift = s.max_momentum_drift.max(mom_res);
        s.max_energy_drift = s.max_energy_drift.max(en_res);
        if steps % cfg.time.stride == 0 || field.t >= t_end * (1.0 - 1e-14) {
            csv.write(&CsvRow {
                t: field.t,
                species: averaged_rows(&model, &field)?,
                h: tot.g_entropy,
                dh: tot.g_entropy - last_h,
                mass_residual: mass_res,
                momentum_residual: mom_res,
                energy_residual: en_res,
                clipped_mass: rep.stats.clipped_mass,
            })?;
        }
        last_h = tot.g_entropy;
    }
    write_profile(&opts.out.join("profile.csv"), &model, &field)?;
    if mismatches > 0 {
        s.tripped.push(format!("{mismatches} closure evaluations with Theta21 != Theta2"));
    }
    // Outflow boundaries let mass leave the domain.
    let closed = cfg.grid.boundary == Boundary::Periodic;
    if closed && s.max_mass_drift.iter().any(|&m| m > MASS_TOL) {
        s.tripped.push(format!("species mass drift {:?} above {MASS_TOL:e}", s.max_mass_drift));
    }
    s.steps = steps;
    s.t_final = field.t;
    s.closure_evaluations = Some(evaluations);
    s.theta21_mismatches = Some(mismatches);
    println!(
        "transport1d: {steps} steps to t = {:.6}, {evaluations} closure evaluations, mass drift {:.3e}/{:.3e}",
        field.t, s.max_mass_drift[0], s.max_mass_drift[1]
    );
    finish(&opts.out, s, start)
}

/// Full `(v, η)` against reduced `(g, h)` integration of the homogeneous problem.
pub fn chu_compare(cfg: &RunConfig, opts: &RunOptions) -> anyhow::Result<Summary> {
    let start = Instant::now();
    fs::create_dir_all(&opts.out)?;
    let model = cfg.model()?;
    let init = cfg.initial_states();
    let grids = build_grids(&model, &init, cfg.grid_spec())?;
    let state = SystemState::from_initial(&model, &grids, &init)?;
    let n = [state.f[0].mass(), state.f[1].mass()];
    let dt = cfg.time.dt.unwrap_or_else(|| model.stable_dt(n, cfg.time.cfl_relax));
    let mut s = base_summary("chu-compare", cfg);
    match full_vs_reduced_check(&model, &state, cfg.time.t_end, dt) {
        Ok(c) => {
            println!(
                "chu-compare: max moment discrepancy {:.3e} (n {:.1e}, u {:.1e}, Tt {:.1e}, Tr {:.1e}) over {} steps",
                c.max, c.density, c.velocity, c.t_tr, c.t_rot, c.steps
            );
            if c.max > CHU_TOL {
                s.tripped.push(format!("discrepancy {:e} above {CHU_TOL:e}", c.max));
            }
            s.chu_discrepancy = Some(c.max);
            s.steps = c.steps;
            s.t_final = cfg.time.t_end;
        }
        Err(e) => s.tripped.push(format!("integration failed: {e}")),
    }
    finish(&opts.out, s, start)
}

/// Random admissible states for the closure sweep.
fn sample_states(rng: &mut Lcg64, cfg: &RunConfig) -> Option<[RelaxedState; 2]> {
    let d = cfg.grid.d;
    let mut one = |l: usize| {
        let n = rng.range(0.1, 5.0);
        let u: Vec<f64> = (0..d).map(|_| rng.range(-2.0, 2.0)).collect();
        let t_tr = rng.range(0.1, 5.0);
        let t_rot = if l > 0 { rng.range(0.1, 5.0) } else { 0.0 };
        let lambda = t_tr * rng.range(0.5, 1.5);
        RelaxedState::from_lambda(MacroMoments::isotropic(n, u, t_tr, t_rot, l), lambda, l).ok()
    };
    let a = one(cfg.species[0].l);
    let b = one(cfg.species[1].l);
    Some([a?, b?])
}

/// Reports admissibility, the positivity bound, a residual sweep and the
/// entropy-theorem preconditions. Runs on configs that fail validation too.
pub fn validate_closure(cfg: &RunConfig, out: Option<&Path>) -> anyhow::Result<Summary> {
    let start = Instant::now();
    let sp = cfg.species_params();
    let c = cfg.coupling_params();
    let mut s = base_summary("validate-closure", cfg);
    let interval = delta_admissible_interval(sp[0].mass, sp[1].mass, c.epsilon);
    s.delta_interval = Some(interval);
    s.violations = c.violations(&sp).iter().map(|v| v.to_string()).collect();
    println!("delta interval: ({}, {})", interval.0, interval.1);
    println!(
        "gamma_bound = {:.12e}{} (gamma = {:.12e})",
        s.gamma_bound,
        if s.gamma_bound_d3_only { " [derived for d = 3]" } else { "" },
        c.gamma
    );
    for v in &s.violations {
        println!("violation: {v}");
    }

    let mut rng = Lcg64::new(cfg.seed);
    let mut max_energy: f64 = 0.0;
    let mut max_exchange: f64 = 0.0;
    let mut done = 0;
    if s.violations.is_empty() {
        while done < CLOSURE_SAMPLES {
            let Some(states) = sample_states(&mut rng, cfg) else {
                continue;
            };
            let inter = InterspeciesState::compute(&states, &c, &sp)?;
            max_energy = max_energy.max(energy_constraint_residual(&inter, &states, &c, &sp));
            let fl = exchange_fluxes(&states, &c, &sp)?;
            max_exchange = max_exchange.max(fl.energy_residual()).max(fl.momentum_residual());
            done += 1;
        }
        println!("max energy-constraint residual over {done} samples: {max_energy:.3e}");
        println!("max exchange residual over {done} samples: {max_exchange:.3e}");
        s.max_energy_constraint_residual = Some(max_energy);
        s.max_exchange_residual = Some(max_exchange);
        if max_energy > 1e-12 || max_exchange > 1e-12 {
            s.tripped.push("closure residual above 1e-12".into());
        }
    } else {
        s.tripped.push("closure inadmissible".into());
    }
    s.steps = done;

    let moments = [0, 1].map(|k| {
        let b = &cfg.initial[k];
        MacroMoments::isotropic(b.n, b.u.clone(), b.t_tr, b.t_rot, cfg.species[k].l)
    });
    let flags = validate_htheorem_preconditions(&moments, &sp, &c);
    for f in &flags {
        println!("precondition {:<22} {}  {}", f.name, if f.passed { "ok  " } else { "FAIL" }, f.detail);
        if !f.passed && f.name == "alpha_ne_1" {
            warn!("{}", f.detail);
            println!("warning: {}", f.detail);
        }
    }
    s.preconditions = flags.iter().map(PreconditionFlag::from).collect();
    info!("closure validation finished");
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            finish(dir, s, start)
        }
        None => {
            s.wall_time_s = start.elapsed().as_secs_f64();
            s.ok = s.tripped.is_empty();
            Ok(s)
        }
    }
}
