//! Reduced system in `(g, h) = (∫ f dη, ∫ |η|² f dη)` and its 1D-in-space
//! finite-volume transport.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::attractors::{AttractorSet, GaussianSpec};
use crate::closure::MacroMoments;
use crate::dynamics::{ClosureState, InitialSpecies, Model, SystemState, DEFAULT_CFL, ENTROPY_FLOOR};
use crate::error::{KineticError, Result};
use crate::grid::{lambda_from_theta, moments_from_reduced, reduce_values, velocity_factor, DiscreteDistribution, PhaseGrid};

/// Reduced distributions of one species over the velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPair {
    pub grid: Arc<PhaseGrid>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub species: usize,
}

/// Contracts the internal variable by η-quadrature. For `l = 0` this returns
/// `g = f` and `h = 0`.
pub fn reduce(f: &DiscreteDistribution) -> ReducedPair {
    let (g, h) = reduce_values(&f.grid, &f.values);
    ReducedPair {
        grid: f.grid.clone(),
        g,
        h,
        species: f.species,
    }
}

impl ReducedPair {
    pub fn moments(&self, mass: f64) -> Result<MacroMoments> {
        moments_from_reduced(&self.grid.v, &self.g, &self.h, mass, self.grid.eta.dim)
    }
}

/// Velocity Gaussian of an attractor together with the factor that turns it
/// into the matching `h`-attractor.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSpec {
    pub velocity: GaussianSpec,
    /// `l θ / m`, the exact value of `∫ |η|² (internal Gaussian) dη`.
    pub h_factor: f64,
}

impl ReducedSpec {
    pub fn new(spec: &GaussianSpec) -> Self {
        Self {
            velocity: spec.clone(),
            h_factor: spec.dof_internal as f64 * spec.internal_temp / spec.mass,
        }
    }
}

/// Reduced forms of every attractor family.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedAttractors {
    pub maxwellian: [ReducedSpec; 2],
    pub es_gaussian: [ReducedSpec; 2],
    pub cross: [ReducedSpec; 2],
    pub extended: [ReducedSpec; 2],
    pub relaxed: [ReducedSpec; 2],
}

pub fn reduced_attractors(set: &AttractorSet) -> ReducedAttractors {
    let r = |s: &[GaussianSpec; 2]| [ReducedSpec::new(&s[0]), ReducedSpec::new(&s[1])];
    ReducedAttractors {
        maxwellian: r(&set.maxwellian),
        es_gaussian: r(&set.es_gaussian),
        cross: r(&set.cross),
        extended: r(&set.extended),
        relaxed: r(&set.relaxed),
    }
}

/// Reduced counterpart of [`SystemState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub pairs: [ReducedPair; 2],
    pub lambda_ten: [DMatrix<f64>; 2],
    pub t: f64,
}

impl ReducedState {
    pub fn from_full(state: &SystemState) -> Self {
        Self {
            pairs: [reduce(&state.f[0]), reduce(&state.f[1])],
            lambda_ten: state.lambda_ten.clone(),
            t: state.t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedDerivative {
    pub dg: [Vec<f64>; 2],
    pub dh: [Vec<f64>; 2],
    pub dlambda: [DMatrix<f64>; 2],
}

/// Counters gathered while stepping reduced states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducedStats {
    pub clipped_mass: [f64; 2],
    pub closure_evaluations: usize,
    /// Evaluations with a monatomic species 1 where `Theta_21 != Theta_2`.
    pub theta21_mismatches: usize,
}

impl ReducedStats {
    pub fn absorb(&mut self, o: &ReducedStats) {
        for k in 0..2 {
            self.clipped_mass[k] += o.clipped_mass[k];
        }
        self.closure_evaluations += o.closure_evaluations;
        self.theta21_mismatches += o.theta21_mismatches;
    }
}

impl Model {
    pub fn reduced_closure(&self, state: &ReducedState) -> Result<ClosureState> {
        let moments = [
            state.pairs[0].moments(self.species[0].mass)?,
            state.pairs[1].moments(self.species[1].mass)?,
        ];
        self.closure(moments, &state.lambda_ten)
    }

    /// `dg/dt`, `dh/dt` and the same tensor relaxation as the full system.
    pub fn reduced_rhs(&self, state: &ReducedState, stats: &mut ReducedStats) -> Result<(ReducedDerivative, ClosureState)> {
        let c = self.reduced_closure(state)?;
        stats.closure_evaluations += 1;
        if self.species[0].dof_internal == 0 && c.inter.theta21 != c.temps[1].theta {
            stats.theta21_mismatches += 1;
        }
        let red = reduced_attractors(&c.attractors);
        let n = [c.moments[0].n, c.moments[1].n];
        let mut dg: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut dh: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for k in 0..2 {
            let (a, b) = self.rates(k, n);
            let v = &state.pairs[k].grid.v;
            let gs = &red.es_gaussian[k];
            let ms = &red.cross[k];
            let gv = velocity_factor(&gs.velocity, v)?;
            let mv = velocity_factor(&ms.velocity, v)?;
            let (ga, mb) = (a * gs.velocity.n, b * ms.velocity.n);
            let (gh, mh) = (gs.h_factor, ms.h_factor);
            let p = &state.pairs[k];
            let total = a + b;
            dg[k] = (0..v.len())
                .map(|i| ga * gv[i] + mb * mv[i] - total * p.g[i])
                .collect();
            dh[k] = (0..v.len())
                .map(|i| ga * gv[i] * gh + mb * mv[i] * mh - total * p.h[i])
                .collect();
        }
        let dlambda = [self.lambda_ten_rhs(0, &c), self.lambda_ten_rhs(1, &c)];
        Ok((ReducedDerivative { dg, dh, dlambda }, c))
    }

    /// Heun step of the reduced system, mirroring [`Model::step_rk2`].
    pub fn reduced_step_rk2(&self, state: &ReducedState, dt: f64, stats: &mut ReducedStats) -> Result<ReducedState> {
        let n = [
            state.pairs[0].grid.v.weight * state.pairs[0].g.iter().sum::<f64>(),
            state.pairs[1].grid.v.weight * state.pairs[1].g.iter().sum::<f64>(),
        ];
        let limit = 1.0 / self.max_rate(n);
        if dt > limit * (1.0 + 1e-12) {
            return Err(KineticError::Cfl { dt, limit });
        }
        let (k1, _) = self.reduced_rhs(state, stats)?;
        let mut mid = state.clone();
        mid.t += dt;
        for k in 0..2 {
            axpy(&mut mid.pairs[k].g, dt, &k1.dg[k]);
            axpy(&mut mid.pairs[k].h, dt, &k1.dh[k]);
            mid.lambda_ten[k] += &k1.dlambda[k] * dt;
        }
        let (k2, _) = self.reduced_rhs(&mid, stats)?;
        let mut next = state.clone();
        next.t += dt;
        for k in 0..2 {
            let p = &mut next.pairs[k];
            for i in 0..p.g.len() {
                p.g[i] += 0.5 * dt * (k1.dg[k][i] + k2.dg[k][i]);
                p.h[i] += 0.5 * dt * (k1.dh[k][i] + k2.dh[k][i]);
            }
            next.lambda_ten[k] += (&k1.dlambda[k] + &k2.dlambda[k]) * (0.5 * dt);
            let w = p.grid.v.weight;
            stats.clipped_mass[k] += w * clip(&mut p.g, state.t, k)?;
            clip(&mut p.h, state.t, k)?;
            if self.species[k].dof_internal == 0 {
                next.lambda_ten[k] = p.moments(self.species[k].mass)?.p_over_n();
            }
        }
        Ok(next)
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Zeroes negative entries and returns the removed mass (unweighted).
fn clip(values: &mut [f64], t: f64, k: usize) -> Result<f64> {
    let mut neg = 0.0;
    for x in values.iter_mut() {
        if !x.is_finite() {
            return Err(KineticError::Integration {
                t,
                reason: format!("species{} reduced distribution is not finite", k + 1),
            });
        }
        if *x < 0.0 {
            neg -= *x;
            *x = 0.0;
        }
    }
    Ok(neg)
}

/// Largest discrepancies between the full and reduced integrations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChuComparison {
    pub density: f64,
    pub velocity: f64,
    pub t_tr: f64,
    pub t_rot: f64,
    pub max: f64,
    pub steps: usize,
}

fn moment_discrepancy(a: &MacroMoments, b: &MacroMoments, mass: f64, l: usize, out: &mut ChuComparison) {
    out.density = out.density.max((a.n - b.n).abs() / a.n);
    let speed = (a.t_tr / mass).sqrt();
    let du = a
        .u
        .iter()
        .zip(&b.u)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    out.velocity = out.velocity.max(du / speed);
    out.t_tr = out.t_tr.max((a.t_tr - b.t_tr).abs() / a.t_tr);
    if l > 0 {
        out.t_rot = out.t_rot.max((a.t_rot - b.t_rot).abs() / a.t_rot);
    }
    out.max = out.density.max(out.velocity).max(out.t_tr).max(out.t_rot);
}

/// Integrates the full `(v, η)` system and the reduced `(g, h)` system from the
/// same initial state with the same step, and reports the largest relative
/// discrepancy in `(n, u, T^t, T^r)` observed at any step.
pub fn full_vs_reduced_check(model: &Model, initial: &SystemState, t_end: f64, dt: f64) -> Result<ChuComparison> {
    let mut full = initial.clone();
    let mut red = ReducedState::from_full(initial);
    let mut out = ChuComparison::default();
    let mut stats = ReducedStats::default();
    while full.t < t_end * (1.0 - 1e-14) {
        let h = dt.min(t_end - full.t);
        full = model.step_rk2(&full, h)?.0;
        red = model.reduced_step_rk2(&red, h, &mut stats)?;
        for k in 0..2 {
            let sp = &model.species[k];
            let mf = crate::grid::compute_moments(&full.f[k], sp.mass)?;
            let mr = red.pairs[k].moments(sp.mass)?;
            moment_discrepancy(&mf, &mr, sp.mass, sp.dof_internal, &mut out);
        }
        out.steps += 1;
    }
    Ok(out)
}

/// Boundary treatment of the 1D domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Zero-gradient ghost cells.
    Outflow,
}

/// Reduced distributions on `n_x` cells of width `dx`.
///
/// `g[k]` and `h[k]` are stored velocity-major: entry `iv * n_x + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField1D {
    pub n_x: usize,
    pub dx: f64,
    pub boundary: Boundary,
    pub grids: [Arc<PhaseGrid>; 2],
    pub g: [Vec<f64>; 2],
    pub h: [Vec<f64>; 2],
    pub lambda_ten: [Vec<DMatrix<f64>>; 2],
    pub t: f64,
}

/// Options of the transport step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    pub second_order: bool,
    pub cfl_adv: f64,
    pub cfl_relax: f64,
    /// Skip the relaxation sub-step (free streaming).
    pub collisionless: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            second_order: false,
            cfl_adv: 0.5,
            cfl_relax: DEFAULT_CFL,
            collisionless: false,
        }
    }
}

/// Reduced initial data `(g, h, Lambda^ten)` of one species on a velocity grid.
pub fn reduced_initial(model: &Model, k: usize, grid: &PhaseGrid, init: &InitialSpecies) -> Result<(Vec<f64>, Vec<f64>, DMatrix<f64>)> {
    let sp = &model.species[k];
    let d = model.dim();
    let temp = init.temperature_tensor();
    let spec = GaussianSpec::from_temperature(init.n, init.u.clone(), &temp, init.t_rot, sp);
    let pv = velocity_factor(&spec, &grid.v)?;
    let hf = sp.dof_internal as f64 * init.t_rot / sp.mass;
    let g: Vec<f64> = pv.iter().map(|p| init.n * p).collect();
    let h: Vec<f64> = g.iter().map(|x| x * hf).collect();
    let m = moments_from_reduced(&grid.v, &g, &h, sp.mass, sp.dof_internal)?;
    let lam0 = lambda_from_theta(init.t_tr, init.t_rot, init.theta0, d, sp.dof_internal)?;
    let lt = m.p_over_n() + DMatrix::identity(d, d) * (lam0 - m.t_tr);
    Ok((g, h, lt))
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Diagnostics of one transport step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransportReport {
    pub dt: f64,
    pub relax_substeps: usize,
    pub stats: ReducedStats,
}

/// Domain totals of the field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTotals {
    pub mass: [f64; 2],
    pub momentum_x: f64,
    pub energy: f64,
    /// `Σ ∫ g ln g dv dx`, a reduced entropy proxy.
    pub g_entropy: f64,
}

impl SpatialField1D {
    /// Left state on `x < 1/2`, right state on `x >= 1/2`, over the unit interval.
    pub fn riemann(
        model: &Model,
        grids: [Arc<PhaseGrid>; 2],
        n_x: usize,
        left: &[InitialSpecies; 2],
        right: &[InitialSpecies; 2],
        boundary: Boundary,
    ) -> Result<Self> {
        if n_x < 2 {
            return Err(KineticError::Argument(format!("need at least 2 cells, got {n_x}")));
        }
        let dx = 1.0 / n_x as f64;
        let mut g: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut h: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut lt: [Vec<DMatrix<f64>>; 2] = [Vec::new(), Vec::new()];
        for k in 0..2 {
            let nv = grids[k].v.len();
            let l = reduced_initial(model, k, &grids[k], &left[k])?;
            let r = reduced_initial(model, k, &grids[k], &right[k])?;
            g[k] = vec![0.0; nv * n_x];
            h[k] = vec![0.0; nv * n_x];
            for ix in 0..n_x {
                let x = (ix as f64 + 0.5) * dx;
                let s = if x < 0.5 { &l } else { &r };
                for iv in 0..nv {
                    g[k][iv * n_x + ix] = s.0[iv];
                    h[k][iv * n_x + ix] = s.1[iv];
                }
                lt[k].push(s.2.clone());
            }
        }
        Ok(Self {
            n_x,
            dx,
            boundary,
            grids,
            g,
            h,
            lambda_ten: lt,
            t: 0.0,
        })
    }

    /// Reduced state of one cell.
    pub fn cell(&self, ix: usize) -> ReducedState {
        let pair = |k: usize| {
            let nv = self.grids[k].v.len();
            ReducedPair {
                grid: self.grids[k].clone(),
                g: (0..nv).map(|iv| self.g[k][iv * self.n_x + ix]).collect(),
                h: (0..nv).map(|iv| self.h[k][iv * self.n_x + ix]).collect(),
                species: k,
            }
        };
        ReducedState {
            pairs: [pair(0), pair(1)],
            lambda_ten: [self.lambda_ten[0][ix].clone(), self.lambda_ten[1][ix].clone()],
            t: self.t,
        }
    }

    fn set_cell(&mut self, ix: usize, s: &ReducedState) {
        for k in 0..2 {
            for (iv, (g, h)) in s.pairs[k].g.iter().zip(&s.pairs[k].h).enumerate() {
                self.g[k][iv * self.n_x + ix] = *g;
                self.h[k][iv * self.n_x + ix] = *h;
            }
            self.lambda_ten[k][ix] = s.lambda_ten[k].clone();
        }
    }

    pub fn cell_moments(&self, model: &Model, ix: usize) -> Result<[MacroMoments; 2]> {
        let c = self.cell(ix);
        Ok([
            c.pairs[0].moments(model.species[0].mass)?,
            c.pairs[1].moments(model.species[1].mass)?,
        ])
    }

    /// `CFL_adv dx / max |v_x|`.
    pub fn advection_dt(&self, cfl_adv: f64) -> f64 {
        let vmax = self.grids[0].v.max_abs_vx().max(self.grids[1].v.max_abs_vx());
        cfl_adv * self.dx / vmax
    }

    pub fn totals(&self, model: &Model) -> FieldTotals {
        let mut mass = [0.0; 2];
        let mut momentum_x = 0.0;
        let mut energy = 0.0;
        let mut g_entropy = 0.0;
        for k in 0..2 {
            let v = &self.grids[k].v;
            let m = model.species[k].mass;
            let w = v.weight * self.dx;
            let mut sm = 0.0;
            for iv in 0..v.len() {
                let node = v.node(iv);
                let vsq: f64 = node.iter().map(|x| x * x).sum();
                let col_g = &self.g[k][iv * self.n_x..(iv + 1) * self.n_x];
                let col_h = &self.h[k][iv * self.n_x..(iv + 1) * self.n_x];
                let sg: f64 = col_g.iter().sum();
                let sh: f64 = col_h.iter().sum();
                sm += sg;
                momentum_x += w * m * node[0] * sg;
                energy += w * 0.5 * m * (vsq * sg + sh);
                g_entropy += w
                    * col_g
                        .iter()
                        .map(|&x| if x > ENTROPY_FLOOR { x * x.ln() } else { 0.0 })
                        .sum::<f64>();
            }
            mass[k] = w * sm;
        }
        FieldTotals {
            mass,
            momentum_x,
            energy,
            g_entropy,
        }
    }

    fn neighbor(&self, ix: isize) -> usize {
        let n = self.n_x as isize;
        match self.boundary {
            Boundary::Periodic => ix.rem_euclid(n) as usize,
            Boundary::Outflow => ix.clamp(0, n - 1) as usize,
        }
    }

    /// Upwind (optionally minmod-limited) update of one velocity column.
    fn advect_column(&self, q: &[f64], vx: f64, dt: f64, second_order: bool) -> Vec<f64> {
        let n = self.n_x;
        let nu = vx.abs() * dt / self.dx;
        let at = |i: isize| q[self.neighbor(i)];
        let slope = |i: isize| {
            if second_order {
                minmod(at(i) - at(i - 1), at(i + 1) - at(i))
            } else {
                0.0
            }
        };
        // flux[i] is the flux through the interface between cells i-1 and i.
        let flux: Vec<f64> = (0..=n as isize)
            .map(|i| {
                if vx >= 0.0 {
                    vx * (at(i - 1) + 0.5 * (1.0 - nu) * slope(i - 1))
                } else {
                    vx * (at(i) - 0.5 * (1.0 - nu) * slope(i))
                }
            })
            .collect();
        let mut fl = flux;
        if self.boundary == Boundary::Periodic {
            // Identical interface; reuse the value so the sum telescopes exactly.
            fl[n] = fl[0];
        }
        (0..n)
            .map(|i| q[i] - dt / self.dx * (fl[i + 1] - fl[i]))
            .collect()
    }

    fn transport(&mut self, dt: f64, second_order: bool) {
        let n = self.n_x;
        for k in 0..2 {
            let v = &self.grids[k].v;
            let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..v.len())
                .into_par_iter()
                .map(|iv| {
                    let vx = v.node(iv)[0];
                    let rg = &self.g[k][iv * n..(iv + 1) * n];
                    let rh = &self.h[k][iv * n..(iv + 1) * n];
                    (
                        self.advect_column(rg, vx, dt, second_order),
                        self.advect_column(rh, vx, dt, second_order),
                    )
                })
                .collect();
            for (iv, (cg, ch)) in cols.into_iter().enumerate() {
                self.g[k][iv * n..(iv + 1) * n].copy_from_slice(&cg);
                self.h[k][iv * n..(iv + 1) * n].copy_from_slice(&ch);
            }
        }
    }

    /// `∂_t Λ + u_x ∂_x Λ = 0`, upwinded on each species' cell velocity.
    fn advect_tensors(&mut self, model: &Model, dt: f64) -> Result<()> {
        let n = self.n_x as isize;
        for k in 0..2 {
            let mass = model.species[k].mass;
            let ux: Vec<f64> = (0..self.n_x)
                .map(|ix| {
                    let c = self.cell(ix);
                    c.pairs[k].moments(mass).map(|m| m.u[0])
                })
                .collect::<Result<_>>()?;
            let old = self.lambda_ten[k].clone();
            for ix in 0..n {
                let u = ux[ix as usize];
                let c = &old[ix as usize];
                let grad = if u >= 0.0 {
                    c - &old[self.neighbor(ix - 1)]
                } else {
                    &old[self.neighbor(ix + 1)] - c
                };
                self.lambda_ten[k][ix as usize] = c - grad * (u * dt / self.dx);
            }
        }
        Ok(())
    }

    /// Lie splitting: transport over `dt`, then per-cell reduced relaxation
    /// over `dt` with as many Heun sub-steps as its stability bound requires.
    pub fn step_transport(&mut self, model: &Model, dt: f64, opts: TransportOptions) -> Result<TransportReport> {
        let limit = self.advection_dt(opts.cfl_adv);
        if dt > limit * (1.0 + 1e-12) {
            return Err(KineticError::Argument(format!(
                "transport step {dt:e} exceeds the advection limit {limit:e}"
            )));
        }
        self.advect_tensors(model, dt)?;
        self.transport(dt, opts.second_order);
        let mut report = TransportReport {
            dt,
            ..Default::default()
        };
        for k in 0..2 {
            let w = self.grids[k].v.weight;
            report.stats.clipped_mass[k] += w * clip(&mut self.g[k], self.t, k)?;
            clip(&mut self.h[k], self.t, k)?;
        }
        if !opts.collisionless {
            let results: Vec<Result<(ReducedState, ReducedStats, usize)>> = (0..self.n_x)
                .into_par_iter()
                .map(|ix| {
                    let mut cell = self.cell(ix);
                    let n = [
                        cell.pairs[0].grid.v.weight * cell.pairs[0].g.iter().sum::<f64>(),
                        cell.pairs[1].grid.v.weight * cell.pairs[1].g.iter().sum::<f64>(),
                    ];
                    let sub = (dt / model.stable_dt(n, opts.cfl_relax)).ceil().max(1.0) as usize;
                    let h = dt / sub as f64;
                    let mut st = ReducedStats::default();
                    for _ in 0..sub {
                        cell = model.reduced_step_rk2(&cell, h, &mut st)?;
                    }
                    Ok((cell, st, sub))
                })
                .collect();
            for (ix, r) in results.into_iter().enumerate() {
                let (cell, st, sub) = r?;
                self.set_cell(ix, &cell);
                report.stats.absorb(&st);
                report.relax_substeps = report.relax_substeps.max(sub);
            }
        }
        self.t += dt;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{MixtureCoupling, SpeciesParams};
    use crate::dynamics::{build_grids, GridSpec};

    fn model(l: [usize; 2]) -> Model {
        let sp = |m: f64, l: usize| SpeciesParams {
            mass: m,
            dof_internal: l,
            dof_translational: 1,
            nu_self: 1.0,
            nu_cross: 1.0,
            es_parameter: 0.0,
            z_rot: 1.0,
        };
        Model::new(
            [sp(1.0, l[0]), sp(1.0, l[1])],
            MixtureCoupling {
                epsilon: 1.0,
                delta: 0.5,
                alpha: 0.5,
                gamma: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn h_factor_is_l_theta_over_m() {
        let spec = GaussianSpec {
            n: 1.0,
            u: vec![0.0],
            velocity_cov: DMatrix::identity(1, 1),
            internal_temp: 2.0,
            dof_internal: 2,
            mass: 1.0,
        };
        assert_eq!(ReducedSpec::new(&spec).h_factor, 4.0);
        let mono = GaussianSpec {
            dof_internal: 0,
            ..spec
        };
        assert_eq!(ReducedSpec::new(&mono).h_factor, 0.0);
    }

    #[test]
    fn reduction_of_product_maxwellian() {
        let m = model([2, 0]);
        let init = [
            InitialSpecies::isotropic(1.0, vec![0.0], 1.0, 1.5),
            InitialSpecies::isotropic(1.0, vec![0.0], 1.0, 0.0),
        ];
        let grids = build_grids(&m, &init, GridSpec { n_v: 32, n_eta: 32, width: 8.0 }).unwrap();
        let s = SystemState::from_initial(&m, &grids, &init).unwrap();
        let r0 = reduce(&s.f[0]);
        for (g, h) in r0.g.iter().zip(&r0.h) {
            assert!((h - 3.0 * g).abs() <= 1e-12 * g.max(1e-300) + 1e-300);
        }
        let r1 = reduce(&s.f[1]);
        assert!(r1.h.iter().all(|&x| x == 0.0));
        assert_eq!(r1.g, s.f[1].values);
        let full = crate::grid::compute_moments(&s.f[0], 1.0).unwrap();
        let red = r0.moments(1.0).unwrap();
        assert!((full.t_rot - red.t_rot).abs() < 1e-10);
    }

    #[test]
    fn uniform_field_is_unchanged_by_transport() {
        let m = model([0, 2]);
        let st = [
            InitialSpecies::isotropic(1.0, vec![0.0], 1.0, 0.0),
            InitialSpecies::isotropic(1.0, vec![0.0], 1.0, 1.0),
        ];
        let grids = build_grids(&m, &st, GridSpec { n_v: 40, n_eta: 16, width: 8.0 }).unwrap();
        let mut f = SpatialField1D::riemann(&m, grids, 10, &st, &st, Boundary::Periodic).unwrap();
        let before = f.g.clone();
        let dt = f.advection_dt(0.5);
        f.step_transport(&m, dt, TransportOptions { second_order: true, ..Default::default() })
            .unwrap();
        for k in 0..2 {
            let err = f.g[k]
                .iter()
                .zip(&before[k])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-13, "{err}");
        }
    }
}
