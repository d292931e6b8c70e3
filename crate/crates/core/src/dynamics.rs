//! Space-homogeneous relaxation of the two-species system, with entropy,
//! conservation and equilibrium diagnostics.

use std::sync::Arc;

use log::{debug, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::attractors::{build_attractor_set, AttractorSet, GaussianSpec, TensorTemps};
use crate::closure::{InterspeciesState, MacroMoments, MixtureCoupling, RelaxedState, SpeciesParams};
use crate::error::{KineticError, Result};
use crate::grid::{
    compute_moments, coverage_sigmas, lambda_from_theta, projection_factors, Axis, DiscreteDistribution,
    InternalGrid, PhaseGrid, VelocityGrid, COVERAGE_SIGMAS,
};

/// Values of `x ln x` below this are taken as zero.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Largest clipped negative mass tolerated per step, relative to the total.
pub const CLIP_TOLERANCE: f64 = 1e-6;

pub const DEFAULT_CFL: f64 = 0.5;

/// Largest entropy weight `z_k = Z_r d/(d+l)` accepted by the entropy
/// monotonicity check. The theorem only asks for `z_k` small enough; this
/// bound is where monotone decay was observed across the parameter sweeps.
pub const Z_SMALL: f64 = 0.5;

/// Interspecies contribution to the evolution of `Lambda_k^ten`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TensorCrossTerm {
    /// `nu_kj n_j (Lambda_kj I + m_k (u_kj - u_k)⊗(u_kj - u_k) - P_k/n_k)`, the
    /// velocity second moment of `nu_kj n_j (M_kj - f_k)`. With it, `Theta_k`
    /// obtained from the internal-energy constraint follows the scalar
    /// relaxation equation for `Theta_k` exactly.
    #[default]
    MomentConsistent,
    /// `nu_kj n_j (Theta_kj - T_k^r) I`.
    Internal,
}

/// Species constants and closure parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub species: [SpeciesParams; 2],
    pub coupling: MixtureCoupling,
    pub tensor_cross: TensorCrossTerm,
}

/// Everything derived from a state before the right-hand side is assembled.
#[derive(Debug, Clone)]
pub struct ClosureState {
    pub moments: [MacroMoments; 2],
    pub temps: [TensorTemps; 2],
    pub relaxed: [RelaxedState; 2],
    pub inter: InterspeciesState,
    pub attractors: AttractorSet,
}

impl ClosureState {
    /// `(Theta_12, Theta_21)` of the interspecies attractor species `k` relaxes toward.
    pub fn cross_theta(&self, k: usize) -> f64 {
        if k == 0 {
            self.inter.theta12
        } else {
            self.inter.theta21
        }
    }
}

impl Model {
    pub fn new(species: [SpeciesParams; 2], coupling: MixtureCoupling) -> Result<Self> {
        coupling.validate(&species)?;
        Ok(Self {
            species,
            coupling,
            tensor_cross: TensorCrossTerm::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.species[0].dof_translational
    }

    /// `(nu_kk n_k, nu_kj n_j)`.
    pub fn rates(&self, k: usize, n: [f64; 2]) -> (f64, f64) {
        let j = 1 - k;
        (
            self.species[k].nu_self * n[k],
            self.species[k].nu_cross * n[j],
        )
    }

    /// Fastest relaxation rate of the system at densities `n`.
    pub fn max_rate(&self, n: [f64; 2]) -> f64 {
        (0..2)
            .map(|k| {
                let (a, b) = self.rates(k, n);
                let sp = &self.species[k];
                let d = sp.dof_translational as f64;
                let tensor = a / sp.z_rot * (d + sp.dof_internal as f64) / d;
                (a + b).max(tensor)
            })
            .fold(0.0, f64::max)
    }

    /// `cfl / max_rate`.
    pub fn stable_dt(&self, n: [f64; 2], cfl: f64) -> f64 {
        cfl / self.max_rate(n)
    }

    /// For species without internal variables the tensor is pinned to `P/n`.
    pub fn effective_lambda_ten(&self, k: usize, moments: &MacroMoments, carried: &DMatrix<f64>) -> DMatrix<f64> {
        if self.species[k].dof_internal == 0 {
            moments.p_over_n()
        } else {
            carried.clone()
        }
    }

    pub fn closure(&self, moments: [MacroMoments; 2], lambda_ten: &[DMatrix<f64>; 2]) -> Result<ClosureState> {
        let temps = [
            TensorTemps::new(
                &self.effective_lambda_ten(0, &moments[0], &lambda_ten[0]),
                &moments[0],
                &self.species[0],
            )?,
            TensorTemps::new(
                &self.effective_lambda_ten(1, &moments[1], &lambda_ten[1]),
                &moments[1],
                &self.species[1],
            )?,
        ];
        let relaxed = [
            RelaxedState {
                moments: moments[0].clone(),
                lambda: temps[0].lambda,
                theta: temps[0].theta,
            },
            RelaxedState {
                moments: moments[1].clone(),
                lambda: temps[1].lambda,
                theta: temps[1].theta,
            },
        ];
        let inter = InterspeciesState::compute(&relaxed, &self.coupling, &self.species)?;
        let attractors = build_attractor_set(&moments, &temps, &inter, &self.species)?;
        Ok(ClosureState {
            moments,
            temps,
            relaxed,
            inter,
            attractors,
        })
    }

    /// Right-hand side of the tensor relaxation for species `k`.
    pub fn lambda_ten_rhs(&self, k: usize, c: &ClosureState) -> DMatrix<f64> {
        let sp = &self.species[k];
        let d = sp.dof_translational;
        if sp.dof_internal == 0 {
            return DMatrix::zeros(d, d);
        }
        let n = [c.moments[0].n, c.moments[1].n];
        let (a, b) = self.rates(k, n);
        let t = &c.temps[k];
        let dl = (d + sp.dof_internal) as f64 / d as f64;
        let rot = (&t.t_ten - &t.lambda_ten) * (a / sp.z_rot * dl);
        let es = (&t.lambda_es - c.moments[k].p_over_n()) * a;
        let cross = match self.tensor_cross {
            TensorCrossTerm::Internal => DMatrix::identity(d, d) * (b * (c.cross_theta(k) - c.moments[k].t_rot)),
            TensorCrossTerm::MomentConsistent => {
                let (u_kj, lambda_kj) = if k == 0 {
                    (&c.inter.u12, c.inter.lambda12)
                } else {
                    (&c.inter.u21, c.inter.lambda21)
                };
                let du = nalgebra::DVector::from_iterator(d, u_kj.iter().zip(&c.moments[k].u).map(|(a, b)| a - b));
                (DMatrix::identity(d, d) * lambda_kj + &du * du.transpose() * sp.mass - c.moments[k].p_over_n()) * b
            }
        };
        rot + es + cross
    }

    fn closure_of(&self, state: &SystemState) -> Result<ClosureState> {
        let moments = [
            compute_moments(&state.f[0], self.species[0].mass)?,
            compute_moments(&state.f[1], self.species[1].mass)?,
        ];
        self.closure(moments, &state.lambda_ten)
    }

    /// `df_k/dt` on the grid and `d Lambda_k^ten / dt`.
    pub fn rhs(&self, state: &SystemState) -> Result<(Derivative, ClosureState)> {
        let c = self.closure_of(state)?;
        let n = [c.moments[0].n, c.moments[1].n];
        let mut df: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for k in 0..2 {
            let (a, b) = self.rates(k, n);
            let grid = &state.f[k].grid;
            let (gv, ge) = projection_factors(&c.attractors.es_gaussian[k], grid)?;
            let (mv, me) = projection_factors(&c.attractors.cross[k], grid)?;
            let ga = a * c.attractors.es_gaussian[k].n;
            let mb = b * c.attractors.cross[k].n;
            df[k] = relaxation_rhs(&state.f[k].values, a + b, ga, &gv, &ge, mb, &mv, &me);
        }
        let dlambda = [self.lambda_ten_rhs(0, &c), self.lambda_ten_rhs(1, &c)];
        Ok((Derivative { df, dlambda }, c))
    }

    /// One explicit Heun step. Negative values are clipped and reported.
    pub fn step_rk2(&self, state: &SystemState, dt: f64) -> Result<(SystemState, StepStats)> {
        let n = [state.f[0].mass(), state.f[1].mass()];
        let limit = 1.0 / self.max_rate(n);
        if dt > limit * (1.0 + 1e-12) {
            return Err(KineticError::Cfl { dt, limit });
        }
        let (k1, _) = self.rhs(state)?;
        let mid = state.axpy(dt, &k1, state, state.t + dt);
        let (k2, _) = self.rhs(&mid)?;
        let mut next = state.clone();
        next.t = state.t + dt;
        for k in 0..2 {
            let (a, b) = (&k1.df[k], &k2.df[k]);
            next.f[k]
                .values
                .par_iter_mut()
                .zip(a.par_iter().zip(b.par_iter()))
                .for_each(|(x, (p, q))| *x += 0.5 * dt * (p + q));
            next.lambda_ten[k] += (&k1.dlambda[k] + &k2.dlambda[k]) * (0.5 * dt);
        }
        let stats = next.sanitize(state.t)?;
        for k in 0..2 {
            if self.species[k].dof_internal == 0 {
                let m = compute_moments(&next.f[k], self.species[k].mass)?;
                next.lambda_ten[k] = m.p_over_n();
            }
        }
        Ok((next, stats))
    }

    /// Total mass per species, momentum and energy of a moment pair.
    pub fn conserved(&self, moments: &[MacroMoments; 2]) -> Conserved {
        let d = self.dim();
        let mut momentum = vec![0.0; d];
        let mut energy = 0.0;
        let mut momentum_scale = 0.0;
        for (k, m) in moments.iter().enumerate() {
            let sp = &self.species[k];
            let u_sq: f64 = m.u.iter().map(|x| x * x).sum();
            for (p, x) in momentum.iter_mut().zip(&m.u) {
                *p += sp.mass * m.n * x;
            }
            energy += 0.5 * sp.mass * m.n * u_sq
                + 0.5 * d as f64 * m.n * m.t_tr
                + 0.5 * sp.dof_internal as f64 * m.n * m.t_rot;
            momentum_scale += sp.mass * m.n * (u_sq + d as f64 * m.t_tr / sp.mass).sqrt();
        }
        Conserved {
            mass: [moments[0].n, moments[1].n],
            momentum,
            energy,
            momentum_scale,
        }
    }

    /// `Σ_k ∫ f_k ln f_k + 3 z_k ∫ Ĝ_k ln Ĝ_k`.
    pub fn entropy(&self, state: &SystemState) -> Result<f64> {
        let c = self.closure_of(state)?;
        Ok(self.entropy_parts(state, &c)?.iter().sum())
    }

    /// `[∫f_1 ln f_1, ∫f_2 ln f_2, 3 z_1 ∫Ĝ_1 ln Ĝ_1, 3 z_2 ∫Ĝ_2 ln Ĝ_2]`.
    ///
    /// The extended-Maxwellian terms use the closed form of the Gaussian
    /// entropy and only appear for species with internal variables.
    pub fn entropy_parts(&self, state: &SystemState, c: &ClosureState) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for k in 0..2 {
            out[k] = kinetic_entropy(&state.f[k]);
            let sp = &self.species[k];
            if sp.dof_internal > 0 {
                out[2 + k] = 3.0 * sp.entropy_weight() * c.attractors.extended[k].entropy()?;
            }
        }
        Ok(out)
    }

    /// Scale-free distance from the global equilibrium.
    pub fn equilibrium_residual(&self, state: &SystemState) -> Result<EquilibriumReport> {
        let c = self.closure_of(state)?;
        self.equilibrium_report(state, &c)
    }

    pub fn equilibrium_report(&self, state: &SystemState, c: &ClosureState) -> Result<EquilibriumReport> {
        let d = self.dim();
        let mo = &c.moments;
        let cons = self.conserved(mo);
        let rho: f64 = (0..2).map(|k| self.species[k].mass * mo[k].n).sum();
        let u_bar: Vec<f64> = cons.momentum.iter().map(|p| p / rho).collect();
        let dof: f64 = (0..2)
            .map(|k| mo[k].n * (d + self.species[k].dof_internal) as f64)
            .sum();
        let kin_bar: f64 = 0.5 * rho * u_bar.iter().map(|x| x * x).sum::<f64>();
        let t_eq = 2.0 * (cons.energy - kin_bar) / dof;

        let temps = self.tracked_temperatures(c);
        let t_max = temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let t_min = temps.iter().copied().fold(f64::INFINITY, f64::min);
        let temperature_spread = (t_max - t_min) / t_eq;

        let m_min = self.species[0].mass.min(self.species[1].mass);
        let speed = (t_eq / m_min).sqrt();
        let du: f64 = mo[0]
            .u
            .iter()
            .zip(&mo[1].u)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let velocity = du / speed;

        let mut anisotropy = 0.0_f64;
        let mut distribution = 0.0_f64;
        for k in 0..2 {
            let pn = mo[k].p_over_n() - DMatrix::identity(d, d) * t_eq;
            anisotropy = anisotropy.max(pn.abs().max() / t_eq);
            let sp = &self.species[k];
            let spec = GaussianSpec {
                n: mo[k].n,
                u: u_bar.clone(),
                velocity_cov: DMatrix::identity(d, d) * (t_eq / sp.mass),
                internal_temp: t_eq,
                dof_internal: sp.dof_internal,
                mass: sp.mass,
            };
            let grid = &state.f[k].grid;
            let (pv, pe) = projection_factors(&spec, grid)?;
            let ne = pe.len();
            let l1: f64 = state.f[k]
                .values
                .par_chunks(ne)
                .zip(pv.par_iter())
                .map(|(row, &a)| {
                    row.iter()
                        .zip(&pe)
                        .map(|(f, &b)| (f - mo[k].n * a * b).abs())
                        .sum::<f64>()
                })
                .sum();
            distribution = distribution.max(l1 * grid.weight() / mo[k].n);
        }
        let max = velocity
            .max(temperature_spread)
            .max(anisotropy)
            .max(distribution);
        Ok(EquilibriumReport {
            velocity,
            temperature_spread,
            anisotropy,
            distribution,
            equilibrium_temperature: t_eq,
            max,
        })
    }

    /// `T^t, T^r, Lambda, Theta` of each species and the four interspecies
    /// temperatures. Internal temperatures of species without internal
    /// variables are omitted.
    pub fn tracked_temperatures(&self, c: &ClosureState) -> Vec<f64> {
        let mut out = Vec::with_capacity(12);
        for k in 0..2 {
            out.push(c.moments[k].t_tr);
            if self.species[k].dof_internal > 0 {
                out.push(c.moments[k].t_rot);
            }
            out.push(c.temps[k].lambda);
            out.push(c.temps[k].theta);
        }
        out.push(c.inter.lambda12);
        out.push(c.inter.lambda21);
        if self.species[0].dof_internal + self.species[1].dof_internal > 0 {
            out.push(c.inter.theta12);
            out.push(c.inter.theta21);
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn relaxation_rhs(
    f: &[f64],
    total_rate: f64,
    ga: f64,
    gv: &[f64],
    ge: &[f64],
    mb: f64,
    mv: &[f64],
    me: &[f64],
) -> Vec<f64> {
    let ne = ge.len();
    let mut out = vec![0.0; f.len()];
    out.par_chunks_mut(ne)
        .zip(f.par_chunks(ne))
        .zip(gv.par_iter().zip(mv.par_iter()))
        .for_each(|((o, row), (&g, &m))| {
            for i in 0..ne {
                o[i] = ga * g * ge[i] + mb * m * me[i] - total_rate * row[i];
            }
        });
    out
}

/// `∫ f ln f` by midpoint quadrature.
pub fn kinetic_entropy(f: &DiscreteDistribution) -> f64 {
    let s: f64 = f
        .values
        .iter()
        .map(|&x| if x > ENTROPY_FLOOR { x * x.ln() } else { 0.0 })
        .sum();
    s * f.grid.weight()
}

/// Time derivative of a [`SystemState`].
#[derive(Debug, Clone)]
pub struct Derivative {
    pub df: [Vec<f64>; 2],
    pub dlambda: [DMatrix<f64>; 2],
}

/// Distributions of both species and their carried tensors `Lambda_k^ten`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub f: [DiscreteDistribution; 2],
    pub lambda_ten: [DMatrix<f64>; 2],
    pub t: f64,
}

/// Side results of a step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub clipped_mass: [f64; 2],
    pub min_value: [f64; 2],
}

impl SystemState {
    fn axpy(&self, dt: f64, k: &Derivative, base: &SystemState, t: f64) -> SystemState {
        let mut out = base.clone();
        out.t = t;
        for s in 0..2 {
            out.f[s]
                .values
                .par_iter_mut()
                .zip(k.df[s].par_iter())
                .for_each(|(x, d)| *x += dt * d);
            out.lambda_ten[s] += &k.dlambda[s] * dt;
        }
        let _ = self;
        out
    }

    /// Rejects non-finite values and clips negative ones.
    fn sanitize(&mut self, t_prev: f64) -> Result<StepStats> {
        let mut stats = StepStats::default();
        for k in 0..2 {
            let f = &mut self.f[k];
            let bad = f.values.iter().filter(|x| !x.is_finite()).count();
            if bad > 0 {
                return Err(KineticError::Integration {
                    t: t_prev,
                    reason: format!("species{} has {bad} non-finite grid values", k + 1),
                });
            }
            if self.lambda_ten[k].iter().any(|x| !x.is_finite()) {
                return Err(KineticError::Integration {
                    t: t_prev,
                    reason: format!("species{} tensor temperature is not finite", k + 1),
                });
            }
            stats.min_value[k] = f.min_value();
            let mut neg = 0.0;
            let mut total = 0.0;
            for x in f.values.iter_mut() {
                if *x < 0.0 {
                    neg -= *x;
                    *x = 0.0;
                } else {
                    total += *x;
                }
            }
            let w = f.grid.weight();
            stats.clipped_mass[k] = neg * w;
            if neg > CLIP_TOLERANCE * total {
                return Err(KineticError::Integration {
                    t: t_prev,
                    reason: format!(
                        "species{} clipped mass {:e} exceeds {CLIP_TOLERANCE:e} of its total",
                        k + 1,
                        neg * w
                    ),
                });
            }
            if neg > 0.0 {
                debug!("species{}: clipped negative mass {:e}", k + 1, neg * w);
            }
        }
        Ok(stats)
    }
}

/// Per-species initial data: a Gaussian with optional traceless anisotropy.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpecies {
    pub n: f64,
    pub u: Vec<f64>,
    pub t_tr: f64,
    pub t_rot: f64,
    /// Initial relaxed internal temperature; defaults to `t_rot`.
    pub theta0: f64,
    /// Traceless symmetric addition to `T^t I` in the initial temperature tensor.
    pub anisotropy: DMatrix<f64>,
}

impl InitialSpecies {
    pub fn isotropic(n: f64, u: Vec<f64>, t_tr: f64, t_rot: f64) -> Self {
        let d = u.len();
        Self {
            n,
            u,
            t_tr,
            t_rot,
            theta0: t_rot,
            anisotropy: DMatrix::zeros(d, d),
        }
    }

    pub fn temperature_tensor(&self) -> DMatrix<f64> {
        let d = self.u.len();
        DMatrix::identity(d, d) * self.t_tr + &self.anisotropy
    }

    /// Largest temperature appearing in the data.
    pub fn max_temperature(&self) -> f64 {
        let eig = nalgebra::SymmetricEigen::new(self.temperature_tensor()).eigenvalues;
        eig.iter()
            .copied()
            .fold(self.t_tr.max(self.t_rot).max(self.theta0), f64::max)
    }
}

/// Grid resolution and coverage policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_v: usize,
    pub n_eta: usize,
    /// Coverage in thermal speeds beyond the initial velocity span.
    pub width: f64,
}

/// Per-species grids centered on the span of the given initial velocities,
/// wide enough for the hottest temperature present (including relative motion).
pub fn build_grids(model: &Model, init: &[InitialSpecies], spec: GridSpec) -> Result<[Arc<PhaseGrid>; 2]> {
    let d = model.dim();
    for (k, i) in init.iter().enumerate() {
        if i.u.len() != d {
            return Err(KineticError::DimensionMismatch {
                expected: d,
                got: i.u.len(),
            });
        }
        if !(i.n > 0.0 && i.t_tr > 0.0) {
            return Err(KineticError::Argument(format!(
                "initial state {} needs positive density and translational temperature",
                k + 1
            )));
        }
    }
    let lo: Vec<f64> = (0..d)
        .map(|a| init.iter().map(|i| i.u[a]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..d)
        .map(|a| init.iter().map(|i| i.u[a]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let span_sq: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum();
    let m_max = model.species[0].mass.max(model.species[1].mass);
    let t_max = init
        .iter()
        .map(|i| i.max_temperature())
        .fold(0.0, f64::max)
        + m_max * span_sq / d as f64;
    let make = |k: usize| -> Result<Arc<PhaseGrid>> {
        let sp = &model.species[k];
        let thermal = (t_max / sp.mass).sqrt();
        let axes = (0..d)
            .map(|a| Axis::new(0.5 * (lo[a] + hi[a]), 0.5 * (hi[a] - lo[a]) + spec.width * thermal, spec.n_v))
            .collect::<Result<Vec<_>>>()?;
        let v = VelocityGrid::new(axes)?;
        let eta = InternalGrid::new(sp.dof_internal, spec.width * thermal, spec.n_eta)?;
        Ok(PhaseGrid::new(v, eta))
    };
    Ok([make(0)?, make(1)?])
}

impl SystemState {
    /// Product-Gaussian initial data with `Lambda^ten = P/n + (Lambda_0 - T^t) I`,
    /// where `Lambda_0` follows from `theta0` through the internal-energy constraint.
    pub fn from_initial(model: &Model, grids: &[Arc<PhaseGrid>; 2], init: &[InitialSpecies; 2]) -> Result<Self> {
        let d = model.dim();
        let mut f = Vec::with_capacity(2);
        let mut lambda_ten = Vec::with_capacity(2);
        for k in 0..2 {
            let sp = &model.species[k];
            let i = &init[k];
            let temp = i.temperature_tensor();
            let (ok, min) = crate::attractors::spd_check(&temp)?;
            if !ok {
                return Err(KineticError::NotSpd { min_eigenvalue: min });
            }
            let spec = GaussianSpec::from_temperature(i.n, i.u.clone(), &temp, i.t_rot, sp);
            let cov = coverage_sigmas(&spec, &grids[k]);
            if cov < COVERAGE_SIGMAS {
                warn!("species{} initial data covered by only {cov:.2} standard deviations", k + 1);
            }
            f.push(crate::grid::project_attractor(&spec, &grids[k], k)?);
            let lam0 = lambda_from_theta(i.t_tr, i.t_rot, i.theta0, d, sp.dof_internal)?;
            let m = compute_moments(f.last().unwrap(), sp.mass)?;
            lambda_ten.push(m.p_over_n() + DMatrix::identity(d, d) * (lam0 - m.t_tr));
        }
        let f1 = f.pop().unwrap();
        let f0 = f.pop().unwrap();
        let l1 = lambda_ten.pop().unwrap();
        let l0 = lambda_ten.pop().unwrap();
        Ok(Self {
            f: [f0, f1],
            lambda_ten: [l0, l1],
            t: 0.0,
        })
    }
}

/// Conserved totals of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Conserved {
    pub mass: [f64; 2],
    pub momentum: Vec<f64>,
    pub energy: f64,
    /// Magnitude used to make momentum drift scale-free.
    pub momentum_scale: f64,
}

impl Conserved {
    /// `(mass residuals, momentum residual, energy residual)` relative to `self`.
    pub fn residuals(&self, now: &Conserved) -> ([f64; 2], f64, f64) {
        let mass = [
            (now.mass[0] - self.mass[0]).abs() / self.mass[0],
            (now.mass[1] - self.mass[1]).abs() / self.mass[1],
        ];
        let mom = now
            .momentum
            .iter()
            .zip(&self.momentum)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / self.momentum_scale;
        let en = (now.energy - self.energy).abs() / self.energy.abs();
        (mass, mom, en)
    }
}

/// Components of the equilibrium residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumReport {
    /// `|u_1 - u_2|` in units of the thermal speed.
    pub velocity: f64,
    /// `(max - min) / T_eq` over all tracked temperatures.
    pub temperature_spread: f64,
    /// `max |P_k/n_k - T_eq I| / T_eq`.
    pub anisotropy: f64,
    /// `max_k ||f_k - M_k(ū, T_eq)||_1 / n_k`.
    pub distribution: f64,
    pub equilibrium_temperature: f64,
    pub max: f64,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    pub mass_residual: [f64; 2],
    pub momentum_residual: f64,
    pub energy_residual: f64,
    pub entropy: f64,
    pub delta_entropy: f64,
    pub min_value: [f64; 2],
    pub clipped_mass: [f64; 2],
    pub positivity_ok: bool,
    /// Smallest `T_k^r / Theta_k` over species with internal variables.
    pub min_rot_ratio: f64,
    pub moments: [MacroMoments; 2],
    pub lambda: [f64; 2],
    pub theta: [f64; 2],
    pub theta21_matches: bool,
}

/// Owns a state and advances it, tracking conservation and entropy.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub model: Model,
    pub state: SystemState,
    pub reference: Conserved,
    pub entropy: f64,
    pub cfl: f64,
    pub steps: usize,
}

impl Integrator {
    pub fn new(model: Model, state: SystemState) -> Result<Self> {
        let c = model.closure_of(&state)?;
        let reference = model.conserved(&c.moments);
        let entropy = model.entropy_parts(&state, &c)?.iter().sum();
        Ok(Self {
            model,
            state,
            reference,
            entropy,
            cfl: DEFAULT_CFL,
            steps: 0,
        })
    }

    pub fn stable_dt(&self) -> f64 {
        self.model
            .stable_dt([self.state.f[0].mass(), self.state.f[1].mass()], self.cfl)
    }

    pub fn closure(&self) -> Result<ClosureState> {
        self.model.closure_of(&self.state)
    }

    pub fn step(&mut self, dt: f64) -> Result<StepReport> {
        let (next, stats) = self.model.step_rk2(&self.state, dt)?;
        let c = self.model.closure_of(&next)?;
        let entropy: f64 = self.model.entropy_parts(&next, &c)?.iter().sum();
        let now = self.model.conserved(&c.moments);
        let (mass, mom, en) = self.reference.residuals(&now);
        let mut min_rot_ratio = f64::INFINITY;
        for k in 0..2 {
            if self.model.species[k].dof_internal > 0 {
                min_rot_ratio = min_rot_ratio.min(c.moments[k].t_rot / c.temps[k].theta);
            }
        }
        let theta21_matches =
            self.model.species[0].dof_internal > 0 || c.inter.theta21 == c.temps[1].theta;
        let report = StepReport {
            t: next.t,
            dt,
            mass_residual: mass,
            momentum_residual: mom,
            energy_residual: en,
            entropy,
            delta_entropy: entropy - self.entropy,
            min_value: stats.min_value,
            clipped_mass: stats.clipped_mass,
            positivity_ok: stats.clipped_mass == [0.0, 0.0],
            min_rot_ratio,
            lambda: [c.temps[0].lambda, c.temps[1].lambda],
            theta: [c.temps[0].theta, c.temps[1].theta],
            moments: c.moments,
            theta21_matches,
        };
        self.state = next;
        self.entropy = entropy;
        self.steps += 1;
        Ok(report)
    }

    /// Steps with the stable time step until `t_end`, shortening the last step.
    pub fn run_until<F>(&mut self, t_end: f64, mut on_step: F) -> Result<()>
    where
        F: FnMut(&StepReport) -> Result<()>,
    {
        let dt0 = self.stable_dt();
        while self.state.t < t_end * (1.0 - 1e-14) {
            let dt = dt0.min(t_end - self.state.t);
            let rep = self.step(dt)?;
            on_step(&rep)?;
        }
        Ok(())
    }
}

/// One hypothesis of the entropy theorem.
#[derive(Debug, Clone, PartialEq)]
pub struct Precondition {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Checks the hypotheses under which entropy must be non-increasing.
pub fn validate_htheorem_preconditions(
    moments: &[MacroMoments; 2],
    species: &[SpeciesParams; 2],
    coupling: &MixtureCoupling,
) -> Vec<Precondition> {
    let n = [moments[0].n, moments[1].n];
    let mut out = Vec::new();
    for k in 0..2 {
        let j = 1 - k;
        let lhs = species[k].nu_self * n[k];
        let rhs = species[k].nu_cross * n[j];
        out.push(Precondition {
            name: if k == 0 { "nu11_n1_ge_nu12_n2" } else { "nu22_n2_ge_nu21_n1" },
            passed: lhs >= rhs,
            detail: format!("{lhs:.6e} vs {rhs:.6e}"),
        });
    }
    out.push(Precondition {
        name: "alpha_ne_1",
        passed: coupling.alpha != 1.0,
        detail: if coupling.alpha == 1.0 {
            "alpha = 1: no exchange of momentum and energy between the species".into()
        } else {
            format!("alpha = {}", coupling.alpha)
        },
    });
    out.push(Precondition {
        name: "delta_ne_1",
        passed: coupling.delta != 1.0,
        detail: format!("delta = {}", coupling.delta),
    });
    let violations = coupling.violations(species);
    out.push(Precondition {
        name: "closure_admissible",
        passed: violations.is_empty(),
        detail: violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; "),
    });
    let z_max = species
        .iter()
        .filter(|s| s.dof_internal > 0)
        .map(|s| s.entropy_weight())
        .fold(0.0, f64::max);
    out.push(Precondition {
        name: "z_small",
        passed: z_max <= Z_SMALL,
        detail: format!("max z_k = {z_max} (threshold {Z_SMALL})"),
    });
    let positive = moments.iter().zip(species).all(|(m, s)| {
        m.n > 0.0 && m.t_tr > 0.0 && (s.dof_internal == 0 || m.t_rot > 0.0)
    });
    out.push(Precondition {
        name: "positivity",
        passed: positive,
        detail: String::new(),
    });
    out
}

pub fn all_passed(flags: &[Precondition]) -> bool {
    flags.iter().all(|p| p.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(l: usize, d: usize, nu_cross: f64) -> Model {
        let sp = |m: f64| SpeciesParams {
            mass: m,
            dof_internal: l,
            dof_translational: d,
            nu_self: 1.0,
            nu_cross,
            es_parameter: 0.3,
            z_rot: 1.0,
        };
        Model::new(
            [sp(1.0), sp(2.0)],
            MixtureCoupling {
                epsilon: 1.0,
                delta: 0.3,
                alpha: 0.4,
                gamma: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let m = model(2, 1, 1.0);
        let init = [
            InitialSpecies::isotropic(1.0, vec![0.2], 1.0, 1.0),
            InitialSpecies::isotropic(0.5, vec![0.2], 1.0, 1.0),
        ];
        let grids = build_grids(&m, &init, GridSpec { n_v: 48, n_eta: 24, width: 8.0 }).unwrap();
        let s = SystemState::from_initial(&m, &grids, &init).unwrap();
        let (next, _) = m.step_rk2(&s, 0.2).unwrap();
        for k in 0..2 {
            let err = next.f[k]
                .values
                .iter()
                .zip(&s.f[k].values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "{err}");
        }
        assert!(m.equilibrium_residual(&s).unwrap().max < 1e-10);
    }

    #[test]
    fn momentum_moment_of_rhs_matches_exchange() {
        let m = model(0, 1, 1.0);
        let init = [
            InitialSpecies::isotropic(1.0, vec![0.5], 1.0, 0.0),
            InitialSpecies::isotropic(1.5, vec![-0.3], 0.7, 0.0),
        ];
        let grids = build_grids(&m, &init, GridSpec { n_v: 64, n_eta: 8, width: 8.0 }).unwrap();
        let s = SystemState::from_initial(&m, &grids, &init).unwrap();
        let (der, c) = m.rhs(&s).unwrap();
        let g = &s.f[0].grid;
        let mom: f64 = (0..g.v.len()).map(|i| g.v.node(i)[0] * der.df[0][i]).sum::<f64>() * g.weight();
        let expect = m.species[0].nu_cross * c.moments[1].n * c.moments[0].n * (c.inter.u12[0] - c.moments[0].u[0]);
        assert!((mom - expect).abs() < 1e-10, "{mom} vs {expect}");
    }

    #[test]
    fn preconditions_flag_alpha_one_and_density_ratio() {
        let m = model(2, 1, 1.0);
        let mo = [
            MacroMoments::isotropic(1.0, vec![0.0], 1.0, 1.0, 2),
            MacroMoments::isotropic(1.0, vec![0.0], 1.0, 1.0, 2),
        ];
        assert!(all_passed(&validate_htheorem_preconditions(&mo, &m.species, &m.coupling)));
        let c = MixtureCoupling { alpha: 1.0, ..m.coupling };
        let flags = validate_htheorem_preconditions(&mo, &m.species, &c);
        assert!(!flags.iter().find(|p| p.name == "alpha_ne_1").unwrap().passed);
        let mo2 = [mo[0].clone(), MacroMoments::isotropic(10.0, vec![0.0], 1.0, 1.0, 2)];
        let flags = validate_htheorem_preconditions(&mo2, &m.species, &m.coupling);
        assert!(!flags[0].passed);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let m = model(0, 1, 1.0);
        let init = [
            InitialSpecies::isotropic(1.0, vec![0.0], 1.0, 0.0),
            InitialSpecies::isotropic(1.0, vec![0.0], 1.0, 0.0),
        ];
        let grids = build_grids(&m, &init, GridSpec { n_v: 16, n_eta: 8, width: 6.0 }).unwrap();
        let s = SystemState::from_initial(&m, &grids, &init).unwrap();
        assert!(matches!(m.step_rk2(&s, 10.0), Err(KineticError::Cfl { .. })));
    }
}
