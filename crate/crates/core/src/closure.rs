//! Interspecies closure: mixture velocities and temperatures of the cross
//! attractors `M_12`, `M_21`, the total-energy constraint they satisfy, and the
//! region of `(delta, gamma)` in which every closure temperature stays positive.
//!
//! Everything here is a pure function of its arguments.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{KineticError, Result};

/// Per-species physical constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesParams {
    pub mass: f64,
    /// Number of internal (rotational/vibrational) degrees of freedom `l_k`.
    pub dof_internal: usize,
    /// Number of translational degrees of freedom `d`, shared by both species.
    pub dof_translational: usize,
    /// Self-collision frequency `nu_kk` (per unit density).
    pub nu_self: f64,
    /// Interspecies collision frequency `nu_kj` (per unit density of the partner).
    pub nu_cross: f64,
    /// ES mixing parameter `mu_k`.
    pub es_parameter: f64,
    /// Rotational collision number `Z_r^k`.
    pub z_rot: f64,
}

impl SpeciesParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KineticError::Argument(msg));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if self.dof_translational == 0 {
            return bad("translational dimension must be at least 1".into());
        }
        if !(self.nu_self > 0.0 && self.nu_self.is_finite()) {
            return bad(format!("nu_self must be positive, got {}", self.nu_self));
        }
        if !(self.nu_cross >= 0.0 && self.nu_cross.is_finite()) {
            return bad(format!("nu_cross must be non-negative, got {}", self.nu_cross));
        }
        if !(self.z_rot > 0.0 && self.z_rot.is_finite()) {
            return bad(format!("z_rot must be positive, got {}", self.z_rot));
        }
        let (lo, hi) = es_parameter_range(self.dof_translational);
        if !(self.es_parameter >= lo && self.es_parameter <= hi) {
            return bad(format!(
                "es_parameter {} outside [{}, {}]",
                self.es_parameter, lo, hi
            ));
        }
        Ok(())
    }

    /// Weight `z_k = Z_r d / (d + l)` of the extended-Maxwellian term in the entropy.
    pub fn entropy_weight(&self) -> f64 {
        let d = self.dof_translational as f64;
        self.z_rot * d / (d + self.dof_internal as f64)
    }
}

/// Admissible range of the ES parameter, `[-1/(d-1), 1]` for `d > 1`.
pub fn es_parameter_range(d: usize) -> (f64, f64) {
    if d > 1 {
        (-1.0 / (d as f64 - 1.0), 1.0)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Free parameters of the interspecies closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureCoupling {
    /// Ratio `nu_12 / nu_21`.
    pub epsilon: f64,
    /// Weight of `u_1` in `u_12`.
    pub delta: f64,
    /// Weight of `Lambda_1` in `Lambda_12`.
    pub alpha: f64,
    /// Coefficient of `|u_1 - u_2|^2` in `Lambda_12`.
    pub gamma: f64,
}

/// A single reason why a coupling/species combination is inadmissible.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosureViolation {
    Species(usize, String),
    DimensionMismatch(usize, usize),
    EpsilonNonPositive(f64),
    FrequencyRatio { nu_12: f64, nu_21: f64, epsilon: f64 },
    EpsilonInternalWeight(f64),
    AlphaOutOfRange(f64),
    GammaNegative(f64),
    DeltaOutOfInterval { delta: f64, low: f64, high: f64 },
    GammaAboveBound { gamma: f64, bound: f64 },
    CrossLambdaWeight(f64),
}

impl fmt::Display for ClosureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Species(k, msg) => write!(f, "species{}: {}", k + 1, msg),
            Self::DimensionMismatch(a, b) => {
                write!(f, "species disagree on translational dimension ({a} vs {b})")
            }
            Self::EpsilonNonPositive(e) => write!(f, "epsilon must be positive, got {e}"),
            Self::FrequencyRatio { nu_12, nu_21, epsilon } => write!(
                f,
                "collision frequencies must satisfy nu_12 = epsilon * nu_21 (nu_12 = {nu_12}, nu_21 = {nu_21}, epsilon = {epsilon})"
            ),
            Self::EpsilonInternalWeight(w) => write!(
                f,
                "l1/(l1+l2) * epsilon = {w} must lie in (0, 1]; swap the species labels and invert epsilon"
            ),
            Self::AlphaOutOfRange(a) => write!(f, "alpha = {a} must lie in [0, 1]"),
            Self::GammaNegative(g) => write!(f, "gamma = {g} must be non-negative"),
            Self::DeltaOutOfInterval { delta, low, high } => write!(
                f,
                "delta = {delta} outside the admissible delta interval [{low}, {high}] required for a non-negative gamma bound"
            ),
            Self::GammaAboveBound { gamma, bound } => write!(
                f,
                "gamma = {gamma} exceeds the gamma positivity bound {bound}; Lambda_21 may become negative"
            ),
            Self::CrossLambdaWeight(w) => write!(
                f,
                "epsilon * (1 - alpha) = {w} exceeds 1; Lambda_21 loses its convex form and may become negative"
            ),
        }
    }
}

impl MixtureCoupling {
    /// Collects every admissibility violation (not just the first).
    pub fn violations(&self, species: &[SpeciesParams; 2]) -> Vec<ClosureViolation> {
        let mut out = Vec::new();
        for (k, s) in species.iter().enumerate() {
            if let Err(e) = s.validate() {
                out.push(ClosureViolation::Species(k, e.to_string()));
            }
        }
        let (d1, d2) = (species[0].dof_translational, species[1].dof_translational);
        if d1 != d2 {
            out.push(ClosureViolation::DimensionMismatch(d1, d2));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            out.push(ClosureViolation::EpsilonNonPositive(self.epsilon));
            return out;
        }
        let (nu_12, nu_21) = (species[0].nu_cross, species[1].nu_cross);
        let scale = nu_12.abs().max(nu_21.abs()).max(f64::MIN_POSITIVE);
        if (nu_12 - self.epsilon * nu_21).abs() > 1e-12 * scale {
            out.push(ClosureViolation::FrequencyRatio {
                nu_12,
                nu_21,
                epsilon: self.epsilon,
            });
        }
        let (l1, l2) = (species[0].dof_internal, species[1].dof_internal);
        if l1 + l2 > 0 {
            let w = l1 as f64 / (l1 + l2) as f64 * self.epsilon;
            if w > 1.0 {
                out.push(ClosureViolation::EpsilonInternalWeight(w));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            out.push(ClosureViolation::AlphaOutOfRange(self.alpha));
        }
        if !(self.gamma >= 0.0) {
            out.push(ClosureViolation::GammaNegative(self.gamma));
        }
        let (m1, m2) = (species[0].mass, species[1].mass);
        if m1 > 0.0 && m2 > 0.0 {
            let (low, high) = delta_admissible_interval(m1, m2, self.epsilon);
            if !(self.delta >= low && self.delta <= high) {
                out.push(ClosureViolation::DeltaOutOfInterval {
                    delta: self.delta,
                    low,
                    high,
                });
            } else {
                let bound = gamma_bound(m1, m2, self.epsilon, self.delta, d1).value;
                if self.gamma > bound * (1.0 + 1e-14) + f64::MIN_POSITIVE {
                    out.push(ClosureViolation::GammaAboveBound {
                        gamma: self.gamma,
                        bound,
                    });
                }
            }
        }
        let w = self.epsilon * (1.0 - self.alpha);
        if w > 1.0 + 1e-15 {
            out.push(ClosureViolation::CrossLambdaWeight(w));
        }
        out
    }

    pub fn validate(&self, species: &[SpeciesParams; 2]) -> Result<()> {
        let v = self.violations(species);
        if v.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            Err(KineticError::Argument(msg.join("; ")))
        }
    }

    /// Resolves `gamma` to the positivity bound (the `gamma = max` setting).
    pub fn with_max_gamma(mut self, species: &[SpeciesParams; 2]) -> Self {
        self.gamma = gamma_bound(
            species[0].mass,
            species[1].mass,
            self.epsilon,
            self.delta,
            species[0].dof_translational,
        )
        .value
        .max(0.0);
        self
    }
}

/// Macroscopic moments of one species' distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroMoments {
    /// Number density.
    pub n: f64,
    /// Mean velocity.
    pub u: Vec<f64>,
    /// Translational temperature.
    pub t_tr: f64,
    /// Internal temperature; zero when the species has no internal degrees of freedom.
    pub t_rot: f64,
    /// Pressure tensor `∫ m (v-u)⊗(v-u) f`.
    pub p: DMatrix<f64>,
    /// Mean internal velocity `η̄`.
    pub eta_mean: Vec<f64>,
}

impl MacroMoments {
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn p_over_n(&self) -> DMatrix<f64> {
        &self.p / self.n
    }

    /// Isotropic Maxwellian moments (used for initial data and tests).
    pub fn isotropic(n: f64, u: Vec<f64>, t_tr: f64, t_rot: f64, l: usize) -> Self {
        let d = u.len();
        Self {
            n,
            p: DMatrix::identity(d, d) * (n * t_tr),
            u,
            t_tr,
            t_rot,
            eta_mean: vec![0.0; l],
        }
    }
}

/// Species moments together with the relaxed temperatures `Lambda_k`, `Theta_k`
/// that enter the attractors.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedState {
    pub moments: MacroMoments,
    pub lambda: f64,
    pub theta: f64,
}

impl RelaxedState {
    /// Builds the state from `Lambda_k`, deriving `Theta_k` from the
    /// internal-energy constraint. For `l = 0` the constraint forces
    /// `Lambda = T^t`, and `Theta` is set equal to it.
    pub fn from_lambda(moments: MacroMoments, lambda: f64, l: usize) -> Result<Self> {
        let d = moments.dim();
        if l == 0 {
            let t = moments.t_tr;
            return Ok(Self {
                moments,
                lambda: t,
                theta: t,
            });
        }
        let theta = crate::grid::theta_from_lambda(moments.t_tr, moments.t_rot, lambda, d, l)?;
        Ok(Self {
            moments,
            lambda,
            theta,
        })
    }
}

/// Parameters of the two interspecies attractors.
#[derive(Debug, Clone, PartialEq)]
pub struct InterspeciesState {
    pub n12: f64,
    pub n21: f64,
    pub u12: Vec<f64>,
    pub u21: Vec<f64>,
    pub lambda12: f64,
    pub lambda21: f64,
    pub theta12: f64,
    pub theta21: f64,
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(KineticError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `u_12 = delta u_1 + (1 - delta) u_2`.
pub fn mixture_velocity_12(u1: &[f64], u2: &[f64], delta: f64) -> Result<Vec<f64>> {
    check_same_len(u1, u2)?;
    Ok(u1
        .iter()
        .zip(u2)
        .map(|(a, b)| delta * a + (1.0 - delta) * b)
        .collect())
}

/// `u_21 = u_2 - (m_1/m_2) epsilon (1 - delta) (u_2 - u_1)`, the choice that
/// conserves total momentum.
pub fn mixture_velocity_21(
    u1: &[f64],
    u2: &[f64],
    delta: f64,
    epsilon: f64,
    m1: f64,
    m2: f64,
) -> Result<Vec<f64>> {
    check_same_len(u1, u2)?;
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(KineticError::Argument(format!(
            "masses must be positive (m1 = {m1}, m2 = {m2})"
        )));
    }
    let c = m1 / m2 * epsilon * (1.0 - delta);
    Ok(u1.iter().zip(u2).map(|(a, b)| b - c * (b - a)).collect())
}

/// `Lambda_12 = alpha Lambda_1 + (1 - alpha) Lambda_2 + gamma |u_1 - u_2|^2`.
pub fn lambda_12(lambda: [f64; 2], du_sq: f64, coupling: &MixtureCoupling) -> f64 {
    coupling.alpha * lambda[0] + (1.0 - coupling.alpha) * lambda[1] + coupling.gamma * du_sq
}

/// `Theta_12 = (l_1 Theta_1 + l_2 Theta_2) / (l_1 + l_2)`.
pub fn theta_12(theta: [f64; 2], l: [usize; 2]) -> Result<f64> {
    let total = l[0] + l[1];
    if total == 0 {
        return Err(KineticError::DegenerateDof);
    }
    Ok((l[0] as f64 * theta[0] + l[1] as f64 * theta[1]) / total as f64)
}

/// `(Lambda_12, Theta_12)`.
pub fn mixture_temperatures_12(
    lambda: [f64; 2],
    theta: [f64; 2],
    du_sq: f64,
    coupling: &MixtureCoupling,
    l: [usize; 2],
) -> Result<(f64, f64)> {
    Ok((lambda_12(lambda, du_sq, coupling), theta_12(theta, l)?))
}

/// Coefficient of `|u_1 - u_2|^2` in `Lambda_21`.
fn lambda21_velocity_coefficient(coupling: &MixtureCoupling, m1: f64, m2: f64, d: usize) -> f64 {
    let MixtureCoupling {
        epsilon: eps,
        delta,
        gamma,
        ..
    } = *coupling;
    eps * m1 * (1.0 - delta) * (m1 / m2 * eps * (delta - 1.0) + delta + 1.0) / d as f64
        - eps * gamma
}

/// Internal weight `epsilon l_1 / (l_1 + l_2)` of `Theta_1` in `Theta_21`.
fn theta21_weight(coupling: &MixtureCoupling, l: [usize; 2]) -> f64 {
    let total = l[0] + l[1];
    if total == 0 {
        0.0
    } else {
        coupling.epsilon * l[0] as f64 / total as f64
    }
}

/// `(Lambda_21, Theta_21)` under the symmetric split of the energy constraint.
///
/// When species 1 is monatomic, `Theta_21 = Theta_2` exactly.
pub fn mixture_temperatures_21(
    lambda: [f64; 2],
    theta: [f64; 2],
    du_sq: f64,
    coupling: &MixtureCoupling,
    species: &[SpeciesParams; 2],
) -> Result<(f64, f64)> {
    let (m1, m2) = (species[0].mass, species[1].mass);
    let d = species[0].dof_translational;
    let l = [species[0].dof_internal, species[1].dof_internal];
    let w = coupling.epsilon * (1.0 - coupling.alpha);
    let lambda21 = w * lambda[0]
        + (1.0 - w) * lambda[1]
        + lambda21_velocity_coefficient(coupling, m1, m2, d) * du_sq;
    if !(lambda21 > 0.0) {
        return Err(KineticError::Positivity {
            quantity: "Lambda_21",
            value: lambda21,
            hint: "gamma must not exceed the gamma positivity bound",
        });
    }
    let theta21 = if l[0] == 0 {
        theta[1]
    } else {
        let wt = theta21_weight(coupling, l);
        (1.0 - wt) * theta[1] + wt * theta[0]
    };
    Ok((lambda21, theta21))
}

/// Upper bound on gamma that keeps `Lambda_21` positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBound {
    pub value: f64,
    /// `false` when delta lies outside the admissible interval (the bound is then negative).
    pub in_region: bool,
}

/// `(m_1/d)(1 - delta)[(1 + (m_1/m_2) eps) delta + 1 - (m_1/m_2) eps]`.
///
/// The formula is applied for every `d`; callers flag `d != 3` runs.
pub fn gamma_bound(m1: f64, m2: f64, epsilon: f64, delta: f64, d: usize) -> GammaBound {
    let r = m1 / m2 * epsilon;
    let value = m1 / d as f64 * (1.0 - delta) * ((1.0 + r) * delta + 1.0 - r);
    let (low, high) = delta_admissible_interval(m1, m2, epsilon);
    GammaBound {
        value,
        in_region: delta >= low && delta <= high,
    }
}

/// Interval of delta on which the gamma bound is non-negative.
pub fn delta_admissible_interval(m1: f64, m2: f64, epsilon: f64) -> (f64, f64) {
    let r = m1 / m2 * epsilon;
    ((r - 1.0) / (1.0 + r), 1.0)
}

impl InterspeciesState {
    pub fn compute(
        states: &[RelaxedState; 2],
        coupling: &MixtureCoupling,
        species: &[SpeciesParams; 2],
    ) -> Result<Self> {
        let (a, b) = (&states[0], &states[1]);
        let u1 = &a.moments.u;
        let u2 = &b.moments.u;
        let u12 = mixture_velocity_12(u1, u2, coupling.delta)?;
        let u21 = mixture_velocity_21(
            u1,
            u2,
            coupling.delta,
            coupling.epsilon,
            species[0].mass,
            species[1].mass,
        )?;
        let du_sq = dist_sq(u1, u2);
        let lambda = [a.lambda, b.lambda];
        let theta = [a.theta, b.theta];
        let l = [species[0].dof_internal, species[1].dof_internal];
        let lambda12 = lambda_12(lambda, du_sq, coupling);
        let theta12 = match theta_12(theta, l) {
            Ok(t) => t,
            // Neither attractor carries internal variables; the value is never used.
            Err(KineticError::DegenerateDof) => theta[0],
            Err(e) => return Err(e),
        };
        let (lambda21, theta21) = mixture_temperatures_21(lambda, theta, du_sq, coupling, species)?;
        if !(lambda12 > 0.0) {
            return Err(KineticError::Positivity {
                quantity: "Lambda_12",
                value: lambda12,
                hint: "species temperatures must be positive",
            });
        }
        Ok(Self {
            n12: a.moments.n,
            n21: b.moments.n,
            u12,
            u21,
            lambda12,
            lambda21,
            theta12,
            theta21,
        })
    }

    /// The eight closure temperatures `Lambda_1, Lambda_2, Theta_1, Theta_2,
    /// Lambda_12, Theta_12, Lambda_21, Theta_21`.
    pub fn temperatures(&self, states: &[RelaxedState; 2]) -> [f64; 8] {
        [
            states[0].lambda,
            states[1].lambda,
            states[0].theta,
            states[1].theta,
            self.lambda12,
            self.theta12,
            self.lambda21,
            self.theta21,
        ]
    }
}

/// Right-hand side of the energy constraint on `Lambda_21 + (l_2/d) Theta_21`,
/// returned term by term.
fn energy_constraint_terms(
    states: &[RelaxedState; 2],
    coupling: &MixtureCoupling,
    species: &[SpeciesParams; 2],
) -> [f64; 5] {
    let d = species[0].dof_translational as f64;
    let (l1, l2) = (
        species[0].dof_internal as f64,
        species[1].dof_internal as f64,
    );
    let eps = coupling.epsilon;
    let du_sq = dist_sq(&states[0].moments.u, &states[1].moments.u);
    let c = lambda21_velocity_coefficient(
        coupling,
        species[0].mass,
        species[1].mass,
        species[0].dof_translational,
    );
    let harmonic = if l1 + l2 > 0.0 { l1 * l2 / (l1 + l2) } else { 0.0 };
    [
        c * du_sq,
        eps * (1.0 - coupling.alpha) * states[0].lambda,
        (1.0 - eps * (1.0 - coupling.alpha)) * states[1].lambda,
        eps * harmonic * states[0].theta / d,
        (l2 - eps * harmonic) * states[1].theta / d,
    ]
}

/// `|(Lambda_21 + (l_2/d) Theta_21) - RHS|` relative to the largest term involved.
pub fn energy_constraint_residual(
    inter: &InterspeciesState,
    states: &[RelaxedState; 2],
    coupling: &MixtureCoupling,
    species: &[SpeciesParams; 2],
) -> f64 {
    let d = species[0].dof_translational as f64;
    let l2 = species[1].dof_internal as f64;
    let terms = energy_constraint_terms(states, coupling, species);
    let lhs = [inter.lambda21, l2 / d * inter.theta21];
    let rhs: f64 = terms.iter().sum();
    let scale = terms
        .iter()
        .chain(lhs.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    ((lhs[0] + lhs[1]) - rhs).abs() / scale
}

/// Momentum and energy exchanged through the interspecies collision terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeFluxes {
    /// Energy gained by species 1 from its interspecies term.
    pub energy_12: f64,
    /// Energy gained by species 2 from its interspecies term.
    pub energy_21: f64,
    pub momentum_12: Vec<f64>,
    pub momentum_21: Vec<f64>,
    /// Largest magnitude among the summed contributions, for relative checks.
    pub energy_scale: f64,
    pub momentum_scale: f64,
}

impl ExchangeFluxes {
    /// `|F_E12 + F_E21|` relative to the flux magnitudes.
    pub fn energy_residual(&self) -> f64 {
        (self.energy_12 + self.energy_21).abs() / self.energy_scale.max(f64::MIN_POSITIVE)
    }

    pub fn momentum_residual(&self) -> f64 {
        let s: f64 = self
            .momentum_12
            .iter()
            .zip(&self.momentum_21)
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max);
        s / self.momentum_scale.max(f64::MIN_POSITIVE)
    }
}

/// Moments of `nu_kj n_j (M_kj - f_k)` weighted by `m_k v` and
/// `m_k (|v|^2 + |eta|^2)/2`, computed from the attractor parameters and the
/// species moments (`T^t`, `T^r`).
pub fn exchange_fluxes(
    states: &[RelaxedState; 2],
    coupling: &MixtureCoupling,
    species: &[SpeciesParams; 2],
) -> Result<ExchangeFluxes> {
    let inter = InterspeciesState::compute(states, coupling, species)?;
    let d = species[0].dof_translational as f64;
    let targets = [
        (&inter.u12, inter.lambda12, inter.theta12),
        (&inter.u21, inter.lambda21, inter.theta21),
    ];
    let mut energy = [0.0; 2];
    let mut momentum: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut energy_scale = 0.0_f64;
    let mut momentum_scale = 0.0_f64;
    for k in 0..2 {
        let j = 1 - k;
        let mom = &states[k].moments;
        let m = species[k].mass;
        let l = species[k].dof_internal as f64;
        let rate = species[k].nu_cross * states[j].moments.n * mom.n;
        let (u_target, lambda_t, theta_t) = targets[k];
        let kin_target: f64 = u_target.iter().map(|x| x * x).sum::<f64>();
        let kin_self: f64 = mom.u.iter().map(|x| x * x).sum::<f64>();
        let parts = [
            0.5 * m * kin_target,
            -0.5 * m * kin_self,
            0.5 * d * lambda_t,
            -0.5 * d * mom.t_tr,
            0.5 * l * theta_t,
            -0.5 * l * mom.t_rot,
        ];
        energy[k] = rate * parts.iter().sum::<f64>();
        energy_scale = parts
            .iter()
            .fold(energy_scale, |s, p| s.max((rate * p).abs()));
        momentum[k] = u_target
            .iter()
            .zip(&mom.u)
            .map(|(ut, uk)| rate * m * (ut - uk))
            .collect();
        momentum_scale = u_target
            .iter()
            .chain(&mom.u)
            .fold(momentum_scale, |s, x| s.max((rate * m * x).abs()));
    }
    let [m12, m21] = momentum;
    Ok(ExchangeFluxes {
        energy_12: energy[0],
        energy_21: energy[1],
        momentum_12: m12,
        momentum_21: m21,
        energy_scale,
        momentum_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn species(m: f64, l: usize, d: usize) -> SpeciesParams {
        SpeciesParams {
            mass: m,
            dof_internal: l,
            dof_translational: d,
            nu_self: 1.0,
            nu_cross: 1.0,
            es_parameter: 0.0,
            z_rot: 1.0,
        }
    }

    fn coupling(eps: f64, delta: f64, alpha: f64, gamma: f64) -> MixtureCoupling {
        MixtureCoupling {
            epsilon: eps,
            delta,
            alpha,
            gamma,
        }
    }

    fn relaxed(n: f64, u: Vec<f64>, t_tr: f64, t_rot: f64, lambda: f64, l: usize) -> RelaxedState {
        RelaxedState::from_lambda(MacroMoments::isotropic(n, u, t_tr, t_rot, l), lambda, l).unwrap()
    }

    #[test]
    fn velocity_12_examples() {
        let u = mixture_velocity_12(&[1.0, 0.0, 0.0], &[5.0, 5.0, 5.0], 1.0).unwrap();
        assert_eq!(u, vec![1.0, 0.0, 0.0]);
        let u = mixture_velocity_12(&[2.0, 0.0, 0.0], &[2.0, 0.0, 0.0], 0.37).unwrap();
        assert_eq!(u, vec![2.0, 0.0, 0.0]);
        let u = mixture_velocity_12(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(u, vec![0.5, 0.0, 0.0]);
        assert!(matches!(
            mixture_velocity_12(&[1.0], &[1.0, 2.0], 0.5),
            Err(KineticError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn velocity_21_examples() {
        let u2 = [0.3, -1.0, 2.0];
        assert_eq!(
            mixture_velocity_21(&u2, &u2, 0.2, 1.5, 1.0, 3.0).unwrap(),
            u2.to_vec()
        );
        assert_eq!(
            mixture_velocity_21(&[9.0, 9.0, 9.0], &u2, 1.0, 1.5, 1.0, 3.0).unwrap(),
            u2.to_vec()
        );
        let u = mixture_velocity_21(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], 0.5, 1.0, 1.0, 2.0).unwrap();
        assert!((u[0] - 0.25).abs() < 1e-15 && u[1] == 0.0 && u[2] == 0.0);
        assert!(mixture_velocity_21(&[1.0], &[0.0], 0.5, 1.0, 0.0, 2.0).is_err());
        assert!(mixture_velocity_21(&[1.0], &[0.0], 0.5, 1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn temperatures_12_examples() {
        let c = coupling(1.0, 0.5, 1.0, 0.0);
        assert_eq!(lambda_12([3.0, 7.0], 2.0, &c), 3.0);
        let (_, th) = mixture_temperatures_12([1.0, 1.0], [300.0, 400.0], 0.0, &c, [2, 2]).unwrap();
        assert_eq!(th, 350.0);
        let c = coupling(1.0, 0.5, 0.25, 0.1);
        let (lam, _) = mixture_temperatures_12([1.0, 2.0], [1.0, 1.0], 4.0, &c, [1, 1]).unwrap();
        assert!((lam - 2.15).abs() < 1e-14);
        assert_eq!(
            mixture_temperatures_12([1.0, 2.0], [1.0, 1.0], 4.0, &c, [0, 0]),
            Err(KineticError::DegenerateDof)
        );
    }

    #[test]
    fn temperatures_21_examples() {
        let sp = [species(1.0, 2, 3), species(1.0, 2, 3)];
        let c = coupling(1.0, 0.3, 0.4, 0.05);
        let (l21, t21) = mixture_temperatures_21([1.7, 1.7], [0.9, 0.9], 0.0, &c, &sp).unwrap();
        assert!((l21 - 1.7).abs() < 1e-15 && (t21 - 0.9).abs() < 1e-15);

        let c = coupling(1.0, 0.5, 0.5, 0.0);
        let (l21, _) = mixture_temperatures_21([1.0, 2.0], [1.0, 1.0], 1.0, &c, &sp).unwrap();
        assert!((l21 - (1.5 + 1.0 / 6.0)).abs() < 1e-14, "{l21}");

        let (_, t21) = mixture_temperatures_21([1.0, 1.0], [1.0, 3.0], 0.0, &c, &sp).unwrap();
        assert!((t21 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lambda21_negative_is_reported() {
        let sp = [species(1.0, 2, 3), species(1.0, 2, 3)];
        let c = coupling(1.0, 0.5, 0.5, 10.0);
        let err = mixture_temperatures_21([0.1, 0.1], [0.1, 0.1], 4.0, &c, &sp).unwrap_err();
        assert!(matches!(err, KineticError::Positivity { quantity: "Lambda_21", .. }));
    }

    #[test]
    fn mono_species_theta21_is_theta2() {
        let sp = [species(1.0, 0, 2), species(2.0, 2, 2)];
        let c = coupling(1.0, 0.3, 0.2, 0.0);
        let (_, t21) = mixture_temperatures_21([1.3, 0.8], [1.3, 0.6], 0.2, &c, &sp).unwrap();
        assert_eq!(t21, 0.6);
    }

    #[test]
    fn gamma_bound_examples() {
        assert_eq!(gamma_bound(1.3, 2.0, 0.7, 1.0, 3).value, 0.0);
        assert_eq!(gamma_bound(1.0, 1.0, 1.0, 0.0, 3).value, 0.0);
        assert!((gamma_bound(1.0, 1.0, 1.0, 0.5, 3).value - 1.0 / 6.0).abs() < 1e-15);
        let outside = gamma_bound(1.0, 1.0, 1.0, -0.5, 3);
        assert!(outside.value < 0.0 && !outside.in_region);
    }

    #[test]
    fn delta_interval_examples() {
        assert_eq!(delta_admissible_interval(1.0, 1.0, 1.0), (0.0, 1.0));
        let (lo, hi) = delta_admissible_interval(3.0, 1.0, 1.0);
        assert!((lo - 0.5).abs() < 1e-15 && hi == 1.0);
        let (lo, _) = delta_admissible_interval(1e-12, 1.0, 1.0);
        assert!((lo + 1.0).abs() < 1e-11);
    }

    #[test]
    fn residual_zero_for_closure_and_affine_in_lambda21() {
        let sp = [species(1.0, 2, 3), species(2.5, 3, 3)];
        let c = coupling(0.8, 0.4, 0.3, 0.0).with_max_gamma(&sp);
        let st = [
            relaxed(1.0, vec![0.3, 0.0, -0.2], 1.2, 0.9, 1.1, 2),
            relaxed(0.7, vec![-0.1, 0.4, 0.0], 0.7, 1.4, 0.8, 3),
        ];
        let mut inter = InterspeciesState::compute(&st, &c, &sp).unwrap();
        let r0 = energy_constraint_residual(&inter, &st, &c, &sp);
        assert!(r0 <= 1e-13, "{r0}");
        let terms = energy_constraint_terms(&st, &c, &sp);
        let scale = terms
            .iter()
            .chain([inter.lambda21 + 0.1, 1.0 * inter.theta21].iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        inter.lambda21 += 0.1;
        let r1 = energy_constraint_residual(&inter, &st, &c, &sp) * scale;
        assert!((r1 - 0.1).abs() < 1e-12, "{r1}");
    }

    #[test]
    fn fluxes_vanish_at_equilibrium() {
        let sp = [species(1.0, 2, 2), species(3.0, 2, 2)];
        let c = coupling(1.0, 0.2, 0.3, 0.01);
        let st = [
            relaxed(1.0, vec![0.2, 0.1], 1.5, 1.5, 1.5, 2),
            relaxed(2.0, vec![0.2, 0.1], 1.5, 1.5, 1.5, 2),
        ];
        let fl = exchange_fluxes(&st, &c, &sp).unwrap();
        assert!(fl.energy_12.abs() < 1e-14 && fl.energy_21.abs() < 1e-14);
        assert!(fl.momentum_12.iter().chain(&fl.momentum_21).all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn hot_species_loses_energy() {
        let sp = [species(1.0, 2, 3), species(1.0, 2, 3)];
        let c = coupling(1.0, 0.5, 0.5, 0.0);
        let st = [
            relaxed(1.0, vec![0.0; 3], 2.0, 1.0, 2.0, 2),
            relaxed(1.0, vec![0.0; 3], 1.0, 1.0, 1.0, 2),
        ];
        // Theta_1 = Theta_2 = 1 by construction.
        assert!((st[0].theta - 1.0).abs() < 1e-15);
        let fl = exchange_fluxes(&st, &c, &sp).unwrap();
        assert!(fl.energy_12 < 0.0 && fl.energy_21 > 0.0);
        assert!(fl.energy_residual() < 1e-14);
    }

    #[test]
    fn violations_are_collected() {
        let sp = [species(1.0, 2, 3), species(1.0, 2, 3)];
        let c = coupling(1.0, -0.5, 1.5, 1.0);
        let v = c.violations(&sp);
        assert!(v.iter().any(|x| matches!(x, ClosureViolation::DeltaOutOfInterval { .. })));
        assert!(v.iter().any(|x| matches!(x, ClosureViolation::AlphaOutOfRange(_))));
        assert!(c.validate(&sp).unwrap_err().to_string().contains("delta interval"));
        let ok = coupling(1.0, 0.5, 0.5, 0.0).with_max_gamma(&sp);
        assert!(ok.violations(&sp).is_empty(), "{:?}", ok.violations(&sp));
        let over = MixtureCoupling {
            gamma: ok.gamma * 1.01,
            ..ok
        };
        assert!(matches!(
            over.violations(&sp)[..],
            [ClosureViolation::GammaAboveBound { .. }]
        ));
    }
}
