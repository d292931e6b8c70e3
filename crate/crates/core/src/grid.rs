//! Midpoint lattices over velocity and internal-energy space, moment
//! extraction and projection of Gaussian attractors.

use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::attractors::GaussianSpec;
use crate::closure::MacroMoments;
use crate::error::{KineticError, Result};

/// Minimum number of standard deviations a grid should cover around a mean.
pub const COVERAGE_SIGMAS: f64 = 6.0;

pub const MIN_POINTS_PER_AXIS: usize = 8;

/// Uniform midpoint axis centered at `center`.
///
/// Node `i` sits at `center + (i + 1/2 - N/2) h`, so nodes of an axis centered
/// at zero come in exact `±` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub center: f64,
    pub h: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(center: f64, half_width: f64, n: usize) -> Result<Self> {
        if n < MIN_POINTS_PER_AXIS {
            return Err(KineticError::Argument(format!(
                "axis needs at least {MIN_POINTS_PER_AXIS} points, got {n}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite() && center.is_finite()) {
            return Err(KineticError::Argument(format!(
                "axis bounds must be finite with positive width (center {center}, half width {half_width})"
            )));
        }
        Ok(Self {
            center,
            h: 2.0 * half_width / n as f64,
            n,
        })
    }

    pub fn node(&self, i: usize) -> f64 {
        self.center + (i as f64 + 0.5 - 0.5 * self.n as f64) * self.h
    }

    pub fn lo(&self) -> f64 {
        self.center - 0.5 * self.n as f64 * self.h
    }

    pub fn hi(&self) -> f64 {
        self.center + 0.5 * self.n as f64 * self.h
    }
}

/// Tensor-product midpoint grid over `v`. The first axis varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    pub axes: Vec<Axis>,
    nodes: Vec<f64>,
    pub weight: f64,
}

fn product_nodes(axes: &[Axis]) -> Vec<f64> {
    let d = axes.len();
    let total: usize = axes.iter().map(|a| a.n).product();
    let mut nodes = Vec::with_capacity(total * d);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        for (a, &i) in axes.iter().zip(&idx) {
            nodes.push(a.node(i));
        }
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].n {
                break;
            }
            idx[k] = 0;
        }
    }
    nodes
}

impl VelocityGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(KineticError::Argument(format!(
                "velocity dimension must be 1..=3, got {}",
                axes.len()
            )));
        }
        let weight = axes.iter().map(|a| a.h).product();
        Ok(Self {
            nodes: product_nodes(&axes),
            axes,
            weight,
        })
    }

    /// Same point count and half width on every axis.
    pub fn uniform(center: &[f64], half_width: &[f64], n: usize) -> Result<Self> {
        if center.len() != half_width.len() {
            return Err(KineticError::DimensionMismatch {
                expected: center.len(),
                got: half_width.len(),
            });
        }
        let axes = center
            .iter()
            .zip(half_width)
            .map(|(&c, &w)| Axis::new(c, w, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes[i * d..(i + 1) * d]
    }

    /// Largest `|v_x|` on the grid.
    pub fn max_abs_vx(&self) -> f64 {
        let a = &self.axes[0];
        a.lo().abs().max(a.hi().abs())
    }
}

/// Midpoint grid over `eta`, symmetric about zero. For `l = 0` it is a single
/// node of weight one, so products with it are the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalGrid {
    pub dim: usize,
    pub axis: Option<Axis>,
    nodes: Vec<f64>,
    eta_sq: Vec<f64>,
    mirror: Vec<usize>,
    pub weight: f64,
}

impl InternalGrid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if dim == 0 {
            return Ok(Self::trivial());
        }
        let axis = Axis::new(0.0, half_width, n)?;
        let axes = vec![axis.clone(); dim];
        let nodes = product_nodes(&axes);
        let total = nodes.len() / dim;
        let eta_sq = (0..total)
            .map(|i| nodes[i * dim..(i + 1) * dim].iter().map(|x| x * x).sum())
            .collect();
        // Mirror of a multi-index (i_1..i_l) is (n-1-i_1, .., n-1-i_l); in the
        // flattened ordering that is the index reversed.
        let mirror = (0..total).map(|i| total - 1 - i).collect();
        Ok(Self {
            dim,
            weight: axis.h.powi(dim as i32),
            axis: Some(axis),
            nodes,
            eta_sq,
            mirror,
        })
    }

    pub fn trivial() -> Self {
        Self {
            dim: 0,
            axis: None,
            nodes: Vec::new(),
            eta_sq: vec![0.0],
            mirror: vec![0],
            weight: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.eta_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn eta_sq(&self) -> &[f64] {
        &self.eta_sq
    }

    pub fn mirror(&self, i: usize) -> usize {
        self.mirror[i]
    }
}

/// Product of a velocity grid and an internal grid. Flat index `iv * n_eta + ie`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub v: VelocityGrid,
    pub eta: InternalGrid,
}

impl PhaseGrid {
    pub fn new(v: VelocityGrid, eta: InternalGrid) -> Arc<Self> {
        Arc::new(Self { v, eta })
    }

    pub fn len(&self) -> usize {
        self.v.len() * self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn weight(&self) -> f64 {
        self.v.weight * self.eta.weight
    }
}

/// Non-negative grid function for one species.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    pub grid: Arc<PhaseGrid>,
    pub values: Vec<f64>,
    pub species: usize,
}

impl DiscreteDistribution {
    pub fn new(grid: Arc<PhaseGrid>, values: Vec<f64>, species: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KineticError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(x) = values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(KineticError::Argument(format!(
                "distribution values must be finite and non-negative, found {x}"
            )));
        }
        Ok(Self {
            grid,
            values,
            species,
        })
    }

    pub fn mass(&self) -> f64 {
        self.grid.weight() * self.values.iter().sum::<f64>()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `Λ = T^t + (l/d)(T^r - Θ)`.
pub fn lambda_from_theta(t_tr: f64, t_rot: f64, theta: f64, d: usize, l: usize) -> Result<f64> {
    if l == 0 {
        return Ok(t_tr);
    }
    let lambda = t_tr + l as f64 / d as f64 * (t_rot - theta);
    if !(lambda > 0.0) {
        return Err(KineticError::Positivity {
            quantity: "Lambda",
            value: lambda,
            hint: "internal-energy constraint yields a non-positive translational temperature",
        });
    }
    Ok(lambda)
}

/// Inverse of [`lambda_from_theta`]: `Θ = T^r + (d/l)(T^t - Λ)`.
pub fn theta_from_lambda(t_tr: f64, t_rot: f64, lambda: f64, d: usize, l: usize) -> Result<f64> {
    if l == 0 {
        return Ok(lambda);
    }
    let theta = t_rot + d as f64 / l as f64 * (t_tr - lambda);
    if !(theta > 0.0) {
        return Err(KineticError::Positivity {
            quantity: "Theta",
            value: theta,
            hint: "internal-energy constraint yields a non-positive internal temperature",
        });
    }
    Ok(theta)
}

/// Moments from the reduced functions `g = ∫ f dη`, `h = ∫ |η|² f dη`.
pub fn moments_from_reduced(
    v: &VelocityGrid,
    g: &[f64],
    h: &[f64],
    mass: f64,
    l: usize,
) -> Result<MacroMoments> {
    let d = v.dim();
    let w = v.weight;
    let sum: f64 = g.iter().sum();
    let n = w * sum;
    if !(n > 0.0 && n.is_finite()) {
        return Err(KineticError::DegenerateState(format!(
            "discrete density is {n}"
        )));
    }
    let mut u = vec![0.0; d];
    for (i, gi) in g.iter().enumerate() {
        for (a, x) in v.node(i).iter().enumerate() {
            u[a] += x * gi;
        }
    }
    for x in u.iter_mut() {
        *x /= sum;
    }
    let mut p = DMatrix::zeros(d, d);
    let mut c = [0.0_f64; 3];
    for (i, gi) in g.iter().enumerate() {
        for (a, x) in v.node(i).iter().enumerate() {
            c[a] = x - u[a];
        }
        for a in 0..d {
            for b in 0..=a {
                p[(a, b)] += c[a] * c[b] * gi;
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            p[(b, a)] = p[(a, b)];
        }
    }
    p *= mass * w;
    let t_tr = p.trace() / (d as f64 * n);
    let t_rot = if l > 0 {
        mass * w * h.iter().sum::<f64>() / (l as f64 * n)
    } else {
        0.0
    };
    Ok(MacroMoments {
        n,
        u,
        t_tr,
        t_rot,
        p,
        eta_mean: vec![0.0; l],
    })
}

/// `(g, h)` from a full distribution by η-quadrature.
pub fn reduce_values(grid: &PhaseGrid, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let ne = grid.eta.len();
    let we = grid.eta.weight;
    let eta_sq = grid.eta.eta_sq();
    let (g, h): (Vec<f64>, Vec<f64>) = values
        .par_chunks(ne)
        .map(|row| {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for (fv, e2) in row.iter().zip(eta_sq) {
                s += fv;
                s2 += fv * e2;
            }
            (we * s, we * s2)
        })
        .unzip();
    (g, h)
}

/// Discrete moments of a full distribution.
pub fn compute_moments(f: &DiscreteDistribution, mass: f64) -> Result<MacroMoments> {
    let grid = &f.grid;
    let l = grid.eta.dim;
    let (g, h) = reduce_values(grid, &f.values);
    let mut m = moments_from_reduced(&grid.v, &g, &h, mass, l)?;
    if l > 0 {
        // Paired summation: η̄ vanishes bitwise whenever f is η-even.
        let ne = grid.eta.len();
        let mut q = vec![0.0; ne];
        for row in f.values.chunks(ne) {
            for (qi, x) in q.iter_mut().zip(row) {
                *qi += x;
            }
        }
        let mut eta_mean = vec![0.0; l];
        for ie in 0..ne {
            let je = grid.eta.mirror(ie);
            if je <= ie {
                continue;
            }
            let dq = q[ie] - q[je];
            for (a, x) in grid.eta.node(ie).iter().enumerate() {
                eta_mean[a] += x * dq;
            }
        }
        let w = grid.weight();
        for x in eta_mean.iter_mut() {
            *x *= w / m.n;
        }
        m.eta_mean = eta_mean;
    }
    Ok(m)
}

/// Velocity and internal factors of a Gaussian on a grid, each normalized so
/// that its quadrature sum is one. The full projection is `n * pv ⊗ pη`.
pub fn projection_factors(spec: &GaussianSpec, grid: &PhaseGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    if spec.dim() != grid.v.dim() {
        return Err(KineticError::DimensionMismatch {
            expected: grid.v.dim(),
            got: spec.dim(),
        });
    }
    if spec.dof_internal != grid.eta.dim {
        return Err(KineticError::DimensionMismatch {
            expected: grid.eta.dim,
            got: spec.dof_internal,
        });
    }
    let pv = velocity_factor(spec, &grid.v)?;
    let pe = if grid.eta.dim == 0 {
        vec![1.0]
    } else {
        let fac = spec.factor()?;
        let mut pe: Vec<f64> = grid.eta.eta_sq().iter().map(|&e2| fac.internal_part(e2)).collect();
        let se: f64 = pe.iter().sum::<f64>() * grid.eta.weight;
        if !(se > 0.0 && se.is_finite()) {
            return Err(KineticError::Coverage(
                "internal grid misses the Gaussian".into(),
            ));
        }
        pe.iter_mut().for_each(|x| *x /= se);
        pe
    };
    Ok((pv, pe))
}

/// Velocity factor of a Gaussian, normalized to unit quadrature sum.
pub fn velocity_factor(spec: &GaussianSpec, v: &VelocityGrid) -> Result<Vec<f64>> {
    if spec.dim() != v.dim() {
        return Err(KineticError::DimensionMismatch {
            expected: v.dim(),
            got: spec.dim(),
        });
    }
    let fac = spec.factor()?;
    let mut pv: Vec<f64> = (0..v.len())
        .into_par_iter()
        .map(|i| fac.velocity_part(v.node(i)))
        .collect();
    let sv: f64 = pv.iter().sum::<f64>() * v.weight;
    if !(sv > 0.0 && sv.is_finite()) {
        return Err(KineticError::Coverage(format!(
            "velocity grid [{:.3e}, {:.3e}] misses the Gaussian centered at {:?}",
            v.axes[0].lo(),
            v.axes[0].hi(),
            spec.u
        )));
    }
    pv.iter_mut().for_each(|x| *x /= sv);
    Ok(pv)
}

/// Smallest number of standard deviations by which the grid extends beyond the
/// mean of `spec` along any axis (velocity and internal).
pub fn coverage_sigmas(spec: &GaussianSpec, grid: &PhaseGrid) -> f64 {
    let mut worst = f64::INFINITY;
    for (a, axis) in grid.v.axes.iter().enumerate() {
        let s = spec.velocity_cov[(a, a)].max(0.0).sqrt();
        let u = spec.u[a];
        worst = worst.min((u - axis.lo()) / s).min((axis.hi() - u) / s);
    }
    if let Some(axis) = &grid.eta.axis {
        let s = (spec.internal_temp / spec.mass).max(0.0).sqrt();
        worst = worst.min(axis.hi() / s);
    }
    worst
}

/// Outer product `n * pv ⊗ pη` in flat layout.
pub fn outer(n: f64, pv: &[f64], pe: &[f64]) -> Vec<f64> {
    let ne = pe.len();
    let mut out = vec![0.0; pv.len() * ne];
    out.par_chunks_mut(ne).zip(pv.par_iter()).for_each(|(row, &a)| {
        for (o, &b) in row.iter_mut().zip(pe) {
            *o = n * a * b;
        }
    });
    out
}

/// Pointwise evaluation followed by density renormalization, so the discrete
/// particle number equals `spec.n`.
pub fn project_attractor(
    spec: &GaussianSpec,
    grid: &Arc<PhaseGrid>,
    species: usize,
) -> Result<DiscreteDistribution> {
    let cov = coverage_sigmas(spec, grid);
    if cov < COVERAGE_SIGMAS {
        warn!("grid covers only {cov:.2} standard deviations of the projected attractor");
    }
    let (pv, pe) = projection_factors(spec, grid)?;
    DiscreteDistribution::new(grid.clone(), outer(spec.n, &pv, &pe), species)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maxwellian(n: f64, u: Vec<f64>, t_over_m: f64, l: usize, theta: f64) -> GaussianSpec {
        let d = u.len();
        GaussianSpec {
            n,
            u,
            velocity_cov: DMatrix::identity(d, d) * t_over_m,
            internal_temp: theta,
            dof_internal: l,
            mass: 1.0,
        }
    }

    #[test]
    fn axis_nodes_pair_exactly() {
        let a = Axis::new(0.0, 7.3, 16).unwrap();
        for i in 0..16 {
            assert_eq!(a.node(i), -a.node(15 - i));
        }
        assert!(Axis::new(0.0, 1.0, 4).is_err());
    }

    #[test]
    fn moments_of_standard_maxwellian() {
        let v = VelocityGrid::uniform(&[0.0], &[8.0], 128).unwrap();
        let grid = PhaseGrid::new(v, InternalGrid::trivial());
        let spec = maxwellian(1.0, vec![0.0], 1.0, 0, 0.0);
        let fac = spec.factor().unwrap();
        let vals: Vec<f64> = (0..grid.len())
            .map(|i| fac.eval(grid.v.node(i), &[]))
            .collect();
        let f = DiscreteDistribution::new(grid.clone(), vals, 0).unwrap();
        let m = compute_moments(&f, 1.0).unwrap();
        assert!((m.n - 1.0).abs() < 1e-10);
        assert!((m.t_tr - 1.0).abs() < 1e-8);

        let shifted = maxwellian(1.0, vec![1.0], 1.0, 0, 0.0);
        let fac = shifted.factor().unwrap();
        let vals: Vec<f64> = (0..grid.len())
            .map(|i| fac.eval(grid.v.node(i), &[]))
            .collect();
        let f = DiscreteDistribution::new(grid, vals, 0).unwrap();
        let m = compute_moments(&f, 1.0).unwrap();
        assert!((m.u[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eta_mean_vanishes_bitwise() {
        let v = VelocityGrid::uniform(&[0.0], &[6.0], 16).unwrap();
        let eta = InternalGrid::new(2, 11.0, 24).unwrap();
        let grid = PhaseGrid::new(v, eta);
        let spec = maxwellian(1.3, vec![0.4], 0.8, 2, 1.7);
        let f = project_attractor(&spec, &grid, 0).unwrap();
        let m = compute_moments(&f, 1.0).unwrap();
        assert!(m.eta_mean.iter().all(|&x| x == 0.0), "{:?}", m.eta_mean);
        assert!((m.t_rot - 1.7).abs() < 1e-10);
    }

    #[test]
    fn projection_renormalizes_density() {
        let v = VelocityGrid::uniform(&[0.0, 0.0], &[8.0, 8.0], 32).unwrap();
        let grid = PhaseGrid::new(v, InternalGrid::trivial());
        let spec = maxwellian(2.5, vec![0.0, 0.0], 1.0, 0, 0.0);
        let fac = spec.factor().unwrap();
        let raw: f64 = (0..grid.len())
            .map(|i| fac.eval(grid.v.node(i), &[]))
            .sum::<f64>()
            * grid.weight();
        let scale = 2.5 / raw;
        assert!((scale - 1.0).abs() < 1e-8);
        let f = project_attractor(&spec, &grid, 0).unwrap();
        assert!((f.mass() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn far_grid_is_a_coverage_error() {
        let v = VelocityGrid::uniform(&[500.0], &[5.0], 16).unwrap();
        let grid = PhaseGrid::new(v, InternalGrid::trivial());
        let spec = maxwellian(1.0, vec![0.0], 1.0, 0, 0.0);
        assert!(matches!(
            project_attractor(&spec, &grid, 0),
            Err(KineticError::Coverage(_))
        ));
    }

    #[test]
    fn zero_density_is_degenerate() {
        let v = VelocityGrid::uniform(&[0.0], &[5.0], 16).unwrap();
        let grid = PhaseGrid::new(v, InternalGrid::trivial());
        let f = DiscreteDistribution::new(grid, vec![0.0; 16], 0).unwrap();
        assert!(matches!(
            compute_moments(&f, 1.0),
            Err(KineticError::DegenerateState(_))
        ));
    }

    #[test]
    fn lambda_theta_examples() {
        assert_eq!(lambda_from_theta(1.2, 0.7, 0.7, 3, 2).unwrap(), 1.2);
        assert!((lambda_from_theta(1.0, 2.0, 1.0, 3, 2).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(lambda_from_theta(1.4, 0.0, 9.0, 3, 0).unwrap(), 1.4);
        assert!(lambda_from_theta(1.0, 0.0, 5.0, 2, 2).is_err());
        let th = theta_from_lambda(1.0, 2.0, 5.0 / 3.0, 3, 2).unwrap();
        assert!((th - 1.0).abs() < 1e-15);
    }
}
