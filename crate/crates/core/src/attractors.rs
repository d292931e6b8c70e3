//! Gaussian attractors and the tensor temperatures that parameterize them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::closure::{InterspeciesState, MacroMoments, SpeciesParams};
use crate::error::{KineticError, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PIVOT_RTOL: f64 = 1e-13;

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Minimum eigenvalue of a symmetric matrix via the symmetric eigensolver.
///
/// Returns `(min_eigenvalue > 0, min_eigenvalue)`.
pub fn spd_check(m: &DMatrix<f64>) -> Result<(bool, f64)> {
    if !m.is_square() {
        return Err(KineticError::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * max_abs(m).max(1.0) {
        return Err(KineticError::Asymmetric(asym));
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((min > 0.0, min))
}

fn require_spd(m: &DMatrix<f64>) -> Result<()> {
    let (ok, min) = spd_check(m)?;
    if ok {
        Ok(())
    } else {
        Err(KineticError::NotSpd {
            min_eigenvalue: min,
        })
    }
}

/// `Lambda^ES = (1 - mu) Lambda I + mu Lambda^ten`.
pub fn lambda_es(lambda: f64, lambda_ten: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    let d = lambda_ten.nrows();
    let (lo, hi) = crate::closure::es_parameter_range(d);
    if !(mu >= lo && mu <= hi) {
        return Err(KineticError::Argument(format!(
            "es_parameter {mu} outside [{lo}, {hi}]"
        )));
    }
    require_spd(lambda_ten)?;
    let tr = lambda_ten.trace();
    if (tr - d as f64 * lambda).abs() > 1e-10 * tr.abs().max(f64::MIN_POSITIVE) {
        return Err(KineticError::Argument(format!(
            "trace of Lambda_ten ({tr}) must equal d * Lambda ({})",
            d as f64 * lambda
        )));
    }
    Ok(DMatrix::identity(d, d) * ((1.0 - mu) * lambda) + lambda_ten * mu)
}

/// Eigenvalues of `Lambda^ES` from those of `Lambda^ten`:
/// `tau_i = (1 + (d-1) mu)/d * lambda_i + (1 - mu)/d * sum_{j != i} lambda_j`.
pub fn es_eigenvalues(lambda_ten_eigenvalues: &[f64], mu: f64) -> Vec<f64> {
    let d = lambda_ten_eigenvalues.len() as f64;
    let total: f64 = lambda_ten_eigenvalues.iter().sum();
    lambda_ten_eigenvalues
        .iter()
        .map(|&li| (1.0 + (d - 1.0) * mu) / d * li + (1.0 - mu) / d * (total - li))
        .collect()
}

/// Tensor with diagonal `T_equ` and off-diagonal `d/(d+l) (P/n)_ij`.
pub fn t_tensor(t_equ: f64, p_over_n: &DMatrix<f64>, d: usize, l: usize) -> DMatrix<f64> {
    let c = d as f64 / (d + l) as f64;
    DMatrix::from_fn(d, d, |i, j| if i == j { t_equ } else { c * p_over_n[(i, j)] })
}

/// Lower Cholesky factor with a relative pivot threshold.
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub l: DMatrix<f64>,
    pub log_det: f64,
}

impl Cholesky {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d {
            return Err(KineticError::DimensionMismatch {
                expected: d,
                got: a.ncols(),
            });
        }
        let threshold = PIVOT_RTOL * a.trace().abs();
        let mut l = DMatrix::zeros(d, d);
        let mut log_det = 0.0;
        for j in 0..d {
            let mut pivot = a[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot > threshold) {
                return Err(KineticError::Factorization { pivot, threshold });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            log_det += pivot.ln();
            for i in (j + 1)..d {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l, log_det })
    }

    /// `x^T A^{-1} x` by forward substitution.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let d = self.l.nrows();
        let mut y = [0.0_f64; 8];
        let mut y_heap;
        let y: &mut [f64] = if d <= 8 {
            &mut y[..d]
        } else {
            y_heap = vec![0.0; d];
            &mut y_heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
            q += y[i] * y[i];
        }
        q
    }
}

/// Gaussian in `v` times an isotropic Gaussian in `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub n: f64,
    pub u: Vec<f64>,
    /// Velocity covariance (temperature tensor divided by mass).
    pub velocity_cov: DMatrix<f64>,
    /// Internal temperature; ignored when `dof_internal == 0`.
    pub internal_temp: f64,
    pub dof_internal: usize,
    pub mass: f64,
}

impl GaussianSpec {
    /// Attractor with temperature tensor `temp` (divided by the mass internally).
    pub fn from_temperature(
        n: f64,
        u: Vec<f64>,
        temp: &DMatrix<f64>,
        internal_temp: f64,
        species: &SpeciesParams,
    ) -> Self {
        Self {
            n,
            u,
            velocity_cov: temp / species.mass,
            internal_temp,
            dof_internal: species.dof_internal,
            mass: species.mass,
        }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn factor(&self) -> Result<FactoredGaussian> {
        if self.velocity_cov.nrows() != self.dim() {
            return Err(KineticError::DimensionMismatch {
                expected: self.dim(),
                got: self.velocity_cov.nrows(),
            });
        }
        let chol = Cholesky::new(&self.velocity_cov)?;
        let d = self.dim() as f64;
        let log_norm_v = -0.5 * (d * (2.0 * PI).ln() + chol.log_det);
        let (log_norm_eta, eta_coeff) = if self.dof_internal == 0 {
            (0.0, 0.0)
        } else {
            if !(self.internal_temp > 0.0) {
                return Err(KineticError::Positivity {
                    quantity: "internal temperature",
                    value: self.internal_temp,
                    hint: "attractor internal temperature must be positive",
                });
            }
            let var = self.internal_temp / self.mass;
            (
                -0.5 * self.dof_internal as f64 * (2.0 * PI * var).ln(),
                0.5 / var,
            )
        };
        Ok(FactoredGaussian {
            n: self.n,
            u: self.u.clone(),
            chol,
            log_norm_v,
            log_norm_eta,
            eta_coeff,
        })
    }

    pub fn eval(&self, v: &[f64], eta: &[f64]) -> Result<f64> {
        Ok(self.factor()?.eval(v, eta))
    }

    /// Closed-form `∫ G ln G` over the full phase space.
    pub fn entropy(&self) -> Result<f64> {
        let fac = self.factor()?;
        let k = (self.dim() + self.dof_internal) as f64;
        Ok(self.n * self.n.ln() + self.n * (fac.log_norm_v + fac.log_norm_eta) - 0.5 * self.n * k)
    }
}

/// A [`GaussianSpec`] with its covariance factored, split into the `v` and
/// `eta` parts so that product grids can be filled separably.
#[derive(Debug, Clone)]
pub struct FactoredGaussian {
    pub n: f64,
    pub u: Vec<f64>,
    pub chol: Cholesky,
    pub log_norm_v: f64,
    pub log_norm_eta: f64,
    eta_coeff: f64,
}

impl FactoredGaussian {
    /// Normalized velocity density at `v` (integrates to 1 over `v`).
    pub fn velocity_part(&self, v: &[f64]) -> f64 {
        let d = self.u.len();
        let mut x = [0.0_f64; 8];
        let mut heap;
        let x: &mut [f64] = if d <= 8 {
            &mut x[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        for i in 0..d {
            x[i] = v[i] - self.u[i];
        }
        (self.log_norm_v - 0.5 * self.chol.quad_form(x)).exp()
    }

    /// Normalized internal density at a point of squared norm `eta_sq`.
    pub fn internal_part(&self, eta_sq: f64) -> f64 {
        (self.log_norm_eta - self.eta_coeff * eta_sq).exp()
    }

    pub fn eval(&self, v: &[f64], eta: &[f64]) -> f64 {
        let eta_sq: f64 = eta.iter().map(|x| x * x).sum();
        self.n * self.velocity_part(v) * self.internal_part(eta_sq)
    }
}

/// Tensor temperatures of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTemps {
    pub lambda_ten: DMatrix<f64>,
    pub lambda: f64,
    pub theta: f64,
    pub lambda_es: DMatrix<f64>,
    pub t_equ: f64,
    pub t_ten: DMatrix<f64>,
}

impl TensorTemps {
    /// Derives all tensor temperatures from the carried `Lambda^ten` and the moments.
    pub fn new(
        lambda_ten: &DMatrix<f64>,
        moments: &MacroMoments,
        species: &SpeciesParams,
    ) -> Result<Self> {
        let d = species.dof_translational;
        let l = species.dof_internal;
        if lambda_ten.nrows() != d || moments.dim() != d {
            return Err(KineticError::DimensionMismatch {
                expected: d,
                got: lambda_ten.nrows().min(moments.dim()),
            });
        }
        let lambda = lambda_ten.trace() / d as f64;
        let theta = if l == 0 {
            lambda
        } else {
            crate::grid::theta_from_lambda(moments.t_tr, moments.t_rot, lambda, d, l)?
        };
        let lambda_es = lambda_es(lambda, lambda_ten, species.es_parameter)?;
        let t_equ = (d as f64 * lambda + l as f64 * theta) / (d + l) as f64;
        let t_ten = t_tensor(t_equ, &moments.p_over_n(), d, l);
        Ok(Self {
            lambda_ten: lambda_ten.clone(),
            lambda,
            theta,
            lambda_es,
            t_equ,
            t_ten,
        })
    }
}

/// The attractor parameters of both species.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorSet {
    /// `M_k`: isotropic Maxwellian with `(u_k, Lambda_k, Theta_k)`.
    pub maxwellian: [GaussianSpec; 2],
    /// `G_k`: ES Gaussian with covariance `Lambda_k^ES`.
    pub es_gaussian: [GaussianSpec; 2],
    /// `M_12`, `M_21`.
    pub cross: [GaussianSpec; 2],
    /// `Ĝ_k`: covariance `Lambda_k^ten`, internal temperature `Theta_k`.
    pub extended: [GaussianSpec; 2],
    /// `G̃_k`: covariance `T_k^ten`, internal temperature `T_k`.
    pub relaxed: [GaussianSpec; 2],
}

pub fn build_attractor_set(
    moments: &[MacroMoments; 2],
    temps: &[TensorTemps; 2],
    inter: &InterspeciesState,
    species: &[SpeciesParams; 2],
) -> Result<AttractorSet> {
    let mk = |k: usize| {
        let d = species[k].dof_translational;
        let t = &temps[k];
        let m = &moments[k];
        let sp = &species[k];
        let iso = DMatrix::identity(d, d) * t.lambda;
        let (u_cross, lambda_cross, theta_cross) = if k == 0 {
            (&inter.u12, inter.lambda12, inter.theta12)
        } else {
            (&inter.u21, inter.lambda21, inter.theta21)
        };
        let cross_iso = DMatrix::identity(d, d) * lambda_cross;
        let n_cross = if k == 0 { inter.n12 } else { inter.n21 };
        (
            GaussianSpec::from_temperature(m.n, m.u.clone(), &iso, t.theta, sp),
            GaussianSpec::from_temperature(m.n, m.u.clone(), &t.lambda_es, t.theta, sp),
            GaussianSpec::from_temperature(n_cross, u_cross.clone(), &cross_iso, theta_cross, sp),
            GaussianSpec::from_temperature(m.n, m.u.clone(), &t.lambda_ten, t.theta, sp),
            GaussianSpec::from_temperature(m.n, m.u.clone(), &t.t_ten, t.t_equ, sp),
        )
    };
    let (a0, b0, c0, d0, e0) = mk(0);
    let (a1, b1, c1, d1, e1) = mk(1);
    let set = AttractorSet {
        maxwellian: [a0, a1],
        es_gaussian: [b0, b1],
        cross: [c0, c1],
        extended: [d0, d1],
        relaxed: [e0, e1],
    };
    for spec in set.iter() {
        require_spd(&spec.velocity_cov)?;
    }
    Ok(set)
}

impl AttractorSet {
    pub fn iter(&self) -> impl Iterator<Item = &GaussianSpec> {
        self.maxwellian
            .iter()
            .chain(&self.es_gaussian)
            .chain(&self.cross)
            .chain(&self.extended)
            .chain(&self.relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    #[test]
    fn spd_examples() {
        assert_eq!(spd_check(&DMatrix::identity(3, 3)).unwrap(), (true, 1.0));
        let (ok, min) = spd_check(&diag(&[1.0, -0.1])).unwrap();
        assert!(!ok && (min + 0.1).abs() < 1e-15);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spd_check(&asym), Err(KineticError::Asymmetric(_))));
    }

    #[test]
    fn lambda_es_examples() {
        let t = diag(&[3.0, 2.0, 1.0]);
        assert_eq!(lambda_es(2.0, &t, 0.0).unwrap(), diag(&[2.0, 2.0, 2.0]));
        assert_eq!(lambda_es(2.0, &t, 1.0).unwrap(), t);
        let es = lambda_es(2.0, &t, 0.5).unwrap();
        assert!((es - diag(&[2.5, 2.0, 1.5])).abs().max() < 1e-15);
        assert_eq!(es_eigenvalues(&[3.0, 2.0, 1.0], 0.5), vec![2.5, 2.0, 1.5]);
        assert!(lambda_es(2.0, &t, -0.6).is_err());
        assert!(lambda_es(2.5, &t, 0.5).is_err());
    }

    #[test]
    fn t_tensor_examples() {
        let p = diag(&[1.3, 0.7]);
        assert_eq!(t_tensor(1.0, &p, 2, 0), diag(&[1.0, 1.0]));
        let mut p = DMatrix::identity(3, 3);
        p[(0, 1)] = 0.5;
        p[(1, 0)] = 0.5;
        let t = t_tensor(1.0, &p, 3, 2);
        assert!((t[(0, 1)] - 0.3).abs() < 1e-15 && t[(1, 0)] == t[(0, 1)]);
        assert_eq!(t[(0, 0)], 1.0);
        assert_eq!(t[(0, 2)], 0.0);
    }

    #[test]
    fn gaussian_examples() {
        let s = GaussianSpec {
            n: 1.0,
            u: vec![0.0],
            velocity_cov: DMatrix::identity(1, 1),
            internal_temp: 0.0,
            dof_internal: 0,
            mass: 1.0,
        };
        let v = s.eval(&[1.0], &[]).unwrap();
        assert!((v - 0.24197072451914337).abs() < 1e-15);
        let s2 = GaussianSpec {
            n: 2.0,
            u: vec![0.5, -1.0],
            velocity_cov: diag(&[0.5, 2.0]),
            internal_temp: 1.5,
            dof_internal: 2,
            mass: 3.0,
        };
        let peak = s2.eval(&[0.5, -1.0], &[0.0, 0.0]).unwrap();
        let expect = 2.0 / (2.0 * PI * 1.0) * (3.0 / (2.0 * PI * 1.5));
        assert!((peak - expect).abs() < 1e-14 * expect);
    }

    #[test]
    fn singular_covariance_fails() {
        let s = GaussianSpec {
            n: 1.0,
            u: vec![0.0, 0.0],
            velocity_cov: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            internal_temp: 1.0,
            dof_internal: 0,
            mass: 1.0,
        };
        assert!(matches!(s.factor(), Err(KineticError::Factorization { .. })));
    }

    #[test]
    fn cholesky_quad_form_matches_inverse() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]);
        let c = Cholesky::new(&a).unwrap();
        let x = [0.3, -1.2, 0.8];
        let xv = nalgebra::DVector::from_row_slice(&x);
        let direct = (xv.transpose() * a.clone().try_inverse().unwrap() * &xv)[(0, 0)];
        assert!((c.quad_form(&x) - direct).abs() < 1e-14);
        assert!((c.log_det - a.determinant().ln()).abs() < 1e-14);
    }
}
