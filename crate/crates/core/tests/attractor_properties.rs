use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use polykin::attractors::*;
use polykin::closure::*;
use polykin::grid::*;
use proptest::prelude::*;

fn spd(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (prop::collection::vec(-1.0f64..1.0, d * d), prop::collection::vec(0.05f64..3.0, d)).prop_map(move |(a, e)| {
        let a = DMatrix::from_row_slice(d, d, &a);
        let q = a.qr().q();
        let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&e)) * q.transpose();
        (&m + m.transpose()) * 0.5
    })
}

fn det(m: &DMatrix<f64>) -> f64 {
    m.clone().determinant()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn es_tensor_is_spd_with_predicted_spectrum(t in (2usize..4).prop_flat_map(spd), s in 0.0f64..1.0) {
        let d = t.nrows();
        let lo = -1.0 / (d as f64 - 1.0);
        let mu = lo + (1.0 - lo) * s;
        let lam = t.trace() / d as f64;
        let es = lambda_es(lam, &t, mu).unwrap();
        let (ok, min) = spd_check(&es).unwrap();
        prop_assert!(ok, "min eigenvalue {}", min);
        let mut direct: Vec<f64> = SymmetricEigen::new(es.clone()).eigenvalues.iter().copied().collect();
        let ev: Vec<f64> = SymmetricEigen::new(t.clone()).eigenvalues.iter().copied().collect();
        let mut pred = es_eigenvalues(&ev, mu);
        direct.sort_by(f64::total_cmp);
        pred.sort_by(f64::total_cmp);
        for (a, b) in direct.iter().zip(&pred) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        // Trace identity and the arithmetic-geometric mean bound.
        prop_assert!((es.trace() - d as f64 * lam).abs() < 1e-12 * lam);
        prop_assert!(lam.powi(d as i32) >= det(&es) * (1.0 - 1e-12));
        prop_assert!((t.trace() / d as f64).powi(d as i32) >= det(&t) * (1.0 - 1e-12));
    }

    #[test]
    fn relaxed_tensor_dominates_pressure(p in (2usize..4).prop_flat_map(spd), l in 1usize..4, tr in 0.05f64..3.0) {
        let d = p.nrows();
        let t_tr = p.trace() / d as f64;
        let t_equ = (d as f64 * t_tr + l as f64 * tr) / (d + l) as f64;
        let t = t_tensor(t_equ, &p, d, l);
        let (ok, _) = spd_check(&t).unwrap();
        prop_assert!(ok);
        let lhs = det(&t).ln() + l as f64 * t_equ.ln();
        let rhs = det(&p).ln() + l as f64 * tr.ln();
        prop_assert!(lhs >= rhs - 1e-12 * rhs.abs().max(1.0));
    }
}

fn phase_grid(d: usize, half: f64, n_v: usize, l: usize, n_eta: usize) -> Arc<PhaseGrid> {
    let v = VelocityGrid::uniform(&vec![0.0; d], &vec![half; d], n_v).unwrap();
    PhaseGrid::new(v, InternalGrid::new(l, half, n_eta).unwrap())
}

#[test]
fn projected_moments_match_spec_parameters() {
    let grid = phase_grid(2, 9.0, 64, 2, 40);
    let cov = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.2, 0.6]);
    let spec = GaussianSpec {
        n: 1.7,
        u: vec![0.3, -0.4],
        velocity_cov: cov.clone(),
        internal_temp: 1.3,
        dof_internal: 2,
        mass: 1.5,
    };
    let f = project_attractor(&spec, &grid, 0).unwrap();
    let m = compute_moments(&f, spec.mass).unwrap();
    assert!((m.n - 1.7).abs() < 1e-13);
    assert!((m.u[0] - 0.3).abs() < 1e-10 && (m.u[1] + 0.4).abs() < 1e-10);
    let cov_d = m.p_over_n() / spec.mass;
    assert!((cov_d - cov).abs().max() < 1e-10);
    assert!((m.t_rot * 2.0 / spec.mass - 2.0 * 1.3 / 1.5).abs() < 1e-10);
    assert!(m.eta_mean.iter().all(|&x| x == 0.0));
}

#[test]
fn attractor_set_collapses_at_equilibrium() {
    let sp = SpeciesParams {
        mass: 1.0,
        dof_internal: 2,
        dof_translational: 2,
        nu_self: 1.0,
        nu_cross: 1.0,
        es_parameter: 0.4,
        z_rot: 1.0,
    };
    let species = [sp.clone(), SpeciesParams { mass: 2.0, ..sp }];
    let c = MixtureCoupling {
        epsilon: 1.0,
        delta: 0.3,
        alpha: 0.3,
        gamma: 0.01,
    };
    let mo = [
        MacroMoments::isotropic(1.0, vec![0.1, 0.2], 1.4, 1.4, 2),
        MacroMoments::isotropic(0.5, vec![0.1, 0.2], 1.4, 1.4, 2),
    ];
    let lt = DMatrix::identity(2, 2) * 1.4;
    let temps = [
        TensorTemps::new(&lt, &mo[0], &species[0]).unwrap(),
        TensorTemps::new(&lt, &mo[1], &species[1]).unwrap(),
    ];
    let relaxed = [
        RelaxedState::from_lambda(mo[0].clone(), 1.4, 2).unwrap(),
        RelaxedState::from_lambda(mo[1].clone(), 1.4, 2).unwrap(),
    ];
    let inter = InterspeciesState::compute(&relaxed, &c, &species).unwrap();
    let set = build_attractor_set(&mo, &temps, &inter, &species).unwrap();
    for k in 0..2 {
        let reference = &set.maxwellian[k];
        for s in [&set.es_gaussian[k], &set.cross[k], &set.extended[k], &set.relaxed[k]] {
            assert_eq!(s.n, reference.n);
            assert!(s.u.iter().zip(&reference.u).all(|(a, b)| (a - b).abs() < 1e-15));
            assert!((&s.velocity_cov - &reference.velocity_cov).abs().max() < 1e-15);
            assert!((s.internal_temp - reference.internal_temp).abs() < 1e-15);
        }
    }

    // mu = 0 with isotropic pressure: ES Gaussian equals the Maxwellian.
    let iso = SpeciesParams {
        es_parameter: 0.0,
        ..species[0].clone()
    };
    let m0 = MacroMoments::isotropic(1.0, vec![0.0, 0.0], 1.1, 0.9, 2);
    let lt = DMatrix::from_row_slice(2, 2, &[1.3, 0.1, 0.1, 0.9]);
    let t = TensorTemps::new(&lt, &m0, &iso).unwrap();
    assert!((t.lambda_es - DMatrix::identity(2, 2) * t.lambda).abs().max() < 1e-15);
}

/// f ln f of a mixture of two Gaussians dominates the Gaussian with the same
/// moments, which in turn dominates the relaxed Gaussian G̃.
#[test]
fn entropy_ordering_on_gaussian_mixture() {
    let grid = phase_grid(2, 10.0, 96, 1, 48);
    let sp = SpeciesParams {
        mass: 1.0,
        dof_internal: 1,
        dof_translational: 2,
        nu_self: 1.0,
        nu_cross: 1.0,
        es_parameter: 0.0,
        z_rot: 1.0,
    };
    let a = GaussianSpec {
        n: 0.6,
        u: vec![0.8, 0.0],
        velocity_cov: DMatrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, 0.5]),
        internal_temp: 0.6,
        dof_internal: 1,
        mass: 1.0,
    };
    let b = GaussianSpec {
        n: 0.4,
        u: vec![-0.9, 0.4],
        velocity_cov: DMatrix::from_row_slice(2, 2, &[0.4, -0.1, -0.1, 0.9]),
        internal_temp: 1.4,
        ..a.clone()
    };
    let fa = project_attractor(&a, &grid, 0).unwrap();
    let fb = project_attractor(&b, &grid, 0).unwrap();
    let vals: Vec<f64> = fa.values.iter().zip(&fb.values).map(|(x, y)| x + y).collect();
    let f = DiscreteDistribution::new(grid.clone(), vals, 0).unwrap();
    let m = compute_moments(&f, 1.0).unwrap();
    let h_f = polykin::dynamics::kinetic_entropy(&f);
    let same = GaussianSpec::from_temperature(m.n, m.u.clone(), &m.p_over_n(), m.t_rot, &sp);
    let t = TensorTemps::new(&m.p_over_n(), &m, &sp).unwrap();
    let relaxed = GaussianSpec::from_temperature(m.n, m.u.clone(), &t.t_ten, t.t_equ, &sp);
    let h_same = same.entropy().unwrap();
    let h_relaxed = relaxed.entropy().unwrap();
    assert!(h_relaxed <= h_same + 1e-6, "{h_relaxed} > {h_same}");
    assert!(h_same <= h_f + 1e-6, "{h_same} > {h_f}");
}
