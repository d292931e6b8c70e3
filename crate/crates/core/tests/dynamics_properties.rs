#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use polykin::closure::*;
use polykin::dynamics::*;
use polykin::grid::*;

fn single_species_model(l: usize, d: usize, mu: f64, z: f64) -> Model {
    let sp = SpeciesParams {
        mass: 1.0,
        dof_internal: l,
        dof_translational: d,
        nu_self: 1.0,
        nu_cross: 0.0,
        es_parameter: mu,
        z_rot: z,
    };
    Model::new(
        [sp.clone(), sp],
        MixtureCoupling {
            epsilon: 1.0,
            delta: 0.5,
            alpha: 0.5,
            gamma: 0.0,
        },
    )
    .unwrap()
}

/// Moments of decoupled species follow
/// `dT^t = a(Λ - T^t)`, `dT^r = a(Θ - T^r)`, `dΘ = (a/Z)(Λ - Θ) + a(Θ - T^r)`
/// with `Λ` from the internal-energy constraint.
#[test]
fn decoupled_species_follow_scalar_relaxation() {
    let (d, l, z) = (1usize, 2usize, 1.5);
    let model = single_species_model(l, d, 0.0, z);
    let i1 = InitialSpecies {
        theta0: 0.9,
        ..InitialSpecies::isotropic(1.2, vec![0.0], 1.3, 0.7)
    };
    let init = [i1.clone(), i1.clone()];
    let grids = build_grids(&model, &init, GridSpec { n_v: 64, n_eta: 48, width: 8.0 }).unwrap();
    let state = SystemState::from_initial(&model, &grids, &init).unwrap();
    let mut it = Integrator::new(model.clone(), state).unwrap();
    let dt = 0.01;
    let t_end = 2.0;
    while it.state.t < t_end - 1e-12 {
        it.step(dt).unwrap();
    }
    let c = it.closure().unwrap();

    let a = 1.2;
    let (dd, ll) = (d as f64, l as f64);
    let rhs = |y: [f64; 3]| {
        let [tt, tr, th] = y;
        let lam = tt + ll / dd * (tr - th);
        [a * (lam - tt), a * (th - tr), a / z * (lam - th) + a * (th - tr)]
    };
    let mut y = [1.3, 0.7, 0.9];
    let h = 1e-4;
    for _ in 0..(t_end / h).round() as usize {
        let k1 = rhs(y);
        let k2 = rhs(std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
        let k3 = rhs(std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
        let k4 = rhs(std::array::from_fn(|i| y[i] + h * k3[i]));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let got = [c.moments[0].t_tr, c.moments[0].t_rot, c.temps[0].theta];
    for i in 0..3 {
        assert!((got[i] - y[i]).abs() < 2e-5, "component {i}: {} vs {}", got[i], y[i]);
    }
}

#[test]
fn maxwellian_entropy_closed_form() {
    let model = single_species_model(2, 1, 0.0, 1.0);
    let init = [
        InitialSpecies::isotropic(1.3, vec![0.0], 0.9, 0.9),
        InitialSpecies::isotropic(0.7, vec![0.0], 0.9, 0.9),
    ];
    let grids = build_grids(&model, &init, GridSpec { n_v: 64, n_eta: 48, width: 8.0 }).unwrap();
    let s = SystemState::from_initial(&model, &grids, &init).unwrap();
    for k in 0..2 {
        let (n, t, m, dl) = (init[k].n, 0.9, 1.0, 3.0);
        let analytic = n * (n.ln() - dl / 2.0 * (2.0 * PI * t / m).ln() - dl / 2.0);
        let h = kinetic_entropy(&s.f[k]);
        assert!((h - analytic).abs() < 1e-6, "{h} vs {analytic}");

        let c = 1.7;
        let mut scaled = s.f[k].clone();
        scaled.values.iter_mut().for_each(|x| *x *= c);
        let expect = c * c.ln() * s.f[k].mass() + c * h;
        assert!((kinetic_entropy(&scaled) - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }
}

#[test]
fn perturbed_theta_shows_in_equilibrium_residual() {
    let model = single_species_model(2, 1, 0.0, 1.0);
    let base = InitialSpecies::isotropic(1.0, vec![0.0], 1.0, 1.0);
    let init = [base.clone(), base.clone()];
    let grids = build_grids(&model, &init, GridSpec { n_v: 64, n_eta: 48, width: 8.0 }).unwrap();
    let s = SystemState::from_initial(&model, &grids, &init).unwrap();
    let eq = model.equilibrium_residual(&s).unwrap();
    assert!(eq.max < 1e-10, "{eq:?}");

    let hot = InitialSpecies {
        theta0: 1.2,
        ..base.clone()
    };
    let s2 = SystemState::from_initial(&model, &grids, &[hot, base]).unwrap();
    let eq = model.equilibrium_residual(&s2).unwrap();
    assert!(eq.max > 0.1, "{eq:?}");
}

#[test]
fn velocities_converge_under_interspecies_coupling() {
    let sp = SpeciesParams {
        mass: 1.0,
        dof_internal: 0,
        dof_translational: 1,
        nu_self: 1.0,
        nu_cross: 1.0,
        es_parameter: 0.0,
        z_rot: 1.0,
    };
    let model = Model::new(
        [sp.clone(), SpeciesParams { mass: 2.0, ..sp }],
        MixtureCoupling {
            epsilon: 1.0,
            delta: 0.2,
            alpha: 0.3,
            gamma: 0.0,
        },
    )
    .unwrap();
    let init = [
        InitialSpecies::isotropic(1.0, vec![0.6], 1.0, 0.0),
        InitialSpecies::isotropic(1.0, vec![-0.3], 0.6, 0.0),
    ];
    let grids = build_grids(&model, &init, GridSpec { n_v: 96, n_eta: 8, width: 8.0 }).unwrap();
    let s = SystemState::from_initial(&model, &grids, &init).unwrap();
    let mut it = Integrator::new(model, s).unwrap();
    let mut last = f64::INFINITY;
    it.run_until(30.0, |r| {
        let du = (r.moments[0].u[0] - r.moments[1].u[0]).abs();
        assert!(du <= last * (1.0 + 1e-12) + 1e-14, "{du} > {last}");
        last = du;
        Ok(())
    })
    .unwrap();
    assert!(last < 1e-8, "{last}");
}

#[test]
fn trace_of_pressure_matches_temperature() {
    let v = VelocityGrid::uniform(&[0.1, -0.2], &[7.0, 7.0], 24).unwrap();
    let grid = PhaseGrid::new(v, InternalGrid::trivial());
    let vals: Vec<f64> = (0..grid.len()).map(|i| ((i * 7919) % 131) as f64 / 131.0).collect();
    let f = DiscreteDistribution::new(grid, vals, 0).unwrap();
    let m = compute_moments(&f, 1.3).unwrap();
    let tr = m.p.trace();
    assert!((tr - 2.0 * m.n * m.t_tr).abs() <= 1e-12 * tr);
}
