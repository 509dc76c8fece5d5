use gpreg::gp::{Dataset, Kernel};
use gpreg::plants::{LorenzParams, LorenzPlant, PlantModel};
use gpreg::regulator::{
    control_law, flow_step, jump, simulate, HybridSample, HybridState, InitialConditions, LearnedMap, RegulatorConfig,
};
use proptest::prelude::*;

fn lorenz() -> LorenzPlant {
    LorenzPlant::new(LorenzParams::default()).unwrap()
}

fn init(plant: [f64; 3]) -> InitialConditions {
    InitialConditions {
        plant: plant.to_vec(),
        w: vec![0.0, 4.0],
        eta: vec![0.0; 10],
    }
}

/// Consecutive logged points either flow (same j, t nondecreasing) or jump
/// (same t, j + 1).
fn check_time_domain(samples: &[HybridSample], jump_times: &[f64]) -> Result<(), String> {
    if samples.first().map(|s| (s.t, s.j)) != Some((0.0, 0)) {
        return Err("arc must start at (0, 0)".into());
    }
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let flow = b.j == a.j && b.t >= a.t;
        let jumped = b.j == a.j + 1 && b.t == a.t && jump_times.contains(&a.t);
        if !flow && !jumped {
            return Err(format!("({}, {}) -> ({}, {})", a.t, a.j, b.t, b.j));
        }
    }
    Ok(())
}

#[test]
fn logged_arc_is_a_hybrid_time_domain() {
    let traj = simulate(&lorenz(), &RegulatorConfig::default(), &init([2.0, -1.8, -1.5]), 3.0).unwrap();
    check_time_domain(&traj.samples, &traj.jump_times).unwrap();
    assert_eq!(traj.jump_count(), 30);
    assert_eq!(traj.samples.last().unwrap().j, 30);
}

#[test]
fn jumps_leave_plant_exosystem_and_eta_untouched() {
    let plant = lorenz();
    let cfg = RegulatorConfig::default();
    let mut s = HybridState::new(&plant, &cfg, &init([2.0, -1.8, -1.5])).unwrap();
    let mut jumps = 0;
    while jumps < 25 {
        flow_step(&mut s, &plant, &cfg).unwrap();
        assert!((0.0..=cfg.jump_period).contains(&s.tau));
        if s.at_jump(&cfg) {
            let before = (s.plant.clone(), s.w.clone(), s.eta.clone(), s.time(&cfg), s.j);
            jump(&mut s, &plant, &cfg).unwrap();
            assert_eq!(s.plant, before.0);
            assert_eq!(s.w, before.1);
            assert_eq!(s.eta, before.2);
            assert_eq!(s.time(&cfg).to_bits(), before.3.to_bits());
            assert_eq!(s.j, before.4 + 1);
            assert_eq!(s.tau, 0.0);
            jumps += 1;
        }
    }
}

#[test]
fn variance_at_a_fixed_probe_never_rises_while_the_window_fills() {
    let plant = lorenz();
    let cfg = RegulatorConfig {
        normalize_inputs: false,
        ..Default::default()
    };
    let mut s = HybridState::new(&plant, &cfg, &init([2.0, -1.8, -1.5])).unwrap();
    let mut probes: Vec<Vec<f64>> = vec![vec![0.0; 10], vec![0.05; 10]];
    let mut history: Vec<Vec<f64>> = Vec::new();
    while s.buffer.total_pushed() < cfg.window {
        flow_step(&mut s, &plant, &cfg).unwrap();
        if s.at_jump(&cfg) {
            if s.j == 2 {
                probes.push(s.eta.iter().map(|v| v * 1.1).collect());
            }
            jump(&mut s, &plant, &cfg).unwrap();
            let gp = s.gp.as_ref().unwrap();
            history.push(probes.iter().map(|p| gp.predict(p).variance).collect());
        }
    }
    // The third probe only exists from the third jump on.
    for w in history.windows(2) {
        for (k, (prev, next)) in w[0].iter().zip(&w[1]).enumerate() {
            assert!(next <= &(prev + 1e-8), "probe {k}: {prev} -> {next}");
        }
    }
}

#[test]
fn one_flow_step_of_the_chain_under_unit_input() {
    // e = 0 everywhere once the plant sits at the origin with w = 0, so drive
    // the chain directly.
    let plant = lorenz();
    let cfg = RegulatorConfig::default();
    let s = HybridState::new(
        &plant,
        &cfg,
        &InitialConditions {
            plant: vec![0.0; 3],
            w: vec![0.0; 2],
            eta: vec![0.0; 10],
        },
    )
    .unwrap();
    let im = s.internal_model();
    let mut eta = vec![0.0; 10];
    let mut k = vec![0.0; 10];
    let h = cfg.step;
    // Forward Euler is enough to see the leading term h·N.
    im.derivative_into(&eta, 1.0, &mut k);
    for (e, d) in eta.iter_mut().zip(&k) {
        *e += h * d;
    }
    assert_eq!(eta[9], h);
    assert!(eta[..9].iter().all(|v| *v == 0.0));
}

#[test]
fn plant_at_origin_with_quiet_exosystem_stays_put() {
    let plant = lorenz();
    let origin = InitialConditions {
        plant: vec![0.0; 3],
        w: vec![0.0; 2],
        eta: vec![0.0; 10],
    };
    let traj = simulate(&plant, &RegulatorConfig::default(), &origin, 1.0).unwrap();
    for s in &traj.samples {
        assert!(s.plant.iter().chain(&s.eta).all(|v| *v == 0.0));
        assert_eq!(s.u, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // The high-gain term has stiffness k_p·(1 + 3e²); explicit RK4 at the
    // default step tolerates |e| up to about 1.2, so the output starts there.
    #[test]
    fn random_starts_give_valid_arcs(z in prop::collection::vec(-2.0f64..2.0, 2), y in -1.0f64..1.0) {
        let traj = simulate(&lorenz(), &RegulatorConfig::default(), &init([z[0], z[1], y]), 1.0).unwrap();
        prop_assert_eq!(traj.jump_count(), 10);
        prop_assert!(check_time_domain(&traj.samples, &traj.jump_times).is_ok());
        prop_assert!(traj.samples.iter().all(|s| s.plant.iter().chain(&s.eta).all(|v| v.is_finite())));
    }
}

proptest! {
    #[test]
    fn saturation_is_invisible_inside_the_limit(
        xs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 4),
        ys in prop::collection::vec(-50.0f64..50.0, 4),
        eta in prop::collection::vec(-1.5f64..1.5, 2),
        e in -3.0f64..3.0,
        limit in 1.0f64..60.0,
    ) {
        let kernel = Kernel::isotropic(1.0, 0.7, 1e-6).unwrap();
        let g = LearnedMap::fit(&Dataset::new(xs, ys).unwrap(), &kernel, false).unwrap();
        let cfg = RegulatorConfig { n_eta: 2, sat_limit: limit, input_bounds: None, ..Default::default() };
        let out = control_law(e, &eta, Some(&g), &cfg);
        let fb = -cfg.k_p * cfg.rho_at(e) * e;
        if out.mu.abs() <= limit {
            prop_assert_eq!(out.u.to_bits(), (fb + out.mu).to_bits());
        } else {
            prop_assert_eq!(out.u.to_bits(), (fb + limit.copysign(out.mu)).to_bits());
        }
    }
}

#[test]
fn plant_input_bounds_clamp_the_applied_control() {
    let plant = gpreg::plants::BioreactorPlant::default();
    assert_eq!(plant.input_bounds(), Some((0.0, 45.0)));
    let cfg = RegulatorConfig {
        k_p: 30.0,
        rho: vec![1.0],
        sat_limit: 45.0,
        n_eta: 6,
        input_bounds: plant.input_bounds(),
        ..Default::default()
    };
    for e in [-100.0, -1.0, 0.0, 1.0, 100.0] {
        let u = control_law(e, &[0.0; 6], None, &cfg).u;
        assert!((0.0..=45.0).contains(&u));
    }
}
