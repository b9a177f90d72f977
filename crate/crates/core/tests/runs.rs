use bfloat_core::compat::{check_approx, check_exact, exact_ladder, generate, reflect, taylor_ladder, ScenarioSpec};
use bfloat_core::timestepper::{run, RunConfig};
use bfloat_core::{GridSpec, ObstacleProfile, Parameters};

fn setup(eps: f64, delta: f64, l: f64) -> (Parameters, GridSpec) {
    let p = Parameters::with_delta(eps, delta, 1.0, ObstacleProfile::default()).unwrap();
    (p, GridSpec::with_spacing(1.0, l, delta / 4.0).unwrap())
}

#[test]
fn pulse_through_the_obstacle_conserves_energy() {
    let (p, g) = setup(0.1, 0.2, 13.0);
    let spec = ScenarioSpec { center: 3.0, amplitude: 0.15, ..ScenarioSpec::new("pulse-right") };
    let u = generate(&spec, &p, g).unwrap();
    let mut cfg = RunConfig::new(p, g);
    cfg.t_final = 4.0;
    let out = run(&cfg, &u).unwrap();
    assert!(!out.status.is_blowup());
    let e0 = out.energies[0].e_tot;
    let drift = out.energies.iter().map(|r| (r.e_tot - e0).abs()).fold(0.0, f64::max) / e0;
    assert!(drift < 1e-6, "{drift}");
    // some energy reached the left side
    let left: f64 = out.final_state.theta.left.iter().map(|v| v * v).sum();
    assert!(left > 0.0);
    assert!(out.transmission.0 < 1e-12);
}

#[test]
fn mirrored_runs_stay_mirrored() {
    let (p, g) = setup(0.2, 0.2, 9.0);
    let u = generate(&ScenarioSpec { center: 3.0, ..ScenarioSpec::new("pulse-right") }, &p, g).unwrap();
    let mut cfg = RunConfig::new(p, g);
    cfg.t_final = 1.5;
    let a = run(&cfg, &u).unwrap().final_state;
    let b = run(&cfg, &reflect(&u)).unwrap().final_state;
    let rb = reflect(&b);
    let gap = a.theta.left.iter().chain(&a.theta.right).zip(rb.theta.left.iter().chain(&rb.theta.right))
        .chain(a.q.left.iter().chain(&a.q.right).zip(rb.q.left.iter().chain(&rb.q.right)))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-12, "{gap}");
}

#[test]
fn checkers_agree_on_smooth_and_rough_data() {
    let (p, g) = setup(0.1, 0.1, 17.0);
    for (kind, ok) in [("colliding-pulses", true), ("jump-theta", false)] {
        let spec = ScenarioSpec { margin: 3.0, center: 8.0, ..ScenarioSpec::new(kind) };
        let u = generate(&spec, &p, g).unwrap();
        let exact = check_exact(&exact_ladder(&u, 5, &p).unwrap(), 10.0, 5, &p).unwrap();
        let approx = check_approx(&taylor_ladder(&u, 5, &p).unwrap(), 10.0, 5, &p).unwrap();
        assert_eq!(exact.pass, ok, "{kind}");
        assert_eq!(approx.pass, ok, "{kind}");
    }
}
