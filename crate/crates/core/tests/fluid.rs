use confucius_core::fluid::*;

fn params(k: f64, q0: f64, tau: f64, n: u32) -> FluidParams {
    FluidParams {
        k,
        q0,
        tau,
        n,
        ..FluidParams::default()
    }
}

/// Heun integration of the same delay model with the delayed state read by
/// linear interpolation from a full history; written separately from the
/// library's Euler ring so the two can check each other.
fn oracle_qmax(p: &FluidParams, policy: Policy, t_end: f64, dt: f64) -> f64 {
    let rate = |t: f64| -> f64 {
        let (c, n) = (p.c, p.n as f64);
        if t < 0.0 {
            return c;
        }
        match policy {
            Policy::Fq => c / (n + 1.0),
            Policy::Cbq => c / 2.0,
            Policy::Fifo => c * (c * p.q0) / (c * p.q0 + n * 8.0 * p.b0),
            Policy::Confucius => f64::max(c / 2.0 * (-p.lambda * t * std::f64::consts::LN_2).exp(), c / (n + 1.0)),
        }
    };
    let steps = (t_end / dt).ceil() as usize;
    let mut ps = vec![p.q0 * p.c; steps + 1];
    let mut s = p.c;
    let delayed = |ps: &Vec<f64>, upto: usize, t: f64| -> (f64, f64) {
        let td = t - p.tau;
        if td <= 0.0 {
            return (p.q0 * p.c, p.c);
        }
        let x = td / dt;
        let i = (x.floor() as usize).min(upto);
        let j = (i + 1).min(upto);
        let f = x - i as f64;
        (ps[i] * (1.0 - f) + ps[j] * f, rate(td))
    };
    let mut qmax: f64 = 0.0;
    for i in 0..steps {
        let t = i as f64 * dt;
        let r = rate(t);
        qmax = qmax.max(ps[i] / r);
        let (pd, rd) = delayed(&ps, i, t);
        let ds1 = -p.k * rd * (pd / rd - p.q0);
        let dp1 = s - r;
        let s_pred = (s + ds1 * dt).max(0.0);
        let p_pred = (ps[i] + dp1 * dt).max(0.0);
        ps[i + 1] = p_pred;
        let (pd2, rd2) = delayed(&ps, i + 1, t + dt);
        let ds2 = -p.k * rd2 * (pd2 / rd2 - p.q0);
        let dp2 = s_pred - rate(t + dt);
        s = (s + 0.5 * (ds1 + ds2) * dt).max(0.0);
        ps[i + 1] = (ps[i] + 0.5 * (dp1 + dp2) * dt).max(0.0);
    }
    qmax
}

#[test]
fn closed_form_examples() {
    let p = params(0.001, 10.0, 40.0, 9);
    assert!((qmax_fq(&p) - 718.33).abs() < 0.05);
    assert!((qmax_cbq(&p) - 79.81).abs() < 0.01);
    assert!((qmax_fifo(&p) - 424.6).abs() < 0.1);
    let mut p2 = p;
    p2.n = 18;
    assert!((qmax_fq(&p2) - 2.0 * qmax_fq(&p)).abs() < 1e-9);
    p2.k = 1e12;
    assert!((qmax_fq(&p2) - 18.0 * 50.0).abs() < 1e-3);
    let mut p1 = p;
    p1.n = 1;
    assert_eq!(qmax_fq(&p1), qmax_cbq(&p));
    p1.b0 = 1e-9;
    assert!((qmax_fifo(&p1) - qmax_cbq(&p1)).abs() < 1e-6);
}

#[test]
fn confucius_closed_forms() {
    let p = FluidParams {
        q0: 1.0,
        ..params(0.001, 1.0, 40.0, 9)
    };
    assert!((qmax_confucius_simplified(&p) - 647.76).abs() < 0.01);
    assert!((qmax_confucius_simplified(&p) - 640.0).abs() / 640.0 < 0.05);
    let mut z = p;
    z.lambda = 1e-300;
    assert!((qmax_confucius_simplified(&z) - (6.0 + 600.0)).abs() < 1e-9);
    for n in [2, 9, 50, 100] {
        let q = FluidParams { n, b: 9e6, ..p };
        assert_eq!(qmax_confucius_series(&q), qmax_confucius_series(&p));
        assert_eq!(qmax_confucius_simplified(&q), qmax_confucius_simplified(&p));
        assert_eq!(qmax_cbq(&q), qmax_cbq(&p));
    }
}

#[test]
fn t0_root_values() {
    // lambda -> 0: the root of -(C/4) k t^2 + C = 0 is 2/sqrt(k).
    let mut p = FluidParams {
        c: 1.0,
        lambda: 1e-9,
        ..params(0.001, 10.0, 40.0, 9)
    };
    let t = t0_root(&p).unwrap();
    assert!((t - 2.0 / 0.001f64.sqrt()).abs() < 1e-3);
    // Golden value: quadratic -(B/2) k t^2 - lambda A t + (A + B) = 0 solved by hand.
    p.lambda = 0.004;
    assert!((t0_root(&p).unwrap() - 55.91025).abs() < 1e-4);
    let mut last = f64::INFINITY;
    for i in 1..200 {
        p.lambda = i as f64 * 1e-4;
        let t = t0_root(&p).unwrap();
        assert!(t < last);
        last = t;
    }
    p.k = 1e9;
    p.lambda = 0.0;
    p.tau = 0.0;
    assert!(t0_root(&FluidParams { lambda: 0.0, k: 1.0, tau: 0.0, ..p }).is_ok());
}

#[test]
fn fct_deltas() {
    let p = FluidParams {
        n: 9,
        b: 15_000.0,
        c: 25_000.0,
        ..FluidParams::default()
    };
    assert_eq!(fct_delta(Policy::Fq, &p).ms, 0.0);
    let f = fct_delta(Policy::Fifo, &p);
    assert!(f.flagged && f.ms == 0.0);
    assert!((fct_delta(Policy::Cbq, &p).ms - 38.4).abs() < 1e-9);
    assert!((fct_delta_confucius_bound(0.004) - 360.674).abs() < 1e-3);
    assert!(fct_delta(Policy::Confucius, &FluidParams { n: 1, ..p }).ms.abs() < 1e-9);
    for n in 1..=1000 {
        assert!(fct_delta(Policy::Confucius, &FluidParams { n, ..p }).ms <= fct_delta_confucius_bound(0.004));
    }
}

#[test]
fn responsiveness_fit() {
    let k5 = fit_responsiveness(200.0).unwrap();
    assert!((k5 - 0.000987).abs() < 1e-6);
    let k8 = fit_responsiveness(320.0).unwrap();
    assert!((k8 - 0.000385).abs() < 1e-6);
    assert!((fit_responsiveness(400.0).unwrap() * 4.0 - k5).abs() < 1e-15);
    assert!(fit_responsiveness(0.0).is_err());
}

#[test]
fn integrator_equilibrium_without_competitors() {
    let p = params(0.001, 10.0, 40.0, 0);
    let t = integrate_fluid(&p, Policy::Fq, 2000.0, default_step(&p)).unwrap();
    assert!((t.q_max - 10.0).abs() < 1e-9);
    assert!(t.q.iter().all(|q| (q - 10.0).abs() < 1e-9));
}

#[test]
fn integrator_matches_fq_closed_form() {
    let p = params(0.001, 10.0, 40.0, 9);
    let t = integrate_fluid(&p, Policy::Fq, default_horizon(&p), default_step(&p)).unwrap();
    assert!((t.q_max - 718.3).abs() / 718.3 < 0.20, "{}", t.q_max);
}

#[test]
fn integrator_converges_under_refinement() {
    let p = params(0.001, 10.0, 40.0, 9);
    for policy in Policy::ALL {
        let dt = default_step(&p);
        let a = integrate_fluid(&p, policy, default_horizon(&p), dt).unwrap().q_max;
        let b = integrate_fluid(&p, policy, default_horizon(&p), dt / 2.0).unwrap().q_max;
        assert!((a - b).abs() / b < 0.01, "{policy:?} {a} {b}");
    }
}

#[test]
fn integrator_agrees_with_oracle() {
    for (k, q0, tau, n) in [(0.001, 10.0, 40.0, 9), (0.0004, 1.0, 20.0, 50), (0.001, 5.0, 20.0, 2)] {
        let p = params(k, q0, tau, n);
        for policy in Policy::ALL {
            let dt = default_step(&p);
            let lib = integrate_fluid(&p, policy, default_horizon(&p), dt).unwrap().q_max;
            let orc = oracle_qmax(&p, policy, default_horizon(&p), dt / 4.0);
            assert!((lib - orc).abs() / orc < 0.03, "{policy:?} {k} {q0} {tau} {n}: {lib} vs {orc}");
        }
    }
}

#[test]
fn integrator_rejects_coarse_step() {
    let p = params(0.001, 10.0, 40.0, 9);
    assert!(integrate_fluid(&p, Policy::Fq, 100.0, 4.5).is_err());
    assert!(integrate_fluid(&p, Policy::Fq, 100.0, 0.5).is_err());
    assert!(integrate_fluid(&p, Policy::Fq, 100.0, 0.3).is_ok());
}

#[test]
fn table_ordering_at_paper_parameters() {
    for q0 in [1.0, 5.0, 10.0] {
        for n in [10, 20, 50, 100] {
            let p = params(0.001, q0, 40.0, n);
            let conf = qmax_confucius_simplified(&p);
            assert!(qmax_cbq(&p) < conf && conf < qmax_fq(&p), "q0={q0} n={n}");
        }
        // Below ten new flows the flat Confucius bound sits above N * base.
        let p = params(0.001, q0, 40.0, 5);
        assert!(qmax_confucius_simplified(&p) > qmax_fq(&p));
    }
}

#[test]
fn warnings() {
    let p = params(0.001, 10.0, 40.0, 9);
    assert_eq!(p.validate().unwrap().len(), 1);
    let p = params(0.0001, 10.0, 20.0, 9);
    assert!(p.validate().unwrap().is_empty());
    assert!(FluidParams { k: -1.0, ..p }.validate().is_err());
}
