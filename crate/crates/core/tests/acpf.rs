use num_complex::Complex64;
use proptest::prelude::*;
use vstab_core::acpf::{
    case_mismatch, injections, jacobian, solve, PowerFlowSolution, SolverSettings, StateLayout,
};
use vstab_core::cases::{ieee14, two_bus};
use vstab_core::netmodel::{apply_sc_mode, build_admittance, scale_loads, BusKind, NetworkCase};

fn solved(case: &NetworkCase, settings: &SolverSettings) -> PowerFlowSolution {
    let y = build_admittance(case, &[]).unwrap();
    solve(case, &y, settings, None).unwrap()
}

/// Load-bus voltage of slack(1.0) -- jX -- (P + jQ) from the quartic
/// `V^4 + (2QX - 1) V^2 + X^2 (P^2 + Q^2) = 0`, upper root.
fn quartic_voltage(p: f64, q: f64, x: f64) -> f64 {
    let b = 2.0 * q * x - 1.0;
    let c = x * x * (p * p + q * q);
    ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt()
}

#[test]
fn two_bus_quartic_oracle() {
    for &(p_mw, q_mvar, x) in &[(100.0, 0.0, 0.1), (150.0, 50.0, 0.2), (80.0, -20.0, 0.35), (300.0, 90.0, 0.08)] {
        let mut case = two_bus(x, p_mw);
        case.loads[0].q = q_mvar;
        let sol = solved(&case, &SolverSettings::default());
        assert!(sol.converged);
        let (p, q) = (p_mw / 100.0, q_mvar / 100.0);
        let v = quartic_voltage(p, q, x);
        assert!((sol.v[1] - v).abs() < 1e-8, "{} vs {}", sol.v[1], v);
        let theta = -(p * x / v).asin();
        assert!((sol.theta[1] - theta).abs() < 1e-8);
    }
}

#[test]
fn two_bus_textbook_numbers() {
    let sol = solved(&two_bus(0.1, 100.0), &SolverSettings::default());
    assert!((sol.v[1] - 0.99496).abs() < 5e-5);
    assert!((sol.theta[1].to_degrees() + 5.77).abs() < 5e-3);
}

#[test]
fn exact_solution_has_zero_residual() {
    let case = two_bus(0.1, 100.0);
    let y = build_admittance(&case, &[]).unwrap();
    let v = quartic_voltage(1.0, 0.0, 0.1);
    let theta = -(0.1 / v).asin();
    let kinds: Vec<BusKind> = case.buses.iter().map(|b| b.kind).collect();
    let r = case_mismatch(&case, &y, &[1.0, v], &[0.0, theta], &kinds).unwrap();
    assert!(r.iter().all(|e| e.abs() < 1e-12), "{r:?}");
}

#[test]
fn ieee14_flat_start() {
    for sc in [false, true] {
        let case = apply_sc_mode(&ieee14(), sc);
        let settings = SolverSettings {
            flat_start: true,
            ..Default::default()
        };
        let sol = solved(&case, &settings);
        assert!(sol.converged);
        assert!(sol.iterations <= 10, "{} iterations", sol.iterations);
        assert!(sol.max_mismatch < 1e-8);
    }
}

/// Series losses recomputed branch by branch from the solved voltages.
fn branch_losses(case: &NetworkCase, sol: &PowerFlowSolution) -> f64 {
    let phasor = |id| {
        let i = sol.index_of(id).unwrap();
        Complex64::from_polar(sol.v[i], sol.theta[i])
    };
    case.branches
        .iter()
        .map(|br| {
            let (vf, vt) = (phasor(br.from_bus), phasor(br.to_bus));
            let z = Complex64::new(br.r, br.x);
            let current = (vf / br.tap_ratio - vt) / z;
            current.norm_sqr() * br.r
        })
        .sum()
}

#[test]
fn ieee14_losses_balance() {
    for sc in [false, true] {
        let case = apply_sc_mode(&ieee14(), sc);
        let sol = solved(&case, &SolverSettings::default());
        let net: f64 = sol.p_inj.iter().sum();
        let losses = branch_losses(&case, &sol);
        assert!((net - losses).abs() < 1e-8, "{net} vs {losses}");
        let generation: f64 = sol.p_gen.iter().sum::<f64>() * 100.0;
        assert!((generation - 259.0 - losses * 100.0).abs() < 1e-6);
        assert!(losses > 0.0);
    }
}

#[test]
fn converged_bus_power_balance() {
    let case = scale_loads(&apply_sc_mode(&ieee14(), true), 150.0).unwrap();
    let sol = solved(&case, &SolverSettings::default());
    assert!(sol.converged);
    for (i, bus) in case.buses.iter().enumerate() {
        if bus.kind == BusKind::Slack {
            continue;
        }
        let (pl, ql) = case
            .loads
            .iter()
            .filter(|l| l.bus == bus.id)
            .fold((0.0, 0.0), |a, l| (a.0 + l.p / 100.0, a.1 + l.q / 100.0));
        assert!((sol.p_inj[i] - (sol.p_gen[i] - pl)).abs() < 1e-7);
        assert!((sol.q_inj[i] - (sol.q_gen[i] - ql)).abs() < 1e-7);
    }
}

#[test]
fn warm_start_from_solution() {
    let case = apply_sc_mode(&ieee14(), true);
    let y = build_admittance(&case, &[]).unwrap();
    let settings = SolverSettings::default();
    let first = solve(&case, &y, &settings, None).unwrap();
    let again = solve(&case, &y, &settings, Some(&first)).unwrap();
    assert!(again.converged);
    assert!(again.iterations <= 2);
}

#[test]
fn reactive_limit_complementarity() {
    let base = apply_sc_mode(&ieee14(), true);
    let mut switched = 0;
    for delta in [0.0, 50.0, 100.0, 150.0] {
        let case = scale_loads(&base, delta).unwrap();
        let sol = solved(&case, &SolverSettings::default());
        assert!(sol.converged, "delta {delta}");
        for (i, bus) in case.buses.iter().enumerate() {
            if bus.kind != BusKind::PV {
                continue;
            }
            let m: Vec<_> = case.machines.iter().filter(|m| m.bus == bus.id).collect();
            let lo: f64 = m.iter().map(|m| m.q_min).sum::<f64>() / 100.0;
            let hi: f64 = m.iter().map(|m| m.q_max).sum::<f64>() / 100.0;
            let q = sol.q_gen[i];
            match sol.final_kind[i] {
                BusKind::PV => assert!(q >= lo - 1e-9 && q <= hi + 1e-9, "bus {} q {q}", bus.id),
                BusKind::PQ => {
                    switched += 1;
                    assert!(q == lo || q == hi);
                    assert!(sol.switch_events.iter().any(|e| e.bus == bus.id));
                }
                BusKind::Slack => unreachable!(),
            }
        }
    }
    assert!(switched > 0, "no limit was reached");
}

fn calculated(case: &NetworkCase, v: &[f64], theta: &[f64]) -> Vec<f64> {
    let y = build_admittance(case, &[]).unwrap();
    let kinds: Vec<BusKind> = case.buses.iter().map(|b| b.kind).collect();
    let layout = StateLayout::new(&kinds);
    let (p, q) = injections(&y, v, theta);
    layout
        .angle_buses
        .iter()
        .map(|&i| p[i])
        .chain(layout.magnitude_buses.iter().map(|&i| q[i]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobian_matches_central_differences(
        v in prop::collection::vec(0.85f64..1.15, 14),
        theta in prop::collection::vec(-0.4f64..0.4, 14),
        sc in any::<bool>(),
    ) {
        let case = apply_sc_mode(&ieee14(), sc);
        let y = build_admittance(&case, &[]).unwrap();
        let kinds: Vec<BusKind> = case.buses.iter().map(|b| b.kind).collect();
        let layout = StateLayout::new(&kinds);
        let jac = jacobian(&y, &v, &theta, &kinds);
        let h = 1e-6;
        let n_ang = layout.angle_buses.len();
        for col in 0..layout.len() {
            let (mut vp, mut vm, mut tp, mut tm) = (v.clone(), v.clone(), theta.clone(), theta.clone());
            if col < n_ang {
                let i = layout.angle_buses[col];
                tp[i] += h;
                tm[i] -= h;
            } else {
                let i = layout.magnitude_buses[col - n_ang];
                vp[i] += h;
                vm[i] -= h;
            }
            let fp = calculated(&case, &vp, &tp);
            let fm = calculated(&case, &vm, &tm);
            for row in 0..layout.len() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let an = jac.get(row, col);
                prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                    "J[{row},{col}] analytic {an} fd {fd}");
            }
        }
    }
}
