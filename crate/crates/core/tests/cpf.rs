use proptest::prelude::*;
use vstab_core::acpf::{solve, SolverSettings};
use vstab_core::cases::{ieee14, two_bus};
use vstab_core::cpf::{critical_bus, loadability_margin, trace_pv, ContinuationSettings};
use vstab_core::netmodel::{apply_sc_mode, build_admittance, scale_loads, BusId};

fn settings() -> ContinuationSettings {
    ContinuationSettings::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn two_bus_nose_matches_closed_form(x in 0.05f64..0.5) {
        // 1/64 MW frontier resolution keeps the nose voltage error below
        // 0.01 pu down to P_max = 100 MW; the load error is tiny either way.
        let case = two_bus(x, 10.0);
        let fine = ContinuationSettings { min_step: 1.0 / 64.0, ..settings() };
        let curves = trace_pv(&case, &[], &fine).unwrap();
        let coarse = trace_pv(&case, &[], &settings()).unwrap();
        let p_max = 100.0 / (2.0 * x);
        prop_assert!((coarse.nose_total_load - p_max).abs() / p_max < 0.005);
        prop_assert!((curves.nose_total_load - p_max).abs() / p_max < 0.005,
            "nose {} vs {}", curves.nose_total_load, p_max);
        prop_assert!((curves.nose_v[1] - 0.5f64.sqrt()).abs() < 0.01, "v {}", curves.nose_v[1]);
    }
}

#[test]
fn two_bus_margin_from_100_mw() {
    let curves = trace_pv(&two_bus(0.1, 100.0), &[], &settings()).unwrap();
    assert!((loadability_margin(&curves) - 400.0).abs() / 400.0 < 0.005);
    assert!((curves.base_total_load - 100.0).abs() < 1e-12);
}

#[test]
fn curve_points_strictly_increase_and_voltage_falls() {
    let curves = trace_pv(&two_bus(0.2, 20.0), &[], &settings()).unwrap();
    assert!(curves.points.len() > 100);
    for w in curves.points.windows(2) {
        assert!(w[1].total_load > w[0].total_load);
        assert!(w[1].v[1] < w[0].v[1]);
    }
    assert_eq!(curves.nose_total_load, curves.points.last().unwrap().total_load);
}

#[test]
fn trace_agrees_with_cold_start_solves() {
    // nose at 416.67 MW, off the 1 MW grid
    let case = two_bus(0.12, 100.0);
    let curves = trace_pv(&case, &[], &settings()).unwrap();
    let y = build_admittance(&case, &[]).unwrap();
    let cold = SolverSettings {
        flat_start: true,
        ..Default::default()
    };
    let mut compared = 0;
    for p in &curves.points {
        let loaded = scale_loads(&case, p.total_load - 100.0).unwrap();
        let sol = solve(&loaded, &y, &cold, None).unwrap();
        if !sol.converged {
            // flat start loses the upper branch only in the last few MW
            assert!(curves.nose_total_load - p.total_load < 5.0);
            continue;
        }
        assert!((sol.v[1] - p.v[1]).abs() < 1e-6, "at {} MW", p.total_load);
        compared += 1;
    }
    assert!(compared + 5 >= curves.points.len(), "{compared} of {}", curves.points.len());
}

#[test]
fn halving_the_initial_step_refines_the_nose() {
    for case in [two_bus(0.15, 50.0), apply_sc_mode(&ieee14(), false)] {
        let coarse = trace_pv(&case, &[], &settings()).unwrap();
        let fine = trace_pv(
            &case,
            &[],
            &ContinuationSettings {
                initial_step: 0.5,
                ..settings()
            },
        )
        .unwrap();
        assert!(fine.nose_total_load >= coarse.nose_total_load - 1.0);
    }
}

#[test]
fn ieee14_base_critical_buses() {
    let without = trace_pv(&apply_sc_mode(&ieee14(), false), &[], &settings()).unwrap();
    let with = trace_pv(&apply_sc_mode(&ieee14(), true), &[], &settings()).unwrap();
    assert_eq!(critical_bus(&without, &without.default_eligible()), Some(BusId(14)));
    assert_eq!(critical_bus(&with, &with.default_eligible()), Some(BusId(5)));
    assert!((without.base_total_load - 259.0).abs() < 1e-9);
    assert!(loadability_margin(&with) >= loadability_margin(&without));
    // the lowest voltage among all load buses at the nose sits at bus 14
    let (i, _) = without
        .nose_v
        .iter()
        .enumerate()
        .filter(|(i, _)| without.load_buses.contains(&without.bus_ids[*i]))
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(without.bus_ids[i], BusId(14));
}

#[test]
fn critical_bus_survives_rebasing() {
    for sc in [false, true] {
        let case = apply_sc_mode(&ieee14(), sc);
        let a = trace_pv(&case, &[], &settings()).unwrap();
        let b = trace_pv(&case.rebase(250.0), &[], &settings()).unwrap();
        assert_eq!(
            critical_bus(&a, &a.default_eligible()),
            critical_bus(&b, &b.default_eligible())
        );
        assert!((a.nose_total_load - b.nose_total_load).abs() <= 1.0);
    }
}

#[test]
fn every_point_is_a_converged_power_flow() {
    let case = apply_sc_mode(&ieee14(), true);
    let curves = trace_pv(&case, &[], &settings()).unwrap();
    let y = build_admittance(&case, &[]).unwrap();
    let mut solver = settings().solver;
    solver.flat_start = true;
    for p in curves.points.iter().step_by(97) {
        let loaded = scale_loads(&case, (p.total_load - 259.0).max(0.0)).unwrap();
        let sol = solve(&loaded, &y, &solver, None).unwrap();
        assert!(sol.converged);
        assert!(sol.max_mismatch < 1e-8);
        for (a, b) in sol.v.iter().zip(&p.v) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
