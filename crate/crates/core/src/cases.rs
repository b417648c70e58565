//! Built-in reference networks.
//!
//! [`ieee14`] is the 14-bus archive system configured for the condenser
//! study: machines at buses 3, 6 and 8 are synchronous condensers, branch
//! 1-2 is carried as two identical parallel circuits, and exactly the sixteen
//! transmission lines are outage-eligible. [`ieee14_archive`] is the same
//! data as it appears in the archive file, before that configuration.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::netmodel::{Branch, BranchId, Bus, BusId, BusKind, Load, Machine, MachineKind, NetworkCase};

/// id, name, type, v_set, load MW, load MVAr, gen MW, gen MVAr, q_max, q_min, shunt B
type BusRow = (u32, &'static str, u8, f64, f64, f64, f64, f64, f64, f64, f64);

const IEEE14_BUSES: [BusRow; 14] = [
    (1, "Bus 1     HV", 3, 1.060, 0.0, 0.0, 232.4, -16.9, 0.0, 0.0, 0.0),
    (2, "Bus 2     HV", 2, 1.045, 21.7, 12.7, 40.0, 42.4, 50.0, -40.0, 0.0),
    (3, "Bus 3     HV", 2, 1.010, 94.2, 19.0, 0.0, 23.4, 40.0, 0.0, 0.0),
    (4, "Bus 4     HV", 0, 0.0, 47.8, -3.9, 0.0, 0.0, 0.0, 0.0, 0.0),
    (5, "Bus 5     HV", 0, 0.0, 7.6, 1.6, 0.0, 0.0, 0.0, 0.0, 0.0),
    (6, "Bus 6     LV", 2, 1.070, 11.2, 7.5, 0.0, 12.2, 24.0, -6.0, 0.0),
    (7, "Bus 7     ZV", 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    (8, "Bus 8     TV", 2, 1.090, 0.0, 0.0, 0.0, 17.4, 24.0, -6.0, 0.0),
    (9, "Bus 9     LV", 0, 0.0, 29.5, 16.6, 0.0, 0.0, 0.0, 0.0, 0.19),
    (10, "Bus 10    LV", 0, 0.0, 9.0, 5.8, 0.0, 0.0, 0.0, 0.0, 0.0),
    (11, "Bus 11    LV", 0, 0.0, 3.5, 1.8, 0.0, 0.0, 0.0, 0.0, 0.0),
    (12, "Bus 12    LV", 0, 0.0, 6.1, 1.6, 0.0, 0.0, 0.0, 0.0, 0.0),
    (13, "Bus 13    LV", 0, 0.0, 13.5, 5.8, 0.0, 0.0, 0.0, 0.0, 0.0),
    (14, "Bus 14    LV", 0, 0.0, 14.9, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0),
];

/// from, to, r, x, b, tap (0 for lines)
const IEEE14_BRANCHES: [(u32, u32, f64, f64, f64, f64); 20] = [
    (1, 2, 0.01938, 0.05917, 0.0528, 0.0),
    (1, 5, 0.05403, 0.22304, 0.0492, 0.0),
    (2, 3, 0.04699, 0.19797, 0.0438, 0.0),
    (2, 4, 0.05811, 0.17632, 0.0340, 0.0),
    (2, 5, 0.05695, 0.17388, 0.0346, 0.0),
    (3, 4, 0.06701, 0.17103, 0.0128, 0.0),
    (4, 5, 0.01335, 0.04211, 0.0, 0.0),
    (4, 7, 0.0, 0.20912, 0.0, 0.978),
    (4, 9, 0.0, 0.55618, 0.0, 0.969),
    (5, 6, 0.0, 0.25202, 0.0, 0.932),
    (6, 11, 0.09498, 0.19890, 0.0, 0.0),
    (6, 12, 0.12291, 0.25581, 0.0, 0.0),
    (6, 13, 0.06615, 0.13027, 0.0, 0.0),
    (7, 8, 0.0, 0.17615, 0.0, 0.0),
    (7, 9, 0.0, 0.11001, 0.0, 0.0),
    (9, 10, 0.03181, 0.08450, 0.0, 0.0),
    (9, 14, 0.12711, 0.27038, 0.0, 0.0),
    (10, 11, 0.08205, 0.19207, 0.0, 0.0),
    (12, 13, 0.22092, 0.19988, 0.0, 0.0),
    (13, 14, 0.17093, 0.34802, 0.0, 0.0),
];

/// Buses hosting synchronous condensers in the study configuration.
pub const IEEE14_CONDENSER_BUSES: [u32; 3] = [3, 6, 8];

/// The sixteen outage-eligible lines, in contingency-table order.
pub const IEEE14_ELIGIBLE_LINES: [&str; 16] = [
    "Line_0001_0002/1",
    "Line_0001_0002/2",
    "Line_0001_0005",
    "Line_0002_0003",
    "Line_0002_0004",
    "Line_0002_0005",
    "Line_0003_0004",
    "Line_0004_0005",
    "Line_0006_0011",
    "Line_0006_0012",
    "Line_0006_0013",
    "Line_0009_0010",
    "Line_0009_0014",
    "Line_0010_0011",
    "Line_0012_0013",
    "Line_0013_0014",
];

/// The archive 14-bus system: every machine a synchronous generator,
/// all non-transformer branches outage-eligible.
pub fn ieee14_archive() -> NetworkCase {
    let mut buses = Vec::new();
    let mut loads = Vec::new();
    let mut machines = Vec::new();
    for &(id, name, ty, v_set, pl, ql, pg, qg, qmax, qmin, b) in &IEEE14_BUSES {
        let kind = match ty {
            3 => BusKind::Slack,
            2 => BusKind::PV,
            _ => BusKind::PQ,
        };
        buses.push(Bus {
            id: BusId(id),
            name: name.to_string(),
            kind,
            v_setpoint: (kind != BusKind::PQ).then_some(v_set),
            shunt_g: 0.0,
            shunt_b: b,
            base_kv: 0.0,
        });
        if pl != 0.0 || ql != 0.0 {
            loads.push(Load {
                bus: BusId(id),
                p: pl,
                q: ql,
                scalable: true,
            });
        }
        if kind != BusKind::PQ {
            let mut m = Machine::sync_gen(BusId(id), pg, v_set, qmin, qmax);
            m.q_set = qg;
            machines.push(m);
        }
    }
    let branches = IEEE14_BRANCHES
        .iter()
        .enumerate()
        .map(|(i, &(f, t, r, x, b, tap))| Branch {
            id: BranchId(i as u32 + 1),
            from_bus: BusId(f),
            to_bus: BusId(t),
            r,
            x,
            b_charging: b,
            tap_ratio: if tap == 0.0 { 1.0 } else { tap },
            is_transformer: tap != 0.0,
            circuit_id: String::new(),
            outage_eligible: tap == 0.0,
            in_service: true,
        })
        .collect();
    NetworkCase {
        base_mva: 100.0,
        buses,
        branches,
        loads,
        machines,
    }
}

/// The 14-bus study configuration, condensers connected.
pub fn ieee14() -> NetworkCase {
    let mut case = ieee14_archive()
        .split_parallel(BusId(1), BusId(2), 2)
        .expect("branch 1-2 exists");
    for m in &mut case.machines {
        if IEEE14_CONDENSER_BUSES.contains(&m.bus.0) {
            m.kind = MachineKind::SyncCondenser;
            m.p_set = 0.0;
        }
    }
    for br in &mut case.branches {
        br.outage_eligible = IEEE14_ELIGIBLE_LINES.contains(&br.label().as_str());
    }
    case
}

/// Slack bus 1 at `v = 1.0` feeding PQ bus 2 through a lossless line of
/// reactance `x`, carrying a unity power factor load of `load_mw`.
pub fn two_bus(x: f64, load_mw: f64) -> NetworkCase {
    NetworkCase {
        base_mva: 100.0,
        buses: alloc::vec![
            Bus {
                id: BusId(1),
                name: "slack".to_string(),
                kind: BusKind::Slack,
                v_setpoint: Some(1.0),
                shunt_g: 0.0,
                shunt_b: 0.0,
                base_kv: 138.0,
            },
            Bus {
                id: BusId(2),
                name: "load".to_string(),
                kind: BusKind::PQ,
                v_setpoint: None,
                shunt_g: 0.0,
                shunt_b: 0.0,
                base_kv: 138.0,
            },
        ],
        branches: alloc::vec![Branch {
            id: BranchId(1),
            from_bus: BusId(1),
            to_bus: BusId(2),
            r: 0.0,
            x,
            b_charging: 0.0,
            tap_ratio: 1.0,
            is_transformer: false,
            circuit_id: String::new(),
            outage_eligible: true,
            in_service: true,
        }],
        loads: alloc::vec![Load {
            bus: BusId(2),
            p: load_mw,
            q: 0.0,
            scalable: true,
        }],
        machines: alloc::vec![Machine::sync_gen(BusId(1), 0.0, 1.0, -9999.0, 9999.0)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_case_shape() {
        let case = ieee14();
        case.validate().unwrap();
        assert_eq!(case.buses.len(), 14);
        assert_eq!(case.branches.len(), 21);
        assert_eq!(case.load_buses().len(), 11);
        assert!((case.total_scalable_load() - 259.0).abs() < 1e-9);
        assert_eq!(case.eligible_branches().len(), 16);
        let labels: Vec<String> = case.eligible_branches().iter().map(|b| b.label()).collect();
        assert_eq!(labels, IEEE14_ELIGIBLE_LINES);
        let gens = case.machines.iter().filter(|m| m.kind == MachineKind::SyncGen).count();
        let scs: Vec<u32> = case
            .machines
            .iter()
            .filter(|m| m.kind == MachineKind::SyncCondenser)
            .map(|m| m.bus.0)
            .collect();
        assert_eq!(gens, 2);
        assert_eq!(scs, [3, 6, 8]);
    }
}
