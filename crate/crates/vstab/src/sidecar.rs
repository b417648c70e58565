//! TOML sidecar carrying what a CDF file cannot: machine kinds, reactive
//! limits, parallel-circuit splits and the outage-eligible line list.
//!
//! ```toml
//! [[parallel]]
//! from = 1
//! to = 2
//! circuits = 2
//!
//! [[machine]]
//! bus = 3
//! kind = "sync_condenser"
//!
//! [outages]
//! eligible = ["Line_0001_0002/1", "Line_0001_0005"]
//! ```
//!
//! Splits are applied first, so outage names refer to the split circuits.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vstab_core::netmodel::{BusId, BusKind, Machine, MachineKind, NetworkCase};
use vstab_core::renewgen::ScigParams;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("sidecar syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("unknown machine kind '{0}'")]
    UnknownKind(String),
    #[error("bus {0} in sidecar does not exist")]
    UnknownBus(u32),
    #[error("no branch between buses {0} and {1} to split")]
    NoSuchBranch(u32, u32),
    #[error("outage list names unknown line '{0}'")]
    UnknownLine(String),
    #[error("machine at bus {0}: p_set is required for a new machine")]
    MissingDispatch(u32),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    #[serde(default)]
    pub parallel: Vec<ParallelSplit>,
    #[serde(default)]
    pub machine: Vec<MachineEntry>,
    pub outages: Option<OutageList>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelSplit {
    pub from: u32,
    pub to: u32,
    pub circuits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineEntry {
    pub bus: u32,
    pub kind: String,
    pub p_set: Option<f64>,
    pub v_set: Option<f64>,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub rating: Option<f64>,
    pub scig: Option<ScigEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScigEntry {
    pub r_s: f64,
    pub r_r: f64,
    pub x_ls: f64,
    pub x_lr: f64,
    pub x_m: f64,
    /// Defaults to full no-load compensation at 1.0 pu.
    pub b_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageList {
    pub eligible: Vec<String>,
}

pub fn parse_sidecar(text: &str) -> Result<Sidecar, SidecarError> {
    Ok(toml::from_str(text)?)
}

impl Sidecar {
    pub fn apply(&self, case: &NetworkCase) -> Result<NetworkCase, SidecarError> {
        let mut out = case.clone();
        for split in &self.parallel {
            out = out
                .split_parallel(BusId(split.from), BusId(split.to), split.circuits)
                .ok_or(SidecarError::NoSuchBranch(split.from, split.to))?;
        }
        for entry in &self.machine {
            apply_machine(&mut out, entry)?;
        }
        if let Some(list) = &self.outages {
            let labels: Vec<String> = out.branches.iter().map(|b| b.label()).collect();
            if let Some(bad) = list.eligible.iter().find(|l| !labels.contains(l)) {
                return Err(SidecarError::UnknownLine(bad.clone()));
            }
            for (br, label) in out.branches.iter_mut().zip(labels) {
                br.outage_eligible = list.eligible.contains(&label);
            }
        }
        Ok(out)
    }
}

fn apply_machine(case: &mut NetworkCase, e: &MachineEntry) -> Result<(), SidecarError> {
    let kind = MachineKind::from_name(&e.kind).ok_or_else(|| SidecarError::UnknownKind(e.kind.clone()))?;
    let bus = BusId(e.bus);
    let bus_kind = case
        .bus(bus)
        .map(|b| b.kind)
        .ok_or(SidecarError::UnknownBus(e.bus))?;
    let idx = match case.machines.iter().position(|m| m.bus == bus) {
        Some(i) => i,
        None => {
            let p_set = e.p_set.ok_or(SidecarError::MissingDispatch(e.bus))?;
            let v_set = e.v_set.unwrap_or(1.0);
            case.machines.push(Machine::sync_gen(bus, p_set, v_set, 0.0, 0.0));
            if kind != MachineKind::Scig && bus_kind == BusKind::PQ {
                let b = case.buses.iter_mut().find(|b| b.id == bus).expect("bus exists");
                b.kind = BusKind::PV;
                b.v_setpoint = Some(v_set);
            }
            case.machines.len() - 1
        }
    };
    let m = &mut case.machines[idx];
    m.kind = kind;
    if let Some(p) = e.p_set {
        m.p_set = p;
    }
    if kind == MachineKind::SyncCondenser {
        m.p_set = 0.0;
    }
    if let Some(v) = e.v_set {
        m.v_set = v;
    }
    if let Some(q) = e.q_min {
        m.q_min = q;
    }
    if let Some(q) = e.q_max {
        m.q_max = q;
    }
    if let Some(r) = e.rating {
        m.rating = r;
    }
    if let Some(s) = e.scig {
        let params = ScigParams {
            r_s: s.r_s,
            r_r: s.r_r,
            x_ls: s.x_ls,
            x_lr: s.x_lr,
            x_m: s.x_m,
            rating: m.rating,
            b_cap: 0.0,
        };
        m.scig = Some(match s.b_cap {
            Some(b) => ScigParams { b_cap: b, ..params },
            None => params.with_full_compensation(),
        });
    }
    Ok(())
}
