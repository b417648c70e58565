//! Network data model, per-unit conventions, admittance assembly and topology.
//!
//! Impedances, shunts and line charging are per-unit on [`NetworkCase::base_mva`].
//! Loads and machine ratings stay in MW / MVAr / MVA so that load growth can be
//! expressed in the same units the studies report.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::renewgen::ScigParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchId(pub u32);

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BusKind {
    Slack,
    PV,
    PQ,
}

impl fmt::Display for BusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BusKind::Slack => "slack",
            BusKind::PV => "pv",
            BusKind::PQ => "pq",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub name: String,
    pub kind: BusKind,
    /// Regulated voltage magnitude; present for PV and slack buses.
    pub v_setpoint: Option<f64>,
    pub shunt_g: f64,
    pub shunt_b: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, split half per terminal.
    pub b_charging: f64,
    /// Off-nominal turns ratio on the `from_bus` side; 1.0 for lines.
    pub tap_ratio: f64,
    pub is_transformer: bool,
    /// Parallel-circuit suffix such as `/1`; empty for single circuits.
    pub circuit_id: String,
    pub outage_eligible: bool,
    pub in_service: bool,
}

impl Branch {
    /// Name in the `Line_0001_0002/1` style used by contingency tables.
    pub fn label(&self) -> String {
        format!(
            "Line_{:04}_{:04}{}",
            self.from_bus.0, self.to_bus.0, self.circuit_id
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub bus: BusId,
    /// MW
    pub p: f64,
    /// MVAr
    pub q: f64,
    pub scalable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MachineKind {
    SyncGen,
    SyncCondenser,
    Scig,
    Dfig,
    SolarPv,
}

impl MachineKind {
    pub const ALL: [MachineKind; 5] = [
        MachineKind::SyncGen,
        MachineKind::SyncCondenser,
        MachineKind::Scig,
        MachineKind::Dfig,
        MachineKind::SolarPv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MachineKind::SyncGen => "sync_gen",
            MachineKind::SyncCondenser => "sync_condenser",
            MachineKind::Scig => "scig",
            MachineKind::Dfig => "dfig",
            MachineKind::SolarPv => "solar_pv",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for MachineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub bus: BusId,
    pub kind: MachineKind,
    /// MW
    pub p_set: f64,
    /// Reactive output used when the machine sits on a PQ-typed bus, MVAr.
    pub q_set: f64,
    pub v_set: f64,
    /// MVAr
    pub q_min: f64,
    /// MVAr
    pub q_max: f64,
    /// MVA; 0 when the source data does not state it.
    pub rating: f64,
    pub in_service: bool,
    /// Equivalent-circuit data, used only by [`MachineKind::Scig`].
    pub scig: Option<ScigParams>,
}

impl Machine {
    /// Synchronous generator with the given dispatch and reactive range.
    pub fn sync_gen(bus: BusId, p_set: f64, v_set: f64, q_min: f64, q_max: f64) -> Self {
        Machine {
            bus,
            kind: MachineKind::SyncGen,
            p_set,
            q_set: 0.0,
            v_set,
            q_min,
            q_max,
            rating: 0.0,
            in_service: true,
            scig: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseError {
    #[error("no slack bus")]
    NoSlack,
    #[error("more than one slack bus ({0} and {1})")]
    MultipleSlack(BusId, BusId),
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("duplicate branch id {0}")]
    DuplicateBranch(BranchId),
    #[error("{what} refers to unknown bus {bus}")]
    UnknownBus { what: &'static str, bus: BusId },
    #[error("branch {0} has zero series reactance")]
    ZeroReactance(BranchId),
    #[error("branch {0} connects a bus to itself")]
    SelfLoop(BranchId),
    #[error("branch {0} has non-positive tap ratio")]
    BadTap(BranchId),
    #[error("bus {0} regulates voltage but has no positive setpoint")]
    MissingSetpoint(BusId),
    #[error("machine at bus {0} has q_min > q_max")]
    BadReactiveLimits(BusId),
    #[error("base MVA must be positive")]
    BadBase,
    #[error("load growth must be non-negative, got {0} MW")]
    NegativeGrowth(f64),
    #[error("cannot grow load: total scalable load is zero")]
    NoScalableLoad,
    #[error("unknown branch {0}")]
    UnknownBranch(BranchId),
}

/// How reactive load follows active load when the system is stressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReactiveGrowth {
    /// Each load keeps its power factor.
    #[default]
    ConstantPowerFactor,
    /// Reactive load stays at its base value.
    ActiveOnly,
}

/// Who supplies the additional active power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GenerationPickup {
    /// The slack bus covers all load growth.
    #[default]
    Slack,
    /// Non-slack synchronous generators scale with the load; slack covers the rest.
    Proportional,
}

/// Direction of system stress used by [`scale_loads_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadGrowth {
    pub reactive: ReactiveGrowth,
    pub pickup: GenerationPickup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub loads: Vec<Load>,
    pub machines: Vec<Machine>,
}

impl NetworkCase {
    /// Checks ids, cross references and per-branch invariants.
    pub fn validate(&self) -> Result<(), CaseError> {
        if !(self.base_mva > 0.0) {
            return Err(CaseError::BadBase);
        }
        let mut ids = BTreeSet::new();
        let mut slack: Option<BusId> = None;
        for bus in &self.buses {
            if !ids.insert(bus.id) {
                return Err(CaseError::DuplicateBus(bus.id));
            }
            if bus.kind == BusKind::Slack {
                if let Some(first) = slack {
                    return Err(CaseError::MultipleSlack(first, bus.id));
                }
                slack = Some(bus.id);
            }
            if bus.kind != BusKind::PQ && !bus.v_setpoint.is_some_and(|v| v > 0.0) {
                return Err(CaseError::MissingSetpoint(bus.id));
            }
        }
        if slack.is_none() {
            return Err(CaseError::NoSlack);
        }
        let mut branch_ids = BTreeSet::new();
        for br in &self.branches {
            if !branch_ids.insert(br.id) {
                return Err(CaseError::DuplicateBranch(br.id));
            }
            for bus in [br.from_bus, br.to_bus] {
                if !ids.contains(&bus) {
                    return Err(CaseError::UnknownBus { what: "branch", bus });
                }
            }
            if br.from_bus == br.to_bus {
                return Err(CaseError::SelfLoop(br.id));
            }
            if br.x == 0.0 {
                return Err(CaseError::ZeroReactance(br.id));
            }
            if !(br.tap_ratio > 0.0) {
                return Err(CaseError::BadTap(br.id));
            }
        }
        for load in &self.loads {
            if !ids.contains(&load.bus) {
                return Err(CaseError::UnknownBus { what: "load", bus: load.bus });
            }
        }
        for m in &self.machines {
            if !ids.contains(&m.bus) {
                return Err(CaseError::UnknownBus { what: "machine", bus: m.bus });
            }
            if m.q_min > m.q_max {
                return Err(CaseError::BadReactiveLimits(m.bus));
            }
        }
        Ok(())
    }

    /// Bus id to position in [`NetworkCase::buses`].
    pub fn bus_index(&self) -> BTreeMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn branch(&self, id: BranchId) -> Option<&Branch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn slack_bus(&self) -> Option<BusId> {
        self.buses.iter().find(|b| b.kind == BusKind::Slack).map(|b| b.id)
    }

    /// Sum of scalable active load in MW.
    pub fn total_scalable_load(&self) -> f64 {
        self.loads.iter().filter(|l| l.scalable).map(|l| l.p).sum()
    }

    /// Sum of all active load in MW.
    pub fn total_load(&self) -> f64 {
        self.loads.iter().map(|l| l.p).sum()
    }

    /// Buses that carry a non-zero load.
    pub fn load_buses(&self) -> BTreeSet<BusId> {
        self.loads
            .iter()
            .filter(|l| l.p != 0.0 || l.q != 0.0)
            .map(|l| l.bus)
            .collect()
    }

    /// Buses with at least one in-service machine.
    pub fn machine_buses(&self) -> BTreeSet<BusId> {
        self.machines
            .iter()
            .filter(|m| m.in_service)
            .map(|m| m.bus)
            .collect()
    }

    /// Branches that may be taken out in a contingency sweep, in case order.
    pub fn eligible_branches(&self) -> Vec<&Branch> {
        self.branches
            .iter()
            .filter(|b| b.outage_eligible && b.in_service)
            .collect()
    }

    /// Same network with these branches removed.
    pub fn without_branches(&self, outages: &[BranchId]) -> NetworkCase {
        let mut out = self.clone();
        out.branches.retain(|b| !outages.contains(&b.id));
        out
    }

    /// Re-expresses per-unit quantities on a different MVA base.
    pub fn rebase(&self, new_base_mva: f64) -> NetworkCase {
        let k = new_base_mva / self.base_mva;
        let mut out = self.clone();
        out.base_mva = new_base_mva;
        for bus in &mut out.buses {
            bus.shunt_g /= k;
            bus.shunt_b /= k;
        }
        for br in &mut out.branches {
            br.r *= k;
            br.x *= k;
            br.b_charging /= k;
        }
        out
    }

    /// Replaces the branch between `from` and `to` by `circuits` identical
    /// parallel circuits whose aggregate equals the original branch.
    ///
    /// Branch ids are renumbered 1.. in list order afterwards.
    pub fn split_parallel(&self, from: BusId, to: BusId, circuits: u32) -> Option<NetworkCase> {
        if circuits < 2 {
            return None;
        }
        let pos = self.branches.iter().position(|b| {
            (b.from_bus == from && b.to_bus == to) || (b.from_bus == to && b.to_bus == from)
        })?;
        let orig = self.branches[pos].clone();
        let n = f64::from(circuits);
        let parts = (1..=circuits).map(|c| Branch {
            r: orig.r * n,
            x: orig.x * n,
            b_charging: orig.b_charging / n,
            circuit_id: format!("/{c}"),
            ..orig.clone()
        });
        let mut out = self.clone();
        out.branches.splice(pos..=pos, parts);
        for (i, br) in out.branches.iter_mut().enumerate() {
            br.id = BranchId(i as u32 + 1);
        }
        Some(out)
    }
}

/// Complex nodal admittance matrix in compressed sparse row form.
///
/// Diagonal entries are always stored, so every row has at least one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    bus_ids: Vec<BusId>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn bus_ids(&self) -> &[BusId] {
        &self.bus_ids
    }

    pub fn index_of(&self, bus: BusId) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus)
    }

    /// Stored entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map_or(Complex64::new(0.0, 0.0), |(_, v)| v)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        let mut out = alloc::vec![alloc::vec![Complex64::new(0.0, 0.0); n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

/// Assembles the nodal admittance matrix with `outages` removed.
///
/// Unknown branch ids in `outages` are reported as an error.
pub fn build_admittance(
    case: &NetworkCase,
    outages: &[BranchId],
) -> Result<AdmittanceMatrix, CaseError> {
    for id in outages {
        if case.branch(*id).is_none() {
            return Err(CaseError::UnknownBranch(*id));
        }
    }
    let index = case.bus_index();
    let n = case.buses.len();
    let mut acc: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    for (i, bus) in case.buses.iter().enumerate() {
        acc.insert((i, i), Complex64::new(bus.shunt_g, bus.shunt_b));
    }
    for br in case.branches.iter().filter(|b| b.in_service) {
        if outages.contains(&br.id) {
            continue;
        }
        let f = index[&br.from_bus];
        let t = index[&br.to_bus];
        let y = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let half_b = Complex64::new(0.0, br.b_charging / 2.0);
        let tap = br.tap_ratio;
        *acc.entry((f, f)).or_default() += (y + half_b) / (tap * tap);
        *acc.entry((t, t)).or_default() += y + half_b;
        *acc.entry((f, t)).or_default() -= y / tap;
        *acc.entry((t, f)).or_default() -= y / tap;
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(acc.len());
    let mut vals = Vec::with_capacity(acc.len());
    row_ptr.push(0);
    let mut row = 0;
    for ((i, j), v) in acc {
        while row < i {
            row_ptr.push(cols.len());
            row += 1;
        }
        cols.push(j);
        vals.push(v);
    }
    while row < n {
        row_ptr.push(cols.len());
        row += 1;
    }
    Ok(AdmittanceMatrix {
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        row_ptr,
        cols,
        vals,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IslandReport {
    /// Connected components, each sorted; ordered by smallest member.
    pub islands: Vec<BTreeSet<BusId>>,
    pub slack_island_index: Option<usize>,
    /// Load buses outside the slack island.
    pub disconnected_load_buses: BTreeSet<BusId>,
}

impl IslandReport {
    pub fn slack_island(&self) -> Option<&BTreeSet<BusId>> {
        self.slack_island_index.map(|i| &self.islands[i])
    }
}

/// Connected components over in-service branches not listed in `outages`.
pub fn check_connectivity(case: &NetworkCase, outages: &[BranchId]) -> IslandReport {
    let index = case.bus_index();
    let n = case.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for br in case.branches.iter().filter(|b| b.in_service) {
        if outages.contains(&br.id) {
            continue;
        }
        let (Some(&f), Some(&t)) = (index.get(&br.from_bus), index.get(&br.to_bus)) else {
            continue;
        };
        let (rf, rt) = (find(&mut parent, f), find(&mut parent, t));
        if rf != rt {
            parent[rf.max(rt)] = rf.min(rt);
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<BusId>> = BTreeMap::new();
    for (i, bus) in case.buses.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(bus.id);
    }
    let mut islands: Vec<BTreeSet<BusId>> = groups.into_values().collect();
    islands.sort_by_key(|s| s.first().copied());
    let slack_island_index = case
        .slack_bus()
        .and_then(|s| islands.iter().position(|isl| isl.contains(&s)));
    let disconnected_load_buses = case
        .load_buses()
        .into_iter()
        .filter(|b| slack_island_index.is_none_or(|k| !islands[k].contains(b)))
        .collect();
    IslandReport {
        islands,
        slack_island_index,
        disconnected_load_buses,
    }
}

/// Connects or disconnects every synchronous condenser.
///
/// Disconnecting removes the machines and demotes their buses to PQ unless
/// another voltage-regulating machine remains there. Connecting makes each
/// condenser bus PV-typed at the condenser setpoint with zero active output.
pub fn apply_sc_mode(case: &NetworkCase, enabled: bool) -> NetworkCase {
    let mut out = case.clone();
    let sc_buses: BTreeSet<BusId> = case
        .machines
        .iter()
        .filter(|m| m.kind == MachineKind::SyncCondenser)
        .map(|m| m.bus)
        .collect();
    if enabled {
        for m in out
            .machines
            .iter_mut()
            .filter(|m| m.kind == MachineKind::SyncCondenser)
        {
            m.p_set = 0.0;
            m.in_service = true;
        }
        for bus in out.buses.iter_mut().filter(|b| sc_buses.contains(&b.id)) {
            if bus.kind == BusKind::PQ {
                bus.kind = BusKind::PV;
            }
            if bus.v_setpoint.is_none() {
                bus.v_setpoint = case
                    .machines
                    .iter()
                    .find(|m| m.bus == bus.id && m.kind == MachineKind::SyncCondenser)
                    .map(|m| m.v_set);
            }
        }
    } else {
        out.machines.retain(|m| m.kind != MachineKind::SyncCondenser);
        for bus in out.buses.iter_mut().filter(|b| sc_buses.contains(&b.id)) {
            let regulated = bus.kind == BusKind::Slack
                || out.machines.iter().any(|m| {
                    m.bus == bus.id
                        && m.in_service
                        && m.kind != MachineKind::Scig
                });
            if !regulated {
                bus.kind = BusKind::PQ;
                bus.v_setpoint = None;
            }
        }
    }
    out
}

/// Grows total scalable load by `delta_p` MW at constant power factor,
/// with the slack bus picking up the difference.
pub fn scale_loads(case: &NetworkCase, delta_p: f64) -> Result<NetworkCase, CaseError> {
    scale_loads_with(case, delta_p, LoadGrowth::default())
}

/// Grows total scalable load by `delta_p` MW, distributing the increase in
/// proportion to each load's active power.
pub fn scale_loads_with(
    case: &NetworkCase,
    delta_p: f64,
    growth: LoadGrowth,
) -> Result<NetworkCase, CaseError> {
    if !(delta_p >= 0.0) {
        return Err(CaseError::NegativeGrowth(delta_p));
    }
    if delta_p == 0.0 {
        return Ok(case.clone());
    }
    let total = case.total_scalable_load();
    if total == 0.0 {
        return Err(CaseError::NoScalableLoad);
    }
    let factor = 1.0 + delta_p / total;
    let mut out = case.clone();
    for load in out.loads.iter_mut().filter(|l| l.scalable) {
        load.p *= factor;
        if growth.reactive == ReactiveGrowth::ConstantPowerFactor {
            load.q *= factor;
        }
    }
    if growth.pickup == GenerationPickup::Proportional {
        let slack = case.slack_bus();
        for m in out
            .machines
            .iter_mut()
            .filter(|m| m.kind == MachineKind::SyncGen && Some(m.bus) != slack)
        {
            m.p_set *= factor;
        }
    }
    Ok(out)
}
