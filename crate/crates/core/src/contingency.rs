//! Line-outage enumeration, topology screening and critical-bus statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::cpf::{critical_bus, loadability_margin, trace_pv, ContinuationSettings, CpfError, PVCurveSet};
use crate::netmodel::{check_connectivity, BranchId, BusId, NetworkCase, ReactiveGrowth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Single = 1,
    Double = 2,
}

impl TryFrom<u8> for Order {
    type Error = ContingencyError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Order::Single),
            2 => Ok(Order::Double),
            other => Err(ContingencyError::BadOrder(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContingencyError {
    #[error("contingency order must be 1 or 2, got {0}")]
    BadOrder(u8),
    #[error("no feasible contingencies to aggregate")]
    EmptyReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencySpec {
    /// 1-based position in the enumeration.
    pub id: usize,
    pub outages: Vec<BranchId>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Infeasibility {
    /// A load or generator bus lost its path to the slack bus.
    Islanded,
    /// The post-outage base load does not solve.
    BaseDiverged,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Infeasibility::Islanded => "islanded",
            Infeasibility::BaseDiverged => "base_diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyResult {
    pub spec: ContingencySpec,
    pub feasible: bool,
    pub infeasibility: Option<Infeasibility>,
    pub critical_bus: Option<BusId>,
    /// MW
    pub margin: Option<f64>,
    pub curves: Option<PVCurveSet>,
}

/// One spec per eligible branch (order 1) or per unordered pair of eligible
/// branches (order 2), in case order.
pub fn enumerate(case: &NetworkCase, order: Order) -> Vec<ContingencySpec> {
    let eligible = case.eligible_branches();
    let mut specs = Vec::new();
    match order {
        Order::Single => {
            for br in &eligible {
                specs.push(ContingencySpec {
                    id: specs.len() + 1,
                    outages: alloc::vec![br.id],
                    label: br.label(),
                });
            }
        }
        Order::Double => {
            for (i, a) in eligible.iter().enumerate() {
                for b in &eligible[i + 1..] {
                    specs.push(ContingencySpec {
                        id: specs.len() + 1,
                        outages: alloc::vec![a.id, b.id],
                        label: alloc::format!("{} + {}", a.label(), b.label()),
                    });
                }
            }
        }
    }
    specs
}

/// `Some(Islanded)` when any load or machine bus is cut off from the slack.
pub fn screen(case: &NetworkCase, outages: &[BranchId]) -> Option<Infeasibility> {
    let report = check_connectivity(case, outages);
    let Some(slack_island) = report.slack_island() else {
        return Some(Infeasibility::Islanded);
    };
    let stranded = case
        .load_buses()
        .into_iter()
        .chain(case.machine_buses())
        .any(|b| !slack_island.contains(&b));
    stranded.then_some(Infeasibility::Islanded)
}

/// Screens, traces and classifies a single contingency.
pub fn run_contingency(
    case: &NetworkCase,
    spec: &ContingencySpec,
    settings: &ContinuationSettings,
) -> ContingencyResult {
    let infeasible = |reason| ContingencyResult {
        spec: spec.clone(),
        feasible: false,
        infeasibility: Some(reason),
        critical_bus: None,
        margin: None,
        curves: None,
    };
    if let Some(reason) = screen(case, &spec.outages) {
        return infeasible(reason);
    }
    let curves = match trace_pv(case, &spec.outages, settings) {
        Ok(c) => c,
        Err(CpfError::InfeasibleBase(_)) | Err(CpfError::PowerFlow(_)) => {
            return infeasible(Infeasibility::BaseDiverged)
        }
        Err(CpfError::Case(_)) | Err(CpfError::BadSteps { .. }) => {
            return infeasible(Infeasibility::BaseDiverged)
        }
    };
    let mut eligible = curves.default_eligible();
    if eligible.is_empty() {
        eligible = curves.load_buses.clone();
    }
    let Some(bus) = critical_bus(&curves, &eligible) else {
        return infeasible(Infeasibility::BaseDiverged);
    };
    ContingencyResult {
        spec: spec.clone(),
        feasible: true,
        infeasibility: None,
        critical_bus: Some(bus),
        margin: Some(loadability_margin(&curves)),
        curves: Some(curves),
    }
}

/// Runs every spec in order. Failures are recorded per result.
pub fn run_sweep(
    case: &NetworkCase,
    specs: &[ContingencySpec],
    settings: &ContinuationSettings,
) -> Vec<ContingencyResult> {
    specs
        .iter()
        .map(|s| run_contingency(case, s, settings))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub number: usize,
    pub label: String,
    pub critical_bus: Option<BusId>,
    pub infeasibility: Option<Infeasibility>,
    /// MW
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CriticalBusReport {
    pub rows: Vec<ReportRow>,
    /// Times each bus was critical, over feasible contingencies.
    pub histogram: BTreeMap<BusId, usize>,
}

impl CriticalBusReport {
    /// Most frequent critical bus; ties go to the lowest bus id.
    pub fn modal_bus(&self) -> Result<BusId, ContingencyError> {
        let best = self
            .histogram
            .values()
            .copied()
            .max()
            .ok_or(ContingencyError::EmptyReport)?;
        Ok(*self
            .histogram
            .iter()
            .find(|(_, &c)| c == best)
            .map(|(b, _)| b)
            .expect("max exists"))
    }

    pub fn feasible_count(&self) -> usize {
        self.histogram.values().sum()
    }

    pub fn count(&self, bus: BusId) -> usize {
        self.histogram.get(&bus).copied().unwrap_or(0)
    }
}

pub fn aggregate(results: &[ContingencyResult]) -> CriticalBusReport {
    let mut report = CriticalBusReport::default();
    for r in results {
        report.rows.push(ReportRow {
            number: r.spec.id,
            label: r.spec.label.clone(),
            critical_bus: r.critical_bus,
            infeasibility: r.infeasibility,
            margin: r.margin,
        });
        if let (true, Some(bus)) = (r.feasible, r.critical_bus) {
            *report.histogram.entry(bus).or_default() += 1;
        }
    }
    report
}

/// One alternative solver / load-growth setting used to probe how a
/// critical-bus result depends on unreported study options.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensitivityVariant {
    pub name: &'static str,
    pub enforce_q_limits: bool,
    pub reactive: ReactiveGrowth,
}

pub const SENSITIVITY_VARIANTS: [SensitivityVariant; 4] = [
    SensitivityVariant {
        name: "qlim_on+const_pf",
        enforce_q_limits: true,
        reactive: ReactiveGrowth::ConstantPowerFactor,
    },
    SensitivityVariant {
        name: "qlim_on+p_only",
        enforce_q_limits: true,
        reactive: ReactiveGrowth::ActiveOnly,
    },
    SensitivityVariant {
        name: "qlim_off+const_pf",
        enforce_q_limits: false,
        reactive: ReactiveGrowth::ConstantPowerFactor,
    },
    SensitivityVariant {
        name: "qlim_off+p_only",
        enforce_q_limits: false,
        reactive: ReactiveGrowth::ActiveOnly,
    },
];

impl SensitivityVariant {
    pub fn apply(&self, base: &ContinuationSettings) -> ContinuationSettings {
        let mut s = *base;
        s.solver.enforce_q_limits = self.enforce_q_limits;
        s.growth.reactive = self.reactive;
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityOutcome {
    pub variant: SensitivityVariant,
    pub critical_bus: Option<BusId>,
    pub margin: Option<f64>,
}

/// Re-runs one contingency under every [`SENSITIVITY_VARIANTS`] setting.
pub fn sensitivity(
    case: &NetworkCase,
    spec: &ContingencySpec,
    base: &ContinuationSettings,
) -> Vec<SensitivityOutcome> {
    SENSITIVITY_VARIANTS
        .iter()
        .map(|variant| {
            let r = run_contingency(case, spec, &variant.apply(base));
            SensitivityOutcome {
                variant: *variant,
                critical_bus: r.critical_bus,
                margin: r.margin,
            }
        })
        .collect()
}

/// Buses that would be reported for `spec` under at least one variant.
pub fn recoverable_buses(outcomes: &[SensitivityOutcome]) -> BTreeSet<BusId> {
    outcomes.iter().filter_map(|o| o.critical_bus).collect()
}
