//! Stepwise continuation of the power flow along a load-growth direction.
//!
//! Starting from the base case, total scalable load is raised in fixed MW
//! steps and the power flow is re-solved from the previous solution. When a
//! step fails to converge the step is halved and retried from the last
//! converged point; tracing stops once the step falls below `min_step`. The
//! last converged point is the nose of the P-V curve.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use thiserror::Error;

use crate::acpf::{self, FailureReason, PfError, PowerFlowSolution, SolverSettings};
use crate::netmodel::{
    build_admittance, scale_loads_with, BranchId, BusId, BusKind, CaseError, LoadGrowth,
    NetworkCase,
};

/// Study defaults: 1 MW steps halved down to 1/16 MW, constant power factor
/// growth, slack pickup, and reactive limits not enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSettings {
    /// MW
    pub initial_step: f64,
    /// MW
    pub min_step: f64,
    /// Total scalable load at which tracing stops even if still converging, MW.
    pub max_total_load: f64,
    /// Upper bound on accepted plus rejected steps.
    pub max_steps: usize,
    pub growth: LoadGrowth,
    pub solver: SolverSettings,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            initial_step: 1.0,
            min_step: 0.0625,
            max_total_load: f64::INFINITY,
            max_steps: 200_000,
            growth: LoadGrowth::default(),
            solver: SolverSettings {
                enforce_q_limits: false,
                ..SolverSettings::default()
            },
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<(), CpfError> {
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step) {
            return Err(CpfError::BadSteps {
                initial: self.initial_step,
                min: self.min_step,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PVCurvePoint {
    /// System scalable load, MW.
    pub total_load: f64,
    /// Voltage magnitude per bus, in [`PVCurveSet::bus_ids`] order.
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PVCurveSet {
    pub bus_ids: Vec<BusId>,
    pub points: Vec<PVCurvePoint>,
    /// MW
    pub nose_total_load: f64,
    pub nose_v: Vec<f64>,
    /// Bus types at the nose after reactive-limit switching.
    pub nose_kind: Vec<BusKind>,
    /// MW
    pub base_total_load: f64,
    /// Buses carrying load.
    pub load_buses: BTreeSet<BusId>,
    /// Full solution at the nose.
    pub nose_solution: PowerFlowSolution,
    pub stats: TraceStats,
}

impl PVCurveSet {
    /// PQ load buses at the nose, including generator buses that hit a limit.
    pub fn default_eligible(&self) -> BTreeSet<BusId> {
        self.bus_ids
            .iter()
            .zip(&self.nose_kind)
            .filter(|(b, k)| **k == BusKind::PQ && self.load_buses.contains(b))
            .map(|(b, _)| *b)
            .collect()
    }

    /// Voltage series of one bus as `(total_load, v)` pairs.
    pub fn series(&self, bus: BusId) -> Option<Vec<(f64, f64)>> {
        let i = self.bus_ids.iter().position(|&b| b == bus)?;
        Some(self.points.iter().map(|p| (p.total_load, p.v[i])).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpfError {
    #[error("base case power flow does not converge ({0:?})")]
    InfeasibleBase(Option<FailureReason>),
    #[error("step sizes must satisfy 0 < min_step <= initial_step (got {initial}, {min})")]
    BadSteps { initial: f64, min: f64 },
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    PowerFlow(#[from] PfError),
}

/// Traces the upper branch of the P-V curves with `outages` removed.
pub fn trace_pv(
    case: &NetworkCase,
    outages: &[BranchId],
    settings: &ContinuationSettings,
) -> Result<PVCurveSet, CpfError> {
    settings.validate()?;
    let y = build_admittance(case, outages)?;
    let base_total = case.total_scalable_load();
    let mut stats = TraceStats::default();

    let base = acpf::solve(case, &y, &settings.solver, None)?;
    stats.newton_iterations += base.iterations;
    if !base.converged {
        return Err(CpfError::InfeasibleBase(base.failure));
    }
    let mut points = alloc::vec![PVCurvePoint {
        total_load: base_total,
        v: base.v.clone(),
    }];
    let mut last = base;
    let mut delta = 0.0;
    let mut step = settings.initial_step;
    let growth_cap = settings.max_total_load - base_total;

    while step >= settings.min_step && stats.accepted_steps + stats.rejected_steps < settings.max_steps {
        let mut next = delta + step;
        let capped = next >= growth_cap;
        if capped {
            next = growth_cap;
        }
        if !(next > delta) {
            break;
        }
        let loaded = scale_loads_with(case, next, settings.growth)?;
        let sol = acpf::solve(&loaded, &y, &settings.solver, Some(&last))?;
        stats.newton_iterations += sol.iterations;
        if sol.converged {
            stats.accepted_steps += 1;
            delta = next;
            points.push(PVCurvePoint {
                total_load: base_total + delta,
                v: sol.v.clone(),
            });
            last = sol;
            if capped {
                break;
            }
        } else {
            stats.rejected_steps += 1;
            step /= 2.0;
        }
    }

    Ok(PVCurveSet {
        bus_ids: last.bus_ids.clone(),
        nose_total_load: points.last().map_or(base_total, |p| p.total_load),
        nose_v: last.v.clone(),
        nose_kind: last.final_kind.clone(),
        base_total_load: base_total,
        load_buses: case.load_buses(),
        points,
        nose_solution: last,
        stats,
    })
}

/// MW between the base operating point and the nose.
pub fn loadability_margin(curves: &PVCurveSet) -> f64 {
    curves.nose_total_load - curves.base_total_load
}

/// Voltages closer than this are treated as tied.
pub const CRITICAL_TIE_TOLERANCE: f64 = 1e-6;

/// Eligible bus with the lowest nose voltage; ties go to the lowest bus id.
pub fn critical_bus(curves: &PVCurveSet, eligible: &BTreeSet<BusId>) -> Option<BusId> {
    let candidates: Vec<(BusId, f64)> = curves
        .bus_ids
        .iter()
        .zip(&curves.nose_v)
        .filter(|(b, _)| eligible.contains(b))
        .map(|(b, v)| (*b, *v))
        .collect();
    let v_min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    candidates
        .into_iter()
        .filter(|&(_, v)| v <= v_min + CRITICAL_TIE_TOLERANCE)
        .map(|(b, _)| b)
        .min()
}
