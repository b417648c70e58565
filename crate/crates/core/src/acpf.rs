//! Newton-Raphson AC power flow in polar coordinates with PV/PQ switching.
//!
//! Unknowns and residuals share one fixed ordering: angles of every non-slack
//! bus in case order, then magnitudes of every PQ bus in case order. The
//! residual vector is `[dP; dQ]` with `dP = P_scheduled - P_calculated`.
//! [`jacobian`] returns the derivative of the *calculated* injections, so a
//! Newton step solves `J dx = residual`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{norm_inf, DenseLu, LinearSolver, SparseMatrix};
use crate::netmodel::{AdmittanceMatrix, BusId, BusKind, NetworkCase};
use crate::renewgen::{bus_model, BusMode, RenewError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Infinity-norm mismatch target, per-unit.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub enforce_q_limits: bool,
    /// Ignore any warm start and begin from V = 1, theta = 0.
    pub flat_start: bool,
    /// Reactive limits are only checked once the mismatch is below this.
    pub q_check_threshold: f64,
    /// A bus switching more often than this is frozen as PQ.
    pub max_switches: u32,
    /// Mismatch norm treated as divergence.
    pub divergence_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-8,
            max_iterations: 50,
            enforce_q_limits: true,
            flat_start: false,
            q_check_threshold: 1e-3,
            max_switches: 4,
            divergence_threshold: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PfError {
    #[error("admittance matrix has {found} buses, case has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("case has no slack bus")]
    NoSlack,
    #[error("machine model: {0}")]
    Machine(#[from] RenewError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    IterationLimit,
    /// Mismatch exceeded the divergence threshold or became NaN.
    Diverged,
    SingularJacobian,
    /// An induction machine had no equilibrium at the iterate voltage.
    MachineEquilibrium,
    /// Induction machine reactive power did not settle.
    MachineLoop,
}

/// A PV/PQ type change made while enforcing reactive limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub bus: BusId,
    pub iteration: usize,
    pub to: BusKind,
    /// Limit the reactive output was pinned to, per-unit; `None` on release.
    pub pinned_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub bus_ids: Vec<BusId>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// Net calculated injections, per-unit.
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    /// Active output of the machines at each bus, per-unit.
    pub p_gen: Vec<f64>,
    /// Reactive output of the voltage-regulating machines at each bus, per-unit.
    pub q_gen: Vec<f64>,
    pub final_kind: Vec<BusKind>,
    pub iterations: usize,
    pub converged: bool,
    pub max_mismatch: f64,
    pub switch_events: Vec<SwitchEvent>,
    /// Buses frozen as PQ by the oscillation guard.
    pub frozen: Vec<BusId>,
    pub failure: Option<FailureReason>,
}

impl PowerFlowSolution {
    pub fn index_of(&self, bus: BusId) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus)
    }

    pub fn v_at(&self, bus: BusId) -> Option<f64> {
        self.index_of(bus).map(|i| self.v[i])
    }
}

/// Scheduled injections and regulation data per bus, per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: Vec<BusKind>,
    /// Net scheduled active injection.
    pub p: Vec<f64>,
    /// Net scheduled reactive injection used while the bus is PQ.
    pub q: Vec<f64>,
    /// Reactive injection not produced by regulating machines (loads, SCIGs).
    pub q_fixed: Vec<f64>,
    /// Active injection of machines at the bus.
    pub p_gen: Vec<f64>,
    pub v_set: Vec<f64>,
    pub q_min: Vec<f64>,
    pub q_max: Vec<f64>,
    /// Bus indices hosting induction machines whose Q depends on V.
    pub voltage_dependent: Vec<usize>,
}

impl Schedule {
    /// Builds the schedule; `v` is the voltage used for induction machines.
    pub fn from_case(case: &NetworkCase, v: Option<&[f64]>) -> Result<Schedule, PfError> {
        let n = case.buses.len();
        let base = case.base_mva;
        let index = case.bus_index();
        let mut s = Schedule {
            kind: case.buses.iter().map(|b| b.kind).collect(),
            p: vec![0.0; n],
            q: vec![0.0; n],
            q_fixed: vec![0.0; n],
            p_gen: vec![0.0; n],
            v_set: case
                .buses
                .iter()
                .map(|b| b.v_setpoint.unwrap_or(1.0))
                .collect(),
            q_min: vec![0.0; n],
            q_max: vec![0.0; n],
            voltage_dependent: Vec::new(),
        };
        let mut regulated = vec![false; n];
        for load in &case.loads {
            let i = index[&load.bus];
            s.p[i] -= load.p / base;
            s.q_fixed[i] -= load.q / base;
        }
        for m in case.machines.iter().filter(|m| m.in_service) {
            let i = index[&m.bus];
            let vi = v.map_or(1.0, |v| v[i]);
            let spec = bus_model(m, vi)?;
            match spec.mode {
                BusMode::PvBus {
                    p_set,
                    q_min,
                    q_max,
                    ..
                } => {
                    s.p[i] += p_set / base;
                    s.p_gen[i] += p_set / base;
                    if s.kind[i] == BusKind::PQ {
                        s.q_fixed[i] += m.q_set / base;
                    } else {
                        regulated[i] = true;
                        s.q_min[i] += q_min / base;
                        s.q_max[i] += q_max / base;
                    }
                }
                BusMode::PqInjection { p, q } => {
                    s.p[i] += p / base;
                    s.p_gen[i] += p / base;
                    s.q_fixed[i] += q / base;
                    if !s.voltage_dependent.contains(&i) {
                        s.voltage_dependent.push(i);
                    }
                }
            }
        }
        for i in 0..n {
            if !regulated[i] {
                s.q_min[i] = f64::NEG_INFINITY;
                s.q_max[i] = f64::INFINITY;
            }
            s.q[i] = s.q_fixed[i];
        }
        Ok(s)
    }
}

/// Positions of unknowns: non-slack buses for angles, PQ buses for magnitudes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    pub angle_buses: Vec<usize>,
    pub magnitude_buses: Vec<usize>,
}

impl StateLayout {
    pub fn new(kinds: &[BusKind]) -> Self {
        StateLayout {
            angle_buses: (0..kinds.len())
                .filter(|&i| kinds[i] != BusKind::Slack)
                .collect(),
            magnitude_buses: (0..kinds.len())
                .filter(|&i| kinds[i] == BusKind::PQ)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.angle_buses.len() + self.magnitude_buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Calculated injections `(P, Q)` at every bus.
pub fn injections(y: &AdmittanceMatrix, v: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.dim();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        for (k, yik) in y.row(i) {
            let (s, c) = (theta[i] - theta[k]).sin_cos();
            let vv = v[i] * v[k];
            p[i] += vv * (yik.re * c + yik.im * s);
            q[i] += vv * (yik.re * s - yik.im * c);
        }
    }
    (p, q)
}

/// Residuals `[dP over non-slack buses; dQ over PQ buses]`.
pub fn mismatch(
    y: &AdmittanceMatrix,
    schedule: &Schedule,
    v: &[f64],
    theta: &[f64],
    kinds: &[BusKind],
) -> Vec<f64> {
    let (p, q) = injections(y, v, theta);
    let layout = StateLayout::new(kinds);
    layout
        .angle_buses
        .iter()
        .map(|&i| schedule.p[i] - p[i])
        .chain(layout.magnitude_buses.iter().map(|&i| schedule.q[i] - q[i]))
        .collect()
}

/// Residuals for a case, scheduling injections at flat voltage.
pub fn case_mismatch(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    v: &[f64],
    theta: &[f64],
    kinds: &[BusKind],
) -> Result<Vec<f64>, PfError> {
    let schedule = Schedule::from_case(case, Some(v))?;
    Ok(mismatch(y, &schedule, v, theta, kinds))
}

/// Analytic derivative of calculated `(P, Q)` with respect to `(theta, V)`
/// in the [`StateLayout`] ordering.
pub fn jacobian(
    y: &AdmittanceMatrix,
    v: &[f64],
    theta: &[f64],
    kinds: &[BusKind],
) -> SparseMatrix {
    let n = y.dim();
    let layout = StateLayout::new(kinds);
    let n_ang = layout.angle_buses.len();
    let mut ang_pos = vec![usize::MAX; n];
    let mut mag_pos = vec![usize::MAX; n];
    for (k, &i) in layout.angle_buses.iter().enumerate() {
        ang_pos[i] = k;
    }
    for (k, &i) in layout.magnitude_buses.iter().enumerate() {
        mag_pos[i] = n_ang + k;
    }
    let (p, q) = injections(y, v, theta);
    let mut trip = Vec::new();
    for i in 0..n {
        let (rp, rq) = (ang_pos[i], mag_pos[i]);
        if rp == usize::MAX {
            continue;
        }
        for (k, yik) in y.row(i) {
            let (g, b) = (yik.re, yik.im);
            let (dp_dth, dp_dv, dq_dth, dq_dv) = if k == i {
                (
                    -q[i] - b * v[i] * v[i],
                    p[i] / v[i] + g * v[i],
                    p[i] - g * v[i] * v[i],
                    q[i] / v[i] - b * v[i],
                )
            } else {
                let (s, c) = (theta[i] - theta[k]).sin_cos();
                (
                    v[i] * v[k] * (g * s - b * c),
                    v[i] * (g * c + b * s),
                    -v[i] * v[k] * (g * c + b * s),
                    v[i] * (g * s - b * c),
                )
            };
            let (ca, cm) = (ang_pos[k], mag_pos[k]);
            if ca != usize::MAX {
                trip.push((rp, ca, dp_dth));
                if rq != usize::MAX {
                    trip.push((rq, ca, dq_dth));
                }
            }
            if cm != usize::MAX {
                trip.push((rp, cm, dp_dv));
                if rq != usize::MAX {
                    trip.push((rq, cm, dq_dv));
                }
            }
        }
    }
    SparseMatrix::from_triplets(layout.len(), layout.len(), trip)
}

/// Outcome of one Newton run at a fixed schedule.
struct NewtonOutcome {
    converged: bool,
    failure: Option<FailureReason>,
    norm: f64,
}

struct Switching {
    kinds: Vec<BusKind>,
    pinned: Vec<Option<f64>>,
    counts: Vec<u32>,
    frozen: Vec<bool>,
    events: Vec<SwitchEvent>,
}

impl Switching {
    fn apply(&self, schedule: &mut Schedule) {
        for i in 0..self.kinds.len() {
            schedule.q[i] = schedule.q_fixed[i] + self.pinned[i].unwrap_or(0.0);
        }
    }

    /// Enforces reactive limits at the current iterate; returns true if any
    /// bus changed type.
    fn check(
        &mut self,
        schedule: &Schedule,
        q_calc: &[f64],
        v: &mut [f64],
        bus_ids: &[BusId],
        iteration: usize,
        max_switches: u32,
    ) -> bool {
        const EPS: f64 = 1e-9;
        let mut changed = false;
        for i in 0..self.kinds.len() {
            if schedule.kind[i] != BusKind::PV || self.frozen[i] {
                continue;
            }
            let (lo, hi) = (schedule.q_min[i], schedule.q_max[i]);
            match self.kinds[i] {
                BusKind::PV => {
                    let q_gen = q_calc[i] - schedule.q_fixed[i];
                    let limit = if q_gen > hi + EPS {
                        hi
                    } else if q_gen < lo - EPS {
                        lo
                    } else {
                        continue;
                    };
                    self.kinds[i] = BusKind::PQ;
                    self.pinned[i] = Some(limit);
                    self.counts[i] += 1;
                    if self.counts[i] > max_switches {
                        self.frozen[i] = true;
                    }
                    self.events.push(SwitchEvent {
                        bus: bus_ids[i],
                        iteration,
                        to: BusKind::PQ,
                        pinned_q: Some(limit),
                    });
                    changed = true;
                }
                BusKind::PQ => {
                    let Some(limit) = self.pinned[i] else { continue };
                    let release = (limit == hi && v[i] > schedule.v_set[i])
                        || (limit == lo && v[i] < schedule.v_set[i]);
                    if !release {
                        continue;
                    }
                    if self.counts[i] >= max_switches {
                        self.frozen[i] = true;
                        continue;
                    }
                    self.kinds[i] = BusKind::PV;
                    self.pinned[i] = None;
                    self.counts[i] += 1;
                    v[i] = schedule.v_set[i];
                    self.events.push(SwitchEvent {
                        bus: bus_ids[i],
                        iteration,
                        to: BusKind::PV,
                        pinned_q: None,
                    });
                    changed = true;
                }
                BusKind::Slack => {}
            }
        }
        changed
    }
}

#[allow(clippy::too_many_arguments)]
fn newton(
    y: &AdmittanceMatrix,
    schedule: &mut Schedule,
    sw: &mut Switching,
    v: &mut [f64],
    theta: &mut [f64],
    settings: &SolverSettings,
    iterations: &mut usize,
    bus_ids: &[BusId],
) -> NewtonOutcome {
    let mut lu = DenseLu::default();
    let mut local_iters = 0;
    loop {
        sw.apply(schedule);
        let mut res = mismatch(y, schedule, v, theta, &sw.kinds);
        let mut norm = norm_inf(&res);
        if norm.is_nan() || norm > settings.divergence_threshold {
            return NewtonOutcome {
                converged: false,
                failure: Some(FailureReason::Diverged),
                norm,
            };
        }
        if settings.enforce_q_limits && norm < settings.q_check_threshold {
            let (_, q_calc) = injections(y, v, theta);
            if sw.check(schedule, &q_calc, v, bus_ids, *iterations, settings.max_switches) {
                sw.apply(schedule);
                res = mismatch(y, schedule, v, theta, &sw.kinds);
                norm = norm_inf(&res);
            }
        }
        if norm < settings.tolerance {
            return NewtonOutcome {
                converged: true,
                failure: None,
                norm,
            };
        }
        if local_iters >= settings.max_iterations {
            return NewtonOutcome {
                converged: false,
                failure: Some(FailureReason::IterationLimit),
                norm,
            };
        }
        let jac = jacobian(y, v, theta, &sw.kinds);
        if lu.solve(&jac, &mut res).is_err() {
            return NewtonOutcome {
                converged: false,
                failure: Some(FailureReason::SingularJacobian),
                norm,
            };
        }
        let layout = StateLayout::new(&sw.kinds);
        let n_ang = layout.angle_buses.len();
        for (k, &i) in layout.angle_buses.iter().enumerate() {
            theta[i] += res[k];
        }
        for (k, &i) in layout.magnitude_buses.iter().enumerate() {
            v[i] += res[n_ang + k];
        }
        local_iters += 1;
        *iterations += 1;
    }
}

const MACHINE_ROUNDS: usize = 30;
const MACHINE_TOL: f64 = 1e-6;

/// Solves the power flow. Non-convergence is reported through
/// [`PowerFlowSolution::converged`], not as an error.
pub fn solve(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    settings: &SolverSettings,
    warm_start: Option<&PowerFlowSolution>,
) -> Result<PowerFlowSolution, PfError> {
    let n = case.buses.len();
    if y.dim() != n {
        return Err(PfError::Dimension {
            expected: n,
            found: y.dim(),
        });
    }
    if case.slack_bus().is_none() {
        return Err(PfError::NoSlack);
    }
    let bus_ids: Vec<BusId> = case.buses.iter().map(|b| b.id).collect();
    let mut schedule = Schedule::from_case(case, None)?;
    let warm = warm_start.filter(|w| !settings.flat_start && w.bus_ids == bus_ids);

    let mut v = vec![1.0; n];
    let mut theta = vec![0.0; n];
    let mut sw = Switching {
        kinds: schedule.kind.clone(),
        pinned: vec![None; n],
        counts: vec![0; n],
        frozen: vec![false; n],
        events: Vec::new(),
    };
    if let Some(w) = warm {
        v.copy_from_slice(&w.v);
        theta.copy_from_slice(&w.theta);
        if settings.enforce_q_limits {
            for i in 0..n {
                if schedule.kind[i] == BusKind::PV && w.final_kind[i] == BusKind::PQ {
                    let q = w.q_gen[i];
                    let (lo, hi) = (schedule.q_min[i], schedule.q_max[i]);
                    sw.kinds[i] = BusKind::PQ;
                    sw.pinned[i] = Some(if (q - hi).abs() <= (q - lo).abs() { hi } else { lo });
                }
            }
        }
    }
    for i in 0..n {
        if sw.kinds[i] != BusKind::PQ {
            v[i] = schedule.v_set[i];
        }
        if schedule.kind[i] == BusKind::Slack {
            theta[i] = 0.0;
        }
    }

    let mut iterations = 0;
    let mut outcome;
    let mut rounds = 0;
    loop {
        if !schedule.voltage_dependent.is_empty() {
            match Schedule::from_case(case, Some(&v)) {
                Ok(s) => schedule = s,
                Err(PfError::Machine(_)) => {
                    outcome = NewtonOutcome {
                        converged: false,
                        failure: Some(FailureReason::MachineEquilibrium),
                        norm: f64::NAN,
                    };
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        outcome = newton(
            y,
            &mut schedule,
            &mut sw,
            &mut v,
            &mut theta,
            settings,
            &mut iterations,
            &bus_ids,
        );
        if !outcome.converged || schedule.voltage_dependent.is_empty() {
            break;
        }
        let refreshed = match Schedule::from_case(case, Some(&v)) {
            Ok(s) => s,
            Err(PfError::Machine(_)) => {
                outcome.converged = false;
                outcome.failure = Some(FailureReason::MachineEquilibrium);
                break;
            }
            Err(e) => return Err(e),
        };
        let drift = schedule
            .voltage_dependent
            .iter()
            .map(|&i| (refreshed.q_fixed[i] - schedule.q_fixed[i]).abs())
            .fold(0.0, f64::max);
        if drift < MACHINE_TOL {
            break;
        }
        rounds += 1;
        if rounds >= MACHINE_ROUNDS {
            outcome.converged = false;
            outcome.failure = Some(FailureReason::MachineLoop);
            break;
        }
    }

    let (p_inj, q_inj) = injections(y, &v, &theta);
    let mut q_gen = vec![0.0; n];
    for i in 0..n {
        q_gen[i] = match (schedule.kind[i], sw.pinned[i]) {
            (_, Some(limit)) => limit,
            (BusKind::PQ, None) => 0.0,
            _ => q_inj[i] - schedule.q_fixed[i],
        };
    }
    let p_gen = (0..n)
        .map(|i| {
            if schedule.kind[i] == BusKind::Slack {
                p_inj[i] - (schedule.p[i] - schedule.p_gen[i])
            } else {
                schedule.p_gen[i]
            }
        })
        .collect();
    Ok(PowerFlowSolution {
        frozen: (0..n).filter(|&i| sw.frozen[i]).map(|i| bus_ids[i]).collect(),
        bus_ids,
        v,
        theta,
        p_inj,
        q_inj,
        p_gen,
        q_gen,
        final_kind: sw.kinds,
        iterations,
        converged: outcome.converged,
        max_mismatch: outcome.norm,
        switch_events: sw.events,
        failure: outcome.failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::two_bus;
    use crate::netmodel::build_admittance;

    #[test]
    fn two_bus_matches_closed_form() {
        let case = two_bus(0.1, 100.0);
        let y = build_admittance(&case, &[]).unwrap();
        let sol = solve(&case, &y, &SolverSettings::default(), None).unwrap();
        assert!(sol.converged);
        let px: f64 = 1.0 * 0.1;
        let v2 = (1.0 + (1.0 - 4.0 * px * px).sqrt()) / 2.0;
        let v = v2.sqrt();
        assert!((sol.v[1] - v).abs() < 1e-8);
        assert!((sol.theta[1] + (px / v).asin()).abs() < 1e-8);
    }

    #[test]
    fn flat_start_mismatch_of_loaded_two_bus() {
        let case = two_bus(0.1, 100.0);
        let y = build_admittance(&case, &[]).unwrap();
        let kinds: Vec<BusKind> = case.buses.iter().map(|b| b.kind).collect();
        let r = case_mismatch(&case, &y, &[1.0, 1.0], &[0.0, 0.0], &kinds).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] + 1.0).abs() < 1e-15);
        assert!(r[1].abs() < 1e-15);
    }

    #[test]
    fn lossless_flat_start_jacobian_entry() {
        let case = two_bus(0.1, 100.0);
        let y = build_admittance(&case, &[]).unwrap();
        let kinds: Vec<BusKind> = case.buses.iter().map(|b| b.kind).collect();
        let j = jacobian(&y, &[1.0, 1.0], &[0.0, 0.0], &kinds);
        assert!((j.get(0, 0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn no_load_is_flat() {
        let case = two_bus(0.1, 0.0);
        let y = build_admittance(&case, &[]).unwrap();
        let sol = solve(&case, &y, &SolverSettings::default(), None).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 1);
        assert!((sol.v[1] - 1.0).abs() < 1e-12);
        assert!(sol.theta[1].abs() < 1e-12);
    }

    #[test]
    fn overload_reports_divergence_not_error() {
        let case = two_bus(0.1, 600.0);
        let y = build_admittance(&case, &[]).unwrap();
        let sol = solve(&case, &y, &SolverSettings::default(), None).unwrap();
        assert!(!sol.converged);
        assert!(sol.failure.is_some());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let case = two_bus(0.1, 100.0);
        let mut other = case.clone();
        other.buses.pop();
        other.loads.clear();
        other.branches.clear();
        let y = build_admittance(&other, &[]).unwrap();
        assert!(matches!(
            solve(&case, &y, &SolverSettings::default(), None),
            Err(PfError::Dimension { .. })
        ));
    }
}
