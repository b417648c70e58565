//! Steady-state machine models and their power-flow bus representation.
//!
//! Synchronous generators, condensers, DFIGs and PV plants regulate their
//! terminal voltage inside reactive limits and appear as PV buses. A
//! squirrel-cage induction generator cannot regulate voltage; it appears as a
//! PQ injection whose reactive part follows the machine equilibrium at the
//! solved terminal voltage.
//!
//! # Induction machine conventions
//!
//! Per-unit, synchronous reference frame with `omega_s = 1`, complex vectors
//! written `d + j q`. Stator currents are positive out of the machine
//! (generator orientation) and rotor currents positive into the rotor, which
//! is the orientation under which the flux equations read
//!
//! ```text
//! dPsi_ds/dt = u_ds + omega_s Psi_qs + R_s i_ds
//! dPsi_qs/dt = u_qs - omega_s Psi_ds + R_s i_qs
//! dPsi_dr/dt = u_dr + s omega_s Psi_qr - R_r i_dr
//! dPsi_qr/dt = u_qr - s omega_s Psi_dr - R_r i_qr
//! ```
//!
//! The flux-current relations are
//! `Psi_s = -(x_ls + x_m) i_s + x_m i_r` and `Psi_r = -x_m i_s + (x_lr + x_m) i_r`.
//! Slip `s = (omega_s - omega_r) / omega_s` is negative when generating.

use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

#[allow(unused_imports)]
use num_traits::Float;

use crate::netmodel::{BusId, BusKind, Machine, MachineKind, NetworkCase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenewError {
    #[error("expected a {expected} machine, got {found}")]
    WrongKind {
        expected: MachineKind,
        found: MachineKind,
    },
    #[error("dispatch of {p_target:.6} pu exceeds the pull-out power {p_max:.6} pu")]
    InfeasibleDispatch { p_target: f64, p_max: f64 },
    #[error("invalid machine parameters: {0}")]
    InvalidParams(&'static str),
    #[error("bus {0} is the slack bus and cannot host a renewable plant")]
    SlackBus(BusId),
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("{0} is not a renewable plant kind")]
    NotRenewable(MachineKind),
}

/// Single-cage induction generator equivalent circuit, per-unit on `rating`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScigParams {
    pub r_s: f64,
    pub r_r: f64,
    pub x_ls: f64,
    pub x_lr: f64,
    pub x_m: f64,
    /// MVA
    pub rating: f64,
    /// Terminal capacitor susceptance, per-unit on `rating`.
    pub b_cap: f64,
}

impl ScigParams {
    /// Typical multi-megawatt machine data, fully compensated at no load.
    pub fn generic(rating: f64) -> Self {
        ScigParams {
            r_s: 0.01,
            r_r: 0.01,
            x_ls: 0.1,
            x_lr: 0.12,
            x_m: 3.5,
            rating,
            b_cap: 0.0,
        }
        .with_full_compensation()
    }

    /// Sizes `b_cap` to cancel the no-load reactive draw at 1.0 pu voltage.
    pub fn with_full_compensation(mut self) -> Self {
        self.b_cap = 0.0;
        self.b_cap = -machine_power(&self, 0.0, 1.0).im;
        self
    }

    pub fn validate(&self) -> Result<(), RenewError> {
        let positive = [self.r_s, self.r_r, self.x_ls, self.x_lr, self.x_m];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(RenewError::InvalidParams(
                "resistances and reactances must be positive",
            ));
        }
        if !(self.b_cap >= 0.0) {
            return Err(RenewError::InvalidParams("capacitor susceptance must be non-negative"));
        }
        Ok(())
    }

    fn x_s(&self) -> f64 {
        self.x_ls + self.x_m
    }

    fn x_r(&self) -> f64 {
        self.x_lr + self.x_m
    }
}

/// Motor-orientation input impedance seen at the stator terminals.
fn input_impedance(p: &ScigParams, slip: f64) -> Complex64 {
    let rotor = Complex64::new(p.r_r, slip * p.x_r());
    Complex64::new(p.r_s, p.x_s()) + slip * p.x_m * p.x_m / rotor
}

/// Complex power delivered to the grid by the machine alone (no capacitor).
pub fn machine_power(p: &ScigParams, slip: f64, v: f64) -> Complex64 {
    let z = input_impedance(p, slip);
    -(v * v) * z / z.norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScigState {
    pub slip: f64,
    pub psi_ds: f64,
    pub psi_qs: f64,
    pub psi_dr: f64,
    pub psi_qr: f64,
    pub i_ds: f64,
    pub i_qs: f64,
    pub i_dr: f64,
    pub i_qr: f64,
    pub u_ds: f64,
    pub u_qs: f64,
    /// Active power into the grid, per-unit on the machine rating.
    pub p_grid: f64,
    /// Net reactive power into the grid including the capacitor.
    pub q_grid: f64,
    /// Reactive power of the machine alone; never positive while generating.
    pub q_machine: f64,
}

impl ScigState {
    /// Right-hand sides of the four flux equations; zero at equilibrium.
    pub fn residuals(&self, p: &ScigParams) -> [f64; 4] {
        let omega_s = 1.0;
        let (u_dr, u_qr) = (0.0, 0.0);
        [
            self.u_ds + omega_s * self.psi_qs + p.r_s * self.i_ds,
            self.u_qs - omega_s * self.psi_ds + p.r_s * self.i_qs,
            u_dr + self.slip * omega_s * self.psi_qr - p.r_r * self.i_dr,
            u_qr - self.slip * omega_s * self.psi_dr - p.r_r * self.i_qr,
        ]
    }
}

/// Full electrical state at a given slip and terminal voltage `v + j0`.
pub fn scig_state_at_slip(p: &ScigParams, slip: f64, v: f64) -> ScigState {
    let u = Complex64::new(v, 0.0);
    let i_s = -u / input_impedance(p, slip);
    let i_r = Complex64::new(0.0, slip * p.x_m) * i_s / Complex64::new(p.r_r, slip * p.x_r());
    let psi_s = -p.x_s() * i_s + p.x_m * i_r;
    let psi_r = -p.x_m * i_s + p.x_r() * i_r;
    let s = u * i_s.conj();
    ScigState {
        slip,
        psi_ds: psi_s.re,
        psi_qs: psi_s.im,
        psi_dr: psi_r.re,
        psi_qr: psi_r.im,
        i_ds: i_s.re,
        i_qs: i_s.im,
        i_dr: i_r.re,
        i_qr: i_r.im,
        u_ds: u.re,
        u_qs: u.im,
        p_grid: s.re,
        q_grid: s.im + p.b_cap * v * v,
        q_machine: s.im,
    }
}

/// Slip bracket searched for the pull-out point.
const MAX_GENERATING_SLIP: f64 = -1.0;

/// Pull-out slip and the maximum active power deliverable at `v`.
pub fn scig_pullout(p: &ScigParams, v: f64) -> (f64, f64) {
    let power = |s: f64| machine_power(p, s, v).re;
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (MAX_GENERATING_SLIP, 0.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (power(c), power(d));
    while (b - a).abs() > 1e-13 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = power(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = power(d);
        }
    }
    let s = 0.5 * (a + b);
    (s, power(s))
}

/// Equilibrium of the generator delivering `p_target` (machine per-unit) at
/// terminal voltage `v_terminal`, on the stable side of the pull-out point.
pub fn scig_equilibrium(
    v_terminal: f64,
    p_target: f64,
    params: &ScigParams,
) -> Result<ScigState, RenewError> {
    params.validate()?;
    if !(v_terminal > 0.0) {
        return Err(RenewError::InvalidParams("terminal voltage must be positive"));
    }
    let (s_pull, p_max) = scig_pullout(params, v_terminal);
    if !(p_target <= p_max) {
        return Err(RenewError::InfeasibleDispatch { p_target, p_max });
    }
    // Delivered power rises monotonically as slip goes from 0 toward pull-out.
    let power = |s: f64| machine_power(params, s, v_terminal).re - p_target;
    let (mut lo, mut hi) = (s_pull, 0.0);
    if power(hi) >= 0.0 {
        // p_target below the no-load loss level: motoring side, search s > 0.
        hi = 1.0;
        lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if power(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(scig_state_at_slip(params, 0.5 * (lo + hi), v_terminal));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if power(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if power(lo).abs() <= power(hi).abs() { lo } else { hi };
    Ok(scig_state_at_slip(params, s, v_terminal))
}

/// How a machine is represented in the power flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusMode {
    /// Regulates terminal voltage; MW / pu / MVAr.
    PvBus {
        p_set: f64,
        v_set: f64,
        q_min: f64,
        q_max: f64,
    },
    /// Fixed injection in MW / MVAr.
    PqInjection { p: f64, q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusModelSpec {
    pub bus: BusId,
    pub mode: BusMode,
    pub source_kind: MachineKind,
}

fn expect_kind(m: &Machine, expected: MachineKind) -> Result<(), RenewError> {
    if m.kind == expected {
        Ok(())
    } else {
        Err(RenewError::WrongKind {
            expected,
            found: m.kind,
        })
    }
}

fn pv_bus(m: &Machine, p_set: f64) -> BusModelSpec {
    BusModelSpec {
        bus: m.bus,
        mode: BusMode::PvBus {
            p_set,
            v_set: m.v_set,
            q_min: m.q_min,
            q_max: m.q_max,
        },
        source_kind: m.kind,
    }
}

pub fn sync_gen_bus_model(m: &Machine) -> Result<BusModelSpec, RenewError> {
    expect_kind(m, MachineKind::SyncGen)?;
    Ok(pv_bus(m, m.p_set))
}

/// Condensers regulate voltage with no active output.
pub fn sc_bus_model(m: &Machine) -> Result<BusModelSpec, RenewError> {
    expect_kind(m, MachineKind::SyncCondenser)?;
    Ok(pv_bus(m, 0.0))
}

pub fn dfig_bus_model(m: &Machine) -> Result<BusModelSpec, RenewError> {
    expect_kind(m, MachineKind::Dfig)?;
    Ok(pv_bus(m, m.p_set))
}

/// Constant active power with local voltage control.
pub fn solar_pv_bus_model(m: &Machine) -> Result<BusModelSpec, RenewError> {
    expect_kind(m, MachineKind::SolarPv)?;
    Ok(pv_bus(m, m.p_set))
}

/// PQ injection at the equilibrium for the machine dispatch and `v_estimate`.
pub fn scig_bus_model(
    m: &Machine,
    params: &ScigParams,
    v_estimate: f64,
) -> Result<BusModelSpec, RenewError> {
    expect_kind(m, MachineKind::Scig)?;
    if !(params.rating > 0.0) {
        return Err(RenewError::InvalidParams("SCIG rating must be positive"));
    }
    let state = scig_equilibrium(v_estimate, m.p_set / params.rating, params)?;
    Ok(BusModelSpec {
        bus: m.bus,
        mode: BusMode::PqInjection {
            p: m.p_set,
            q: state.q_grid * params.rating,
        },
        source_kind: m.kind,
    })
}

/// Bus model for any machine kind. `v_estimate` only matters for SCIGs.
pub fn bus_model(m: &Machine, v_estimate: f64) -> Result<BusModelSpec, RenewError> {
    match m.kind {
        MachineKind::SyncGen => sync_gen_bus_model(m),
        MachineKind::SyncCondenser => sc_bus_model(m),
        MachineKind::Dfig => dfig_bus_model(m),
        MachineKind::SolarPv => solar_pv_bus_model(m),
        MachineKind::Scig => {
            let params = m.scig.unwrap_or_else(|| ScigParams::generic(m.rating));
            scig_bus_model(m, &params, v_estimate)
        }
    }
}

/// Symmetric reactive range for an active output at the given power factor, MVAr.
pub fn pf_reactive_limits(p_mw: f64, power_factor: f64) -> (f64, f64) {
    let q = p_mw.abs() * power_factor.acos().tan();
    (-q, q)
}

/// Reduced-order DFIG stator data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfigParams {
    pub r_s: f64,
    /// Short-circuit reactance.
    pub x_prime: f64,
    /// MVAr
    pub q_min: f64,
    /// MVAr
    pub q_max: f64,
    /// MVA
    pub rating: f64,
}

/// Rotor-side voltage and current, used only by the active-power balance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorQuantities {
    pub v_dr: f64,
    pub v_qr: f64,
    pub i_dr: f64,
    pub i_qr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfigOperatingPoint {
    pub v_ds: f64,
    pub v_qs: f64,
    pub i_ds: f64,
    pub i_qs: f64,
    pub e_d: f64,
    pub e_q: f64,
    pub p_w: f64,
    pub q_w: f64,
    pub slip: f64,
}

/// Internal voltage and delivered power from stator quantities.
pub fn dfig_algebraic_state(
    v_ds: f64,
    v_qs: f64,
    i_ds: f64,
    i_qs: f64,
    slip: f64,
    params: &DfigParams,
    rotor: Option<RotorQuantities>,
) -> DfigOperatingPoint {
    let r = rotor.unwrap_or_default();
    DfigOperatingPoint {
        v_ds,
        v_qs,
        i_ds,
        i_qs,
        e_d: v_ds + params.r_s * i_ds - params.x_prime * i_qs,
        e_q: v_qs + params.r_s * i_qs + params.x_prime * i_ds,
        p_w: v_ds * i_ds + v_qs * i_qs - r.v_dr * r.i_dr - r.v_qr * r.i_qr,
        q_w: v_qs * i_ds - v_ds * i_qs,
        slip,
    }
}

/// Stator voltage behind the short-circuit reactance, `(v_ds, v_qs)`.
pub fn dfig_stator_voltage(e_d: f64, e_q: f64, i_ds: f64, i_qs: f64, params: &DfigParams) -> (f64, f64) {
    (
        -params.r_s * i_ds + params.x_prime * i_qs + e_d,
        -params.r_s * i_qs - params.x_prime * i_ds + e_q,
    )
}

/// A single renewable plant replacing the synchronous generation at one bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewableScenario {
    pub kind: MachineKind,
    pub bus: BusId,
    /// MVA; the plant is dispatched at this many MW.
    pub rating_mva: f64,
    pub v_set: f64,
    /// Power factor defining the reactive range of converter-interfaced plants.
    pub power_factor: f64,
}

impl RenewableScenario {
    /// 60 MVA plant at bus 2, 1.0 pu setpoint, 0.95 power-factor range.
    pub fn default_for(kind: MachineKind) -> Self {
        RenewableScenario {
            kind,
            bus: BusId(2),
            rating_mva: 60.0,
            v_set: 1.0,
            power_factor: 0.95,
        }
    }

    /// The machine record this scenario installs.
    pub fn machine(&self) -> Result<Machine, RenewError> {
        if !matches!(
            self.kind,
            MachineKind::Scig | MachineKind::Dfig | MachineKind::SolarPv
        ) {
            return Err(RenewError::NotRenewable(self.kind));
        }
        if !(self.rating_mva > 0.0) {
            return Err(RenewError::InvalidParams("plant rating must be positive"));
        }
        let p_set = self.rating_mva;
        let (q_min, q_max) = match self.kind {
            MachineKind::Scig => (0.0, 0.0),
            _ => pf_reactive_limits(p_set, self.power_factor),
        };
        Ok(Machine {
            bus: self.bus,
            kind: self.kind,
            p_set,
            q_set: 0.0,
            v_set: self.v_set,
            q_min,
            q_max,
            rating: self.rating_mva,
            in_service: true,
            scig: (self.kind == MachineKind::Scig).then(|| ScigParams::generic(self.rating_mva)),
        })
    }
}

/// Replaces the synchronous generators at the scenario bus by the plant.
pub fn substitute(case: &NetworkCase, scenario: &RenewableScenario) -> Result<NetworkCase, RenewError> {
    let machine = scenario.machine()?;
    let bus = case
        .bus(scenario.bus)
        .ok_or(RenewError::UnknownBus(scenario.bus))?;
    if bus.kind == BusKind::Slack {
        return Err(RenewError::SlackBus(scenario.bus));
    }
    let mut out = case.clone();
    out.machines
        .retain(|m| !(m.bus == scenario.bus && m.kind == MachineKind::SyncGen));
    let regulates = machine.kind != MachineKind::Scig;
    out.machines.push(machine);
    let others_regulate = out.machines.iter().any(|m| {
        m.bus == scenario.bus && m.in_service && m.kind != MachineKind::Scig
    });
    let b = out
        .buses
        .iter_mut()
        .find(|b| b.id == scenario.bus)
        .expect("bus checked above");
    if regulates {
        b.kind = BusKind::PV;
        b.v_setpoint = Some(scenario.v_set);
    } else if !others_regulate {
        b.kind = BusKind::PQ;
        b.v_setpoint = None;
    }
    Ok(out)
}

/// Machines of a case mapped to bus models at flat voltage.
pub fn bus_models(case: &NetworkCase) -> Result<Vec<BusModelSpec>, RenewError> {
    case.machines
        .iter()
        .filter(|m| m.in_service)
        .map(|m| bus_model(m, 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(kind: MachineKind) -> Machine {
        Machine {
            bus: BusId(6),
            kind,
            p_set: 0.0,
            q_set: 0.0,
            v_set: 1.07,
            q_min: -6.0,
            q_max: 24.0,
            rating: 60.0,
            in_service: true,
            scig: None,
        }
    }

    #[test]
    fn condenser_maps_to_zero_power_pv_bus() {
        let spec = sc_bus_model(&machine(MachineKind::SyncCondenser)).unwrap();
        assert_eq!(
            spec.mode,
            BusMode::PvBus {
                p_set: 0.0,
                v_set: 1.07,
                q_min: -6.0,
                q_max: 24.0
            }
        );
    }

    #[test]
    fn kind_guards() {
        assert!(matches!(
            sc_bus_model(&machine(MachineKind::SyncGen)),
            Err(RenewError::WrongKind { .. })
        ));
        assert!(dfig_bus_model(&machine(MachineKind::SolarPv)).is_err());
        assert!(solar_pv_bus_model(&machine(MachineKind::Dfig)).is_err());
    }

    #[test]
    fn dfig_pf_limits() {
        let (lo, hi) = pf_reactive_limits(60.0, 0.95);
        assert!((hi - 19.721).abs() < 1e-3);
        assert_eq!(lo, -hi);
    }

    #[test]
    fn dfig_substitution_example() {
        let st = dfig_algebraic_state(
            1.0,
            0.0,
            0.5,
            0.0,
            -0.1,
            &DfigParams {
                r_s: 0.01,
                x_prime: 0.2,
                q_min: -1.0,
                q_max: 1.0,
                rating: 1.0,
            },
            None,
        );
        assert!((st.e_d - 1.005).abs() < 1e-15);
        assert!((st.e_q - 0.1).abs() < 1e-15);
        assert_eq!(st.q_w, 0.0);
        assert!((st.p_w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dfig_zero_current() {
        let p = DfigParams {
            r_s: 0.02,
            x_prime: 0.3,
            q_min: 0.0,
            q_max: 0.0,
            rating: 1.0,
        };
        let st = dfig_algebraic_state(0.9, 0.3, 0.0, 0.0, 0.0, &p, None);
        assert_eq!((st.e_d, st.e_q, st.p_w, st.q_w), (0.9, 0.3, 0.0, 0.0));
    }

    #[test]
    fn scig_capacitor_cancels_no_load_draw() {
        let p = ScigParams::generic(60.0);
        let st = scig_state_at_slip(&p, 0.0, 1.0);
        assert!(st.q_grid.abs() < 1e-12);
        assert!(st.q_machine < 0.0);
    }

    #[test]
    fn scig_zero_dispatch_is_a_shunt() {
        let p = ScigParams::generic(60.0);
        let a = scig_equilibrium(1.0, 0.0, &p).unwrap();
        let b = scig_equilibrium(0.9, 0.0, &p).unwrap();
        assert!(a.p_grid.abs() < 1e-12);
        assert!((a.slip - b.slip).abs() < 1e-9);
        assert!((a.q_grid - b.q_grid / 0.81).abs() < 1e-9);
    }

    #[test]
    fn scig_over_dispatch_reports_maximum() {
        let p = ScigParams::generic(60.0);
        let (_, p_max) = scig_pullout(&p, 1.0);
        match scig_equilibrium(1.0, p_max * 1.01, &p) {
            Err(RenewError::InfeasibleDispatch { p_max: m, .. }) => {
                assert!((m - p_max).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn substitution_rejects_slack_and_non_renewables() {
        let scen = RenewableScenario {
            kind: MachineKind::SyncGen,
            ..RenewableScenario::default_for(MachineKind::Dfig)
        };
        assert!(matches!(scen.machine(), Err(RenewError::NotRenewable(_))));
    }
}
