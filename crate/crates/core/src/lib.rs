//! Numerical core for static voltage-stability studies.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the network model
//! and admittance assembly ([`netmodel`]), a Newton-Raphson AC power flow with
//! reactive-limit switching ([`acpf`]), stepwise continuation tracing of P-V
//! curves ([`cpf`]), line-outage enumeration and critical-bus statistics
//! ([`contingency`]), and steady-state machine models for condensers and
//! renewable plants ([`renewgen`]).
//!
//! File formats, parallel sweeps and the command-line front end live in the
//! `vstab` companion crate.

#![no_std]

extern crate alloc;

pub mod acpf;
pub mod cases;
pub mod contingency;
pub mod cpf;
pub mod linalg;
pub mod netmodel;
pub mod renewgen;

pub use acpf::{PowerFlowSolution, SolverSettings};
pub use contingency::{ContingencyResult, ContingencySpec, CriticalBusReport};
pub use cpf::{ContinuationSettings, PVCurvePoint, PVCurveSet};
pub use netmodel::{
    AdmittanceMatrix, Branch, BranchId, Bus, BusId, BusKind, CaseError, IslandReport, Load,
    LoadGrowth, Machine, MachineKind, NetworkCase,
};
