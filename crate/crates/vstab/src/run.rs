//! End-to-end study: parse, configure, trace, sweep, aggregate, write.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;
use vstab_core::contingency::{
    aggregate, enumerate, run_contingency, ContingencyResult, ContingencySpec, CriticalBusReport,
    Order,
};
use vstab_core::cpf::{ContinuationSettings, PVCurveSet, TraceStats, CRITICAL_TIE_TOLERANCE};
use vstab_core::netmodel::{apply_sc_mode, BusId, MachineKind, NetworkCase, ReactiveGrowth};
use vstab_core::renewgen::{substitute, RenewableScenario};

use crate::cdf::parse_cdf;
use crate::output::{self, SummaryJson, BASE_LABEL};
use crate::sidecar::parse_sidecar;
use crate::sweep::par_sweep;

pub const PV_CURVES_FILE: &str = "pv_curves.csv";
pub const SUMMARY_CSV_FILE: &str = "summary.csv";
pub const SUMMARY_JSON_FILE: &str = "summary.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScMode {
    With,
    Without,
}

impl ScMode {
    pub fn enabled(self) -> bool {
        self == ScMode::With
    }

    pub fn name(self) -> &'static str {
        match self {
            ScMode::With => "with",
            ScMode::Without => "without",
        }
    }
}

/// One renewable plant installed before the study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewableSpec {
    pub kind: MachineKind,
    pub bus: u32,
    /// MVA
    pub rating: f64,
}

impl RenewableSpec {
    /// Parses `kind:bus:mva`, e.g. `dfig:2:60`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [kind, bus, mva] = parts[..] else {
            return Err(format!("expected kind:bus:mva, got '{s}'"));
        };
        let kind = match kind.to_ascii_lowercase().as_str() {
            "scig" => MachineKind::Scig,
            "dfig" => MachineKind::Dfig,
            "solar_pv" | "solarpv" | "pv" => MachineKind::SolarPv,
            other => return Err(format!("unknown renewable kind '{other}'")),
        };
        let bus = bus.parse().map_err(|_| format!("bad bus '{bus}'"))?;
        let rating = mva.parse().map_err(|_| format!("bad rating '{mva}'"))?;
        Ok(RenewableSpec { kind, bus, rating })
    }

    pub fn scenario(&self) -> RenewableScenario {
        RenewableScenario {
            bus: BusId(self.bus),
            rating_mva: self.rating,
            ..RenewableScenario::default_for(self.kind)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case_path: PathBuf,
    pub sidecar_path: Option<PathBuf>,
    pub sc_mode: ScMode,
    /// 0 runs the base case only.
    pub contingency_order: u8,
    pub step_mw: f64,
    pub renewable: Option<RenewableSpec>,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub enforce_q_limits: bool,
    pub reactive_growth: ReactiveGrowth,
}

impl RunConfig {
    pub fn new(case_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        let defaults = ContinuationSettings::default();
        RunConfig {
            case_path: case_path.into(),
            sidecar_path: None,
            sc_mode: ScMode::With,
            contingency_order: 1,
            step_mw: defaults.initial_step,
            renewable: None,
            output_dir: output_dir.into(),
            workers: 1,
            enforce_q_limits: defaults.solver.enforce_q_limits,
            reactive_growth: defaults.growth.reactive,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if !(self.step_mw > 0.0 && self.step_mw.is_finite()) {
            return Err(RunError::Config(format!("step must be positive, got {}", self.step_mw)));
        }
        if self.workers == 0 {
            return Err(RunError::Config("workers must be at least 1".into()));
        }
        if self.contingency_order > 2 {
            return Err(RunError::Config(format!(
                "contingency order must be 0, 1 or 2, got {}",
                self.contingency_order
            )));
        }
        Ok(())
    }

    pub fn settings(&self) -> ContinuationSettings {
        let mut s = ContinuationSettings {
            initial_step: self.step_mw,
            ..Default::default()
        };
        s.min_step = s.min_step.min(self.step_mw);
        s.solver.enforce_q_limits = self.enforce_q_limits;
        s.growth.reactive = self.reactive_growth;
        s
    }

    /// Config echo written to the JSON report. Worker count and output
    /// directory are left out: they do not affect results.
    fn echo(&self) -> serde_json::Value {
        json!({
            "case_path": self.case_path.display().to_string(),
            "sidecar_path": self.sidecar_path.as_ref().map(|p| p.display().to_string()),
            "sc_mode": self.sc_mode.name(),
            "contingency_order": self.contingency_order,
            "step_mw": self.step_mw,
            "renewable": self.renewable.map(|r| json!({
                "kind": r.kind.name(),
                "bus": r.bus,
                "rating_mva": r.rating,
            })),
        })
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot read input: {0}")]
    Parse(String),
    #[error("base case does not solve: {0}")]
    InfeasibleBase(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Other(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Other(_) => 1,
            RunError::Parse(_) => 3,
            RunError::InfeasibleBase(_) => 4,
            RunError::Io(_) => 5,
            RunError::Config(_) => 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub base: PVCurveSet,
    pub base_critical: Option<BusId>,
    pub results: Vec<ContingencyResult>,
    pub report: CriticalBusReport,
    pub stats: TraceStats,
    pub elapsed: Duration,
    pub files: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<Vec<u8>, RunError> {
    fs::read(path).map_err(|e| RunError::Parse(format!("{}: {e}", path.display())))
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads the case, applies the sidecar, condenser mode and renewable plant.
pub fn prepare_case(config: &RunConfig) -> Result<(NetworkCase, serde_json::Value), RunError> {
    let case_bytes = read(&config.case_path)?;
    let text = String::from_utf8_lossy(&case_bytes);
    let mut case =
        parse_cdf(&text).map_err(|e| RunError::Parse(format!("{}: {e}", config.case_path.display())))?;
    let mut inputs = json!({ "case_sha256": sha256(&case_bytes) });
    if let Some(path) = &config.sidecar_path {
        let bytes = read(path)?;
        let sidecar = parse_sidecar(&String::from_utf8_lossy(&bytes))
            .map_err(|e| RunError::Parse(format!("{}: {e}", path.display())))?;
        case = sidecar
            .apply(&case)
            .map_err(|e| RunError::Parse(format!("{}: {e}", path.display())))?;
        inputs["sidecar_sha256"] = json!(sha256(&bytes));
    }
    case = apply_sc_mode(&case, config.sc_mode.enabled());
    if let Some(r) = config.renewable {
        case = substitute(&case, &r.scenario()).map_err(|e| RunError::Config(e.to_string()))?;
    }
    Ok((case, inputs))
}

fn settings_json(s: &ContinuationSettings) -> serde_json::Value {
    json!({
        "initial_step_mw": s.initial_step,
        "min_step_mw": s.min_step,
        "reactive_growth": match s.growth.reactive {
            ReactiveGrowth::ConstantPowerFactor => "constant_power_factor",
            ReactiveGrowth::ActiveOnly => "active_only",
        },
        "generation_pickup": format!("{:?}", s.growth.pickup).to_ascii_lowercase(),
        "tolerance_pu": s.solver.tolerance,
        "max_iterations": s.solver.max_iterations,
        "enforce_q_limits": s.solver.enforce_q_limits,
        "q_check_threshold_pu": s.solver.q_check_threshold,
        "max_switches": s.solver.max_switches,
        "divergence_threshold": s.solver.divergence_threshold,
        "critical_tie_tolerance_pu": CRITICAL_TIE_TOLERANCE,
        "critical_eligibility": "PQ load buses at the nose",
    })
}

/// File name and contents of every output, in write order.
pub fn render(
    report: &RunReport,
    settings: &ContinuationSettings,
    inputs: serde_json::Value,
) -> Vec<(&'static str, String)> {
    let mut curves: Vec<(&str, &PVCurveSet)> = vec![(BASE_LABEL, &report.base)];
    curves.extend(
        report
            .results
            .iter()
            .filter_map(|r| r.curves.as_ref().map(|c| (r.spec.label.as_str(), c))),
    );
    let summary = SummaryJson {
        config: report.config.echo(),
        settings: settings_json(settings),
        inputs,
        base: output::base_summary(&report.base, report.base_critical),
        rows: output::summary_rows(&report.report),
        histogram: output::histogram_entries(&report.report),
        modal_bus: report.report.modal_bus().ok().map(|b| b.0),
        modal_tie_break: "lowest bus id".into(),
        feasible_contingencies: report.report.feasible_count(),
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    vec![
        (PV_CURVES_FILE, output::pv_csv(curves)),
        (SUMMARY_CSV_FILE, output::summary_csv(&report.report)),
        (SUMMARY_JSON_FILE, json),
        (HISTOGRAM_FILE, output::histogram_csv(&report.report)),
    ]
}

fn write_all(dir: &Path, files: &[(&'static str, String)]) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            for p in written.iter().chain(std::iter::once(&path)) {
                let _ = fs::remove_file(p);
            }
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}

/// Runs the full study without writing anything.
pub fn compute(config: &RunConfig) -> Result<(RunReport, serde_json::Value), RunError> {
    config.validate()?;
    let started = Instant::now();
    let (case, inputs) = prepare_case(config)?;
    let settings = config.settings();

    let base_spec = ContingencySpec {
        id: 0,
        outages: Vec::new(),
        label: BASE_LABEL.into(),
    };
    let base = run_contingency(&case, &base_spec, &settings);
    let Some(base_curves) = base.curves else {
        let why = base.infeasibility.map_or("no operating point".into(), |r| r.to_string());
        return Err(RunError::InfeasibleBase(why));
    };

    let results = match Order::try_from(config.contingency_order) {
        Ok(order) => {
            let specs = enumerate(&case, order);
            par_sweep(&case, &specs, &settings, config.workers)
                .map_err(|e| RunError::Other(format!("worker pool: {e}")))?
        }
        Err(_) => Vec::new(),
    };
    let report = aggregate(&results);
    let mut stats = base_curves.stats;
    for c in results.iter().filter_map(|r| r.curves.as_ref()) {
        stats.accepted_steps += c.stats.accepted_steps;
        stats.rejected_steps += c.stats.rejected_steps;
        stats.newton_iterations += c.stats.newton_iterations;
    }
    Ok((
        RunReport {
            config: config.clone(),
            base: base_curves,
            base_critical: base.critical_bus,
            results,
            report,
            stats,
            elapsed: started.elapsed(),
            files: Vec::new(),
        },
        inputs,
    ))
}

/// Runs the study and writes `pv_curves.csv`, `summary.csv`,
/// `summary.json` and `histogram.csv` into the output directory. On failure
/// nothing is left behind.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    let (mut report, inputs) = compute(config)?;
    let files = render(&report, &config.settings(), inputs);
    report.files = write_all(&config.output_dir, &files)?;
    report.elapsed = report.elapsed.max(Duration::ZERO);
    Ok(report)
}
