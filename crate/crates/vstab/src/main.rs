use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use vstab::run::{run, RenewableSpec, RunConfig, ScMode};
use vstab_core::netmodel::ReactiveGrowth;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sc {
    With,
    Without,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Growth {
    /// Loads keep their power factor.
    ConstPf,
    /// Only active load grows.
    POnly,
}

/// Voltage stability screening: PV curves, contingency sweeps and
/// critical-bus statistics.
#[derive(Debug, Parser)]
#[command(name = "vstab", version)]
struct Cli {
    /// Case file in IEEE common data format.
    #[arg(long)]
    case: PathBuf,
    /// TOML sidecar with machine kinds, parallel circuits and outage list.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Run with or without the synchronous condensers.
    #[arg(long, value_enum, default_value = "with")]
    sc: Sc,
    /// Contingency order: 0 (base only), 1 or 2.
    #[arg(long, default_value_t = 1)]
    order: u8,
    /// Initial load increment in MW.
    #[arg(long, default_value_t = 1.0)]
    step_mw: f64,
    /// Renewable plant as kind:bus:mva (scig, dfig, solar_pv).
    #[arg(long, value_parser = RenewableSpec::parse)]
    renewable: Option<RenewableSpec>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the contingency sweep.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Enforce generator reactive limits with PV-to-PQ switching.
    #[arg(long)]
    q_limits: bool,
    #[arg(long, value_enum, default_value = "const-pf")]
    growth: Growth,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = RunConfig::new(cli.case, cli.out);
    config.sidecar_path = cli.sidecar;
    config.sc_mode = match cli.sc {
        Sc::With => ScMode::With,
        Sc::Without => ScMode::Without,
    };
    config.contingency_order = cli.order;
    config.step_mw = cli.step_mw;
    config.renewable = cli.renewable;
    config.workers = cli.workers;
    config.enforce_q_limits = cli.q_limits;
    config.reactive_growth = match cli.growth {
        Growth::ConstPf => ReactiveGrowth::ConstantPowerFactor,
        Growth::POnly => ReactiveGrowth::ActiveOnly,
    };

    match run(&config) {
        Ok(report) => {
            let modal = report
                .report
                .modal_bus()
                .map_or("none".to_string(), |b| b.0.to_string());
            eprintln!(
                "base critical bus {}, margin {:.1} MW; {} of {} contingencies feasible; modal bus {}; {:.2}s",
                report.base_critical.map_or("none".to_string(), |b| b.0.to_string()),
                report.base.nose_total_load - report.base.base_total_load,
                report.report.feasible_count(),
                report.report.rows.len(),
                modal,
                report.elapsed.as_secs_f64(),
            );
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("vstab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
