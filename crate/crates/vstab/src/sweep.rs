//! Contingency sweeps on a dedicated rayon pool.

use rayon::prelude::*;
use vstab_core::contingency::{run_contingency, ContingencyResult, ContingencySpec};
use vstab_core::cpf::ContinuationSettings;
use vstab_core::netmodel::NetworkCase;

/// Same results as [`vstab_core::contingency::run_sweep`], in spec order,
/// computed on `workers` threads.
pub fn par_sweep(
    case: &NetworkCase,
    specs: &[ContingencySpec],
    settings: &ContinuationSettings,
    workers: usize,
) -> Result<Vec<ContingencyResult>, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    Ok(pool.install(|| {
        specs
            .par_iter()
            .map(|s| run_contingency(case, s, settings))
            .collect()
    }))
}
