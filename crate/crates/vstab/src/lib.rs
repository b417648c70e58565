//! File formats, parallel sweeps and the end-to-end study runner built on
//! [`vstab_core`].

pub mod cdf;
pub mod output;
pub mod run;
pub mod sidecar;
pub mod sweep;
