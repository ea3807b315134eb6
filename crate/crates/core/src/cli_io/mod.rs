//! Run configuration, batch runners and report output.

pub mod config;
mod junction;
mod network;
pub mod svg;
mod table;

use std::path::Path;

pub use config::{Mode, RunConfig};
pub use junction::{
    random_admissible_triangle, random_perturbation, run_junction, run_stability, simulate_junction, stability_sweep,
    JunctionReport, MIN_EQ_LENGTH,
};
pub use network::{
    run_network, run_stats, simulate_network, simulate_networks, thin, write_network_outputs, NetworkRun,
    NetworkSummary, RunFits, StatsReport, MAX_FIT_SAMPLES,
};
pub use table::{plot_table, Table};

use crate::error::Result;

pub(crate) fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p)?;
    Ok(())
}

pub(crate) fn create_file(p: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(p)?))
}

/// Dispatches on `cfg.mode`.
pub fn run(cfg: &RunConfig) -> Result<()> {
    match cfg.mode {
        Mode::Junction => run_junction(cfg).map(|_| ()),
        Mode::Stability => run_stability(cfg).map(|_| ()),
        Mode::Network => run_network(cfg).map(|_| ()),
        Mode::Stats => run_stats(cfg).map(|_| ()),
    }
}
