//! Command implementations shared by the binary and the integration tests.

use std::fs;
use std::path::Path;

use xlra_core::engine::run_campaign;
use xlra_core::optimizer::{sweep_delta, DeltaGrid};
use xlra_core::protocol::ProtocolKind;

use crate::config::ResolvedConfig;
use crate::error::CliError;
use crate::output::{
    write_metric_csvs, write_plot_series, write_resolved_config, write_sweep_csvs, CampaignRow,
};

/// Which protocol(s) a command should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolSelection {
    SucreXl,
    NomaXl,
    Both,
}

impl ProtocolSelection {
    pub fn kinds(self) -> &'static [ProtocolKind] {
        match self {
            ProtocolSelection::SucreXl => &[ProtocolKind::SucreXl],
            ProtocolSelection::NomaXl => &[ProtocolKind::NomaXl],
            ProtocolSelection::Both => &[ProtocolKind::SucreXl, ProtocolKind::NomaXl],
        }
    }
}

fn check_workers(workers: Option<usize>) -> Result<(), CliError> {
    if workers == Some(0) {
        return Err(CliError::Config("--workers must be >= 1".into()));
    }
    Ok(())
}

fn prepare_out_dir(out: &Path, cfg: &ResolvedConfig) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    write_resolved_config(out, cfg)?;
    Ok(())
}

/// Runs the configured campaign grid (protocols x K x B) and writes the
/// metric CSVs plus plot series into `out`.
pub fn cmd_run(
    cfg: &ResolvedConfig,
    selection: ProtocolSelection,
    workers: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    check_workers(workers)?;
    cfg.validate_for(selection.kinds())?;
    prepare_out_dir(out, cfg)?;

    let mut rows = Vec::new();
    for &kind in selection.kinds() {
        for &k in &cfg.population.k_list {
            for &b in &cfg.array.b_list {
                let scenario = cfg.scenario(kind, k, b)?;
                let result = run_campaign(&scenario, workers)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                rows.push(CampaignRow {
                    protocol: kind.name(),
                    k,
                    b,
                    delta: scenario.protocol.delta,
                    trials: scenario.trials,
                    far_field_violated: result.far_field_violated,
                    stats: result.stats,
                });
            }
        }
    }
    write_metric_csvs(out, &rows)?;
    write_plot_series(out, &rows)?;
    Ok(())
}

/// Sweeps the bias scale over an evenly spaced grid for every (K, B) pair
/// and writes the sweep tables into `out`. Only the cluster protocol has a
/// tunable scale; the baseline's is fixed, so selecting it is refused.
#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep_delta(
    cfg: &ResolvedConfig,
    selection: ProtocolSelection,
    lo: f64,
    hi: f64,
    step: f64,
    trials_per_point: Option<usize>,
    workers: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    if selection != ProtocolSelection::NomaXl {
        return Err(CliError::Config(
            "the baseline protocol runs at the fixed bias scale -1 and has nothing to sweep; \
             use --protocol noma-xl"
                .into(),
        ));
    }
    check_workers(workers)?;
    let grid = DeltaGrid {
        lo,
        hi,
        step,
        trials_per_point: trials_per_point.unwrap_or(cfg.run.trials),
    };
    grid.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate_for(selection.kinds())?;
    prepare_out_dir(out, cfg)?;

    let mut sweeps = Vec::new();
    for &k in &cfg.population.k_list {
        for &b in &cfg.array.b_list {
            let scenario = cfg.scenario(ProtocolKind::NomaXl, k, b)?;
            let sweep = sweep_delta(&scenario, &grid, workers)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            sweeps.push((k, b, sweep));
        }
    }
    write_sweep_csvs(out, &sweeps)?;
    Ok(())
}
