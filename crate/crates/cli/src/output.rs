//! Result-set writers: per-metric CSVs, plain two-column plot series, sweep
//! tables, and the resolved-config echo.
//!
//! All numeric columns are written through serde's float formatting, which
//! emits the shortest decimal that round-trips to the same bits, so files
//! are byte-stable across runs and lossless to re-read.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use xlra_core::metrics::{CampaignStats, MetricStat};
use xlra_core::optimizer::DeltaSweepResult;

use crate::config::ResolvedConfig;
use crate::error::CliError;

/// One campaign's worth of output: the grid point it ran at plus its
/// statistics.
#[derive(Debug, Clone)]
pub struct CampaignRow {
    pub protocol: &'static str,
    pub k: usize,
    pub b: usize,
    pub delta: f64,
    pub trials: usize,
    pub far_field_violated: bool,
    pub stats: CampaignStats,
}

/// The four reported metrics, in output order.
const METRICS: [&str; 4] = ["attempts", "failure", "accepted", "sum_rate"];

fn stat_of(row: &CampaignRow, metric: &str) -> MetricStat {
    match metric {
        "attempts" => row.stats.avg_attempts,
        "failure" => row.stats.failure_prob,
        "accepted" => row.stats.normalized_accepted,
        "sum_rate" => row.stats.mean_sum_rate,
        other => unreachable!("unknown metric {other}"),
    }
}

#[derive(Serialize)]
struct MetricRecord<'a> {
    protocol: &'a str,
    k: usize,
    b: usize,
    delta: f64,
    trials: usize,
    mean: f64,
    ci95_half_width: f64,
    far_field_violated: bool,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

/// Writes `attempts.csv`, `failure.csv`, `accepted.csv`, and `sum_rate.csv`,
/// one row per (protocol, K, B) in campaign order.
pub fn write_metric_csvs(dir: &Path, rows: &[CampaignRow]) -> Result<(), CliError> {
    for metric in METRICS {
        let path = dir.join(format!("{metric}.csv"));
        let mut writer = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        for row in rows {
            let stat = stat_of(row, metric);
            writer
                .serialize(MetricRecord {
                    protocol: row.protocol,
                    k: row.k,
                    b: row.b,
                    delta: row.delta,
                    trials: row.trials,
                    mean: stat.mean,
                    ci95_half_width: stat.ci95_half_width,
                    far_field_violated: row.far_field_violated,
                })
                .map_err(|e| io_err(&path, e))?;
        }
        writer.flush().map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SeriesPoint {
    k: usize,
    mean: f64,
}

/// Writes plot-ready series under `dir/plot/`: for each metric and each
/// (protocol, B) curve, a two-column (K, mean) file any plotter can consume.
pub fn write_plot_series(dir: &Path, rows: &[CampaignRow]) -> Result<(), CliError> {
    let plot_dir = dir.join("plot");
    fs::create_dir_all(&plot_dir).map_err(|e| io_err(&plot_dir, e))?;
    let mut curves: Vec<(&'static str, usize)> = Vec::new();
    for row in rows {
        if !curves.contains(&(row.protocol, row.b)) {
            curves.push((row.protocol, row.b));
        }
    }
    for metric in METRICS {
        for &(protocol, b) in &curves {
            let path = plot_dir.join(format!("{metric}_{protocol}_b{b}.csv"));
            let mut writer = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
            for row in rows.iter().filter(|r| r.protocol == protocol && r.b == b) {
                writer
                    .serialize(SeriesPoint {
                        k: row.k,
                        mean: stat_of(row, metric).mean,
                    })
                    .map_err(|e| io_err(&path, e))?;
            }
            writer.flush().map_err(|e| io_err(&path, e))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRecord {
    k: usize,
    b: usize,
    delta: f64,
    mean_sum_rate: f64,
    ci_half_width: f64,
    is_argmax: bool,
}

#[derive(Serialize)]
struct DeltaStarRecord {
    k: usize,
    b: usize,
    delta_star: f64,
    mean_sum_rate: f64,
    ci_half_width: f64,
    trials_per_point: usize,
}

#[derive(Serialize)]
struct SweepSeriesPoint {
    delta: f64,
    mean_sum_rate: f64,
}

/// Writes `delta_sweep.csv` (every grid point), `delta_star.csv` (one row
/// per (K, B) with the argmax), and per-(K, B) two-column plot series.
pub fn write_sweep_csvs(
    dir: &Path,
    sweeps: &[(usize, usize, DeltaSweepResult)],
) -> Result<(), CliError> {
    let sweep_path = dir.join("delta_sweep.csv");
    let mut sweep_writer =
        csv::Writer::from_path(&sweep_path).map_err(|e| io_err(&sweep_path, e))?;
    let star_path = dir.join("delta_star.csv");
    let mut star_writer = csv::Writer::from_path(&star_path).map_err(|e| io_err(&star_path, e))?;
    let plot_dir = dir.join("plot");
    fs::create_dir_all(&plot_dir).map_err(|e| io_err(&plot_dir, e))?;

    for (k, b, sweep) in sweeps {
        for point in &sweep.points {
            sweep_writer
                .serialize(SweepRecord {
                    k: *k,
                    b: *b,
                    delta: point.delta,
                    mean_sum_rate: point.mean_sum_rate,
                    ci_half_width: point.ci95_half_width,
                    is_argmax: point.delta == sweep.delta_star,
                })
                .map_err(|e| io_err(&sweep_path, e))?;
        }
        let star = sweep
            .points
            .iter()
            .find(|p| p.delta == sweep.delta_star)
            .expect("argmax is one of the grid points");
        star_writer
            .serialize(DeltaStarRecord {
                k: *k,
                b: *b,
                delta_star: sweep.delta_star,
                mean_sum_rate: star.mean_sum_rate,
                ci_half_width: star.ci95_half_width,
                trials_per_point: sweep.trials_per_point,
            })
            .map_err(|e| io_err(&star_path, e))?;

        let series_path = plot_dir.join(format!("sum_rate_vs_delta_k{k}_b{b}.csv"));
        let mut series_writer =
            csv::Writer::from_path(&series_path).map_err(|e| io_err(&series_path, e))?;
        for point in &sweep.points {
            series_writer
                .serialize(SweepSeriesPoint {
                    delta: point.delta,
                    mean_sum_rate: point.mean_sum_rate,
                })
                .map_err(|e| io_err(&series_path, e))?;
        }
        series_writer.flush().map_err(|e| io_err(&series_path, e))?;
    }
    sweep_writer.flush().map_err(|e| io_err(&sweep_path, e))?;
    star_writer.flush().map_err(|e| io_err(&star_path, e))?;
    Ok(())
}

/// Echoes the exact configuration a run resolved to, for provenance.
pub fn write_resolved_config(dir: &Path, cfg: &ResolvedConfig) -> Result<PathBuf, CliError> {
    let path = dir.join("config.resolved.toml");
    fs::write(&path, cfg.emit_toml()).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;
    use xlra_core::metrics::MetricStat;
    use xlra_core::optimizer::{DeltaPoint, DeltaSweepResult};

    fn fake_stats(seed: f64) -> CampaignStats {
        let s = |m| MetricStat {
            mean: m,
            ci95_half_width: m / 10.0,
        };
        CampaignStats {
            avg_attempts: s(seed),
            failure_prob: s(seed / 2.0),
            normalized_accepted: s(seed / 3.0),
            mean_sum_rate: s(seed / 4.0),
            trials: 5,
        }
    }

    #[test]
    fn metric_csvs_have_stable_headers_and_row_counts() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            CampaignRow {
                protocol: "sucre-xl",
                k: 100,
                b: 1,
                delta: -1.0,
                trials: 5,
                far_field_violated: false,
                stats: fake_stats(2.0),
            },
            CampaignRow {
                protocol: "noma-xl",
                k: 100,
                b: 1,
                delta: -1.0,
                trials: 5,
                far_field_violated: false,
                stats: fake_stats(3.0),
            },
        ];
        write_metric_csvs(dir.path(), &rows).unwrap();
        for metric in METRICS {
            let text = fs::read_to_string(dir.path().join(format!("{metric}.csv"))).unwrap();
            let mut lines = text.lines();
            assert_eq!(
                lines.next().unwrap(),
                "protocol,k,b,delta,trials,mean,ci95_half_width,far_field_violated"
            );
            assert_eq!(
                lines.count(),
                2,
                "{metric}.csv must hold one row per campaign"
            );
        }
        let attempts = fs::read_to_string(dir.path().join("attempts.csv")).unwrap();
        assert!(attempts.contains("sucre-xl,100,1,-1.0,5,2.0,0.2,false"));
    }

    #[test]
    fn plot_series_are_two_column_per_curve() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = Vec::new();
        for k in [100, 200] {
            for b in [1, 2] {
                rows.push(CampaignRow {
                    protocol: "noma-xl",
                    k,
                    b,
                    delta: -1.0,
                    trials: 5,
                    far_field_violated: false,
                    stats: fake_stats(k as f64),
                });
            }
        }
        write_plot_series(dir.path(), &rows).unwrap();
        let text =
            fs::read_to_string(dir.path().join("plot").join("attempts_noma-xl_b2.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,mean");
        assert_eq!(lines.len(), 3, "one point per K in the series");
        assert!(lines[1].starts_with("100,"));
        assert!(lines[2].starts_with("200,"));
    }

    #[test]
    fn sweep_outputs_mark_exactly_one_argmax_per_grid_point() {
        let dir = tempfile::tempdir().unwrap();
        let sweep = DeltaSweepResult {
            points: vec![
                DeltaPoint {
                    delta: -0.5,
                    mean_sum_rate: 1.0,
                    ci95_half_width: 0.1,
                },
                DeltaPoint {
                    delta: 0.0,
                    mean_sum_rate: 2.0,
                    ci95_half_width: 0.1,
                },
            ],
            delta_star: 0.0,
            trials_per_point: 9,
        };
        write_sweep_csvs(dir.path(), &[(100, 1, sweep)]).unwrap();
        let text = fs::read_to_string(dir.path().join("delta_sweep.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,b,delta,mean_sum_rate,ci_half_width,is_argmax"
        );
        let body: Vec<&str> = lines.collect();
        assert_eq!(body.len(), 2);
        assert_eq!(body.iter().filter(|l| l.ends_with("true")).count(), 1);
        let star = fs::read_to_string(dir.path().join("delta_star.csv")).unwrap();
        assert!(star.starts_with("k,b,delta_star,mean_sum_rate,ci_half_width,trials_per_point"));
        assert!(star.contains("100,1,0.0,2.0,0.1,9"));
        let series = fs::read_to_string(
            dir.path()
                .join("plot")
                .join("sum_rate_vs_delta_k100_b1.csv"),
        )
        .unwrap();
        assert_eq!(series.lines().next().unwrap(), "delta,mean_sum_rate");
    }

    #[test]
    fn config_echo_reparses_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config_str("[run]\ntrials = 3\n").unwrap();
        let path = write_resolved_config(dir.path(), &cfg).unwrap();
        let echoed = crate::config::parse_config(&path).unwrap();
        assert_eq!(cfg, echoed);
    }
}
