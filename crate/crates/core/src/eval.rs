//! Multi-seed aggregation: runs are aligned on a common probe grid, a lower
//! confidence bound of the mean return is taken at every grid point, and the
//! performance-robustness score is the average of that curve.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::Write;

use crate::error::{Error, Result};
use crate::record::RunRecord;

/// Returns of `n` runs on a uniform probe grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub grid: Vec<u64>,
    /// `rows[run][k]` is run's return at `grid[k]`.
    pub rows: Vec<Vec<f64>>,
}

/// Largest probe count reached by every record.
pub fn common_horizon(records: &[RunRecord]) -> Option<u64> {
    records
        .iter()
        .map(|r| r.iterations.last().map_or(0, |i| i.probes))
        .min()
}

/// Smallest grid step at which every record has an observation at the first
/// grid point (the largest first-iteration probe count).
pub fn default_grid_step(records: &[RunRecord]) -> Option<u64> {
    records
        .iter()
        .map(|r| r.iterations.first().map(|i| i.probes))
        .collect::<Option<Vec<_>>>()?
        .into_iter()
        .max()
}

fn check_record(r: &RunRecord) -> Result<()> {
    for w in r.iterations.windows(2) {
        if w[1].probes <= w[0].probes {
            return Err(Error::Format(format!(
                "seed {}: probe counts not strictly increasing at t = {}",
                r.seed, w[1].t
            )));
        }
    }
    if let Some(i) = r.iterations.iter().find(|i| !i.eval_return.is_finite()) {
        return Err(Error::Format(format!(
            "seed {}: non-finite return at t = {}",
            r.seed, i.t
        )));
    }
    Ok(())
}

/// Step-function alignment on the grid `grid_step, 2·grid_step, … ≤ T`: each
/// run contributes its most recent logged return at every grid point.
///
/// `T` defaults to [`common_horizon`]; an explicit `T` beyond some run's last
/// probe is an error.
pub fn align_runs(records: &[RunRecord], horizon: Option<u64>, grid_step: u64) -> Result<Alignment> {
    if records.is_empty() {
        return Err(Error::config("no records to align"));
    }
    if grid_step == 0 {
        return Err(Error::config("grid step must be positive"));
    }
    for r in records {
        check_record(r)?;
    }
    let common = common_horizon(records).unwrap_or(0);
    let horizon = horizon.unwrap_or(common);
    if horizon > common {
        let short = records
            .iter()
            .min_by_key(|r| r.iterations.last().map_or(0, |i| i.probes))
            .expect("non-empty");
        return Err(Error::config(format!(
            "horizon {horizon} exceeds the last probe {common} of seed {}",
            short.seed
        )));
    }
    if horizon < grid_step {
        return Err(Error::config(format!(
            "horizon {horizon} is shorter than one grid step {grid_step}"
        )));
    }
    let grid: Vec<u64> = (1..=horizon / grid_step).map(|k| k * grid_step).collect();
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let mut row = Vec::with_capacity(grid.len());
        let mut j = 0;
        let mut current: Option<f64> = None;
        for &g in &grid {
            while j < r.iterations.len() && r.iterations[j].probes <= g {
                current = Some(r.iterations[j].eval_return);
                j += 1;
            }
            match current {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::config(format!(
                        "seed {} has no observation at or before probe {g}",
                        r.seed
                    )))
                }
            }
        }
        rows.push(row);
    }
    Ok(Alignment { grid, rows })
}

/// Mean computed as `x₀ + Σ(x_i − x₀)/n` over the sorted sample, so it is
/// independent of input order and exact for constant samples.
fn stable_mean(sorted: &[f64]) -> f64 {
    let x0 = sorted[0];
    let shift: f64 = sorted.iter().map(|x| x - x0).sum();
    x0 + shift / sorted.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LciPoint {
    pub probe: u64,
    pub lci: f64,
    pub mean: f64,
    pub std: f64,
}

fn z_value(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::config(format!(
            "confidence must lie in (0,1), got {confidence}"
        )));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0))
}

fn lci_point(values: &[f64], z: f64) -> Result<(f64, f64, f64)> {
    if values.len() < 2 {
        return Err(Error::config(format!(
            "a confidence bound needs at least 2 runs, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = stable_mean(&sorted);
    let ss: f64 = sorted.iter().map(|x| (x - mean) * (x - mean)).sum();
    let std = (ss / (n - 1.0)).sqrt();
    Ok((mean - z * std / n.sqrt(), mean, std))
}

/// `mean − z·s/√n` with the two-sided normal quantile `z` of `confidence`
/// and the `n − 1` sample standard deviation `s`.
pub fn lci(values: &[f64], confidence: f64) -> Result<f64> {
    lci_point(values, z_value(confidence)?).map(|(l, _, _)| l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    pub algorithm: String,
    pub n: usize,
    /// Probe horizon `T`.
    pub horizon: u64,
    pub grid_step: u64,
    pub confidence: f64,
    pub pr: f64,
    pub curve: Vec<LciPoint>,
}

/// Performance-robustness score: the mean of the LCI curve over the grid.
pub fn pr_metric(
    records: &[RunRecord],
    n: usize,
    horizon: Option<u64>,
    grid_step: u64,
    confidence: f64,
) -> Result<PrReport> {
    if records.len() != n {
        return Err(Error::config(format!(
            "expected {n} records, got {}",
            records.len()
        )));
    }
    let algorithm = records
        .first()
        .map(|r| r.algorithm.clone())
        .ok_or_else(|| Error::config("no records"))?;
    if let Some(r) = records.iter().find(|r| r.algorithm != algorithm) {
        return Err(Error::config(format!(
            "records mix algorithms {algorithm} and {}",
            r.algorithm
        )));
    }
    let z = z_value(confidence)?;
    let aligned = align_runs(records, horizon, grid_step)?;
    let mut curve = Vec::with_capacity(aligned.grid.len());
    for (k, &probe) in aligned.grid.iter().enumerate() {
        let column: Vec<f64> = aligned.rows.iter().map(|row| row[k]).collect();
        let (lci, mean, std) = lci_point(&column, z)?;
        curve.push(LciPoint {
            probe,
            lci,
            mean,
            std,
        });
    }
    let lcis: Vec<f64> = curve.iter().map(|p| p.lci).collect();
    let pr = {
        // grid order is fixed, so no sorting is needed for order independence
        let x0 = lcis[0];
        x0 + lcis.iter().map(|x| x - x0).sum::<f64>() / lcis.len() as f64
    };
    Ok(PrReport {
        algorithm,
        n,
        horizon: *aligned.grid.last().expect("non-empty grid"),
        grid_step,
        confidence,
        pr,
        curve,
    })
}

impl PrReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "probe,lci,mean,std")?;
        for p in &self.curve {
            writeln!(w, "{},{},{},{}", p.probe, p.lci, p.mean, p.std)?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Format(e.to_string()))
    }
}
