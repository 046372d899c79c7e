//! Per-seed run logs shared by every optimizer, and their JSON-lines form.
//!
//! A record file holds one `{"type":"iteration",…}` object per iteration
//! followed by either a `{"type":"summary",…}` object or, for an aborted run,
//! a `{"type":"failure",…}` marker.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::cubic::SubsolverBranch;
use crate::error::{Error, Result};

/// How the parameter update of one iteration was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Cauchy,
    GradientAscent,
    Finalsolver,
    /// Plain gradient step (REINFORCE).
    Gradient,
}

impl From<SubsolverBranch> for StepKind {
    fn from(b: SubsolverBranch) -> Self {
        match b {
            SubsolverBranch::Cauchy => StepKind::Cauchy,
            SubsolverBranch::GradientAscent => StepKind::GradientAscent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationRecord {
    pub t: u64,
    /// Cumulative training probes after this iteration.
    pub probes: u64,
    /// Mean evaluation return at the updated parameters.
    pub eval_return: f64,
    /// Model increase `m_t(h_t)` reported by the subsolver (cubic methods).
    pub model_increase: Option<f64>,
    pub step_norm: f64,
    /// Number of HVP correction samples (0 on checkpoint iterations).
    pub s_t: u64,
    pub checkpoint: bool,
    pub branch: StepKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// The subsolver's model increase fell below the threshold and the
    /// finalsolver converged.
    Stationary,
    /// As `Stationary`, but the finalsolver stopped at its iteration cap.
    FinalsolverCap,
    MaxIterations,
    ProbeBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub initial_return: f64,
    pub final_return: f64,
    /// Stationarity measure `max(‖∇J‖^{3/2}, λ_max³/ρ^{3/2})` at the final
    /// parameters, when computed.
    pub final_mu: Option<f64>,
    /// True when `final_mu` came from a power iteration that did not converge.
    pub mu_flagged: bool,
    pub termination: Termination,
    pub total_probes: u64,
    pub total_samples: u64,
    pub final_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    pub iterations: Vec<IterationRecord>,
    pub summary: RunSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum Line {
    Iteration {
        algorithm: String,
        seed: u64,
        #[serde(flatten)]
        record: IterationRecord,
    },
    Summary {
        algorithm: String,
        seed: u64,
        #[serde(flatten)]
        summary: RunSummary,
    },
    Failure {
        algorithm: String,
        seed: u64,
        message: String,
    },
}

fn write_line<W: Write>(w: &mut W, line: &Line) -> Result<()> {
    serde_json::to_writer(&mut *w, line).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

fn write_iterations<W: Write>(
    w: &mut W,
    algorithm: &str,
    seed: u64,
    iterations: &[IterationRecord],
) -> Result<()> {
    for it in iterations {
        write_line(
            w,
            &Line::Iteration {
                algorithm: algorithm.to_string(),
                seed,
                record: it.clone(),
            },
        )?;
    }
    Ok(())
}

impl RunRecord {
    /// A record holding only `(probes, return)` observations, as produced by
    /// an external logger; optimizer diagnostics are left empty.
    pub fn from_series(algorithm: &str, seed: u64, points: &[(u64, f64)]) -> Self {
        let iterations: Vec<IterationRecord> = points
            .iter()
            .enumerate()
            .map(|(t, &(probes, eval_return))| IterationRecord {
                t: t as u64,
                probes,
                eval_return,
                model_increase: None,
                step_norm: 0.0,
                s_t: 0,
                checkpoint: true,
                branch: StepKind::Gradient,
            })
            .collect();
        let first = points.first().map_or(0.0, |p| p.1);
        let last = points.last().map_or(0, |p| p.0);
        Self {
            algorithm: algorithm.to_string(),
            seed,
            summary: RunSummary {
                initial_return: first,
                final_return: points.last().map_or(0.0, |p| p.1),
                final_mu: None,
                mu_flagged: false,
                termination: Termination::MaxIterations,
                total_probes: last,
                total_samples: 0,
                final_params: Vec::new(),
            },
            iterations,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        write_iterations(&mut w, &self.algorithm, self.seed, &self.iterations)?;
        write_line(
            &mut w,
            &Line::Summary {
                algorithm: self.algorithm.clone(),
                seed: self.seed,
                summary: self.summary.clone(),
            },
        )
    }

    /// Parses a complete record file. Files ending in a failure marker are
    /// rejected with the recorded message.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut algorithm: Option<(String, u64)> = None;
        let mut iterations = Vec::new();
        let mut summary = None;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if summary.is_some() {
                return Err(Error::Format(format!("line {}: content after summary", n + 1)));
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
            let (alg, seed) = match &parsed {
                Line::Iteration { algorithm, seed, .. }
                | Line::Summary { algorithm, seed, .. }
                | Line::Failure { algorithm, seed, .. } => (algorithm.clone(), *seed),
            };
            match &algorithm {
                None => algorithm = Some((alg, seed)),
                Some(a) if *a != (alg.clone(), seed) => {
                    return Err(Error::Format(format!(
                        "line {}: record mixes runs ({} seed {}) and ({alg} seed {seed})",
                        n + 1,
                        a.0,
                        a.1
                    )))
                }
                _ => {}
            }
            match parsed {
                Line::Iteration { record, .. } => iterations.push(record),
                Line::Summary { summary: s, .. } => summary = Some(s),
                Line::Failure { message, .. } => {
                    return Err(Error::Format(format!("run aborted: {message}")))
                }
            }
        }
        let (algorithm, seed) = algorithm.ok_or_else(|| Error::Format("empty record".into()))?;
        let summary = summary.ok_or_else(|| Error::Format("record has no summary".into()))?;
        Ok(Self {
            algorithm,
            seed,
            iterations,
            summary,
        })
    }
}

/// Iterations logged before an optimizer aborted.
#[derive(Debug)]
pub struct RunFailure {
    pub algorithm: String,
    pub seed: u64,
    pub partial: Vec<IterationRecord>,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} seed {} aborted after {} iterations: {}",
            self.algorithm,
            self.seed,
            self.partial.len(),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl RunFailure {
    /// Writes the partial log followed by a failure marker.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        write_iterations(&mut w, &self.algorithm, self.seed, &self.partial)?;
        write_line(
            &mut w,
            &Line::Failure {
                algorithm: self.algorithm.clone(),
                seed: self.seed,
                message: self.error.to_string(),
            },
        )
    }
}
