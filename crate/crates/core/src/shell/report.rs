//! The JSON report emitted by every command: echoed configuration, bound
//! constants with provenance, verdicts, residual and envelope summaries,
//! Lyapunov/dimension results, and runtime metadata. Reports round-trip
//! losslessly through serialization.

use crate::bounds::{float_repr, BoundSet, BoundVerdict, ResidualReport};
use crate::spectral::EmbeddingEstimate;
use crate::tangent::{DimensionBound, LyapunovReport, QmReport};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    /// Canonical config text the run was executed with.
    pub config_echo: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub embedding: Option<EmbeddingEstimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bounds: Option<BoundSet>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdicts: Option<VerdictSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub envelope: Option<EnvelopeSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residuals: Option<ResidualSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lyapunov: Option<Vec<LyapunovReport>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qm: Option<QmSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dimension: Option<DimensionSummary>,
    pub runtime_seconds: f64,
}

impl Report {
    pub fn new(command: &str, cfg: &super::config::RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            config_echo: super::config::emit_config(cfg),
            config_hash: super::config::config_hash(cfg),
            seed: cfg.seed,
            embedding: None,
            bounds: None,
            verdicts: None,
            envelope: None,
            residuals: None,
            lyapunov: None,
            qm: None,
            dimension: None,
            runtime_seconds: 0.0,
        }
    }
}

/// Tail-bound verdicts aggregated over an ensemble: per bound, the worst
/// (largest) observed tail maximum across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub runs: usize,
    pub aggregated: Vec<BoundVerdict>,
    pub failures: usize,
}

impl VerdictSummary {
    pub fn all_pass(&self) -> bool {
        self.failures == 0
    }
}

/// Pointwise-in-time decay envelope check for `||(v, z)(t)||^2`, aggregated
/// over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub runs: usize,
    /// Largest observed / envelope ratio over all samples of all runs.
    pub max_ratio: f64,
    pub tol_rel: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub per_run: Vec<ResidualReport>,
    pub all_pass: bool,
}

/// Trace averages per ensemble member plus the ensemble maximum, which is a
/// lower witness of the supremum over initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmSummary {
    pub per_run: Vec<QmReport>,
    pub q_m_ensemble_max: Vec<f64>,
    /// Smallest m with the ensemble-max q_m negative.
    pub m_star: Option<usize>,
}

impl QmSummary {
    pub fn from_runs(per_run: Vec<QmReport>) -> Self {
        let m_max = per_run.first().map(|r| r.q_m.len()).unwrap_or(0);
        let mut q_m_ensemble_max = vec![f64::NEG_INFINITY; m_max];
        for run in &per_run {
            for (acc, q) in q_m_ensemble_max.iter_mut().zip(&run.q_m) {
                *acc = acc.max(*q);
            }
        }
        let m_star = q_m_ensemble_max
            .iter()
            .position(|&q| q < 0.0)
            .map(|i| i + 1);
        Self {
            per_run,
            q_m_ensemble_max,
            m_star,
        }
    }
}

/// Dimension results with full constant provenance. The `analytic` entry
/// uses the closed-form `Q1 + Q2` (often non-representable, making the
/// bound vacuously large); the `witness` entry replaces it with the
/// observed tail maximum of `||grad g||^2`, a lower witness of the
/// attractor's H1 radius that keeps the chain finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub analytic: DimensionBound,
    /// ln(Q1 + Q2) used by the analytic entry.
    #[serde(with = "float_repr")]
    pub analytic_q1_plus_q2_ln: f64,
    pub witness: Option<DimensionBound>,
    /// Observed tail maximum of `||grad g||^2` feeding the witness entry.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_q1_plus_q2: Option<f64>,
    /// Empirical dimension bound from the q_m pipeline, when computed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m_star_empirical: Option<usize>,
    pub note: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shell::config::RunConfig;

    #[test]
    fn report_roundtrips_losslessly() {
        let cfg = RunConfig::default();
        let mut report = Report::new("constants", &cfg);
        report.bounds = Some(crate::bounds::compute_bound_set(
            &cfg.params,
            1.0,
            std::f64::consts::PI,
            1,
            0.7,
            0.8,
        ));
        report.runtime_seconds = 0.125;
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }
}
