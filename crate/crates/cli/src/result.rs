//! Result documents written by `solve`, `enumerate`, `design` and `verify`.

use gne_core::milp::MipResult;
use gne_core::nls::{Certificate, NLSResult};
use serde::{Deserialize, Serialize};

use crate::gamefile::Num;

/// Non-finite values become `null`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Duals {
    /// Inequality multipliers per block (one block per player, or one shared block).
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerReport {
    /// 1-based.
    pub player: usize,
    pub improvement: f64,
    pub feasibility: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub pass: bool,
    pub tol: f64,
    pub infeasibility: f64,
    pub players: Vec<PlayerReport>,
}

impl From<&Certificate> for CertificateReport {
    fn from(c: &Certificate) -> Self {
        CertificateReport {
            pass: c.pass,
            tol: c.tol,
            infeasibility: c.infeasibility,
            players: c
                .players
                .iter()
                .map(|p| PlayerReport {
                    player: p.player + 1,
                    improvement: p.improvement,
                    feasibility: p.feasibility,
                    pass: p.pass,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub solve_ms: f64,
}

/// Effective solver settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub method: String,
    pub variational: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultFile {
    pub status: String,
    pub x: Vec<f64>,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duals: Option<Duals>,
    /// 1-based indices of active inequality rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_set: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unrefined_residual_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub timings: Timings,
    #[serde(default)]
    pub config: ConfigEcho,
}

impl ResultFile {
    pub fn from_mip(r: &MipResult, config: ConfigEcho, solve_ms: f64) -> Self {
        let optimal = r.is_optimal();
        ResultFile {
            status: r.status.as_str().to_string(),
            x: r.x.clone(),
            p: r.p.clone(),
            duals: optimal.then(|| Duals {
                lambda: r.lambda.clone(),
                mu: r.mu.clone(),
                ..Default::default()
            }),
            active_set: optimal.then(|| r.signature.active()),
            residual_norm: finite(r.kkt_residual),
            nodes: Some(r.nodes),
            big_m_margin: finite(r.big_m_slack_margin),
            certificate: r.certificate.as_ref().map(CertificateReport::from),
            warnings: r.warnings.iter().map(|w| format!("{w:?}")).collect(),
            timings: Timings { solve_ms },
            config,
            ..Default::default()
        }
    }

    /// `g` holds the inequality values at the solution; rows within `act_tol`
    /// of zero are reported active.
    pub fn from_nls(r: &NLSResult, g: &[f64], act_tol: f64, config: ConfigEcho, solve_ms: f64) -> Self {
        let blocks = r.z.layout.blocks();
        ResultFile {
            status: r.status.as_str().to_string(),
            x: r.x().to_vec(),
            p: r.p.clone(),
            duals: Some(Duals {
                lambda: (0..blocks).map(|b| r.z.data[r.z.layout.lambda_block(b)].to_vec()).collect(),
                mu: (0..blocks).map(|b| r.z.data[r.z.layout.mu_block(b)].to_vec()).collect(),
                v: r.z.v().to_vec(),
                y: r.z.y().to_vec(),
            }),
            active_set: Some(g.iter().enumerate().filter(|(_, v)| v.abs() <= act_tol).map(|(k, _)| k + 1).collect()),
            residual_norm: finite(r.residual_norm),
            unrefined_residual_norm: r.unrefined_residual_norm.and_then(finite),
            design_value: r.design_value.and_then(finite),
            iterations: Some(r.iterations),
            certificate: r.certificate.as_ref().map(CertificateReport::from),
            timings: Timings { solve_ms },
            config,
            ..Default::default()
        }
    }

    /// Same document without timing fields, for determinism checks.
    pub fn without_timings(&self) -> Self {
        ResultFile {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

/// Point to check with `verify`. A [`ResultFile`] is also accepted.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Candidate {
    pub x: Vec<Num>,
    #[serde(default)]
    pub p: Vec<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub certificate: CertificateReport,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamefile::from_json;

    #[test]
    fn result_file_is_a_candidate() {
        let r = ResultFile {
            status: "optimal".into(),
            x: vec![1.0, -0.5],
            p: vec![2.0],
            residual_norm: Some(1e-12),
            ..Default::default()
        };
        let text = serde_json::to_string(&r).unwrap();
        let c: Candidate = from_json(&text).unwrap();
        assert_eq!(c.x, vec![Num(1.0), Num(-0.5)]);
        assert_eq!(c.p, vec![Num(2.0)]);
        let back: ResultFile = from_json(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn bare_candidate() {
        let c: Candidate = from_json(r#"{"x": [0, 1]}"#).unwrap();
        assert!(c.p.is_empty());
        assert!(from_json::<Candidate>(r#"{"p": [1]}"#).is_err());
    }
}
