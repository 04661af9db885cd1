use serde::{Deserialize, Serialize};

use super::chib::{chib_marginal_likelihood, MarginalLikelihood};
use super::diagnostics::{diagnostics, PosteriorSummary};
use super::model::BandwidthModel;
use super::prior::Priors;
use super::sampler::{run_sampler, AcceptanceRates, McmcConfig};
use crate::error::{FplmError, Result};
use crate::par;
use crate::semimetric::SemiMetricSpec;

/// Outcome for one candidate semi-metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub spec: SemiMetricSpec,
    pub stream: u64,
    /// 1 for the largest marginal likelihood; `None` if the candidate failed.
    pub rank: Option<usize>,
    pub marginal: Option<MarginalLikelihood>,
    /// `log L_winner - log L_candidate`.
    pub log_bayes_factor_vs_best: Option<f64>,
    pub h_hat: Option<f64>,
    pub acceptance: Option<AcceptanceRates>,
    pub summary: Option<PosteriorSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// In input order.
    pub candidates: Vec<CandidateResult>,
}

impl SelectionReport {
    pub fn best(&self) -> Option<&CandidateResult> {
        self.candidates.iter().find(|c| c.rank == Some(1))
    }

    /// Successful candidates, best first.
    pub fn ranked(&self) -> Vec<&CandidateResult> {
        let mut v: Vec<&CandidateResult> = self.candidates.iter().filter(|c| c.rank.is_some()).collect();
        v.sort_by_key(|c| c.rank);
        v
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["semimetric", "rank", "lml", "log_bf_vs_best", "h_hat", "error"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for c in &self.candidates {
            w.write_record([
                c.spec.to_string(),
                c.rank.map(|r| r.to_string()).unwrap_or_default(),
                opt(c.marginal.map(|m| m.log_marginal)),
                opt(c.log_bayes_factor_vs_best),
                opt(c.h_hat),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One chain per candidate (stream = candidate index), ranked by log
/// marginal likelihood, largest first. `build` turns a spec into a model; a
/// failing candidate is reported without stopping the others.
pub fn select_semimetric<M, F>(
    candidates: &[SemiMetricSpec],
    build: F,
    config: &McmcConfig,
    priors: &Priors,
) -> Result<SelectionReport>
where
    M: BandwidthModel,
    F: Fn(&SemiMetricSpec) -> Result<M> + Sync,
{
    if candidates.len() < 2 {
        return Err(FplmError::InvalidArgument("semi-metric selection needs at least two candidates".into()));
    }
    let indexed: Vec<(usize, SemiMetricSpec)> = candidates.iter().copied().enumerate().collect();
    let mut results = par::map_slice(&indexed, |&(i, spec)| {
        let stream = i as u64;
        let cfg = McmcConfig { stream, ..*config };
        let outcome = build(&spec).and_then(|model| {
            let chain = run_sampler(&model, &cfg, priors)?;
            let ml = chib_marginal_likelihood(&chain, &model, priors)?;
            let summary = diagnostics(&chain).ok();
            Ok((ml, chain.h_hat(), chain.acceptance_rates(), summary))
        });
        match outcome {
            Ok((ml, h, acc, summary)) => CandidateResult {
                spec,
                stream,
                rank: None,
                marginal: Some(ml),
                log_bayes_factor_vs_best: None,
                h_hat: Some(h),
                acceptance: Some(acc),
                summary,
                error: None,
            },
            Err(e) => CandidateResult {
                spec,
                stream,
                rank: None,
                marginal: None,
                log_bayes_factor_vs_best: None,
                h_hat: None,
                acceptance: None,
                summary: None,
                error: Some(e.to_string()),
            },
        }
    });
    let mut ok: Vec<usize> = (0..results.len()).filter(|&i| results[i].marginal.is_some()).collect();
    let lml = |r: &CandidateResult| r.marginal.map_or(f64::NEG_INFINITY, |m| m.log_marginal);
    ok.sort_by(|&a, &b| lml(&results[b]).total_cmp(&lml(&results[a])));
    if let Some(&best) = ok.first() {
        let top = lml(&results[best]);
        for (r, &i) in ok.iter().enumerate() {
            results[i].rank = Some(r + 1);
            results[i].log_bayes_factor_vs_best = Some(top - lml(&results[i]));
        }
    }
    Ok(SelectionReport { candidates: results })
}
