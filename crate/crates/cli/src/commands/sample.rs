use lcnn::coupling::{check_logconcavity_conditions, ConditionReport, CouplingParams};
use lcnn::estimators::{exact_discrete_posterior, posterior_mean};
use lcnn::nnmodel::WeightMatrix;
use lcnn::priors::enumerate_grid;
use lcnn::rng::stream_rng;
use lcnn::samplers::{reference_posterior_quadrature, ChainDiagnostics, TwoStageOutput};
use lcnn::{samplers, stats};
use serde::Serialize;

use super::resolve_beta;
use crate::config::{ExperimentConfig, PriorSpec};
use crate::dataio::load_data;
use crate::error::{config_err, CliError, Result};
use crate::output::Outputs;

const DRAW_STREAM: u64 = 0xD7A3;

#[derive(Serialize)]
struct DrawLine<'a> {
    /// Retained `xi` that produced the draw; absent for exact draws.
    xi_index: Option<usize>,
    w: &'a WeightMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureComparison {
    pub probe: Vec<f64>,
    pub reference: f64,
    pub estimate: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalSummary {
    pub chains: usize,
    pub mean_acceptance: f64,
    pub min_ess: f64,
    pub support_rejections: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub config_hash: String,
    pub method: &'static str,
    pub n: usize,
    pub beta: f64,
    pub conditions: ConditionReport,
    pub coupling: Option<CouplingParams>,
    pub xi_diagnostics: Option<ChainDiagnostics>,
    /// Largest standard error of the estimated marginal score over the outer chain.
    pub max_score_se: Option<f64>,
    pub conditional: Option<ConditionalSummary>,
    pub draws: usize,
    pub probe: Vec<f64>,
    pub posterior_mean_at_probe: f64,
    pub quadrature: Option<QuadratureComparison>,
}

/// Two-stage sampling under the continuous prior, exact draws under the grid prior.
pub fn run(cfg: &ExperimentConfig) -> Result<Certificate> {
    let net = cfg.network.build()?;
    let (data, teacher) = load_data(cfg, &net)?;
    if data.is_empty() {
        return Err(config_err("sampling needs at least one observation"));
    }
    let n = data.len();
    let beta = resolve_beta(cfg, &net, &data, teacher.as_ref())?;
    let conditions = check_logconcavity_conditions(&net, &data, beta, n)?;
    let probe = cfg
        .sampler
        .probe
        .clone()
        .unwrap_or_else(|| data.x(0).to_vec());
    let budgets = cfg.budgets();
    let mut outputs = Outputs::create(cfg, "sample")?;

    let mut cert = Certificate {
        config_hash: outputs.hash().to_string(),
        method: "",
        n,
        beta,
        conditions,
        coupling: None,
        xi_diagnostics: None,
        max_score_se: None,
        conditional: None,
        draws: 0,
        probe: probe.clone(),
        posterior_mean_at_probe: f64::NAN,
        quadrature: None,
    };

    let outputs_at_probe: Vec<f64> = match cfg.prior {
        PriorSpec::Continuous => {
            let params = CouplingParams::new(&net, &data, n, beta)?;
            let out: TwoStageOutput =
                samplers::two_stage_sample(&net, &data, &params, &budgets, cfg.exec)?;
            outputs.write_jsonl("xi_chain.jsonl", &out.xi.chain.records)?;
            let lines: Vec<DrawLine> = out
                .draws
                .iter()
                .map(|d| DrawLine {
                    xi_index: Some(d.xi_index),
                    w: &d.w,
                })
                .collect();
            outputs.write_jsonl("draws.jsonl", &lines)?;
            let cond = &out.conditional;
            cert.method = "two_stage";
            cert.coupling = Some(params);
            cert.xi_diagnostics = Some(out.xi.chain.diagnostics.clone());
            cert.max_score_se = Some(out.xi.score_se.iter().copied().fold(0.0, f64::max));
            cert.conditional = Some(ConditionalSummary {
                chains: cond.len(),
                mean_acceptance: stats::mean(
                    &cond.iter().map(|c| c.acceptance_rate).collect::<Vec<_>>(),
                ),
                min_ess: cond
                    .iter()
                    .map(|c| c.ess_estimate)
                    .fold(f64::INFINITY, f64::min),
                support_rejections: cond.iter().map(|c| c.support_rejections).sum(),
            });
            out.draws
                .iter()
                .map(|d| net.forward(&d.w, &probe))
                .collect()
        }
        PriorSpec::Discrete { m } => {
            let grid = enumerate_grid(net.d, m, cfg.enumeration_limit)?;
            let exact = exact_discrete_posterior(&net, &grid, &data, n, beta, cfg.exec)?;
            let count = budgets.outer.retained() * budgets.draws_per_xi;
            let drawn = exact.draw(count, &mut stream_rng(cfg.seed, DRAW_STREAM))?;
            let atoms: Vec<WeightMatrix> = (0..drawn.len()).map(|i| drawn.atom(i)).collect();
            let lines: Vec<DrawLine> = atoms
                .iter()
                .map(|w| DrawLine { xi_index: None, w })
                .collect();
            outputs.write_jsonl("draws.jsonl", &lines)?;
            cert.method = "exact_grid";
            atoms.iter().map(|w| net.forward(w, &probe)).collect()
        }
    };
    cert.draws = outputs_at_probe.len();
    cert.posterior_mean_at_probe = stats::mean(&outputs_at_probe);

    if cfg.sampler.quadrature_check {
        let reference = match cfg.prior {
            PriorSpec::Continuous => reference_posterior_quadrature(
                &net,
                &data,
                n,
                beta,
                cfg.sampler.quadrature_resolution,
            )?
            .mean_output(&net, &probe),
            PriorSpec::Discrete { m } => {
                let grid = enumerate_grid(net.d, m, cfg.enumeration_limit)?;
                posterior_mean(
                    &exact_discrete_posterior(&net, &grid, &data, n, beta, cfg.exec)?,
                    &net,
                    &probe,
                )?
            }
        };
        let est = cert.posterior_mean_at_probe;
        let rel = ((est - reference) / reference).abs();
        cert.quadrature = Some(QuadratureComparison {
            probe: probe.clone(),
            reference,
            estimate: est,
            relative_error: rel,
            tolerance: cfg.sampler.quadrature_tolerance,
            pass: rel <= cfg.sampler.quadrature_tolerance,
        });
    }
    outputs.write_json("certificate.json", &cert)?;
    outputs.finish()?;
    if let Some(q) = cert.quadrature.as_ref().filter(|q| !q.pass) {
        return Err(CliError::Oracle(format!(
            "posterior mean {} vs reference {} (relative error {:.4} > {})",
            q.estimate, q.reference, q.relative_error, q.tolerance
        )));
    }
    Ok(cert)
}
