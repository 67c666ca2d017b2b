use serde::{Deserialize, Serialize};

use super::mala::{
    mala_chain, simpson_log_ratio, ChainConfig, ChainDiagnostics, ChainOutput, Evaluation,
    TargetDensity,
};
use crate::coupling::{
    constraint_max, coupling_quadratic, marginal_score, reverse_score, CouplingParams, Xi,
};
use crate::error::{domain_err, Error, Result};
use crate::nnmodel::{loss, Dataset, NetworkConfig, WeightMatrix};
use crate::par::{try_map_indices, Exec};
use crate::rng::mix;

/// `w | xi` with `Z(w)` dropped, supported on the product of l1 balls.
pub struct ReverseConditionalTarget<'a> {
    pub cfg: &'a NetworkConfig,
    pub data: &'a Dataset,
    pub params: &'a CouplingParams,
    pub xi: &'a Xi,
}

impl ReverseConditionalTarget<'_> {
    fn weights(&self, x: &[f64]) -> WeightMatrix {
        WeightMatrix::from_flat(self.cfg.k, self.cfg.d, x.to_vec())
            .expect("dimension checked by the chain")
    }
}

impl TargetDensity for ReverseConditionalTarget<'_> {
    fn dim(&self) -> usize {
        self.cfg.dim()
    }

    fn in_support(&self, x: &[f64]) -> bool {
        x.chunks(self.cfg.d)
            .all(|r| r.iter().map(|v| v.abs()).sum::<f64>() <= 1.0)
    }

    fn evaluate(&mut self, x: &[f64], _step: u64) -> Result<Evaluation> {
        let w = self.weights(x);
        let log_density = -self.params.beta * loss(self.cfg, &w, self.data, self.params.n)?
            + coupling_quadratic(&w, self.xi, self.data, self.params.rho);
        let score = reverse_score(self.cfg, &w, self.xi, self.data, self.params)?;
        Ok(Evaluation::exact(log_density, score))
    }
}

pub fn sample_reverse_conditional(
    cfg: &NetworkConfig,
    data: &Dataset,
    params: &CouplingParams,
    xi: &Xi,
    chain_cfg: &ChainConfig,
    init: Option<&WeightMatrix>,
) -> Result<(Vec<WeightMatrix>, ChainOutput)> {
    if constraint_max(xi, data) > params.b_threshold {
        return Err(domain_err("auxiliary matrix lies outside B"));
    }
    let start = init
        .cloned()
        .unwrap_or_else(|| WeightMatrix::zeros(cfg.k, cfg.d));
    let mut target = ReverseConditionalTarget {
        cfg,
        data,
        params,
        xi,
    };
    let out = mala_chain(&mut target, start.as_slice(), chain_cfg)?;
    let samples = out
        .samples()
        .map(|s| WeightMatrix::from_flat(cfg.k, cfg.d, s.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, out))
}

/// Marginal of `xi`, known only through scores estimated by inner `w | xi` chains.
///
/// Each evaluation runs a fresh inner chain warm-started at the previous inner state. The
/// Metropolis ratio is the Simpson line integral of the estimated scores at the two ends and
/// the midpoint of the move, so the outer chain is approximate.
pub struct NestedXiTarget<'a> {
    pub cfg: &'a NetworkConfig,
    pub data: &'a Dataset,
    pub params: &'a CouplingParams,
    pub inner: ChainConfig,
    warm: WeightMatrix,
    /// Largest score standard error of every evaluation, in order.
    pub score_se_log: Vec<f64>,
    /// Inner-chain diagnostics of every evaluation, in order.
    pub inner_log: Vec<ChainDiagnostics>,
}

impl<'a> NestedXiTarget<'a> {
    pub fn new(
        cfg: &'a NetworkConfig,
        data: &'a Dataset,
        params: &'a CouplingParams,
        inner: ChainConfig,
    ) -> Self {
        NestedXiTarget {
            cfg,
            data,
            params,
            inner,
            warm: WeightMatrix::zeros(cfg.k, cfg.d),
            score_se_log: Vec::new(),
            inner_log: Vec::new(),
        }
    }
}

impl TargetDensity for NestedXiTarget<'_> {
    fn dim(&self) -> usize {
        self.params.n * self.params.k
    }

    fn in_support(&self, x: &[f64]) -> bool {
        let xi = Xi::from_stacked(self.params.n, self.params.k, x.to_vec())
            .expect("dimension checked by the chain");
        constraint_max(&xi, self.data) <= self.params.b_threshold
    }

    fn evaluate(&mut self, x: &[f64], step: u64) -> Result<Evaluation> {
        self.estimate(x, mix(self.inner.chain_id, step), step)
    }

    fn log_ratio(
        &mut self,
        from: (&[f64], &Evaluation),
        to: (&[f64], &Evaluation),
        step: u64,
    ) -> Result<f64> {
        // B is convex, so the midpoint of two states in B is in B.
        let mid: Vec<f64> = from
            .0
            .iter()
            .zip(to.0)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let stream = mix(mix(self.inner.chain_id, step), MIDPOINT_STREAM);
        let em = self.estimate(&mid, stream, step)?;
        Ok(simpson_log_ratio(from, &em.score, to))
    }
}

/// Stream offset separating midpoint inner chains from endpoint ones.
const MIDPOINT_STREAM: u64 = 0x4D1D;

impl NestedXiTarget<'_> {
    fn estimate(&mut self, x: &[f64], chain_id: u64, step: u64) -> Result<Evaluation> {
        let xi = Xi::from_stacked(self.params.n, self.params.k, x.to_vec())?;
        let inner_cfg = ChainConfig {
            chain_id,
            ..self.inner.clone()
        };
        let (samples, out) = sample_reverse_conditional(
            self.cfg,
            self.data,
            self.params,
            &xi,
            &inner_cfg,
            Some(&self.warm),
        )
        .map_err(|e| Error::Sampler(format!("inner chain failed at outer step {step}: {e}")))?;
        self.warm = WeightMatrix::from_flat(self.cfg.k, self.cfg.d, out.last_state.clone())?;
        let ms = marginal_score(&xi, &samples, self.params, self.data)?;
        let se = ms.max_se();
        self.score_se_log.push(se);
        self.inner_log.push(out.diagnostics);
        Ok(Evaluation {
            log_density: None,
            score: ms.score,
            score_se: Some(se),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalXiOutput {
    pub chain: ChainOutput,
    pub score_se: Vec<f64>,
    pub inner: Vec<ChainDiagnostics>,
}

pub fn sample_marginal_xi(
    cfg: &NetworkConfig,
    data: &Dataset,
    params: &CouplingParams,
    outer_cfg: &ChainConfig,
    inner_cfg: &ChainConfig,
) -> Result<MarginalXiOutput> {
    inner_cfg.validate()?;
    let mut target = NestedXiTarget::new(cfg, data, params, inner_cfg.clone());
    let start = vec![0.0; params.n * params.k];
    let chain = mala_chain(&mut target, &start, outer_cfg)?;
    Ok(MarginalXiOutput {
        chain,
        score_se: target.score_se_log,
        inner: target.inner_log,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStageBudgets {
    pub outer: ChainConfig,
    pub inner: ChainConfig,
    /// Chain run from each retained `xi` to draw `w`.
    pub conditional: ChainConfig,
    /// Number of final retained states of each conditional chain to keep.
    pub draws_per_xi: usize,
}

impl Default for TwoStageBudgets {
    fn default() -> Self {
        TwoStageBudgets {
            outer: ChainConfig {
                step_size: 0.05,
                iterations: 3000,
                burn_in: 500,
                thinning: 5,
                seed: 0,
                adapt_step: true,
                chain_id: 1,
            },
            inner: ChainConfig {
                step_size: 0.05,
                iterations: 600,
                burn_in: 100,
                thinning: 1,
                seed: 0,
                adapt_step: true,
                chain_id: 2,
            },
            conditional: ChainConfig {
                step_size: 0.05,
                iterations: 400,
                burn_in: 200,
                thinning: 50,
                seed: 0,
                adapt_step: true,
                chain_id: 3,
            },
            draws_per_xi: 4,
        }
    }
}

impl TwoStageBudgets {
    /// Same budgets with every chain keyed by `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.outer.seed = seed;
        self.inner.seed = seed;
        self.conditional.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedDraw {
    /// Index of the retained `xi` that generated this draw.
    pub xi_index: usize,
    pub w: WeightMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOutput {
    pub xi: MarginalXiOutput,
    pub draws: Vec<TaggedDraw>,
    pub conditional: Vec<ChainDiagnostics>,
}

/// Draw `xi` from its marginal, then `w | xi` for every retained `xi`.
pub fn two_stage_sample(
    cfg: &NetworkConfig,
    data: &Dataset,
    params: &CouplingParams,
    budgets: &TwoStageBudgets,
    exec: Exec,
) -> Result<TwoStageOutput> {
    if budgets.draws_per_xi == 0 || budgets.draws_per_xi > budgets.conditional.retained() {
        return Err(crate::error::config_err(
            "draws_per_xi must be between 1 and the retained conditional draws",
        ));
    }
    let xi_out = sample_marginal_xi(cfg, data, params, &budgets.outer, &budgets.inner)?;
    let xis: Vec<Xi> = xi_out
        .chain
        .samples()
        .map(|s| Xi::from_stacked(params.n, params.k, s.to_vec()))
        .collect::<Result<_>>()?;
    let per_xi = try_map_indices(exec, xis.len(), |j| {
        let chain_cfg = ChainConfig {
            chain_id: mix(budgets.conditional.chain_id, j as u64),
            ..budgets.conditional.clone()
        };
        let (samples, out) =
            sample_reverse_conditional(cfg, data, params, &xis[j], &chain_cfg, None)?;
        let keep = samples[samples.len() - budgets.draws_per_xi..].to_vec();
        Ok::<_, Error>((keep, out.diagnostics))
    })?;
    let mut draws = Vec::with_capacity(xis.len() * budgets.draws_per_xi);
    let mut conditional = Vec::with_capacity(xis.len());
    for (j, (keep, diag)) in per_xi.into_iter().enumerate() {
        draws.extend(keep.into_iter().map(|w| TaggedDraw { xi_index: j, w }));
        conditional.push(diag);
    }
    Ok(TwoStageOutput {
        xi: xi_out,
        draws,
        conditional,
    })
}
