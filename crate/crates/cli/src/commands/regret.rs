use lcnn::estimators::sequential_posteriors;
use lcnn::priors::enumerate_grid;
use lcnn::risk::{bound_calculator, regret_ledger, BoundKind, RegretLedger, ResidualTerms};
use serde::Serialize;

use super::{competitor_values, realized_inputs, resolve_beta};
use crate::config::{Competitor, ExperimentConfig, PriorSpec, Target};
use crate::dataio::{load_data, TeacherRecord};
use crate::error::{config_err, CliError, Result};
use crate::output::Outputs;

/// One row of the realized-versus-bound table.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub beta: f64,
    pub avg_square: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegretSummary {
    pub config_hash: String,
    pub n: usize,
    pub beta: Option<f64>,
    /// Whether the competitor is known to lie in the model's hull, so that every row must hold.
    pub hull_competitor: bool,
    pub rows: Vec<BoundRow>,
    pub ledger: Option<RegretLedger>,
}

/// `1, 2, 4, ...` below `n`, then `n` itself.
fn dyadic_points(n: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = std::iter::successors(Some(1usize), |p| p.checked_mul(2))
        .take_while(|&p| p < n)
        .collect();
    if n > 0 {
        pts.push(n);
    }
    pts
}

/// Exact prefix posteriors on the grid prior, the per-step regret ledger at the full sample
/// size, and the average squared regret against its bound at dyadic prefix sizes (with
/// `beta` re-resolved at each size).
pub fn run(cfg: &ExperimentConfig) -> Result<RegretSummary> {
    let PriorSpec::Discrete { m } = cfg.prior else {
        return Err(config_err(
            "the regret ledger needs a discrete prior (prior.kind = discrete)",
        ));
    };
    let net = cfg.network.build()?;
    let (data, teacher) = load_data(cfg, &net)?;
    let teacher = match cfg.competitor {
        Competitor::Teacher => teacher,
        Competitor::Zero => None,
    };
    let hull_competitor = teacher.as_ref().is_none_or(|t| realizable(t, &net));
    let grid = enumerate_grid(net.d, m, cfg.enumeration_limit)?;
    let mut outputs = Outputs::create(cfg, "regret")?;
    let mut summary = RegretSummary {
        config_hash: outputs.hash().to_string(),
        n: data.len(),
        beta: None,
        hull_competitor,
        rows: Vec::new(),
        ledger: None,
    };

    for n in dyadic_points(data.len()) {
        let prefix = data.prefix(n);
        let beta = resolve_beta(cfg, &net, &prefix, teacher.as_ref())?;
        let g = competitor_values(&prefix, teacher.as_ref());
        let snaps = sequential_posteriors(&net, &grid, &prefix, beta, cfg.exec)?;
        let ledger = regret_ledger(&snaps, &net, &prefix, &g, beta)?;
        let eps = (0..n).map(|i| prefix.y(i) - g[i]).collect();
        let sd = teacher.as_ref().map_or(0.0, |t| t.noise.sd());
        let inputs = realized_inputs(cfg, &net, &prefix, &g, sd, beta);
        let res = ResidualTerms {
            eps: Some(eps),
            ..Default::default()
        };
        let bound = bound_calculator(BoundKind::SquareRegret, &inputs, &res)?.total;
        summary.rows.push(BoundRow {
            n,
            beta,
            avg_square: ledger.avg_square,
            bound,
            holds: ledger.avg_square <= bound,
        });
        if n == data.len() {
            summary.beta = Some(beta);
            summary.ledger = Some(ledger);
        }
    }

    match &summary.ledger {
        Some(l) => outputs.write_with("ledger.csv", |w| Ok(l.write_csv(w)?))?,
        None => outputs.write_bytes(
            "ledger.csv",
            b"n,r_square,r_rand,r_log,lambda,avg_square,avg_rand,avg_log,avg_lambda_sq\n",
        )?,
    };
    outputs.write_with("regret_vs_bound.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["n", "beta", "avg_square", "bound", "holds"])?;
        for r in &summary.rows {
            c.write_record([
                r.n.to_string(),
                r.beta.to_string(),
                r.avg_square.to_string(),
                r.bound.to_string(),
                r.holds.to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    outputs.finish()?;

    if hull_competitor {
        if let Some(r) = summary.rows.iter().find(|r| !r.holds) {
            return Err(CliError::Oracle(format!(
                "average squared regret {} exceeds its bound {} at N = {}",
                r.avg_square, r.bound, r.n
            )));
        }
    }
    Ok(summary)
}

/// A teacher network with the model's activation and at most its `V` lies in the hull.
fn realizable(t: &TeacherRecord, net: &lcnn::nnmodel::NetworkConfig) -> bool {
    match (&t.target, &t.network) {
        (Target::Teacher, Some(tn)) => {
            tn.activation == net.activation && tn.v <= net.v && tn.d == net.d
        }
        _ => false,
    }
}
