pub mod bounds;
pub mod regret;
pub mod sample;
pub mod synth;
pub mod verify;

use lcnn::nnmodel::{Dataset, NetworkConfig};
use lcnn::risk::{formula_hyperparams, BoundInputs, BoundKind};

use crate::config::{BetaSchedule, ExperimentConfig, PriorSpec};
use crate::dataio::TeacherRecord;
use crate::error::{config_err, Result};

/// Floor for `b` and `sigma`, which the calculators require to be positive.
const TINY: f64 = 1e-12;

/// Bound inputs for the realized data and competitor values `g`.
pub fn realized_inputs(
    cfg: &ExperimentConfig,
    net: &NetworkConfig,
    data: &Dataset,
    g: &[f64],
    noise_sd: f64,
    beta: f64,
) -> BoundInputs {
    let bd = net.activation.bounds();
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let m = match cfg.prior {
        PriorSpec::Discrete { m } => m as f64,
        PriorSpec::Continuous => 1.0,
    };
    BoundInputs {
        a0: bd.a0,
        a1: bd.a1,
        a2: bd.a2,
        v: net.v,
        b: max_abs(g).max(TINY),
        sigma: noise_sd.max(TINY),
        c_n: max_abs(data.ys()) + bd.a0 * net.v,
        d: net.d,
        n: data.len(),
        m,
        k: net.k as f64,
        beta,
        non_odd: !net.activation.is_odd(),
    }
}

/// Competitor values at the data points.
pub fn competitor_values(data: &Dataset, teacher: Option<&TeacherRecord>) -> Vec<f64> {
    (0..data.len())
        .map(|i| teacher.map_or(0.0, |t| t.eval(data.x(i))))
        .collect()
}

/// `beta` for the first `data.len()` observations under the configured schedule.
pub fn resolve_beta(
    cfg: &ExperimentConfig,
    net: &NetworkConfig,
    data: &Dataset,
    teacher: Option<&TeacherRecord>,
) -> Result<f64> {
    match cfg.beta {
        BetaSchedule::Fixed { value } => Ok(value),
        BetaSchedule::FourthRoot => {
            if data.is_empty() {
                return Err(config_err("the fourth-root schedule needs N >= 1"));
            }
            let g = competitor_values(data, teacher);
            let sd = teacher.map_or(0.0, |t| t.noise.sd());
            let mut p = realized_inputs(cfg, net, data, &g, sd, 1.0);
            // The explicit schedule is derived for odd activations; the rate is the same otherwise.
            p.non_odd = false;
            Ok(formula_hyperparams(BoundKind::SquareRegret, &p)?.0)
        }
    }
}
