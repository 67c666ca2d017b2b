use std::fmt::Write as _;
use std::path::Path;

use lcnn::risk::{
    bound_calculator, closed_form, optimal_hyperparams, BoundBreakdown, BoundInputs, BoundKind,
    ResidualTerms,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{config_err, Result};
use crate::output::Outputs;

/// Contents of the `--inputs` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub inputs: BoundInputs,
    #[serde(default)]
    pub residuals: ResidualTerms,
}

impl BoundsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let f: BoundsFile = serde_json::from_str(&text)?;
        f.inputs.validate()?;
        Ok(f)
    }
}

/// Which hyperparameters a row was evaluated at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Input,
    Optimal,
    OptimalRounded,
    /// The closed form at the optimal hyperparameters; only `total` is filled.
    ClosedForm,
    /// The input row with `N` doubled; the prior-mass term must shrink.
    NDoubled,
    /// The input row with `K` doubled; the width term must shrink.
    KDoubled,
    /// The input row with `M` doubled; the grid term must shrink.
    MDoubled,
}

impl Setting {
    fn name(self) -> &'static str {
        match self {
            Setting::Input => "input",
            Setting::Optimal => "optimal",
            Setting::OptimalRounded => "optimal_rounded",
            Setting::ClosedForm => "closed_form",
            Setting::NDoubled => "n_doubled",
            Setting::KDoubled => "k_doubled",
            Setting::MDoubled => "m_doubled",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub kind: BoundKind,
    pub setting: Setting,
    pub n: usize,
    pub beta: f64,
    pub k: f64,
    pub m: f64,
    pub prior_mass: f64,
    pub width: f64,
    pub grid: f64,
    pub beta_quadratic: f64,
    pub residual: f64,
    pub total: f64,
    pub warnings: Vec<String>,
}

impl BoundRow {
    fn from_breakdown(setting: Setting, p: &BoundInputs, b: BoundBreakdown) -> Self {
        BoundRow {
            kind: b.kind,
            setting,
            n: p.n,
            beta: p.beta,
            k: p.k,
            m: p.m,
            prior_mass: b.prior_mass,
            width: b.width,
            grid: b.grid,
            beta_quadratic: b.beta_quadratic,
            residual: b.residual,
            total: b.total,
            warnings: b.warnings,
        }
    }
}

/// Every bound kind at the input, optimal and rounded-optimal hyperparameters, with the closed
/// form where one exists and the three monotonicity spot rows.
pub fn table(file: &BoundsFile) -> Result<Vec<BoundRow>> {
    let p = &file.inputs;
    let res = &file.residuals;
    let mut rows = Vec::new();
    for kind in BoundKind::ALL {
        let eval = |q: &BoundInputs, s: Setting| -> Result<BoundRow> {
            Ok(BoundRow::from_breakdown(
                s,
                q,
                bound_calculator(kind, q, res)?,
            ))
        };
        rows.push(eval(p, Setting::Input)?);
        let opt = optimal_hyperparams(kind, p, res)?;
        let at_opt = p.with_hyper(opt.beta, opt.k, opt.m);
        rows.push(eval(&at_opt, Setting::Optimal)?);
        rows.push(eval(
            &p.with_hyper(opt.beta, opt.k_rounded as f64, opt.m_rounded as f64),
            Setting::OptimalRounded,
        )?);
        if !p.non_odd {
            if let Some(total) = closed_form(kind, p, res)? {
                let mut row = BoundRow::from_breakdown(
                    Setting::ClosedForm,
                    &at_opt,
                    bound_calculator(kind, &at_opt, res)?,
                );
                row.prior_mass = f64::NAN;
                row.width = f64::NAN;
                row.grid = f64::NAN;
                row.beta_quadratic = f64::NAN;
                row.residual = f64::NAN;
                row.total = total;
                rows.push(row);
            }
        }
        // The regret kinds take one residual per observation, so doubling N needs them doubled.
        let doubled_res = ResidualTerms {
            eps: res
                .eps
                .as_ref()
                .map(|e| [e.as_slice(), e.as_slice()].concat()),
            eps_tilde: res
                .eps_tilde
                .as_ref()
                .map(|e| [e.as_slice(), e.as_slice()].concat()),
            projection_gap: res.projection_gap,
        };
        let q = BoundInputs { n: 2 * p.n, ..*p };
        rows.push(BoundRow::from_breakdown(
            Setting::NDoubled,
            &q,
            bound_calculator(kind, &q, &doubled_res)?,
        ));
        rows.push(eval(
            &BoundInputs { k: 2.0 * p.k, ..*p },
            Setting::KDoubled,
        )?);
        rows.push(eval(
            &BoundInputs { m: 2.0 * p.m, ..*p },
            Setting::MDoubled,
        )?);
    }
    Ok(rows)
}

pub fn run(cfg: &ExperimentConfig, inputs: &Path) -> Result<(Vec<BoundRow>, String)> {
    let file = BoundsFile::load(inputs)?;
    let rows = table(&file)?;
    let mut outputs = Outputs::create(cfg, "bounds")?;
    outputs.write_with("bounds.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "kind",
            "setting",
            "n",
            "beta",
            "k",
            "m",
            "prior_mass",
            "width",
            "grid",
            "beta_quadratic",
            "residual",
            "total",
            "warnings",
        ])?;
        for r in &rows {
            let mut rec = vec![
                r.kind.name().to_string(),
                r.setting.name().to_string(),
                r.n.to_string(),
            ];
            rec.extend(
                [
                    r.beta,
                    r.k,
                    r.m,
                    r.prior_mass,
                    r.width,
                    r.grid,
                    r.beta_quadratic,
                    r.residual,
                    r.total,
                ]
                .iter()
                .map(f64::to_string),
            );
            rec.push(r.warnings.join("; "));
            c.write_record(&rec)?;
        }
        c.flush()?;
        Ok(())
    })?;
    outputs.write_json("bounds.json", &rows)?;
    outputs.finish()?;
    Ok((rows.clone(), render(&rows)))
}

/// Fixed-width table for the terminal.
pub fn render(rows: &[BoundRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<16} {:>10} {:>10} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "kind", "setting", "beta", "K", "M", "prior_mass", "width", "grid", "residual", "total"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14} {:<16} {:>10.4e} {:>10.4} {:>10.4} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.6e}",
            r.kind.name(),
            r.setting.name(),
            r.beta,
            r.k,
            r.m,
            r.prior_mass,
            r.width,
            r.grid,
            r.residual,
            r.total
        );
        for w in &r.warnings {
            let _ = writeln!(s, "    warning: {w}");
        }
    }
    s
}
