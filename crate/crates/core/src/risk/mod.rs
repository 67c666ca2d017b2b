//! Regret and risk: per-step regret ledgers of the prefix posteriors, the telescoping Bayes
//! factor identity, the index of resolvability, closed-form bound calculators with their
//! optimal hyperparameters, the randomized grid approximation behind them, and hull
//! projections for the competitor.

mod bounds;
mod ledger;
mod projection;
mod witness;

pub use bounds::{
    bound_calculator, closed_form, formula_hyperparams, m2_exact_optimum, optimal_hyperparams,
    stationary_hyperparams, BoundBreakdown, BoundInputs, BoundKind, Optimum, ResidualTerms,
};
pub use ledger::{
    bayes_factor_telescope, log_regret_closed_form, regret_ledger, resolvability_bound,
    RegretLedger, RegretRecord, Telescope,
};
pub use projection::{
    neuron_dictionary, project_onto_hull, pythagorean_check, HullProjection, PythagoreanCheck,
    FW_GAP_TOL, FW_MAX_ITER,
};
pub use witness::{approximation_witness, HullCombination, WitnessReport};
