//! Langevin samplers for the coupled posterior: a generic MALA kernel with dual-averaging
//! step adaptation, the reverse-conditional chain for `w | xi`, the nested chain for the
//! marginal of `xi`, the two-stage driver, and quadrature references.

mod mala;
mod nested;
mod output;
pub mod quadrature;

pub use mala::{
    mala_chain, simpson_log_ratio, trapezoid_log_ratio, ChainConfig, ChainDiagnostics, ChainOutput,
    Evaluation, FnTarget, SampleRecord, TargetDensity, TARGET_ACCEPTANCE,
};
pub use nested::{
    sample_marginal_xi, sample_reverse_conditional, two_stage_sample, MarginalXiOutput,
    NestedXiTarget, ReverseConditionalTarget, TaggedDraw, TwoStageBudgets, TwoStageOutput,
};
pub use output::{write_jsonl, JsonlRecord};
pub use quadrature::{reference_posterior_quadrature, CouplingQuadrature, QuadratureTable};
