//! Domain types and the exact marginal likelihood.

mod data;
mod likelihood;
mod params;
mod spec;
mod stats;

pub use data::{Dataset, Individual, Site, Truth};
pub use likelihood::{
    class_membership_logprobs, class_membership_probs, group_loglik, response_loglik,
    total_loglik,
};
pub use params::{ParamBlock, ParamLabel, Parameters};
pub use spec::ModelSpec;
pub use stats::{count_free_parameters, information_criteria, relative_entropy, FitStats};
