//! GIG, generalized hyperbolic and skew-t laws.

mod closure;
mod gh;
mod gig;
mod sampling;

pub use closure::Closure;
pub use gh::{
    gh_full_log_density, gh_log_density_core, ghd_log_density, ghd_mean_cov, st_log_density, GhFullParams, GhdParams,
    Mahalanobis, StParams, SKEW_NULL,
};
pub use gig::{
    gig_expect_log, gig_expect_log_with, gig_expectations, gig_log_pdf, gig_moment, GigBrowneParams, GigParams,
};
pub use sampling::{sample_gaussian, sample_ghd, sample_gig, sample_st};
pub(crate) use gh::{gh_log_density_cached, gh_log_norm};
pub(crate) use gig::gig_expectations_log_k;
