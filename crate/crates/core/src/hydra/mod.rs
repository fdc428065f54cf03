//! HYDRA: patients separated from controls by a convex polytope of linear
//! max-margin faces; each face defines one subtype.

mod consensus;
mod dpp;
mod fit;
mod polytope;
mod svm;

pub use consensus::{co_assignment, consensus_aggregate};
pub use dpp::{dpp_select, rbf_kernel};
pub use fit::{
    fit_hydra, fit_hydra_within, HydraConfig, HydraFit, HydraReport, InitTrace, ReseedEvent,
};
pub use polytope::{polytope_assign, Polytope};
pub use svm::{train_hyperplane, Hyperplane, SvmFit};
