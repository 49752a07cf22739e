//! Multi-state closed-population likelihood.
//!
//! Individuals move between `R` discrete states as a first-order Markov chain
//! and are detected with state- and occasion-dependent probabilities. The
//! likelihood is assembled from probabilities of partial histories: first
//! capture (`zeta`), next recapture (`O`), never seen again (`chi`), and never
//! seen at all (`rho`).

mod constraints;
mod likelihood;
mod params;
mod recursion;

pub use constraints::{apply_constraints, to_working, Meta, MsConstraints};
pub use likelihood::{log_likelihood, observed_log_likelihood};
pub(crate) use likelihood::population_term;
pub use params::MsParams;
pub use recursion::{
    chi_probs, first_capture_probs, never_observed_prob, q_marked, q_unmarked, recapture_probs,
    PartialHistoryProbs, TransitionArray,
};
