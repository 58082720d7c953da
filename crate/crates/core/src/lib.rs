//! Variable selection for linear regression: the lasso path proposes
//! candidate subsets and a model-selection criterion (the loss rank, BIC,
//! GCV or BIC-tilde) picks one of them.

pub mod criteria;
pub mod datasets;
pub mod error;
pub mod lasso_path;
pub mod linreg;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod selector;
pub mod simbench;

pub use criteria::{Criterion, CriterionInput, CriterionScore};
pub use error::{Error, Result};
pub use lasso_path::{candidate_subsets, compute_lars_path, CandidateModel, LassoPath, PathSegment};
pub use linreg::{ols_fit, standardize, Dataset, OlsFit, StandardizedDataset};
pub use selector::{classify_fit, select, select_with, FitClass, SelectOptions, SelectionReport};
pub use simbench::{run_replication, run_study, sample_ar1_design, MonteCarloTally, SimDesign};
