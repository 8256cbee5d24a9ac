//! Elastic-net feature selection with cross-validated regularization and
//! least-squares re-identification on the selected support.

mod cd;
mod cv;
mod path;
mod select;
mod standardize;

pub use cd::{
    coordinate_descent, coordinate_descent_gram, kkt_violation, objective, soft_threshold, CdOptions,
    ElasticNetFit, GramSystem,
};
pub use cv::{contiguous_folds, cross_validate, CvReport, FoldSlice};
pub use path::{lambda_max, lambda_path};
pub use select::{refit_ols, select_features, Refit};
pub use standardize::{standardize, ColumnRole, Standardization};
