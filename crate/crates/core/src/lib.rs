//! Global polynomial NARX identification by fusing local linear models.
//!
//! Free-run simulations of several local ARX models, each valid around one
//! operating point, are stacked into a single regression over a dictionary of
//! polynomial monomials of lagged inputs and outputs. Elastic-net coordinate
//! descent with cross-validated regularization picks a sparse support, and an
//! ordinary least-squares refit on that support yields the final model.
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the command
//! line live in the `narx-fusion` crate.
#![no_std]

extern crate alloc;

pub mod error;
pub mod fusion;
pub mod lifting;
pub mod linalg;
pub mod local_ident;
pub mod plants;
pub mod signal;
pub mod sparse;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ArxModel, FeatureDescriptor, FusionConfig, LambdaGrid, OperatingPoint, PNarxModel, Term,
    TimeSeries, ValidationMode, Variable,
};
