//! Median-of-means (MOM) risk minimization for robust binary classification.
//!
//! The crate estimates risks with the median of block means instead of the
//! empirical mean, and minimizes them with descent algorithms that step along
//! the gradient of the median block only:
//!
//! - [`mom`]: MOM estimates and median-block selection.
//! - [`losses`]: 0-1, hinge and logistic losses.
//! - [`model`]: linear and kernel classifiers.
//! - [`optim`]: MOM gradient descent, the ERM baseline and Fast KLR MOM.
//! - [`outlier`]: selection-count depth and outlier flagging.
//! - [`bench`]: seeded experiment drivers.
//!
//! ```
//! use mom_core::data::generate_toy;
//! use mom_core::losses::LossKind;
//! use mom_core::model::LinearModel;
//! use mom_core::optim::{mom_gd_train, MomGdConfig};
//! use mom_core::rng::RngSeed;
//!
//! let ds = generate_toy(200, 5, RngSeed(1)).unwrap();
//! let cfg = MomGdConfig::new(21, 300, LossKind::Logistic, RngSeed(2));
//! let (model, _trace) = mom_gd_train(ds.view(), &LinearModel::zeros(2), &cfg).unwrap();
//! assert!(model.weights[0] < 0.0);
//! ```

pub mod bench;
pub mod data;
pub mod error;
pub mod losses;
pub mod model;
pub mod mom;
pub mod optim;
pub mod outlier;
pub mod rng;

pub use error::{MomError, Result};
