//! Power-law tail estimation for heavy-tailed earnings and attention data.
//!
//! * [`powerlaw`]: distribution primitives, sampling, empirical CCDF and KS distance.
//! * [`fit`]: maximum-likelihood exponents with KS-minimising threshold selection.
//! * [`gof`]: semiparametric bootstrap goodness of fit and the power-law proportion.
//! * [`tail_index`]: Hill, adjusted Hill and moments estimators with double-bootstrap `k`.
//! * [`growth`]: exploration/exploitation copying model and Barabási–Albert growth.
//! * [`earnings`]: creator-earnings ingestion, imputation, floor filter and summary tables.
//! * [`pipeline`]: the end-to-end earnings run writing tables, figures and a manifest.
//! * [`report`]: figure series, comparison tables and SVG rendering.

pub mod earnings;
pub mod error;
pub mod fit;
pub mod gof;
pub mod growth;
pub mod pipeline;
pub mod powerlaw;
pub mod report;
pub mod rng;
pub mod tail_index;
pub mod zeta;

pub use error::{Error, Result};
pub use fit::{select_xmin, FitOptions, TailFit};
pub use powerlaw::{Kind, PowerLawModel, Sample};
