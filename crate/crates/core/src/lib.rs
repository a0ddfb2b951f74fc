//! Issue-report classification toolkit: text features, a linear
//! bag-of-features classifier, dataset tooling, evaluation protocols and
//! confounding-factor treatments.

pub mod classifier;
pub mod confounds;
pub mod dataset;
pub mod evaluation;
pub mod rng;
pub mod synthetic;
pub mod text;
