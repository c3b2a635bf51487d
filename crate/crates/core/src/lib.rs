//! Conditional optimal transport toolkit: exact and entropic transport between
//! discrete measures, Wasserstein geodesics and barycenters, distances between
//! conditional distributions, and an affine geodesic generator that
//! interpolates conditional distributions across labels.

pub mod conditional;
pub mod error;
pub mod generator;
pub mod geodesic;
pub mod linalg;
pub mod measures;
pub mod ot;
pub mod runner;

pub use error::{Error, Result};
pub use measures::{
    conditional_family_from_labeled, empirical_from_samples, measure_from_csv_path, measure_from_csv_reader,
    measure_to_csv, validate_discrete, ConditionalFamily, DiscreteMeasure, GaussianMeasure, LabeledDataset,
};
