//! Numerical kernels for thermal face synthesis and landmarking objectives.
//!
//! The crate is `no_std` and only needs an allocator. It provides:
//!
//! * unit-interval thermal images, segmentation masks and the preprocessing
//!   stack used to feed thermal frames to RGB landmarkers ([`image`], [`preprocess`]);
//! * exact and entropic Wasserstein-2 transport between empirical measures
//!   ([`ot`]);
//! * the multiscale patch transport loss, the region temperature regularizer
//!   and the composite thermalization objective, all with pixel gradients
//!   ([`patch`], [`region`], [`composite`]);
//! * the Gaussian negative log-likelihood landmark loss and sliding-window
//!   pooling ([`nll`], [`window`]);
//! * the landmark convention adapter MLP ([`adapter`]) and benchmark metrics
//!   ([`metrics`]).
//!
//! File formats and the command-line interface live in the `thermoloss` crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod adapter;
pub mod composite;
mod error;
pub mod flat;
pub mod gradcheck;
pub mod image;
pub mod landmarks;
pub(crate) mod math;
pub mod metrics;
pub mod nll;
pub mod ot;
pub mod patch;
pub mod preprocess;
pub mod region;
pub mod rng;
pub mod window;

pub use error::{Error, Result};
pub use image::{Grid, SegmentationMask, ThermalImage};
pub use landmarks::LandmarkSet;
