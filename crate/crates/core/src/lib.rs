//! Content-adaptive segmentation into segments of bounded self-information.
//!
//! An image or volume is converted to CIELAB features, then partitioned into
//! connected segments ("adaptels") that are each grown greedily until adding
//! another pixel would push their information content past a threshold `T`
//! in bits. Flat regions end up as large segments, textured ones as many
//! small ones.
//!
//! ```
//! use adaptel::{build_feature_grid, segment, SegmentationConfig};
//! use image::{Rgb, RgbImage};
//!
//! let img = RgbImage::from_pixel(32, 32, Rgb([40, 80, 120]));
//! let grid = build_feature_grid(&[img]).unwrap();
//! let result = segment(&grid, &SegmentationConfig::default()).unwrap();
//! assert_eq!(result.k, 1);
//! ```

pub mod cli;
pub mod error;
pub mod features;
pub mod grower;
pub mod infomodel;
pub mod io;
pub mod metrics;
pub mod segmenter;

pub use error::{AdaptelError, Result};
pub use features::{
    build_feature_grid, neighbors, srgb_to_lab, FeatureGrid, GridShape, PixelIndex,
};
pub use grower::{grow_adaptel, CandidateQueue, GrowOutcome, Grower, InfoMap};
pub use infomodel::{AdaptelState, DoubleExponential, InfoModel};
pub use metrics::{BoundaryMap, MetricsReport};
pub use segmenter::{
    enforce_connectivity, segment, segment_volume, LabelMap, SegmentationConfig, SegmentationResult,
};
