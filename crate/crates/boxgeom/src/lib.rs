//! Geometry and preprocessing toolkit for fine-grained vehicle recognition
//! in traffic surveillance.
//!
//! The toolkit covers the full pipeline around the (external) CNN training
//! step: projected 3D bounding boxes and their viewpoint encodings, image
//! normalization by unpacking the visible box faces into a plane, rasterized
//! box masks, training-time augmentation, single-image box estimation from
//! contour probability maps and vanishing-point directions, dataset
//! validation and camera-disjoint splits, and the evaluation protocols
//! (track-merged accuracy, verification PR/AP, viewpoint-gap analysis).

pub mod augment;
pub mod box3d;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod geom;
pub mod io;
pub mod rast;
pub mod synthetic;
pub mod unpack;

pub use error::{Error, Result};
