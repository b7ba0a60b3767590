//! OTFS link-level simulation over delay-overspread channels.

pub mod channel;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod ops;
pub mod qam;
pub mod training;
pub mod zak;

pub use error::{OtfsError, Result};
pub use geometry::FrameGeometry;
pub use zak::{dzt, idzt, DDGrid, TimeSignal, ZakTransform, C64};
