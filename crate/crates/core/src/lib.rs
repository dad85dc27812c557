//! Onboard coastal water-quality monitoring.
//!
//! A fully-connected regressor maps 10x10-window band means to turbidity or pH;
//! its weights are transferred into a fully-convolutional network that turns a
//! 256x256x7 reflectance patch into a 25x25 map in one pass. Maps are
//! thresholded, mosaicked over the scene, and summarized as compact alerts.

pub mod alerting;
pub mod dataset;
pub mod error;
pub mod parameter;
pub mod pat1;
pub mod quantbench;
pub mod raster;
pub mod regressor;
pub mod sensor_sim;
pub mod transfer;

pub use error::{Error, Result};
pub use parameter::Parameter;
pub use raster::{BandStack, GeoRef, Patch, TileIndex};
