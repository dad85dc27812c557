//! Weight transfer from the fully-connected regressor to a fully-convolutional
//! network that maps a whole 256x256x7 patch to a 25x25 contaminant map.

mod cnn1;
mod convnet;
mod fold;
mod map;
mod verify;

pub use cnn1::{Cnn1Manifest, LayerSpec, CNN1_MAGIC, FOLDING_ALGEBRA};
pub use convnet::{infer_patches, Averaging, Conv1x1, ConvNet, NetDtype, AVERAGING_WEIGHT};
pub use fold::{fc_to_cnn, fold_batch_norm, fold_input_normalization};
pub use map::ContaminantMap;
pub use verify::{fc_reference_map, verify_equivalence, Deviation, EquivalenceReport};
