//! Fully-connected contaminant regressor: batched forward and backward passes,
//! RMSE loss, Adam training, finite-difference checks and the MDL1 model file.

mod gradcheck;
mod model;
mod network;
mod params;
mod real;
mod train;

pub use gradcheck::{
    gradient_check, relative_error, CheckMode, GradCheckReport, FD_STEP, MAX_CHECK_PARAMS,
};
pub use model::{
    design_matrix, metrics, train_regressor, Architecture, EvalReport, Mdl1Manifest, Regressor,
    Split, TrainOutcome, MDL1_MAGIC,
};
pub use network::{
    backward, forward, predict, rmse_loss, update_running_stats, ForwardCache, Mode,
};
pub use params::{
    BatchNorm, Dense, MlpParams, TensorSpec, BN_EPS, BN_MOMENTUM, DROPOUT_P, DEFAULT_LAYER_DIMS,
};
pub use real::Real;
pub use train::{
    calibrate_output, eval_rmse, fit, recalibrate_batch_norm, refit_readout, Adam, AdamConfig,
    BnRecalibration, CalibrationReport, EarlyStopping, EpochStats, History, LrSchedule,
    OutputCalibration, TrainConfig, TrainData,
};
