//! Thresholding of contaminant maps into binary anomaly maps, scene mosaics and
//! compact downlink messages carrying only anomalous statistics.

mod map;
mod message;
mod policy;
mod scene;

pub use map::{threshold, window_cloud_fractions, AlertMap};
pub use message::{parse_alert, serialize_alert, AlertMessage, MAX_ID_LEN, MAX_MESSAGE_BYTES};
pub use policy::ThresholdPolicy;
pub use scene::{alert_maps, alerts_from_maps, mosaic_alerts, run_scene, SceneAlerts, ALERT_BANDS};
