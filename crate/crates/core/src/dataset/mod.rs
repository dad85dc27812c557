//! Training corpus construction: in-situ ingestion, spatio-temporal matching
//! against patches, splitting, standardization and the SMP1 sample store.

mod matching;
mod normalize;
mod records;
mod split;
mod store;
mod synthetic;

pub use matching::{
    grid_features, match_records, window_for_offset, CatalogPatch, MatchReport, Sample,
    DEFAULT_TOLERANCE_DAYS,
};
pub use normalize::{denormalize, normalize, NormStats, TargetTransform};
pub use records::{
    ingest_records, select_surface, write_records, InSituRecord, IngestReport, RowDiagnostic,
    MANDATORY_COLUMNS, OPTIONAL_COLUMNS,
};
pub use split::{split, SplitSpec, Splits};
pub use store::{Manifest, RecordRef, SampleStore};
pub use synthetic::{
    add_label_noise, patch_id, synthetic_records, window_samples, StationPlan,
    MAX_WINDOW_CLOUD_FRACTION,
};
