//! The vibration anomaly pipeline: frequency-domain feature extraction,
//! one-class detection on the temporal factor, k-NN localization on the
//! location factor, severity from decision values, and the bootstrap
//! evaluation protocol.

pub mod features;
pub mod io;
pub mod localize;
pub mod metrics;
pub mod ocsvm;
pub mod pipeline;

pub use features::{extract_features, EventMatrix, FeatureTensor};
pub use io::{load_events, save_events, LoadedEvents};
pub use localize::localization_scores;
pub use metrics::f_score;
pub use ocsvm::{ocsvm_decision, ocsvm_train, OcsvmModel};
pub use pipeline::{
    evaluate_pipeline, event_location_rows, event_slice, project_event, EventScore,
    LocalizationRow, PipelineConfig, PipelineReport, TrialReport, HEALTHY_LABEL,
};
