//! Weakly supervised indoor localization by spectral manifold matching.
#![cfg_attr(test, allow(clippy::needless_range_loop))]

pub mod calibration;
pub mod datasets;
pub mod error;
pub mod floorplan;
pub mod graphkernels;
pub mod metrics;
pub mod pipeline;
pub mod spectral;
pub mod synth;

pub use calibration::{
    calibrate, localize_1nn, matching_loss, solve_calibration, CalibrationModel, SharedAnchors,
};
pub use datasets::{
    ingest_rssi_dataset, load_corpus, IngestOptions, Manifest, Schema, SignalCorpus, SignalRecord,
};
pub use error::{Error, ErrorKind, Result};
pub use floorplan::{AreaSample, FloorPlan, Point};
pub use graphkernels::{FeatureMatrix, KernelSpec, SignalSet, Signals, WeightedGraph};
pub use metrics::{error_stats, ErrorStats};
pub use pipeline::{
    baseline_1nn, run_pipeline, AnchorMode, AreaMetric, PipelineConfig, PipelineResult, Stage,
    StageError,
};
pub use spectral::{embed, normalized_laplacian, Embedding, Laplacian};
pub use synth::{
    build_signal_sets, generate_geodesic, generate_radial, median_signal, SynthData, SynthScenario,
};
