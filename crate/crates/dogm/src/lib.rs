//! Dynamic occupancy grid mapping with evidential multi-sensor fusion.
//!
//! The engine fuses simulated radar or lidar detections into per-sensor
//! evidential grids, tracks a velocity distribution in every cell with a
//! particle filter, derives an accumulated evidential map whose cells
//! carry five belief masses plus two velocity moments, extracts
//! dynamic-object clusters, and evaluates radar against lidar pipelines
//! with region velocity, consistency, and classification metrics.
//!
//! Start with the runnable examples (`cargo run --release --example
//! braking_comparison`) or the `run` subcommand of the `dogm` binary; the
//! README documents the scenario and artifact formats.
//!
//! Module map:
//! - [`grid`]: grid geometry, evidence masses, particles, poses
//! - [`scenario`] / [`library`]: scenario descriptions and built-ins
//! - [`sensor`]: synthetic detections, ground truth, ghost injection
//! - [`measurement`]: inverse sensor models, Dempster fusion
//! - [`tracker`]: the per-cell particle filter
//! - [`evidential`]: instantaneous map, suppression, temporal combination
//! - [`cluster`]: dynamic-cell extraction and grouping
//! - [`eval`]: region velocity, NEES, ROC, error summaries
//! - [`snapshot`] / [`render`]: binary artifacts and PPM images
//! - [`pipeline`]: the frame loop and run driver

pub mod cluster;
pub mod error;
pub mod eval;
pub mod evidential;
pub mod grid;
pub mod library;
pub mod measurement;
pub mod params;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod scenario;
pub mod sensor;
pub mod snapshot;
pub mod tracker;

#[doc(hidden)]
pub mod test_util;

pub use cluster::{cluster_cells, filter_dynamic_cells, ObjectCluster};
pub use error::{ConfigError, GridError, PipelineError, SnapshotError, TotalConflict};
pub use eval::{nees, region_combined_variance, region_mean_velocity, roc_curve, velocity_mse};
pub use evidential::{
    classify_particles, combine_maps, derive_instant_map, estimate_moments, suppress_unclassified,
};
pub use grid::{
    world_to_cell, CellIdx, CellMixture, DogmCell, EvidenceMass, Grid, GridSpec, Particle,
    ParticleClass, Pose, Vec2, VelocityMoments,
};
pub use measurement::{dempster_combine, fuse_sensor_grids, inverse_sensor_model, MeasurementGrid};
pub use params::Params;
pub use pipeline::{run_pipeline, ArtifactPolicy, Mode, PipelineRun, RunConfigFile, RunSettings};
pub use scenario::{Scenario, SensorModality, SensorRig};
pub use sensor::{compute_b_rsp, inject_ghosts, simulate_frame, FrameTruth};
pub use tracker::{decay_fn, TrackerState};
