//! The frame pipeline and the run driver behind the CLI.
//!
//! One frame runs: simulate → per-sensor inverse models → fusion →
//! predict → births → particle weighting → mixture weighting → resample →
//! classification → instantaneous map → unclassified suppression →
//! temporal combination → moments → clustering → metrics. Frames are
//! strictly sequential; within a frame, per-sensor measurement grids are
//! built in parallel on the configured thread pool. Every random draw is
//! keyed, so thread count never changes any output byte.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::cluster::{cluster_cells, filter_dynamic_cells, ObjectCluster, CLUSTERS_CSV_HEADER};
use crate::error::{ConfigError, PipelineError};
use crate::eval::{
    collect_roc_samples, default_roc_thresholds, nees, region_combined_variance,
    region_mean_velocity, roc_auc, roc_curve, velocity_mse, write_metrics_csv_row, write_roc_csv,
    FrameMetrics, RocSample, VelocityError, METRICS_CSV_HEADER,
};
use crate::evidential::{
    assemble_dogm, classify_particles, combine_maps, derive_instant_map, estimate_moments,
    max_mass_sum_deviation, suppress_unclassified,
};
use crate::grid::{DogmCell, EvidenceMass, Grid, GridSpec};
use crate::measurement::{fuse_sensor_grids, inverse_sensor_model, MeasurementGrid, SensorReturns};
use crate::params::Params;
use crate::render::render_dogm_ppm;
use crate::rng::{stream, GHOST_STAGE};
use crate::scenario::{Scenario, SensorModality};
use crate::sensor::{
    inject_ghosts, simulate_frame, write_detections_csv, FrameTruth, DETECTIONS_CSV_HEADER,
};
use crate::snapshot::write_dogm_snapshot;
use crate::tracker::TrackerState;

/// Which sensing pipeline(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Radar,
    Lidar,
    Both,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "radar" => Some(Mode::Radar),
            "lidar" => Some(Mode::Lidar),
            "both" => Some(Mode::Both),
            _ => None,
        }
    }
}

/// How often to write per-frame artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactPolicy {
    #[default]
    None,
    Keyframes,
    All,
}

impl ArtifactPolicy {
    pub fn parse(s: &str) -> Option<ArtifactPolicy> {
        match s {
            "none" => Some(ArtifactPolicy::None),
            "keyframes" => Some(ArtifactPolicy::Keyframes),
            "all" => Some(ArtifactPolicy::All),
            _ => None,
        }
    }

    fn wants(&self, frame: usize, every: usize) -> bool {
        match self {
            ArtifactPolicy::None => false,
            ArtifactPolicy::All => true,
            ArtifactPolicy::Keyframes => frame % every.max(1) == 0,
        }
    }
}

/// On-disk run configuration; every key can be overridden by a CLI flag.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    /// Path to a scenario JSON, or the name of a built-in scenario.
    pub scenario: Option<String>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub threads: Option<usize>,
    pub render: Option<ArtifactPolicy>,
    pub snapshots: Option<ArtifactPolicy>,
    /// Inline parameter overrides (partial; missing fields keep defaults).
    pub params: Option<Params>,
    /// Keyframe stride for `keyframes` policies.
    pub keyframe_every: Option<usize>,
    pub export_detections: Option<bool>,
}

impl RunConfigFile {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub scenario: Scenario,
    pub mode: Mode,
    /// Master seed; overrides the scenario's own seed.
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub render: ArtifactPolicy,
    pub snapshots: ArtifactPolicy,
    pub params: Params,
    pub keyframe_every: usize,
    pub export_detections: bool,
}

impl RunSettings {
    /// Resolve a config file plus CLI-style overrides into run settings.
    pub fn resolve(
        config: RunConfigFile,
        scenario_override: Option<&str>,
        mode_override: Option<Mode>,
        seed_override: Option<u64>,
        out_override: Option<&str>,
        threads_override: Option<usize>,
        render_override: Option<ArtifactPolicy>,
        params_path: Option<&Path>,
    ) -> Result<RunSettings, ConfigError> {
        let scenario_ref = scenario_override
            .map(str::to_owned)
            .or(config.scenario)
            .ok_or_else(|| ConfigError::Invalid {
                path: "config".into(),
                reason: "no scenario given (config key `scenario` or flag --scenario)".into(),
            })?;
        let scenario = load_scenario(&scenario_ref)?;
        let mut params = config.params.unwrap_or_default();
        if let Some(p) = params_path {
            params = Params::from_json_file(p)?;
        }
        params.validate()?;
        let seed = seed_override.or(config.seed).unwrap_or(scenario.seed);
        Ok(RunSettings {
            mode: mode_override.or(config.mode).unwrap_or(Mode::Radar),
            seed,
            out: PathBuf::from(out_override.map(str::to_owned).or(config.out).unwrap_or_else(
                || format!("runs/{}-{}", scenario.name, seed),
            )),
            threads: threads_override.or(config.threads).unwrap_or(1).max(1),
            render: render_override.or(config.render).unwrap_or_default(),
            snapshots: config.snapshots.unwrap_or(ArtifactPolicy::Keyframes),
            keyframe_every: config.keyframe_every.unwrap_or(10),
            export_detections: config.export_detections.unwrap_or(false),
            params,
            scenario,
        })
    }
}

/// A scenario reference is either a JSON path or a built-in name.
pub fn load_scenario(reference: &str) -> Result<Scenario, ConfigError> {
    if let Some(s) = crate::library::by_name(reference) {
        return Ok(s);
    }
    Scenario::from_json_file(Path::new(reference))
}

/// Everything one frame of the single-mode pipeline produces.
pub struct FrameOutcome {
    pub frame: usize,
    pub t: f64,
    pub truth: FrameTruth,
    pub dogm: Grid<DogmCell>,
    pub clusters: Vec<ObjectCluster>,
    pub metrics: FrameMetrics,
    pub diagnostics: FrameDiagnostics,
}

/// Per-frame counters across the whole pipeline.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct FrameDiagnostics {
    pub particles: u64,
    pub births: u64,
    pub dropped_particles: u64,
    pub zero_weight_resets: u64,
    pub dropped_detections: u32,
    pub conflict_fallbacks: u32,
    pub ghosts: usize,
    pub radar_detections: usize,
    pub lidar_detections: usize,
}

/// Largest mass-sum deviations seen at each stage boundary over a run.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct MassAudit {
    pub instant: f64,
    pub suppressed: f64,
    pub combined: f64,
}

/// Single-modality pipeline stepping one frame at a time.
pub struct PipelineRun {
    pub scenario: Scenario,
    pub params: Params,
    pub modality: SensorModality,
    pub seed: u64,
    state: TrackerState,
    accumulated: Grid<EvidenceMass>,
    frame: usize,
    pool: std::sync::Arc<rayon::ThreadPool>,
    pub mass_audit: MassAudit,
}

impl PipelineRun {
    pub fn new(
        scenario: Scenario,
        params: Params,
        modality: SensorModality,
        seed: u64,
        threads: usize,
    ) -> Result<Self, PipelineError> {
        scenario.validate()?;
        params.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| PipelineError::Runtime(e.to_string()))?;
        // Window centered on the ego's start pose.
        let ego0 = scenario.ego.state_at(0.0).pose;
        let mut spec = scenario.grid;
        let shift = crate::grid::recenter_shift(&spec, ego0.position());
        spec.origin.x += shift.0 as f64 * spec.resolution;
        spec.origin.y += shift.1 as f64 * spec.resolution;
        Ok(PipelineRun {
            state: TrackerState::new(spec, seed),
            accumulated: Grid::new(spec),
            frame: 0,
            pool: std::sync::Arc::new(pool),
            mass_audit: MassAudit::default(),
            scenario,
            params,
            modality,
            seed,
        })
    }

    pub fn frames_total(&self) -> usize {
        self.scenario.frame_count()
    }

    /// Read access to the tracker state (inspection and tests).
    pub fn tracker(&self) -> &TrackerState {
        &self.state
    }

    pub fn done(&self) -> bool {
        self.frame >= self.frames_total()
    }

    /// Advance one frame; panics when called past the end.
    pub fn step(&mut self) -> FrameOutcome {
        assert!(!self.done(), "pipeline already finished");
        let frame = self.frame;
        let t = self.scenario.time_of_frame(frame);
        let mut sim = simulate_frame(&self.scenario, t, self.seed);
        let mut diagnostics = FrameDiagnostics::default();

        if self.modality == SensorModality::Radar && self.scenario.noise.ghost_rate > 0.0 {
            let mut rng = stream(self.seed, GHOST_STAGE, 0, frame as u64);
            diagnostics.ghosts = inject_ghosts(
                &mut sim.radar,
                self.scenario.noise.ghost_rate,
                self.scenario.noise.ghost_max_abs_vr,
                &sim.truth,
                &self.scenario.rig,
                &mut rng,
            );
        }
        diagnostics.radar_detections = sim.radar.len();
        diagnostics.lidar_detections = sim.lidar.len();

        // The truth grid's window is authoritative; align the tracker and
        // the accumulated map to it (whole-cell shifts only).
        let target_spec = sim.truth.labels.spec;
        self.recenter_to(&target_spec);

        // Per-sensor measurement grids in parallel, fused in id order.
        let ego_pose = sim.truth.ego;
        let ego_vel = sim.truth.ego_velocity;
        let sensors: Vec<_> = self.scenario.rig.of_modality(self.modality).collect();
        let radar = &sim.radar;
        let lidar = &sim.lidar;
        let params = &self.params;
        let modality = self.modality;
        let grids: Vec<MeasurementGrid> = self.pool.install(|| {
            sensors
                .par_iter()
                .map(|sensor| {
                    let returns = match modality {
                        SensorModality::Radar => SensorReturns::Radar(radar),
                        SensorModality::Lidar => SensorReturns::Lidar(lidar),
                    };
                    inverse_sensor_model(returns, sensor, &ego_pose, ego_vel, target_spec, params)
                })
                .collect()
        });
        let fused = fuse_sensor_grids(grids);
        diagnostics.dropped_detections = fused.dropped_detections;
        diagnostics.conflict_fallbacks = fused.conflict_fallbacks;

        // Tracking update.
        self.state.predict(self.scenario.dt, &self.params);
        self.state.sample_births(&fused, &self.params);
        self.state.weight_particles(&fused, &self.params);
        self.state.weight_mixtures(&fused, &self.params);
        self.state.resample();
        classify_particles(&mut self.state, &self.params);

        // Evidential mapping with a mass audit at each stage boundary.
        let mut instant = derive_instant_map(&self.state, &fused);
        self.mass_audit.instant = self.mass_audit.instant.max(max_mass_sum_deviation(&instant));
        suppress_unclassified(&mut instant);
        self.mass_audit.suppressed = self
            .mass_audit
            .suppressed
            .max(max_mass_sum_deviation(&instant));
        self.accumulated = combine_maps(&self.accumulated, &instant);
        self.mass_audit.combined = self
            .mass_audit
            .combined
            .max(max_mass_sum_deviation(&self.accumulated));

        let moments = estimate_moments(&self.state, &self.params);
        let dogm = assemble_dogm(&self.accumulated, &moments);

        let candidates = filter_dynamic_cells(&dogm, &self.params);
        let clusters = cluster_cells(&candidates, &dogm, &self.params);

        // Region metrics against the labeled mover cells.
        let region = region_mean_velocity(&dogm, &sim.truth.l_dyn);
        let combined_var = region_combined_variance(&dogm, &sim.truth.l_dyn);
        let v_ref = sim.truth.v_ref_x();
        let nees_result = match (region, combined_var, v_ref) {
            (Some(r), Some(var), Some(reference)) => Some(nees(r.v_x, reference, var)),
            _ => None,
        };
        let tracker_diag = self.state.take_diagnostics();
        diagnostics.particles = tracker_diag.particle_count;
        diagnostics.births = tracker_diag.births;
        diagnostics.dropped_particles = tracker_diag.dropped_out_of_grid;
        diagnostics.zero_weight_resets = tracker_diag.zero_weight_resets;

        let metrics = FrameMetrics {
            frame,
            t,
            v_bar_x: region.map(|r| r.v_x),
            v_ref_x: v_ref,
            combined_std: combined_var.map(|v| v.max(0.0).sqrt()),
            eta: nees_result.map(|n| n.eta),
            consistent: nees_result.map(|n| n.consistent),
            cluster_count: clusters.len(),
        };

        self.frame += 1;
        FrameOutcome {
            frame,
            t,
            truth: sim.truth,
            dogm,
            clusters,
            metrics,
            diagnostics,
        }
    }

    fn recenter_to(&mut self, target: &GridSpec) {
        let res = self.state.grid.spec.resolution;
        let dx = ((target.origin.x - self.state.grid.spec.origin.x) / res).round() as i64;
        let dy = ((target.origin.y - self.state.grid.spec.origin.y) / res).round() as i64;
        if dx != 0 || dy != 0 {
            self.state.recenter(dx, dy);
            self.accumulated.shift(dx, dy, EvidenceMass::UNKNOWN);
        }
        // snap to the authoritative origin so incremental shifts cannot
        // accumulate rounding drift
        self.state.grid.spec = *target;
        self.accumulated.spec = *target;
    }
}

/// Run-level summary of one modality.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub modality: String,
    pub seed: u64,
    pub frames: usize,
    pub velocity: Option<VelocityError>,
    pub auc: Option<f64>,
    /// Fraction of defined frames passing the consistency bound.
    pub consistency_fraction: Option<f64>,
    pub defined_frames: usize,
    pub mass_audit: MassAudit,
    pub runtime_s: f64,
}

/// Comparison of the two modalities on one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub radar: RunReport,
    pub lidar: RunReport,
    /// lidar RMS / radar RMS (higher means radar is better).
    pub rms_ratio: Option<f64>,
    pub mse_ratio: Option<f64>,
    pub radar_auc_higher: Option<bool>,
}

/// Execute a full run per the settings, writing the artifact tree.
/// Returns the per-modality reports.
pub fn run_pipeline(settings: &RunSettings) -> Result<Vec<RunReport>, PipelineError> {
    fs::create_dir_all(&settings.out)?;
    let modalities: Vec<SensorModality> = match settings.mode {
        Mode::Radar => vec![SensorModality::Radar],
        Mode::Lidar => vec![SensorModality::Lidar],
        Mode::Both => vec![SensorModality::Radar, SensorModality::Lidar],
    };
    let nested = modalities.len() > 1;
    let mut reports = Vec::new();
    for modality in modalities {
        let root = if nested {
            settings.out.join(match modality {
                SensorModality::Radar => "radar",
                SensorModality::Lidar => "lidar",
            })
        } else {
            settings.out.clone()
        };
        reports.push(run_single(settings, modality, &root)?);
    }
    if nested {
        let radar = reports[0].clone();
        let lidar = reports[1].clone();
        let comparison = ComparisonReport {
            rms_ratio: match (&lidar.velocity, &radar.velocity) {
                (Some(l), Some(r)) if r.rms > 0.0 => Some(l.rms / r.rms),
                _ => None,
            },
            mse_ratio: match (&lidar.velocity, &radar.velocity) {
                (Some(l), Some(r)) if r.mse > 0.0 => Some(l.mse / r.mse),
                _ => None,
            },
            radar_auc_higher: match (radar.auc, lidar.auc) {
                (Some(r), Some(l)) => Some(r > l),
                _ => None,
            },
            radar,
            lidar,
        };
        let text = serde_json::to_string_pretty(&comparison)
            .map_err(|e| PipelineError::Runtime(e.to_string()))?;
        fs::write(settings.out.join("comparison.json"), text)?;
    }
    Ok(reports)
}

fn run_single(
    settings: &RunSettings,
    modality: SensorModality,
    root: &Path,
) -> Result<RunReport, PipelineError> {
    let started = std::time::Instant::now();
    for sub in ["snapshots", "renders", "metrics", "diagnostics"] {
        fs::create_dir_all(root.join(sub))?;
    }
    let mut run = PipelineRun::new(
        settings.scenario.clone(),
        settings.params,
        modality,
        settings.seed,
        settings.threads,
    )?;

    let mut metrics_file = BufWriter::new(fs::File::create(root.join("metrics/metrics.csv"))?);
    writeln!(metrics_file, "{METRICS_CSV_HEADER}")?;
    let mut diag_file = BufWriter::new(fs::File::create(root.join("diagnostics/frames.csv"))?);
    writeln!(
        diag_file,
        "frame,particles,births,dropped_particles,zero_weight_resets,dropped_detections,conflict_fallbacks,ghosts,radar_detections,lidar_detections"
    )?;
    let mut clusters_file = BufWriter::new(fs::File::create(root.join("metrics/clusters.csv"))?);
    writeln!(clusters_file, "{CLUSTERS_CSV_HEADER}")?;
    let mut detections_file = if settings.export_detections {
        let mut f = BufWriter::new(fs::File::create(root.join("diagnostics/detections.csv"))?);
        writeln!(f, "{DETECTIONS_CSV_HEADER}")?;
        Some(f)
    } else {
        None
    };

    let frames = run.frames_total();
    let mut estimates: Vec<Option<f64>> = Vec::with_capacity(frames);
    let mut references: Vec<Option<f64>> = Vec::with_capacity(frames);
    let mut roc_samples: Vec<RocSample> = Vec::new();
    let mut consistent_frames = 0usize;
    let mut defined_frames = 0usize;

    while !run.done() {
        // detections export needs the raw frame; regenerate cheaply
        if let Some(f) = detections_file.as_mut() {
            let sim = simulate_frame(&run.scenario, run.scenario.time_of_frame(run.frame), run.seed);
            write_detections_csv(f, run.frame, &sim.radar, &sim.lidar)?;
        }
        let out = run.step();
        write_metrics_csv_row(&mut metrics_file, &out.metrics)?;
        let d = &out.diagnostics;
        writeln!(
            diag_file,
            "{},{},{},{},{},{},{},{},{},{}",
            out.frame,
            d.particles,
            d.births,
            d.dropped_particles,
            d.zero_weight_resets,
            d.dropped_detections,
            d.conflict_fallbacks,
            d.ghosts,
            d.radar_detections,
            d.lidar_detections
        )?;
        crate::cluster::write_clusters_csv(&mut clusters_file, out.frame, &out.clusters)?;

        estimates.push(out.metrics.v_bar_x);
        references.push(out.metrics.v_ref_x);
        if let (Some(_), Some(consistent)) = (out.metrics.eta, out.metrics.consistent) {
            defined_frames += 1;
            if consistent {
                consistent_frames += 1;
            }
        }
        roc_samples.extend(collect_roc_samples(&out.dogm, &out.truth));

        if settings.snapshots.wants(out.frame, settings.keyframe_every) {
            let path = root.join(format!("snapshots/frame_{:04}.dogm", out.frame));
            let mut f = BufWriter::new(fs::File::create(path)?);
            write_dogm_snapshot(&mut f, &out.dogm, out.frame as u64, settings.seed)?;
        }
        if settings.render.wants(out.frame, settings.keyframe_every) {
            let path = root.join(format!("renders/frame_{:04}.ppm", out.frame));
            let mut f = BufWriter::new(fs::File::create(path)?);
            render_dogm_ppm(&mut f, &out.dogm)?;
        }
    }

    let velocity = velocity_mse(&estimates, &references);
    let roc = roc_curve(&roc_samples, &default_roc_thresholds(20));
    let auc = roc.as_ref().map(|pts| roc_auc(pts));
    if let Some(pts) = &roc {
        let mut f = BufWriter::new(fs::File::create(root.join("metrics/roc.csv"))?);
        write_roc_csv(&mut f, pts)?;
    }

    let report = RunReport {
        scenario: settings.scenario.name.clone(),
        modality: match modality {
            SensorModality::Radar => "radar".into(),
            SensorModality::Lidar => "lidar".into(),
        },
        seed: settings.seed,
        frames,
        velocity,
        auc,
        consistency_fraction: if defined_frames > 0 {
            Some(consistent_frames as f64 / defined_frames as f64)
        } else {
            None
        },
        defined_frames,
        mass_audit: run.mass_audit,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| PipelineError::Runtime(e.to_string()))?;
    fs::write(root.join("metrics/summary.json"), text)?;
    Ok(report)
}
