//! Scenario descriptions: objects with piecewise-constant-acceleration
//! trajectories, the ego trajectory, the sensor rig and noise model.
//!
//! Scenarios are plain JSON files (see README for the schema) and are fully
//! deterministic given a seed. Trajectory segments move straight along the
//! segment's initial heading; braking clamps the speed at zero so objects
//! come to rest instead of reversing.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::ConfigError;
use crate::grid::{GridSpec, Pose, Vec2};

/// What an object is; drives reflectivity and detection probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Vehicle,
    Pedestrian,
    Fence,
    /// Marker object: ignored by ray casting and truth labeling.
    GhostSource,
}

/// Rectangular footprint, centered on the object pose, length along the
/// heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectShape {
    pub length: f64,
    pub width: f64,
}

/// One straight, constant-acceleration piece of a trajectory. The object
/// is at `pose` with `speed` at `t_start` and accelerates along the pose
/// heading; speed is clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub t_start: f64,
    pub t_end: f64,
    /// Initial pose; omit in JSON to continue from the previous segment.
    pub pose: Option<Pose>,
    /// Initial speed (m/s, nonnegative); omit to continue.
    pub speed: Option<f64>,
    #[serde(default)]
    pub accel: f64,
}

/// Piecewise-constant-acceleration trajectory covering a time span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<TrajectorySegment>,
}

/// Pose and speed of a trajectory at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub pose: Pose,
    pub speed: f64,
}

impl KinematicState {
    pub fn velocity(&self) -> Vec2 {
        self.pose.forward().scale(self.speed)
    }
}

impl Trajectory {
    /// Object that never moves.
    pub fn stationary(pose: Pose, duration: f64) -> Self {
        Trajectory {
            segments: vec![TrajectorySegment {
                t_start: 0.0,
                t_end: duration,
                pose: Some(pose),
                speed: Some(0.0),
                accel: 0.0,
            }],
        }
    }

    /// Start a moving trajectory at `pose` with `speed`.
    pub fn start(pose: Pose, speed: f64) -> TrajectoryBuilder {
        TrajectoryBuilder {
            segments: Vec::new(),
            t: 0.0,
            state: KinematicState { pose, speed },
        }
    }

    /// Fill in omitted pose/speed fields from the end state of the
    /// previous segment.
    pub fn resolve_continuations(&mut self) -> Result<(), String> {
        for i in 0..self.segments.len() {
            if self.segments[i].pose.is_none() || self.segments[i].speed.is_none() {
                if i == 0 {
                    return Err("first trajectory segment must state pose and speed".into());
                }
                let prev = self.segments[i - 1];
                let end = segment_state(&prev, prev.t_end);
                let seg = &mut self.segments[i];
                if seg.pose.is_none() {
                    seg.pose = Some(end.pose);
                }
                if seg.speed.is_none() {
                    seg.speed = Some(end.speed);
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, duration: f64) -> Result<(), String> {
        if self.segments.is_empty() {
            return Err("trajectory has no segments".into());
        }
        for (i, s) in self.segments.iter().enumerate() {
            if s.t_end <= s.t_start {
                return Err(format!("segment {i} has nonpositive duration"));
            }
            if s.pose.is_none() || s.speed.is_none() {
                return Err(format!("segment {i} has unresolved pose/speed"));
            }
            if s.speed.unwrap() < 0.0 {
                return Err(format!("segment {i} has negative speed"));
            }
            if i > 0 && (s.t_start - self.segments[i - 1].t_end).abs() > 1e-9 {
                return Err(format!("segment {i} is not contiguous with its predecessor"));
            }
        }
        if self.segments[0].t_start > 1e-9 {
            return Err("trajectory must start at t = 0".into());
        }
        if self.segments.last().unwrap().t_end + 1e-9 < duration {
            return Err("trajectory ends before the scenario does".into());
        }
        Ok(())
    }

    /// Pose and speed at time `t` (clamped to the covered span).
    pub fn state_at(&self, t: f64) -> KinematicState {
        let seg = self
            .segments
            .iter()
            .rev()
            .find(|s| t >= s.t_start)
            .unwrap_or(&self.segments[0]);
        segment_state(seg, t.min(seg.t_end).max(seg.t_start))
    }

    pub fn velocity_at(&self, t: f64) -> Vec2 {
        self.state_at(t).velocity()
    }

    /// True when any segment moves (nonzero speed or acceleration).
    pub fn is_mover(&self) -> bool {
        self.segments
            .iter()
            .any(|s| s.speed.unwrap_or(0.0) > 0.0 || s.accel != 0.0)
    }
}

fn segment_state(seg: &TrajectorySegment, t: f64) -> KinematicState {
    let pose = seg.pose.expect("unresolved segment pose");
    let v0 = seg.speed.expect("unresolved segment speed");
    let tau = (t - seg.t_start).max(0.0);
    // Clamp at standstill: no motion past the stop time under braking.
    let tau_eff = if seg.accel < 0.0 {
        tau.min(v0 / -seg.accel)
    } else {
        tau
    };
    let dist = v0 * tau_eff + 0.5 * seg.accel * tau_eff * tau_eff;
    let speed = (v0 + seg.accel * tau).max(0.0);
    let fwd = pose.forward();
    KinematicState {
        pose: Pose::new(pose.x + fwd.x * dist, pose.y + fwd.y * dist, pose.heading),
        speed,
    }
}

/// Chained construction of contiguous segments.
pub struct TrajectoryBuilder {
    segments: Vec<TrajectorySegment>,
    t: f64,
    state: KinematicState,
}

impl TrajectoryBuilder {
    /// Append a segment of the given duration and acceleration, continuing
    /// from the current end state.
    pub fn advance(mut self, duration: f64, accel: f64) -> Self {
        let seg = TrajectorySegment {
            t_start: self.t,
            t_end: self.t + duration,
            pose: Some(self.state.pose),
            speed: Some(self.state.speed),
            accel,
        };
        self.state = segment_state(&seg, seg.t_end);
        self.t = seg.t_end;
        self.segments.push(seg);
        self
    }

    /// Constant-speed segment.
    pub fn cruise(self, duration: f64) -> Self {
        self.advance(duration, 0.0)
    }

    pub fn build(self) -> Trajectory {
        Trajectory {
            segments: self.segments,
        }
    }
}

/// One simulated object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioObject {
    pub id: u32,
    pub kind: ObjectKind,
    pub shape: RectShape,
    pub trajectory: Trajectory,
}

impl ScenarioObject {
    /// Scenario-level mover flag: an object that moves at any point keeps
    /// its dynamic truth label even while instantaneously at rest (a
    /// braking target at standstill stays in the labeled dynamic set).
    pub fn is_mover(&self) -> bool {
        self.kind != ObjectKind::GhostSource && self.trajectory.is_mover()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorModality {
    Radar,
    Lidar,
}

/// One sensor of the rig, mounted relative to the ego frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorMount {
    pub id: u32,
    pub modality: SensorModality,
    /// Mount pose in the ego frame.
    pub mount: Pose,
    /// Full field of view (rad), centered on the mount heading.
    pub fov: f64,
    pub max_range: f64,
    /// Ray spacing (rad) used for both simulation and the inverse model.
    pub angular_res: f64,
    pub range_std: f64,
    pub azimuth_std: f64,
    /// Radial-velocity noise (radar only).
    #[serde(default)]
    pub vr_std: f64,
}

impl SensorMount {
    /// World pose of the sensor given the ego pose.
    pub fn world_pose(&self, ego: &Pose) -> Pose {
        let c = ego.heading.cos();
        let s = ego.heading.sin();
        Pose::new(
            ego.x + c * self.mount.x - s * self.mount.y,
            ego.y + s * self.mount.x + c * self.mount.y,
            ego.heading + self.mount.heading,
        )
    }
}

/// The full sensor set carried by the ego vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRig {
    pub sensors: Vec<SensorMount>,
}

impl SensorRig {
    pub fn of_modality(&self, modality: SensorModality) -> impl Iterator<Item = &SensorMount> {
        self.sensors.iter().filter(move |s| s.modality == modality)
    }

    pub fn max_range(&self) -> f64 {
        self.sensors.iter().map(|s| s.max_range).fold(0.0, f64::max)
    }

    /// Default rig: four radars covering 360° and four lidars leaving
    /// blind spots on the vehicle sides.
    pub fn default_rig() -> Self {
        let mut sensors = Vec::new();
        let radar_headings = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, -std::f64::consts::FRAC_PI_2];
        for (i, h) in radar_headings.iter().enumerate() {
            sensors.push(SensorMount {
                id: i as u32,
                modality: SensorModality::Radar,
                mount: Pose::new(0.0, 0.0, *h),
                fov: 110f64.to_radians(),
                max_range: 28.0,
                angular_res: 2f64.to_radians(),
                range_std: 0.15,
                azimuth_std: 0.5f64.to_radians(),
                vr_std: 0.2,
            });
        }
        // Lidars paired front and rear; nothing looks straight sideways.
        let lidar_headings = [-0.5, 0.5, std::f64::consts::PI - 0.5, std::f64::consts::PI + 0.5];
        for (i, h) in lidar_headings.iter().enumerate() {
            sensors.push(SensorMount {
                id: 4 + i as u32,
                modality: SensorModality::Lidar,
                mount: Pose::new(0.0, 0.0, *h),
                fov: 100f64.to_radians(),
                max_range: 28.0,
                angular_res: 0.5f64.to_radians(),
                range_std: 0.03,
                azimuth_std: 0.1f64.to_radians(),
                vr_std: 0.0,
            });
        }
        SensorRig { sensors }
    }
}

/// Detection/reflectivity model per object kind plus spurious-return knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub p_detect_vehicle_radar: f64,
    pub p_detect_pedestrian_radar: f64,
    pub p_detect_fence_radar: f64,
    pub p_detect_lidar: f64,
    pub snr_vehicle: f64,
    pub snr_pedestrian: f64,
    pub snr_fence: f64,
    pub snr_atten_per_m: f64,
    pub snr_std: f64,
    /// Probability that a vehicle radar return carries a spurious
    /// rotating-part velocity outlier. Off by default.
    pub micro_doppler_rate: f64,
    /// Spread (m/s) of such outliers around the true radial velocity.
    pub micro_doppler_spread: f64,
    /// Mean spurious radar detections per frame placed in free space.
    pub ghost_rate: f64,
    /// Ghost radial velocities are uniform in ±this bound (m/s).
    pub ghost_max_abs_vr: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            p_detect_vehicle_radar: 0.9,
            p_detect_pedestrian_radar: 0.55,
            p_detect_fence_radar: 0.85,
            p_detect_lidar: 0.95,
            snr_vehicle: 22.0,
            snr_pedestrian: 8.0,
            snr_fence: 18.0,
            snr_atten_per_m: 0.3,
            snr_std: 2.0,
            micro_doppler_rate: 0.0,
            micro_doppler_spread: 4.0,
            ghost_rate: 0.0,
            ghost_max_abs_vr: 16.0,
        }
    }
}

impl NoiseModel {
    pub fn p_detect(&self, kind: ObjectKind, modality: SensorModality) -> f64 {
        match modality {
            SensorModality::Lidar => self.p_detect_lidar,
            SensorModality::Radar => match kind {
                ObjectKind::Vehicle => self.p_detect_vehicle_radar,
                ObjectKind::Pedestrian => self.p_detect_pedestrian_radar,
                ObjectKind::Fence => self.p_detect_fence_radar,
                ObjectKind::GhostSource => 0.0,
            },
        }
    }

    pub fn snr_base(&self, kind: ObjectKind) -> f64 {
        match kind {
            ObjectKind::Vehicle => self.snr_vehicle,
            ObjectKind::Pedestrian => self.snr_pedestrian,
            ObjectKind::Fence => self.snr_fence,
            ObjectKind::GhostSource => 0.0,
        }
    }
}

/// A complete simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Total duration (s).
    pub duration: f64,
    /// Frame period (s).
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    pub ego: Trajectory,
    pub objects: Vec<ScenarioObject>,
    #[serde(default = "SensorRig::default_rig")]
    pub rig: SensorRig,
    #[serde(default)]
    pub noise: NoiseModel,
}

fn default_grid() -> GridSpec {
    GridSpec::default()
}

impl Scenario {
    pub fn frame_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn time_of_frame(&self, frame: usize) -> f64 {
        frame as f64 * self.dt
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |reason: String| ConfigError::Invalid {
            path: self.name.clone(),
            reason,
        };
        if self.duration <= 0.0 || self.dt <= 0.0 {
            return Err(fail("duration and dt must be positive".into()));
        }
        self.grid.validate().map_err(|e| fail(e.to_string()))?;
        self.ego
            .validate(self.duration)
            .map_err(|e| fail(format!("ego: {e}")))?;
        let mut ids = std::collections::HashSet::new();
        for obj in &self.objects {
            if !ids.insert(obj.id) {
                return Err(fail(format!("duplicate object id {}", obj.id)));
            }
            obj.trajectory
                .validate(self.duration)
                .map_err(|e| fail(format!("object {}: {e}", obj.id)))?;
            if obj.shape.length <= 0.0 || obj.shape.width <= 0.0 {
                return Err(fail(format!("object {} has nonpositive shape", obj.id)));
            }
        }
        if self.rig.sensors.is_empty() {
            return Err(fail("sensor rig is empty".into()));
        }
        let mut sensor_ids = std::collections::HashSet::new();
        for s in &self.rig.sensors {
            if !sensor_ids.insert(s.id) {
                return Err(fail(format!("duplicate sensor id {}", s.id)));
            }
            if s.fov <= 0.0 || s.max_range <= 0.0 || s.angular_res <= 0.0 {
                return Err(fail(format!("sensor {} has nonpositive geometry", s.id)));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut scenario: Scenario =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        scenario
            .ego
            .resolve_continuations()
            .map_err(|reason| ConfigError::Invalid {
                path: path.display().to_string(),
                reason,
            })?;
        for obj in &mut scenario.objects {
            obj.trajectory
                .resolve_continuations()
                .map_err(|reason| ConfigError::Invalid {
                    path: path.display().to_string(),
                    reason,
                })?;
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<(), ConfigError> {
        let text = serde_json::to_string_pretty(self).expect("scenario serializes");
        std::fs::write(path, text).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })
    }

    /// Movers in the scenario-level sense (see `ScenarioObject::is_mover`).
    pub fn movers(&self) -> impl Iterator<Item = &ScenarioObject> {
        self.objects.iter().filter(|o| o.is_mover())
    }
}
