//! Synthetic radar and lidar detections with ground-truth labels.
//!
//! Each sensor casts rays against the object outlines; the nearest hit per
//! ray becomes a detection candidate subject to a per-kind detection
//! probability and measurement noise. Radar returns carry the radial
//! component of the relative velocity plus a raw-signal score that grades
//! how consistent the return is with a static world point. Everything is a
//! pure function of (scenario, time, seed), so frames can be generated in
//! any order or in parallel.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use std::io::Write;

use crate::grid::{normalize_angle, CellIdx, Grid, Pose, Vec2};
use crate::rng::{stream, SENSOR_STAGE};
use crate::scenario::{ObjectKind, Scenario, SensorModality, SensorRig};

/// One radar return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarDetection {
    pub sensor_id: u32,
    pub range: f64,
    /// Bearing relative to the sensor heading.
    pub azimuth: f64,
    /// Measured radial velocity (m/s); negative when closing.
    pub v_r: f64,
    pub snr: f64,
    /// Raw-signal pre-classification score in [0, 1]; near 1 for returns
    /// consistent with a static world point.
    pub b_rsp: f64,
}

/// One lidar return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarDetection {
    pub sensor_id: u32,
    pub range: f64,
    pub azimuth: f64,
}

/// Ground-truth cell label for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruthLabel {
    Static,
    Dynamic,
    Free,
    #[default]
    Unknown,
}

/// Per-mover ground truth for the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoverTruth {
    pub id: u32,
    pub velocity: Vec2,
    pub centroid: Vec2,
}

/// Ground truth of one frame: ego state, per-cell labels, and the labeled
/// dynamic cell set with the movers that produced it.
#[derive(Debug, Clone)]
pub struct FrameTruth {
    pub t: f64,
    pub ego: Pose,
    pub ego_velocity: Vec2,
    pub labels: Grid<TruthLabel>,
    /// Cells covered by mover footprints this frame.
    pub l_dyn: Vec<CellIdx>,
    pub movers: Vec<MoverTruth>,
}

impl FrameTruth {
    /// Reference x-velocity when the scenario has exactly one mover.
    pub fn v_ref_x(&self) -> Option<f64> {
        match self.movers.as_slice() {
            [single] => Some(single.velocity.x),
            _ => None,
        }
    }
}

/// Everything one frame of simulation produces.
#[derive(Debug, Clone)]
pub struct FrameSim {
    pub radar: Vec<RadarDetection>,
    pub lidar: Vec<LidarDetection>,
    pub truth: FrameTruth,
    /// Ghosts appended this frame (diagnostics).
    pub ghost_count: usize,
}

/// Static world-point score for a radar return: compares the measured
/// radial velocity against the value a stationary reflector would produce
/// given the ego motion, mapped through a Gaussian in the residual. Near 1
/// for static-consistent returns, monotonically decreasing in the residual.
pub fn compute_b_rsp(
    v_r_measured: f64,
    azimuth: f64,
    sensor_pose: &Pose,
    ego_velocity: Vec2,
    sigma_vr: f64,
) -> f64 {
    let los = Vec2::unit(sensor_pose.heading + azimuth);
    let v_r_static = -ego_velocity.dot(los);
    let residual = v_r_measured - v_r_static;
    (-residual * residual / (2.0 * sigma_vr * sigma_vr)).exp()
}

/// Oriented rectangle in world coordinates.
#[derive(Debug, Clone, Copy)]
struct WorldRect {
    center: Vec2,
    axis: Vec2,
    half_len: f64,
    half_wid: f64,
}

impl WorldRect {
    fn contains(&self, p: Vec2) -> bool {
        let d = p - self.center;
        let u = d.dot(self.axis);
        let v = d.dot(self.axis.perp());
        u.abs() <= self.half_len && v.abs() <= self.half_wid
    }

    /// Distance along the ray (origin, dir) to the rectangle, if it hits.
    fn raycast(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        // Slab test in the rectangle frame.
        let rel = origin - self.center;
        let perp = self.axis.perp();
        let o_u = rel.dot(self.axis);
        let o_v = rel.dot(perp);
        let d_u = dir.dot(self.axis);
        let d_v = dir.dot(perp);
        let mut t_min = 0.0f64;
        let mut t_max = f64::INFINITY;
        for (o, d, half) in [(o_u, d_u, self.half_len), (o_v, d_v, self.half_wid)] {
            if d.abs() < 1e-12 {
                if o.abs() > half {
                    return None;
                }
            } else {
                let t1 = (-half - o) / d;
                let t2 = (half - o) / d;
                let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                t_min = t_min.max(lo);
                t_max = t_max.min(hi);
                if t_min > t_max {
                    return None;
                }
            }
        }
        if t_max < 0.0 {
            return None;
        }
        Some(if t_min > 0.0 { t_min } else { t_max })
    }
}

struct ObjectState {
    kind: ObjectKind,
    rect: WorldRect,
    velocity: Vec2,
    mover: bool,
    id: u32,
}

fn object_states(scenario: &Scenario, t: f64) -> Vec<ObjectState> {
    scenario
        .objects
        .iter()
        .filter(|o| o.kind != ObjectKind::GhostSource)
        .map(|o| {
            let state = o.trajectory.state_at(t);
            ObjectState {
                kind: o.kind,
                rect: WorldRect {
                    center: state.pose.position(),
                    axis: state.pose.forward(),
                    half_len: o.shape.length / 2.0,
                    half_wid: o.shape.width / 2.0,
                },
                velocity: state.velocity(),
                mover: o.is_mover(),
                id: o.id,
            }
        })
        .collect()
}

/// Simulate one frame of detections and ground truth. Deterministic given
/// (scenario, t, seed); the rig comes from the scenario.
pub fn simulate_frame(scenario: &Scenario, t: f64, seed: u64) -> FrameSim {
    let ego_state = scenario.ego.state_at(t);
    let ego = ego_state.pose;
    let ego_velocity = ego_state.velocity();
    let objects = object_states(scenario, t);

    let mut radar = Vec::new();
    let mut lidar = Vec::new();

    for (sensor_idx, sensor) in scenario.rig.sensors.iter().enumerate() {
        let mut rng = stream(seed, SENSOR_STAGE, sensor_idx as u64, frame_key(scenario, t));
        let pose = sensor.world_pose(&ego);
        // Ray fan centered on the boresight so a dead-ahead ray always
        // exists; the inverse model casts the same fan.
        let half_rays = (sensor.fov / 2.0 / sensor.angular_res).floor() as i64;
        for ray in -half_rays..=half_rays {
            let az = ray as f64 * sensor.angular_res;
            let dir = Vec2::unit(pose.heading + az);
            // nearest hit over all object outlines
            let mut best: Option<(f64, &ObjectState)> = None;
            for obj in &objects {
                if let Some(dist) = obj.rect.raycast(pose.position(), dir) {
                    if dist > 0.0
                        && dist <= sensor.max_range
                        && best.map_or(true, |(b, _)| dist < b)
                    {
                        best = Some((dist, obj));
                    }
                }
            }
            let Some((dist, obj)) = best else { continue };
            if rng.gen::<f64>() >= scenario.noise.p_detect(obj.kind, sensor.modality) {
                continue;
            }
            let range = dist + sample_normal(&mut rng, sensor.range_std);
            let azimuth = az + sample_normal(&mut rng, sensor.azimuth_std);
            if range <= 0.0 {
                continue;
            }
            match sensor.modality {
                SensorModality::Lidar => lidar.push(LidarDetection {
                    sensor_id: sensor.id,
                    range,
                    azimuth,
                }),
                SensorModality::Radar => {
                    let hit_point = pose.position() + dir.scale(dist);
                    let los = Vec2::unit((hit_point - pose.position()).angle());
                    let mut v_r = (obj.velocity - ego_velocity).dot(los)
                        + sample_normal(&mut rng, sensor.vr_std);
                    if obj.kind == ObjectKind::Vehicle
                        && scenario.noise.micro_doppler_rate > 0.0
                        && rng.gen::<f64>() < scenario.noise.micro_doppler_rate
                    {
                        v_r += sample_normal(&mut rng, scenario.noise.micro_doppler_spread);
                    }
                    let snr = scenario.noise.snr_base(obj.kind)
                        - scenario.noise.snr_atten_per_m * dist
                        + sample_normal(&mut rng, scenario.noise.snr_std);
                    let b_rsp = compute_b_rsp(v_r, azimuth, &pose, ego_velocity, B_RSP_SIGMA);
                    radar.push(RadarDetection {
                        sensor_id: sensor.id,
                        range,
                        azimuth,
                        v_r,
                        snr,
                        b_rsp,
                    });
                }
            }
        }
    }

    let truth = frame_truth(scenario, t, &ego, ego_velocity, &objects);
    FrameSim {
        radar,
        lidar,
        truth,
        ghost_count: 0,
    }
}

/// Residual scale (m/s) of the raw-signal score. Matches the default
/// radial-velocity likelihood spread.
pub const B_RSP_SIGMA: f64 = 0.5;

fn sample_normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).unwrap().sample(rng)
}

fn frame_key(scenario: &Scenario, t: f64) -> u64 {
    (t / scenario.dt).round() as u64
}

fn frame_truth(
    scenario: &Scenario,
    t: f64,
    ego: &Pose,
    ego_velocity: Vec2,
    objects: &[ObjectState],
) -> FrameTruth {
    // Truth labels live on a window centered like the pipeline's grid.
    let mut spec = scenario.grid;
    let shift = crate::grid::recenter_shift(&spec, ego.position());
    spec.origin.x += shift.0 as f64 * spec.resolution;
    spec.origin.y += shift.1 as f64 * spec.resolution;

    let mut labels: Grid<TruthLabel> = Grid::new(spec);
    let coverage_range = scenario.rig.max_range();
    let n = spec.cells_per_side();

    // Coverage first: free within sensor reach, unknown beyond.
    for iy in 0..n {
        for ix in 0..n {
            let c = CellIdx::new(ix as u32, iy as u32);
            let center = spec.cell_center(c);
            if (center - ego.position()).norm() <= coverage_range {
                *labels.get_mut(c) = TruthLabel::Free;
            }
        }
    }

    // Object footprints override coverage.
    let mut l_dyn = Vec::new();
    for obj in objects {
        let radius = (obj.rect.half_len.powi(2) + obj.rect.half_wid.powi(2)).sqrt();
        let lo = obj.rect.center - Vec2::new(radius, radius);
        let hi = obj.rect.center + Vec2::new(radius, radius);
        let (lo_c, hi_c) = cell_range(&spec, lo, hi);
        for iy in lo_c.y..=hi_c.y {
            for ix in lo_c.x..=hi_c.x {
                let c = CellIdx::new(ix, iy);
                if obj.rect.contains(spec.cell_center(c)) {
                    if obj.mover {
                        *labels.get_mut(c) = TruthLabel::Dynamic;
                        l_dyn.push(c);
                    } else if *labels.get(c) != TruthLabel::Dynamic {
                        *labels.get_mut(c) = TruthLabel::Static;
                    }
                }
            }
        }
    }
    l_dyn.sort_unstable();
    l_dyn.dedup();

    let movers = objects
        .iter()
        .filter(|o| o.mover)
        .map(|o| MoverTruth {
            id: o.id,
            velocity: o.velocity,
            centroid: o.rect.center,
        })
        .collect();

    FrameTruth {
        t,
        ego: *ego,
        ego_velocity,
        labels,
        l_dyn,
        movers,
    }
}

/// Clamp a world-space box to the cell window.
fn cell_range(spec: &crate::grid::GridSpec, lo: Vec2, hi: Vec2) -> (CellIdx, CellIdx) {
    let n = spec.cells_per_side() as i64 - 1;
    let clamp = |v: i64| v.clamp(0, n) as u32;
    let lo_x = ((lo.x - spec.origin.x) / spec.resolution).floor() as i64;
    let lo_y = ((lo.y - spec.origin.y) / spec.resolution).floor() as i64;
    let hi_x = ((hi.x - spec.origin.x) / spec.resolution).ceil() as i64;
    let hi_y = ((hi.y - spec.origin.y) / spec.resolution).ceil() as i64;
    (
        CellIdx::new(clamp(lo_x), clamp(lo_y)),
        CellIdx::new(clamp(hi_x), clamp(hi_y)),
    )
}

/// Append spurious radar detections at random free-space cells. The count
/// is Poisson with the given per-frame rate; radial velocities are uniform
/// in ±`max_abs_vr`. Returns how many ghosts were added.
pub fn inject_ghosts(
    detections: &mut Vec<RadarDetection>,
    rate: f64,
    max_abs_vr: f64,
    truth: &FrameTruth,
    rig: &SensorRig,
    rng: &mut ChaCha8Rng,
) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let count = Poisson::new(rate).unwrap().sample(rng) as usize;
    let free_cells: Vec<CellIdx> = truth
        .labels
        .iter()
        .filter(|(_, l)| **l == TruthLabel::Free)
        .map(|(c, _)| c)
        .collect();
    if free_cells.is_empty() {
        return 0;
    }
    let mut added = 0;
    for _ in 0..count {
        let cell = free_cells[rng.gen_range(0..free_cells.len())];
        let point = truth.labels.spec.cell_center(cell);
        // attribute the ghost to a radar sensor that can see the point
        let candidate = rig.of_modality(SensorModality::Radar).find(|s| {
            let pose = s.world_pose(&truth.ego);
            let rel = point - pose.position();
            let range = rel.norm();
            let bearing = normalize_angle(rel.angle() - pose.heading);
            range > 0.5 && range <= s.max_range && bearing.abs() <= s.fov / 2.0
        });
        let Some(sensor) = candidate else { continue };
        let pose = sensor.world_pose(&truth.ego);
        let rel = point - pose.position();
        let azimuth = normalize_angle(rel.angle() - pose.heading);
        let v_r = rng.gen_range(-max_abs_vr..max_abs_vr);
        let b_rsp = compute_b_rsp(v_r, azimuth, &pose, truth.ego_velocity, B_RSP_SIGMA);
        detections.push(RadarDetection {
            sensor_id: sensor.id,
            range: rel.norm(),
            azimuth,
            v_r,
            snr: 5.0,
            b_rsp,
        });
        added += 1;
    }
    added
}

/// Dump detections of one frame as CSV rows for debugging.
pub fn write_detections_csv<W: Write>(
    out: &mut W,
    frame: usize,
    radar: &[RadarDetection],
    lidar: &[LidarDetection],
) -> std::io::Result<()> {
    for d in radar {
        writeln!(
            out,
            "{frame},radar,{},{:.6},{:.6},{:.6},{:.3},{:.6}",
            d.sensor_id, d.range, d.azimuth, d.v_r, d.snr, d.b_rsp
        )?;
    }
    for d in lidar {
        writeln!(
            out,
            "{frame},lidar,{},{:.6},{:.6},,,",
            d.sensor_id, d.range, d.azimuth
        )?;
    }
    Ok(())
}

/// CSV header matching `write_detections_csv`.
pub const DETECTIONS_CSV_HEADER: &str = "frame,modality,sensor_id,range,azimuth,v_r,snr,b_rsp";
