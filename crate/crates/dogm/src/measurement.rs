//! Per-sensor evidential measurement grids and their fusion.
//!
//! A frame of detections from one sensor becomes a grid of masses over
//! {free, occupied, unknown}: occupancy is a 2-D Gaussian around each
//! detection point, free space decays with range along each cast ray, and
//! cells behind a return stay uncertain. Occupancy probabilities map to
//! masses with the split conversion: p above one half feeds the occupied
//! mass, below one half the free mass, remainder to the unknown mass.
//! Multi-sensor grids are fused cell-wise with Dempster's rule in a fixed
//! sensor order, so the fold is deterministic.

use crate::error::TotalConflict;
use crate::grid::{CellIdx, EvidenceMass, Grid, GridSpec, Pose, Vec2};
use crate::params::Params;
use crate::scenario::SensorMount;
use crate::sensor::{LidarDetection, RadarDetection};

/// Radial-velocity observation attached to an occupied measurement cell
/// (radar only): measured value, line-of-sight unit vector in the world
/// frame, and the raw-signal score of the dominant detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialObservation {
    pub v_r: f64,
    pub los: Vec2,
    pub b_rsp: f64,
}

/// One cell of a measurement grid. Only three hypotheses can carry mass
/// here; singleton static/dynamic evidence is born in tracking, never in
/// the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeasurementCell {
    pub m_sd: f64,
    pub m_f: f64,
    pub radial: Option<RadialObservation>,
}

impl MeasurementCell {
    pub fn m_omega(&self) -> f64 {
        1.0 - self.m_sd - self.m_f
    }

    pub fn mass(&self) -> EvidenceMass {
        EvidenceMass {
            m_f: self.m_f,
            m_s: 0.0,
            m_d: 0.0,
            m_sd: self.m_sd,
            m_omega: self.m_omega(),
        }
    }
}

/// Measurement grid of one sensor (or the fused frame grid).
#[derive(Debug, Clone)]
pub struct MeasurementGrid {
    pub grid: Grid<MeasurementCell>,
    /// Linear indices of non-vacuous cells, sorted ascending.
    pub touched: Vec<u32>,
    /// Detections dropped for being behind the sensor or out of its
    /// field of view.
    pub dropped_detections: u32,
    /// Cells that hit total conflict during fusion and fell back to the
    /// vacuous mass.
    pub conflict_fallbacks: u32,
    /// Ego velocity of the frame; needed to evaluate radial likelihoods
    /// of world-frame particle velocities.
    pub ego_velocity: Vec2,
    sensor_id: Option<u32>,
}

impl MeasurementGrid {
    pub fn vacuous(spec: GridSpec, ego_velocity: Vec2) -> Self {
        MeasurementGrid {
            grid: Grid::new(spec),
            touched: Vec::new(),
            dropped_detections: 0,
            conflict_fallbacks: 0,
            ego_velocity,
            sensor_id: None,
        }
    }

    pub fn cell(&self, c: CellIdx) -> &MeasurementCell {
        self.grid.get(c)
    }
}

/// Combine two mass functions with Dempster's rule over the hypothesis
/// set {F, S, D, {S,D}, Ω}. Commutative; the result is normalized by the
/// complement of the conflict. Total conflict is an error and callers fall
/// back to the vacuous mass.
pub fn dempster_combine(a: &EvidenceMass, b: &EvidenceMass) -> Result<EvidenceMass, TotalConflict> {
    // Symmetric cross terms keep the rule exactly commutative: swapping
    // the arguments permutes each pair's two products, and two-term
    // floating-point addition commutes.
    let sym = |x: f64, y: f64, u: f64, v: f64| x * v + u * y;
    // Conflicting products: F against any occupied hypothesis, S against D.
    let conflict = sym(a.m_f, b.m_f, a.m_s, b.m_s)
        + sym(a.m_f, b.m_f, a.m_d, b.m_d)
        + sym(a.m_f, b.m_f, a.m_sd, b.m_sd)
        + sym(a.m_s, b.m_s, a.m_d, b.m_d);
    if conflict >= 1.0 - 1e-12 {
        return Err(TotalConflict { conflict });
    }
    let norm = 1.0 - conflict;
    Ok(EvidenceMass {
        m_f: (a.m_f * b.m_f + sym(a.m_f, b.m_f, a.m_omega, b.m_omega)) / norm,
        m_s: (a.m_s * b.m_s
            + sym(a.m_s, b.m_s, a.m_sd, b.m_sd)
            + sym(a.m_s, b.m_s, a.m_omega, b.m_omega))
            / norm,
        m_d: (a.m_d * b.m_d
            + sym(a.m_d, b.m_d, a.m_sd, b.m_sd)
            + sym(a.m_d, b.m_d, a.m_omega, b.m_omega))
            / norm,
        m_sd: (a.m_sd * b.m_sd + sym(a.m_sd, b.m_sd, a.m_omega, b.m_omega)) / norm,
        m_omega: (a.m_omega * b.m_omega) / norm,
    })
}

/// Split conversion from an occupancy probability to measurement masses
/// (m_sd, m_f); the remainder is uncertainty. The fixed point p = 0.5 maps
/// to full uncertainty.
pub fn mass_from_p_occ(p_occ: f64) -> (f64, f64) {
    if p_occ > 0.5 {
        (2.0 * (p_occ - 0.5), 0.0)
    } else {
        (0.0, 1.0 - 2.0 * p_occ)
    }
}

/// Free-space probability along a ray: starts at `p_free_max` and decays
/// linearly to the 0.5 floor at max range (small objects are detected
/// less frequently far away, so distant emptiness fades to uncertainty
/// rather than flipping to occupied).
fn p_free_at(range: f64, max_range: f64, p_free_max: f64) -> f64 {
    0.5 + (p_free_max - 0.5) * (1.0 - range / max_range).max(0.0)
}

/// Detections of a single sensor, by modality.
pub enum SensorReturns<'a> {
    Radar(&'a [RadarDetection]),
    Lidar(&'a [LidarDetection]),
}

struct PolarReturn {
    range: f64,
    azimuth: f64,
    radial: Option<(f64, f64)>, // (v_r, b_rsp)
}

/// Build the evidential measurement grid of one sensor from its frame of
/// detections. Detections belonging to other sensors are ignored;
/// detections behind the sensor or outside its field of view are dropped
/// and tallied.
pub fn inverse_sensor_model(
    returns: SensorReturns<'_>,
    sensor: &SensorMount,
    ego: &Pose,
    ego_velocity: Vec2,
    spec: GridSpec,
    params: &Params,
) -> MeasurementGrid {
    let pose = sensor.world_pose(ego);
    let (dets, sigma_occ): (Vec<PolarReturn>, f64) = match returns {
        SensorReturns::Radar(r) => (
            r.iter()
                .filter(|d| d.sensor_id == sensor.id)
                .map(|d| PolarReturn {
                    range: d.range,
                    azimuth: d.azimuth,
                    radial: Some((d.v_r, d.b_rsp)),
                })
                .collect(),
            params.sigma_occ_radar,
        ),
        SensorReturns::Lidar(l) => (
            l.iter()
                .filter(|d| d.sensor_id == sensor.id)
                .map(|d| PolarReturn {
                    range: d.range,
                    azimuth: d.azimuth,
                    radial: None,
                })
                .collect(),
            params.sigma_occ_lidar,
        ),
    };

    let mut out = MeasurementGrid::vacuous(spec, ego_velocity);
    out.sensor_id = Some(sensor.id);
    let n_cells = spec.cell_count();

    // Per-ray nearest return bounds the free-space traversal. The fan is
    // centered on the boresight, matching the simulator's ray set.
    let half_rays = (sensor.fov / 2.0 / sensor.angular_res).floor() as i64;
    let n_rays = (2 * half_rays + 1) as usize;
    let mut ray_block = vec![f64::INFINITY; n_rays];
    let mut kept: Vec<&PolarReturn> = Vec::with_capacity(dets.len());
    for d in &dets {
        let half_fov = sensor.fov / 2.0 + sensor.angular_res / 2.0;
        if d.range <= 0.0 || d.azimuth.abs() > half_fov {
            out.dropped_detections += 1;
            continue;
        }
        let ray = ((d.azimuth / sensor.angular_res).round() as i64)
            .clamp(-half_rays, half_rays)
            + half_rays;
        ray_block[ray as usize] = ray_block[ray as usize].min(d.range);
        kept.push(d);
    }

    // Pass 1: free mass along each ray up to the nearest return.
    let mut free = vec![0.0f64; n_cells];
    for ray in -half_rays..=half_rays {
        let az = ray as f64 * sensor.angular_res;
        let dir = Vec2::unit(pose.heading + az);
        let block = ray_block[(ray + half_rays) as usize];
        let limit = (block - sigma_occ).min(sensor.max_range).max(0.0);
        traverse_ray(&spec, pose.position(), dir, limit, |cell, dist| {
            let m_f = (2.0 * p_free_at(dist, sensor.max_range, params.p_free_max) - 1.0).max(0.0);
            let i = spec.linear_index(cell);
            if m_f > free[i] {
                free[i] = m_f;
            }
        });
    }

    // Pass 2: occupancy Gaussians around each detection point, keeping the
    // strongest contribution per cell and its observation.
    let occ_amplitude = 2.0 * params.p_occ_max - 1.0;
    let mut occ = vec![0.0f64; n_cells];
    let mut dominant: Vec<Option<RadialObservation>> = vec![None; n_cells];
    let reach = 3.0 * sigma_occ;
    for d in kept {
        let bearing = pose.heading + d.azimuth;
        let los = Vec2::unit(bearing);
        let point = pose.position() + los.scale(d.range);
        let lo = point - Vec2::new(reach, reach);
        let hi = point + Vec2::new(reach, reach);
        let Some((lo_c, hi_c)) = clip_box(&spec, lo, hi) else {
            continue;
        };
        for iy in lo_c.y..=hi_c.y {
            for ix in lo_c.x..=hi_c.x {
                let cell = CellIdx::new(ix, iy);
                let delta = spec.cell_center(cell) - point;
                let d2 = delta.dot(delta);
                if d2 > reach * reach {
                    continue;
                }
                let contrib = occ_amplitude * (-d2 / (2.0 * sigma_occ * sigma_occ)).exp();
                let i = spec.linear_index(cell);
                if contrib > occ[i] {
                    occ[i] = contrib;
                    dominant[i] = d.radial.map(|(v_r, b_rsp)| RadialObservation {
                        v_r,
                        los,
                        b_rsp,
                    });
                }
            }
        }
    }

    // Compose: occupancy wins over free where both were painted.
    for i in 0..n_cells {
        if occ[i] > 0.0 {
            out.grid.cells[i] = MeasurementCell {
                m_sd: occ[i],
                m_f: 0.0,
                radial: dominant[i],
            };
            out.touched.push(i as u32);
        } else if free[i] > 0.0 {
            out.grid.cells[i] = MeasurementCell {
                m_sd: 0.0,
                m_f: free[i],
                radial: None,
            };
            out.touched.push(i as u32);
        }
    }
    out
}

/// Amanatides–Woo traversal of the cells under a ray segment, visiting
/// each cell with its entry distance.
fn traverse_ray(
    spec: &GridSpec,
    origin: Vec2,
    dir: Vec2,
    max_dist: f64,
    mut visit: impl FnMut(CellIdx, f64),
) {
    if max_dist <= 0.0 {
        return;
    }
    let n = spec.cells_per_side() as i64;
    let res = spec.resolution;
    // Clip the segment start to the window.
    let mut t = 0.0f64;
    let ox = (origin.x - spec.origin.x) / res;
    let oy = (origin.y - spec.origin.y) / res;
    if !(0.0..n as f64).contains(&ox) || !(0.0..n as f64).contains(&oy) {
        // Sensor outside the window: advance to the window boundary.
        let (mut t_enter, mut t_exit) = (0.0f64, max_dist);
        for (o, d, size) in [
            (origin.x - spec.origin.x, dir.x, spec.edge_length),
            (origin.y - spec.origin.y, dir.y, spec.edge_length),
        ] {
            if d.abs() < 1e-12 {
                if o < 0.0 || o > size {
                    return;
                }
            } else {
                let t1 = (0.0 - o) / d;
                let t2 = (size - o) / d;
                let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                t_enter = t_enter.max(lo);
                t_exit = t_exit.min(hi);
            }
        }
        if t_enter >= t_exit {
            return;
        }
        t = t_enter + 1e-9;
    }

    let start = origin + dir.scale(t);
    let mut ix = ((start.x - spec.origin.x) / res).floor() as i64;
    let mut iy = ((start.y - spec.origin.y) / res).floor() as i64;
    if ix < 0 || iy < 0 || ix >= n || iy >= n {
        return;
    }
    let step_x: i64 = if dir.x > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dir.y > 0.0 { 1 } else { -1 };
    let next_bound = |i: i64, step: i64, o: f64| -> f64 {
        let edge = spec_edge(i, step);
        edge * res - o // distance in world units along the axis
    };
    let inv_dx = if dir.x.abs() < 1e-15 { f64::INFINITY } else { 1.0 / dir.x };
    let inv_dy = if dir.y.abs() < 1e-15 { f64::INFINITY } else { 1.0 / dir.y };
    let mut t_max_x = if inv_dx.is_infinite() {
        f64::INFINITY
    } else {
        t + next_bound(ix, step_x, start.x - spec.origin.x) * inv_dx
    };
    let mut t_max_y = if inv_dy.is_infinite() {
        f64::INFINITY
    } else {
        t + next_bound(iy, step_y, start.y - spec.origin.y) * inv_dy
    };
    let t_delta_x = (res * inv_dx).abs();
    let t_delta_y = (res * inv_dy).abs();

    loop {
        visit(CellIdx::new(ix as u32, iy as u32), t);
        if t_max_x < t_max_y {
            t = t_max_x;
            t_max_x += t_delta_x;
            ix += step_x;
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            iy += step_y;
        }
        if t > max_dist || ix < 0 || iy < 0 || ix >= n || iy >= n {
            return;
        }
    }
}

fn spec_edge(i: i64, step: i64) -> f64 {
    if step > 0 {
        (i + 1) as f64
    } else {
        i as f64
    }
}

fn clip_box(spec: &GridSpec, lo: Vec2, hi: Vec2) -> Option<(CellIdx, CellIdx)> {
    let n = spec.cells_per_side() as i64;
    let lo_x = ((lo.x - spec.origin.x) / spec.resolution).floor() as i64;
    let lo_y = ((lo.y - spec.origin.y) / spec.resolution).floor() as i64;
    let hi_x = ((hi.x - spec.origin.x) / spec.resolution).floor() as i64;
    let hi_y = ((hi.y - spec.origin.y) / spec.resolution).floor() as i64;
    if hi_x < 0 || hi_y < 0 || lo_x >= n || lo_y >= n {
        return None;
    }
    Some((
        CellIdx::new(lo_x.max(0) as u32, lo_y.max(0) as u32),
        CellIdx::new(hi_x.min(n - 1) as u32, hi_y.min(n - 1) as u32),
    ))
}

/// Fuse per-sensor measurement grids cell-wise with Dempster's rule.
/// The fold runs in ascending sensor-id order regardless of input order,
/// so floating-point non-associativity cannot make runs diverge. Radial
/// observations keep the most decisive score (largest distance from 0.5).
pub fn fuse_sensor_grids(mut grids: Vec<MeasurementGrid>) -> MeasurementGrid {
    assert!(!grids.is_empty(), "nothing to fuse");
    grids.sort_by_key(|g| g.sensor_id);
    for g in &grids[1..] {
        assert_eq!(
            g.grid.spec, grids[0].grid.spec,
            "measurement grids must share one GridSpec"
        );
    }
    if grids.len() == 1 {
        return grids.pop().unwrap();
    }

    let spec = grids[0].grid.spec;
    let mut out = MeasurementGrid::vacuous(spec, grids[0].ego_velocity);
    out.dropped_detections = grids.iter().map(|g| g.dropped_detections).sum();

    let mut union: Vec<u32> = grids.iter().flat_map(|g| g.touched.iter().copied()).collect();
    union.sort_unstable();
    union.dedup();

    for &i in &union {
        let idx = i as usize;
        let mut mass = EvidenceMass::UNKNOWN;
        let mut radial: Option<RadialObservation> = None;
        for g in &grids {
            let cell = &g.grid.cells[idx];
            match dempster_combine(&mass, &cell.mass()) {
                Ok(m) => mass = m,
                Err(_) => {
                    mass = EvidenceMass::UNKNOWN;
                    out.conflict_fallbacks += 1;
                }
            }
            if let Some(obs) = cell.radial {
                let better = match radial {
                    None => true,
                    Some(cur) => (obs.b_rsp - 0.5).abs() > (cur.b_rsp - 0.5).abs(),
                };
                if better {
                    radial = Some(obs);
                }
            }
        }
        debug_assert!(mass.m_s == 0.0 && mass.m_d == 0.0);
        out.grid.cells[idx] = MeasurementCell {
            m_sd: mass.m_sd,
            m_f: mass.m_f,
            radial,
        };
        out.touched.push(i);
    }
    out
}
