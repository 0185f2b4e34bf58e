//! Grid geometry and the evidential cell types shared by every stage.
//!
//! The map is a square window of cells, axis-aligned with the world frame,
//! that follows the ego vehicle by shifting whole cells at a time. Particles
//! are stored in continuous world coordinates, so a window shift never
//! resamples or distorts them; it only changes which cells are in view.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::GridError;

/// Belief masses over the occupancy frame of discernment {free, static,
/// dynamic}. The five tracked hypotheses are the three singletons, the
/// union {static, dynamic} (occupied, class unknown) and the full frame
/// (no information). Masses are nonnegative and sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceMass {
    /// Mass on free space.
    pub m_f: f64,
    /// Mass on static occupancy.
    pub m_s: f64,
    /// Mass on dynamic occupancy.
    pub m_d: f64,
    /// Mass on occupancy of unknown class, the set {static, dynamic}.
    pub m_sd: f64,
    /// Residual uncertainty mass on the whole frame.
    pub m_omega: f64,
}

/// Tolerance for the unit-sum invariant of a mass function.
pub const MASS_SUM_TOL: f64 = 1e-9;

impl EvidenceMass {
    /// The vacuous mass function: all mass on the full frame. This is the
    /// exact identity element of every combination rule in the crate.
    pub const UNKNOWN: EvidenceMass = EvidenceMass {
        m_f: 0.0,
        m_s: 0.0,
        m_d: 0.0,
        m_sd: 0.0,
        m_omega: 1.0,
    };

    pub fn new(m_f: f64, m_s: f64, m_d: f64, m_sd: f64, m_omega: f64) -> Result<Self, GridError> {
        let m = EvidenceMass {
            m_f,
            m_s,
            m_d,
            m_sd,
            m_omega,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (name, v) in [
            ("m_f", self.m_f),
            ("m_s", self.m_s),
            ("m_d", self.m_d),
            ("m_sd", self.m_sd),
            ("m_omega", self.m_omega),
        ] {
            if !(0.0..=1.0 + MASS_SUM_TOL).contains(&v) || v.is_nan() {
                return Err(GridError::MassOutOfRange { name, value: v });
            }
        }
        let sum = self.sum();
        if (sum - 1.0).abs() > MASS_SUM_TOL {
            return Err(GridError::MassSum { sum });
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.m_f + self.m_s + self.m_d + self.m_sd + self.m_omega
    }

    /// True when all masses are in range and sum to one within `MASS_SUM_TOL`.
    pub fn is_normalized(&self) -> bool {
        self.validate().is_ok()
    }

    /// Channels in fixed order (m_f, m_s, m_d, m_sd, m_omega), matching the
    /// binary snapshot layout.
    pub fn channels(&self) -> [f64; 5] {
        [self.m_f, self.m_s, self.m_d, self.m_sd, self.m_omega]
    }
}

impl Default for EvidenceMass {
    fn default() -> Self {
        EvidenceMass::UNKNOWN
    }
}

/// First and second velocity moments of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityMoments {
    pub v_x: f64,
    pub v_y: f64,
    pub var_vx: f64,
    pub var_vy: f64,
    pub cov_vxvy: f64,
}

impl VelocityMoments {
    /// Valid covariance matrix: nonnegative variances and
    /// cov² ≤ var_vx·var_vy within tolerance.
    pub fn is_valid_covariance(&self) -> bool {
        self.var_vx >= -MASS_SUM_TOL
            && self.var_vy >= -MASS_SUM_TOL
            && self.cov_vxvy * self.cov_vxvy <= self.var_vx * self.var_vy + MASS_SUM_TOL
    }
}

/// One cell of the full map: five evidence channels plus the velocity
/// moments. `moments` is `None` until the cell held at least one classified
/// particle at the last moment-estimation pass; an explicit absence rather
/// than zeros, so empty cells never masquerade as zero-velocity ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DogmCell {
    pub mass: EvidenceMass,
    pub moments: Option<VelocityMoments>,
}

impl Default for DogmCell {
    fn default() -> Self {
        DogmCell {
            mass: EvidenceMass::UNKNOWN,
            moments: None,
        }
    }
}

/// Motion class assigned to a particle once it is old enough.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParticleClass {
    Static,
    Dynamic,
    Unclassified,
}

/// One weighted track hypothesis: position and velocity in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pos: Vec2,
    pub vel: Vec2,
    /// Per-cell normalized weight; within a nonempty cell the weights sum
    /// to one after each full update.
    pub weight: f64,
    /// Update steps survived since birth.
    pub age: u32,
    pub class: ParticleClass,
}

impl Particle {
    pub fn new(pos: Vec2, vel: Vec2) -> Self {
        Particle {
            pos,
            vel,
            weight: 0.0,
            age: 0,
            class: ParticleClass::Unclassified,
        }
    }
}

/// One cell of the tracker: mixture weight plus its particle set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellMixture {
    /// Mixture weight in [0, 1]; governs how many particles survive
    /// resampling in this cell.
    pub lambda: f64,
    pub particles: Vec<Particle>,
}

impl CellMixture {
    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }
}

/// Minimal 2-D vector used for positions and velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    /// Unit vector at the given angle from +x.
    pub fn unit(angle: f64) -> Vec2 {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Planar pose: world position plus heading normalized to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Unit vector along the heading.
    pub fn forward(&self) -> Vec2 {
        Vec2::unit(self.heading)
    }
}

/// Wrap an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Integer index of a cell within the grid window; x is the column,
/// y the row, both zero-based at the window's min corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIdx {
    pub x: u32,
    pub y: u32,
}

impl CellIdx {
    pub fn new(x: u32, y: u32) -> Self {
        CellIdx { x, y }
    }

    /// Chebyshev (chessboard) distance between two cells.
    pub fn chebyshev(self, o: CellIdx) -> u32 {
        let dx = (self.x as i64 - o.x as i64).unsigned_abs();
        let dy = (self.y as i64 - o.y as i64).unsigned_abs();
        dx.max(dy) as u32
    }
}

/// Geometry of the map window plus the per-cell particle cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Side length of the square window in meters.
    pub edge_length: f64,
    /// Cell size in meters; `edge_length / resolution` must be integral.
    pub resolution: f64,
    /// Maximum particles per cell.
    pub k_max: usize,
    /// Pose of the window's min corner (cell (0,0) corner). The window is
    /// world-axis aligned, so the heading must be zero.
    pub origin: Pose,
}

impl Default for GridSpec {
    fn default() -> Self {
        // 50 m window at 0.2 m resolution, up to 50 particles per cell,
        // centered on the world origin.
        GridSpec {
            edge_length: 50.0,
            resolution: 0.2,
            k_max: 50,
            origin: Pose::new(-25.0, -25.0, 0.0),
        }
    }
}

impl GridSpec {
    /// Window centered on `center` with the given geometry.
    pub fn centered(center: Vec2, edge_length: f64, resolution: f64, k_max: usize) -> Self {
        GridSpec {
            edge_length,
            resolution,
            k_max,
            origin: Pose::new(center.x - edge_length / 2.0, center.y - edge_length / 2.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.edge_length <= 0.0 || self.resolution <= 0.0 {
            return Err(GridError::BadSpec("edge_length and resolution must be positive"));
        }
        let n = self.edge_length / self.resolution;
        if (n - n.round()).abs() > 1e-6 || n.round() < 1.0 {
            return Err(GridError::BadSpec(
                "edge_length must be a positive integer multiple of the resolution",
            ));
        }
        if self.k_max == 0 {
            return Err(GridError::BadSpec("k_max must be at least 1"));
        }
        if self.origin.heading != 0.0 {
            return Err(GridError::BadSpec("grid window must be world-axis aligned (heading 0)"));
        }
        Ok(())
    }

    /// Cells per side.
    pub fn cells_per_side(&self) -> usize {
        (self.edge_length / self.resolution).round() as usize
    }

    /// Total cell count of the window.
    pub fn cell_count(&self) -> usize {
        let n = self.cells_per_side();
        n * n
    }

    pub fn linear_index(&self, c: CellIdx) -> usize {
        c.y as usize * self.cells_per_side() + c.x as usize
    }

    pub fn from_linear(&self, i: usize) -> CellIdx {
        let n = self.cells_per_side();
        CellIdx::new((i % n) as u32, (i / n) as u32)
    }

    /// World coordinates of a cell's center.
    pub fn cell_center(&self, c: CellIdx) -> Vec2 {
        Vec2::new(
            self.origin.x + (c.x as f64 + 0.5) * self.resolution,
            self.origin.y + (c.y as f64 + 0.5) * self.resolution,
        )
    }

    /// Center cell of the window.
    pub fn center_cell(&self) -> CellIdx {
        let n = self.cells_per_side() as u32;
        CellIdx::new(n / 2, n / 2)
    }
}

/// Map a world position to the cell containing it, or `None` when the
/// position lies outside the window.
pub fn world_to_cell(p: Vec2, spec: &GridSpec) -> Option<CellIdx> {
    let n = spec.cells_per_side() as i64;
    let ix = ((p.x - spec.origin.x) / spec.resolution).floor() as i64;
    let iy = ((p.y - spec.origin.y) / spec.resolution).floor() as i64;
    if ix < 0 || iy < 0 || ix >= n || iy >= n {
        None
    } else {
        Some(CellIdx::new(ix as u32, iy as u32))
    }
}

/// Dense square grid of per-cell values sharing one `GridSpec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub spec: GridSpec,
    pub cells: Vec<T>,
}

impl<T: Clone + Default> Grid<T> {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.cell_count();
        Grid {
            spec,
            cells: vec![T::default(); n],
        }
    }

    pub fn get(&self, c: CellIdx) -> &T {
        &self.cells[self.spec.linear_index(c)]
    }

    pub fn get_mut(&mut self, c: CellIdx) -> &mut T {
        let i = self.spec.linear_index(c);
        &mut self.cells[i]
    }

    /// Iterate (index, value) over all cells in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (CellIdx, &T)> {
        let spec = self.spec;
        self.cells.iter().enumerate().map(move |(i, t)| (spec.from_linear(i), t))
    }

    /// Shift the window by whole cells: the cell that was at
    /// (x + dx, y + dy) moves to (x, y); vacated cells take `fill`.
    /// The window origin advances by (dx, dy) cells in world space.
    pub fn shift(&mut self, dx: i64, dy: i64, fill: T) {
        if dx == 0 && dy == 0 {
            return;
        }
        let n = self.spec.cells_per_side() as i64;
        let mut next = vec![fill; self.cells.len()];
        for y in 0..n {
            let sy = y + dy;
            if sy < 0 || sy >= n {
                continue;
            }
            for x in 0..n {
                let sx = x + dx;
                if sx < 0 || sx >= n {
                    continue;
                }
                next[(y * n + x) as usize] =
                    std::mem::take(&mut self.cells[(sy * n + sx) as usize]);
            }
        }
        self.cells = next;
        self.spec.origin.x += dx as f64 * self.spec.resolution;
        self.spec.origin.y += dy as f64 * self.spec.resolution;
    }
}

impl<T> Grid<T>
where
    T: Clone + Default,
{
    /// Reset every cell to the default value without changing geometry.
    pub fn clear(&mut self) {
        for c in self.cells.iter_mut() {
            *c = T::default();
        }
    }
}

/// Whole-cell shift that keeps `new_ego` inside the central cell of the
/// window: exactly the cell offset between the ego's current cell and the
/// center, so the shifted window always satisfies
/// `world_to_cell(ego) == center_cell`. (0, 0) for sub-cell motion.
pub fn recenter_shift(spec: &GridSpec, new_ego: Vec2) -> (i64, i64) {
    let half = spec.cells_per_side() as i64 / 2;
    let cx = ((new_ego.x - spec.origin.x) / spec.resolution).floor() as i64;
    let cy = ((new_ego.y - spec.origin.y) / spec.resolution).floor() as i64;
    (cx - half, cy - half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec_at_origin() -> GridSpec {
        GridSpec {
            edge_length: 50.0,
            resolution: 0.2,
            k_max: 50,
            origin: Pose::new(0.0, 0.0, 0.0),
        }
    }

    #[test]
    fn world_to_cell_origin() {
        let spec = spec_at_origin();
        assert_eq!(world_to_cell(Vec2::new(0.0, 0.0), &spec), Some(CellIdx::new(0, 0)));
    }

    #[test]
    fn world_to_cell_offset() {
        // floor(0.30/0.2) = 1, floor(0.50/0.2) = 2
        let spec = spec_at_origin();
        assert_eq!(
            world_to_cell(Vec2::new(0.30, 0.50), &spec),
            Some(CellIdx::new(1, 2))
        );
    }

    #[test]
    fn world_to_cell_out_of_grid() {
        let spec = spec_at_origin();
        assert_eq!(world_to_cell(Vec2::new(50.1, 0.0), &spec), None);
        assert_eq!(world_to_cell(Vec2::new(-0.1, 3.0), &spec), None);
    }

    #[test]
    fn cell_center_roundtrip_all_cells() {
        let spec = GridSpec {
            edge_length: 5.0,
            resolution: 0.5,
            k_max: 10,
            origin: Pose::new(-2.5, -2.5, 0.0),
        };
        for y in 0..spec.cells_per_side() as u32 {
            for x in 0..spec.cells_per_side() as u32 {
                let c = CellIdx::new(x, y);
                assert_eq!(world_to_cell(spec.cell_center(c), &spec), Some(c));
            }
        }
    }

    #[test]
    fn evidence_mass_validation() {
        assert!(EvidenceMass::UNKNOWN.is_normalized());
        assert!(EvidenceMass::new(0.2, 0.3, 0.1, 0.15, 0.25).is_ok());
        assert!(EvidenceMass::new(0.5, 0.5, 0.5, 0.0, 0.0).is_err());
        assert!(EvidenceMass::new(-0.1, 0.6, 0.2, 0.2, 0.1).is_err());
    }

    #[test]
    fn pose_heading_normalized() {
        let p = Pose::new(0.0, 0.0, 3.0 * PI);
        assert_relative_eq!(p.heading, PI, epsilon = 1e-12);
        let q = Pose::new(0.0, 0.0, -PI);
        assert_relative_eq!(q.heading, PI, epsilon = 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::default().validate().is_ok());
        let bad = GridSpec {
            edge_length: 50.1,
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
        let tilted = GridSpec {
            origin: Pose::new(0.0, 0.0, 0.3),
            ..GridSpec::default()
        };
        assert!(tilted.validate().is_err());
    }

    #[test]
    fn recenter_subcell_motion_is_identity() {
        let spec = GridSpec::default();
        let center = spec.cell_center(spec.center_cell());
        let moved = Vec2::new(center.x + 0.09, center.y - 0.05);
        assert_eq!(recenter_shift(&spec, moved), (0, 0));
    }

    #[test]
    fn recenter_one_meter_shifts_five_cells() {
        let spec = GridSpec::default();
        let center = spec.cell_center(spec.center_cell());
        let moved = Vec2::new(center.x + 1.0, center.y);
        assert_eq!(recenter_shift(&spec, moved), (5, 0));
    }

    #[test]
    fn recenter_stationary_is_identity() {
        let spec = GridSpec::default();
        let center = spec.cell_center(spec.center_cell());
        assert_eq!(recenter_shift(&spec, center), (0, 0));
    }

    #[test]
    fn shift_moves_contents_and_origin() {
        let spec = GridSpec {
            edge_length: 1.0,
            resolution: 0.2,
            k_max: 5,
            origin: Pose::new(0.0, 0.0, 0.0),
        };
        let mut g: Grid<u32> = Grid::new(spec);
        *g.get_mut(CellIdx::new(3, 2)) = 7;
        g.shift(1, 0, 0);
        assert_eq!(*g.get(CellIdx::new(2, 2)), 7);
        assert_relative_eq!(g.spec.origin.x, 0.2);
        // world position of the payload is unchanged
        let c = world_to_cell(Vec2::new(0.7, 0.5), &g.spec).unwrap();
        assert_eq!(*g.get(c), 7);
    }

    #[test]
    fn shift_back_restores_in_window_cells() {
        let spec = GridSpec {
            edge_length: 2.0,
            resolution: 0.5,
            k_max: 5,
            origin: Pose::new(0.0, 0.0, 0.0),
        };
        let mut g: Grid<u32> = Grid::new(spec);
        for (i, c) in g.cells.iter_mut().enumerate() {
            *c = i as u32;
        }
        let orig = g.clone();
        g.shift(1, -1, 0);
        g.shift(-1, 1, 0);
        assert_eq!(g.spec, orig.spec);
        let n = spec.cells_per_side();
        for y in 0..n {
            for x in 0..n {
                let c = CellIdx::new(x as u32, y as u32);
                // cells that stayed in the window both ways must be intact
                if x >= 1 && y < n - 1 {
                    assert_eq!(g.get(c), orig.get(c));
                }
            }
        }
    }
}
