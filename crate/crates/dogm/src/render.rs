//! PPM renders of map and measurement grids.
//!
//! Color convention: free space is light gray scaling with its mass;
//! static and class-unknown occupancy darken toward black; unknown area is
//! dark gray; dynamic occupancy takes its hue from the cell's velocity
//! orientation on the color circle (zero radians anchors at red), drawn at
//! full saturation once the dynamic mass exceeds one half. Rows are
//! flipped so +y points up in the image. Renders are pure functions of the
//! grid, hence byte-identical across runs.

use std::io::Write;

use crate::grid::{DogmCell, Grid};
use crate::measurement::MeasurementGrid;

/// Luminance of a fully free cell.
const FREE_LEVEL: f64 = 210.0;
/// Luminance of a fully unknown cell.
const UNKNOWN_LEVEL: f64 = 90.0;

/// Color of one map cell under the documented palette.
pub fn cell_color(cell: &DogmCell) -> [u8; 3] {
    let m = &cell.mass;
    let hue_rgb = match cell.moments {
        Some(mom) if m.m_d > 0.0 => {
            let angle = mom.v_y.atan2(mom.v_x);
            hue_to_rgb(angle)
        }
        // dynamic mass without a velocity estimate renders as occupied
        _ => [0.0, 0.0, 0.0],
    };
    if m.m_d > 0.5 && cell.moments.is_some() {
        return [hue_rgb[0] as u8, hue_rgb[1] as u8, hue_rgb[2] as u8];
    }
    let base = m.m_f * FREE_LEVEL + m.m_omega * UNKNOWN_LEVEL; // m_s, m_sd contribute black
    let mut out = [0u8; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let v = base + m.m_d * hue_rgb[k];
        *o = v.round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Map an orientation in radians to a fully saturated RGB color on the
/// color circle; 0 rad is red, advancing counter-clockwise.
fn hue_to_rgb(angle: f64) -> [f64; 3] {
    let h = angle.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU * 6.0;
    let x = (1.0 - ((h % 2.0) - 1.0).abs()) * 255.0;
    let c = 255.0;
    match h as u32 {
        0 => [c, x, 0.0],
        1 => [x, c, 0.0],
        2 => [0.0, c, x],
        3 => [0.0, x, c],
        4 => [x, 0.0, c],
        _ => [c, 0.0, x],
    }
}

/// Render a map grid as a binary PPM (P6), one pixel per cell.
pub fn render_dogm_ppm<W: Write>(out: &mut W, dogm: &Grid<DogmCell>) -> std::io::Result<()> {
    let n = dogm.spec.cells_per_side();
    write!(out, "P6\n{n} {n}\n255\n")?;
    let mut buf = Vec::with_capacity(n * n * 3);
    for row in (0..n).rev() {
        for col in 0..n {
            let cell = &dogm.cells[row * n + col];
            buf.extend_from_slice(&cell_color(cell));
        }
    }
    out.write_all(&buf)
}

/// Render a measurement grid: free mass lightens, occupied mass darkens,
/// vacuous cells stay dark gray.
pub fn render_measurement_ppm<W: Write>(
    out: &mut W,
    grid: &MeasurementGrid,
) -> std::io::Result<()> {
    let n = grid.grid.spec.cells_per_side();
    write!(out, "P6\n{n} {n}\n255\n")?;
    let mut buf = Vec::with_capacity(n * n * 3);
    for row in (0..n).rev() {
        for col in 0..n {
            let cell = &grid.grid.cells[row * n + col];
            let v = cell.m_f * FREE_LEVEL + cell.m_omega() * UNKNOWN_LEVEL;
            let v = v.round().clamp(0.0, 255.0) as u8;
            buf.extend_from_slice(&[v, v, v]);
        }
    }
    out.write_all(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellIdx, EvidenceMass, GridSpec, Pose, VelocityMoments};

    fn small_grid() -> Grid<DogmCell> {
        Grid::new(GridSpec {
            edge_length: 2.0,
            resolution: 0.5,
            k_max: 5,
            origin: Pose::new(0.0, 0.0, 0.0),
        })
    }

    #[test]
    fn all_unknown_is_uniform_dark_gray() {
        let g = small_grid();
        let mut bytes = Vec::new();
        render_dogm_ppm(&mut bytes, &g).unwrap();
        let header_end = bytes.iter().filter(|&&b| b == b'\n').count();
        assert!(header_end >= 3);
        let pixels = &bytes[bytes.len() - 4 * 4 * 3..];
        for px in pixels.chunks(3) {
            assert_eq!(px, [UNKNOWN_LEVEL as u8; 3]);
        }
    }

    #[test]
    fn free_cell_is_light_gray() {
        let cell = DogmCell {
            mass: EvidenceMass::new(1.0, 0.0, 0.0, 0.0, 0.0).unwrap(),
            moments: None,
        };
        assert_eq!(cell_color(&cell), [FREE_LEVEL as u8; 3]);
    }

    #[test]
    fn dominant_dynamic_mass_uses_hue_circle() {
        // velocity due +x anchors at red
        let cell = DogmCell {
            mass: EvidenceMass::new(0.0, 0.0, 0.9, 0.0, 0.1).unwrap(),
            moments: Some(VelocityMoments {
                v_x: 4.0,
                v_y: 0.0,
                var_vx: 0.1,
                var_vy: 0.1,
                cov_vxvy: 0.0,
            }),
        };
        assert_eq!(cell_color(&cell), [255, 0, 0]);
        // due +y is a third of the circle away
        let cell_up = DogmCell {
            moments: Some(VelocityMoments {
                v_x: 0.0,
                v_y: 4.0,
                var_vx: 0.1,
                var_vy: 0.1,
                cov_vxvy: 0.0,
            }),
            ..cell
        };
        let c = cell_color(&cell_up);
        assert!(c[1] > 200, "expected green-ish, got {c:?}");
    }

    #[test]
    fn static_cell_is_black() {
        let cell = DogmCell {
            mass: EvidenceMass::new(0.0, 1.0, 0.0, 0.0, 0.0).unwrap(),
            moments: None,
        };
        assert_eq!(cell_color(&cell), [0, 0, 0]);
    }

    #[test]
    fn render_is_deterministic() {
        let mut g = small_grid();
        *g.get_mut(CellIdx::new(1, 1)) = DogmCell {
            mass: EvidenceMass::new(0.2, 0.3, 0.1, 0.1, 0.3).unwrap(),
            moments: Some(VelocityMoments {
                v_x: -2.0,
                v_y: 1.0,
                var_vx: 0.5,
                var_vy: 0.5,
                cov_vxvy: 0.0,
            }),
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        render_dogm_ppm(&mut a, &g).unwrap();
        render_dogm_ppm(&mut b, &g).unwrap();
        assert_eq!(a, b);
    }
}
