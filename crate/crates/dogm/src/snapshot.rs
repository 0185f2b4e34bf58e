//! Binary artifact formats: the 10-channel map snapshot, the flat
//! measurement-grid layout, and the versioned tracker-state snapshot used
//! for regression comparisons. All integers are little-endian; cell
//! payloads are row-major.

use std::io::{Read, Write};

use crate::error::SnapshotError;
use crate::grid::{
    CellMixture, DogmCell, EvidenceMass, Grid, GridSpec, Particle, ParticleClass, Pose,
    VelocityMoments,
};
use crate::measurement::MeasurementGrid;
use crate::tracker::TrackerState;

const DOGM_MAGIC: [u8; 4] = *b"DOGM";
const DOGM_VERSION: u32 = 1;
const TRACKER_MAGIC: [u8; 4] = *b"DTRK";
const TRACKER_VERSION: u32 = 1;

/// Channel count of one map cell: five masses plus five moment channels.
pub const DOGM_CHANNELS: usize = 10;

/// Write a map snapshot: header (magic, version, geometry, step, seed)
/// followed by ten 32-bit float channels per cell in row-major order.
/// Undefined velocity channels are NaN.
pub fn write_dogm_snapshot<W: Write>(
    out: &mut W,
    dogm: &Grid<DogmCell>,
    step: u64,
    seed: u64,
) -> std::io::Result<()> {
    out.write_all(&DOGM_MAGIC)?;
    out.write_all(&DOGM_VERSION.to_le_bytes())?;
    out.write_all(&(dogm.spec.cells_per_side() as u32).to_le_bytes())?;
    out.write_all(&(dogm.spec.resolution as f32).to_le_bytes())?;
    out.write_all(&(dogm.spec.k_max as u32).to_le_bytes())?;
    out.write_all(&(dogm.spec.origin.x as f32).to_le_bytes())?;
    out.write_all(&(dogm.spec.origin.y as f32).to_le_bytes())?;
    out.write_all(&step.to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(dogm.cells.len() * DOGM_CHANNELS * 4);
    for cell in &dogm.cells {
        for v in cell.mass.channels() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        match cell.moments {
            Some(m) => {
                for v in [m.v_x, m.v_y, m.var_vx, m.var_vy, m.cov_vxvy] {
                    buf.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
            None => {
                for _ in 0..5 {
                    buf.extend_from_slice(&f32::NAN.to_le_bytes());
                }
            }
        }
    }
    out.write_all(&buf)
}

/// Decoded map snapshot.
#[derive(Debug)]
pub struct DogmSnapshot {
    pub grid: Grid<DogmCell>,
    pub step: u64,
    pub seed: u64,
}

pub fn read_dogm_snapshot<R: Read>(input: &mut R) -> Result<DogmSnapshot, SnapshotError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != DOGM_MAGIC {
        return Err(SnapshotError::BadMagic {
            found: magic,
            expected: DOGM_MAGIC,
        });
    }
    let version = read_u32(input)?;
    if version != DOGM_VERSION {
        return Err(SnapshotError::BadVersion(version));
    }
    let n = read_u32(input)? as usize;
    let resolution = read_f32(input)? as f64;
    let k_max = read_u32(input)? as usize;
    let origin_x = read_f32(input)? as f64;
    let origin_y = read_f32(input)? as f64;
    let step = read_u64(input)?;
    let seed = read_u64(input)?;
    let spec = GridSpec {
        edge_length: n as f64 * resolution,
        resolution,
        k_max,
        origin: Pose::new(origin_x, origin_y, 0.0),
    };
    let mut grid: Grid<DogmCell> = Grid::new(spec);
    let mut buf = vec![0u8; n * n * DOGM_CHANNELS * 4];
    input
        .read_exact(&mut buf)
        .map_err(|_| SnapshotError::Truncated("cell payload"))?;
    for (i, chunk) in buf.chunks_exact(DOGM_CHANNELS * 4).enumerate() {
        let f = |k: usize| {
            f32::from_le_bytes([chunk[k * 4], chunk[k * 4 + 1], chunk[k * 4 + 2], chunk[k * 4 + 3]])
                as f64
        };
        let mass = EvidenceMass {
            m_f: f(0),
            m_s: f(1),
            m_d: f(2),
            m_sd: f(3),
            m_omega: f(4),
        };
        let moments = if f(5).is_nan() {
            None
        } else {
            Some(VelocityMoments {
                v_x: f(5),
                v_y: f(6),
                var_vx: f(7),
                var_vy: f(8),
                cov_vxvy: f(9),
            })
        };
        grid.cells[i] = DogmCell { mass, moments };
    }
    Ok(DogmSnapshot { grid, step, seed })
}

/// Flat measurement-grid layout: five 32-bit float masses per cell,
/// row-major, no header (geometry travels with the run configuration).
pub fn write_measurement_grid<W: Write>(
    out: &mut W,
    grid: &MeasurementGrid,
) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(grid.grid.cells.len() * 5 * 4);
    for cell in &grid.grid.cells {
        for v in cell.mass().channels() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)
}

/// Read the flat measurement layout back as mass tuples (m_f, m_sd,
/// m_omega per cell).
pub fn read_measurement_masses<R: Read>(
    input: &mut R,
    cell_count: usize,
) -> Result<Vec<(f64, f64, f64)>, SnapshotError> {
    let mut buf = vec![0u8; cell_count * 5 * 4];
    input
        .read_exact(&mut buf)
        .map_err(|_| SnapshotError::Truncated("measurement payload"))?;
    Ok(buf
        .chunks_exact(5 * 4)
        .map(|chunk| {
            let f = |k: usize| {
                f32::from_le_bytes([
                    chunk[k * 4],
                    chunk[k * 4 + 1],
                    chunk[k * 4 + 2],
                    chunk[k * 4 + 3],
                ]) as f64
            };
            (f(0), f(3), f(4))
        })
        .collect())
}

/// Versioned tracker-state snapshot for regression tests: full-precision
/// particle states per cell.
pub fn write_tracker_snapshot<W: Write>(
    out: &mut W,
    state: &TrackerState,
    seed: u64,
) -> std::io::Result<()> {
    out.write_all(&TRACKER_MAGIC)?;
    out.write_all(&TRACKER_VERSION.to_le_bytes())?;
    out.write_all(&(state.grid.spec.cells_per_side() as u32).to_le_bytes())?;
    out.write_all(&state.grid.spec.resolution.to_le_bytes())?;
    out.write_all(&(state.grid.spec.k_max as u32).to_le_bytes())?;
    out.write_all(&state.grid.spec.origin.x.to_le_bytes())?;
    out.write_all(&state.grid.spec.origin.y.to_le_bytes())?;
    out.write_all(&state.step.to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    for cell in &state.grid.cells {
        let mut buf = Vec::with_capacity(16 + cell.particles.len() * 45);
        buf.extend_from_slice(&cell.lambda.to_le_bytes());
        buf.extend_from_slice(&(cell.particles.len() as u32).to_le_bytes());
        for p in &cell.particles {
            for v in [p.pos.x, p.pos.y, p.vel.x, p.vel.y, p.weight] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.extend_from_slice(&p.age.to_le_bytes());
            buf.push(match p.class {
                ParticleClass::Static => 0,
                ParticleClass::Dynamic => 1,
                ParticleClass::Unclassified => 2,
            });
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

/// Decoded tracker snapshot: cell mixtures plus the recorded step/seed.
#[derive(Debug)]
pub struct TrackerSnapshot {
    pub spec: GridSpec,
    pub cells: Vec<CellMixture>,
    pub step: u64,
    pub seed: u64,
}

pub fn read_tracker_snapshot<R: Read>(input: &mut R) -> Result<TrackerSnapshot, SnapshotError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != TRACKER_MAGIC {
        return Err(SnapshotError::BadMagic {
            found: magic,
            expected: TRACKER_MAGIC,
        });
    }
    let version = read_u32(input)?;
    if version != TRACKER_VERSION {
        return Err(SnapshotError::BadVersion(version));
    }
    let n = read_u32(input)? as usize;
    let resolution = read_f64(input)?;
    let k_max = read_u32(input)? as usize;
    let origin_x = read_f64(input)?;
    let origin_y = read_f64(input)?;
    let step = read_u64(input)?;
    let seed = read_u64(input)?;
    let spec = GridSpec {
        edge_length: n as f64 * resolution,
        resolution,
        k_max,
        origin: Pose::new(origin_x, origin_y, 0.0),
    };
    let mut cells = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let lambda = read_f64(input)?;
        let count = read_u32(input)? as usize;
        let mut particles = Vec::with_capacity(count);
        for _ in 0..count {
            let pos_x = read_f64(input)?;
            let pos_y = read_f64(input)?;
            let vel_x = read_f64(input)?;
            let vel_y = read_f64(input)?;
            let weight = read_f64(input)?;
            let age = read_u32(input)?;
            let mut class_byte = [0u8; 1];
            input.read_exact(&mut class_byte)?;
            let class = match class_byte[0] {
                0 => ParticleClass::Static,
                1 => ParticleClass::Dynamic,
                _ => ParticleClass::Unclassified,
            };
            particles.push(Particle {
                pos: crate::grid::Vec2::new(pos_x, pos_y),
                vel: crate::grid::Vec2::new(vel_x, vel_y),
                weight,
                age,
                class,
            });
        }
        cells.push(CellMixture { lambda, particles });
    }
    Ok(TrackerSnapshot {
        spec,
        cells,
        step,
        seed,
    })
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, SnapshotError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64, SnapshotError> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32<R: Read>(input: &mut R) -> Result<f32, SnapshotError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64, SnapshotError> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellIdx, Vec2};

    fn small_spec() -> GridSpec {
        GridSpec {
            edge_length: 2.0,
            resolution: 0.5,
            k_max: 5,
            origin: Pose::new(-1.0, -1.0, 0.0),
        }
    }

    #[test]
    fn dogm_snapshot_roundtrip_bytes() {
        let mut g: Grid<DogmCell> = Grid::new(small_spec());
        *g.get_mut(CellIdx::new(1, 2)) = DogmCell {
            mass: EvidenceMass::new(0.1, 0.2, 0.3, 0.1, 0.3).unwrap(),
            moments: Some(VelocityMoments {
                v_x: -5.5,
                v_y: 0.25,
                var_vx: 0.5,
                var_vy: 0.25,
                cov_vxvy: 0.01,
            }),
        };
        let mut bytes = Vec::new();
        write_dogm_snapshot(&mut bytes, &g, 42, 7).unwrap();
        let snap = read_dogm_snapshot(&mut bytes.as_slice()).unwrap();
        assert_eq!(snap.step, 42);
        assert_eq!(snap.seed, 7);
        assert_eq!(snap.grid.spec.cells_per_side(), 4);
        // decoded cells re-encode to the identical byte stream
        let mut again = Vec::new();
        write_dogm_snapshot(&mut again, &snap.grid, snap.step, snap.seed).unwrap();
        assert_eq!(bytes, again);
        // undefined moments survive as undefined
        assert!(snap.grid.get(CellIdx::new(0, 0)).moments.is_none());
        assert!(snap.grid.get(CellIdx::new(1, 2)).moments.is_some());
    }

    #[test]
    fn dogm_snapshot_bad_magic() {
        let bytes = b"NOPE0000000000000000000000000000".to_vec();
        match read_dogm_snapshot(&mut bytes.as_slice()) {
            Err(SnapshotError::BadMagic { .. }) => {}
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn dogm_snapshot_truncated() {
        let mut g: Grid<DogmCell> = Grid::new(small_spec());
        *g.get_mut(CellIdx::new(0, 0)) = DogmCell::default();
        let mut bytes = Vec::new();
        write_dogm_snapshot(&mut bytes, &g, 1, 1).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_dogm_snapshot(&mut bytes.as_slice()).is_err());
    }

    #[test]
    fn measurement_layout_roundtrip() {
        let spec = small_spec();
        let mut m = MeasurementGrid::vacuous(spec, Vec2::ZERO);
        m.grid.cells[5].m_sd = 0.75;
        m.grid.cells[9].m_f = 0.5;
        let mut bytes = Vec::new();
        write_measurement_grid(&mut bytes, &m).unwrap();
        assert_eq!(bytes.len(), spec.cell_count() * 5 * 4);
        let masses = read_measurement_masses(&mut bytes.as_slice(), spec.cell_count()).unwrap();
        assert_eq!(masses[5].1 as f32, 0.75);
        assert_eq!(masses[9].0 as f32, 0.5);
        assert_eq!(masses[0].2 as f32, 1.0);
    }

    #[test]
    fn tracker_snapshot_roundtrip() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 3);
        let i = spec.linear_index(CellIdx::new(2, 1));
        let mut p = Particle::new(Vec2::new(0.3, -0.2), Vec2::new(1.5, 0.0));
        p.weight = 0.5;
        p.age = 6;
        p.class = ParticleClass::Dynamic;
        state.grid.cells[i].particles.push(p);
        state.grid.cells[i].lambda = 0.8;
        let mut bytes = Vec::new();
        write_tracker_snapshot(&mut bytes, &state, 3).unwrap();
        let snap = read_tracker_snapshot(&mut bytes.as_slice()).unwrap();
        assert_eq!(snap.cells[i], state.grid.cells[i]);
        assert_eq!(snap.spec, spec);
    }
}
