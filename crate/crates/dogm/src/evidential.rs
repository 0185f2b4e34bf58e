//! From particles to the evidential map: classification, the instantaneous
//! map, unclassified-mass suppression, temporal combination, and per-cell
//! velocity moments.
//!
//! The temporal combination redistributes conflict instead of discarding
//! it: static-vs-dynamic disagreement becomes class-unknown occupancy,
//! free-vs-occupied disagreement becomes uncertainty. No renormalization
//! division is needed, so total mass is conserved exactly.

use crate::grid::{
    CellIdx, DogmCell, EvidenceMass, Grid, GridSpec, ParticleClass, VelocityMoments,
};
use crate::measurement::MeasurementGrid;
use crate::params::Params;
use crate::tracker::TrackerState;

/// Classify every particle by age and speed: too young stays unclassified,
/// otherwise static at or below the speed threshold and dynamic above it.
pub fn classify_particles(state: &mut TrackerState, params: &Params) {
    let active: Vec<u32> = state.active_cells().to_vec();
    for i in active {
        for p in state.grid.cells[i as usize].particles.iter_mut() {
            p.class = if p.age < params.a_min {
                ParticleClass::Unclassified
            } else if p.vel.norm() <= params.eps_v {
                ParticleClass::Static
            } else {
                ParticleClass::Dynamic
            };
        }
    }
}

/// Instantaneous evidential map from the current particle population.
/// Occupancy class masses split the cell's mixture weight by the summed
/// normalized weights of each particle class; the free mass comes from the
/// measurement scaled by the unoccupied share, so free evidence can appear
/// where no particles live.
pub fn derive_instant_map(state: &TrackerState, meas: &MeasurementGrid) -> Grid<EvidenceMass> {
    let spec = state.grid.spec;
    let mut out: Grid<EvidenceMass> = Grid::new(spec);

    // Free evidence everywhere the measurement saw free space.
    for &i in &meas.touched {
        let m_f_meas = meas.grid.cells[i as usize].m_f;
        if m_f_meas > 0.0 {
            out.cells[i as usize] = EvidenceMass {
                m_f: m_f_meas,
                m_s: 0.0,
                m_d: 0.0,
                m_sd: 0.0,
                m_omega: 1.0 - m_f_meas,
            };
        }
    }

    // Occupancy classes where particles live.
    for &i in state.active_cells() {
        let cell = &state.grid.cells[i as usize];
        if cell.particles.is_empty() {
            continue;
        }
        let lambda = cell.lambda.clamp(0.0, 1.0);
        let mut w_static = 0.0;
        let mut w_dynamic = 0.0;
        let mut w_unclassified = 0.0;
        for p in &cell.particles {
            match p.class {
                ParticleClass::Static => w_static += p.weight,
                ParticleClass::Dynamic => w_dynamic += p.weight,
                ParticleClass::Unclassified => w_unclassified += p.weight,
            }
        }
        let m_f_meas = meas.grid.cells[i as usize].m_f;
        let m_f = (1.0 - lambda) * m_f_meas;
        out.cells[i as usize] = EvidenceMass {
            m_f,
            m_s: lambda * w_static,
            m_d: lambda * w_dynamic,
            m_sd: lambda * w_unclassified,
            m_omega: (1.0 - lambda) * (1.0 - m_f_meas),
        };
    }
    out
}

/// Reassign unclassified-occupancy mass to uncertainty, cell-wise:
/// the unknown mass absorbs the class-unknown occupied mass. Newly
/// observed areas and spurious returns then raise uncertainty instead of
/// leaving occupancy artifacts. Idempotent.
pub fn suppress_unclassified(instant: &mut Grid<EvidenceMass>) {
    for m in instant.cells.iter_mut() {
        if m.m_sd != 0.0 {
            m.m_omega += m.m_sd;
            m.m_sd = 0.0;
        }
    }
}

/// Cell-level temporal combination of the accumulated map with the
/// (modified) instantaneous map. Agreeing intersections accumulate as in
/// Dempster's rule; the static-dynamic conflict products land on the
/// class-unknown occupied mass, free-occupied conflict products on the
/// unknown mass. All conflict mass is redistributed, none discarded, so
/// the output sums to one whenever both inputs do.
pub fn combine_masses(prev: &EvidenceMass, inst: &EvidenceMass) -> EvidenceMass {
    let a = prev;
    let b = inst;
    EvidenceMass {
        m_f: a.m_f * b.m_f + a.m_f * b.m_omega + a.m_omega * b.m_f,
        m_s: a.m_s * (b.m_s + b.m_sd + b.m_omega) + a.m_sd * b.m_s + a.m_omega * b.m_s,
        m_d: a.m_d * (b.m_d + b.m_sd + b.m_omega) + a.m_sd * b.m_d + a.m_omega * b.m_d,
        m_sd: a.m_sd * (b.m_sd + b.m_omega)
            + a.m_omega * b.m_sd
            + a.m_s * b.m_d
            + a.m_d * b.m_s,
        m_omega: a.m_omega * b.m_omega
            + a.m_f * (b.m_s + b.m_d + b.m_sd)
            + (a.m_s + a.m_d + a.m_sd) * b.m_f,
    }
}

/// Grid-wise combination; both grids must share one spec.
pub fn combine_maps(prev: &Grid<EvidenceMass>, instant: &Grid<EvidenceMass>) -> Grid<EvidenceMass> {
    assert_eq!(prev.spec, instant.spec, "maps must share one GridSpec");
    let mut out: Grid<EvidenceMass> = Grid::new(prev.spec);
    for (o, (a, b)) in out
        .cells
        .iter_mut()
        .zip(prev.cells.iter().zip(instant.cells.iter()))
    {
        *o = combine_masses(a, b);
    }
    out
}

/// Weighted first and second velocity moments per cell, using only
/// particles old enough to have converged. Cells with no qualifying
/// particle stay undefined.
pub fn estimate_moments(state: &TrackerState, params: &Params) -> Vec<Option<VelocityMoments>> {
    let mut out: Vec<Option<VelocityMoments>> = vec![None; state.grid.spec.cell_count()];
    for &i in state.active_cells() {
        let cell = &state.grid.cells[i as usize];
        let mut w_sum = 0.0;
        for p in &cell.particles {
            if p.age >= params.a_min {
                w_sum += p.weight;
            }
        }
        if w_sum <= 0.0 {
            continue;
        }
        let mut mean_x = 0.0;
        let mut mean_y = 0.0;
        for p in &cell.particles {
            if p.age >= params.a_min {
                mean_x += p.weight * p.vel.x;
                mean_y += p.weight * p.vel.y;
            }
        }
        mean_x /= w_sum;
        mean_y /= w_sum;
        let mut var_x = 0.0;
        let mut var_y = 0.0;
        let mut cov = 0.0;
        for p in &cell.particles {
            if p.age >= params.a_min {
                let dx = p.vel.x - mean_x;
                let dy = p.vel.y - mean_y;
                var_x += p.weight * dx * dx;
                var_y += p.weight * dy * dy;
                cov += p.weight * dx * dy;
            }
        }
        out[i as usize] = Some(VelocityMoments {
            v_x: mean_x,
            v_y: mean_y,
            var_vx: (var_x / w_sum).max(0.0),
            var_vy: (var_y / w_sum).max(0.0),
            cov_vxvy: cov / w_sum,
        });
    }
    out
}

/// Concatenate the accumulated masses with the velocity moments into the
/// full map cells.
pub fn assemble_dogm(
    combined: &Grid<EvidenceMass>,
    moments: &[Option<VelocityMoments>],
) -> Grid<DogmCell> {
    assert_eq!(combined.cells.len(), moments.len());
    let mut out: Grid<DogmCell> = Grid::new(combined.spec);
    for (o, (m, mom)) in out
        .cells
        .iter_mut()
        .zip(combined.cells.iter().zip(moments.iter()))
    {
        *o = DogmCell {
            mass: *m,
            moments: *mom,
        };
    }
    out
}

/// Largest deviation of any cell's mass sum from one; the mass audit of a
/// pipeline stage boundary.
pub fn max_mass_sum_deviation(grid: &Grid<EvidenceMass>) -> f64 {
    grid.cells
        .iter()
        .map(|m| (m.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Convenience for tests: an evidence grid with one overridden cell.
pub fn uniform_grid_with(spec: GridSpec, cell: CellIdx, mass: EvidenceMass) -> Grid<EvidenceMass> {
    let mut g: Grid<EvidenceMass> = Grid::new(spec);
    *g.get_mut(cell) = mass;
    g
}
