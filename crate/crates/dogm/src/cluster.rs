//! Dynamic-object extraction: filter dynamic cells and group them into
//! clusters by proximity and velocity similarity.
//!
//! A cell qualifies when its dynamic mass clears the threshold and beats
//! its static mass. Two qualifying cells connect when they are within the
//! Chebyshev connectivity radius and their velocity estimates agree;
//! connected components of at least the minimum size become clusters.

use std::io::Write;

use crate::grid::{CellIdx, DogmCell, Grid, Vec2};
use crate::params::Params;

/// One extracted dynamic-object hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCluster {
    /// Member cells, sorted by linear index.
    pub cells: Vec<CellIdx>,
    /// Dynamic-mass weighted centroid (world m).
    pub centroid: Vec2,
    /// Dynamic-mass weighted mean velocity (m/s).
    pub mean_velocity: Vec2,
    /// Dynamic-mass weighted velocity covariance: (var_x, var_y, cov_xy).
    pub velocity_cov: (f64, f64, f64),
    /// Axis-aligned bounding box over member cell extents:
    /// (min_x, min_y, max_x, max_y) in world m.
    pub bbox: (f64, f64, f64, f64),
    pub cell_count: usize,
}

/// Cells whose dynamic mass is at least `eps_d_min` and strictly exceeds
/// their static mass. Cells without velocity moments cannot join clusters
/// (stale dynamic mass left behind by departed particles has no velocity
/// estimate) and are excluded here.
pub fn filter_dynamic_cells(dogm: &Grid<DogmCell>, params: &Params) -> Vec<CellIdx> {
    dogm.iter()
        .filter(|(_, cell)| {
            cell.mass.m_d >= params.eps_d_min
                && cell.mass.m_d > cell.mass.m_s
                && cell.moments.is_some()
        })
        .map(|(c, _)| c)
        .collect()
}

/// Group qualifying cells into clusters by region growing: cells connect
/// when within `d_conn` (Chebyshev) and their velocity estimates differ by
/// at most `eps_v_sim`. Components smaller than `min_cluster_cells` are
/// discarded. Output is canonically ordered by smallest member index, so
/// the result does not depend on iteration order.
pub fn cluster_cells(candidates: &[CellIdx], dogm: &Grid<DogmCell>, params: &Params) -> Vec<ObjectCluster> {
    let mut cells: Vec<CellIdx> = candidates.to_vec();
    cells.sort_unstable();
    cells.dedup();

    let spec = dogm.spec;
    let index_of: std::collections::HashMap<CellIdx, usize> =
        cells.iter().enumerate().map(|(k, c)| (*c, k)).collect();
    let velocity = |c: CellIdx| -> Vec2 {
        let m = dogm.get(c).moments.expect("filtered cells carry moments");
        Vec2::new(m.v_x, m.v_y)
    };

    let mut visited = vec![false; cells.len()];
    let mut clusters = Vec::new();
    for start in 0..cells.len() {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut component = vec![cells[start]];
        let mut queue = vec![cells[start]];
        while let Some(cur) = queue.pop() {
            let v_cur = velocity(cur);
            let r = params.d_conn as i64;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = cur.x as i64 + dx;
                    let ny = cur.y as i64 + dy;
                    if nx < 0 || ny < 0 {
                        continue;
                    }
                    let neighbor = CellIdx::new(nx as u32, ny as u32);
                    let Some(&k) = index_of.get(&neighbor) else {
                        continue;
                    };
                    if visited[k] {
                        continue;
                    }
                    if (velocity(neighbor) - v_cur).norm() <= params.eps_v_sim {
                        visited[k] = true;
                        component.push(neighbor);
                        queue.push(neighbor);
                    }
                }
            }
        }
        if component.len() >= params.min_cluster_cells {
            component.sort_unstable();
            clusters.push(build_cluster(component, dogm));
        }
    }
    clusters.sort_by_key(|c| spec.linear_index(c.cells[0]));
    clusters
}

fn build_cluster(cells: Vec<CellIdx>, dogm: &Grid<DogmCell>) -> ObjectCluster {
    let spec = dogm.spec;
    let half = spec.resolution / 2.0;
    let mut w_sum = 0.0;
    let mut centroid = Vec2::ZERO;
    let mut mean_v = Vec2::ZERO;
    let mut bbox = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &c in &cells {
        let cell = dogm.get(c);
        let w = cell.mass.m_d.max(1e-12);
        let center = spec.cell_center(c);
        let m = cell.moments.expect("cluster members carry moments");
        w_sum += w;
        centroid = centroid + center.scale(w);
        mean_v = mean_v + Vec2::new(m.v_x, m.v_y).scale(w);
        bbox.0 = bbox.0.min(center.x - half);
        bbox.1 = bbox.1.min(center.y - half);
        bbox.2 = bbox.2.max(center.x + half);
        bbox.3 = bbox.3.max(center.y + half);
    }
    centroid = centroid.scale(1.0 / w_sum);
    mean_v = mean_v.scale(1.0 / w_sum);
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    let mut cov = 0.0;
    for &c in &cells {
        let cell = dogm.get(c);
        let w = cell.mass.m_d.max(1e-12);
        let m = cell.moments.expect("cluster members carry moments");
        let dx = m.v_x - mean_v.x;
        let dy = m.v_y - mean_v.y;
        var_x += w * dx * dx;
        var_y += w * dy * dy;
        cov += w * dx * dy;
    }
    let cell_count = cells.len();
    ObjectCluster {
        cells,
        centroid,
        mean_velocity: mean_v,
        velocity_cov: (var_x / w_sum, var_y / w_sum, cov / w_sum),
        bbox,
        cell_count,
    }
}

/// CSV rows for the clusters of one frame.
pub fn write_clusters_csv<W: Write>(
    out: &mut W,
    frame: usize,
    clusters: &[ObjectCluster],
) -> std::io::Result<()> {
    for (id, c) in clusters.iter().enumerate() {
        writeln!(
            out,
            "{frame},{id},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            c.centroid.x,
            c.centroid.y,
            c.bbox.0,
            c.bbox.1,
            c.bbox.2,
            c.bbox.3,
            c.mean_velocity.x,
            c.mean_velocity.y,
            c.cell_count
        )?;
    }
    Ok(())
}

/// CSV header matching `write_clusters_csv`.
pub const CLUSTERS_CSV_HEADER: &str =
    "frame,cluster,centroid_x,centroid_y,bbox_min_x,bbox_min_y,bbox_max_x,bbox_max_y,v_x,v_y,cell_count";
