//! Per-cell particle filtering: predict, measurement-driven births,
//! particle weighting, mixture weighting with decay, and systematic
//! resampling.
//!
//! Each cell is one mixture component holding up to `k_max` particles.
//! Particles move freely between cells under a constant-velocity model;
//! a cell's predicted mixture weight is the summed mixture share
//! (source cell weight times per-cell normalized particle weight) of the
//! particles that land in it. All random draws come from streams keyed by
//! (seed, stage, cell, step), so results do not depend on iteration order
//! or thread count.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::grid::{world_to_cell, CellMixture, Grid, GridSpec, Particle, Vec2};
use crate::measurement::MeasurementGrid;
use crate::params::Params;
use crate::rng::{stream, BIRTH_STAGE, PREDICT_STAGE, RESAMPLE_STAGE};

/// Per-step tracker event counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepDiagnostics {
    pub births: u64,
    pub dropped_out_of_grid: u64,
    pub zero_weight_resets: u64,
    /// Particles alive after resampling.
    pub particle_count: u64,
}

/// The tracker: one mixture of particles per cell plus the step counter
/// and master seed that key every random stream.
#[derive(Debug, Clone)]
pub struct TrackerState {
    pub grid: Grid<CellMixture>,
    pub step: u64,
    master_seed: u64,
    /// Sorted linear indices of cells currently holding particles.
    active: Vec<u32>,
    /// Predicted mixture weight per cell, rebuilt by `predict`.
    lambda_pred: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

impl TrackerState {
    pub fn new(spec: GridSpec, master_seed: u64) -> Self {
        let n = spec.cell_count();
        TrackerState {
            grid: Grid::new(spec),
            step: 0,
            master_seed,
            active: Vec::new(),
            lambda_pred: vec![0.0; n],
            diagnostics: StepDiagnostics::default(),
        }
    }

    pub fn active_cells(&self) -> &[u32] {
        &self.active
    }

    pub fn lambda_pred(&self, i: usize) -> f64 {
        self.lambda_pred[i]
    }

    pub fn particle_count(&self) -> usize {
        self.active
            .iter()
            .map(|&i| self.grid.cells[i as usize].particles.len())
            .sum()
    }

    /// Return and reset the per-step counters.
    pub fn take_diagnostics(&mut self) -> StepDiagnostics {
        std::mem::take(&mut self.diagnostics)
    }

    /// Shift the window by whole cells. Particle world coordinates are
    /// untouched; mixtures in shifted-out cells are dropped and the
    /// active list rebuilt.
    pub fn recenter(&mut self, dx: i64, dy: i64) {
        if dx == 0 && dy == 0 {
            return;
        }
        self.grid.shift(dx, dy, CellMixture::default());
        self.active = self
            .grid
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.particles.is_empty())
            .map(|(i, _)| i as u32)
            .collect();
    }

    /// Recompute the active-cell list after tests poke particles into the
    /// grid directly.
    #[cfg(test)]
    pub(crate) fn rebuild_active_for_tests(&mut self) {
        self.active = self
            .grid
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.particles.is_empty())
            .map(|(i, _)| i as u32)
            .collect();
    }

    /// Constant-velocity prediction: move every particle by its velocity
    /// plus Gaussian process noise, increment ages, re-bin particles to
    /// cells, and accumulate the predicted mixture weight of each cell as
    /// the summed mixture share of the particles arriving in it. Particles
    /// leaving the window are dropped.
    pub fn predict(&mut self, dt: f64, params: &Params) {
        assert!(dt > 0.0, "dt must be positive");
        self.step += 1;
        self.diagnostics = StepDiagnostics::default();
        self.lambda_pred.fill(0.0);
        let spec = self.grid.spec;

        // Move phase, source cells in ascending index order.
        let mut moved: Vec<(u32, Particle)> = Vec::new();
        for &i in &self.active {
            let cell = &mut self.grid.cells[i as usize];
            let lambda_src = cell.lambda;
            let mut rng = stream(self.master_seed, PREDICT_STAGE, i as u64, self.step);
            for mut p in cell.particles.drain(..) {
                let share = lambda_src * p.weight;
                p.pos = Vec2::new(
                    p.pos.x + p.vel.x * dt + noise(&mut rng, params.q_pos),
                    p.pos.y + p.vel.y * dt + noise(&mut rng, params.q_pos),
                );
                p.vel = Vec2::new(
                    p.vel.x + noise(&mut rng, params.q_vel),
                    p.vel.y + noise(&mut rng, params.q_vel),
                );
                p.age = p.age.saturating_add(1);
                p.weight = share;
                match world_to_cell(p.pos, &spec) {
                    Some(c) => moved.push((spec.linear_index(c) as u32, p)),
                    None => self.diagnostics.dropped_out_of_grid += 1,
                }
            }
            cell.lambda = 0.0;
        }

        // Scatter phase: stable by destination, preserving source order,
        // then a single deterministic accumulation pass.
        moved.sort_by_key(|(dest, _)| *dest);
        self.active.clear();
        for (dest, p) in moved {
            let d = dest as usize;
            self.lambda_pred[d] += p.weight;
            if self.grid.cells[d].particles.is_empty() {
                self.active.push(dest);
            }
            self.grid.cells[d].particles.push(p);
        }
    }

    /// Measurement-driven births. Every cell with occupied mass receives
    /// `birth_fraction` of its particle budget as new particles drawn from
    /// the measurement: positions uniform in the cell; velocities from the
    /// radial observation when the sensor provides one (static births at
    /// or above the score threshold, dynamic births matched to the
    /// measured radial velocity otherwise), or uniform in the speed disk
    /// when it does not. Predicted particles are all retained; the
    /// mixture-weighted resampling restores the per-cell budget.
    pub fn sample_births(&mut self, meas: &MeasurementGrid, params: &Params) {
        let spec = self.grid.spec;
        assert_eq!(spec, meas.grid.spec, "measurement grid must align with the tracker");
        let n_births = (params.birth_fraction * spec.k_max as f64).round() as usize;
        if n_births == 0 {
            return;
        }
        let ego_vel = meas.ego_velocity;
        for &i in &meas.touched {
            let mcell = &meas.grid.cells[i as usize];
            if mcell.m_sd <= 0.0 {
                continue;
            }
            let cell_idx = spec.from_linear(i as usize);
            let base = Vec2::new(
                spec.origin.x + cell_idx.x as f64 * spec.resolution,
                spec.origin.y + cell_idx.y as f64 * spec.resolution,
            );
            let mut rng = stream(self.master_seed, BIRTH_STAGE, i as u64, self.step);
            let n_static = match mcell.radial {
                Some(obs) => {
                    if params.soft_static_birth {
                        (obs.b_rsp.clamp(0.0, 1.0) * n_births as f64).round() as usize
                    } else if obs.b_rsp >= params.eps_rsp {
                        n_births
                    } else {
                        0
                    }
                }
                None => 0,
            };
            let was_empty = self.grid.cells[i as usize].particles.is_empty();
            for k in 0..n_births {
                let pos = Vec2::new(
                    base.x + rng.gen::<f64>() * spec.resolution,
                    base.y + rng.gen::<f64>() * spec.resolution,
                );
                let vel = match mcell.radial {
                    Some(obs) => {
                        if k < n_static {
                            Vec2::ZERO
                        } else {
                            // Radial matched to the observation (converted
                            // to a world-frame component), tangential
                            // unobserved and spread uniformly.
                            let radial =
                                obs.v_r + ego_vel.dot(obs.los) + noise(&mut rng, params.sigma_vr);
                            let tangential = rng.gen_range(-params.v_max..params.v_max);
                            obs.los.scale(radial) + obs.los.perp().scale(tangential)
                        }
                    }
                    None => {
                        // No velocity observation: uniform over the disk of
                        // radius v_max.
                        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                        let radius = params.v_max * rng.gen::<f64>().sqrt();
                        Vec2::unit(angle).scale(radius)
                    }
                };
                self.grid.cells[i as usize].particles.push(Particle::new(pos, vel));
                self.diagnostics.births += 1;
            }
            if was_empty {
                self.active.push(i);
            }
        }
        self.active.sort_unstable();
        self.active.dedup();
    }

    /// Weight every particle against the fused measurement: occupied mass
    /// of its cell times the radial-velocity likelihood when the cell has
    /// a velocity observation. Weights are normalized per cell; a cell
    /// whose weights sum to zero falls back to uniform and is tallied.
    pub fn weight_particles(&mut self, meas: &MeasurementGrid, params: &Params) {
        let ego_vel = meas.ego_velocity;
        let inv_two_sigma2 = 1.0 / (2.0 * params.sigma_vr * params.sigma_vr);
        for &i in &self.active {
            let mcell = &meas.grid.cells[i as usize];
            let cell = &mut self.grid.cells[i as usize];
            let mut sum = 0.0;
            for p in cell.particles.iter_mut() {
                let likelihood = match mcell.radial {
                    Some(obs) => {
                        let radial = (p.vel - ego_vel).dot(obs.los);
                        let residual = radial - obs.v_r;
                        (-residual * residual * inv_two_sigma2).exp()
                    }
                    None => 1.0,
                };
                p.weight = mcell.m_sd * likelihood;
                sum += p.weight;
            }
            if cell.particles.is_empty() {
                continue;
            }
            if sum > 0.0 {
                for p in cell.particles.iter_mut() {
                    p.weight /= sum;
                }
            } else {
                let uniform = 1.0 / cell.particles.len() as f64;
                for p in cell.particles.iter_mut() {
                    p.weight = uniform;
                }
                self.diagnostics.zero_weight_resets += 1;
            }
        }
    }

    /// Mixture weighting: the unnormalized cell weight is the maximum of
    /// the measured occupied mass and the decayed predicted weight, then
    /// clamped into [0, 1]. A fresh measurement revives a cell instantly;
    /// an unmeasured cell decays geometrically instead of dying at once.
    pub fn weight_mixtures(&mut self, meas: &MeasurementGrid, params: &Params) {
        for &i in &self.active {
            let mcell = &meas.grid.cells[i as usize];
            let decayed = decay_fn(self.lambda_pred[i as usize], mcell.m_f, params.k_d);
            let lambda = mcell.m_sd.max(decayed).clamp(0.0, 1.0);
            self.grid.cells[i as usize].lambda = lambda;
        }
    }

    /// Systematic resampling per cell down to `round(lambda * k_max)`
    /// particles with uniform weights; ages and classes survive copying.
    pub fn resample(&mut self) {
        let k_max = self.grid.spec.k_max;
        let mut still_active = Vec::with_capacity(self.active.len());
        for &i in &self.active {
            let cell = &mut self.grid.cells[i as usize];
            let n_target = (cell.lambda * k_max as f64).round() as usize;
            if n_target == 0 || cell.particles.is_empty() {
                cell.particles.clear();
                cell.lambda = 0.0;
                continue;
            }
            let mut rng = stream(self.master_seed, RESAMPLE_STAGE, i as u64, self.step);
            let survivors = systematic_resample(&cell.particles, n_target, rng.gen::<f64>());
            cell.particles = survivors;
            let uniform = 1.0 / n_target as f64;
            for p in cell.particles.iter_mut() {
                p.weight = uniform;
            }
            self.diagnostics.particle_count += n_target as u64;
            still_active.push(i);
        }
        self.active = still_active;
    }
}

/// Exponential decay of a predicted mixture weight under the measured free
/// mass: `k_d * min(lambda_pred, 1) * (1 - m_f)`.
pub fn decay_fn(lambda_pred: f64, m_f: f64, k_d: f64) -> f64 {
    k_d * lambda_pred.min(1.0) * (1.0 - m_f)
}

/// Systematic resampling: `n` survivors at evenly spaced quantiles with a
/// single uniform offset. Expected copy counts are proportional to the
/// weights with variance below one copy.
fn systematic_resample(particles: &[Particle], n: usize, offset: f64) -> Vec<Particle> {
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    debug_assert!(total > 0.0);
    let mut out = Vec::with_capacity(n);
    let step = total / n as f64;
    let mut threshold = offset.min(1.0 - 1e-15) * step;
    let mut cum = 0.0;
    let mut idx = 0;
    for _ in 0..n {
        while cum + particles[idx].weight < threshold && idx + 1 < particles.len() {
            cum += particles[idx].weight;
            idx += 1;
        }
        out.push(particles[idx]);
        threshold += step;
    }
    out
}

fn noise(rng: &mut rand_chacha::ChaCha8Rng, std: f64) -> f64 {
    if std <= 0.0 {
        0.0
    } else {
        Normal::new(0.0, std).unwrap().sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellIdx, GridSpec, ParticleClass, Pose};
    use crate::measurement::{MeasurementCell, RadialObservation};
    use approx::assert_relative_eq;

    fn small_spec() -> GridSpec {
        GridSpec {
            edge_length: 10.0,
            resolution: 0.2,
            k_max: 50,
            origin: Pose::new(-5.0, -5.0, 0.0),
        }
    }

    fn noiseless() -> Params {
        Params {
            q_pos: 0.0,
            q_vel: 0.0,
            ..Params::default()
        }
    }

    fn put_particles(state: &mut TrackerState, cell: CellIdx, lambda: f64, ps: &[(Vec2, Vec2, f64)]) {
        let i = state.grid.spec.linear_index(cell);
        let mix = &mut state.grid.cells[i];
        mix.lambda = lambda;
        for (pos, vel, w) in ps {
            let mut p = Particle::new(*pos, *vel);
            p.weight = *w;
            p.age = 1;
            mix.particles.push(p);
        }
        state.active.push(i as u32);
        state.active.sort_unstable();
        state.active.dedup();
    }

    fn vacuous_meas(spec: GridSpec) -> MeasurementGrid {
        MeasurementGrid::vacuous(spec, Vec2::ZERO)
    }

    fn meas_with_cell(spec: GridSpec, cell: CellIdx, mc: MeasurementCell) -> MeasurementGrid {
        let mut m = vacuous_meas(spec);
        let i = spec.linear_index(cell);
        m.grid.cells[i] = mc;
        m.touched.push(i as u32);
        m
    }

    #[test]
    fn noiseless_kinematics() {
        let mut state = TrackerState::new(small_spec(), 1);
        let cell = world_cell(&state, 0.0, 0.0);
        put_particles(
            &mut state,
            cell,
            1.0,
            &[(Vec2::ZERO, Vec2::new(1.0, 0.0), 1.0)],
        );
        state.predict(0.1, &noiseless());
        let all: Vec<&Particle> = state
            .active
            .iter()
            .flat_map(|&i| state.grid.cells[i as usize].particles.iter())
            .collect();
        assert_eq!(all.len(), 1);
        assert_relative_eq!(all[0].pos.x, 0.1, epsilon = 1e-12);
        assert_relative_eq!(all[0].pos.y, 0.0, epsilon = 1e-12);
        assert_eq!(all[0].age, 2);
    }

    fn world_cell(state: &TrackerState, x: f64, y: f64) -> CellIdx {
        world_to_cell(Vec2::new(x, y), &state.grid.spec).unwrap()
    }

    #[test]
    fn static_particles_keep_cell_weight_sums() {
        // v = 0, zero noise: predicted mixture weight equals the source
        // cell's mixture share exactly.
        let mut state = TrackerState::new(small_spec(), 2);
        let cell = world_cell(&state, 1.0, 1.0);
        put_particles(
            &mut state,
            cell,
            0.6,
            &[
                (Vec2::new(1.0, 1.0), Vec2::ZERO, 0.5),
                (Vec2::new(1.05, 1.05), Vec2::ZERO, 0.5),
            ],
        );
        state.predict(0.1, &noiseless());
        let i = state.grid.spec.linear_index(cell);
        assert_relative_eq!(state.lambda_pred(i), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn migration_sums_incoming_shares() {
        // Two neighbors send particles carrying mixture shares 0.2 and 0.3
        // into the same destination: predicted weight 0.5.
        let mut state = TrackerState::new(small_spec(), 3);
        let dest = world_cell(&state, 1.0, 0.1);
        // left neighbor cell, particle moving +x by one cell per step
        let left = world_cell(&state, 0.9, 0.1);
        put_particles(
            &mut state,
            left,
            0.4,
            &[(Vec2::new(0.9, 0.1), Vec2::new(2.0, 0.0), 0.5)],
        );
        // right neighbor, particle moving -x
        let right = world_cell(&state, 1.3, 0.1);
        put_particles(
            &mut state,
            right,
            0.6,
            &[(Vec2::new(1.3, 0.1), Vec2::new(-2.0, 0.0), 0.5)],
        );
        state.predict(0.1, &noiseless());
        let i = state.grid.spec.linear_index(dest);
        assert_relative_eq!(state.lambda_pred(i), 0.4 * 0.5 + 0.6 * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn out_of_grid_particles_dropped() {
        let mut state = TrackerState::new(small_spec(), 4);
        let cell = world_cell(&state, 4.9, 0.0);
        put_particles(
            &mut state,
            cell,
            1.0,
            &[(Vec2::new(4.9, 0.0), Vec2::new(10.0, 0.0), 1.0)],
        );
        state.predict(0.1, &noiseless());
        assert_eq!(state.diagnostics.dropped_out_of_grid, 1);
        assert_eq!(state.particle_count(), 0);
    }

    #[test]
    fn no_births_without_occupied_mass() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 5);
        state.step = 1;
        let meas = meas_with_cell(
            spec,
            CellIdx::new(10, 10),
            MeasurementCell {
                m_sd: 0.0,
                m_f: 0.8,
                radial: None,
            },
        );
        state.sample_births(&meas, &Params::default());
        assert_eq!(state.particle_count(), 0);
    }

    #[test]
    fn static_births_above_threshold() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 6);
        state.step = 1;
        let meas = meas_with_cell(
            spec,
            CellIdx::new(10, 10),
            MeasurementCell {
                m_sd: 0.9,
                m_f: 0.0,
                radial: Some(RadialObservation {
                    v_r: 0.1,
                    los: Vec2::new(1.0, 0.0),
                    b_rsp: 0.95,
                }),
            },
        );
        let params = Params::default();
        state.sample_births(&meas, &params);
        let expected = (params.birth_fraction * spec.k_max as f64).round() as u64;
        assert_eq!(state.diagnostics.births, expected);
        for &i in state.active_cells() {
            for p in &state.grid.cells[i as usize].particles {
                assert_eq!(p.vel, Vec2::ZERO);
                assert_eq!(p.age, 0);
                assert_eq!(p.class, ParticleClass::Unclassified);
                // positions uniform inside the cell
                let c = world_to_cell(p.pos, &spec).unwrap();
                assert_eq!(c, CellIdx::new(10, 10));
            }
        }
    }

    #[test]
    fn dynamic_births_cluster_at_observed_radial() {
        // Low score: births match the observed radial velocity. Sample
        // mean over many births approaches v_r within a few standard
        // errors; tangential components stay inside ±v_max.
        let spec = GridSpec {
            k_max: 50,
            ..small_spec()
        };
        let params = Params::default();
        let v_r_obs = -5.56;
        let mut radial_sum = 0.0;
        let mut count = 0usize;
        for trial in 0..1000u64 {
            let mut state = TrackerState::new(spec, trial);
            state.step = 1;
            let meas = meas_with_cell(
                spec,
                CellIdx::new(10, 10),
                MeasurementCell {
                    m_sd: 0.9,
                    m_f: 0.0,
                    radial: Some(RadialObservation {
                        v_r: v_r_obs,
                        los: Vec2::new(1.0, 0.0),
                        b_rsp: 0.05,
                    }),
                },
            );
            state.sample_births(&meas, &params);
            for &i in state.active_cells() {
                for p in &state.grid.cells[i as usize].particles {
                    radial_sum += p.vel.x;
                    assert!(p.vel.y.abs() <= params.v_max);
                    count += 1;
                }
            }
        }
        assert!(count as u64 >= 10_000 / 2);
        let mean = radial_sum / count as f64;
        // standard error ≈ sigma_vr / sqrt(n) ≈ 0.005
        assert!(
            (mean - v_r_obs).abs() < 0.05,
            "mean radial {mean}, expected {v_r_obs}"
        );
    }

    #[test]
    fn lidar_weighting_uniform() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 7);
        let cell = CellIdx::new(10, 10);
        let pos = spec.cell_center(cell);
        put_particles(
            &mut state,
            cell,
            0.5,
            &[
                (pos, Vec2::new(3.0, 0.0), 0.0),
                (pos, Vec2::new(-4.0, 1.0), 0.0),
            ],
        );
        let meas = meas_with_cell(
            spec,
            cell,
            MeasurementCell {
                m_sd: 0.8,
                m_f: 0.0,
                radial: None,
            },
        );
        state.weight_particles(&meas, &Params::default());
        let i = spec.linear_index(cell);
        for p in &state.grid.cells[i].particles {
            assert_relative_eq!(p.weight, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn radar_weighting_gaussian_ratio() {
        // sigma_vr = 1: particle matching the observation vs a particle at
        // zero radial velocity get the likelihood ratio exp(0)/exp(-12.5).
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 8);
        let cell = CellIdx::new(10, 10);
        let pos = spec.cell_center(cell);
        put_particles(
            &mut state,
            cell,
            0.5,
            &[
                (pos, Vec2::new(-5.0, 0.0), 0.0),
                (pos, Vec2::new(0.0, 0.0), 0.0),
            ],
        );
        let meas = meas_with_cell(
            spec,
            cell,
            MeasurementCell {
                m_sd: 0.8,
                m_f: 0.0,
                radial: Some(RadialObservation {
                    v_r: -5.0,
                    los: Vec2::new(1.0, 0.0),
                    b_rsp: 0.1,
                }),
            },
        );
        let params = Params {
            sigma_vr: 1.0,
            ..Params::default()
        };
        state.weight_particles(&meas, &params);
        let i = spec.linear_index(cell);
        let w = &state.grid.cells[i].particles;
        let ratio = w[0].weight / w[1].weight;
        assert_relative_eq!(ratio, (12.5f64).exp(), max_relative = 1e-9);
        assert_relative_eq!(w[0].weight + w[1].weight, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tangential_symmetric_weights() {
        // Radial observation near zero cannot distinguish +tangential from
        // -tangential particles; both directions keep equal weight.
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 9);
        let cell = CellIdx::new(10, 10);
        let pos = spec.cell_center(cell);
        put_particles(
            &mut state,
            cell,
            0.5,
            &[
                (pos, Vec2::new(0.0, 4.0), 0.0),
                (pos, Vec2::new(0.0, -4.0), 0.0),
            ],
        );
        let meas = meas_with_cell(
            spec,
            cell,
            MeasurementCell {
                m_sd: 0.8,
                m_f: 0.0,
                radial: Some(RadialObservation {
                    v_r: 0.0,
                    los: Vec2::new(1.0, 0.0),
                    b_rsp: 0.1,
                }),
            },
        );
        state.weight_particles(&meas, &Params::default());
        let i = spec.linear_index(cell);
        let w = &state.grid.cells[i].particles;
        assert_relative_eq!(w[0].weight, w[1].weight, epsilon = 1e-12);
    }

    #[test]
    fn zero_weight_cell_resets_uniform() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 10);
        let cell = CellIdx::new(5, 5);
        let pos = spec.cell_center(cell);
        put_particles(&mut state, cell, 0.5, &[(pos, Vec2::ZERO, 1.0)]);
        // no measurement anywhere: m_sd = 0 in the particle's cell
        let meas = vacuous_meas(spec);
        state.weight_particles(&meas, &Params::default());
        assert_eq!(state.diagnostics.zero_weight_resets, 1);
        let i = spec.linear_index(cell);
        assert_relative_eq!(state.grid.cells[i].particles[0].weight, 1.0);
    }

    #[test]
    fn decay_fn_examples() {
        // measured free space kills the cell
        assert_eq!(decay_fn(0.7, 1.0, 0.8), 0.0);
        // direct evaluation
        assert_relative_eq!(decay_fn(0.8, 0.3, 0.5), 0.28, epsilon = 1e-12);
        // clamp branch
        assert_relative_eq!(decay_fn(2.3, 0.0, 0.8), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn mixture_weight_measurement_revives() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 11);
        let cell = CellIdx::new(10, 10);
        put_particles(&mut state, cell, 0.0, &[(spec.cell_center(cell), Vec2::ZERO, 1.0)]);
        let meas = meas_with_cell(
            spec,
            cell,
            MeasurementCell {
                m_sd: 0.9,
                m_f: 0.0,
                radial: None,
            },
        );
        // lambda_pred is zero: the measurement branch wins
        state.weight_mixtures(&meas, &Params::default());
        let i = spec.linear_index(cell);
        assert_relative_eq!(state.grid.cells[i].lambda, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn mixture_weight_graceful_decay() {
        // no measurement, lambda_pred = 1: the cell decays to k_d instead
        // of dying immediately
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 12);
        let cell = CellIdx::new(10, 10);
        put_particles(&mut state, cell, 1.0, &[(spec.cell_center(cell), Vec2::ZERO, 1.0)]);
        let i = spec.linear_index(cell);
        state.lambda_pred[i] = 1.0;
        let meas = vacuous_meas(spec);
        let params = Params::default();
        state.weight_mixtures(&meas, &params);
        assert_relative_eq!(state.grid.cells[i].lambda, params.k_d, epsilon = 1e-12);
    }

    #[test]
    fn mixture_weight_free_space_clears() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 13);
        let cell = CellIdx::new(10, 10);
        put_particles(&mut state, cell, 1.0, &[(spec.cell_center(cell), Vec2::ZERO, 1.0)]);
        let i = spec.linear_index(cell);
        state.lambda_pred[i] = 1.0;
        let meas = meas_with_cell(
            spec,
            cell,
            MeasurementCell {
                m_sd: 0.0,
                m_f: 1.0,
                radial: None,
            },
        );
        state.weight_mixtures(&meas, &Params::default());
        assert_eq!(state.grid.cells[i].lambda, 0.0);
    }

    #[test]
    fn resample_full_cell_keeps_k_max() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 14);
        let cell = CellIdx::new(10, 10);
        let pos = spec.cell_center(cell);
        let ps: Vec<(Vec2, Vec2, f64)> = (0..60)
            .map(|k| (pos, Vec2::new(k as f64, 0.0), 1.0 / 60.0))
            .collect();
        put_particles(&mut state, cell, 1.0, &ps);
        state.resample();
        let i = spec.linear_index(cell);
        assert_eq!(state.grid.cells[i].particles.len(), 50);
        for p in &state.grid.cells[i].particles {
            assert_relative_eq!(p.weight, 1.0 / 50.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn resample_zero_lambda_empties_cell() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 15);
        let cell = CellIdx::new(10, 10);
        put_particles(&mut state, cell, 0.0, &[(spec.cell_center(cell), Vec2::ZERO, 1.0)]);
        state.resample();
        assert_eq!(state.particle_count(), 0);
        assert!(state.active_cells().is_empty());
    }

    #[test]
    fn resample_ages_preserved() {
        let spec = small_spec();
        let mut state = TrackerState::new(spec, 16);
        let cell = CellIdx::new(10, 10);
        let i = spec.linear_index(cell);
        let mut p = Particle::new(spec.cell_center(cell), Vec2::ZERO);
        p.weight = 1.0;
        p.age = 9;
        state.grid.cells[i].particles.push(p);
        state.grid.cells[i].lambda = 0.2;
        state.active.push(i as u32);
        state.resample();
        assert!(!state.grid.cells[i].particles.is_empty());
        for p in &state.grid.cells[i].particles {
            assert_eq!(p.age, 9);
        }
    }

    #[test]
    fn systematic_resample_dominant_weight_copy_count() {
        // one particle with weight 0.99 among 50: the systematic scheme
        // yields floor or ceil of 0.99 * n copies
        let pos = Vec2::ZERO;
        let mut particles: Vec<Particle> = (0..50)
            .map(|k| {
                let mut p = Particle::new(pos, Vec2::new(k as f64, 0.0));
                p.weight = 0.01 / 49.0;
                p
            })
            .collect();
        particles[7].weight = 0.99;
        for offset in [0.0, 0.25, 0.5, 0.75, 0.999] {
            let survivors = systematic_resample(&particles, 50, offset);
            let copies = survivors.iter().filter(|p| p.vel.x == 7.0).count();
            let expected: f64 = 0.99 * 50.0;
            assert!(
                copies == expected.floor() as usize || copies == expected.ceil() as usize,
                "copies = {copies}"
            );
        }
    }

    #[test]
    fn systematic_resample_unbiased() {
        // mean survivor count proportional to weight within 2% over many
        // trials
        let pos = Vec2::ZERO;
        let weights = [0.47, 0.35, 0.18];
        let particles: Vec<Particle> = weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let mut p = Particle::new(pos, Vec2::new(k as f64, 0.0));
                p.weight = *w;
                p
            })
            .collect();
        let trials = 10_000;
        let n = 10usize;
        let mut counts = [0usize; 3];
        for t in 0..trials {
            let mut rng = stream(77, RESAMPLE_STAGE, 1, t as u64);
            let survivors = systematic_resample(&particles, n, rng.gen::<f64>());
            for s in survivors {
                counts[s.vel.x as usize] += 1;
            }
        }
        for (k, w) in weights.iter().enumerate() {
            let mean = counts[k] as f64 / trials as f64;
            let expected = w * n as f64;
            assert!(
                (mean - expected).abs() / expected < 0.02,
                "particle {k}: mean {mean}, expected {expected}"
            );
        }
    }

    #[test]
    fn determinism_identical_runs() {
        let spec = small_spec();
        let params = Params::default();
        let run = || {
            let mut state = TrackerState::new(spec, 123);
            let meas = meas_with_cell(
                spec,
                CellIdx::new(10, 10),
                MeasurementCell {
                    m_sd: 0.9,
                    m_f: 0.0,
                    radial: Some(RadialObservation {
                        v_r: -3.0,
                        los: Vec2::new(1.0, 0.0),
                        b_rsp: 0.1,
                    }),
                },
            );
            for _ in 0..5 {
                state.predict(0.1, &params);
                state.sample_births(&meas, &params);
                state.weight_particles(&meas, &params);
                state.weight_mixtures(&meas, &params);
                state.resample();
            }
            state
        };
        let a = run();
        let b = run();
        assert_eq!(a.grid.cells, b.grid.cells);
    }
}
