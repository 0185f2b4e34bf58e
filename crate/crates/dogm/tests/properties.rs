//! Property tests over the evidential algebra and grid geometry.

use proptest::prelude::*;

use dogm::evidential::{combine_masses, suppress_unclassified};
use dogm::grid::{world_to_cell, EvidenceMass, Grid, GridSpec, Pose, Vec2};
use dogm::test_util::brute_force_combine;
use dogm::dempster_combine;

fn mass_strategy() -> impl Strategy<Value = EvidenceMass> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.01f64..1.0).prop_map(
        |(f, s, d, sd, om)| {
            let sum = f + s + d + sd + om;
            EvidenceMass {
                m_f: f / sum,
                m_s: s / sum,
                m_d: d / sum,
                m_sd: sd / sum,
                m_omega: om / sum,
            }
        },
    )
}

proptest! {
    #[test]
    fn dempster_matches_oracle(a in mass_strategy(), b in mass_strategy()) {
        match (dempster_combine(&a, &b), brute_force_combine(&a, &b)) {
            (Ok(fast), Some(slow)) => {
                for (x, y) in fast.channels().iter().zip(slow.channels()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                prop_assert!(fast.is_normalized());
            }
            (Err(_), None) => {}
            other => prop_assert!(false, "conflict disagreement: {:?}", other.0.is_ok()),
        }
    }

    #[test]
    fn combination_rule_conserves_mass(a in mass_strategy(), b in mass_strategy()) {
        let out = combine_masses(&a, &b);
        prop_assert!((out.sum() - 1.0).abs() < 1e-12);
        for v in out.channels() {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn suppression_idempotent_and_conserving(m in mass_strategy()) {
        let spec = GridSpec {
            edge_length: 1.0,
            resolution: 0.5,
            k_max: 5,
            origin: Pose::new(0.0, 0.0, 0.0),
        };
        let mut g: Grid<EvidenceMass> = Grid::new(spec);
        g.cells[0] = m;
        suppress_unclassified(&mut g);
        prop_assert!(g.cells[0].m_sd == 0.0);
        prop_assert!((g.cells[0].sum() - 1.0).abs() < 1e-12);
        let once = g.cells[0];
        suppress_unclassified(&mut g);
        prop_assert_eq!(g.cells[0], once);
    }

    #[test]
    fn cell_center_roundtrip(
        ix in 0u32..100,
        iy in 0u32..100,
        ox in -50.0f64..50.0,
        oy in -50.0f64..50.0,
    ) {
        let spec = GridSpec {
            edge_length: 20.0,
            resolution: 0.2,
            k_max: 5,
            origin: Pose::new(ox, oy, 0.0),
        };
        let c = dogm::CellIdx::new(ix, iy);
        prop_assert_eq!(world_to_cell(spec.cell_center(c), &spec), Some(c));
    }

    #[test]
    fn recenter_roundtrip_restores_overlap(
        dx in -3i64..=3,
        dy in -3i64..=3,
        payload in proptest::collection::vec(0u32..1000, 16),
    ) {
        let spec = GridSpec {
            edge_length: 2.0,
            resolution: 0.5,
            k_max: 5,
            origin: Pose::new(0.0, 0.0, 0.0),
        };
        let mut g: Grid<u32> = Grid::new(spec);
        g.cells.copy_from_slice(&payload);
        let orig = g.clone();
        g.shift(dx, dy, 0);
        g.shift(-dx, -dy, 0);
        prop_assert_eq!(g.spec, orig.spec);
        let n = 4i64;
        for y in 0..n {
            for x in 0..n {
                // cells that stayed inside the window both ways
                let sx = x + dx;
                let sy = y + dy;
                if sx >= 0 && sx < n && sy >= 0 && sy < n {
                    let c = dogm::CellIdx::new(sx as u32, sy as u32);
                    prop_assert_eq!(g.get(c), orig.get(c));
                }
            }
        }
    }

    #[test]
    fn radial_projection_symmetry(speed in 0.1f64..20.0, bearing in -3.14f64..3.14) {
        // velocity tangential to the line of sight projects to zero
        let los = Vec2::unit(bearing);
        let tangential = los.perp().scale(speed);
        prop_assert!(tangential.dot(los).abs() < 1e-9);
    }
}
