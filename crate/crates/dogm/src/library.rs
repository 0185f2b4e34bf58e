//! Built-in scenario set covering the behaviors the engine is evaluated
//! on: an approach-and-brake target among parked cars, a tangential
//! crossing, a purely static scene, a mixed static/dynamic scene for
//! classification sweeps, a ghost-heavy variant, and two richer street
//! scenes for demos.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::grid::Pose;
use crate::scenario::{
    NoiseModel, ObjectKind, RectShape, Scenario, ScenarioObject, SensorRig, Trajectory,
};

/// 20 km/h in m/s.
pub const APPROACH_SPEED: f64 = 20.0 / 3.6;

fn vehicle(id: u32, trajectory: Trajectory) -> ScenarioObject {
    ScenarioObject {
        id,
        kind: ObjectKind::Vehicle,
        shape: RectShape {
            length: 4.4,
            width: 1.8,
        },
        trajectory,
    }
}

fn parked_rows(duration: f64, xs: &[f64], y: f64, start_id: u32) -> Vec<ScenarioObject> {
    xs.iter()
        .enumerate()
        .flat_map(|(k, &x)| {
            [
                vehicle(
                    start_id + 2 * k as u32,
                    Trajectory::stationary(Pose::new(x, y, 0.0), duration),
                ),
                vehicle(
                    start_id + 2 * k as u32 + 1,
                    Trajectory::stationary(Pose::new(x, -y, 0.0), duration),
                ),
            ]
        })
        .collect()
}

/// Stationary ego; a target approaches head-on at 20 km/h, brakes at
/// 2.5 m/s² and stands still for the remainder; parked cars line both
/// sides. 100 frames at 10 Hz.
pub fn braking() -> Scenario {
    let duration = 10.0;
    let mut objects = vec![vehicle(
        1,
        Trajectory::start(Pose::new(24.0, 0.0, PI), APPROACH_SPEED)
            .cruise(2.5)
            .advance(duration - 2.5, -2.5)
            .build(),
    )];
    objects.extend(parked_rows(duration, &[6.0, 12.0, 18.0], 3.5, 10));
    Scenario {
        name: "braking".into(),
        duration,
        dt: 0.1,
        seed: 7,
        grid: Default::default(),
        ego: Trajectory::stationary(Pose::new(0.0, 0.0, 0.0), duration),
        objects,
        rig: SensorRig::default_rig(),
        noise: NoiseModel::default(),
    }
}

/// Stationary ego; a target crosses left-to-right 10 m ahead, purely
/// tangential to the forward sensor when it passes the axis.
pub fn crossing() -> Scenario {
    let duration = 5.0;
    Scenario {
        name: "crossing".into(),
        duration,
        dt: 0.1,
        seed: 11,
        grid: Default::default(),
        ego: Trajectory::stationary(Pose::new(0.0, 0.0, 0.0), duration),
        objects: vec![vehicle(
            1,
            Trajectory::start(Pose::new(10.0, -8.0, FRAC_PI_2), 4.0)
                .cruise(duration)
                .build(),
        )],
        rig: SensorRig::default_rig(),
        noise: NoiseModel::default(),
    }
}

/// Stationary ego among static structure only: a metallic fence ahead and
/// parked cars on both sides.
pub fn static_scene() -> Scenario {
    let duration = 10.0;
    let mut objects = vec![ScenarioObject {
        id: 1,
        kind: ObjectKind::Fence,
        shape: RectShape {
            length: 16.0,
            width: 0.4,
        },
        trajectory: Trajectory::stationary(Pose::new(12.0, 0.0, FRAC_PI_2), duration),
    }];
    objects.extend(parked_rows(duration, &[5.0, 10.0], 4.0, 10));
    Scenario {
        name: "static_scene".into(),
        duration,
        dt: 0.1,
        seed: 5,
        grid: Default::default(),
        ego: Trajectory::stationary(Pose::new(0.0, 0.0, 0.0), duration),
        objects,
        rig: SensorRig::default_rig(),
        noise: NoiseModel::default(),
    }
}

/// Static fence plus one mover: the classification-sweep scene.
pub fn mixed_roc() -> Scenario {
    let duration = 7.0;
    Scenario {
        name: "mixed_roc".into(),
        duration,
        dt: 0.1,
        seed: 13,
        grid: Default::default(),
        ego: Trajectory::stationary(Pose::new(0.0, 0.0, 0.0), duration),
        objects: vec![
            ScenarioObject {
                id: 1,
                kind: ObjectKind::Fence,
                shape: RectShape {
                    length: 30.0,
                    width: 0.5,
                },
                trajectory: Trajectory::stationary(Pose::new(0.0, 6.0, 0.0), duration),
            },
            vehicle(
                2,
                Trajectory::start(Pose::new(-17.0, -3.0, 0.0), 5.0)
                    .cruise(duration)
                    .build(),
            ),
        ],
        rig: SensorRig::default_rig(),
        noise: NoiseModel::default(),
    }
}

/// The static scene flooded with spurious radar returns in free space.
pub fn ghost_storm() -> Scenario {
    let mut s = static_scene();
    s.name = "ghost_storm".into();
    s.duration = 20.0;
    s.seed = 17;
    s.ego = Trajectory::stationary(Pose::new(0.0, 0.0, 0.0), s.duration);
    for obj in &mut s.objects {
        let pose = obj.trajectory.segments[0].pose.unwrap();
        obj.trajectory = Trajectory::stationary(pose, s.duration);
    }
    s.noise.ghost_rate = 2.0;
    s
}

/// Stationary ego at an intersection: two crossing vehicles and a
/// pedestrian.
pub fn intersection() -> Scenario {
    let duration = 8.0;
    Scenario {
        name: "intersection".into(),
        duration,
        dt: 0.1,
        seed: 23,
        grid: Default::default(),
        ego: Trajectory::stationary(Pose::new(0.0, 0.0, 0.0), duration),
        objects: vec![
            vehicle(
                1,
                Trajectory::start(Pose::new(-20.0, 6.0, 0.0), 5.0)
                    .cruise(duration)
                    .build(),
            ),
            vehicle(
                2,
                Trajectory::start(Pose::new(20.0, 10.0, PI), 6.0)
                    .cruise(duration)
                    .build(),
            ),
            ScenarioObject {
                id: 3,
                kind: ObjectKind::Pedestrian,
                shape: RectShape {
                    length: 0.5,
                    width: 0.5,
                },
                trajectory: Trajectory::start(Pose::new(8.0, -5.0, FRAC_PI_2), 1.4)
                    .cruise(duration)
                    .build(),
            },
        ],
        rig: SensorRig::default_rig(),
        noise: NoiseModel::default(),
    }
}

/// Moving ego following two lead vehicles past parked cars; exercises the
/// rolling window.
pub fn urban_lead() -> Scenario {
    let duration = 5.0;
    let mut objects = vec![
        vehicle(
            1,
            Trajectory::start(Pose::new(12.0, -1.7, 0.0), 10.0)
                .cruise(duration)
                .build(),
        ),
        vehicle(
            2,
            Trajectory::start(Pose::new(20.0, 1.7, 0.0), 10.0)
                .cruise(duration)
                .build(),
        ),
    ];
    objects.extend(parked_rows(duration, &[4.0, 10.0, 16.0, 22.0, 28.0, 34.0], 5.0, 10));
    Scenario {
        name: "urban_lead".into(),
        duration,
        dt: 0.1,
        seed: 29,
        grid: Default::default(),
        ego: Trajectory::start(Pose::new(0.0, 0.0, 0.0), 8.0)
            .cruise(duration)
            .build(),
        objects,
        rig: SensorRig::default_rig(),
        noise: NoiseModel::default(),
    }
}

/// All built-in scenarios by name.
pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "braking" => Some(braking()),
        "crossing" => Some(crossing()),
        "static_scene" => Some(static_scene()),
        "mixed_roc" => Some(mixed_roc()),
        "ghost_storm" => Some(ghost_storm()),
        "intersection" => Some(intersection()),
        "urban_lead" => Some(urban_lead()),
        _ => None,
    }
}

/// Names of all built-in scenarios.
pub const ALL: &[&str] = &[
    "braking",
    "crossing",
    "static_scene",
    "mixed_roc",
    "ghost_storm",
    "intersection",
    "urban_lead",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_library_scenarios_validate() {
        for name in ALL {
            let s = by_name(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&s.name, name);
        }
    }

    #[test]
    fn braking_reaches_standstill_with_margin() {
        let s = braking();
        let target = &s.objects[0];
        // stop happens with at least 5 s of standstill left
        let stop_t = (0..s.frame_count())
            .map(|f| s.time_of_frame(f))
            .find(|&t| target.trajectory.state_at(t).speed == 0.0)
            .expect("target must stop");
        assert!(s.duration - stop_t >= 5.0, "stop at {stop_t}");
        // and stops in front of the ego, inside sensor range
        let stopped = target.trajectory.state_at(s.duration);
        assert!(stopped.pose.x > 2.0 && stopped.pose.x < 10.0);
    }

    #[test]
    fn crossing_is_tangential_mid_scenario() {
        let s = crossing();
        let tr = &s.objects[0].trajectory;
        // the target crosses y = 0 inside the scenario, moving +y at x = 10
        let before = tr.state_at(0.0).pose.y;
        let after = tr.state_at(s.duration).pose.y;
        assert!(before < 0.0 && after > 0.0);
        assert_eq!(tr.state_at(2.0).pose.x, 10.0);
    }

    #[test]
    fn ghost_storm_is_static_with_ghosts() {
        let s = ghost_storm();
        assert!(s.movers().next().is_none());
        assert!(s.noise.ghost_rate > 0.0);
    }
}
