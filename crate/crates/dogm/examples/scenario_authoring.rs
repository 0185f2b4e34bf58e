//! Build a scenario in code, save it as JSON, reload it, and run a few
//! frames — the round trip every custom scenario goes through.
//!
//!     cargo run --release --example scenario_authoring

use dogm::grid::Pose;
use dogm::pipeline::PipelineRun;
use dogm::scenario::{
    ObjectKind, RectShape, Scenario, ScenarioObject, SensorModality, SensorRig, Trajectory,
};
use dogm::Params;

fn main() {
    // A van pulls away from standstill while a fence lines the road.
    let duration = 4.0;
    let scenario = Scenario {
        name: "pull_away".into(),
        duration,
        dt: 0.1,
        seed: 42,
        grid: Default::default(),
        ego: Trajectory::stationary(Pose::new(0.0, 0.0, 0.0), duration),
        objects: vec![
            ScenarioObject {
                id: 1,
                kind: ObjectKind::Vehicle,
                shape: RectShape {
                    length: 5.2,
                    width: 2.0,
                },
                // at rest for a second, then accelerating away at 2 m/s²
                trajectory: Trajectory::start(Pose::new(8.0, 1.5, 0.0), 0.0)
                    .cruise(1.0)
                    .advance(duration - 1.0, 2.0)
                    .build(),
            },
            ScenarioObject {
                id: 2,
                kind: ObjectKind::Fence,
                shape: RectShape {
                    length: 24.0,
                    width: 0.4,
                },
                trajectory: Trajectory::stationary(Pose::new(4.0, -5.0, 0.0), duration),
            },
        ],
        rig: SensorRig::default_rig(),
        noise: Default::default(),
    };

    let dir = std::env::temp_dir().join("dogm_scenario_authoring");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pull_away.json");
    scenario.to_json_file(&path).unwrap();
    println!("wrote {}", path.display());

    let reloaded = Scenario::from_json_file(&path).unwrap();
    assert_eq!(reloaded, scenario);
    println!("reloaded identically; {} frames at {} Hz", reloaded.frame_count(), 1.0 / reloaded.dt);

    // sanity-run the first second
    let mut run = PipelineRun::new(reloaded, Params::default(), SensorModality::Radar, 42, 1)
        .expect("valid scenario");
    for _ in 0..10 {
        let out = run.step();
        println!(
            "frame {:2}: {} radar detections, {} labeled mover cells",
            out.frame,
            out.diagnostics.radar_detections,
            out.truth.l_dyn.len()
        );
    }
    println!("scenario file is ready for `dogm run --scenario {}`", path.display());
}
