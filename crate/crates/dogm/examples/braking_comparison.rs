//! Radar vs lidar on the approach-and-brake scenario: a target closes in
//! at 20 km/h, brakes to a stop in front of the stationary ego, parked
//! cars line both sides. Prints the per-phase velocity estimates, the
//! error summary, and the consistency fractions of both pipelines.
//!
//!     cargo run --release --example braking_comparison

use dogm::eval::velocity_mse;
use dogm::pipeline::PipelineRun;
use dogm::scenario::SensorModality;
use dogm::Params;

struct Series {
    est: Vec<Option<f64>>,
    reference: Vec<Option<f64>>,
    consistent: usize,
    defined: usize,
}

fn run(modality: SensorModality) -> Series {
    let scenario = dogm::library::braking();
    let mut run = PipelineRun::new(scenario, Params::default(), modality, 7, 1).unwrap();
    let mut series = Series {
        est: Vec::new(),
        reference: Vec::new(),
        consistent: 0,
        defined: 0,
    };
    while !run.done() {
        let out = run.step();
        series.est.push(out.metrics.v_bar_x);
        series.reference.push(out.metrics.v_ref_x);
        if let Some(c) = out.metrics.consistent {
            series.defined += 1;
            if c {
                series.consistent += 1;
            }
        }
    }
    series
}

fn main() {
    println!("approach-and-brake comparison (seed 7, 100 frames at 10 Hz)\n");
    let radar = run(SensorModality::Radar);
    let lidar = run(SensorModality::Lidar);

    println!("{:>5} {:>8} {:>10} {:>10}", "frame", "v_ref", "radar", "lidar");
    for f in (4..100).step_by(8) {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:9.2}")).unwrap_or_else(|| "        -".into());
        println!(
            "{f:>5} {:>8.2} {} {}",
            radar.reference[f].unwrap_or(f64::NAN),
            fmt(radar.est[f]),
            fmt(lidar.est[f]),
        );
    }

    let radar_err = velocity_mse(&radar.est, &radar.reference).unwrap();
    let lidar_err = velocity_mse(&lidar.est, &lidar.reference).unwrap();
    println!("\nvelocity error over {} defined frames:", radar_err.frames_used);
    println!(
        "  radar: mse {:.4} (m/s)^2, rms {:.3} m/s",
        radar_err.mse, radar_err.rms
    );
    println!(
        "  lidar: mse {:.4} (m/s)^2, rms {:.3} m/s",
        lidar_err.mse, lidar_err.rms
    );
    println!(
        "  lidar/radar rms ratio: {:.2}",
        lidar_err.rms / radar_err.rms
    );
    println!(
        "\nconsistency (95% chi-square, 1 dof): radar {}/{}, lidar {}/{}",
        radar.consistent, radar.defined, lidar.consistent, lidar.defined
    );
    println!("\nthe radar pipeline tracks the braking profile; the lidar one drifts toward zero and wanders at standstill");
}
