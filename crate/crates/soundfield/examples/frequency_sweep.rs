//! Runs a complete experiment: several estimators over a frequency band in
//! one reverberant scene, with per-frequency scores and heatmap slices
//! written as CSV files.

use soundfield::error::Result;
use soundfield::harness::{
    run_experiment, write_results, EstimatorSpec, EvalGridSpec, ExperimentConfig, SweepSpec,
};
use soundfield::sim::{ArraySpec, RegionSpec, SceneRoom, SceneSpec};

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("soundfield_sweep");
    std::fs::create_dir_all(&dir)?;

    let scene = SceneSpec {
        room: SceneRoom {
            dimensions: [4.0, 3.0, 2.5],
            reflection: Some(0.5),
            t60: None,
            sound_speed: 343.0,
        },
        source: [3.2, 2.4, 1.9],
        array: ArraySpec::Grid {
            center: [2.0, 1.5, 1.25],
            half_extents: [0.25, 0.25, 0.25],
            counts: [3, 3, 2],
        },
        frequencies_hz: vec![500.0],
        snr_db: Some(30.0),
        seed: 0,
        max_order: Some(3),
    };
    let scene_path = dir.join("scene.json");
    scene.save(&scene_path)?;

    let config = ExperimentConfig {
        scene: scene_path,
        estimators: vec![
            EstimatorSpec::UniformKernel { lambda: None },
            EstimatorSpec::GaussianKernel {
                width: None,
                lambda: None,
            },
            EstimatorSpec::PlaneWaveRidge {
                lambda: None,
                count: None,
            },
        ],
        sweep: SweepSpec {
            start_hz: 300.0,
            stop_hz: 600.0,
            step_hz: 100.0,
        },
        region: RegionSpec::Ball {
            center: [2.0, 1.5, 1.25],
            radius: 0.3,
        },
        grid: EvalGridSpec { per_axis: 5 },
        seed: 7,
        output_dir: None,
    };

    println!("sweeping 300..600 Hz with 3 estimators...");
    let results = run_experiment(&config)?;
    println!("{:>12} {:>24} {:>10}", "frequency", "estimator", "error dB");
    for row in &results.rows {
        println!(
            "{:>9} Hz {:>24} {:>10.1}",
            row.frequency_hz, row.estimator, row.nmse_db
        );
    }

    let out = dir.join("out");
    write_results(&results, &out)?;
    println!("CSV tables and heatmaps written to {}", out.display());
    Ok(())
}
