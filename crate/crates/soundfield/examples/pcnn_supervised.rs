//! Trains a network that maps microphone observations to plane wave
//! coefficients. The training pairs come from simulated rooms with random
//! source positions, so one trained model serves a whole scene family.

use soundfield::error::Result;
use soundfield::expansion::{
    build_dictionary, default_ridge_lambda, evaluate_expansion, ridge_solve, BasisSpec,
};
use soundfield::harness::{build_eval_grid, nmse};
use soundfield::neural::{
    generate_training_set, supervised_train, Activation, SupervisedConfig, SupervisedTarget,
    TrainingSetSpec,
};
use soundfield::sim::{make_array, shoebox_atf, ArraySpec, RegionSpec, RoomSpec};
use soundfield::Point3;

fn main() -> Result<()> {
    let room = RoomSpec::new([5.0, 4.0, 3.0], 0.5, 343.0)?;
    let region = RegionSpec::Ball {
        center: [2.2, 1.8, 1.4],
        radius: 0.3,
    };
    let array = ArraySpec::Grid {
        center: [2.2, 1.8, 1.4],
        half_extents: [0.25, 0.25, 0.25],
        counts: [3, 3, 2],
    };
    let frequency_hz = 350.0;
    let k = 2.0 * std::f64::consts::PI * frequency_hz / room.sound_speed;

    let spec = TrainingSetSpec {
        room: room.clone(),
        region: region.clone(),
        array: array.clone(),
        frequency_hz,
        snr_db: Some(30.0),
        max_order: 3,
        wall_margin: 0.3,
    };
    let basis = BasisSpec::plane_wave_fibonacci(32)?;
    let target = SupervisedTarget::ExpansionCoefficients { basis };

    println!("generating 64 training rooms...");
    let data = generate_training_set(&spec, &target, 64, 7)?;
    println!(
        "dataset: {} examples, {} inputs, {} targets each",
        data.len(),
        2 * data.mic_positions().len(),
        data.targets()[0].len()
    );

    let config = SupervisedConfig {
        hidden: vec![24],
        activation: Activation::Tanh,
        iterations: 2500,
        step_size: 1e-2,
        seed: 1,
    };
    println!("training for {} iterations...", config.iterations);
    let report = supervised_train(&data, &config)?;
    println!(
        "loss {:.3e} -> {:.3e}",
        report.trace[0],
        report.trace.last().expect("nonempty trace")
    );

    // score on a source the net has never seen
    let held_out = Point3::new(4.3, 0.8, 2.3);
    let mics = make_array(&array, 7)?;
    let observed = shoebox_atf(&room, &held_out, &mics, k, 3)?;
    let grid = build_eval_grid(&region, 5)?;
    let truth = shoebox_atf(&room, &held_out, &grid, k, 3)?;
    let estimate = report.model.field_at(&observed, &grid)?;
    println!(
        "field error for an unseen source: {:.1} dB",
        nmse(&estimate, &truth)?
    );

    // reference: fitting the same basis directly to these observations,
    // which solves a fresh linear system instead of one forward pass
    let basis = BasisSpec::plane_wave_fibonacci(32)?;
    let dict = build_dictionary(&basis, &mics, k)?;
    let direct = ridge_solve(&dict, &observed, default_ridge_lambda(&dict))?;
    let direct_field = evaluate_expansion(&basis, &direct, &grid, k)?;
    println!(
        "direct ridge fit of the same basis: {:.1} dB",
        nmse(&direct_field, &truth)?
    );
    Ok(())
}
