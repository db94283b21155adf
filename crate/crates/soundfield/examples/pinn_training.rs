//! Trains a physics-informed network and an identically initialized plain
//! network on the same sparse observations. The Helmholtz penalty is what
//! keeps the estimate honest between the microphones.

use num_complex::Complex64;
use soundfield::error::Result;
use soundfield::harness::{build_eval_grid, nmse};
use soundfield::neural::{mlp_forward, pinn_train, PinnConfig};
use soundfield::sim::{green_free_field, make_array, ArraySpec, ObservationSet, RegionSpec};
use soundfield::{wavenumber, Point3};

fn main() -> Result<()> {
    let k = wavenumber(500.0);
    let region = RegionSpec::Ball {
        center: [0.0, 0.0, 0.0],
        radius: 0.4,
    };
    let source = Point3::new(1.6, 0.9, -0.5);

    let mics = make_array(
        &ArraySpec::RandomInRegion {
            region: region.clone(),
            count: 20,
        },
        2,
    )?;
    let pressures: Vec<Complex64> = mics
        .iter()
        .map(|m| green_free_field(m, &source, k))
        .collect::<Result<_>>()?;
    let obs = ObservationSet::new(k, mics, pressures)?;

    let grid = build_eval_grid(&region, 6)?;
    let truth: Vec<Complex64> = grid
        .iter()
        .map(|p| green_free_field(p, &source, k))
        .collect::<Result<_>>()?;

    let iterations = 2000;
    let seed = 4;
    for (label, config) in [
        ("plain network", PinnConfig::plain(&region, iterations, seed)?),
        ("physics informed", PinnConfig::pinn(&region, iterations, seed)?),
    ] {
        let report = pinn_train(&obs, &config)?;
        let first = &report.trace[0];
        let last = report.trace.last().expect("nonempty trace");
        let estimate: Vec<Complex64> = grid
            .iter()
            .map(|p| mlp_forward(&report.model, p))
            .collect::<Result<_>>()?;
        println!("{label}:");
        println!("  epsilon = {:.3e}", report.epsilon);
        println!(
            "  data loss {:.3e} -> {:.3e}, pde loss {:.3e} -> {:.3e}",
            first.j_data, last.j_data, first.j_pde, last.j_pde
        );
        println!("  field error on the grid: {:.1} dB", nmse(&estimate, &truth)?);
    }
    Ok(())
}
