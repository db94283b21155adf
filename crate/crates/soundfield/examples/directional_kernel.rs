//! When the dominant propagation direction is known, a von Mises-Fisher
//! weighted kernel beats the uniform one. A far away source makes the
//! field nearly a plane wave, so the prior direction is simply the line
//! from source to array.

use soundfield::error::Result;
use soundfield::harness::{build_eval_grid, nmse};
use soundfield::kernel::{default_lambda, gram_matrix, kernel_fit, kernel_predict, KernelSpec};
use soundfield::sim::{green_free_field, make_array, ArraySpec, ObservationSet, RegionSpec};
use soundfield::specfun::Direction;
use soundfield::{wavenumber, Point3};

fn main() -> Result<()> {
    let k = wavenumber(700.0);
    let center = Point3::new(0.0, 0.0, 0.0);
    let region = RegionSpec::Ball {
        center: [0.0, 0.0, 0.0],
        radius: 0.3,
    };
    let source = Point3::new(12.0, -5.0, 3.0);

    let mics = make_array(
        &ArraySpec::RandomInRegion {
            region: region.clone(),
            count: 12,
        },
        21,
    )?;
    let pressures = mics
        .iter()
        .map(|m| green_free_field(m, &source, k))
        .collect::<Result<Vec<_>>>()?;
    let obs = ObservationSet::new(k, mics, pressures)?;
    let grid = build_eval_grid(&region, 6)?;
    let truth = grid
        .iter()
        .map(|p| green_free_field(p, &source, k))
        .collect::<Result<Vec<_>>>()?;

    // arrival direction of the wave, pointing from the source to the array
    let arrival = Direction::new(center - source)?;

    for (label, spec) in [
        ("uniform", KernelSpec::uniform(k)?),
        ("directional (beta = 5)", KernelSpec::directional(k, arrival, 5.0)?),
        ("directional (beta = 20)", KernelSpec::directional(k, arrival, 20.0)?),
    ] {
        let lambda = default_lambda(&gram_matrix(&spec, obs.positions())?);
        let solution = kernel_fit(&spec, &obs, lambda)?;
        let estimate = kernel_predict(&spec, &solution, &grid);
        println!("{label:<24} {:.1} dB", nmse(&estimate, &truth)?);
    }
    Ok(())
}
