//! Reconstructs the field of a free-space point source from a handful of
//! microphones with a ridge-regularized plane wave expansion.

use num_complex::Complex64;
use soundfield::error::Result;
use soundfield::expansion::{
    build_dictionary, default_ridge_lambda, evaluate_expansion, ridge_solve, BasisSpec,
};
use soundfield::harness::{build_eval_grid, nmse};
use soundfield::sim::{green_free_field, make_array, ArraySpec, RegionSpec};
use soundfield::{wavenumber, Point3};

fn main() -> Result<()> {
    let k = wavenumber(600.0);
    let region = RegionSpec::Ball {
        center: [0.0, 0.0, 0.0],
        radius: 0.4,
    };
    let source = Point3::new(2.0, 0.6, -0.3);

    let mics = make_array(
        &ArraySpec::RandomInRegion {
            region: region.clone(),
            count: 24,
        },
        3,
    )?;
    let observed: Vec<Complex64> = mics
        .iter()
        .map(|m| green_free_field(m, &source, k))
        .collect::<Result<_>>()?;

    // the default dictionary picks its size from the region's kR product
    let basis = BasisSpec::default_plane_wave(k, &region)?;
    let dict = build_dictionary(&basis, &mics, k)?;
    let lambda = default_ridge_lambda(&dict);
    let solution = ridge_solve(&dict, &observed, lambda)?;
    println!(
        "fitted {} plane waves to {} microphones with lambda = {lambda:.3e}",
        dict.cols(),
        dict.rows()
    );

    let grid = build_eval_grid(&region, 6)?;
    let truth: Vec<Complex64> = grid
        .iter()
        .map(|p| green_free_field(p, &source, k))
        .collect::<Result<_>>()?;
    let estimate = evaluate_expansion(&basis, &solution, &grid, k)?;
    println!(
        "reconstruction error over {} grid points: {:.1} dB",
        grid.len(),
        nmse(&estimate, &truth)?
    );
    Ok(())
}
