//! Recovers a single plane wave from noisy microphone data by sparse
//! regression: FISTA with an l1 penalty concentrates the energy on one
//! dictionary atom while ridge smears it over many.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soundfield::error::Result;
use soundfield::expansion::{
    build_dictionary, fista_l1, max_correlation, ridge_solve, BasisSpec,
};
use soundfield::Point3;

fn main() -> Result<()> {
    let k = 11.0;
    let basis = BasisSpec::plane_wave_fibonacci(64)?;
    let truth_atom = 17;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mics: Vec<Point3> = (0..32)
        .map(|_| {
            Point3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
            )
        })
        .collect();
    let dict = build_dictionary(&basis, &mics, k)?;
    let amplitude = Complex64::new(1.3, -0.4);
    let observed: Vec<Complex64> = (0..mics.len())
        .map(|m| {
            let noise = Complex64::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
            amplitude * dict.matrix()[(m, truth_atom)] + noise
        })
        .collect();

    let lambda = 0.05 * max_correlation(&dict, &observed)?;
    let sparse = fista_l1(&dict, &observed, lambda, 500, 1e-10)?;
    let ridge = ridge_solve(&dict, &observed, 1e-3)?;

    let support = |coeffs: &[Complex64]| {
        let peak = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        coeffs.iter().filter(|c| c.norm() > 0.01 * peak).count()
    };
    println!("true source: atom {truth_atom} with amplitude {amplitude}");
    println!(
        "fista:  {} active atoms, strongest at {}",
        support(sparse.coefficients()),
        arg_peak(sparse.coefficients())
    );
    println!(
        "ridge:  {} active atoms, strongest at {}",
        support(ridge.coefficients()),
        arg_peak(ridge.coefficients())
    );
    Ok(())
}

fn arg_peak(coeffs: &[Complex64]) -> usize {
    let mut best = 0;
    for (i, c) in coeffs.iter().enumerate() {
        if c.norm() > coeffs[best].norm() {
            best = i;
        }
    }
    best
}
