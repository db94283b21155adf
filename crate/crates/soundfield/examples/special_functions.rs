//! The special functions behind every wave-function expansion: spherical
//! Bessel functions, orthonormal spherical harmonics, and Fibonacci point
//! sets for spherical quadrature.

use num_complex::Complex64;
use soundfield::error::Result;
use soundfield::specfun::{
    fibonacci_directions, j0_complex, sph_bessel_j, sph_harmonic, SphericalHarmonicIndex,
};

fn main() -> Result<()> {
    let x: f64 = 2.0;
    println!("spherical Bessel functions at x = {x}");
    println!("  closed form sin(x)/x      = {:+.12e}", x.sin() / x);
    for order in 0..=4 {
        println!("  j_{order}(x)                    = {:+.12e}", sph_bessel_j(order, x)?);
    }

    println!();
    println!("j0 over a squared argument; negative values turn oscillation");
    println!("into the hyperbolic branch without leaving the real axis");
    for z2 in [4.0, 0.0, -4.0] {
        let value = j0_complex(Complex64::new(z2, 0.0));
        println!("  j0(z^2 = {z2:+.1}) = {:+.12}{:+.12}i", value.re, value.im);
    }

    println!();
    println!("Fibonacci directions form a near-uniform spherical quadrature,");
    println!("so each orthonormal harmonic integrates to unit mass");
    let directions = fibonacci_directions(4000)?;
    let weight = 4.0 * std::f64::consts::PI / directions.len() as f64;
    for idx in SphericalHarmonicIndex::up_to(2) {
        let mass: f64 = directions
            .iter()
            .map(|d| sph_harmonic(idx, *d).norm_sqr())
            .sum::<f64>()
            * weight;
        println!(
            "  integral of |Y({}, {:+})|^2 over the sphere = {mass:.6}",
            idx.order(),
            idx.degree()
        );
    }
    Ok(())
}
