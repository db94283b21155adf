//! Linear expansions into element solutions of the Helmholtz equation:
//! dictionary assembly, ridge and ℓ1 fits, truncation-order rules and
//! field evaluation.

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_solve, compensated_ad_mul, compensated_ad_mul_vec, compensated_mul_ad,
    largest_singular_value,
};
use crate::sim::RegionSpec;
use crate::specfun::{
    fibonacci_directions, sph_bessel_j, sph_harmonic, Direction, SphericalHarmonicIndex,
    MAX_ORDER,
};
use crate::Point3;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

/// Family of Helmholtz element solutions spanning the expansion.
///
/// Plane-wave entries are e^{−jk⟨η,r⟩} (a wave arriving from η under the
/// e^{−jωt} convention), spherical-wave entries j_ν(k‖r−r_o‖)·Y_{ν,μ},
/// equivalent-source entries the free-field Green's function from source
/// points that must lie strictly outside the reconstruction region.
#[derive(Clone, Debug)]
pub enum BasisSpec {
    PlaneWave { directions: Vec<Direction> },
    SphericalWave { order: usize, center: Point3 },
    EquivalentSource { positions: Vec<Point3> },
}

impl BasisSpec {
    /// Number of basis functions L.
    pub fn len(&self) -> usize {
        match self {
            BasisSpec::PlaneWave { directions } => directions.len(),
            BasisSpec::SphericalWave { order, .. } => (order + 1) * (order + 1),
            BasisSpec::EquivalentSource { positions } => positions.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Plane-wave set over `count` Fibonacci directions.
    pub fn plane_wave_fibonacci(count: usize) -> Result<Self> {
        Ok(BasisSpec::PlaneWave {
            directions: fibonacci_directions(count)?,
        })
    }

    /// Plane-wave set sized to match the spherical-harmonic dimension of
    /// the region's bandwidth, doubled for overcompleteness.
    pub fn default_plane_wave(k: f64, region: &RegionSpec) -> Result<Self> {
        let order = truncation_order(k, region.circumscribing_radius(), TruncationRule::CeilEkrOver2)?;
        Self::plane_wave_fibonacci(2 * (order + 1) * (order + 1))
    }

    /// Spherical-wave set centred on the region, truncated by `rule`.
    pub fn default_spherical(k: f64, region: &RegionSpec, rule: TruncationRule) -> Result<Self> {
        let order = truncation_order(k, region.circumscribing_radius(), rule)?;
        Ok(BasisSpec::SphericalWave {
            order,
            center: region.center(),
        })
    }

    /// Equivalent sources on a sphere of 2.5× the region's circumscribing
    /// radius. The wide clearance keeps every source strictly outside the
    /// region with room to spare, so the sources' near fields (which vary
    /// much faster than the wavelength) never dominate inside it.
    pub fn equivalent_source_sphere(region: &RegionSpec, count: usize) -> Result<Self> {
        let radius = 2.5 * region.circumscribing_radius();
        let center = region.center();
        let positions = fibonacci_directions(count)?
            .into_iter()
            .map(|d| center + d.as_vector() * radius)
            .collect();
        Ok(BasisSpec::EquivalentSource { positions })
    }
}

/// Complex I×L matrix of basis functions evaluated at I points, together
/// with the generating spec and wavenumber. Column order is the listing
/// order of the spec (harmonics ordered as `SphericalHarmonicIndex::up_to`).
#[derive(Clone, Debug)]
pub struct Dictionary {
    matrix: DMatrix<Complex64>,
    spec: BasisSpec,
    wavenumber: f64,
}

impl Dictionary {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Writes the matrix entries in row-major order as `index,real,imag`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let entries = self.matrix.transpose(); // row-major traversal
        write_complex_csv(path, entries.as_slice())
    }
}

/// Evaluates one basis function at one point.
fn basis_entry(spec: &BasisSpec, col: usize, point: &Point3, k: f64) -> Result<Complex64> {
    match spec {
        BasisSpec::PlaneWave { directions } => {
            let phase = -k * directions[col].dot(point);
            Ok(Complex64::from_polar(1.0, phase))
        }
        BasisSpec::SphericalWave { order, center } => {
            let offset = point - center;
            let radius = offset.norm();
            let dir = if radius < 1e-12 {
                // j_ν(0) = 0 for ν ≥ 1, so the direction is irrelevant here
                Direction::zenith()
            } else {
                Direction::new(offset)?
            };
            let idx = SphericalHarmonicIndex::up_to(*order)
                .nth(col)
                .expect("column index within (order+1)^2");
            let jv = sph_bessel_j(idx.order(), k * radius)?;
            Ok(jv * sph_harmonic(idx, dir))
        }
        BasisSpec::EquivalentSource { positions } => {
            crate::sim::green_free_field(point, &positions[col], k)
        }
    }
}

/// Assembles the I×L dictionary matrix at the given evaluation points.
/// Rows are filled in parallel; the result is independent of thread count.
pub fn build_dictionary(spec: &BasisSpec, points: &[Point3], k: f64) -> Result<Dictionary> {
    if points.is_empty() {
        return Err(Error::domain("dictionary needs at least one evaluation point"));
    }
    if spec.is_empty() {
        return Err(Error::domain("basis needs at least one element"));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain("wavenumber must be positive"));
    }
    if let BasisSpec::SphericalWave { order, .. } = spec {
        if *order > MAX_ORDER {
            return Err(Error::domain(format!(
                "spherical truncation order {order} exceeds cap {MAX_ORDER}"
            )));
        }
    }
    let cols = spec.len();
    let rows: Vec<Vec<Complex64>> = points
        .par_iter()
        .map(|p| (0..cols).map(|l| basis_entry(spec, l, p, k)).collect())
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_row_iterator(points.len(), cols, rows.into_iter().flatten());
    Ok(Dictionary {
        matrix,
        spec: spec.clone(),
        wavenumber: k,
    })
}

/// Expansion coefficients with fit diagnostics.
#[derive(Clone, Debug)]
pub struct ExpansionSolution {
    coefficients: DVector<Complex64>,
    lambda: f64,
    residual_norm: f64,
    iterations: usize,
    converged: bool,
}

impl ExpansionSolution {
    pub fn coefficients(&self) -> &[Complex64] {
        self.coefficients.as_slice()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// ‖y − Φγ‖ at the returned coefficients.
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Iteration count; 0 for direct solves.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// False only when an iterative solve hit its iteration cap.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Writes the coefficients as `index,real,imag`.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        write_complex_csv(path, self.coefficients.as_slice())
    }
}

fn write_complex_csv(path: &Path, values: &[Complex64]) -> Result<()> {
    let mut out = Vec::with_capacity(values.len() * 24 + 16);
    writeln!(out, "index,real,imag")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{},{}", i, v.re, v.im)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Minimizer of ‖y − Φγ‖² + λ‖γ‖², via the normal equations when L ≤ I
/// and the dual form Φᴴ(ΦΦᴴ + λI)⁻¹y when the dictionary is overcomplete.
pub fn ridge_solve(dict: &Dictionary, y: &[Complex64], lambda: f64) -> Result<ExpansionSolution> {
    let (gamma, residual) = ridge_core(&dict.matrix, y, lambda)?;
    Ok(ExpansionSolution {
        coefficients: gamma,
        lambda,
        residual_norm: residual,
        iterations: 0,
        converged: true,
    })
}

fn ridge_core(
    phi: &DMatrix<Complex64>,
    y: &[Complex64],
    lambda: f64,
) -> Result<(DVector<Complex64>, f64)> {
    if y.len() != phi.nrows() {
        return Err(Error::domain(format!(
            "{} observations but dictionary has {} rows",
            y.len(),
            phi.nrows()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain("regularization must be finite and nonnegative"));
    }
    let y = DVector::from_column_slice(y);
    let ridge_diag = |mut a: DMatrix<Complex64>| {
        for i in 0..a.nrows() {
            a[(i, i)] += Complex64::new(lambda, 0.0);
        }
        a
    };
    let gamma = if phi.ncols() <= phi.nrows() {
        let a = ridge_diag(compensated_ad_mul(phi));
        let rhs = compensated_ad_mul_vec(phi, &y);
        let (gamma, cond) = cholesky_solve(a, &rhs)?;
        if lambda == 0.0 && cond > 1e12 {
            return Err(Error::IllPosed(format!(
                "unregularized normal equations have condition estimate {cond:.2e}"
            )));
        }
        gamma
    } else {
        let g = ridge_diag(compensated_mul_ad(phi));
        let (alpha, cond) = cholesky_solve(g, &y)?;
        if lambda == 0.0 && cond > 1e12 {
            return Err(Error::IllPosed(format!(
                "unregularized dual system has condition estimate {cond:.2e}"
            )));
        }
        compensated_ad_mul_vec(phi, &alpha)
    };
    let residual = (&y - phi * &gamma).norm();
    Ok((gamma, residual))
}

/// Approximate minimizer of ‖y − Φγ‖² + λ‖γ‖₁ by FISTA with complex
/// soft-thresholding (magnitude shrinks, phase is kept) and restart on
/// objective increase. A non-converged result carries `converged() ==
/// false` rather than an error.
pub fn fista_l1(
    dict: &Dictionary,
    y: &[Complex64],
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<ExpansionSolution> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain("ℓ1 regularization must be positive"));
    }
    let (gamma, residual, iterations, converged) =
        prox_gradient_l1(&dict.matrix, y, lambda, max_iter, tol, true)?;
    Ok(ExpansionSolution {
        coefficients: gamma,
        lambda,
        residual_norm: residual,
        iterations,
        converged,
    })
}

fn soft_threshold(v: &DVector<Complex64>, amount: f64) -> DVector<Complex64> {
    v.map(|c| {
        let m = c.norm();
        if m <= amount {
            Complex64::new(0.0, 0.0)
        } else {
            c * ((m - amount) / m)
        }
    })
}

fn prox_gradient_l1(
    phi: &DMatrix<Complex64>,
    y: &[Complex64],
    lambda: f64,
    max_iter: usize,
    tol: f64,
    momentum: bool,
) -> Result<(DVector<Complex64>, f64, usize, bool)> {
    if y.len() != phi.nrows() {
        return Err(Error::domain(format!(
            "{} observations but dictionary has {} rows",
            y.len(),
            phi.nrows()
        )));
    }
    let y = DVector::from_column_slice(y);
    let cols = phi.ncols();

    // γ = 0 is optimal whenever λ dominates the data correlation
    let correlation = phi.ad_mul(&y);
    let linf = correlation.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if lambda >= 2.0 * linf {
        let zero = DVector::zeros(cols);
        return Ok((zero, y.norm(), 0, true));
    }

    let sigma = largest_singular_value(phi, 20);
    // 1% margin against power-iteration underestimate of the Lipschitz
    // constant 2σ²
    let step = 1.0 / (2.02 * sigma * sigma);
    let shrink = lambda * step;

    let objective = |g: &DVector<Complex64>| {
        (&y - phi * g).norm_squared() + lambda * g.iter().map(|c| c.norm()).sum::<f64>()
    };

    let mut gamma = DVector::zeros(cols);
    let mut z = gamma.clone();
    let mut t = 1.0_f64;
    let mut obj = objective(&gamma);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=max_iter {
        iterations = iter;
        let grad = phi.ad_mul(&(phi * &z - &y)) * Complex64::new(2.0, 0.0);
        let mut cand = soft_threshold(&(&z - &grad * Complex64::new(step, 0.0)), shrink);
        let mut obj_cand = objective(&cand);
        if obj_cand > obj {
            // momentum overshot: restart from the last accepted iterate
            t = 1.0;
            let grad = phi.ad_mul(&(phi * &gamma - &y)) * Complex64::new(2.0, 0.0);
            cand = soft_threshold(&(&gamma - &grad * Complex64::new(step, 0.0)), shrink);
            obj_cand = objective(&cand);
        }
        let change = (obj - obj_cand).abs();
        if momentum {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let blend = Complex64::new((t - 1.0) / t_next, 0.0);
            z = &cand + (&cand - &gamma) * blend;
            t = t_next;
        } else {
            z = cand.clone();
        }
        gamma = cand;
        obj = obj_cand;
        if change <= tol * obj.max(1e-300) {
            converged = true;
            break;
        }
    }
    let residual = (&y - phi * &gamma).norm();
    Ok((gamma, residual, iterations, converged))
}

/// Truncation-order heuristics for a region of radius R.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncationRule {
    /// ⌈kR⌉
    CeilKr,
    /// ⌈e·kR/2⌉
    CeilEkrOver2,
}

pub fn truncation_order(k: f64, radius: f64, rule: TruncationRule) -> Result<usize> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain("wavenumber must be positive"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::domain("region radius must be positive"));
    }
    let kr = k * radius;
    let value = match rule {
        TruncationRule::CeilKr => kr.ceil(),
        TruncationRule::CeilEkrOver2 => (std::f64::consts::E * kr / 2.0).ceil(),
    };
    if value > MAX_ORDER as f64 {
        return Err(Error::domain(format!(
            "truncation order {value} exceeds cap {MAX_ORDER}; lower the frequency or shrink the region"
        )));
    }
    Ok(value as usize)
}

/// Field of the expansion Σ γ_l φ_l at the given points.
pub fn evaluate_expansion(
    spec: &BasisSpec,
    sol: &ExpansionSolution,
    points: &[Point3],
    k: f64,
) -> Result<Vec<Complex64>> {
    evaluate_coefficients(spec, sol.coefficients.as_slice(), points, k)
}

/// Same combination for a raw coefficient slice.
pub fn evaluate_coefficients(
    spec: &BasisSpec,
    coefficients: &[Complex64],
    points: &[Point3],
    k: f64,
) -> Result<Vec<Complex64>> {
    if coefficients.len() != spec.len() {
        return Err(Error::domain(format!(
            "{} coefficients for a basis of {} elements",
            coefficients.len(),
            spec.len()
        )));
    }
    let gamma = DVector::from_column_slice(coefficients);
    let dict = build_dictionary(spec, points, k)?;
    Ok((dict.matrix * gamma).iter().copied().collect())
}

/// Customary ridge weight: one thousandth of the mean squared column norm.
pub fn default_ridge_lambda(dict: &Dictionary) -> f64 {
    1e-3 * dict.matrix.norm_squared() / dict.cols() as f64
}

/// Largest absolute correlation ‖Φᴴy‖∞ between atoms and data. The ℓ1
/// solution path is identically zero once λ reaches twice this value, so it
/// is the natural scale for choosing λ.
pub fn max_correlation(dict: &Dictionary, y: &[Complex64]) -> Result<f64> {
    if y.len() != dict.rows() {
        return Err(Error::domain(format!(
            "{} observations for a dictionary with {} rows",
            y.len(),
            dict.rows()
        )));
    }
    let yv = DVector::from_column_slice(y);
    Ok(dict
        .matrix
        .ad_mul(&yv)
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_vector(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn random_ball_points(count: usize, center: Point3, radius: f64, seed: u64) -> Vec<Point3> {
        let region = RegionSpec::Ball {
            center: [center.x, center.y, center.z],
            radius,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| region.sample_interior(&mut rng)).collect()
    }

    fn solution_with(coefficients: Vec<Complex64>) -> ExpansionSolution {
        ExpansionSolution {
            coefficients: DVector::from_vec(coefficients),
            lambda: 0.0,
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    #[test]
    fn plane_wave_row_at_origin_is_ones() {
        let spec = BasisSpec::plane_wave_fibonacci(12).unwrap();
        let dict = build_dictionary(&spec, &[Point3::zeros()], 7.0).unwrap();
        for l in 0..12 {
            assert!((dict.matrix()[(0, l)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn spherical_row_at_center() {
        let center = Point3::new(0.4, -0.2, 0.9);
        let spec = BasisSpec::SphericalWave { order: 3, center };
        let dict = build_dictionary(&spec, &[center], 11.0).unwrap();
        let expected = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(dict.matrix()[(0, 0)].re, expected, max_relative = 1e-14);
        for l in 1..16 {
            assert_eq!(dict.matrix()[(0, l)], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn spherical_dictionary_column_count() {
        let spec = BasisSpec::SphericalWave {
            order: 4,
            center: Point3::zeros(),
        };
        let dict = build_dictionary(&spec, &[Point3::new(0.1, 0.0, 0.0)], 5.0).unwrap();
        assert_eq!(dict.cols(), 25);
    }

    #[test]
    fn equivalent_source_at_evaluation_point_is_singular() {
        let p = Point3::new(0.1, 0.2, 0.3);
        let spec = BasisSpec::EquivalentSource { positions: vec![p] };
        assert!(matches!(
            build_dictionary(&spec, &[p], 5.0),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn plane_wave_column_solves_helmholtz_fd() {
        // fourth-order five-point stencil per axis; a plane wave must null
        // (∇²+k²) to the stencil's truncation error
        let k = 10.0;
        let eta = Direction::from_components(0.3, -0.5, 0.8).unwrap();
        let field = |p: &Point3| Complex64::from_polar(1.0, -k * eta.dot(p));
        let p0 = Point3::new(0.2, 0.1, -0.3);
        let h = 0.05 / k;
        let mut lap = Complex64::new(0.0, 0.0);
        for axis in 0..3 {
            let mut unit = Point3::zeros();
            unit[axis] = 1.0;
            let f = |s: f64| field(&(p0 + unit * (s * h)));
            lap += (-f(2.0) + 16.0 * f(1.0) - 30.0 * f(0.0) + 16.0 * f(-1.0) - f(-2.0))
                / Complex64::new(12.0 * h * h, 0.0);
        }
        let residual = (lap + k * k * field(&p0)).norm() / (k * k);
        assert!(residual < 1e-6, "plane-wave FD residual {residual}");
    }

    #[test]
    fn all_basis_kinds_solve_helmholtz_on_grid() {
        // seven-point stencil residual, normalized by k²·max|f|, stays
        // below 1e-4 at spacing λ/300 for every basis family
        let k = crate::wavenumber(500.0);
        let region = RegionSpec::Ball {
            center: [0.1, -0.2, 0.15],
            radius: 0.35,
        };
        let center = region.center();
        let h = 2.0 * std::f64::consts::PI / k / 300.0;

        let specs = [
            BasisSpec::plane_wave_fibonacci(30).unwrap(),
            BasisSpec::SphericalWave { order: 5, center },
            BasisSpec::equivalent_source_sphere(&region, 40).unwrap(),
        ];
        for spec in specs {
            let coeffs = random_vector(spec.len(), 3);
            let sol = solution_with(coeffs);
            // 7³ lattice around the region center
            let mut points = Vec::new();
            for ix in -3i32..=3 {
                for iy in -3i32..=3 {
                    for iz in -3i32..=3 {
                        points.push(
                            center + Point3::new(ix as f64, iy as f64, iz as f64) * h,
                        );
                    }
                }
            }
            let f = evaluate_expansion(&spec, &sol, &points, k).unwrap();
            let at = |ix: i32, iy: i32, iz: i32| {
                f[((ix + 3) * 49 + (iy + 3) * 7 + (iz + 3)) as usize]
            };
            let fmax = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let mut worst = 0.0_f64;
            for ix in -2i32..=2 {
                for iy in -2i32..=2 {
                    for iz in -2i32..=2 {
                        let lap = (at(ix + 1, iy, iz)
                            + at(ix - 1, iy, iz)
                            + at(ix, iy + 1, iz)
                            + at(ix, iy - 1, iz)
                            + at(ix, iy, iz + 1)
                            + at(ix, iy, iz - 1)
                            - 6.0 * at(ix, iy, iz))
                            / Complex64::new(h * h, 0.0);
                        let res = (lap + k * k * at(ix, iy, iz)).norm();
                        worst = worst.max(res / (k * k * fmax));
                    }
                }
            }
            assert!(worst < 1e-4, "Helmholtz residual {worst} for {spec:?}");
        }
    }

    #[test]
    fn ridge_identity_dictionary_returns_data() {
        let phi = DMatrix::identity(5, 5);
        let y = random_vector(5, 1);
        let (gamma, residual) = ridge_core(&phi, &y, 0.0).unwrap();
        for (g, yi) in gamma.iter().zip(&y) {
            assert!((g - yi).norm() < 1e-14);
        }
        assert!(residual < 1e-14);
    }

    #[test]
    fn ridge_heavy_shrinkage_bound() {
        // with unit-norm columns and λ = 1e12, ‖γ‖ ≤ ‖Φᴴy‖/λ
        let mut phi = random_matrix(6, 3, 2);
        for mut col in phi.column_iter_mut() {
            let n = col.norm();
            col /= Complex64::new(n, 0.0);
        }
        let y = random_vector(6, 3);
        let (gamma, _) = ridge_core(&phi, &y, 1e12).unwrap();
        let correlation = phi.ad_mul(&DVector::from_column_slice(&y)).norm();
        assert!(gamma.norm() <= correlation / 1e12 * (1.0 + 1e-9));
    }

    #[test]
    fn ridge_matches_dense_inverse_oracle() {
        let phi = random_matrix(20, 8, 4);
        let y = random_vector(20, 5);
        let lambda = 0.1;
        let (gamma, _) = ridge_core(&phi, &y, lambda).unwrap();

        let mut a = phi.ad_mul(&phi);
        for i in 0..8 {
            a[(i, i)] += Complex64::new(lambda, 0.0);
        }
        let oracle = a.try_inverse().unwrap() * phi.ad_mul(&DVector::from_column_slice(&y));
        assert!((&gamma - &oracle).norm() / oracle.norm() < 1e-8);
    }

    #[test]
    fn ridge_dual_path_matches_primal_formula() {
        // overcomplete: L > I routes through the dual solve
        let phi = random_matrix(8, 20, 6);
        let y = random_vector(8, 7);
        let lambda = 0.5;
        let (gamma, _) = ridge_core(&phi, &y, lambda).unwrap();

        let mut a = phi.ad_mul(&phi);
        for i in 0..20 {
            a[(i, i)] += Complex64::new(lambda, 0.0);
        }
        let oracle = a.try_inverse().unwrap() * phi.ad_mul(&DVector::from_column_slice(&y));
        assert!((&gamma - &oracle).norm() / oracle.norm() < 1e-8);
    }

    #[test]
    fn ridge_rejects_rank_deficiency_without_regularization() {
        let mut phi = random_matrix(6, 4, 8);
        let dup = phi.column(0).into_owned();
        phi.set_column(2, &dup);
        let y = random_vector(6, 9);
        assert!(matches!(
            ridge_core(&phi, &y, 0.0),
            Err(Error::IllPosed(_))
        ));
    }

    #[test]
    fn ridge_is_linear_in_data() {
        let phi = random_matrix(12, 6, 10);
        let y1 = DVector::from_column_slice(&random_vector(12, 11));
        let y2 = DVector::from_column_slice(&random_vector(12, 12));
        let a = Complex64::new(2.0, -1.0);
        let b = Complex64::new(-0.3, 0.7);
        let mixed: Vec<Complex64> = (&y1 * a + &y2 * b).iter().copied().collect();
        let (g_mixed, _) = ridge_core(&phi, &mixed, 0.2).unwrap();
        let (g1, _) = ridge_core(&phi, y1.as_slice(), 0.2).unwrap();
        let (g2, _) = ridge_core(&phi, y2.as_slice(), 0.2).unwrap();
        let combo = g1 * a + g2 * b;
        assert!((&g_mixed - &combo).norm() / combo.norm() < 1e-10);
    }

    #[test]
    fn fista_zero_data_gives_zero() {
        let spec = BasisSpec::plane_wave_fibonacci(8).unwrap();
        let points = random_ball_points(6, Point3::zeros(), 0.3, 1);
        let dict = build_dictionary(&spec, &points, 9.0).unwrap();
        let y = vec![Complex64::new(0.0, 0.0); 6];
        let sol = fista_l1(&dict, &y, 0.1, 100, 1e-10).unwrap();
        assert!(sol.coefficients().iter().all(|c| c.norm() == 0.0));
        assert!(sol.converged());
    }

    #[test]
    fn fista_recovers_single_atom() {
        let k = 12.0;
        let spec = BasisSpec::plane_wave_fibonacci(64).unwrap();
        let points = random_ball_points(32, Point3::zeros(), 0.4, 2);
        let dict = build_dictionary(&spec, &points, k).unwrap();
        let atom = 17;
        let y: Vec<Complex64> = dict.matrix().column(atom).iter().copied().collect();

        // oracle: exhaustive single-atom least squares picks the same column
        let yv = DVector::from_column_slice(&y);
        let mut best = (f64::INFINITY, usize::MAX, Complex64::new(0.0, 0.0));
        for l in 0..dict.cols() {
            let c = dict.matrix().column(l);
            let amp = c.dotc(&yv) / Complex64::new(c.norm_squared(), 0.0);
            let residual = (&yv - c * amp).norm();
            if residual < best.0 {
                best = (residual, l, amp);
            }
        }
        assert_eq!(best.1, atom);
        assert_relative_eq!(best.2.norm(), 1.0, max_relative = 1e-12);

        let linf = dict
            .matrix()
            .ad_mul(&yv)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let sol = fista_l1(&dict, &y, 1e-4 * linf, 5000, 1e-14).unwrap();
        let mags: Vec<f64> = sol.coefficients().iter().map(|c| c.norm()).collect();
        let max_mag = mags.iter().cloned().fold(0.0, f64::max);
        let argmax = mags.iter().position(|&m| m == max_mag).unwrap();
        assert_eq!(argmax, atom);
        assert!((mags[atom] - 1.0).abs() < 0.05, "atom magnitude {}", mags[atom]);
        for (l, &m) in mags.iter().enumerate() {
            if l != atom {
                assert!(m < 0.05 * max_mag, "spurious atom {l} magnitude {m}");
            }
        }
    }

    #[test]
    fn fista_kill_condition_zeroes_everything() {
        let spec = BasisSpec::plane_wave_fibonacci(10).unwrap();
        let points = random_ball_points(7, Point3::zeros(), 0.3, 3);
        let dict = build_dictionary(&spec, &points, 8.0).unwrap();
        let y = random_vector(7, 4);
        let yv = DVector::from_column_slice(&y);
        let linf = dict
            .matrix()
            .ad_mul(&yv)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let lambda = 2.0001 * linf;
        let sol = fista_l1(&dict, &y, lambda, 100, 1e-10).unwrap();
        assert!(sol.coefficients().iter().all(|c| c.norm() == 0.0));
        // direct optimality of γ = 0: the gradient of the smooth part at
        // zero, 2Φᴴy, must lie inside the λ subdifferential ball
        assert!(2.0 * linf <= lambda);
    }

    #[test]
    fn fista_matches_longer_ista_run() {
        let phi = random_matrix(16, 24, 13);
        let y = random_vector(16, 14);
        let yv = DVector::from_column_slice(&y);
        let linf = phi.ad_mul(&yv).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let lambda = 0.1 * linf;
        let objective = |g: &DVector<Complex64>| {
            (&yv - &phi * g).norm_squared() + lambda * g.iter().map(|c| c.norm()).sum::<f64>()
        };

        let (fista, _, _, _) = prox_gradient_l1(&phi, &y, lambda, 500, 0.0, true).unwrap();
        let (ista, _, _, _) = prox_gradient_l1(&phi, &y, lambda, 5000, 0.0, false).unwrap();
        let of = objective(&fista);
        let oi = objective(&ista);
        assert!(of <= yv.norm_squared()); // never worse than the zero start
        assert_relative_eq!(of, oi, max_relative = 1e-6);
    }

    #[test]
    fn truncation_order_examples() {
        let k = crate::wavenumber(1000.0);
        assert_eq!(truncation_order(k, 0.5, TruncationRule::CeilKr).unwrap(), 10);
        assert_eq!(
            truncation_order(k, 0.5, TruncationRule::CeilEkrOver2).unwrap(),
            13
        );
        assert_eq!(truncation_order(2.0, 1.0, TruncationRule::CeilKr).unwrap(), 2);
        assert!(truncation_order(-1.0, 0.5, TruncationRule::CeilKr).is_err());
    }

    #[test]
    fn evaluate_zero_and_single_coefficient() {
        let spec = BasisSpec::plane_wave_fibonacci(5).unwrap();
        let points = random_ball_points(4, Point3::zeros(), 0.5, 5);
        let k = 6.0;

        let zeros = solution_with(vec![Complex64::new(0.0, 0.0); 5]);
        for v in evaluate_expansion(&spec, &zeros, &points, k).unwrap() {
            assert_eq!(v, Complex64::new(0.0, 0.0));
        }

        let mut coeffs = vec![Complex64::new(0.0, 0.0); 5];
        coeffs[0] = Complex64::new(1.0, 0.0);
        let single = solution_with(coeffs);
        let field = evaluate_expansion(&spec, &single, &points, k).unwrap();
        if let BasisSpec::PlaneWave { directions } = &spec {
            for (p, v) in points.iter().zip(&field) {
                let expected = Complex64::from_polar(1.0, -k * directions[0].dot(p));
                assert!((v - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn fit_then_evaluate_interpolates() {
        let k = 9.0;
        let spec = BasisSpec::plane_wave_fibonacci(25).unwrap();
        let points = random_ball_points(30, Point3::zeros(), 0.4, 6);
        let dict = build_dictionary(&spec, &points, k).unwrap();
        // data in the dictionary's span
        let y: Vec<Complex64> = (dict.matrix().column(3) * Complex64::new(1.0, 0.0)
            + dict.matrix().column(11) * Complex64::new(0.0, 0.5))
        .iter()
        .copied()
        .collect();
        let sol = ridge_solve(&dict, &y, 1e-8).unwrap();
        let y_norm = DVector::from_column_slice(&y).norm();
        assert!(sol.residual_norm() <= 1e-3 * y_norm);

        let refit = evaluate_expansion(&spec, &sol, &points, k).unwrap();
        let err: f64 = refit
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-3 * y_norm);
    }

    #[test]
    fn nested_spherical_dictionaries_do_not_lose_fit() {
        let k = crate::wavenumber(500.0);
        let region = RegionSpec::Ball {
            center: [0.0, 0.0, 0.0],
            radius: 0.4,
        };
        let points = random_ball_points(60, Point3::zeros(), 0.4, 7);
        // field from a distant point source, outside both spans
        let src = Point3::new(1.5, -0.8, 1.1);
        let y: Vec<Complex64> = points
            .iter()
            .map(|p| crate::sim::green_free_field(p, &src, k).unwrap())
            .collect();

        let small = BasisSpec::default_spherical(k, &region, TruncationRule::CeilKr).unwrap();
        let large =
            BasisSpec::default_spherical(k, &region, TruncationRule::CeilEkrOver2).unwrap();
        assert!(large.len() > small.len());

        let lambda = 1e-8;
        let res_small = ridge_solve(&build_dictionary(&small, &points, k).unwrap(), &y, lambda)
            .unwrap()
            .residual_norm();
        let res_large = ridge_solve(&build_dictionary(&large, &points, k).unwrap(), &y, lambda)
            .unwrap()
            .residual_norm();
        let y_norm = DVector::from_column_slice(&y).norm();
        assert!(res_large <= res_small + 1e-9 * y_norm);
    }

    #[test]
    fn csv_export_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let sol = solution_with(vec![
            Complex64::new(1.0, -2.5),
            Complex64::new(0.125, 0.0),
        ]);
        let path_a = dir.path().join("a.csv");
        let path_b = dir.path().join("b.csv");
        sol.export_csv(&path_a).unwrap();
        sol.export_csv(&path_b).unwrap();
        let a = std::fs::read(&path_a).unwrap();
        let b = std::fs::read(&path_b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,real,imag"));
        assert_eq!(lines.next(), Some("0,1,-2.5"));
        assert_eq!(lines.next(), Some("1,0.125,0"));
    }

    #[test]
    fn dictionary_csv_has_all_entries() {
        let dir = tempfile::tempdir().unwrap();
        let spec = BasisSpec::plane_wave_fibonacci(4).unwrap();
        let points = random_ball_points(3, Point3::zeros(), 0.2, 8);
        let dict = build_dictionary(&spec, &points, 5.0).unwrap();
        let path = dir.path().join("dict.csv");
        dict.export_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 12);
        // row-major: entry 1 is row 0, column 1
        let line = text.lines().nth(2).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        let re: f64 = fields[1].parse().unwrap();
        let im: f64 = fields[2].parse().unwrap();
        assert_relative_eq!(re, dict.matrix()[(0, 1)].re, max_relative = 1e-12);
        assert_relative_eq!(im, dict.matrix()[(0, 1)].im, max_relative = 1e-12);
    }

    #[test]
    fn default_ridge_lambda_tracks_column_energy() {
        // plane-wave atoms have unit magnitude everywhere, so the mean
        // squared column norm is exactly the number of rows
        let spec = BasisSpec::plane_wave_fibonacci(4).unwrap();
        let points = random_ball_points(7, Point3::zeros(), 0.3, 9);
        let dict = build_dictionary(&spec, &points, 6.0).unwrap();
        assert_relative_eq!(default_ridge_lambda(&dict), 1e-3 * 7.0, max_relative = 1e-12);
    }

    #[test]
    fn max_correlation_peaks_at_a_contained_atom() {
        let spec = BasisSpec::plane_wave_fibonacci(12).unwrap();
        let points = random_ball_points(9, Point3::zeros(), 0.3, 10);
        let dict = build_dictionary(&spec, &points, 8.0).unwrap();
        let atom: Vec<Complex64> = dict.matrix().column(2).iter().copied().collect();
        let c = max_correlation(&dict, &atom).unwrap();
        assert_relative_eq!(c, 9.0, max_relative = 1e-12);
        assert!(max_correlation(&dict, &atom[..5]).is_err());
    }
}
