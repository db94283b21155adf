//! Evaluation harness: error metrics, a finite-difference Helmholtz checker,
//! and experiment orchestration across estimators and frequency sweeps.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{
    build_dictionary, default_ridge_lambda, evaluate_expansion, fista_l1, max_correlation,
    ridge_solve, BasisSpec,
};
use crate::kernel::{default_lambda, gram_matrix, kernel_fit, kernel_predict, KernelSpec};
use crate::neural::{
    generate_training_set, mlp_forward, pinn_train, supervised_train, Activation, PdeWeight,
    PinnConfig, SupervisedConfig, SupervisedTarget, TrainingSetSpec,
};
use crate::sim::{
    add_noise, default_max_order, make_array, per_frequency_seed, shoebox_atf, ObservationSet,
    RegionSpec, SceneSpec,
};
use crate::specfun::{fibonacci_ball, Direction};
use crate::Point3;

/// Smallest reportable error. Perfect reconstructions land here instead of
/// at negative infinity.
pub const NMSE_FLOOR_DB: f64 = -150.0;

const FISTA_LAMBDA_RATIO: f64 = 0.01;
const FISTA_MAX_ITER: usize = 500;
const FISTA_TOL: f64 = 1e-8;
const NEURAL_ITERATIONS: usize = 3000;
const PCNN_EXAMPLES: usize = 48;
const PCNN_ITERATIONS: usize = 1500;
const PCNN_STEP_SIZE: f64 = 1e-2;
const PCNN_WALL_MARGIN: f64 = 0.3;

/// Normalized mean square error in dB: 10·log10(Σ|est−truth|² / Σ|truth|²),
/// floored at −150 dB. Returns NaN when the estimate is non-finite, so one
/// failed estimator cannot poison a sweep.
pub fn nmse(est: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if est.is_empty() || est.len() != truth.len() {
        return Err(Error::domain(format!(
            "{} estimates against {} true values",
            est.len(),
            truth.len()
        )));
    }
    let denom: f64 = truth.iter().map(|t| t.norm_sqr()).sum();
    if !denom.is_finite() {
        return Err(Error::domain("true field must be finite"));
    }
    if denom == 0.0 {
        return Err(Error::domain("true field is identically zero"));
    }
    if est.iter().any(|e| !e.is_finite()) {
        return Ok(f64::NAN);
    }
    let num: f64 = est
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).norm_sqr())
        .sum();
    let db = 10.0 * (num / denom).log10();
    Ok(db.max(NMSE_FLOOR_DB))
}

/// Worst relative Helmholtz residual of a field over a cubic lattice filling
/// the region: max over interior nodes of |∇²u + k²u| / (k²·max|u|), with
/// the Laplacian from the 7-point second-order stencil. The sampler is
/// called once with every lattice node inside the region.
pub fn helmholtz_residual<F>(sample: F, k: f64, region: &RegionSpec, spacing: f64) -> Result<f64>
where
    F: FnOnce(&[Point3]) -> Result<Vec<Complex64>>,
{
    region.validate()?;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain("wavenumber must be positive"));
    }
    let wavelength = 2.0 * std::f64::consts::PI / k;
    if !(spacing > 0.0) || spacing > wavelength / 40.0 {
        return Err(Error::domain(format!(
            "grid spacing {spacing} exceeds a fortieth of the wavelength {wavelength}"
        )));
    }
    let c = region.center();
    let half = match region {
        RegionSpec::Ball { radius, .. } => [*radius; 3],
        RegionSpec::Box { half_extents, .. } => *half_extents,
    };
    let counts: [i64; 3] = std::array::from_fn(|a| (2.0 * half[a] / spacing).floor() as i64);
    let coord = |a: usize, i: i64| c[a] - half[a] + i as f64 * spacing;

    let mut points = Vec::new();
    let mut index: HashMap<(i64, i64, i64), usize> = HashMap::new();
    for i in 0..=counts[0] {
        for j in 0..=counts[1] {
            for l in 0..=counts[2] {
                let p = Point3::new(coord(0, i), coord(1, j), coord(2, l));
                if region.contains(&p) {
                    index.insert((i, j, l), points.len());
                    points.push(p);
                }
            }
        }
    }
    let values = sample(&points)?;
    if values.len() != points.len() {
        return Err(Error::domain(format!(
            "sampler returned {} values for {} points",
            values.len(),
            points.len()
        )));
    }
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::DegenerateInput(
            "field is zero or non-finite over the grid".into(),
        ));
    }

    let h2 = spacing * spacing;
    let k2 = k * k;
    let mut worst: Option<f64> = None;
    for (&(i, j, l), &at) in &index {
        let neighbors = [
            index.get(&(i - 1, j, l)),
            index.get(&(i + 1, j, l)),
            index.get(&(i, j - 1, l)),
            index.get(&(i, j + 1, l)),
            index.get(&(i, j, l - 1)),
            index.get(&(i, j, l + 1)),
        ];
        if neighbors.iter().any(|n| n.is_none()) {
            continue;
        }
        let sum: Complex64 = neighbors.iter().map(|n| values[*n.unwrap()]).sum();
        let laplacian = (sum - 6.0 * values[at]) / h2;
        let residual = (laplacian + k2 * values[at]).norm() / (k2 * peak);
        worst = Some(worst.map_or(residual, |w| residual.max(w)));
    }
    worst.ok_or_else(|| {
        Error::DegenerateInput("no interior nodes; refine the spacing or enlarge the region".into())
    })
}

/// True and estimated pressures over a shared evaluation grid at one
/// wavenumber.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    wavenumber: f64,
    positions: Vec<Point3>,
    truth: Vec<Complex64>,
    estimates: BTreeMap<String, Vec<Complex64>>,
}

impl FieldGrid {
    pub fn new(wavenumber: f64, positions: Vec<Point3>, truth: Vec<Complex64>) -> Result<Self> {
        if positions.is_empty() || positions.len() != truth.len() {
            return Err(Error::domain(format!(
                "{} positions against {} true values",
                positions.len(),
                truth.len()
            )));
        }
        if !(wavenumber.is_finite() && wavenumber > 0.0) {
            return Err(Error::domain("wavenumber must be positive"));
        }
        Ok(FieldGrid {
            wavenumber,
            positions,
            truth,
            estimates: BTreeMap::new(),
        })
    }

    pub fn add_estimate(&mut self, name: &str, values: Vec<Complex64>) -> Result<()> {
        if values.len() != self.positions.len() {
            return Err(Error::domain(format!(
                "{} values for a grid of {} points",
                values.len(),
                self.positions.len()
            )));
        }
        self.estimates.insert(name.to_string(), values);
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn truth(&self) -> &[Complex64] {
        &self.truth
    }

    pub fn estimate(&self, name: &str) -> Option<&[Complex64]> {
        self.estimates.get(name).map(Vec::as_slice)
    }

    pub fn estimator_names(&self) -> impl Iterator<Item = &str> {
        self.estimates.keys().map(String::as_str)
    }
}

/// Axis-aligned slice through a field grid: `axis` is the fixed coordinate
/// (0, 1 or 2) and `value` its position. The slice snaps to the nearest
/// layer of grid points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub axis: usize,
    pub value: f64,
}

/// Writes one field of the grid on a plane as `x,y,re,im,magnitude` rows,
/// sorted by the two in-plane coordinates. `field` is an estimator name or
/// `"truth"`.
pub fn export_heatmap(grid: &FieldGrid, field: &str, plane: &PlaneSpec, path: &Path) -> Result<()> {
    let values = if field == "truth" {
        &grid.truth
    } else {
        grid.estimates
            .get(field)
            .ok_or_else(|| Error::domain(format!("no field named `{field}` in the grid")))?
    };
    if plane.axis > 2 || !plane.value.is_finite() {
        return Err(Error::domain("plane axis must be 0, 1 or 2 with a finite value"));
    }

    // distinct coordinate layers along the slice axis
    let mut coords: Vec<f64> = grid.positions.iter().map(|p| p[plane.axis]).collect();
    coords.sort_by(|a, b| a.partial_cmp(b).expect("grid positions are finite"));
    coords.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    let nearest = *coords
        .iter()
        .min_by(|a, b| {
            (*a - plane.value)
                .abs()
                .partial_cmp(&(*b - plane.value).abs())
                .expect("finite")
        })
        .expect("grid is nonempty");
    let max_gap = coords
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
        .max(1e-9);
    if (nearest - plane.value).abs() > max_gap {
        return Err(Error::domain(format!(
            "plane {}={} does not intersect the grid",
            ["x", "y", "z"][plane.axis],
            plane.value
        )));
    }

    let (ax, ay) = match plane.axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut rows: Vec<(f64, f64, Complex64)> = grid
        .positions
        .iter()
        .zip(values)
        .filter(|(p, _)| (p[plane.axis] - nearest).abs() <= 1e-9)
        .map(|(p, v)| (p[ax], p[ay], *v))
        .collect();
    if rows.is_empty() {
        return Err(Error::domain("plane does not intersect the grid"));
    }
    rows.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite")
            .then(a.1.partial_cmp(&b.1).expect("finite"))
    });

    let mut text = String::from("x,y,re,im,magnitude\n");
    for (x, y, v) in rows {
        writeln!(text, "{},{},{},{},{}", x, y, v.re, v.im, v.norm()).expect("string write");
    }
    fs::write(path, text).map_err(Error::from)
}

/// Evaluation lattice description: points per axis over the region's
/// bounding box, keeping only points inside the region.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGridSpec {
    pub per_axis: usize,
}

/// Builds the evaluation lattice for a region.
pub fn build_eval_grid(region: &RegionSpec, per_axis: usize) -> Result<Vec<Point3>> {
    region.validate()?;
    if per_axis < 2 {
        return Err(Error::domain("evaluation grid needs at least two points per axis"));
    }
    let c = region.center();
    let (half, is_ball) = match region {
        RegionSpec::Ball { radius, .. } => ([*radius; 3], true),
        RegionSpec::Box { half_extents, .. } => (*half_extents, false),
    };
    // t runs over [−1, 1] with exact endpoints, so the lattice tiles the
    // bounding box without rounding past its faces
    let coord = |a: usize, i: usize| {
        let t = 2.0 * i as f64 / (per_axis - 1) as f64 - 1.0;
        c[a] + half[a] * t
    };
    let mut points = Vec::new();
    for i in 0..per_axis {
        for j in 0..per_axis {
            for l in 0..per_axis {
                let p = Point3::new(coord(0, i), coord(1, j), coord(2, l));
                if !is_ball || region.contains(&p) {
                    points.push(p);
                }
            }
        }
    }
    if points.is_empty() {
        return Err(Error::DegenerateInput(
            "no lattice point falls inside the region; increase per_axis".into(),
        ));
    }
    Ok(points)
}

/// Frequency sweep: `start_hz`, `start_hz + step_hz`, … up to `stop_hz`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub step_hz: f64,
}

impl SweepSpec {
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if !(self.start_hz.is_finite() && self.start_hz > 0.0) || self.stop_hz < self.start_hz {
            return Err(Error::domain("sweep needs 0 < start_hz ≤ stop_hz"));
        }
        if !(self.step_hz.is_finite() && self.step_hz > 0.0) {
            return Err(Error::domain("sweep step must be positive"));
        }
        let mut out = Vec::new();
        let mut i = 0;
        loop {
            let f = self.start_hz + i as f64 * self.step_hz;
            if f > self.stop_hz + 1e-9 * self.step_hz {
                break;
            }
            out.push(f);
            i += 1;
        }
        Ok(out)
    }
}

/// One estimator entry of an experiment. Omitted parameters fall back to
/// the documented defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EstimatorSpec {
    PlaneWaveRidge {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        count: Option<usize>,
    },
    SphericalRidge {
        #[serde(default)]
        lambda: Option<f64>,
    },
    EquivalentSourceRidge {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        count: Option<usize>,
    },
    Fista {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        max_iter: Option<usize>,
    },
    UniformKernel {
        #[serde(default)]
        lambda: Option<f64>,
    },
    DirectionalKernel {
        peak: [f64; 3],
        sharpness: f64,
        #[serde(default)]
        lambda: Option<f64>,
    },
    GaussianKernel {
        #[serde(default)]
        width: Option<f64>,
        #[serde(default)]
        lambda: Option<f64>,
    },
    Pinn {
        #[serde(default)]
        iterations: Option<usize>,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        collocation: Option<usize>,
        #[serde(default)]
        hidden: Option<Vec<usize>>,
        #[serde(default)]
        step_size: Option<f64>,
    },
    PlainNn {
        #[serde(default)]
        iterations: Option<usize>,
        #[serde(default)]
        hidden: Option<Vec<usize>>,
        #[serde(default)]
        step_size: Option<f64>,
    },
    Pcnn {
        #[serde(default)]
        training_examples: Option<usize>,
        #[serde(default)]
        iterations: Option<usize>,
        #[serde(default)]
        hidden: Option<Vec<usize>>,
        #[serde(default)]
        basis_count: Option<usize>,
        #[serde(default)]
        step_size: Option<f64>,
    },
}

impl EstimatorSpec {
    /// The registry name, as written in configs and result rows.
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorSpec::PlaneWaveRidge { .. } => "plane_wave_ridge",
            EstimatorSpec::SphericalRidge { .. } => "spherical_ridge",
            EstimatorSpec::EquivalentSourceRidge { .. } => "equivalent_source_ridge",
            EstimatorSpec::Fista { .. } => "fista",
            EstimatorSpec::UniformKernel { .. } => "uniform_kernel",
            EstimatorSpec::DirectionalKernel { .. } => "directional_kernel",
            EstimatorSpec::GaussianKernel { .. } => "gaussian_kernel",
            EstimatorSpec::Pinn { .. } => "pinn",
            EstimatorSpec::PlainNn { .. } => "plain_nn",
            EstimatorSpec::Pcnn { .. } => "pcnn",
        }
    }
}

/// A full experiment: which scene, which estimators, which frequencies,
/// where to evaluate, and the seed everything derives from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scene file; a relative path is resolved against the config file.
    pub scene: PathBuf,
    pub estimators: Vec<EstimatorSpec>,
    pub sweep: SweepSpec,
    /// Region of interest Ω that the evaluation grid fills.
    pub region: RegionSpec,
    pub grid: EvalGridSpec,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        if cfg.scene.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.scene = dir.join(&cfg.scene);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        fs::write(path, text).map_err(Error::from)
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::domain("experiment needs at least one estimator"));
        }
        self.sweep.frequencies()?;
        self.region.validate()?;
        if self.grid.per_axis < 2 {
            return Err(Error::domain("evaluation grid needs at least two points per axis"));
        }
        Ok(())
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub frequency_hz: f64,
    pub estimator: String,
    pub nmse_db: f64,
    pub fit_seconds: f64,
}

/// Everything a sweep produced, in frequency order.
#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    /// One grid per frequency, keyed by the frequency in Hz.
    pub fields: Vec<(f64, FieldGrid)>,
    pub region: RegionSpec,
}

impl ExperimentResults {
    /// The deterministic results table: `frequency_hz,estimator,nmse_db`.
    pub fn results_csv(&self) -> String {
        results_table(&self.rows)
    }

    /// Wall-clock fit times, kept apart from the results so those stay
    /// byte-identical across runs: `frequency_hz,estimator,fit_seconds`.
    pub fn timings_csv(&self) -> String {
        timings_table(&self.rows)
    }
}

/// Renders result rows as `frequency_hz,estimator,nmse_db` CSV text.
pub fn results_table(rows: &[ResultRow]) -> String {
    let mut text = String::from("frequency_hz,estimator,nmse_db\n");
    for r in rows {
        writeln!(text, "{},{},{}", r.frequency_hz, r.estimator, r.nmse_db).expect("string write");
    }
    text
}

/// Renders result rows as `frequency_hz,estimator,fit_seconds` CSV text.
pub fn timings_table(rows: &[ResultRow]) -> String {
    let mut text = String::from("frequency_hz,estimator,fit_seconds\n");
    for r in rows {
        writeln!(text, "{},{},{}", r.frequency_hz, r.estimator, r.fit_seconds)
            .expect("string write");
    }
    text
}

/// Fits one estimator on one observation set and predicts the grid field.
#[allow(clippy::too_many_arguments)]
fn run_estimator(
    spec: &EstimatorSpec,
    obs: &ObservationSet,
    region: &RegionSpec,
    grid: &[Point3],
    scene: &SceneSpec,
    frequency_hz: f64,
    max_order: usize,
    global_seed: u64,
    freq_seed: u64,
) -> Result<Vec<Complex64>> {
    let k = obs.wavenumber();
    match spec {
        EstimatorSpec::PlaneWaveRidge { lambda, count } => {
            let basis = match count {
                Some(n) => BasisSpec::plane_wave_fibonacci(*n)?,
                None => BasisSpec::default_plane_wave(k, region)?,
            };
            ridge_family(&basis, obs, grid, *lambda)
        }
        EstimatorSpec::SphericalRidge { lambda } => {
            let basis = BasisSpec::default_spherical(
                k,
                region,
                crate::expansion::TruncationRule::CeilEkrOver2,
            )?;
            ridge_family(&basis, obs, grid, *lambda)
        }
        EstimatorSpec::EquivalentSourceRidge { lambda, count } => {
            let n = match count {
                Some(n) => *n,
                None => BasisSpec::default_plane_wave(k, region)?.len(),
            };
            let basis = BasisSpec::equivalent_source_sphere(region, n)?;
            ridge_family(&basis, obs, grid, *lambda)
        }
        EstimatorSpec::Fista {
            lambda,
            count,
            max_iter,
        } => {
            let basis = match count {
                Some(n) => BasisSpec::plane_wave_fibonacci(*n)?,
                None => BasisSpec::default_plane_wave(k, region)?,
            };
            let dict = build_dictionary(&basis, obs.positions(), k)?;
            let lambda = match lambda {
                Some(l) => *l,
                None => FISTA_LAMBDA_RATIO * max_correlation(&dict, obs.pressures())?,
            };
            let sol = fista_l1(
                &dict,
                obs.pressures(),
                lambda,
                max_iter.unwrap_or(FISTA_MAX_ITER),
                FISTA_TOL,
            )?;
            evaluate_expansion(&basis, &sol, grid, k)
        }
        EstimatorSpec::UniformKernel { lambda } => {
            kernel_family(KernelSpec::uniform(k)?, obs, grid, *lambda)
        }
        EstimatorSpec::DirectionalKernel {
            peak,
            sharpness,
            lambda,
        } => {
            let dir = Direction::from_components(peak[0], peak[1], peak[2])?;
            kernel_family(KernelSpec::directional(k, dir, *sharpness)?, obs, grid, *lambda)
        }
        EstimatorSpec::GaussianKernel { width, lambda } => {
            let kspec = match width {
                Some(w) => KernelSpec::gaussian(k, *w)?,
                None => KernelSpec::gaussian_default(k)?,
            };
            kernel_family(kspec, obs, grid, *lambda)
        }
        EstimatorSpec::Pinn {
            iterations,
            epsilon,
            collocation,
            hidden,
            step_size,
        } => {
            let mut cfg = PinnConfig::pinn(
                region,
                iterations.unwrap_or(NEURAL_ITERATIONS),
                freq_seed,
            )?;
            if let Some(h) = hidden {
                cfg.hidden = h.clone();
            }
            if let Some(s) = step_size {
                cfg.step_size = *s;
            }
            if let Some(n) = collocation {
                cfg.collocation = fibonacci_ball(*n, cfg.center, cfg.radius)?;
            }
            if let Some(e) = epsilon {
                cfg.pde_weight = PdeWeight::Fixed(*e);
            }
            let n = cfg.collocation.len().max(1) as f64;
            let report = pinn_train(obs, &cfg)?;
            let final_pde = report.trace.last().map_or(0.0, |r| r.j_pde);
            log::info!(
                "pinn at {frequency_hz} Hz: ε = {:.3e}, final J_PDE/N = {:.3e}",
                report.epsilon,
                final_pde / n
            );
            grid.iter().map(|p| mlp_forward(&report.model, p)).collect()
        }
        EstimatorSpec::PlainNn {
            iterations,
            hidden,
            step_size,
        } => {
            let mut cfg = PinnConfig::plain(
                region,
                iterations.unwrap_or(NEURAL_ITERATIONS),
                freq_seed,
            )?;
            if let Some(h) = hidden {
                cfg.hidden = h.clone();
            }
            if let Some(s) = step_size {
                cfg.step_size = *s;
            }
            let report = pinn_train(obs, &cfg)?;
            grid.iter().map(|p| mlp_forward(&report.model, p)).collect()
        }
        EstimatorSpec::Pcnn {
            training_examples,
            iterations,
            hidden,
            basis_count,
            step_size,
        } => {
            let basis = match basis_count {
                Some(n) => BasisSpec::plane_wave_fibonacci(*n)?,
                None => BasisSpec::default_plane_wave(k, region)?,
            };
            let tspec = TrainingSetSpec {
                room: scene.room_spec()?,
                region: region.clone(),
                array: scene.array.clone(),
                frequency_hz,
                snr_db: scene.snr_db,
                max_order,
                wall_margin: PCNN_WALL_MARGIN,
            };
            // the global seed reproduces the observation array geometry
            let data = generate_training_set(
                &tspec,
                &SupervisedTarget::ExpansionCoefficients { basis },
                training_examples.unwrap_or(PCNN_EXAMPLES),
                global_seed,
            )?;
            let cfg = SupervisedConfig {
                hidden: hidden.clone().unwrap_or_else(|| vec![32]),
                activation: Activation::Tanh,
                iterations: iterations.unwrap_or(PCNN_ITERATIONS),
                step_size: step_size.unwrap_or(PCNN_STEP_SIZE),
                seed: freq_seed,
            };
            let report = supervised_train(&data, &cfg)?;
            report.model.field_at(obs.pressures(), grid)
        }
    }
}

fn ridge_family(
    basis: &BasisSpec,
    obs: &ObservationSet,
    grid: &[Point3],
    lambda: Option<f64>,
) -> Result<Vec<Complex64>> {
    let k = obs.wavenumber();
    let dict = build_dictionary(basis, obs.positions(), k)?;
    let lambda = lambda.unwrap_or_else(|| default_ridge_lambda(&dict));
    let sol = ridge_solve(&dict, obs.pressures(), lambda)?;
    evaluate_expansion(basis, &sol, grid, k)
}

fn kernel_family(
    kspec: KernelSpec,
    obs: &ObservationSet,
    grid: &[Point3],
    lambda: Option<f64>,
) -> Result<Vec<Complex64>> {
    let lambda = match lambda {
        Some(l) => l,
        None => default_lambda(&gram_matrix(&kspec, obs.positions())?),
    };
    let sol = kernel_fit(&kspec, obs, lambda)?;
    Ok(kernel_predict(&kspec, &sol, grid))
}

/// Scene-derived data shared by every experiment entry point.
struct Prepared {
    scene: SceneSpec,
    room: crate::sim::RoomSpec,
    source: Point3,
    mics: Vec<Point3>,
    grid: Vec<Point3>,
    freqs: Vec<f64>,
    max_order: usize,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let scene = SceneSpec::load(&cfg.scene)?;
    let room = scene.room_spec()?;
    let mics = make_array(&scene.array, cfg.seed)?;
    let source = Point3::new(scene.source[0], scene.source[1], scene.source[2]);
    let grid = build_eval_grid(&cfg.region, cfg.grid.per_axis)?;
    let freqs = cfg.sweep.frequencies()?;
    let max_order = scene
        .max_order
        .unwrap_or_else(|| default_max_order(room.reflection));
    Ok(Prepared {
        scene,
        room,
        source,
        mics,
        grid,
        freqs,
        max_order,
    })
}

/// Runs the full sweep: per frequency, simulate the truth on the grid,
/// observe with noise, fit every estimator, and score it. Frequencies run
/// in parallel; results are in frequency order regardless of thread count,
/// and all randomness derives from the config seed. An estimator failure
/// becomes a NaN row and the sweep continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    let Prepared {
        scene,
        room,
        source: src,
        mics,
        grid,
        freqs,
        max_order,
    } = prepare(cfg)?;

    let per_freq: Vec<(Vec<ResultRow>, FieldGrid)> = freqs
        .par_iter()
        .enumerate()
        .map(|(i, &f)| -> Result<(Vec<ResultRow>, FieldGrid)> {
            let k = 2.0 * std::f64::consts::PI * f / room.sound_speed;
            let truth = shoebox_atf(&room, &src, &grid, k, max_order)?;
            let clean = shoebox_atf(&room, &src, &mics, k, max_order)?;
            let obs = ObservationSet::new(k, mics.clone(), clean)?;
            let freq_seed = per_frequency_seed(cfg.seed, i);
            let obs = match scene.snr_db {
                Some(snr) => add_noise(&obs, snr, freq_seed)?,
                None => obs,
            };
            let mut field = FieldGrid::new(k, grid.clone(), truth.clone())?;
            let mut rows = Vec::with_capacity(cfg.estimators.len());
            for est in &cfg.estimators {
                let label = est.label();
                let started = Instant::now();
                let outcome = run_estimator(
                    est, &obs, &cfg.region, &grid, &scene, f, max_order, cfg.seed, freq_seed,
                );
                let fit_seconds = started.elapsed().as_secs_f64();
                let nmse_db = match outcome {
                    Ok(pred) => {
                        let db = nmse(&pred, &truth)?;
                        field.add_estimate(label, pred)?;
                        db
                    }
                    Err(err) => {
                        log::warn!("{label} failed at {f} Hz: {err}");
                        f64::NAN
                    }
                };
                rows.push(ResultRow {
                    frequency_hz: f,
                    estimator: label.to_string(),
                    nmse_db,
                    fit_seconds,
                });
            }
            Ok((rows, field))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut fields = Vec::with_capacity(freqs.len());
    for (f, (freq_rows, field)) in freqs.iter().zip(per_freq) {
        rows.extend(freq_rows);
        fields.push((*f, field));
    }
    Ok(ExperimentResults {
        rows,
        fields,
        region: cfg.region.clone(),
    })
}

/// Writes `results.csv`, `timings.csv` and per-frequency heatmap slices
/// through the region center into the output directory.
pub fn write_results(results: &ExperimentResults, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("results.csv"), results.results_csv())?;
    fs::write(out_dir.join("timings.csv"), results.timings_csv())?;
    let plane = PlaneSpec {
        axis: 2,
        value: results.region.center().z,
    };
    for (f, field) in &results.fields {
        export_heatmap(
            field,
            "truth",
            &plane,
            &out_dir.join(format!("heatmap_{f}hz_truth.csv")),
        )?;
        let names: Vec<String> = field.estimator_names().map(String::from).collect();
        for name in names {
            export_heatmap(
                field,
                &name,
                &plane,
                &out_dir.join(format!("heatmap_{f}hz_{name}.csv")),
            )?;
        }
    }
    Ok(())
}

/// File name shared by the estimate, evaluate and export stages.
pub fn estimate_file_name(frequency_hz: f64, label: &str) -> String {
    format!("estimate_{frequency_hz}hz_{label}.json")
}

/// Saves every estimated grid field as an observation file named by
/// [`estimate_file_name`]. Returns the number of files written.
pub fn save_estimates(results: &ExperimentResults, dir: &Path) -> Result<usize> {
    fs::create_dir_all(dir)?;
    let mut written = 0;
    for (f, field) in &results.fields {
        let names: Vec<String> = field.estimator_names().map(String::from).collect();
        for name in names {
            let values = field.estimate(&name).expect("listed name").to_vec();
            let obs = ObservationSet::new(field.wavenumber(), field.positions().to_vec(), values)?;
            obs.save(&dir.join(estimate_file_name(*f, &name)))?;
            written += 1;
        }
    }
    Ok(written)
}

fn load_estimate(
    dir: &Path,
    frequency_hz: f64,
    label: &str,
    grid: &[Point3],
    k: f64,
) -> Result<ObservationSet> {
    let path = dir.join(estimate_file_name(frequency_hz, label));
    if !path.exists() {
        return Err(Error::Config {
            path: path.display().to_string(),
            message: "estimate file not found; run the estimate stage first".into(),
        });
    }
    let saved = ObservationSet::load(&path)?;
    let aligned = saved.len() == grid.len()
        && (saved.wavenumber() - k).abs() <= 1e-9 * k
        && saved
            .positions()
            .iter()
            .zip(grid)
            .all(|(a, b)| (a - b).norm() <= 1e-9);
    if !aligned {
        return Err(Error::domain(format!(
            "{} does not match the configured evaluation grid",
            path.display()
        )));
    }
    Ok(saved)
}

/// Scores previously saved estimate files against the freshly simulated
/// truth. Every estimator in the config must have a file for every sweep
/// frequency. Fit times are reported as zero since nothing is refit.
pub fn evaluate_estimates(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<ResultRow>> {
    let prep = prepare(cfg)?;
    let mut rows = Vec::new();
    for &f in &prep.freqs {
        let k = 2.0 * std::f64::consts::PI * f / prep.room.sound_speed;
        let truth = shoebox_atf(&prep.room, &prep.source, &prep.grid, k, prep.max_order)?;
        for est in &cfg.estimators {
            let label = est.label();
            let saved = load_estimate(dir, f, label, &prep.grid, k)?;
            rows.push(ResultRow {
                frequency_hz: f,
                estimator: label.to_string(),
                nmse_db: nmse(saved.pressures(), &truth)?,
                fit_seconds: 0.0,
            });
        }
    }
    Ok(rows)
}

/// Writes heatmap slices through the region center for previously saved
/// estimate files plus the simulated truth. Returns the number of files
/// written.
pub fn export_estimate_heatmaps(cfg: &ExperimentConfig, dir: &Path, out: &Path) -> Result<usize> {
    let prep = prepare(cfg)?;
    fs::create_dir_all(out)?;
    let plane = PlaneSpec {
        axis: 2,
        value: cfg.region.center().z,
    };
    let mut written = 0;
    for &f in &prep.freqs {
        let k = 2.0 * std::f64::consts::PI * f / prep.room.sound_speed;
        let truth = shoebox_atf(&prep.room, &prep.source, &prep.grid, k, prep.max_order)?;
        let mut field = FieldGrid::new(k, prep.grid.clone(), truth)?;
        for est in &cfg.estimators {
            let label = est.label();
            let saved = load_estimate(dir, f, label, &prep.grid, k)?;
            field.add_estimate(label, saved.pressures().to_vec())?;
        }
        export_heatmap(
            &field,
            "truth",
            &plane,
            &out.join(format!("heatmap_{f}hz_truth.csv")),
        )?;
        written += 1;
        for est in &cfg.estimators {
            let label = est.label();
            export_heatmap(
                &field,
                label,
                &plane,
                &out.join(format!("heatmap_{f}hz_{label}.csv")),
            )?;
            written += 1;
        }
    }
    Ok(written)
}
