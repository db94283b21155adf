//! Training loops: full-batch Adam on the data-plus-PDE loss of a field
//! network, and plain regression for observation-to-field networks.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{Activation, Mlp, MlpGradients, MlpModel};
use crate::error::{Error, Result};
use crate::expansion::{build_dictionary, evaluate_coefficients, ridge_solve, BasisSpec};
use crate::sim::{
    add_noise, make_array, per_frequency_seed, shoebox_atf, ArraySpec, ObservationSet, RegionSpec,
    RoomSpec,
};
use crate::specfun::fibonacci_ball;
use crate::Point3;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Default number of collocation points inside the region of interest.
pub const DEFAULT_COLLOCATION: usize = 56;
/// Default hidden widths of the field network.
pub const DEFAULT_HIDDEN: [usize; 3] = [8, 8, 5];
/// Default Adam step size.
pub const DEFAULT_STEP_SIZE: f64 = 1e-3;
/// Ridge weight used when fitting coefficient targets for training sets.
const COEFFICIENT_FIT_LAMBDA: f64 = 1e-8;

struct Adam {
    m: MlpGradients,
    v: MlpGradients,
    step: f64,
    t: i32,
}

impl Adam {
    fn new(net: &Mlp, step: f64) -> Self {
        Adam {
            m: MlpGradients::zeros_like(net),
            v: MlpGradients::zeros_like(net),
            step,
            t: 0,
        }
    }

    fn update(&mut self, net: &mut Mlp, grads: &MlpGradients) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            step_slice(
                layer.weight.as_mut_slice(),
                self.m.layers[l].weight.as_mut_slice(),
                self.v.layers[l].weight.as_mut_slice(),
                grads.layers[l].weight.as_slice(),
                self.step,
                c1,
                c2,
            );
            step_slice(
                layer.bias.as_mut_slice(),
                self.m.layers[l].bias.as_mut_slice(),
                self.v.layers[l].bias.as_mut_slice(),
                grads.layers[l].bias.as_slice(),
                self.step,
                c1,
                c2,
            );
        }
    }
}

fn step_slice(theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], step: f64, c1: f64, c2: f64) {
    for i in 0..theta.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
        theta[i] -= step * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
    }
}

/// Weight of the PDE term in the composite loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdeWeight {
    /// Fixed ε ≥ 0; zero turns the network into a plain data fit.
    Fixed(f64),
    /// ε chosen at initialization so the PDE term starts at one percent of
    /// the data term.
    AutoBalanced,
}

/// Everything `pinn_train` needs: network architecture, input normalization,
/// the PDE term, and optimizer settings.
#[derive(Debug, Clone)]
pub struct PinnConfig {
    pub center: Point3,
    pub radius: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub pde_weight: PdeWeight,
    pub collocation: Vec<Point3>,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl PinnConfig {
    /// Physics-informed defaults over a region: sine network, auto-balanced
    /// ε, quasi-uniform collocation points filling the region.
    pub fn pinn(region: &RegionSpec, iterations: usize, seed: u64) -> Result<Self> {
        region.validate()?;
        let center = region.center();
        let radius = region.circumscribing_radius();
        Ok(PinnConfig {
            center,
            radius,
            hidden: DEFAULT_HIDDEN.to_vec(),
            activation: Activation::Sine,
            pde_weight: PdeWeight::AutoBalanced,
            collocation: fibonacci_ball(DEFAULT_COLLOCATION, center, radius)?,
            iterations,
            step_size: DEFAULT_STEP_SIZE,
            seed,
        })
    }

    /// Same network with the PDE term switched off entirely.
    pub fn plain(region: &RegionSpec, iterations: usize, seed: u64) -> Result<Self> {
        let mut cfg = PinnConfig::pinn(region, iterations, seed)?;
        cfg.pde_weight = PdeWeight::Fixed(0.0);
        cfg.collocation.clear();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.iter().all(|c| c.is_finite()) || !(self.radius > 0.0) {
            return Err(Error::domain(
                "normalization needs a finite center and a positive radius",
            ));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::domain("step size must be positive"));
        }
        match self.pde_weight {
            PdeWeight::Fixed(e) if !(e.is_finite() && e >= 0.0) => {
                return Err(Error::domain("ε must be finite and nonnegative"));
            }
            PdeWeight::AutoBalanced if self.collocation.is_empty() => {
                return Err(Error::domain(
                    "auto-balancing ε needs at least one collocation point",
                ));
            }
            _ => {}
        }
        if self
            .collocation
            .iter()
            .any(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::domain("collocation points must be finite"));
        }
        Ok(())
    }
}

/// One row of the loss trace. `j_pde` is unweighted; the optimized total is
/// `j_data + ε·j_pde`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub iteration: usize,
    pub j_data: f64,
    pub j_pde: f64,
}

impl LossSample {
    pub fn total(&self, epsilon: f64) -> f64 {
        self.j_data + epsilon * self.j_pde
    }
}

/// Trained field network with its loss trace and instrumentation.
#[derive(Debug, Clone)]
pub struct PinnReport {
    pub model: MlpModel,
    pub trace: Vec<LossSample>,
    /// The ε actually used (resolved when auto-balanced).
    pub epsilon: f64,
    /// How many times a collocation Laplacian was evaluated.
    pub pde_evaluations: u64,
}

impl PinnReport {
    /// Writes the loss trace as `iteration,j_data,j_pde` rows.
    pub fn export_trace_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("iteration,j_data,j_pde\n");
        for row in &self.trace {
            text.push_str(&format!("{},{},{}\n", row.iteration, row.j_data, row.j_pde));
        }
        fs::write(path, text).map_err(Error::from)
    }
}

fn check_field_inputs(positions: &[Point3], values: &[Complex64], k: f64) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::domain("training needs at least one observation"));
    }
    if positions.len() != values.len() {
        return Err(Error::domain(format!(
            "{} positions but {} values",
            positions.len(),
            values.len()
        )));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::domain("wavenumber must be positive"));
    }
    if positions.iter().any(|p| !p.iter().all(|c| c.is_finite()))
        || values.iter().any(|v| !v.is_finite())
    {
        return Err(Error::domain("observations must be finite"));
    }
    Ok(())
}

/// Accumulates the gradient of `j_data + ε·j_pde` and returns the two loss
/// parts. The PDE pass is skipped entirely when ε is zero.
#[allow(clippy::too_many_arguments)]
fn loss_and_grad(
    model: &MlpModel,
    positions: &[Point3],
    values: &[Complex64],
    collocation: &[Point3],
    k: f64,
    epsilon: f64,
    grads: &mut MlpGradients,
    pde_evaluations: &mut u64,
) -> (f64, f64) {
    let net = model.net();
    let mut j_data = 0.0;
    for (p, s) in positions.iter().zip(values) {
        let cache = net.forward_cached(&model.normalized(p));
        let out = cache.output();
        let dre = out[0] - s.re;
        let dim = out[1] - s.im;
        j_data += dre * dre + dim * dim;
        let out_bar = DVector::from_column_slice(&[2.0 * dre, 2.0 * dim]);
        net.backward_data(&cache, &out_bar, grads);
    }
    let mut j_pde = 0.0;
    if epsilon > 0.0 && !collocation.is_empty() {
        let k2 = k * k;
        for p in collocation {
            let cache = net.laplacian_forward(&model.normalized(p), model.dual_seed());
            *pde_evaluations += 1;
            let value = cache.output();
            let lap = cache.laplacian();
            let rho_re = lap[0] + k2 * value[0];
            let rho_im = lap[1] + k2 * value[1];
            j_pde += rho_re * rho_re + rho_im * rho_im;
            let v_bar =
                DVector::from_column_slice(&[2.0 * epsilon * k2 * rho_re, 2.0 * epsilon * k2 * rho_im]);
            let h_bar = DVector::from_column_slice(&[2.0 * epsilon * rho_re, 2.0 * epsilon * rho_im]);
            net.backward_pde(&cache, &v_bar, &h_bar, grads);
        }
    }
    (j_data, j_pde)
}

/// `(J_data, J_PDE)` at the model's current parameters. The PDE part needs a
/// twice-differentiable activation when collocation points are given.
pub fn pinn_loss(
    model: &MlpModel,
    positions: &[Point3],
    values: &[Complex64],
    collocation: &[Point3],
    k: f64,
) -> Result<(f64, f64)> {
    model.validate()?;
    check_field_inputs(positions, values, k)?;
    if !collocation.is_empty() && model.net().has_relu() {
        return Err(Error::UnsupportedForPde(Activation::Relu.tag()));
    }
    let net = model.net();
    let mut j_data = 0.0;
    for (p, s) in positions.iter().zip(values) {
        let cache = net.forward_cached(&model.normalized(p));
        let out = cache.output();
        let dre = out[0] - s.re;
        let dim = out[1] - s.im;
        j_data += dre * dre + dim * dim;
    }
    let mut j_pde = 0.0;
    let k2 = k * k;
    for p in collocation {
        let cache = net.laplacian_forward(&model.normalized(p), model.dual_seed());
        let value = cache.output();
        let lap = cache.laplacian();
        let rho_re = lap[0] + k2 * value[0];
        let rho_im = lap[1] + k2 * value[1];
        j_pde += rho_re * rho_re + rho_im * rho_im;
    }
    Ok((j_data, j_pde))
}

/// Analytic gradient of `J_data + ε·J_PDE` with respect to the flattened
/// parameters, in the layout of `MlpModel::parameters`.
pub fn pinn_gradient(
    model: &MlpModel,
    positions: &[Point3],
    values: &[Complex64],
    collocation: &[Point3],
    k: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    model.validate()?;
    check_field_inputs(positions, values, k)?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::domain("ε must be finite and nonnegative"));
    }
    if epsilon > 0.0 && !collocation.is_empty() && model.net().has_relu() {
        return Err(Error::UnsupportedForPde(Activation::Relu.tag()));
    }
    let mut grads = MlpGradients::zeros_like(model.net());
    let mut evals = 0;
    loss_and_grad(
        model,
        positions,
        values,
        collocation,
        k,
        epsilon,
        &mut grads,
        &mut evals,
    );
    Ok(grads.flatten())
}

/// Trains a fresh field network on an observation set.
pub fn pinn_train(obs: &ObservationSet, cfg: &PinnConfig) -> Result<PinnReport> {
    cfg.validate()?;
    let model = MlpModel::new(
        &cfg.hidden,
        cfg.activation,
        cfg.center,
        cfg.radius,
        cfg.seed,
    )?;
    pinn_train_from(model, obs.positions(), obs.pressures(), obs.wavenumber(), cfg)
}

/// Training loop on an explicit initial model. Only the optimizer and PDE
/// fields of the config are read; the architecture fields are the model's.
pub fn pinn_train_from(
    model: MlpModel,
    positions: &[Point3],
    values: &[Complex64],
    wavenumber: f64,
    cfg: &PinnConfig,
) -> Result<PinnReport> {
    cfg.validate()?;
    model.validate()?;
    check_field_inputs(positions, values, wavenumber)?;
    let needs_pde = !cfg.collocation.is_empty()
        && match cfg.pde_weight {
            PdeWeight::Fixed(e) => e > 0.0,
            PdeWeight::AutoBalanced => true,
        };
    if needs_pde && model.net().has_relu() {
        return Err(Error::UnsupportedForPde(Activation::Relu.tag()));
    }

    let mut model = model;
    let mut pde_evaluations = 0;
    let epsilon = match cfg.pde_weight {
        PdeWeight::Fixed(e) => e,
        PdeWeight::AutoBalanced => {
            let (j_data, j_pde) =
                pinn_loss(&model, positions, values, &cfg.collocation, wavenumber)?;
            pde_evaluations += cfg.collocation.len() as u64;
            if j_pde > 0.0 {
                1e-2 * j_data / j_pde
            } else {
                0.0
            }
        }
    };

    let mut adam = Adam::new(model.net(), cfg.step_size);
    let mut grads = MlpGradients::zeros_like(model.net());
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut last_good: Option<MlpModel> = None;
    for iteration in 0..=cfg.iterations {
        grads.set_zero();
        let (j_data, j_pde) = loss_and_grad(
            &model,
            positions,
            values,
            &cfg.collocation,
            wavenumber,
            epsilon,
            &mut grads,
            &mut pde_evaluations,
        );
        if !(j_data + epsilon * j_pde).is_finite() {
            return Err(Error::TrainingDiverged {
                iteration,
                last_checkpoint: last_good.map(Box::new),
            });
        }
        trace.push(LossSample {
            iteration,
            j_data,
            j_pde,
        });
        last_good = Some(model.clone());
        if iteration == cfg.iterations {
            break;
        }
        adam.update(model.net_mut(), &grads);
    }
    Ok(PinnReport {
        model,
        trace,
        epsilon,
        pde_evaluations,
    })
}

/// What a supervised network predicts from the observation vector.
#[derive(Debug, Clone)]
pub enum SupervisedTarget {
    /// The field at a fixed list of evaluation points.
    FieldSamples { positions: Vec<Point3> },
    /// Coefficients of a fixed expansion basis; the continuous field comes
    /// from evaluating that expansion.
    ExpansionCoefficients { basis: BasisSpec },
}

impl SupervisedTarget {
    fn output_len(&self) -> usize {
        match self {
            SupervisedTarget::FieldSamples { positions } => positions.len(),
            SupervisedTarget::ExpansionCoefficients { basis } => basis.len(),
        }
    }
}

/// Paired observation vectors and target vectors for one array geometry and
/// one wavenumber.
#[derive(Debug, Clone)]
pub struct SupervisedDataset {
    wavenumber: f64,
    mic_positions: Vec<Point3>,
    inputs: Vec<Vec<Complex64>>,
    targets: Vec<Vec<Complex64>>,
    target: SupervisedTarget,
}

impl SupervisedDataset {
    pub fn new(
        wavenumber: f64,
        mic_positions: Vec<Point3>,
        inputs: Vec<Vec<Complex64>>,
        targets: Vec<Vec<Complex64>>,
        target: SupervisedTarget,
    ) -> Result<Self> {
        if !(wavenumber.is_finite() && wavenumber > 0.0) {
            return Err(Error::domain("wavenumber must be positive"));
        }
        if mic_positions.is_empty() {
            return Err(Error::domain("dataset needs at least one microphone"));
        }
        if inputs.is_empty() {
            return Err(Error::domain("dataset needs at least one example"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::domain(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let out_len = target.output_len();
        if out_len == 0 {
            return Err(Error::domain("target must have at least one component"));
        }
        for (d, (x, t)) in inputs.iter().zip(&targets).enumerate() {
            if x.len() != mic_positions.len() {
                return Err(Error::domain(format!(
                    "example {d}: {} observations for {} microphones",
                    x.len(),
                    mic_positions.len()
                )));
            }
            if t.len() != out_len {
                return Err(Error::domain(format!(
                    "example {d}: {} target components, expected {out_len}",
                    t.len()
                )));
            }
            if x.iter().chain(t).any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("example {d} contains non-finite values")));
            }
        }
        Ok(SupervisedDataset {
            wavenumber,
            mic_positions,
            inputs,
            targets,
            target,
        })
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn mic_positions(&self) -> &[Point3] {
        &self.mic_positions
    }

    pub fn inputs(&self) -> &[Vec<Complex64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<Complex64>] {
        &self.targets
    }

    pub fn target(&self) -> &SupervisedTarget {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Scene family that training examples are drawn from: a fixed room, array
/// and frequency, with the source position resampled per example.
#[derive(Debug, Clone)]
pub struct TrainingSetSpec {
    pub room: RoomSpec,
    /// Region of interest; drawn sources must land outside it.
    pub region: RegionSpec,
    pub array: ArraySpec,
    pub frequency_hz: f64,
    /// Observation noise; `None` keeps the observations clean.
    pub snr_db: Option<f64>,
    pub max_order: usize,
    /// Minimum distance from every wall for drawn sources.
    pub wall_margin: f64,
}

/// Simulates a supervised training set. Sources are drawn uniformly from
/// the room interior shrunk by the wall margin, rejecting draws inside the
/// region of interest (one hundred consecutive rejections is an error).
/// Deterministic for a given seed.
pub fn generate_training_set(
    spec: &TrainingSetSpec,
    target: &SupervisedTarget,
    count: usize,
    seed: u64,
) -> Result<SupervisedDataset> {
    spec.room.validate()?;
    spec.region.validate()?;
    if count == 0 {
        return Err(Error::domain("training set needs at least one example"));
    }
    if !(spec.frequency_hz.is_finite() && spec.frequency_hz > 0.0) {
        return Err(Error::domain("frequency must be positive"));
    }
    if !(spec.wall_margin > 0.0)
        || spec
            .room
            .dimensions
            .iter()
            .any(|&l| 2.0 * spec.wall_margin >= l)
    {
        return Err(Error::domain(
            "wall margin must be positive and leave room for sources",
        ));
    }
    let k = 2.0 * std::f64::consts::PI * spec.frequency_hz / spec.room.sound_speed;
    let mics = make_array(&spec.array, seed)?;

    // Coefficient targets are fitted on a fixed quasi-uniform cloud inside
    // the region, dense enough to overdetermine the basis.
    let fit_points = match target {
        SupervisedTarget::ExpansionCoefficients { basis } => Some(fibonacci_ball(
            (2 * basis.len()).max(32),
            spec.region.center(),
            spec.region.circumscribing_radius(),
        )?),
        SupervisedTarget::FieldSamples { .. } => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(per_frequency_seed(seed, 1));
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for d in 0..count {
        let mut source = None;
        for _ in 0..100 {
            let p = Point3::new(
                rng.random_range(spec.wall_margin..spec.room.dimensions[0] - spec.wall_margin),
                rng.random_range(spec.wall_margin..spec.room.dimensions[1] - spec.wall_margin),
                rng.random_range(spec.wall_margin..spec.room.dimensions[2] - spec.wall_margin),
            );
            if !spec.region.contains(&p) {
                source = Some(p);
                break;
            }
        }
        let source = source.ok_or_else(|| {
            Error::Infeasible(
                "one hundred consecutive source draws landed inside the region of interest".into(),
            )
        })?;

        let clean = shoebox_atf(&spec.room, &source, &mics, k, spec.max_order)?;
        let observed = match spec.snr_db {
            Some(snr) => {
                let obs = ObservationSet::new(k, mics.clone(), clean.clone())?;
                add_noise(&obs, snr, per_frequency_seed(seed, 1000 + d))?
                    .pressures()
                    .to_vec()
            }
            None => clean.clone(),
        };
        inputs.push(observed);

        let t = match target {
            SupervisedTarget::FieldSamples { positions } => {
                shoebox_atf(&spec.room, &source, positions, k, spec.max_order)?
            }
            SupervisedTarget::ExpansionCoefficients { basis } => {
                let points = fit_points.as_ref().expect("computed above");
                let field = shoebox_atf(&spec.room, &source, points, k, spec.max_order)?;
                let dict = build_dictionary(basis, points, k)?;
                ridge_solve(&dict, &field, COEFFICIENT_FIT_LAMBDA)?
                    .coefficients()
                    .to_vec()
            }
        };
        targets.push(t);
    }
    SupervisedDataset::new(k, mics, inputs, targets, target.clone())
}

/// Optimizer and architecture settings for `supervised_train`.
#[derive(Debug, Clone)]
pub struct SupervisedConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
}

/// Network from a complex observation vector to a complex target vector.
/// Complex vectors enter and leave as interleaved real and imaginary parts.
#[derive(Debug, Clone)]
pub struct SupervisedModel {
    net: Mlp,
    wavenumber: f64,
    mic_positions: Vec<Point3>,
    target: SupervisedTarget,
}

impl SupervisedModel {
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn mic_positions(&self) -> &[Point3] {
        &self.mic_positions
    }

    pub fn target(&self) -> &SupervisedTarget {
        &self.target
    }

    /// Predicted target vector for one observation vector.
    pub fn predict(&self, observations: &[Complex64]) -> Result<Vec<Complex64>> {
        if observations.len() != self.mic_positions.len() {
            return Err(Error::domain(format!(
                "{} observations for {} microphones",
                observations.len(),
                self.mic_positions.len()
            )));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("observations must be finite"));
        }
        let x = interleave(observations);
        let out = self.net.forward_cached(&x);
        Ok(deinterleave(out.output()))
    }

    /// Continuous field at arbitrary points. Only coefficient-predicting
    /// models support this; field-sample models are tied to their stored
    /// evaluation points.
    pub fn field_at(&self, observations: &[Complex64], points: &[Point3]) -> Result<Vec<Complex64>> {
        match &self.target {
            SupervisedTarget::ExpansionCoefficients { basis } => {
                let gamma = self.predict(observations)?;
                evaluate_coefficients(basis, &gamma, points, self.wavenumber)
            }
            SupervisedTarget::FieldSamples { .. } => Err(Error::domain(
                "this model predicts samples at fixed points; it has no continuous field",
            )),
        }
    }
}

/// Trained supervised network with its loss trace (one row per iteration,
/// final row included).
#[derive(Debug, Clone)]
pub struct SupervisedReport {
    pub model: SupervisedModel,
    pub trace: Vec<f64>,
}

fn interleave(values: &[Complex64]) -> DVector<f64> {
    let mut x = DVector::zeros(2 * values.len());
    for (i, v) in values.iter().enumerate() {
        x[2 * i] = v.re;
        x[2 * i + 1] = v.im;
    }
    x
}

fn deinterleave(x: &DVector<f64>) -> Vec<Complex64> {
    (0..x.len() / 2)
        .map(|i| Complex64::new(x[2 * i], x[2 * i + 1]))
        .collect()
}

/// Full-batch Adam on the squared error over all examples.
pub fn supervised_train(
    data: &SupervisedDataset,
    cfg: &SupervisedConfig,
) -> Result<SupervisedReport> {
    if !(cfg.step_size.is_finite() && cfg.step_size > 0.0) {
        return Err(Error::domain("step size must be positive"));
    }
    let in_len = 2 * data.mic_positions.len();
    let out_len = 2 * data.target.output_len();
    let mut widths = vec![in_len];
    widths.extend_from_slice(&cfg.hidden);
    widths.push(out_len);
    let mut net = Mlp::random(&widths, cfg.activation, cfg.seed)?;

    let xs: Vec<DVector<f64>> = data.inputs.iter().map(|x| interleave(x)).collect();
    let ts: Vec<DVector<f64>> = data.targets.iter().map(|t| interleave(t)).collect();

    let mut adam = Adam::new(&net, cfg.step_size);
    let mut grads = MlpGradients::zeros_like(&net);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for iteration in 0..=cfg.iterations {
        grads.set_zero();
        let mut loss = 0.0;
        for (x, t) in xs.iter().zip(&ts) {
            let cache = net.forward_cached(x);
            let diff = cache.output() - t;
            loss += diff.norm_squared();
            net.backward_data(&cache, &(2.0 * diff), &mut grads);
        }
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                iteration,
                last_checkpoint: None,
            });
        }
        trace.push(loss);
        if iteration == cfg.iterations {
            break;
        }
        adam.update(&mut net, &grads);
    }
    Ok(SupervisedReport {
        model: SupervisedModel {
            net,
            wavenumber: data.wavenumber,
            mic_positions: data.mic_positions.clone(),
            target: data.target.clone(),
        },
        trace,
    })
}
