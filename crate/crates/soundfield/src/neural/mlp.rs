//! Small dense networks over normalized coordinates, with an exact Laplacian
//! computed by forwarding second-order directional duals through every layer.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point3;

/// Weight scale of the first layer of a sine network, folded into the
/// weights so the activation itself is a plain `sin`.
const SINE_FIRST_LAYER_GAIN: f64 = 10.0;

/// Elementwise nonlinearity applied between affine layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sine,
    Tanh,
    Relu,
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Sine => "sine",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sine => x.sin(),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    fn d1(self, x: f64) -> f64 {
        match self {
            Activation::Sine => x.cos(),
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn d2(self, x: f64) -> f64 {
        match self {
            Activation::Sine => -x.sin(),
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Relu => 0.0,
        }
    }

    fn d3(self, x: f64) -> f64 {
        match self {
            Activation::Sine => -x.cos(),
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * (1.0 - t * t) * (1.0 - 3.0 * t * t)
            }
            Activation::Relu => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub(crate) weight: DMatrix<f64>,
    pub(crate) bias: DVector<f64>,
}

impl Layer {
    fn is_finite(&self) -> bool {
        self.weight.iter().all(|w| w.is_finite()) && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Plain multilayer perceptron on real vectors. Activations sit between
/// affine layers, so a one-layer network is exactly affine.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mlp {
    pub(crate) layers: Vec<Layer>,
    pub(crate) activations: Vec<Activation>,
}

/// Per-layer values kept by a cached forward pass for backpropagation.
pub(crate) struct DataCache {
    inputs: Vec<DVector<f64>>,
    pre: Vec<DVector<f64>>,
}

impl DataCache {
    pub(crate) fn output(&self) -> &DVector<f64> {
        self.pre.last().expect("cache holds at least one layer")
    }
}

/// Like `DataCache` but also carries first and second directional duals for
/// the three coordinate axes.
pub(crate) struct LapCache {
    inputs_v: Vec<DVector<f64>>,
    inputs_d: Vec<[DVector<f64>; 3]>,
    inputs_h: Vec<[DVector<f64>; 3]>,
    pre_v: Vec<DVector<f64>>,
    pre_d: Vec<[DVector<f64>; 3]>,
    pre_h: Vec<[DVector<f64>; 3]>,
}

impl LapCache {
    pub(crate) fn output(&self) -> &DVector<f64> {
        self.pre_v.last().expect("cache holds at least one layer")
    }

    /// Laplacian of each output channel: the per-axis second duals summed.
    pub(crate) fn laplacian(&self) -> DVector<f64> {
        let h = self.pre_h.last().expect("cache holds at least one layer");
        &h[0] + &h[1] + &h[2]
    }
}

/// Parameter-shaped accumulator for gradients and optimizer moments.
#[derive(Debug, Clone)]
pub(crate) struct MlpGradients {
    pub(crate) layers: Vec<Layer>,
}

impl MlpGradients {
    pub(crate) fn zeros_like(net: &Mlp) -> Self {
        MlpGradients {
            layers: net
                .layers
                .iter()
                .map(|l| Layer {
                    weight: DMatrix::zeros(l.weight.nrows(), l.weight.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub(crate) fn set_zero(&mut self) {
        for l in &mut self.layers {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    /// Same flat layout as `MlpModel::parameters`.
    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
        out
    }
}

impl Mlp {
    /// Uniform random initialization: sine networks get a wide first layer
    /// (gain folded into the weights) and `sqrt(6 / fan_in)` elsewhere,
    /// other activations get Xavier bounds. Biases draw from
    /// `±1/sqrt(fan_in)`. Deterministic for a given seed.
    pub(crate) fn random(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::domain("a network needs input and output widths"));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::domain("layer widths must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for l in 0..widths.len() - 1 {
            let fan_in = widths[l];
            let fan_out = widths[l + 1];
            let bound = match activation {
                Activation::Sine if l == 0 => SINE_FIRST_LAYER_GAIN / fan_in as f64,
                Activation::Sine => (6.0 / fan_in as f64).sqrt(),
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            let weight = DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..=bound));
            let bias_bound = 1.0 / (fan_in as f64).sqrt();
            let bias = DVector::from_fn(fan_out, |_, _| rng.random_range(-bias_bound..=bias_bound));
            layers.push(Layer { weight, bias });
        }
        Ok(Mlp {
            layers,
            activations: vec![activation; widths.len() - 2],
        })
    }

    pub(crate) fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].weight.ncols()];
        w.extend(self.layers.iter().map(|l| l.weight.nrows()));
        w
    }

    pub(crate) fn has_relu(&self) -> bool {
        self.activations.contains(&Activation::Relu)
    }

    fn check_shapes(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::domain("a network needs at least one layer"));
        }
        if self.activations.len() + 1 != self.layers.len() {
            return Err(Error::domain(format!(
                "{} layers need {} activations, got {}",
                self.layers.len(),
                self.layers.len() - 1,
                self.activations.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.bias.len() != layer.weight.nrows() {
                return Err(Error::domain(format!(
                    "layer {l}: bias length {} does not match {} rows",
                    layer.bias.len(),
                    layer.weight.nrows()
                )));
            }
            if l > 0 && layer.weight.ncols() != self.layers[l - 1].weight.nrows() {
                return Err(Error::domain(format!(
                    "layer {l}: expects width {}, previous layer produces {}",
                    layer.weight.ncols(),
                    self.layers[l - 1].weight.nrows()
                )));
            }
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            if !layer.is_finite() {
                return Err(Error::ModelCorrupt { layer: l });
            }
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, x: &DVector<f64>) -> DataCache {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut v = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let a = &layer.weight * &v + &layer.bias;
            inputs.push(v);
            v = if l + 1 < n {
                a.map(|x| self.activations[l].apply(x))
            } else {
                a.clone()
            };
            pre.push(a);
        }
        DataCache { inputs, pre }
    }

    /// Accumulates parameter gradients given the gradient of the loss with
    /// respect to the network output.
    pub(crate) fn backward_data(
        &self,
        cache: &DataCache,
        out_bar: &DVector<f64>,
        grads: &mut MlpGradients,
    ) {
        let mut vbar = out_bar.clone();
        for l in (0..self.layers.len()).rev() {
            grads.layers[l].weight.ger(1.0, &vbar, &cache.inputs[l], 1.0);
            grads.layers[l].bias += &vbar;
            if l > 0 {
                let zbar = self.layers[l].weight.tr_mul(&vbar);
                let act = self.activations[l - 1];
                let pre = &cache.pre[l - 1];
                vbar = DVector::from_fn(zbar.len(), |i, _| zbar[i] * act.d1(pre[i]));
            }
        }
    }

    /// Forward pass carrying `(value, d/dq, d²/dq²)` triples for each axis
    /// `q`, seeded so the duals are derivatives in physical coordinates.
    pub(crate) fn laplacian_forward(&self, x: &DVector<f64>, dual_seed: f64) -> LapCache {
        let n = self.layers.len();
        let width_in = self.layers[0].weight.ncols();
        let mut cache = LapCache {
            inputs_v: Vec::with_capacity(n),
            inputs_d: Vec::with_capacity(n),
            inputs_h: Vec::with_capacity(n),
            pre_v: Vec::with_capacity(n),
            pre_d: Vec::with_capacity(n),
            pre_h: Vec::with_capacity(n),
        };
        let mut v = x.clone();
        let mut d = std::array::from_fn(|q| {
            let mut e = DVector::zeros(width_in);
            e[q] = dual_seed;
            e
        });
        let mut h: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(width_in));
        for (l, layer) in self.layers.iter().enumerate() {
            let av = &layer.weight * &v + &layer.bias;
            let ad: [DVector<f64>; 3] = std::array::from_fn(|q| &layer.weight * &d[q]);
            let ah: [DVector<f64>; 3] = std::array::from_fn(|q| &layer.weight * &h[q]);
            cache.inputs_v.push(v.clone());
            cache.inputs_d.push(d.clone());
            cache.inputs_h.push(h.clone());
            if l + 1 < n {
                let act = self.activations[l];
                v = av.map(|x| act.apply(x));
                for q in 0..3 {
                    d[q] = DVector::from_fn(av.len(), |i, _| act.d1(av[i]) * ad[q][i]);
                    h[q] = DVector::from_fn(av.len(), |i, _| {
                        act.d2(av[i]) * ad[q][i] * ad[q][i] + act.d1(av[i]) * ah[q][i]
                    });
                }
            } else {
                v = av.clone();
                d = ad.clone();
                h = ah.clone();
            }
            cache.pre_v.push(av);
            cache.pre_d.push(ad);
            cache.pre_h.push(ah);
        }
        cache
    }

    /// Backpropagation through `laplacian_forward`. `v_bar` seeds the value
    /// channel and `h_bar` seeds the second dual of every axis; the first
    /// duals carry no seed because the loss does not read them directly.
    pub(crate) fn backward_pde(
        &self,
        cache: &LapCache,
        v_bar: &DVector<f64>,
        h_bar: &DVector<f64>,
        grads: &mut MlpGradients,
    ) {
        let mut vbar = v_bar.clone();
        let mut dbar: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(v_bar.len()));
        let mut hbar: [DVector<f64>; 3] = std::array::from_fn(|_| h_bar.clone());
        for l in (0..self.layers.len()).rev() {
            let g = &mut grads.layers[l];
            g.weight.ger(1.0, &vbar, &cache.inputs_v[l], 1.0);
            for q in 0..3 {
                g.weight.ger(1.0, &dbar[q], &cache.inputs_d[l][q], 1.0);
                g.weight.ger(1.0, &hbar[q], &cache.inputs_h[l][q], 1.0);
            }
            g.bias += &vbar;
            if l == 0 {
                break;
            }
            let w = &self.layers[l].weight;
            let vz = w.tr_mul(&vbar);
            let dz: [DVector<f64>; 3] = std::array::from_fn(|q| w.tr_mul(&dbar[q]));
            let hz: [DVector<f64>; 3] = std::array::from_fn(|q| w.tr_mul(&hbar[q]));
            let act = self.activations[l - 1];
            let pre = &cache.pre_v[l - 1];
            let da = &cache.pre_d[l - 1];
            let ha = &cache.pre_h[l - 1];
            let width = pre.len();
            let mut vnew = DVector::zeros(width);
            let mut dnew: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(width));
            let mut hnew: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(width));
            for i in 0..width {
                let s1 = act.d1(pre[i]);
                let s2 = act.d2(pre[i]);
                let s3 = act.d3(pre[i]);
                let mut acc = vz[i] * s1;
                for q in 0..3 {
                    acc += dz[q][i] * s2 * da[q][i]
                        + hz[q][i] * (s3 * da[q][i] * da[q][i] + s2 * ha[q][i]);
                    dnew[q][i] = dz[q][i] * s1 + hz[q][i] * 2.0 * s2 * da[q][i];
                    hnew[q][i] = hz[q][i] * s1;
                }
                vnew[i] = acc;
            }
            vbar = vnew;
            dbar = dnew;
            hbar = hnew;
        }
    }
}

/// A network from physical coordinates to a complex field value. Inputs are
/// shifted and scaled so the region of interest maps into the unit ball; the
/// two output channels are the real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    net: Mlp,
    center: Point3,
    scale: f64,
}

impl MlpModel {
    /// Randomly initialized field network with the given hidden widths.
    pub fn new(
        hidden: &[usize],
        activation: Activation,
        center: Point3,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut widths = vec![3];
        widths.extend_from_slice(hidden);
        widths.push(2);
        let net = Mlp::random(&widths, activation, seed)?;
        MlpModel::from_net(net, center, scale)
    }

    /// Builds a model from explicit `(weight, bias)` pairs.
    pub fn from_parts(
        layers: Vec<(DMatrix<f64>, DVector<f64>)>,
        activations: Vec<Activation>,
        center: Point3,
        scale: f64,
    ) -> Result<Self> {
        let net = Mlp {
            layers: layers
                .into_iter()
                .map(|(weight, bias)| Layer { weight, bias })
                .collect(),
            activations,
        };
        MlpModel::from_net(net, center, scale)
    }

    pub(crate) fn from_net(net: Mlp, center: Point3, scale: f64) -> Result<Self> {
        let model = MlpModel { net, center, scale };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn net(&self) -> &Mlp {
        &self.net
    }

    pub(crate) fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    /// All parameters flattened layer by layer, weights (column-major)
    /// before biases. Matches the gradient layout of `pinn_gradient`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.net.layers {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(layer.bias.as_slice());
        }
        out
    }

    /// A copy of the model with its parameters replaced from the flat
    /// layout of `parameters`.
    pub fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        let mut model = self.clone();
        let mut offset = 0;
        for layer in &mut model.net.layers {
            let wlen = layer.weight.len();
            let blen = layer.bias.len();
            if offset + wlen + blen > params.len() {
                return Err(Error::domain("parameter vector is too short"));
            }
            layer
                .weight
                .as_mut_slice()
                .copy_from_slice(&params[offset..offset + wlen]);
            offset += wlen;
            layer
                .bias
                .as_mut_slice()
                .copy_from_slice(&params[offset..offset + blen]);
            offset += blen;
        }
        if offset != params.len() {
            return Err(Error::domain(format!(
                "parameter vector has {} entries, model needs {offset}",
                params.len()
            )));
        }
        model.validate()?;
        Ok(model)
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn widths(&self) -> Vec<usize> {
        self.net.widths()
    }

    pub fn activations(&self) -> &[Activation] {
        &self.net.activations
    }

    /// Checks shapes, the 3-in/2-out contract, normalization constants, and
    /// that every parameter is finite.
    pub fn validate(&self) -> Result<()> {
        self.net.check_shapes()?;
        if self.net.layers[0].weight.ncols() != 3 {
            return Err(Error::domain("field networks take three coordinates"));
        }
        if self.net.layers.last().expect("nonempty").weight.nrows() != 2 {
            return Err(Error::domain(
                "field networks produce two output channels (real, imaginary)",
            ));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) || !self.center.iter().all(|c| c.is_finite())
        {
            return Err(Error::domain(
                "normalization needs a finite center and a positive scale",
            ));
        }
        self.net.check_finite()
    }

    pub(crate) fn normalized(&self, r: &Point3) -> DVector<f64> {
        DVector::from_column_slice(&[
            (r.x - self.center.x) / self.scale,
            (r.y - self.center.y) / self.scale,
            (r.z - self.center.z) / self.scale,
        ])
    }

    /// Seed making the forwarded duals physical-coordinate derivatives.
    pub(crate) fn dual_seed(&self) -> f64 {
        1.0 / self.scale
    }

    /// Writes the checkpoint: widths, activation tags, normalization
    /// constants, and weight arrays as structured text.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let file = CheckpointFile {
            widths: self.widths(),
            activations: self.net.activations.clone(),
            center: [self.center.x, self.center.y, self.center.z],
            scale: self.scale,
            layers: self
                .net
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    weight: l
                        .weight
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect(),
                    bias: l.bias.iter().copied().collect(),
                })
                .collect(),
        };
        fs::write(path, serde_json::to_string_pretty(&file).map_err(io_err)?).map_err(Error::from)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Config {
            path: path.display().to_string(),
            message,
        };
        if file.widths.len() != file.layers.len() + 1 {
            return Err(bad(format!(
                "{} widths do not frame {} layers",
                file.widths.len(),
                file.layers.len()
            )));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (l, layer) in file.layers.iter().enumerate() {
            let rows = file.widths[l + 1];
            let cols = file.widths[l];
            if layer.weight.len() != rows
                || layer.weight.iter().any(|r| r.len() != cols)
                || layer.bias.len() != rows
            {
                return Err(bad(format!("layer {l} does not match the declared widths")));
            }
            let weight = DMatrix::from_fn(rows, cols, |i, j| layer.weight[i][j]);
            let bias = DVector::from_column_slice(&layer.bias);
            layers.push(Layer { weight, bias });
        }
        let net = Mlp {
            layers,
            activations: file.activations,
        };
        if net.activations.len() + 1 != net.layers.len() {
            return Err(bad("activation tags do not match the layer count".into()));
        }
        MlpModel::from_net(
            net,
            Point3::new(file.center[0], file.center[1], file.center[2]),
            file.scale,
        )
    }
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    center: [f64; 3],
    scale: f64,
    layers: Vec<CheckpointLayer>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// Complex field value of the network at a physical point.
pub fn mlp_forward(model: &MlpModel, r: &Point3) -> Result<Complex64> {
    model.validate()?;
    if !r.iter().all(|c| c.is_finite()) {
        return Err(Error::domain("evaluation point must be finite"));
    }
    let cache = model.net.forward_cached(&model.normalized(r));
    let out = cache.output();
    Ok(Complex64::new(out[0], out[1]))
}

/// Exact Laplacian of the network field at a physical point, from
/// second-order duals forwarded per axis. No finite differences anywhere.
pub fn mlp_laplacian(model: &MlpModel, r: &Point3) -> Result<Complex64> {
    model.validate()?;
    if !r.iter().all(|c| c.is_finite()) {
        return Err(Error::domain("evaluation point must be finite"));
    }
    if model.net.has_relu() {
        return Err(Error::UnsupportedForPde(Activation::Relu.tag()));
    }
    let cache = model.net.laplacian_forward(&model.normalized(r), model.dual_seed());
    let lap = cache.laplacian();
    Ok(Complex64::new(lap[0], lap[1]))
}
