//! View-specific autoencoders: four affine layers per encoder and decoder,
//! ReLU after the first three, linear output. Gradients are computed by hand
//! in reverse mode.

use std::fs;
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Scalar};
use crate::rng;

pub const LAYERS_PER_STAGE: usize = 4;
const MODEL_MAGIC: &[u8; 4] = b"CIR1";

/// Affine map `x·W + b` with `W` stored as `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![T::zero(); fan_out],
        }
    }

    fn glorot(fan_in: usize, fan_out: usize, rng: &mut rng::Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            weight: Matrix::from_fn(fan_in, fan_out, |_, _| T::lit(rng.random_range(-limit..=limit))),
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut y = x.matmul(&self.weight)?;
        y.add_row_vector(&self.bias);
        Ok(y)
    }
}

/// Which half of a view's autoencoder produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Encoder,
    Decoder,
}

/// Per-view encoder and decoder stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewNetwork<T> {
    pub encoder: Vec<Dense<T>>,
    pub decoder: Vec<Dense<T>>,
}

impl<T: Scalar> ViewNetwork<T> {
    fn layers(&self, stage: Stage) -> &[Dense<T>] {
        match stage {
            Stage::Encoder => &self.encoder,
            Stage::Decoder => &self.decoder,
        }
    }

    fn zeros_like(&self) -> Self {
        let z = |ls: &[Dense<T>]| ls.iter().map(|l| Dense::zeros(l.fan_in(), l.fan_out())).collect();
        Self {
            encoder: z(&self.encoder),
            decoder: z(&self.decoder),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].fan_in()
    }
}

/// Activations retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    view: usize,
    stage: Stage,
    generation: u64,
    /// Input to each layer; for layers after the first this is the ReLU
    /// output of the previous one.
    activations: Vec<Matrix<T>>,
    /// Pre-activation of each layer; the last one is the stage output.
    pre_activations: Vec<Matrix<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.pre_activations.last().expect("non-empty trace")
    }

    pub fn input(&self) -> &Matrix<T> {
        &self.activations[0]
    }

    pub fn view(&self) -> usize {
        self.view
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }
}

/// Layer widths shared by every view; the view's own input dimension is
/// prepended to the encoder and appended to the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Architecture {
    pub hidden: [usize; 3],
    pub latent_dim: usize,
}

/// The set of per-view autoencoders trained jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewAutoencoder<T> {
    views: Vec<ViewNetwork<T>>,
    latent_dim: usize,
    // Bumped on every parameter mutation so stale traces can be detected.
    generation: u64,
}

impl<T: Scalar> ViewAutoencoder<T> {
    /// Uniform Glorot initialization, zero biases. View `v` draws from its own
    /// seed stream, so its parameters do not depend on the other views.
    pub fn init(view_dims: &[usize], arch: Architecture, seed: u64) -> Result<Self> {
        if view_dims.is_empty() || view_dims.contains(&0) || arch.hidden.contains(&0) || arch.latent_dim == 0 {
            return Err(Error::Precondition(format!(
                "layer widths must be positive (views {view_dims:?}, hidden {:?}, latent {})",
                arch.hidden, arch.latent_dim
            )));
        }
        let views = view_dims
            .iter()
            .enumerate()
            .map(|(v, &d)| {
                let mut r = rng::stream(seed, v as u64);
                let [h1, h2, h3] = arch.hidden;
                let enc = [d, h1, h2, h3, arch.latent_dim];
                let dec = [arch.latent_dim, h3, h2, h1, d];
                let encoder = enc.windows(2).map(|w| Dense::glorot(w[0], w[1], &mut r)).collect();
                let decoder = dec.windows(2).map(|w| Dense::glorot(w[0], w[1], &mut r)).collect();
                ViewNetwork { encoder, decoder }
            })
            .collect();
        Ok(Self {
            views,
            latent_dim: arch.latent_dim,
            generation: 0,
        })
    }

    pub fn from_views(views: Vec<ViewNetwork<T>>) -> Result<Self> {
        let latent_dim = views
            .first()
            .and_then(|v| v.encoder.last())
            .map(Dense::fan_out)
            .ok_or_else(|| Error::Precondition("model has no views".into()))?;
        for (v, net) in views.iter().enumerate() {
            check_stack(v, &net.encoder)?;
            check_stack(v, &net.decoder)?;
            if net.encoder[LAYERS_PER_STAGE - 1].fan_out() != latent_dim || net.decoder[0].fan_in() != latent_dim {
                return Err(Error::Precondition(format!("view {v} does not share latent dimension {latent_dim}")));
            }
            if net.decoder[LAYERS_PER_STAGE - 1].fan_out() != net.encoder[0].fan_in() {
                return Err(Error::Precondition(format!("view {v} decoder output differs from encoder input")));
            }
        }
        Ok(Self {
            views,
            latent_dim,
            generation: 0,
        })
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(ViewNetwork::input_dim).collect()
    }

    pub fn network(&self, v: usize) -> &ViewNetwork<T> {
        &self.views[v]
    }

    pub fn networks(&self) -> &[ViewNetwork<T>] {
        &self.views
    }

    fn net(&self, v: usize) -> Result<&ViewNetwork<T>> {
        self.views
            .get(v)
            .ok_or_else(|| Error::Precondition(format!("view {v} out of range for a {}-view model", self.views.len())))
    }

    fn run(&self, v: usize, stage: Stage, x: &Matrix<T>) -> Result<ForwardTrace<T>> {
        let layers = self.net(v)?.layers(stage);
        if x.cols() != layers[0].fan_in() {
            return Err(Error::Shape {
                op: match stage {
                    Stage::Encoder => "encode",
                    Stage::Decoder => "decode",
                },
                left: x.shape(),
                right: layers[0].weight.shape(),
            });
        }
        let mut activations = Vec::with_capacity(LAYERS_PER_STAGE);
        let mut pre_activations = Vec::with_capacity(LAYERS_PER_STAGE);
        let mut current = x.clone();
        for (l, layer) in layers.iter().enumerate() {
            let pre = layer.forward(&current)?;
            let next = if l + 1 < layers.len() {
                pre.map(|a| a.max(T::zero()))
            } else {
                Matrix::zeros(0, 0)
            };
            activations.push(std::mem::replace(&mut current, next));
            pre_activations.push(pre);
        }
        Ok(ForwardTrace {
            view: v,
            stage,
            generation: self.generation,
            activations,
            pre_activations,
        })
    }

    /// Latent representations of a batch of view-`v` samples.
    pub fn encode(&self, v: usize, x: &Matrix<T>) -> Result<(Matrix<T>, ForwardTrace<T>)> {
        let t = self.run(v, Stage::Encoder, x)?;
        Ok((t.output().clone(), t))
    }

    pub fn decode(&self, v: usize, z: &Matrix<T>) -> Result<(Matrix<T>, ForwardTrace<T>)> {
        let t = self.run(v, Stage::Decoder, z)?;
        Ok((t.output().clone(), t))
    }

    /// Encodes without retaining a trace.
    pub fn represent(&self, v: usize, x: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.run(v, Stage::Encoder, x)?.pre_activations.pop().expect("non-empty trace"))
    }

    /// Backpropagates `upstream = ∂L/∂output` through one stage, returning
    /// parameter gradients for its layers and `∂L/∂input`.
    pub fn backward_stage(&self, trace: &ForwardTrace<T>, upstream: &Matrix<T>) -> Result<(Vec<Dense<T>>, Matrix<T>)> {
        if trace.generation != self.generation {
            return Err(Error::Trace(format!(
                "trace from parameter generation {}, model is at {}",
                trace.generation, self.generation
            )));
        }
        let layers = self.net(trace.view)?.layers(trace.stage);
        if trace.activations.len() != layers.len() || trace.pre_activations.len() != layers.len() {
            return Err(Error::Trace("trace depth does not match the architecture".into()));
        }
        if upstream.shape() != trace.output().shape() {
            return Err(Error::Trace(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                trace.output().shape()
            )));
        }

        let mut grads: Vec<Dense<T>> = Vec::with_capacity(layers.len());
        let mut delta = upstream.clone();
        for l in (0..layers.len()).rev() {
            if l + 1 < layers.len() {
                // ReLU subgradient, taken as 0 at the kink.
                for (g, &a) in delta.as_mut_slice().iter_mut().zip(trace.pre_activations[l].as_slice()) {
                    if a <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            let input = &trace.activations[l];
            if input.shape().0 != delta.rows() || input.cols() != layers[l].fan_in() {
                return Err(Error::Trace(format!("layer {l} activation shape {:?} is inconsistent", input.shape())));
            }
            let weight = input.t_matmul(&delta)?;
            let bias = delta.column_sums();
            let next = delta.matmul_t(&layers[l].weight)?;
            grads.push(Dense { weight, bias });
            delta = next;
        }
        grads.reverse();
        Ok((grads, delta))
    }

    /// Gradients for a full autoencoder pass where the decoder consumed the
    /// encoder's output. `grad_z` is any loss gradient applied directly to the
    /// representations; `grad_xhat` drives the decoder.
    pub fn backward(
        &self,
        enc: &ForwardTrace<T>,
        dec: Option<(&ForwardTrace<T>, &Matrix<T>)>,
        grad_z: Option<&Matrix<T>>,
    ) -> Result<(ViewNetwork<T>, Matrix<T>)> {
        if enc.stage != Stage::Encoder {
            return Err(Error::Trace("expected an encoder trace".into()));
        }
        let net = self.net(enc.view)?;
        let mut out = net.zeros_like();
        let mut upstream = match grad_z {
            Some(g) => g.clone(),
            None => Matrix::zeros(enc.output().rows(), enc.output().cols()),
        };
        if let Some((dt, gx)) = dec {
            if dt.stage != Stage::Decoder || dt.view != enc.view {
                return Err(Error::Trace("decoder trace belongs to another view or stage".into()));
            }
            if dt.input() != enc.output() {
                return Err(Error::Trace("decoder was not fed this encoder's output".into()));
            }
            let (dgrads, dz) = self.backward_stage(dt, gx)?;
            out.decoder = dgrads;
            upstream.axpy(T::one(), &dz).map_err(|_| Error::Trace("upstream shape mismatch".into()))?;
        }
        let (egrads, dx) = self.backward_stage(enc, &upstream)?;
        out.encoder = egrads;
        Ok((out, dx))
    }

    /// Zero gradients shaped like this model.
    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            views: self.views.iter().map(ViewNetwork::zeros_like).collect(),
        }
    }

    /// Mutable parameter tensors in canonical order (per view: encoder then
    /// decoder, per layer: weight then bias). Invalidates outstanding traces.
    pub fn parameters_mut(&mut self) -> Vec<&mut [T]> {
        self.generation += 1;
        let mut out = Vec::new();
        for net in &mut self.views {
            for layer in net.encoder.iter_mut().chain(net.decoder.iter_mut()) {
                out.push(layer.weight.as_mut_slice());
                out.push(layer.bias.as_mut_slice());
            }
        }
        out
    }

    pub fn parameters(&self) -> Vec<&[T]> {
        parameter_slices(&self.views)
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Serializes as `CIR1`, `u32` view count, then per view the eight layers
    /// (encoder first) as `u32` rows, `u32` cols, weights and bias in `f64`, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MODEL_MAGIC.to_vec();
        out.extend_from_slice(&(self.views.len() as u32).to_le_bytes());
        for net in &self.views {
            for layer in net.encoder.iter().chain(&net.decoder) {
                out.extend_from_slice(&(layer.fan_in() as u32).to_le_bytes());
                out.extend_from_slice(&(layer.fan_out() as u32).to_le_bytes());
                for v in layer.weight.as_slice().iter().chain(&layer.bias) {
                    out.extend_from_slice(&v.as_f64().to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(4)? != MODEL_MAGIC {
            return Err(Error::Precondition("missing CIR1 header".into()));
        }
        let v = cursor.u32()? as usize;
        let mut views = Vec::with_capacity(v);
        for _ in 0..v {
            let mut layers = Vec::with_capacity(2 * LAYERS_PER_STAGE);
            for _ in 0..2 * LAYERS_PER_STAGE {
                let rows = cursor.u32()? as usize;
                let cols = cursor.u32()? as usize;
                let weight: Vec<T> = (0..rows * cols).map(|_| cursor.f64().map(T::lit)).collect::<Result<_>>()?;
                let bias: Vec<T> = (0..cols).map(|_| cursor.f64().map(T::lit)).collect::<Result<_>>()?;
                layers.push(Dense {
                    weight: Matrix::from_vec(rows, cols, weight)?,
                    bias,
                });
            }
            let decoder = layers.split_off(LAYERS_PER_STAGE);
            views.push(ViewNetwork { encoder: layers, decoder });
        }
        if cursor.pos != bytes.len() {
            return Err(Error::Precondition(format!("{} trailing bytes after model", bytes.len() - cursor.pos)));
        }
        let model = Self::from_views(views)?;
        if !model.is_finite() {
            return Err(Error::Precondition("model contains non-finite parameters".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Precondition(msg) => Error::format(path, None, msg),
            other => other,
        })
    }
}

fn check_stack<T: Scalar>(v: usize, layers: &[Dense<T>]) -> Result<()> {
    if layers.len() != LAYERS_PER_STAGE {
        return Err(Error::Precondition(format!("view {v} has {} layers per stage", layers.len())));
    }
    for (l, pair) in layers.windows(2).enumerate() {
        if pair[0].fan_out() != pair[1].fan_in() {
            return Err(Error::Precondition(format!("view {v} layers {l} and {} do not chain", l + 1)));
        }
    }
    if layers.iter().any(|l| l.bias.len() != l.fan_out()) {
        return Err(Error::Precondition(format!("view {v} has a bias of the wrong length")));
    }
    Ok(())
}

fn parameter_slices<T: Scalar>(views: &[ViewNetwork<T>]) -> Vec<&[T]> {
    let mut out = Vec::new();
    for net in views {
        for layer in net.encoder.iter().chain(&net.decoder) {
            out.push(layer.weight.as_slice());
            out.push(layer.bias.as_slice());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Precondition("model file truncated".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parameter gradients for every view, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub views: Vec<ViewNetwork<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Adds one view's gradients into the accumulator.
    pub fn accumulate(&mut self, v: usize, g: &ViewNetwork<T>) -> Result<()> {
        let target = &mut self.views[v];
        for (dst, src) in target
            .encoder
            .iter_mut()
            .chain(target.decoder.iter_mut())
            .zip(g.encoder.iter().chain(&g.decoder))
        {
            dst.weight.axpy(T::one(), &src.weight)?;
            for (a, &b) in dst.bias.iter_mut().zip(&src.bias) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn accumulate_stage(&mut self, v: usize, stage: Stage, g: &[Dense<T>]) -> Result<()> {
        let target = match stage {
            Stage::Encoder => &mut self.views[v].encoder,
            Stage::Decoder => &mut self.views[v].decoder,
        };
        for (dst, src) in target.iter_mut().zip(g) {
            dst.weight.axpy(T::one(), &src.weight)?;
            for (a, &b) in dst.bias.iter_mut().zip(&src.bias) {
                *a += b;
            }
        }
        Ok(())
    }

    /// Gradient tensors in the same order as [`ViewAutoencoder::parameters`].
    pub fn tensors(&self) -> Vec<&[T]> {
        parameter_slices(&self.views)
    }
}
