//! Helmholtz-informed neural field: a tiny fully connected MLP fitted to the
//! array measurement with a PDE-residual penalty, then resampled on spheres
//! the array never measured.
//!
//! The network maps scaled Cartesian coordinates to `(Re P, Im P)` through
//! tanh hidden layers. Both the input Laplacian and the parameter gradient of
//! the full cost are computed analytically: the forward pass propagates per
//! neuron the value, the three first derivatives and the three diagonal
//! second derivatives with respect to the inputs, and the backward pass runs
//! reverse-mode over that extended state. Training is full-batch Adam,
//! deterministic for a fixed seed (fixed chunking and summation order, any
//! thread count).

use crate::acoustics::{FieldSnapshot, Medium};
use crate::geometry::SphericalGrid;
use crate::{cast, Complex, Error, Float, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One dense layer; weights are row-major `[output][input]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<T: Float> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Float> DenseLayer<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// MLP weights plus the fixed input/output scalings baked into the model.
///
/// The represented field is `P(xyz) = output_scale * net(xyz / coordinate_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams<T: Float> {
    pub layers: Vec<DenseLayer<T>>,
    pub coordinate_scale: T,
    pub output_scale: T,
    pub seed: u64,
}

impl<T: Float> MlpParams<T> {
    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    fn widest_layer(&self) -> usize {
        self.layers.iter().map(|l| l.outputs.max(l.inputs)).max().unwrap_or(0)
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut flat = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }

    pub fn apply_flat(&mut self, flat: &[T]) {
        let mut at = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        debug_assert_eq!(at, flat.len());
    }

    pub fn to_json(&self) -> Result<serde_json::Value>
    where
        T: serde::Serialize,
    {
        Ok(serde_json::to_value(self)?)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        let p: Self = serde_json::from_value(value.clone())?;
        for pair in p.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::InvalidConfig("layer widths do not chain".into()));
            }
        }
        Ok(p)
    }
}

/// Training recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T: Float> {
    pub hidden_layers: usize,
    pub hidden_nodes: usize,
    pub epochs: usize,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub seed: u64,
    /// Input normalization divisor in meters, typically the array radius.
    pub coordinate_scale: T,
    pub pde_weight: T,
    pub frequency: T,
    pub medium: Medium<T>,
}

impl<T: Float> TrainConfig<T> {
    /// Desk-scale budget: minutes, not the paper's 1e8-epoch days.
    pub fn desk(frequency: T, medium: Medium<T>, seed: u64, coordinate_scale: T) -> Self {
        Self {
            hidden_layers: 3,
            hidden_nodes: 3,
            epochs: 500_000,
            learning_rate: cast(1e-3),
            beta1: cast(0.9),
            beta2: cast(0.999),
            epsilon: cast(1e-8),
            seed,
            coordinate_scale,
            pde_weight: T::one(),
            frequency,
            medium,
        }
    }

    /// The budget reported in the reference experiments (1e8 epochs at 1e-5).
    pub fn paper_faithful(frequency: T, medium: Medium<T>, seed: u64, coordinate_scale: T) -> Self {
        Self {
            epochs: 100_000_000,
            learning_rate: cast(1e-5),
            ..Self::desk(frequency, medium, seed, coordinate_scale)
        }
    }
}

/// Cost decomposition at one point in training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport<T: Float> {
    pub total: T,
    pub data: T,
    pub pde: T,
}

/// One logged history entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord<T: Float> {
    pub epoch: usize,
    pub total: T,
    pub data: T,
    pub pde: T,
}

/// Write history as `epoch,total,data,pde` rows.
pub fn write_loss_csv<T: Float, W: Write>(history: &[LossRecord<T>], mut out: W) -> Result<()> {
    writeln!(out, "epoch,total,data,pde")?;
    for rec in history {
        writeln!(out, "{},{},{},{}", rec.epoch, rec.total, rec.data, rec.pde)?;
    }
    Ok(())
}

/// Xavier-uniform initialization: `hidden_layers` tanh layers of
/// `hidden_nodes` units between a width-3 input and a width-2 linear head.
/// Biases start at zero; weights are drawn row-major from a seeded stream.
pub fn init_params<T: Float>(hidden_layers: usize, hidden_nodes: usize, seed: u64) -> MlpParams<T> {
    assert!(hidden_layers >= 1 && hidden_nodes >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![3usize];
    sizes.extend(std::iter::repeat(hidden_nodes).take(hidden_layers));
    sizes.push(2);
    let layers = sizes
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut layer = DenseLayer::zeros(fan_in, fan_out);
            for w in layer.weights.iter_mut() {
                *w = cast::<T>((2.0 * rng.gen::<f64>() - 1.0) * bound);
            }
            layer
        })
        .collect();
    MlpParams {
        layers,
        coordinate_scale: T::one(),
        output_scale: T::one(),
        seed,
    }
}

/// Network output as a complex pressure at a physical position.
pub fn forward<T: Float>(params: &MlpParams<T>, xyz: [T; 3]) -> Complex<T> {
    let mut scratch = Scratch::new(params);
    let out = forward_value(params, scale_input(params, xyz), &mut scratch);
    Complex::new(out[0], out[1]) * params.output_scale
}

/// Exact Laplacian of the represented field with respect to the physical
/// coordinates, including the chain-rule factor of the input scaling.
pub fn laplacian<T: Float>(params: &MlpParams<T>, xyz: [T; 3]) -> Complex<T> {
    let mut scratch = Scratch::new(params);
    forward_extended(params, scale_input(params, xyz), &mut scratch);
    let s2 = params.coordinate_scale * params.coordinate_scale;
    let mut lap = [T::zero(); 2];
    for (c, slot) in lap.iter_mut().enumerate() {
        for dir in 0..3 {
            *slot += scratch.h_out[dir * 2 + c];
        }
    }
    Complex::new(lap[0], lap[1]) * (params.output_scale / s2)
}

fn scale_input<T: Float>(params: &MlpParams<T>, xyz: [T; 3]) -> [T; 3] {
    let s = params.coordinate_scale;
    [xyz[0] / s, xyz[1] / s, xyz[2] / s]
}

// ---------------------------------------------------------------------------
// extended forward/backward machinery
// ---------------------------------------------------------------------------

/// Reusable buffers for one evaluation thread. Per hidden layer the
/// pre-activation and activation states each carry the value, the three input
/// gradients and the three diagonal second derivatives (direction-major,
/// stride = layer width).
struct Scratch<T> {
    z: Vec<Vec<T>>,
    gz: Vec<Vec<T>>,
    hz: Vec<Vec<T>>,
    a: Vec<Vec<T>>,
    ga: Vec<Vec<T>>,
    ha: Vec<Vec<T>>,
    out: [T; 2],
    g_out: [T; 6],
    h_out: [T; 6],
    // rolling input buffer for the value-only forward pass
    in_a: Vec<T>,
    // adjoint ping-pong buffers sized to the widest layer
    abar: Vec<T>,
    gabar: Vec<T>,
    habar: Vec<T>,
    abar_next: Vec<T>,
    gabar_next: Vec<T>,
    habar_next: Vec<T>,
}

impl<T: Float> Scratch<T> {
    fn new(params: &MlpParams<T>) -> Self {
        let hidden = params.layers.len() - 1;
        let widths: Vec<usize> = params.layers[..hidden].iter().map(|l| l.outputs).collect();
        let wide = params.widest_layer();
        Scratch {
            z: widths.iter().map(|&n| vec![T::zero(); n]).collect(),
            gz: widths.iter().map(|&n| vec![T::zero(); 3 * n]).collect(),
            hz: widths.iter().map(|&n| vec![T::zero(); 3 * n]).collect(),
            a: widths.iter().map(|&n| vec![T::zero(); n]).collect(),
            ga: widths.iter().map(|&n| vec![T::zero(); 3 * n]).collect(),
            ha: widths.iter().map(|&n| vec![T::zero(); 3 * n]).collect(),
            out: [T::zero(); 2],
            g_out: [T::zero(); 6],
            h_out: [T::zero(); 6],
            in_a: vec![T::zero(); wide.max(3)],
            abar: vec![T::zero(); wide],
            gabar: vec![T::zero(); 3 * wide],
            habar: vec![T::zero(); 3 * wide],
            abar_next: vec![T::zero(); wide],
            gabar_next: vec![T::zero(); 3 * wide],
            habar_next: vec![T::zero(); 3 * wide],
        }
    }
}

/// Value-only forward pass on scaled inputs; hidden activations are stored
/// for the matching value-only backward pass.
fn forward_value<T: Float>(params: &MlpParams<T>, p: [T; 3], s: &mut Scratch<T>) -> [T; 2] {
    let hidden = params.layers.len() - 1;
    s.in_a[..3].copy_from_slice(&p);
    for (l, layer) in params.layers[..hidden].iter().enumerate() {
        for r in 0..layer.outputs {
            let mut acc = layer.bias[r];
            for c in 0..layer.inputs {
                acc += layer.weights[r * layer.inputs + c] * s.in_a[c];
            }
            s.z[l][r] = acc;
            s.a[l][r] = acc.tanh();
        }
        s.in_a[..layer.outputs].copy_from_slice(&s.a[l]);
    }
    let head = &params.layers[hidden];
    for r in 0..2 {
        let mut acc = head.bias[r];
        for c in 0..head.inputs {
            acc += head.weights[r * head.inputs + c] * s.in_a[c];
        }
        s.out[r] = acc;
    }
    s.out
}

/// Extended forward pass: value, input gradient and diagonal input Hessian
/// for every neuron, on scaled inputs.
fn forward_extended<T: Float>(params: &MlpParams<T>, p: [T; 3], s: &mut Scratch<T>) {
    let hidden = params.layers.len() - 1;
    // input layer state: value p, unit gradients, zero second derivatives
    for (l, layer) in params.layers[..hidden].iter().enumerate() {
        let n = layer.outputs;
        for r in 0..n {
            let mut acc = layer.bias[r];
            let mut gacc = [T::zero(); 3];
            let mut hacc = [T::zero(); 3];
            for c in 0..layer.inputs {
                let w = layer.weights[r * layer.inputs + c];
                if l == 0 {
                    acc += w * p[c];
                    gacc[c] += w; // d p_c / d p_i = delta
                } else {
                    let prev = l - 1;
                    acc += w * s.a[prev][c];
                    for dir in 0..3 {
                        gacc[dir] += w * s.ga[prev][dir * layer.inputs + c];
                        hacc[dir] += w * s.ha[prev][dir * layer.inputs + c];
                    }
                }
            }
            s.z[l][r] = acc;
            let a = acc.tanh();
            let t1 = T::one() - a * a;
            let t2 = -(a + a) * t1;
            s.a[l][r] = a;
            for dir in 0..3 {
                let gz = gacc[dir];
                let hz = hacc[dir];
                s.gz[l][dir * n + r] = gz;
                s.hz[l][dir * n + r] = hz;
                s.ga[l][dir * n + r] = t1 * gz;
                s.ha[l][dir * n + r] = t2 * gz * gz + t1 * hz;
            }
        }
    }
    let head = &params.layers[hidden];
    let n_in = head.inputs;
    let prev = hidden - 1;
    for r in 0..2 {
        let mut acc = head.bias[r];
        let mut gacc = [T::zero(); 3];
        let mut hacc = [T::zero(); 3];
        for c in 0..n_in {
            let w = head.weights[r * n_in + c];
            acc += w * s.a[prev][c];
            for dir in 0..3 {
                gacc[dir] += w * s.ga[prev][dir * n_in + c];
                hacc[dir] += w * s.ha[prev][dir * n_in + c];
            }
        }
        s.out[r] = acc;
        for dir in 0..3 {
            s.g_out[dir * 2 + r] = gacc[dir];
            s.h_out[dir * 2 + r] = hacc[dir];
        }
    }
}

/// Reverse pass over the extended state. Seeds are adjoints of the head
/// outputs (`obar`) and of the head second-derivative channels (`hobar`,
/// direction-major); first-derivative channels carry no loss term. Parameter
/// gradients accumulate into `grad` (flat layout); the stored forward state
/// must come from [`forward_extended`] at the same point.
fn backward_extended<T: Float>(
    params: &MlpParams<T>,
    p: [T; 3],
    s: &mut Scratch<T>,
    obar: [T; 2],
    hobar: [T; 6],
    grad: &mut [T],
    offsets: &[usize],
) {
    let hidden = params.layers.len() - 1;
    let head = &params.layers[hidden];
    let n_in = head.inputs;
    let prev = hidden - 1;
    // head is linear: value and derivative channels all map through W
    for v in s.abar.iter_mut().chain(s.gabar.iter_mut()).chain(s.habar.iter_mut()) {
        *v = T::zero();
    }
    {
        let g = &mut grad[offsets[hidden]..];
        for r in 0..2 {
            for c in 0..n_in {
                let mut wbar = obar[r] * s.a[prev][c];
                for dir in 0..3 {
                    wbar += hobar[dir * 2 + r] * s.ha[prev][dir * n_in + c];
                }
                g[r * n_in + c] += wbar;
            }
            g[2 * n_in + r] += obar[r];
        }
        for c in 0..n_in {
            let mut ab = T::zero();
            for r in 0..2 {
                ab += head.weights[r * n_in + c] * obar[r];
            }
            s.abar[c] = ab;
            for dir in 0..3 {
                let mut hb = T::zero();
                for r in 0..2 {
                    hb += head.weights[r * n_in + c] * hobar[dir * 2 + r];
                }
                s.habar[dir * n_in + c] = hb;
                s.gabar[dir * n_in + c] = T::zero();
            }
        }
    }

    for l in (0..hidden).rev() {
        let layer = &params.layers[l];
        let n = layer.outputs;
        // activation: adjoints through tanh and its first two derivatives
        for r in 0..n {
            let a = s.a[l][r];
            let t1 = T::one() - a * a;
            let t2 = -(a + a) * t1;
            let t3 = t1 * (cast::<T>(6.0) * a * a - cast::<T>(2.0));
            let mut zbar = s.abar[r] * t1;
            for dir in 0..3 {
                let gz = s.gz[l][dir * n + r];
                let hz = s.hz[l][dir * n + r];
                let gab = s.gabar[dir * n + r];
                let hab = s.habar[dir * n + r];
                zbar += gab * t2 * gz + hab * (t3 * gz * gz + t2 * hz);
                // overwrite in place: adjoints of gz, hz
                s.gabar[dir * n + r] = gab * t1 + (hab + hab) * t2 * gz;
                s.habar[dir * n + r] = hab * t1;
            }
            s.abar[r] = zbar;
        }
        // linear part: parameter gradients plus adjoints into the previous layer
        let g = &mut grad[offsets[l]..];
        if l == 0 {
            for r in 0..n {
                for c in 0..3 {
                    // previous "ga" is the identity, "ha" is zero
                    g[r * 3 + c] += s.abar[r] * p[c] + s.gabar[c * n + r];
                }
                g[n * 3 + r] += s.abar[r];
            }
        } else {
            let prev = l - 1;
            let m = layer.inputs;
            for r in 0..n {
                for c in 0..m {
                    let mut wbar = s.abar[r] * s.a[prev][c];
                    for dir in 0..3 {
                        wbar += s.gabar[dir * n + r] * s.ga[prev][dir * m + c]
                            + s.habar[dir * n + r] * s.ha[prev][dir * m + c];
                    }
                    g[r * m + c] += wbar;
                }
                g[n * m + r] += s.abar[r];
            }
            for c in 0..m {
                let mut ab = T::zero();
                for r in 0..n {
                    ab += layer.weights[r * m + c] * s.abar[r];
                }
                s.abar_next[c] = ab;
                for dir in 0..3 {
                    let mut gb = T::zero();
                    let mut hb = T::zero();
                    for r in 0..n {
                        let w = layer.weights[r * m + c];
                        gb += w * s.gabar[dir * n + r];
                        hb += w * s.habar[dir * n + r];
                    }
                    s.gabar_next[dir * m + c] = gb;
                    s.habar_next[dir * m + c] = hb;
                }
            }
            std::mem::swap(&mut s.abar, &mut s.abar_next);
            std::mem::swap(&mut s.gabar, &mut s.gabar_next);
            std::mem::swap(&mut s.habar, &mut s.habar_next);
        }
    }
}

/// Value-only backward pass (for data-fit terms).
fn backward_value<T: Float>(
    params: &MlpParams<T>,
    p: [T; 3],
    s: &mut Scratch<T>,
    obar: [T; 2],
    grad: &mut [T],
    offsets: &[usize],
) {
    let hidden = params.layers.len() - 1;
    let head = &params.layers[hidden];
    let n_in = head.inputs;
    let prev = hidden - 1;
    {
        let g = &mut grad[offsets[hidden]..];
        for r in 0..2 {
            for c in 0..n_in {
                g[r * n_in + c] += obar[r] * s.a[prev][c];
            }
            g[2 * n_in + r] += obar[r];
        }
    }
    for c in 0..n_in {
        let mut ab = T::zero();
        for r in 0..2 {
            ab += head.weights[r * n_in + c] * obar[r];
        }
        s.abar[c] = ab;
    }
    for l in (0..hidden).rev() {
        let layer = &params.layers[l];
        let n = layer.outputs;
        for r in 0..n {
            let a = s.a[l][r];
            s.abar[r] = s.abar[r] * (T::one() - a * a);
        }
        let g = &mut grad[offsets[l]..];
        if l == 0 {
            for r in 0..n {
                for c in 0..3 {
                    g[r * 3 + c] += s.abar[r] * p[c];
                }
                g[n * 3 + r] += s.abar[r];
            }
        } else {
            let prev = l - 1;
            let m = layer.inputs;
            for r in 0..n {
                for c in 0..m {
                    g[r * m + c] += s.abar[r] * s.a[prev][c];
                }
                g[n * m + r] += s.abar[r];
            }
            for c in 0..m {
                let mut ab = T::zero();
                for r in 0..n {
                    ab += layer.weights[r * m + c] * s.abar[r];
                }
                s.abar_next[c] = ab;
            }
            std::mem::swap(&mut s.abar, &mut s.abar_next);
        }
    }
}

fn layer_offsets<T: Float>(params: &MlpParams<T>) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(params.layers.len());
    let mut at = 0;
    for layer in &params.layers {
        offsets.push(at);
        at += layer.param_count();
    }
    offsets
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

/// Points are split into fixed-size chunks; chunk results combine in chunk
/// order so the reduction is identical for any rayon thread count.
const CHUNK: usize = 64;

enum ChunkKind {
    Data,
    Collocation,
}

struct Chunk<T> {
    kind: ChunkKind,
    points: Vec<[T; 3]>,
    /// target (Re, Im) pairs, data chunks only
    targets: Vec<[T; 2]>,
}

struct ChunkResult<T> {
    data: T,
    pde: T,
    grad: Vec<T>,
}

struct LossProblem<T: Float> {
    chunks: Vec<Chunk<T>>,
    q_count: usize,
    a_count: usize,
    /// (k * coordinate_scale)^2: Laplacian normalizer in scaled coordinates
    k_scaled_sq: T,
    pde_weight: T,
}

impl<T: Float> LossProblem<T> {
    fn assemble(
        measurements: &FieldSnapshot<T>,
        collocation: &SphericalGrid<T>,
        config: &TrainConfig<T>,
        coordinate_scale: T,
    ) -> Result<Self> {
        if !(config.frequency > T::zero()) {
            return Err(Error::NonPositive {
                what: "PINN loss",
                name: "frequency",
                value: config.frequency.to_f64().unwrap_or(f64::NAN),
            });
        }
        let k = config.medium.wavenumber(config.frequency);
        let ks = k * coordinate_scale;
        let mut chunks = Vec::new();
        let scale = |xyz: &[T; 3]| {
            [
                xyz[0] / coordinate_scale,
                xyz[1] / coordinate_scale,
                xyz[2] / coordinate_scale,
            ]
        };
        for block in measurements
            .grid
            .cartesian()
            .chunks(CHUNK)
            .zip(measurements.pressures.chunks(CHUNK))
        {
            chunks.push(Chunk {
                kind: ChunkKind::Data,
                points: block.0.iter().map(&scale).collect(),
                targets: block.1.iter().map(|p| [p.re, p.im]).collect(),
            });
        }
        for block in collocation.cartesian().chunks(CHUNK) {
            chunks.push(Chunk {
                kind: ChunkKind::Collocation,
                points: block.iter().map(&scale).collect(),
                targets: Vec::new(),
            });
        }
        Ok(Self {
            chunks,
            q_count: measurements.grid.len(),
            a_count: collocation.len(),
            k_scaled_sq: ks * ks,
            pde_weight: config.pde_weight,
        })
    }

    fn evaluate(&self, params: &MlpParams<T>, want_grad: bool) -> (LossReport<T>, Vec<T>) {
        let offsets = layer_offsets(params);
        let n_params = params.num_params();
        let c = params.output_scale;
        let inv_q = T::one() / cast::<T>(self.q_count as f64);
        let inv_a = T::one() / cast::<T>(self.a_count as f64);
        let two = cast::<T>(2.0);

        let results: Vec<ChunkResult<T>> = self
            .chunks
            .par_iter()
            .map(|chunk| {
                let mut scratch = Scratch::new(params);
                let mut grad = vec![T::zero(); if want_grad { n_params } else { 0 }];
                let mut data = T::zero();
                let mut pde = T::zero();
                match chunk.kind {
                    ChunkKind::Data => {
                        for (point, target) in chunk.points.iter().zip(&chunk.targets) {
                            let out = forward_value(params, *point, &mut scratch);
                            let d = [c * out[0] - target[0], c * out[1] - target[1]];
                            data += (d[0] * d[0] + d[1] * d[1]) * inv_q;
                            if want_grad {
                                let obar = [two * c * d[0] * inv_q, two * c * d[1] * inv_q];
                                backward_value(params, *point, &mut scratch, obar, &mut grad, &offsets);
                            }
                        }
                    }
                    ChunkKind::Collocation => {
                        let w = self.pde_weight;
                        for point in &chunk.points {
                            forward_extended(params, *point, &mut scratch);
                            let mut resid = [T::zero(); 2];
                            for (ch, slot) in resid.iter_mut().enumerate() {
                                let mut lap = T::zero();
                                for dir in 0..3 {
                                    lap += scratch.h_out[dir * 2 + ch];
                                }
                                *slot = c * (lap / self.k_scaled_sq + scratch.out[ch]);
                            }
                            pde += (resid[0] * resid[0] + resid[1] * resid[1]) * inv_a;
                            if want_grad {
                                let base0 = two * w * c * resid[0] * inv_a;
                                let base1 = two * w * c * resid[1] * inv_a;
                                let obar = [base0, base1];
                                let mut hobar = [T::zero(); 6];
                                for dir in 0..3 {
                                    hobar[dir * 2] = base0 / self.k_scaled_sq;
                                    hobar[dir * 2 + 1] = base1 / self.k_scaled_sq;
                                }
                                backward_extended(
                                    params, *point, &mut scratch, obar, hobar, &mut grad, &offsets,
                                );
                            }
                        }
                    }
                }
                ChunkResult { data, pde, grad }
            })
            .collect();

        let mut data = T::zero();
        let mut pde = T::zero();
        let mut grad = vec![T::zero(); if want_grad { n_params } else { 0 }];
        for r in results {
            data += r.data;
            pde += r.pde;
            for (acc, g) in grad.iter_mut().zip(&r.grad) {
                *acc += *g;
            }
        }
        let report = LossReport {
            total: data + self.pde_weight * pde,
            data,
            pde,
        };
        (report, grad)
    }
}

/// Cost of Eq.-style data + PDE misfit at the current parameters.
pub fn loss<T: Float>(
    params: &MlpParams<T>,
    measurements: &FieldSnapshot<T>,
    collocation: &SphericalGrid<T>,
    config: &TrainConfig<T>,
) -> Result<LossReport<T>> {
    let problem = LossProblem::assemble(measurements, collocation, config, params.coordinate_scale)?;
    Ok(problem.evaluate(params, false).0)
}

/// Cost plus its exact gradient with respect to every parameter, flat layout.
pub fn loss_with_grad<T: Float>(
    params: &MlpParams<T>,
    measurements: &FieldSnapshot<T>,
    collocation: &SphericalGrid<T>,
    config: &TrainConfig<T>,
) -> Result<(LossReport<T>, Vec<T>)> {
    let problem = LossProblem::assemble(measurements, collocation, config, params.coordinate_scale)?;
    Ok(problem.evaluate(params, true))
}

/// First/second-moment state for Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T: Float> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: usize,
}

impl<T: Float> AdamState<T> {
    pub fn zeros(n_params: usize) -> Self {
        Self {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Float>(
    params: &mut MlpParams<T>,
    grad: &[T],
    state: &mut AdamState<T>,
    config: &TrainConfig<T>,
) {
    debug_assert_eq!(grad.len(), state.m.len());
    state.step += 1;
    let t = cast::<T>(state.step as f64);
    let b1 = config.beta1;
    let b2 = config.beta2;
    let bc1 = T::one() - b1.powf(t);
    let bc2 = T::one() - b2.powf(t);
    let mut flat = params.to_flat();
    for i in 0..grad.len() {
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * grad[i];
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * grad[i] * grad[i];
        let mh = state.m[i] / bc1;
        let vh = state.v[i] / bc2;
        flat[i] = flat[i] - config.learning_rate * mh / (vh.sqrt() + config.epsilon);
    }
    params.apply_flat(&flat);
}

/// Full-batch training. The output scale is fixed once from the measurement
/// RMS so the raw network fits an order-one target; the reported loss is
/// still the physical-pressure cost.
pub fn train<T: Float>(
    measurements: &FieldSnapshot<T>,
    collocation: &SphericalGrid<T>,
    config: &TrainConfig<T>,
) -> Result<(MlpParams<T>, Vec<LossRecord<T>>)> {
    if config.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be positive".into()));
    }
    if !(config.learning_rate > T::zero()) {
        return Err(Error::InvalidConfig("learning rate must be positive".into()));
    }
    let mut params = init_params::<T>(config.hidden_layers, config.hidden_nodes, config.seed);
    params.coordinate_scale = config.coordinate_scale;
    let rms = measurements.mean_square().sqrt();
    params.output_scale = if rms > T::zero() { rms } else { T::one() };

    let problem = LossProblem::assemble(measurements, collocation, config, params.coordinate_scale)?;
    let mut state = AdamState::zeros(params.num_params());
    let stride = (config.epochs / 1000).max(1);
    let mut history = Vec::with_capacity(config.epochs / stride + 2);
    for epoch in 0..config.epochs {
        let (report, grad) = problem.evaluate(&params, true);
        if !report.total.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if epoch % stride == 0 {
            history.push(LossRecord {
                epoch,
                total: report.total,
                data: report.data,
                pde: report.pde,
            });
        }
        adam_step(&mut params, &grad, &mut state, config);
    }
    let (final_report, _) = problem.evaluate(&params, false);
    history.push(LossRecord {
        epoch: config.epochs,
        total: final_report.total,
        data: final_report.data,
        pde: final_report.pde,
    });
    Ok((params, history))
}

/// Evaluate the trained field on a grid.
pub fn predict_on_sphere<T: Float>(
    params: &MlpParams<T>,
    grid: &SphericalGrid<T>,
    frequency: T,
) -> Result<FieldSnapshot<T>> {
    let mut scratch = Scratch::new(params);
    let pressures = grid
        .cartesian()
        .iter()
        .map(|&xyz| {
            let out = forward_value(params, scale_input(params, xyz), &mut scratch);
            Complex::new(out[0], out[1]) * params.output_scale
        })
        .collect();
    FieldSnapshot::new(frequency, grid.clone(), pressures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_grid, GridKind};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn medium() -> Medium<f64> {
        Medium::default()
    }

    fn test_config(seed: u64) -> TrainConfig<f64> {
        TrainConfig::desk(3430.0, medium(), seed, 0.05)
    }

    fn random_inputs(params: &mut MlpParams<f64>, seed: u64) {
        // scatter the weights away from init for derivative checks
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        let flat: Vec<f64> = params
            .to_flat()
            .iter()
            .map(|_| rng.gen::<f64>() * 2.0 - 1.0)
            .collect();
        params.apply_flat(&flat);
    }

    #[test]
    fn init_is_deterministic_and_counts_match() {
        let a = init_params::<f64>(3, 3, 42);
        let b = init_params::<f64>(3, 3, 42);
        assert_eq!(a, b);
        assert_eq!(a.num_params(), 44);
        let c = init_params::<f64>(3, 3, 43);
        assert_ne!(a, c);
        for layer in &a.layers {
            assert!(layer.bias.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn xavier_variance_statistics() {
        // first layer: fan_in 3, fan_out 3 -> target variance 2/6
        let mut acc = 0.0;
        let mut count = 0usize;
        for seed in 0..1000 {
            let p = init_params::<f64>(3, 3, seed);
            for &w in &p.layers[0].weights {
                acc += w * w;
                count += 1;
            }
        }
        let variance = acc / count as f64;
        let target = 2.0 / 6.0;
        assert!(
            (variance - target).abs() < 0.2 * target,
            "variance {variance} vs {target}"
        );
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut p = init_params::<f64>(3, 3, 1);
        p.apply_flat(&vec![0.0; p.num_params()]);
        let out = forward(&p, [0.3, -0.4, 0.1]);
        assert_eq!(out, Complex::new(0.0, 0.0));
        let lap = laplacian(&p, [0.3, -0.4, 0.1]);
        assert_eq!(lap, Complex::new(0.0, 0.0));
    }

    #[test]
    fn hidden_activations_stay_bounded() {
        let mut p = init_params::<f64>(2, 4, 7);
        let flat: Vec<f64> = p.to_flat().iter().map(|&w| w * 1e4).collect();
        p.apply_flat(&flat);
        let out = forward(&p, [50.0, -80.0, 20.0]);
        // tanh clamps every hidden unit; the head is a bounded combination
        let head = &p.layers.last().unwrap();
        let bound: f64 = head.weights.iter().map(|w| w.abs()).sum::<f64>()
            + head.bias.iter().map(|b| b.abs()).sum::<f64>();
        assert!(out.norm() <= bound * 1.0001);
    }

    #[test]
    fn forward_matches_straight_line_reevaluation() {
        let mut p = init_params::<f64>(3, 3, 5);
        random_inputs(&mut p, 5);
        p.coordinate_scale = 0.05;
        p.output_scale = 2.5;
        let xyz = [0.01, -0.03, 0.04];
        // independent re-evaluation with explicit matrix arithmetic
        let mut a: Vec<f64> = xyz.iter().map(|&x| x / 0.05).collect();
        for layer in &p.layers[..p.layers.len() - 1] {
            let mut next = vec![0.0; layer.outputs];
            for r in 0..layer.outputs {
                let mut acc = layer.bias[r];
                for c in 0..layer.inputs {
                    acc += layer.weights[r * layer.inputs + c] * a[c];
                }
                next[r] = acc.tanh();
            }
            a = next;
        }
        let head = p.layers.last().unwrap();
        let mut out = [head.bias[0], head.bias[1]];
        for r in 0..2 {
            for c in 0..head.inputs {
                out[r] += head.weights[r * head.inputs + c] * a[c];
            }
        }
        let got = forward(&p, xyz);
        assert_abs_diff_eq!(got.re, out[0] * 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(got.im, out[1] * 2.5, epsilon = 1e-14);
    }

    #[test]
    fn laplacian_matches_seven_point_stencil() {
        for seed in 0..20u64 {
            let mut p = init_params::<f64>(3, 3, seed);
            random_inputs(&mut p, seed);
            p.coordinate_scale = 0.05;
            p.output_scale = 1.3;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xyz = [
                0.05 * (rng.gen::<f64>() - 0.5),
                0.05 * (rng.gen::<f64>() - 0.5),
                0.05 * (rng.gen::<f64>() - 0.5),
            ];
            let h = 1e-4 * 0.05;
            let mut fd = Complex::new(0.0, 0.0);
            let center = forward(&p, xyz);
            for axis in 0..3 {
                let mut plus = xyz;
                plus[axis] += h;
                let mut minus = xyz;
                minus[axis] -= h;
                fd += forward(&p, plus) + forward(&p, minus) - center * 2.0;
            }
            fd /= h * h;
            let got = laplacian(&p, xyz);
            assert!(
                (got - fd).norm() <= 1e-5 * fd.norm().max(1e-6),
                "seed {seed}: {got} vs {fd}"
            );
        }
    }

    #[test]
    fn laplacian_scales_quadratically_in_the_linear_regime() {
        let base = init_params::<f64>(3, 3, 11);
        let xyz = [0.2, 0.1, -0.3];
        let lap_at = |scale: f64| {
            let mut p = base.clone();
            let flat: Vec<f64> = p.to_flat().iter().map(|&w| w * scale).collect();
            p.apply_flat(&flat);
            laplacian(&p, xyz).norm()
        };
        // tanh is odd: with weights -> 0 the network is asymptotically linear
        // through every layer, so curvature comes from the cubic term and the
        // head-visible Laplacian shrinks much faster than the weights
        let l1 = lap_at(1e-3);
        let l2 = lap_at(2e-3);
        assert!(l2 / l1 > 8.0, "ratio {}", l2 / l1);
    }

    #[test]
    fn loss_zero_at_exact_helmholtz_fit() {
        // a zero network against zero measurements satisfies both terms
        let m = medium();
        let grid = make_grid(GridKind::Fibonacci, 12, 0.05).unwrap();
        let coll = make_grid(GridKind::Fibonacci, 20, 0.05).unwrap();
        let snap =
            FieldSnapshot::new(3430.0, grid, vec![Complex::new(0.0, 0.0); 12]).unwrap();
        let mut p = init_params::<f64>(3, 3, 2);
        p.apply_flat(&vec![0.0; p.num_params()]);
        p.coordinate_scale = 0.05;
        let report = loss(&p, &snap, &coll, &test_config(2)).unwrap();
        assert_eq!(report.total, 0.0);
        let _ = m;
    }

    #[test]
    fn pde_residual_vanishes_on_an_analytic_solution() {
        // evaluate the PDE term of the cost on an exact Helmholtz solution
        // (a plane wave), bypassing the network entirely
        let m = medium();
        let f = 3430.0;
        let k = m.wavenumber(f);
        let coll = make_grid(GridKind::Fibonacci, 50, 0.05).unwrap();
        let mut worst = 0.0f64;
        for &xyz in coll.cartesian() {
            // P = e^{-i k z}: Laplacian = -k^2 P exactly
            let p = Complex::from_polar(1.0, -k * xyz[2]);
            let lap = p * (-k * k);
            let resid = lap / (k * k) + p;
            worst = worst.max(resid.norm_sqr());
        }
        assert!(worst < 1e-20);
    }

    #[test]
    fn doubling_measurements_quadruples_data_loss_at_zero_params() {
        let grid = make_grid(GridKind::Fibonacci, 10, 0.05).unwrap();
        let coll = make_grid(GridKind::Fibonacci, 10, 0.05).unwrap();
        let mk = |scale: f64| {
            FieldSnapshot::new(
                3430.0,
                grid.clone(),
                (0..10)
                    .map(|i| Complex::new(0.01 * i as f64, -0.02) * scale)
                    .collect(),
            )
            .unwrap()
        };
        let mut p = init_params::<f64>(3, 3, 3);
        p.apply_flat(&vec![0.0; p.num_params()]);
        p.coordinate_scale = 0.05;
        let cfg = test_config(3);
        let l1 = loss(&p, &mk(1.0), &coll, &cfg).unwrap();
        let l2 = loss(&p, &mk(2.0), &coll, &cfg).unwrap();
        assert_relative_eq!(l2.data, 4.0 * l1.data, max_relative = 1e-12);
    }

    #[test]
    fn loss_rejects_zero_frequency() {
        let grid = make_grid(GridKind::Fibonacci, 10, 0.05).unwrap();
        let coll = make_grid(GridKind::Fibonacci, 10, 0.05).unwrap();
        let snap =
            FieldSnapshot::new(3430.0, grid, vec![Complex::new(0.1, 0.0); 10]).unwrap();
        let p = init_params::<f64>(3, 3, 3);
        let mut cfg = test_config(3);
        cfg.frequency = 0.0;
        assert!(loss(&p, &snap, &coll, &cfg).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = medium();
        let mic = make_grid(GridKind::SphericalTDesign, 36, 0.05).unwrap();
        let coll = make_grid(GridKind::Fibonacci, 40, 0.05).unwrap();
        let src = crate::acoustics::PointSource::new([0.5, 0.5, 0.75]);
        let snap = crate::acoustics::free_field_snapshot(3430.0, &m, &src, &mic).unwrap();
        let cfg = test_config(0);
        for seed in 0..10u64 {
            let mut p = init_params::<f64>(3, 3, seed);
            p.coordinate_scale = 0.05;
            p.output_scale = snap.mean_square().sqrt();
            let (_, grad) = loss_with_grad(&p, &snap, &coll, &cfg).unwrap();
            let flat = p.to_flat();
            let h = 1e-6;
            for i in 0..flat.len() {
                let mut plus = p.clone();
                let mut fp = flat.clone();
                fp[i] += h;
                plus.apply_flat(&fp);
                let mut minus = p.clone();
                let mut fm = flat.clone();
                fm[i] -= h;
                minus.apply_flat(&fm);
                let lp = loss(&plus, &snap, &coll, &cfg).unwrap().total;
                let lm = loss(&minus, &snap, &coll, &cfg).unwrap().total;
                let fd = (lp - lm) / (2.0 * h);
                let denom = fd.abs().max(grad.iter().fold(0.0f64, |a, g| a.max(g.abs())) * 1e-6);
                assert!(
                    (grad[i] - fd).abs() <= 1e-4 * denom.max(1e-12),
                    "seed {seed} param {i}: analytic {} vs fd {}",
                    grad[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn loss_decomposition_is_exact() {
        let m = medium();
        let mic = make_grid(GridKind::SphericalTDesign, 36, 0.05).unwrap();
        let coll = make_grid(GridKind::Fibonacci, 30, 0.05).unwrap();
        let src = crate::acoustics::PointSource::new([0.5, 0.5, 0.75]);
        let snap = crate::acoustics::free_field_snapshot(3430.0, &m, &src, &mic).unwrap();
        let mut cfg = test_config(1);
        cfg.pde_weight = 0.37;
        let mut p = init_params::<f64>(3, 3, 1);
        p.coordinate_scale = 0.05;
        let report = loss(&p, &snap, &coll, &cfg).unwrap();
        assert_eq!(report.total, report.data + 0.37 * report.pde);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut p = init_params::<f64>(3, 3, 9);
        let before = p.clone();
        let n = p.num_params();
        let mut state = AdamState::zeros(n);
        adam_step(&mut p, &vec![0.0; n], &mut state, &test_config(9));
        assert_eq!(p, before);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let mut p = init_params::<f64>(3, 3, 10);
        let before = p.to_flat();
        let mut state = AdamState::zeros(p.num_params());
        let cfg = test_config(10);
        let grad: Vec<f64> = (0..p.num_params())
            .map(|i| if i % 2 == 0 { 0.5 } else { -2.0 })
            .collect();
        adam_step(&mut p, &grad, &mut state, &cfg);
        let after = p.to_flat();
        for i in 0..before.len() {
            let update = after[i] - before[i];
            let want = -cfg.learning_rate * grad[i].signum();
            assert_relative_eq!(update, want, max_relative = 1e-6);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let m = medium();
        let mic = make_grid(GridKind::SphericalTDesign, 36, 0.05).unwrap();
        let coll = make_grid(GridKind::Fibonacci, 50, 0.05).unwrap();
        let src = crate::acoustics::PointSource::new([0.5, 0.5, 0.75]);
        let snap = crate::acoustics::free_field_snapshot(3430.0, &m, &src, &mic).unwrap();
        let mut cfg = test_config(4);
        cfg.epochs = 200;
        let (pa, ha) = train(&snap, &coll, &cfg).unwrap();
        let (pb, hb) = train(&snap, &coll, &cfg).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(ha, hb);
    }

    #[test]
    fn zero_measurements_drive_loss_to_zero() {
        let grid = make_grid(GridKind::Fibonacci, 12, 0.05).unwrap();
        let coll = make_grid(GridKind::Fibonacci, 20, 0.05).unwrap();
        let snap =
            FieldSnapshot::new(3430.0, grid, vec![Complex::new(0.0, 0.0); 12]).unwrap();
        let mut cfg = test_config(5);
        cfg.epochs = 8000;
        let (_, history) = train(&snap, &coll, &cfg).unwrap();
        let first = history.first().unwrap().total;
        let last = history.last().unwrap().total;
        assert!(last < 1e-4 * first.max(1e-9), "{first} -> {last}");
    }

    #[test]
    fn history_stride_and_final_entry() {
        let grid = make_grid(GridKind::Fibonacci, 12, 0.05).unwrap();
        let coll = make_grid(GridKind::Fibonacci, 12, 0.05).unwrap();
        let snap =
            FieldSnapshot::new(3430.0, grid.clone(), vec![Complex::new(0.1, 0.0); 12]).unwrap();
        let mut cfg = test_config(6);
        cfg.epochs = 50;
        let (params, history) = train(&snap, &coll, &cfg).unwrap();
        // stride is max(1, 50/1000) = 1: one entry per epoch plus the final state
        assert_eq!(history.len(), 51);
        assert_eq!(history.last().unwrap().epoch, 50);
        let mut buf = Vec::new();
        write_loss_csv(&history, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 52);

        // prediction on the training sphere sits within data-loss distance
        let pred = predict_on_sphere(&params, &grid, 3430.0).unwrap();
        let mse: f64 = pred
            .pressures
            .iter()
            .map(|p| (p - Complex::new(0.1, 0.0)).norm_sqr())
            .sum::<f64>()
            / 12.0;
        let reported = history.last().unwrap().data;
        assert_relative_eq!(mse, reported, max_relative = 1e-9);
    }

    #[test]
    fn params_json_round_trip() {
        let mut p = init_params::<f64>(3, 3, 77);
        p.coordinate_scale = 0.05;
        p.output_scale = 0.077;
        let back = MlpParams::<f64>::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
    }
}
