//! The universal controller: one fixed-topology MLP shared by every body
//! plan, conditioned on morphology purely through input and output masking.
//!
//! Inputs are 245 photosensor slots (one per potential mass site, zero when
//! the site is absent) plus 5 central-pattern-generator sines. Outputs are
//! 1648 actuation slots (one per potential spring site) squashed by `tanh`;
//! slots for absent springs are exactly zero. Hidden layers apply
//! linear -> layer normalization -> ReLU.

use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{dot, Real};
use crate::morphospace::{MASS_SITES, SPRING_SITES};
use crate::rng::substream;

/// Sensor slots: one per potential mass site.
pub const N_SENSORS: usize = MASS_SITES;
/// Central pattern generator waves appended to the sensor slots.
pub const CPG_WAVES: usize = 5;
/// Total input dimension.
pub const INPUT_DIM: usize = N_SENSORS + CPG_WAVES;
/// Width of each of the three hidden layers.
pub const HIDDEN_DIM: usize = 256;
/// Output dimension: one actuation per potential spring site.
pub const OUTPUT_DIM: usize = SPRING_SITES;
/// Layer normalization epsilon.
pub const LN_EPS: f64 = 1e-5;
/// Total learnable scalars.
pub const PARAM_COUNT: usize = 620_912;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("non-finite activation; parameters are corrupt")]
    NonFinite,
    #[error("checkpoint is malformed: {0}")]
    BadCheckpoint(String),
}

/// One tensor's slot in the flat parameter vector.
#[derive(Clone, Copy, Debug)]
pub struct TensorSpec {
    pub name: &'static str,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpec {
    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }
}

const fn tensor(name: &'static str, offset: usize, rows: usize, cols: usize) -> TensorSpec {
    TensorSpec {
        name,
        offset,
        rows,
        cols,
    }
}

/// Flat layout: per layer, weights then bias, with normalization gain and
/// offset after each hidden layer's bias. Weight matrices are row-major
/// `[out][in]`.
pub const TENSORS: [TensorSpec; 14] = {
    let h = HIDDEN_DIM;
    let mut off = 0;
    let w1 = tensor("w1", off, h, INPUT_DIM);
    off += h * INPUT_DIM;
    let b1 = tensor("b1", off, h, 1);
    off += h;
    let g1 = tensor("ln1_gain", off, h, 1);
    off += h;
    let e1 = tensor("ln1_offset", off, h, 1);
    off += h;
    let w2 = tensor("w2", off, h, h);
    off += h * h;
    let b2 = tensor("b2", off, h, 1);
    off += h;
    let g2 = tensor("ln2_gain", off, h, 1);
    off += h;
    let e2 = tensor("ln2_offset", off, h, 1);
    off += h;
    let w3 = tensor("w3", off, h, h);
    off += h * h;
    let b3 = tensor("b3", off, h, 1);
    off += h;
    let g3 = tensor("ln3_gain", off, h, 1);
    off += h;
    let e3 = tensor("ln3_offset", off, h, 1);
    off += h;
    let w4 = tensor("w4", off, OUTPUT_DIM, h);
    off += OUTPUT_DIM * h;
    let b4 = tensor("b4", off, OUTPUT_DIM, 1);
    let _ = off;
    [w1, b1, g1, e1, w2, b2, g2, e2, w3, b3, g3, e3, w4, b4]
};

const B1: usize = 1;
const G1: usize = 2;
const E1: usize = 3;
const W4: usize = 12;
const B4: usize = 13;

#[inline]
fn span(t: usize) -> std::ops::Range<usize> {
    TENSORS[t].offset..TENSORS[t].offset + TENSORS[t].len()
}

/// All learnable weights of the universal controller, stored flat in the
/// documented tensor order.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerParams<T> {
    data: Vec<T>,
}

impl<T: Real> ControllerParams<T> {
    pub fn zeros() -> Self {
        ControllerParams {
            data: vec![T::zero(); PARAM_COUNT],
        }
    }

    /// Xavier-uniform weights (gain 1, bound `sqrt(6 / (fan_in + fan_out))`),
    /// zero biases, unit normalization gains, zero normalization offsets.
    ///
    /// Sampling always draws `f64`s and narrows, so every precision sees the
    /// same underlying draw.
    pub fn init(seed: u64) -> Self {
        let mut rng = substream(seed, "controller-init");
        let mut params = Self::zeros();
        for (t, spec) in TENSORS.iter().enumerate() {
            if spec.cols > 1 {
                let bound = (6.0 / (spec.cols + spec.rows) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound);
                for w in &mut params.data[span(t)] {
                    *w = T::of(dist.sample(&mut rng));
                }
            } else if spec.name.ends_with("gain") {
                params.data[span(t)].fill(T::one());
            }
        }
        params
    }

    pub fn from_flat(data: Vec<T>) -> Self {
        assert_eq!(data.len(), PARAM_COUNT);
        ControllerParams { data }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn tensor(&self, t: usize) -> &[T] {
        &self.data[span(t)]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Convert precision, rounding to nearest when narrowing.
    pub fn cast<U: Real>(&self) -> ControllerParams<U> {
        ControllerParams {
            data: self
                .data
                .iter()
                .map(|&x| U::of(x.to_f64_lossless()))
                .collect(),
        }
    }
}

/// The central pattern generator: five unit sines at a shared angular
/// frequency with phases spaced `2 pi / 5` apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpgConfig {
    pub omega_rad_s: f64,
}

impl Default for CpgConfig {
    fn default() -> Self {
        CpgConfig { omega_rad_s: 10.0 }
    }
}

impl CpgConfig {
    pub fn phase_offsets(&self) -> [f64; CPG_WAVES] {
        core::array::from_fn(|m| 2.0 * std::f64::consts::PI * m as f64 / CPG_WAVES as f64)
    }
}

/// Wave `m` at time `t` is `sin(omega * t + 2 pi m / 5)`.
pub fn cpg_signals(t_seconds: f64, cfg: &CpgConfig) -> [f64; CPG_WAVES] {
    let offsets = cfg.phase_offsets();
    core::array::from_fn(|m| (cfg.omega_rad_s * t_seconds + offsets[m]).sin())
}

/// Saved forward intermediates for one controller evaluation, enough to run
/// the exact reverse pass without recomputation.
#[derive(Clone, Debug, Default)]
pub struct ForwardStash<T> {
    /// Normalized activations (pre-gain) per hidden layer.
    pub xhat: [Vec<T>; 3],
    /// Post-ReLU activations per hidden layer.
    pub h: [Vec<T>; 3],
    /// `1 / sqrt(var + eps)` per hidden layer.
    pub inv_std: [T; 3],
    /// `tanh` outputs for the active springs, in `active_sites` order.
    pub out: Vec<T>,
}

fn hidden_layer<T: Real>(
    params: &ControllerParams<T>,
    layer: usize,
    input: &[T],
    xhat: &mut Vec<T>,
    h: &mut Vec<T>,
) -> T {
    let base = layer * 4;
    let w = params.tensor(base);
    let b = params.tensor(base + B1);
    let gain = params.tensor(base + G1);
    let offset = params.tensor(base + E1);
    let n = HIDDEN_DIM;
    let in_dim = TENSORS[base].cols;

    xhat.clear();
    xhat.resize(n, T::zero());
    h.clear();
    h.resize(n, T::zero());

    // Linear.
    for o in 0..n {
        xhat[o] = dot(&w[o * in_dim..(o + 1) * in_dim], input) + b[o];
    }
    // Layer normalization over the feature dimension.
    let n_t = T::of(n as f64);
    let mean = xhat.iter().copied().sum::<T>() / n_t;
    let var = xhat.iter().map(|&z| (z - mean) * (z - mean)).sum::<T>() / n_t;
    let inv_std = T::one() / (var + T::of(LN_EPS)).sqrt();
    for o in 0..n {
        xhat[o] = (xhat[o] - mean) * inv_std;
        let scaled = gain[o] * xhat[o] + offset[o];
        h[o] = if scaled > T::zero() { scaled } else { T::zero() };
    }
    inv_std
}

/// Run the network for the springs in `active_sites` only; `out[n]` is the
/// actuation of global spring site `active_sites[n]`.
///
/// Inactive sensor slots of `input` must already be zero; rows of the output
/// layer for absent springs are never touched, which is also why parameters
/// that only feed absent springs get exactly zero gradient.
pub fn forward_active<T: Real>(
    params: &ControllerParams<T>,
    input: &[T],
    active_sites: &[usize],
    out: &mut [T],
    mut stash: Option<&mut ForwardStash<T>>,
) {
    debug_assert_eq!(input.len(), INPUT_DIM);
    debug_assert_eq!(out.len(), active_sites.len());
    let mut xhat = [Vec::new(), Vec::new(), Vec::new()];
    let mut h = [Vec::new(), Vec::new(), Vec::new()];
    let mut inv_std = [T::zero(); 3];

    inv_std[0] = hidden_layer(params, 0, input, &mut xhat[0], &mut h[0]);
    let (head, tail) = h.split_at_mut(1);
    inv_std[1] = hidden_layer(params, 1, &head[0], &mut xhat[1], &mut tail[0]);
    let (head, tail) = h.split_at_mut(2);
    inv_std[2] = hidden_layer(params, 2, &head[1], &mut xhat[2], &mut tail[0]);

    let w4 = params.tensor(W4);
    let b4 = params.tensor(B4);
    let h3 = &h[2];
    for (n, &site) in active_sites.iter().enumerate() {
        let z = dot(&w4[site * HIDDEN_DIM..(site + 1) * HIDDEN_DIM], h3) + b4[site];
        out[n] = z.tanh();
    }

    if let Some(stash) = stash.as_deref_mut() {
        stash.xhat = xhat;
        stash.h = h;
        stash.inv_std = inv_std;
        stash.out = out.to_vec();
    }
}

/// The full masked forward pass: readings and CPG signals to 1648 actuations
/// in `[-1, 1]`, with masked sensors zeroed on entry and masked actuators
/// exactly zero on exit.
pub fn forward<T: Real>(
    params: &ControllerParams<T>,
    readings: &[T],
    cpg: &[f64; CPG_WAVES],
    sensor_mask: &[bool],
    actuator_mask: &[bool],
) -> Result<Vec<T>, ControllerError> {
    debug_assert_eq!(readings.len(), N_SENSORS);
    debug_assert_eq!(sensor_mask.len(), N_SENSORS);
    debug_assert_eq!(actuator_mask.len(), OUTPUT_DIM);
    let mut input = vec![T::zero(); INPUT_DIM];
    for s in 0..N_SENSORS {
        if sensor_mask[s] {
            input[s] = readings[s];
        }
    }
    for m in 0..CPG_WAVES {
        input[N_SENSORS + m] = T::of(cpg[m]);
    }
    let active: Vec<usize> = (0..OUTPUT_DIM).filter(|&s| actuator_mask[s]).collect();
    let mut active_out = vec![T::zero(); active.len()];
    forward_active(params, &input, &active, &mut active_out, None);
    let mut out = vec![T::zero(); OUTPUT_DIM];
    for (n, &site) in active.iter().enumerate() {
        if !active_out[n].is_finite() {
            return Err(ControllerError::NonFinite);
        }
        out[site] = active_out[n];
    }
    Ok(out)
}

fn hidden_layer_backward<T: Real>(
    params: &ControllerParams<T>,
    layer: usize,
    input: &[T],
    xhat: &[T],
    inv_std: T,
    g_h: &[T],
    g_params: &mut [T],
    g_input: &mut [T],
) {
    let base = layer * 4;
    let spec = TENSORS[base];
    let w = params.tensor(base);
    let gain = params.tensor(base + G1);
    let n = HIDDEN_DIM;
    let n_t = T::of(n as f64);

    // ReLU, then the affine part of layer norm.
    let mut g_xhat = vec![T::zero(); n];
    let g_gain = &mut vec![T::zero(); n];
    let g_offset = &mut vec![T::zero(); n];
    for o in 0..n {
        let scaled = gain[o] * xhat[o] + params.tensor(base + E1)[o];
        let g = if scaled > T::zero() { g_h[o] } else { T::zero() };
        g_gain[o] = g * xhat[o];
        g_offset[o] = g;
        g_xhat[o] = g * gain[o];
    }

    // Normalization: g_z = inv_std * (g_xhat - mean(g_xhat) - xhat * mean(g_xhat * xhat)).
    let mean_g = g_xhat.iter().copied().sum::<T>() / n_t;
    let mean_gx = g_xhat
        .iter()
        .zip(xhat)
        .map(|(&g, &x)| g * x)
        .sum::<T>()
        / n_t;
    let mut g_z = vec![T::zero(); n];
    for o in 0..n {
        g_z[o] = inv_std * (g_xhat[o] - mean_g - xhat[o] * mean_gx);
    }

    // Linear: accumulate weight/bias gradients and push into the input.
    let in_dim = spec.cols;
    let w_off = spec.offset;
    let b_off = TENSORS[base + B1].offset;
    for o in 0..n {
        let gz = g_z[o];
        if gz != T::zero() {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let g_row = &mut g_params[w_off + o * in_dim..w_off + (o + 1) * in_dim];
            for i in 0..in_dim {
                g_row[i] += gz * input[i];
                g_input[i] += gz * row[i];
            }
        }
        g_params[b_off + o] += gz;
    }
    let g_off = TENSORS[base + G1].offset;
    let e_off = TENSORS[base + E1].offset;
    for o in 0..n {
        g_params[g_off + o] += g_gain[o];
        g_params[e_off + o] += g_offset[o];
    }
}

/// Exact reverse pass of [`forward_active`].
///
/// `g_out[n]` is the loss adjoint of the actuation for `active_sites[n]`.
/// Parameter gradients accumulate into `g_params`; the adjoint of the input
/// vector (sensor slots included) is written to `g_input`.
pub fn backward_active<T: Real>(
    params: &ControllerParams<T>,
    input: &[T],
    active_sites: &[usize],
    stash: &ForwardStash<T>,
    g_out: &[T],
    g_params: &mut [T],
    g_input: &mut [T],
) {
    debug_assert_eq!(g_params.len(), PARAM_COUNT);
    debug_assert_eq!(g_input.len(), INPUT_DIM);
    let w4 = params.tensor(W4);
    let w4_off = TENSORS[W4].offset;
    let b4_off = TENSORS[B4].offset;
    let h3 = &stash.h[2];

    let mut g_h3 = vec![T::zero(); HIDDEN_DIM];
    for (n, &site) in active_sites.iter().enumerate() {
        let y = stash.out[n];
        let gz = g_out[n] * (T::one() - y * y);
        if gz == T::zero() {
            continue;
        }
        let row = &w4[site * HIDDEN_DIM..(site + 1) * HIDDEN_DIM];
        let g_row = &mut g_params[w4_off + site * HIDDEN_DIM..w4_off + (site + 1) * HIDDEN_DIM];
        for i in 0..HIDDEN_DIM {
            g_row[i] += gz * h3[i];
            g_h3[i] += gz * row[i];
        }
        g_params[b4_off + site] += gz;
    }

    let mut g_h2 = vec![T::zero(); HIDDEN_DIM];
    hidden_layer_backward(
        params,
        2,
        &stash.h[1],
        &stash.xhat[2],
        stash.inv_std[2],
        &g_h3,
        g_params,
        &mut g_h2,
    );
    let mut g_h1 = vec![T::zero(); HIDDEN_DIM];
    hidden_layer_backward(
        params,
        1,
        &stash.h[0],
        &stash.xhat[1],
        stash.inv_std[1],
        &g_h2,
        g_params,
        &mut g_h1,
    );
    hidden_layer_backward(
        params,
        0,
        input,
        &stash.xhat[0],
        stash.inv_std[0],
        &g_h1,
        g_params,
        g_input,
    );
}
