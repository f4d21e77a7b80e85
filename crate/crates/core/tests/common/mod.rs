//! Independent reference computations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the forward or backward
//! pass being checked.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ttfs_dendrites::data::{RawImage, IMAGE_PIXELS};
use ttfs_dendrites::model::{layer_forward_traced, LayerTrace, NeuronTrace};
use ttfs_dendrites::{DendriticLayer, NetworkConfig, SpikeRecord};

/// Membrane potential at `t` for inputs `(spike time, weight)`, found by
/// integrating the summed input current piece by piece between arrivals.
pub fn membrane_at(inputs: &[(f64, f64)], t: f64) -> f64 {
    let mut breaks: Vec<f64> = inputs.iter().map(|&(ti, _)| ti).filter(|&ti| ti < t).collect();
    breaks.push(t);
    breaks.sort_by(f64::total_cmp);
    let current = |s: f64| -> f64 { inputs.iter().filter(|&&(ti, _)| ti <= s).map(|&(_, w)| w).sum() };
    let mut v = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b > a {
            // The current is constant on (a, b]; sample it at the midpoint.
            v += current(0.5 * (a + b)) * (b - a);
        }
    }
    v
}

/// First grid time at which the membrane reaches `v_th`, stepping the input
/// current forward by `dt`.
pub fn grid_crossing(inputs: &[(f64, f64)], v_th: f64, dt: f64, t_end: f64) -> Option<f64> {
    let mut v = 0.0;
    let steps = (t_end / dt).ceil() as usize;
    for k in 0..steps {
        let t = k as f64 * dt;
        let current: f64 = inputs.iter().filter(|&&(ti, _)| ti <= t).map(|&(_, w)| w).sum();
        v += current * dt;
        if v >= v_th {
            return Some(t + dt);
        }
    }
    None
}

/// `(time, weight)` pairs feeding neuron `j`, skipping dead inputs.
pub fn neuron_inputs(inputs: &[SpikeRecord], layer: &DendriticLayer, j: usize) -> Vec<(f64, f64)> {
    inputs
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.time().map(|t| (t, layer.weight(i, j))))
        .collect()
}

pub fn small_config(n_tasks: usize) -> NetworkConfig {
    let mut cfg = NetworkConfig::new(vec![8, 4]);
    cfg.t_max = 40.0;
    cfg.n_tasks = n_tasks;
    cfg
}

/// A layer whose neurons mostly fire on [`random_inputs`].
pub fn random_layer<R: Rng>(rng: &mut R, inputs: usize, neurons: usize, n_tasks: usize, dendrites: bool) -> DendriticLayer {
    let weights = (0..inputs * neurons).map(|_| rng.random_range(-0.4..1.2)).collect();
    let segments = dendrites.then(|| {
        let normal = Normal::new(0.0, 1.5).unwrap();
        (0..n_tasks * neurons).map(|_| normal.sample(rng)).collect()
    });
    DendriticLayer::new(inputs, neurons, weights, segments).unwrap()
}

pub fn random_inputs<R: Rng>(rng: &mut R, n: usize, latest: f64) -> Vec<SpikeRecord> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                SpikeRecord::Dead
            } else {
                SpikeRecord::Fired(rng.random_range(0.0..latest))
            }
        })
        .collect()
}

/// Dead flags and causal sets; equal shapes mean no boundary was crossed.
pub fn shape(trace: &LayerTrace) -> Vec<Option<Vec<bool>>> {
    trace
        .neurons
        .iter()
        .map(|n| match *n {
            NeuronTrace::Dead => None,
            NeuronTrace::Fired { causal_until, .. } => Some(
                trace
                    .inputs
                    .iter()
                    .map(|s| s.time().is_some_and(|t| t <= causal_until))
                    .collect(),
            ),
        })
        .collect()
}

/// Weighted sum of emitted spike times, dead neurons pinned to `T_max`.
pub fn probe_loss(trace: &LayerTrace, coeffs: &[f64], t_max: f64) -> f64 {
    trace
        .outputs()
        .iter()
        .zip(coeffs)
        .map(|(s, c)| c * s.time_or(t_max))
        .sum()
}

pub const FD_STEP: f64 = 1e-6;

/// Central difference of [`probe_loss`] under `perturb`, or `None` if either
/// probe changed which neurons fire or which inputs are causal.
pub fn central_difference(
    inputs: &[SpikeRecord],
    layer: &DendriticLayer,
    task: usize,
    cfg: &NetworkConfig,
    coeffs: &[f64],
    perturb: impl Fn(&mut Vec<SpikeRecord>, &mut DendriticLayer, f64),
) -> Option<f64> {
    let base = shape(&layer_forward_traced(inputs, layer, task, cfg).unwrap());
    let eval = |h: f64| {
        let mut x = inputs.to_vec();
        let mut l = layer.clone();
        perturb(&mut x, &mut l, h);
        let trace = layer_forward_traced(&x, &l, task, cfg).unwrap();
        (shape(&trace) == base).then(|| probe_loss(&trace, coeffs, cfg.t_max))
    };
    let (plus, minus) = (eval(FD_STEP)?, eval(-FD_STEP)?);
    Some((plus - minus) / (2.0 * FD_STEP))
}

/// `|a - b|` relative to the larger magnitude; two exact zeros agree.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Agreement test for finite differences: relative error within `tol`, or
/// both values below the difference quotient's round-off floor.
pub fn grad_close(analytic: f64, numeric: f64, tol: f64) -> bool {
    rel_err(analytic, numeric) <= tol || (analytic - numeric).abs() < 1e-7
}

/// Ten digit classes, each a bright horizontal band at its own height over
/// sparse noise. Returns `(train, test)`.
pub fn synthetic_digits(train_per_digit: usize, test_per_digit: usize) -> (Vec<RawImage>, Vec<RawImage>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut make = |n: usize| -> Vec<RawImage> {
        let mut out = Vec::new();
        for k in 0..n {
            for digit in 0..10u8 {
                let mut pixels = vec![0u8; IMAGE_PIXELS];
                for p in pixels.iter_mut() {
                    if rng.random_bool(0.05) {
                        *p = rng.random_range(0..128);
                    }
                }
                let row = 2 + 2 * digit as usize + (k % 2);
                for c in 4..24 {
                    pixels[row * 28 + c] = 255;
                }
                out.push(RawImage { pixels, label: digit });
            }
        }
        out
    };
    let train = make(train_per_digit);
    let test = make(test_per_digit);
    (train, test)
}
