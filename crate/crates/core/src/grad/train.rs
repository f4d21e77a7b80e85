use rayon::prelude::*;

use super::adam::AdamState;
use super::backward::{backward_into, Gradients};
use super::loss::loss_and_output_grad;
use crate::error::{Error, Result};
use crate::model::{Network, SpikeRecord};

/// Upper bound on per-batch gradient accumulators. Samples are split into
/// this many contiguous chunks and the chunk sums are added in order, so the
/// result does not depend on the thread count.
const GRAD_CHUNKS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub spikes: Vec<SpikeRecord>,
    pub label: usize,
    pub task: usize,
}

/// Mean loss and mean gradients over `batch`, without touching the model.
pub fn batch_gradients(net: &Network, batch: &[Sample]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let chunk = batch.len().div_ceil(GRAD_CHUNKS);
    let partials: Vec<(f64, Gradients)> = batch
        .par_chunks(chunk)
        .map(|samples| -> Result<(f64, Gradients)> {
            let mut grads = Gradients::zeros_like(net);
            let mut loss = 0.0;
            for s in samples {
                let tape = net.forward_traced(&s.spikes, s.task)?;
                let (l, output_grad) = loss_and_output_grad(&tape.outputs(), s.label, &net.config);
                loss += l;
                backward_into(net, &tape, &output_grad, &mut grads);
            }
            Ok((loss, grads))
        })
        .collect::<Result<_>>()?;

    let mut parts = partials.into_iter();
    let (mut loss, mut grads) = parts.next().expect("non-empty batch");
    for (l, g) in parts {
        loss += l;
        grads.add_assign(&g);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((loss * inv, grads))
}

/// Forward and backward over the batch, gradients averaged, then one Adam
/// step. Only the dendritic rows of tasks present in the batch move.
pub fn train_batch(net: &mut Network, opt: &mut AdamState, batch: &[Sample]) -> Result<f64> {
    let (loss, grads) = batch_gradients(net, batch)?;
    let mut tasks: Vec<usize> = batch.iter().map(|s| s.task).collect();
    tasks.sort_unstable();
    tasks.dedup();
    opt.apply(net, &grads, &tasks)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NetworkConfig;
    use crate::grad::AdamConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use SpikeRecord::{Dead, Fired};

    fn toy_net(seed: u64) -> Network {
        let mut cfg = NetworkConfig::new(vec![6, 8, 2]);
        cfg.t_max = 20.0;
        cfg.n_tasks = 2;
        Network::init(cfg, true, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn toy_samples() -> Vec<Sample> {
        vec![
            Sample {
                spikes: vec![Fired(0.5), Fired(1.0), Fired(1.5), Fired(10.0), Fired(12.0), Fired(15.0)],
                label: 0,
                task: 0,
            },
            Sample {
                spikes: vec![Fired(10.0), Fired(12.0), Fired(15.0), Fired(0.5), Fired(1.0), Fired(1.5)],
                label: 1,
                task: 0,
            },
        ]
    }

    #[test]
    fn empty_batch_is_error() {
        let mut net = toy_net(0);
        let mut opt = AdamState::new(&net, AdamConfig::default());
        assert!(matches!(train_batch(&mut net, &mut opt, &[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn duplicated_sample_averages_to_itself() {
        let net = toy_net(1);
        let s = toy_samples().remove(0);
        let (l1, g1) = batch_gradients(&net, std::slice::from_ref(&s)).unwrap();
        let (l2, g2) = batch_gradients(&net, &[s.clone(), s]).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.weights.iter().flatten().zip(g2.weights.iter().flatten()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn toy_task_loss_decreases() {
        let mut net = toy_net(2);
        let mut opt = AdamState::new(&net, AdamConfig { lr: 1e-2, ..Default::default() });
        let batch = toy_samples();
        let initial = batch_gradients(&net, &batch).unwrap().0;
        for _ in 0..200 {
            train_batch(&mut net, &mut opt, &batch).unwrap();
        }
        let fin = batch_gradients(&net, &batch).unwrap().0;
        assert!(fin < initial, "loss {initial} -> {fin}");
    }

    #[test]
    fn dead_hidden_layer_freezes_parameters() {
        let mut net = toy_net(3);
        for w in &mut net.layers[0].weights {
            *w = -1.0;
        }
        let before = net.clone();
        let mut opt = AdamState::new(&net, AdamConfig::default());
        train_batch(&mut net, &mut opt, &toy_samples()).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn only_current_task_row_moves() {
        let mut net = toy_net(4);
        let before = net.clone();
        let mut opt = AdamState::new(&net, AdamConfig::default());
        let mut batch = toy_samples();
        batch.iter_mut().for_each(|s| s.task = 1);
        train_batch(&mut net, &mut opt, &batch).unwrap();
        let n = net.layers[0].neurons;
        let seg = net.layers[0].segments.as_ref().unwrap();
        let old = before.layers[0].segments.as_ref().unwrap();
        assert_eq!(seg[..n], old[..n]);
        assert_ne!(seg[n..], old[n..]);
    }

    #[test]
    fn deterministic_given_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch: Vec<Sample> = (0..13)
            .map(|k| Sample {
                spikes: (0..6)
                    .map(|_| if rng.random_bool(0.1) { Dead } else { Fired(rng.random_range(0.0..20.0)) })
                    .collect(),
                label: k % 2,
                task: 0,
            })
            .collect();
        let run = || {
            let mut net = toy_net(5);
            let mut opt = AdamState::new(&net, AdamConfig::default());
            train_batch(&mut net, &mut opt, &batch).unwrap();
            net
        };
        assert_eq!(run(), run());
    }
}
