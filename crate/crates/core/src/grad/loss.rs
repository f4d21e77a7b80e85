use crate::config::NetworkConfig;
use crate::model::SpikeRecord;

/// Spike-time cross-entropy: logits are `-t_k / T_max` (dead outputs count
/// as `T_max`), so an earlier spike means a higher class probability.
///
/// Returns the loss and `dL/dt_k` for every output neuron.
pub fn loss_and_output_grad(outputs: &[SpikeRecord], label: usize, cfg: &NetworkConfig) -> (f64, Vec<f64>) {
    assert!(label < outputs.len(), "label {label} out of range for {} outputs", outputs.len());
    let t_max = cfg.t_max;
    let logits: Vec<f64> = outputs.iter().map(|r| -r.time_or(t_max) / t_max).collect();
    let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - peak).exp()).collect();
    let total: f64 = exps.iter().sum();

    let loss = -(logits[label] - peak - total.ln());
    let grad = exps
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let target = if k == label { 1.0 } else { 0.0 };
            (e / total - target) * (-1.0 / t_max)
        })
        .collect();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SpikeRecord::{Dead, Fired};

    fn cfg() -> NetworkConfig {
        NetworkConfig::new(vec![2, 2])
    }

    #[test]
    fn symmetric_outputs_give_ln2() {
        let (loss, _) = loss_and_output_grad(&[Fired(100.0), Fired(100.0)], 0, &cfg());
        assert!((loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn earliest_vs_latest() {
        let (loss, _) = loss_and_output_grad(&[Fired(0.0), Fired(450.0)], 0, &cfg());
        let p0 = 1.0 / (1.0 + (-1f64).exp());
        assert!((p0 - 0.7311).abs() < 1e-4);
        assert!((loss - 0.3133).abs() < 1e-4);
        assert!((loss + p0.ln()).abs() < 1e-12);
    }

    #[test]
    fn dead_output_counts_as_window_end() {
        let a = loss_and_output_grad(&[Fired(10.0), Dead], 1, &cfg());
        let b = loss_and_output_grad(&[Fired(10.0), Fired(450.0)], 1, &cfg());
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let c = cfg();
        let h = 1e-4;
        for (t, label) in [([12.5, 300.0], 0), ([250.0, 40.0], 0), ([3.0, 3.5], 1)] {
            let (_, grad) = loss_and_output_grad(&[Fired(t[0]), Fired(t[1])], label, &c);
            for k in 0..2 {
                let mut up = t;
                let mut down = t;
                up[k] += h;
                down[k] -= h;
                let lu = loss_and_output_grad(&[Fired(up[0]), Fired(up[1])], label, &c).0;
                let ld = loss_and_output_grad(&[Fired(down[0]), Fired(down[1])], label, &c).0;
                let numeric = (lu - ld) / (2.0 * h);
                let rel = (numeric - grad[k]).abs() / grad[k].abs().max(numeric.abs());
                assert!(rel < 1e-6, "k={k} analytic={} numeric={numeric}", grad[k]);
            }
        }
    }

    #[test]
    fn loss_is_shift_invariant() {
        let c = cfg();
        let a = loss_and_output_grad(&[Fired(20.0), Fired(70.0)], 1, &c).0;
        let b = loss_and_output_grad(&[Fired(120.0), Fired(170.0)], 1, &c).0;
        assert!((a - b).abs() < 1e-12);
    }
}
