mod common;

use ttfs_dendrites::data::build_split_mnist;
use ttfs_dendrites::harness::{run_experiment, summarize, ExperimentMode, ExperimentSpec};

fn spec(mode: ExperimentMode, epochs: usize) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(mode);
    s.hidden = Some(vec![24, 16]);
    s.seeds = vec![0];
    s.epochs_per_task = epochs;
    s.batch_size = 8;
    s
}

fn stream() -> ttfs_dendrites::data::TaskStream {
    let (train, test) = common::synthetic_digits(30, 40);
    build_split_mnist(train, test, 0).unwrap()
}

#[test]
fn untrained_network_is_at_chance() {
    let data = stream();
    for mode in ExperimentMode::ALL {
        let trace = run_experiment(&spec(mode, 0), &data, 0).unwrap();
        assert!(trace.accuracy.is_empty());
        let mean = trace.final_average();
        assert!((0.35..=0.65).contains(&mean), "{mode}: {mean}");
    }
}

#[test]
fn trace_has_one_row_per_epoch_for_every_mode() {
    let data = stream();
    for mode in ExperimentMode::ALL {
        let trace = run_experiment(&spec(mode, 2), &data, 3).unwrap();
        assert_eq!(trace.accuracy.len(), 10);
        assert!(trace.accuracy.iter().flatten().all(|a| (0.0..=1.0).contains(a)));
        assert_eq!(trace.final_accuracy, *trace.accuracy.last().unwrap());
    }
}

#[test]
fn sequential_training_learns_the_first_task() {
    let data = stream();
    let mut s = spec(ExperimentMode::SequentialWithDendrites, 4);
    s.hidden = Some(vec![64, 64]);
    s.adam.lr = 3e-3;
    let trace = run_experiment(&s, &data, 1).unwrap();
    let own: Vec<f64> = (0..5).map(|t| trace.after_own_training(t).unwrap()).collect();
    assert!(own[0] >= 0.9, "{own:?}");
}

#[test]
fn runs_are_reproducible_and_summaries_agree() {
    let data = stream();
    let s = spec(ExperimentMode::SequentialNoDendrites, 1);
    let a = run_experiment(&s, &data, 5).unwrap();
    let b = run_experiment(&s, &data, 5).unwrap();
    assert_eq!(a, b);
    let summary = summarize(&[a.clone(), b]).unwrap();
    assert_eq!(summary.std_final_accuracy, 0.0);
    assert_eq!(summary.mean_final_accuracy, a.final_average());
}
