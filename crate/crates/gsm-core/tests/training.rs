//! Training-protocol behavior: smoke oracles, frozen-mask runs, metrics
//! counter invariants, and the winning-ticket bookkeeping guarantees.

mod common;

use gsm_core::data::config::{DatasetSpec, RunConfig, RunMode};
use gsm_core::data::synthetic::{digits_dataset, synthetic_dataset};
use gsm_core::data::Split;
use gsm_core::exp::{
    lottery_experiment, reactivation_ratio, train_base_from, train_gsm_from, Session, StepRule,
};
use gsm_core::nn::evaluate;
use gsm_core::nn::model::ModelSpec;
use gsm_core::nn::params::ParamSet;
use gsm_core::optim::{GsmConfig, LrStage};
use gsm_core::prune::layer_sensitivity;
use gsm_core::rng::{stream, StreamKind};
use gsm_core::tensor::Tensor;

fn mlp_cfg(q: usize, schedule: Vec<LrStage>, batch: usize) -> GsmConfig {
    GsmConfig { beta: 0.9, eta: 5e-4, lr_schedule: schedule, q, batch_size: batch }
}

#[test]
fn zero_epoch_schedule_returns_initialization_unchanged() {
    let model = ModelSpec::mlp([1, 1, 6], &[4, 2]).unwrap();
    let params = ParamSet::init(&model, &mut stream(3, StreamKind::Init, 0)).unwrap();
    let train = synthetic_dataset(1, 32, 2, 6, 3.0, Split::Train).unwrap();
    let test = synthetic_dataset(1, 16, 2, 6, 3.0, Split::Test).unwrap();
    let cfg = mlp_cfg(
        model.total_kernel_params(),
        vec![LrStage { epochs: 0, alpha: 0.1 }],
        8,
    );
    let out = train_base_from(&model, params.clone(), &cfg, 3, 10, &train, &test).unwrap();
    assert_eq!(out.params, params);
    assert_eq!(out.state.iteration, 0);
    assert!(out.metrics.is_empty());
}

#[test]
fn base_training_loss_strictly_decreases_over_first_five_evals() {
    let train = digits_dataset(2026, 2_560, Split::Train).unwrap();
    let test = digits_dataset(2026, 256, Split::Test).unwrap();
    let model = ModelSpec::mlp([1, 28, 28], &[32, 10]).unwrap();
    let params = ParamSet::init(&model, &mut stream(0, StreamKind::Init, 0)).unwrap();
    let cfg = mlp_cfg(
        model.total_kernel_params(),
        vec![LrStage { epochs: 5, alpha: 3e-2 }],
        128,
    );
    let out = train_base_from(&model, params, &cfg, 0, 20, &train, &test).unwrap();
    let losses: Vec<f64> = out.metrics.iter().take(5).map(|r| r.train_loss).collect();
    assert_eq!(losses.len(), 5);
    for pair in losses.windows(2) {
        assert!(pair[1] < pair[0], "loss not strictly decreasing: {losses:?}");
    }
}

#[test]
fn one_layer_model_separates_wide_clusters_within_200_steps() {
    let train = synthetic_dataset(8, 512, 2, 8, 3.0, Split::Train).unwrap();
    let model = ModelSpec::mlp([1, 1, 8], &[2]).unwrap();
    let params = ParamSet::init(&model, &mut stream(8, StreamKind::Init, 0)).unwrap();
    let cfg = mlp_cfg(
        model.total_kernel_params(),
        vec![LrStage { epochs: 13, alpha: 0.05 }],
        32,
    );
    let mut session =
        Session::new(model.clone(), params, cfg, StepRule::Baseline, 8, train.len()).unwrap();
    let total = session.total_iterations().min(200);
    session.run_until(&train, &train, 200, Some(total)).unwrap();
    let (train_acc, _) = evaluate(&model, &session.params, &train).unwrap();
    assert!(train_acc > 0.99, "train accuracy {train_acc}");
}

#[test]
fn metrics_counters_are_monotone() {
    let train = digits_dataset(5, 512, Split::Train).unwrap();
    let test = digits_dataset(5, 64, Split::Test).unwrap();
    let model = ModelSpec::mlp([1, 28, 28], &[16, 10]).unwrap();
    let params = ParamSet::init(&model, &mut stream(1, StreamKind::Init, 0)).unwrap();
    let cfg = GsmConfig {
        beta: 0.99,
        eta: 5e-4,
        lr_schedule: vec![
            LrStage { epochs: 2, alpha: 3e-2 },
            LrStage { epochs: 1, alpha: 3e-3 },
        ],
        q: model.total_kernel_params() / 4,
        batch_size: 64,
    };
    let out = train_gsm_from(&model, params, &cfg, true, 1, 5, &train, &test).unwrap();
    assert!(!out.metrics.is_empty());
    for pair in out.metrics.windows(2) {
        assert!(pair[1].iteration > pair[0].iteration);
        assert!(pair[1].epoch >= pair[0].epoch);
    }
    for row in &out.metrics {
        for frac in [
            row.orig_top1,
            row.pruned_top1,
            row.ratio_below_1e3,
            row.ratio_below_1e4,
            row.reactivation_ratio,
        ] {
            assert!((0.0..=1.0).contains(&frac), "fraction out of range: {row:?}");
        }
    }
}

#[test]
fn frozen_mask_runs_log_identically_zero_reactivation() {
    let train = digits_dataset(6, 512, Split::Train).unwrap();
    let test = digits_dataset(6, 64, Split::Test).unwrap();
    let model = ModelSpec::mlp([1, 28, 28], &[16, 10]).unwrap();
    let params = ParamSet::init(&model, &mut stream(2, StreamKind::Init, 0)).unwrap();
    let base = train_base_from(
        &model,
        params,
        &mlp_cfg(model.total_kernel_params(), vec![LrStage { epochs: 2, alpha: 3e-2 }], 64),
        2,
        1000,
        &train,
        &test,
    )
    .unwrap();
    let cfg = GsmConfig {
        beta: 0.99,
        eta: 5e-4,
        lr_schedule: vec![LrStage { epochs: 3, alpha: 3e-2 }],
        q: model.total_kernel_params() / 8,
        batch_size: 64,
    };
    let out = train_gsm_from(&model, base.params, &cfg, false, 2, 4, &train, &test).unwrap();
    assert!(out.metrics.len() > 3);
    for row in &out.metrics {
        assert_eq!(row.reactivation_ratio, 0.0, "{row:?}");
    }
}

#[test]
fn single_layer_pruning_accuracy_is_monotone_in_ratio() {
    let train = digits_dataset(2026, 2_560, Split::Train).unwrap();
    let test = digits_dataset(2026, 2_000, Split::Test).unwrap();
    let model = ModelSpec::mlp([1, 28, 28], &[64, 10]).unwrap();
    let params = ParamSet::init(&model, &mut stream(9, StreamKind::Init, 0)).unwrap();
    let cfg = mlp_cfg(
        model.total_kernel_params(),
        vec![LrStage { epochs: 6, alpha: 3e-2 }],
        128,
    );
    let base = train_base_from(&model, params, &cfg, 9, 100_000, &train, &test).unwrap();
    let ratios = [0.5, 0.9, 0.99, 0.997];
    let table = layer_sensitivity(&model, &base.params, &test, &ratios).unwrap();
    for (layer, row) in table.iter().enumerate() {
        for pair in row.windows(2) {
            assert!(
                pair[1] <= pair[0] + 0.005,
                "layer {layer}: accuracy rose with heavier pruning ({row:?})"
            );
        }
    }
}

#[test]
fn reactivation_ratio_matches_its_definition() {
    let prev = vec![Tensor::new(vec![4], vec![0.0, 1.0, 0.0, 1.0]).unwrap()];
    let same = prev.clone();
    assert_eq!(reactivation_ratio(&prev, &same).unwrap(), 0.0);
    let all_zero = vec![Tensor::zeros(vec![4])];
    let three_on = vec![Tensor::new(vec![4], vec![1.0, 1.0, 1.0, 0.0]).unwrap()];
    assert_eq!(reactivation_ratio(&all_zero, &three_on).unwrap(), 0.75);
    let shorter = vec![Tensor::zeros(vec![3])];
    assert!(reactivation_ratio(&prev, &shorter).is_err());
}

#[test]
fn lottery_bookkeeping_holds_on_a_small_run() {
    let run = RunConfig {
        mode: RunMode::Lottery,
        model: "mlp(1x28x28,24,10)".into(),
        dataset: DatasetSpec::Digits { train_n: 1024, test_n: 128, data_seed: 2026 },
        seed: 13,
        beta: 0.99,
        eta: 5e-4,
        lr_schedule: vec![LrStage { epochs: 3, alpha: 3e-2 }],
        gsm_lr_schedule: Some(vec![LrStage { epochs: 4, alpha: 3e-2 }]),
        batch_size: 64,
        q: None,
        compression: Some(8.0),
        eval_interval: 100,
        out_dir: None,
        init_checkpoint: None,
    };
    let (train, test) = run.load_data().unwrap();
    let out = lottery_experiment(&run, &train, &test).unwrap();

    let model = run.model_spec().unwrap();
    let expect_q = model.total_kernel_params() / 8;
    assert_eq!(out.q, expect_q);

    // Ticket support sizes are exactly Q for both methods.
    for masks in [&out.magnitude_masks, &out.gsm_masks] {
        let ones: usize = masks
            .iter()
            .map(|m| m.iter().filter(|&&v| v == 1.0).count())
            .sum();
        assert_eq!(ones, expect_q);
    }

    // Reset correctness: surviving entries equal their initialization values
    // bitwise; pruned-away entries are exactly zero.
    for (ki, mask) in out.gsm_masks.iter().enumerate() {
        for ((&m, &init), &ticket) in mask
            .iter()
            .zip(out.theta0.kernels[ki].iter())
            .zip(out.gsm_ticket_init.kernels[ki].iter())
        {
            if m == 1.0 {
                assert_eq!(ticket.to_bits(), init.to_bits());
            } else {
                assert_eq!(ticket, 0.0);
            }
        }
    }

    // Pinned-zero property: after ticket training, non-ticket entries are
    // still exactly zero.
    for (ki, mask) in out.magnitude_masks.iter().enumerate() {
        for (&m, &w) in mask.iter().zip(out.magnitude_final.kernels[ki].iter()) {
            if m == 0.0 {
                assert_eq!(w, 0.0);
            }
        }
    }
    for (ki, mask) in out.gsm_masks.iter().enumerate() {
        for (&m, &w) in mask.iter().zip(out.gsm_final.kernels[ki].iter()) {
            if m == 0.0 {
                assert_eq!(w, 0.0);
            }
        }
    }

    assert!((0.0..=1.0).contains(&out.magnitude_top1));
    assert!((0.0..=1.0).contains(&out.gsm_top1));
}
