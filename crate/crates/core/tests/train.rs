use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvsvm::data::{make_two_moons, Dataset};
use tvsvm::svm::ModelFile;
use tvsvm::train::{init_model, lr_update, InitMethod, TrainError};
use tvsvm::{train, Classifier, KernelSpec, Matrix, TrainConfig};

fn quick_config() -> TrainConfig {
    TrainConfig {
        epochs: 15,
        n_svs: 6,
        batch_size: 20,
        lr0: 0.001,
        c: 3.0,
        kernels: vec![KernelSpec::Gaussian { beta: 4.0 }, KernelSpec::Linear],
        ..TrainConfig::default()
    }
}

fn json(model: &Classifier) -> String {
    ModelFile { classifier: model.clone(), normalizer: None }.to_json().unwrap()
}

#[test]
fn same_seed_same_model() {
    let data = make_two_moons(80, 0.2, 3).unwrap();
    let a = train(&data, None, &quick_config()).unwrap();
    let b = train(&data, None, &quick_config()).unwrap();
    assert_eq!(json(&a.model), json(&b.model));
    assert_eq!(a.epochs, b.epochs);
    let c = train(&data, None, &TrainConfig { seed: 1, ..quick_config() }).unwrap();
    assert_ne!(json(&a.model), json(&c.model));
}

#[test]
fn linearly_separable_set_is_learned_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    while rows.len() < 60 {
        let p: [f64; 2] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let margin = p[0] + 0.5 * p[1] - 0.1;
        if margin.abs() < 0.2 {
            continue;
        }
        rows.push(p.to_vec());
        y.push(if margin > 0.0 { 1 } else { -1 });
    }
    let data = Dataset::new(Matrix::from_rows(&rows).unwrap(), y, None).unwrap();
    let config = TrainConfig {
        kernels: vec![KernelSpec::Linear],
        mkl_layers: vec![],
        epochs: 200,
        batch_size: 60,
        lr0: 0.01,
        c: 10.0,
        ..TrainConfig::default()
    };
    let report = train(&data, None, &config).unwrap();
    assert!(!report.diverged);
    assert_eq!(report.model.accuracy(&data.x, &data.y).unwrap(), 1.0);
}

#[test]
fn frozen_support_vectors_do_not_move() {
    let data = make_two_moons(60, 0.2, 4).unwrap();
    let config = TrainConfig { freeze_svs: true, ..quick_config() };
    let start = init_model(&data, &config).unwrap();
    let report = train(&data, None, &config).unwrap();
    assert_eq!(start.machine().support, report.model.machine().support);
    let learned = train(&data, None, &quick_config()).unwrap();
    assert_ne!(start.machine().support, learned.model.machine().support);
}

#[test]
fn multiclass_labels_give_one_head_per_class() {
    let data = make_two_moons(60, 0.1, 2).unwrap();
    let y: Vec<i64> = data.y.iter().enumerate().map(|(i, &l)| if l > 0 { 2 } else { (i % 2) as i64 * 5 }).collect();
    let data = Dataset::new(data.x, y, None).unwrap();
    let report = train(&data, None, &quick_config()).unwrap();
    assert_eq!(report.model.classes(), vec![0, 2, 5]);
    assert!(matches!(report.model, Classifier::Multiclass(_)));
}

#[test]
fn every_init_method_respects_shapes() {
    let data = make_two_moons(50, 0.2, 8).unwrap();
    for init in [InitMethod::SubsampleJitter, InitMethod::KMeans, InitMethod::UniformRandom] {
        let model = init_model(&data, &TrainConfig { init, ..quick_config() }).unwrap();
        assert_eq!(model.machine().support.rows(), 6);
        assert_eq!(model.machine().support.cols(), 2);
        assert!(model.machine().support.all_finite());
    }
}

#[test]
fn histogram_support_vectors_stay_in_unit_box() {
    let data = make_two_moons(60, 0.2, 6).unwrap();
    let (data, _) = tvsvm::data::normalize(&data, tvsvm::data::NormalizeMode::MinMaxPerDim).unwrap();
    let config = TrainConfig {
        kernels: vec![KernelSpec::HistogramIntersection { hi_beta: 100.0 }, KernelSpec::Linear],
        lr0: 0.05,
        ..quick_config()
    };
    let report = train(&data, None, &config).unwrap();
    assert!(report.model.machine().support.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn report_csv_has_one_row_per_epoch() {
    let data = make_two_moons(40, 0.2, 1).unwrap();
    let report = train(&data, Some(&data), &quick_config()).unwrap();
    let mut out = Vec::new();
    report.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,J_total,J_reg,J_loss,lr,train_acc,val_acc");
    assert_eq!(lines.len(), 1 + report.epochs.len());
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7 && !l.ends_with(',')));
}

#[test]
fn bad_configs_are_rejected() {
    let data = make_two_moons(20, 0.2, 1).unwrap();
    for config in [
        TrainConfig { c: 0.0, ..quick_config() },
        TrainConfig { n_svs: 0, ..quick_config() },
        TrainConfig { lr0: 2.0, ..quick_config() },
        TrainConfig { mkl_layers: vec![4, 2], ..quick_config() },
        TrainConfig { mkl_layers: vec![], ..quick_config() },
    ] {
        assert!(matches!(train(&data, None, &config), Err(TrainError::Config(_) | TrainError::Net(_))));
    }
}

proptest! {
    #[test]
    fn lr_rule_stays_in_bounds(lr in 1e-6..1.0f64, hist in prop::collection::vec(-1e3..1e3f64, 0..6), decay in 0.5..0.999f64) {
        let next = lr_update(lr, &hist, decay, 1e-6, 1.0);
        prop_assert!((1e-6..=1.0).contains(&next));
        if hist.len() < 3 {
            prop_assert_eq!(next, lr);
        } else {
            let shrink = (lr * decay).clamp(1e-6, 1.0);
            let grow = (lr / decay).clamp(1e-6, 1.0);
            prop_assert!(next == shrink || next == grow);
        }
    }
}
