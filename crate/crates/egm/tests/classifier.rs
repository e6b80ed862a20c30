mod common;

use common::{digit, digit_set};
use egm::classifier::{build_model_bank, classify, evaluate_multi, ModelBank};
use egm::graph::GridSpec;
use egm::matcher::{match_image, CostParams};
use egm::mnist::{LabelledSet, SetSource};
use egm::GaborParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bank(models: &LabelledSet, n_x: usize) -> ModelBank {
    build_model_bank(models, &GaborParams::default(), &GridSpec::standard(n_x).unwrap(), true).unwrap()
}

fn lambda() -> CostParams {
    CostParams::new(3e-9).unwrap()
}

#[test]
fn bank_member_wins_with_full_similarity() {
    let models = digit_set(2, 11, 100, SetSource::Model);
    let bank = bank(&models, 10);
    for k in [0, 5, 13, 19] {
        let c = classify(&models.images[k], &bank, lambda()).unwrap();
        assert_eq!(c.predicted, models.labels[k]);
        assert_eq!(c.best_model_id, models.ids[k]);
        assert!((c.best_cost + 100.0).abs() < 1e-9, "cost {}", c.best_cost);
    }
}

#[test]
fn single_class_bank_always_predicts_that_class() {
    let all = digit_set(3, 12, 0, SetSource::Model);
    let sevens: Vec<usize> = (0..all.len()).filter(|&k| all.labels[k] == 7).collect();
    let models = LabelledSet {
        images: sevens.iter().map(|&k| all.images[k].clone()).collect(),
        labels: vec![7; sevens.len()],
        ids: sevens.clone(),
        source: SetSource::Model,
    };
    let bank = bank(&models, 5);
    let tests = digit_set(1, 13, 0, SetSource::Test);
    let eval = evaluate_multi(&tests, &bank, &[lambda()], false).unwrap().remove(0);
    assert!(eval.outcomes.iter().all(|o| o.classification.predicted == 7));
    for o in &eval.outcomes {
        let c = &o.classification;
        assert!(c.runner_up_cost.is_infinite());
        assert!(c.per_class_best.iter().enumerate().all(|(k, v)| (k == 7) != v.is_infinite()));
    }
}

#[test]
fn classification_equals_brute_force_argmin() {
    let models = digit_set(1, 14, 0, SetSource::Model);
    let tests = digit_set(1, 15, 0, SetSource::Test);
    let gabor = GaborParams::default();
    let grid = GridSpec::standard(10).unwrap();
    let bank = bank(&models, 10);
    for lam in [3e-9, 3e-3, 0.3] {
        let params = CostParams::new(lam).unwrap();
        let eval = evaluate_multi(&tests, &bank, &[params], false).unwrap().remove(0);
        for (k, test) in tests.images.iter().enumerate() {
            let costs: Vec<f64> = bank
                .entries
                .iter()
                .map(|e| match_image(test, &e.graph, &gabor, &grid, params, true).unwrap().total_cost)
                .collect();
            let (best, &cost) = costs
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            let got = &eval.outcomes[k].classification;
            assert_eq!(got.best_cost, cost);
            assert_eq!(got.predicted, bank.entries[best].class);
            assert_eq!(got.best_model_id, bank.entries[best].model_id);
            for c in 0..10 {
                let class_best = (0..costs.len())
                    .filter(|&m| bank.entries[m].class == c as u8)
                    .map(|m| costs[m])
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(got.per_class_best[c], class_best);
            }
        }
    }
}

#[test]
fn bank_order_does_not_matter() {
    let models = digit_set(2, 16, 0, SetSource::Model);
    let tests = digit_set(1, 17, 0, SetSource::Test);
    let forward = bank(&models, 5);
    let mut order: Vec<usize> = (0..models.len()).collect();
    order.reverse();
    order.swap(3, 11);
    let shuffled = LabelledSet {
        images: order.iter().map(|&k| models.images[k].clone()).collect(),
        labels: order.iter().map(|&k| models.labels[k]).collect(),
        ids: order.iter().map(|&k| models.ids[k]).collect(),
        source: SetSource::Model,
    };
    let backward = bank(&shuffled, 5);
    let a = evaluate_multi(&tests, &forward, &[lambda()], false).unwrap();
    let b = evaluate_multi(&tests, &backward, &[lambda()], false).unwrap();
    assert_eq!(a, b);
}

#[test]
fn duplicate_models_tie_to_the_lower_id() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let img = digit(4, &mut rng);
    let models = LabelledSet {
        images: vec![img.clone(), img.clone(), img.clone()],
        labels: vec![4, 4, 2],
        ids: vec![50, 7, 3],
        source: SetSource::Model,
    };
    let c = classify(&img, &bank(&models, 10), lambda()).unwrap();
    // class 2 reaches the same cost and is the lower class index
    assert_eq!(c.predicted, 2);
    assert_eq!(c.best_model_id, 3);
    assert_eq!(c.runner_up_cost, c.best_cost);
    let models = LabelledSet {
        labels: vec![4, 4, 9],
        ..models
    };
    let c = classify(&img, &bank(&models, 10), lambda()).unwrap();
    assert_eq!((c.predicted, c.best_model_id), (4, 7));
}

#[test]
fn intensity_scale_leaves_results_unchanged() {
    let models = digit_set(1, 19, 0, SetSource::Model);
    let bank = bank(&models, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for class in 0..10 {
        let img = digit(class, &mut rng);
        let a = classify(&img, &bank, lambda()).unwrap();
        let b = classify(&img.scaled(0.37), &bank, lambda()).unwrap();
        assert_eq!(a.predicted, b.predicted);
        assert_eq!(a.best_model_id, b.best_model_id);
        assert!((a.best_cost - b.best_cost).abs() < 1e-9);
    }
}

#[test]
fn evaluation_totals_and_self_recognition() {
    let models = digit_set(2, 21, 0, SetSource::Model);
    let bank = bank(&models, 5);
    let lams = [lambda(), CostParams::new(3e-3).unwrap()];
    let evals = evaluate_multi(&models, &bank, &lams, false).unwrap();
    for e in &evals {
        assert_eq!(e.accuracy(), 1.0);
        assert_eq!(e.per_class_accuracy(), [Some(1.0); 10]);
    }

    let tests = digit_set(3, 22, 0, SetSource::Test);
    let serial = evaluate_multi(&tests, &bank, &lams, false).unwrap();
    let parallel = evaluate_multi(&tests, &bank, &lams, true).unwrap();
    assert_eq!(serial, parallel);
    for e in &serial {
        assert_eq!(e.total(), 30);
        for row in &e.confusion {
            assert_eq!(row.iter().sum::<usize>(), 3);
        }
        assert_eq!(e.correct(), (0..10).map(|c| e.confusion[c][c]).sum::<usize>());
        assert!(e.accuracy() >= 0.5, "synthetic digits should mostly match, got {}", e.accuracy());
    }
}

#[test]
fn empty_bank_is_rejected() {
    let models = digit_set(1, 23, 0, SetSource::Model);
    let mut b = bank(&models, 5);
    b.entries.clear();
    assert!(classify(&models.images[0], &b, lambda()).is_err());
    assert!(evaluate_multi(&models, &b, &[lambda()], false).is_err());
}
