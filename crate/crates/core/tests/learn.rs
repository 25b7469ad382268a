use herdpipe_core::learn::{
    adam_step, class_counts, class_weights, clip_loss, clip_zero_shot, predict, stratified_split, train, weighted_cross_entropy,
    AdamConfig, AdamState, BiLstm, BiLstmConfig, Classifier, Dataset, Dropout, Mlp, MlpConfig, TrainConfig, DEFAULT_RATIOS,
};
use herdpipe_core::Error;
use herdpipe_testkit::gradient::{central_differences, max_relative_error};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;
const SHAPES: u64 = 20;

fn normal2(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Array2<f64> {
    let n = Normal::new(0.0, scale).unwrap();
    Array2::from_shape_fn((r, c), |_| n.sample(rng))
}

fn targets_weights(rng: &mut ChaCha8Rng, b: usize, c: usize) -> (Vec<usize>, Vec<f64>) {
    let t = (0..b).map(|_| rng.random_range(0..c)).collect();
    let w = (0..c).map(|_| rng.random_range(0.1..1.0)).collect();
    (t, w)
}

fn model_error<M: Classifier>(
    model: &M,
    x: &M::Input,
    targets: &[usize],
    weights: &[f64],
    rng: &mut ChaCha8Rng,
    rebuild: impl Fn(Vec<f64>) -> M,
) -> f64 {
    let (_, cache) = model.forward(x, Dropout::Sample(rng)).unwrap();
    let masks = M::dropout_masks(&cache);
    let (logits, cache) = model.forward(x, Dropout::Fixed(&masks)).unwrap();
    let (_, dlogits) = weighted_cross_entropy(logits.view(), targets, weights).unwrap();
    let analytic = model.backward(&cache, &dlogits);
    let coords: Vec<usize> = (0..analytic.len()).collect();
    let loss = |p: &[f64]| {
        let m = rebuild(p.to_vec());
        let (l, _) = m.forward(x, Dropout::Fixed(&masks)).unwrap();
        weighted_cross_entropy(l.view(), targets, weights).unwrap().0
    };
    let numeric = central_differences(loss, model.params(), &coords, H);
    max_relative_error(&analytic, &numeric, FLOOR)
}

#[test]
fn cross_entropy_gradient() {
    for seed in 0..SHAPES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, c) = (rng.random_range(1..9), rng.random_range(2..10));
        let logits = normal2(&mut rng, b, c, 2.0);
        let (t, w) = targets_weights(&mut rng, b, c);
        let (_, grad) = weighted_cross_entropy(logits.view(), &t, &w).unwrap();
        let x: Vec<f64> = logits.iter().copied().collect();
        let coords: Vec<usize> = (0..x.len()).collect();
        let numeric = central_differences(
            |p| {
                let l = Array2::from_shape_vec((b, c), p.to_vec()).unwrap();
                weighted_cross_entropy(l.view(), &t, &w).unwrap().0
            },
            &x,
            &coords,
            H,
        );
        let analytic: Vec<f64> = grad.iter().copied().collect();
        let err = max_relative_error(&analytic, &numeric, FLOOR);
        assert!(err <= TOL, "shape {b}x{c}: {err}");
    }
}

#[test]
fn mlp_gradient() {
    for seed in 0..SHAPES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (b, d, c) = (rng.random_range(1..7), rng.random_range(1..9), rng.random_range(2..6));
        let cfg = MlpConfig { hidden: [rng.random_range(2..12), rng.random_range(2..10)], dropout: 0.5 };
        let model = Mlp::new(d, c, cfg, &mut rng);
        let x = normal2(&mut rng, b, d, 1.0);
        let (t, w) = targets_weights(&mut rng, b, c);
        let err = model_error(&model, &x, &t, &w, &mut rng, |p| Mlp::from_params(d, c, cfg, p).unwrap());
        assert!(err <= TOL, "seed {seed}: {err}");
    }
}

#[test]
fn bilstm_gradient() {
    for seed in 0..SHAPES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (b, t_len, d, c) = (rng.random_range(1..4), rng.random_range(1..7), rng.random_range(1..9), rng.random_range(2..5));
        let cfg = BiLstmConfig { hidden: rng.random_range(1..6), head: rng.random_range(1..6), dropout: 0.3 };
        let model = BiLstm::new(d, c, cfg, &mut rng);
        let n = Normal::new(0.0, 1.0).unwrap();
        let x = Array3::from_shape_fn((b, t_len, d), |_| n.sample(&mut rng));
        let (t, w) = targets_weights(&mut rng, b, c);
        let err = model_error(&model, &x, &t, &w, &mut rng, |p| BiLstm::from_params(d, c, cfg, p).unwrap());
        assert!(err <= TOL, "seed {seed}: {err}");
    }
}

#[test]
fn bilstm_gradient_reaches_first_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = BiLstm::new(8, 3, BiLstmConfig { hidden: 4, head: 4, dropout: 0.3 }, &mut rng);
    let x = Array3::from_shape_fn((2, 5, 8), |_| rng.random_range(-1.0..1.0));
    let (logits, _) = model.forward(&x, Dropout::Off).unwrap();
    let mut shifted = x.clone();
    shifted[[0, 0, 0]] += 0.5;
    let (moved, _) = model.forward(&shifted, Dropout::Off).unwrap();
    assert!((&moved - &logits).row(0).iter().any(|v| v.abs() > 1e-9));
    assert_eq!((&moved - &logits).row(1).iter().map(|v| v.abs()).sum::<f64>(), 0.0);
}

#[test]
fn clip_gradient() {
    for seed in 0..SHAPES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let (n, d) = (rng.random_range(1..7), rng.random_range(2..9));
        let tau = rng.random_range(0.5..10.0);
        let images = normal2(&mut rng, n, d, 1.0);
        let texts = normal2(&mut rng, n, d, 1.0);
        let r = clip_loss(images.view(), texts.view(), tau).unwrap();
        let x: Vec<f64> = images.iter().chain(texts.iter()).copied().collect();
        let coords: Vec<usize> = (0..x.len()).collect();
        let numeric = central_differences(
            |p| {
                let i = Array2::from_shape_vec((n, d), p[..n * d].to_vec()).unwrap();
                let t = Array2::from_shape_vec((n, d), p[n * d..].to_vec()).unwrap();
                clip_loss(i.view(), t.view(), tau).unwrap().loss
            },
            &x,
            &coords,
            H,
        );
        let analytic: Vec<f64> = r.grad_images.iter().chain(r.grad_texts.iter()).copied().collect();
        let err = max_relative_error(&analytic, &numeric, FLOOR);
        assert!(err <= TOL, "seed {seed}: {err}");
    }
}

#[test]
fn arithmetic_fixtures() {
    assert_eq!(class_weights(&[1, 1, 2]).unwrap(), vec![0.4, 0.4, 0.2]);
    assert!(matches!(class_weights(&[3, 0]), Err(Error::InvalidClass(_))));

    let mut theta = [1.0];
    let mut state = AdamState::new(1);
    adam_step(&mut theta, &[2.0], &mut state, &AdamConfig { weight_decay: 0.0, ..AdamConfig::default() }).unwrap();
    assert!((theta[0] - 0.999).abs() < 1e-10);

    let eye = ndarray::array![[1.0, 0.0], [0.0, 1.0]];
    assert!((clip_loss(eye.view(), eye.view(), 1.0).unwrap().loss - 0.3133).abs() < 1e-4);
    let texts = ndarray::array![[1.0, 0.0], [0.2, 0.9], [0.9, 0.9]];
    assert_eq!(clip_zero_shot(ndarray::array![0.2, 0.9].view(), texts.view()).unwrap(), 1);
}

#[test]
fn large_split_matches_reported_support() {
    let counts = [3168, 3187, 5475, 638, 327, 15256, 90, 126, 431];
    let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    assert_eq!(labels.len(), 28_698);
    let split = stratified_split(&labels, DEFAULT_RATIOS, 42).unwrap();
    assert!(split.test.len().abs_diff(4305) <= 1, "{}", split.test.len());
    let mut all: Vec<usize> = split.parts().concat();
    all.sort_unstable();
    assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    let train_labels: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    for (c, (&got, &n)) in class_counts(&train_labels, 9).iter().zip(&counts).enumerate() {
        assert!((got as f64 - 0.7 * n as f64).abs() <= 1.0, "class {c}: {got} of {n}");
    }
    assert_eq!(stratified_split(&labels, DEFAULT_RATIOS, 42).unwrap(), split);
}

#[test]
fn tiny_class_cannot_be_stratified() {
    assert!(
        matches!(stratified_split(&[0, 0, 0, 1, 1], DEFAULT_RATIOS, 0), Err(Error::Stratification { ref class, .. }) if class == "1")
    );
}

fn blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let noise = Normal::new(0.0, 0.3).unwrap();
    let x = Array2::from_shape_fn((n, 6), |(i, j)| noise.sample(&mut rng) + if j == labels[i] { 3.0 } else { 0.0 });
    (x, labels)
}

fn small_mlp(d: usize, c: usize, seed: u64) -> Mlp {
    Mlp::new(d, c, MlpConfig { hidden: [32, 16], dropout: 0.5 }, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn separable_data_is_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let y: Vec<usize> = (0..200).map(|i| i % 2).collect();
    let x = Array2::from_shape_fn((200, 32), |(i, j)| {
        noise.sample(&mut rng) + if j < 4 { 3.0 * (y[i] as f64 * 2.0 - 1.0) } else { 0.0 }
    });
    let data = Dataset::new(x, y).unwrap();
    let model = Mlp::new(32, 2, MlpConfig::default(), &mut ChaCha8Rng::seed_from_u64(2));
    let out = train(model, &data, &data, &[0.5, 0.5], &TrainConfig { seed: 3, ..TrainConfig::default() }).unwrap();
    assert!(out.history.len() <= 50);
    assert_eq!(predict(&out.model, &data.inputs).unwrap(), data.labels);
}

#[test]
fn training_is_deterministic() {
    let (x, y) = blobs(200, 4);
    let data = Dataset::new(x, y).unwrap();
    let cfg = TrainConfig { max_epochs: 5, seed: 11, ..TrainConfig::default() };
    let a = train(small_mlp(6, 3, 1), &data, &data, &[1.0 / 3.0; 3], &cfg).unwrap();
    let b = train(small_mlp(6, 3, 1), &data, &data, &[1.0 / 3.0; 3], &cfg).unwrap();
    assert_eq!(a.model.params(), b.model.params());
    assert_eq!(a.history, b.history);
}

#[test]
fn patience_stops_on_worsening_validation() {
    let (x, y) = blobs(120, 5);
    let flipped: Vec<usize> = y.iter().map(|l| (l + 1) % 3).collect();
    let train_set = Dataset::new(x.clone(), y).unwrap();
    let val_set = Dataset::new(x, flipped).unwrap();
    let cfg = TrainConfig { learning_rate: 1e-2, seed: 6, ..TrainConfig::default() };
    let out = train(small_mlp(6, 3, 7), &train_set, &val_set, &[1.0 / 3.0; 3], &cfg).unwrap();
    let val: Vec<f64> = out.history.iter().map(|e| e.val_loss).collect();
    assert!(val.windows(2).all(|w| w[1] > w[0]), "{val:?}");
    assert_eq!(out.history.len(), 11);
    assert_eq!(out.best_epoch, 1);
    assert!(out.stopped_early);
    let one = train(small_mlp(6, 3, 7), &train_set, &val_set, &[1.0 / 3.0; 3], &TrainConfig { max_epochs: 1, ..cfg }).unwrap();
    assert_eq!(out.model.params(), one.model.params());
}

#[test]
fn diverging_training_reports_error() {
    let (mut x, y) = blobs(30, 8);
    x[[0, 0]] = f64::NAN;
    let data = Dataset::new(x, y).unwrap();
    let r = train(small_mlp(6, 3, 1), &data, &data, &[1.0 / 3.0; 3], &TrainConfig::default());
    assert!(matches!(r, Err(Error::Divergence(_))), "{r:?}");
}

#[test]
fn mismatched_dataset_is_rejected() {
    assert!(Dataset::new(Array2::<f64>::zeros((3, 2)), vec![0, 1]).is_err());
}
