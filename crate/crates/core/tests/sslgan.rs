use cesslgan_core::coevo::{initial_discriminator, initial_generator};
use cesslgan_core::data::{make_ring, split_ssl, RingParams, SslDataset};
use cesslgan_core::metrics::MetricsConfig;
use cesslgan_core::nn::{Activation, AdamConfig, Architecture, Dense, DiscriminatorNet, GeneratorNet};
use cesslgan_core::sslgan::{
    discriminator_gradients, draw_eval_batches, evaluate_on, evaluate_pair, generator_gradients, run_sslgan, train_pair, DiscriminatorTerms, TrainBudget,
};
use cesslgan_core::{Matrix, RngStream};

fn ring(seed: u64, train_n: usize) -> SslDataset {
    let params = RingParams {
        train_n,
        test_n: 100,
        ..RingParams::default()
    };
    split_ssl(make_ring(seed, &params).unwrap().1, 1, seed).unwrap()
}

fn budget(epochs: usize) -> TrainBudget {
    TrainBudget { epochs, batch_size: 100 }
}

fn zero_dense(inputs: usize, outputs: usize, activation: Activation) -> Dense {
    Dense::from_weights(Matrix::zeros(inputs, outputs), vec![0.0; outputs], activation)
}

#[test]
fn zero_epochs_is_rejected() {
    let arch = Architecture::default();
    let data = ring(1, 200);
    let r = train_pair(
        initial_generator(&arch, 1, 0),
        initial_discriminator(&arch, 1, 0),
        &data,
        &budget(0),
        &AdamConfig::default(),
        &mut RngStream::new(1, 0),
    );
    assert!(r.is_err());
}

#[test]
fn trace_has_one_record_per_epoch() {
    let arch = Architecture::default();
    let data = ring(2, 300);
    for t in [1, 2, 5] {
        let (_, _, trace) = train_pair(
            initial_generator(&arch, 2, 0),
            initial_discriminator(&arch, 2, 0),
            &data,
            &budget(t),
            &AdamConfig::default(),
            &mut RngStream::new(2, 0),
        )
        .unwrap();
        assert_eq!(trace.len(), t);
        assert!(trace.iter().all(|r| r.is_finite()));
    }
}

#[test]
fn one_epoch_lowers_discriminator_loss() {
    let arch = Architecture::default();
    let mut improved = 0;
    for seed in 1..=30u64 {
        let data = ring(seed, 1000);
        let g = initial_generator(&arch, seed, 0);
        let d = initial_discriminator(&arch, seed, 0);
        let batches = draw_eval_batches(&data, 4, 100, arch.latent_dim, &mut RngStream::new(seed, 99)).unwrap();
        let before = evaluate_on(&g, &d, &batches).unwrap().l_d_total;
        let (g, d, _) = train_pair(g, d, &data, &budget(1), &AdamConfig::default(), &mut RngStream::new(seed, 1))
            .unwrap();
        let after = evaluate_on(&g, &d, &batches).unwrap().l_d_total;
        if after < before {
            improved += 1;
        }
    }
    assert!(improved >= 28, "{improved}/30");
}

#[test]
fn evaluation_is_deterministic_and_pure() {
    let arch = Architecture::default();
    let data = ring(3, 400);
    let g = initial_generator(&arch, 3, 0);
    let d = initial_discriminator(&arch, 3, 0);
    let (g0, d0) = (g.clone(), d.clone());
    let rng = RngStream::new(3, 4);
    let a = evaluate_pair(&g, &d, &data, 3, 100, &mut rng.clone()).unwrap();
    let b = evaluate_pair(&g, &d, &data, 3, 100, &mut rng.clone()).unwrap();
    assert_eq!(a, b);
    assert_eq!(g, g0);
    assert_eq!(d, d0);
    assert!(evaluate_pair(&g, &d, &data, 0, 100, &mut rng.clone()).is_err());
}

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[test]
fn more_evaluation_batches_reduce_variance() {
    let arch = Architecture::default();
    let data = ring(4, 1000);
    let g = initial_generator(&arch, 4, 0);
    let d = initial_discriminator(&arch, 4, 0);
    let all = data.unlabeled.len().div_ceil(100);
    let run = |n| -> Vec<f64> {
        (0..30u64)
            .map(|s| evaluate_pair(&g, &d, &data, n, 100, &mut RngStream::new(s, 7)).unwrap().l_d_total)
            .collect()
    };
    assert!(variance(&run(1)) > variance(&run(all)));
}

#[test]
fn zero_weights_give_closed_form_losses() {
    let arch = Architecture::default();
    let data = ring(5, 300);
    let g = GeneratorNet::from_layers(
        zero_dense(arch.latent_dim, arch.hidden, Activation::Relu),
        zero_dense(arch.hidden, arch.data_dim, Activation::Tanh),
    );
    let d = DiscriminatorNet::from_layers(
        zero_dense(arch.data_dim, arch.hidden, Activation::LeakyRelu { slope: 0.2 }),
        zero_dense(arch.hidden, 1, Activation::Sigmoid),
        zero_dense(arch.hidden, arch.classes, Activation::Softmax),
    );
    let r = evaluate_pair(&g, &d, &data, 2, 100, &mut RngStream::new(5, 0)).unwrap();
    let ln2 = std::f64::consts::LN_2;
    assert!((r.l_g - ln2).abs() < 1e-12);
    assert!((r.l_d_unsup - 2.0 * ln2).abs() < 1e-12);
    assert!((r.l_d_sup - (arch.classes as f64).ln()).abs() < 1e-12);
}

#[test]
fn generator_gradient_leaves_discriminator_alone() {
    let arch = Architecture::default();
    let mut g = initial_generator(&arch, 6, 0);
    let d = initial_discriminator(&arch, 6, 0);
    let d0 = d.clone();
    let z = cesslgan_core::rng::sample_standard_normal(&mut RngStream::new(6, 1), 50, arch.latent_dim);
    let (_, grads) = generator_gradients(&g, &d, &z).unwrap();
    let g0 = g.clone();
    g.params.apply_adam(&grads, &AdamConfig::default()).unwrap();
    assert_eq!(d, d0);
    assert_ne!(g, g0);
}

#[test]
fn discriminator_step_leaves_generator_alone() {
    let arch = Architecture::default();
    let data = ring(7, 300);
    let g = initial_generator(&arch, 7, 0);
    let mut d = initial_discriminator(&arch, 7, 0);
    let (g0, d0) = (g.clone(), d.clone());
    let batch = &draw_eval_batches(&data, 1, 100, arch.latent_dim, &mut RngStream::new(7, 0)).unwrap()[0];
    let fake = g.generate(&batch.z).unwrap();
    let (_, grads) = discriminator_gradients(
        &d,
        &fake,
        &batch.unlabeled,
        &batch.labeled,
        &batch.labeled_onehot,
        DiscriminatorTerms::Total,
    )
    .unwrap();
    d.params.apply_adam(&grads, &AdamConfig::default()).unwrap();
    assert_eq!(g, g0);
    assert_ne!(d, d0);
}

#[test]
fn training_rejects_empty_labelled_set() {
    let arch = Architecture::default();
    let mut data = ring(8, 300);
    data.labeled.clear();
    let r = train_pair(
        initial_generator(&arch, 8, 0),
        initial_discriminator(&arch, 8, 0),
        &data,
        &budget(1),
        &AdamConfig::default(),
        &mut RngStream::new(8, 0),
    );
    assert!(r.is_err());
}

#[test]
fn baseline_trace_is_reproducible() {
    let arch = Architecture::default();
    let data = ring(9, 300);
    let metrics = MetricsConfig {
        w1_points: 64,
        w1_every: 2,
    };
    let a = run_sslgan(&arch, &budget(3), &AdamConfig::default(), &metrics, &data, 9).unwrap();
    let b = run_sslgan(&arch, &budget(3), &AdamConfig::default(), &metrics, &data, 9).unwrap();
    assert_eq!(a.trace, b.trace);
    let due: Vec<bool> = a.trace.iter().map(|r| r.w1.is_some()).collect();
    assert_eq!(due, [false, true, true]);
}
