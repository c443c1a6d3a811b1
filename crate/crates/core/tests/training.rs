use affect_core::nn::{
    adam_step, deserialize_model, serialize_model, train, AdamConfig, AdamState, Arch, Model, ModelSpec, Sample,
    Tensor, TrainConfig,
};
use affect_core::EmotionLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eight Gaussian blobs around well separated centers in 6-D.
fn separable(n_per_class: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for e in EmotionLabel::ALL {
        let k = e.index();
        for _ in 0..n_per_class {
            let mut x = vec![0.0; 6];
            x[k % 6] = if k < 6 { 4.0 } else { -4.0 };
            x[(k + 3) % 6] += if k >= 6 { 4.0 } else { 0.0 };
            for v in &mut x {
                *v += rng.gen_range(-0.5..0.5);
            }
            out.push(Sample {
                input: Tensor::vector(x),
                label: e,
            });
        }
    }
    out
}

fn accuracy(model: &Model, data: &[Sample]) -> f64 {
    let hits = data
        .iter()
        .filter(|s| model.predict(&s.input).unwrap().top() == s.label)
        .count();
    hits as f64 / data.len() as f64
}

#[test]
fn fits_linearly_separable_toy() {
    let data = separable(10, 3);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 16,
        seed: 11,
        ..Default::default()
    };
    let out = train(&data, ModelSpec::mlp(Arch::Dnn, 6, &[16]), &cfg).unwrap();
    assert_eq!(accuracy(&out.model, &data), 1.0);
    assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
}

#[test]
fn training_is_reproducible() {
    let data = separable(4, 5);
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 7,
        seed: 42,
        ..Default::default()
    };
    let spec = ModelSpec::mlp(Arch::Dnn, 6, &[12, 10]);
    let a = train(&data, spec.clone(), &cfg).unwrap();
    let b = train(&data, spec.clone(), &cfg).unwrap();
    assert_eq!(serialize_model(&a.model), serialize_model(&b.model));
    assert_eq!(a.loss_history, b.loss_history);
    let c = train(&data, spec, &TrainConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(serialize_model(&a.model), serialize_model(&c.model));
}

#[test]
fn adam_matches_closed_form_first_steps() {
    let cfg = AdamConfig::default();
    let mut params = vec![Tensor::vector(vec![1.0, -2.0])];
    let mut state = AdamState::new(&params);
    let g1 = [0.5, -0.25];
    let g2 = [-1.0, 0.75];
    adam_step(&mut params, &[Tensor::vector(g1.to_vec())], &mut state, &cfg);
    adam_step(&mut params, &[Tensor::vector(g2.to_vec())], &mut state, &cfg);
    for (i, start) in [1.0, -2.0].iter().enumerate() {
        let mut w = *start;
        let (mut m, mut v) = (0.0, 0.0);
        for (t, g) in [g1[i], g2[i]].iter().enumerate() {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t as i32 + 1));
            let v_hat = v / (1.0 - 0.999f64.powi(t as i32 + 1));
            w -= 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        }
        assert!(
            (params[0].data()[i] - w).abs() < 1e-15,
            "{} vs {w}",
            params[0].data()[i]
        );
    }
    assert_eq!(state.step, 2);
}

#[test]
fn serialized_models_predict_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for spec in [
        ModelSpec::default_dnn(28),
        ModelSpec::default_fused(36),
        ModelSpec::default_cnn(14),
    ] {
        let model = Model::init(spec.clone(), &mut rng).unwrap();
        let bytes = serialize_model(&model);
        let back = deserialize_model(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(serialize_model(&back), bytes);
        let input = match spec.arch {
            Arch::Cnn => Tensor::matrix(20, 14, (0..280).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap(),
            Arch::Dnn => Tensor::vector((0..28).map(|_| rng.gen_range(-3.0..3.0)).collect()),
            Arch::Fused => Tensor::vector((0..36).map(|_| rng.gen_range(-3.0..3.0)).collect()),
        };
        let p = model.predict(&input).unwrap();
        let q = back.predict(&input).unwrap();
        assert!(p.probs().iter().zip(q.probs()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn truncated_model_is_rejected() {
    let model = Model::zeros(ModelSpec::default_dnn(28)).unwrap();
    let bytes = serialize_model(&model);
    assert!(deserialize_model(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(deserialize_model(&bad).is_err());
}
