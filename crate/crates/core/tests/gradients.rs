use proptest::prelude::*;
use puffscan::models::{Architecture, Classifier, LstmLayout, Model};
use puffscan::numerics::{loss, Activation, LossKind, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_batch(seed: u64, rows: usize) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let x: Vec<f64> = (0..rows * 60).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; rows * 4];
    for r in 0..rows {
        y[r * 4 + rng.random_range(0..4)] = 1.0;
    }
    (Matrix::from_vec(rows, 60, x).unwrap(), Matrix::from_vec(rows, 4, y).unwrap())
}

fn objective(model: &Model, x: &Matrix, y: &Matrix) -> f64 {
    loss(model.loss_kind(), &model.forward(x).unwrap(), y).unwrap()
}

/// Signs of every relu pre-activation. Empty for models without relu.
fn relu_pattern(model: &Model, x: &Matrix) -> Vec<bool> {
    let Model::Mlp(mlp) = model else {
        return Vec::new();
    };
    let mut pattern = Vec::new();
    let mut a = x.clone();
    for layer in &mlp.layers {
        let mut z = a.matmul(&layer.weights).unwrap();
        z.add_row_vector(&layer.bias).unwrap();
        if layer.activation == Activation::Relu {
            pattern.extend(z.as_slice().iter().map(|&v| v > 0.0));
        }
        a = z.map(|v| layer.activation.apply(v));
    }
    pattern
}

/// Central difference at `STEP`, or at the largest smaller step whose probes
/// stay on one side of every relu kink. Returns the step used.
fn central_difference(probe: &mut Model, b: usize, k: usize, x: &Matrix, y: &Matrix) -> (f64, f64) {
    let orig = probe.param_blocks()[b][k];
    let base = relu_pattern(probe, x);
    let mut h = STEP;
    loop {
        probe.param_blocks_mut()[b][k] = orig + h;
        let (up, up_pat) = (objective(probe, x, y), relu_pattern(probe, x));
        probe.param_blocks_mut()[b][k] = orig - h;
        let (down, down_pat) = (objective(probe, x, y), relu_pattern(probe, x));
        probe.param_blocks_mut()[b][k] = orig;
        if (up_pat == base && down_pat == base) || h < 1e-9 {
            return ((up - down) / (2.0 * h), h);
        }
        h /= 10.0;
    }
}

/// Largest relative deviation between analytic and central-difference gradients.
fn worst_relative_error(model: &Model, x: &Matrix, y: &Matrix) -> (f64, String) {
    let (_, grads) = model.backward(x, y).unwrap();
    let names = model.param_names();
    let mut probe = model.clone();
    let mut worst = (0.0, String::new());
    for (b, grad) in grads.iter().enumerate() {
        for k in 0..grad.len() {
            let (numeric, _) = central_difference(&mut probe, b, k, x, y);
            let analytic = grad[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{}[{k}] analytic {analytic:e} numeric {numeric:e}", names[b]));
            }
        }
    }
    worst
}

fn architectures() -> Vec<Architecture> {
    vec![
        Architecture::Mlp { hidden: vec![12, 8] },
        Architecture::Mlp { hidden: vec![7] },
        Architecture::Lstm {
            units: 3,
            layout: LstmLayout::Stacked,
        },
        Architecture::Lstm {
            units: 4,
            layout: LstmLayout::Wide,
        },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_gradients_match_central_differences(
        seed in any::<u64>(),
        rows in prop::sample::select(vec![1usize, 8]),
        arch_idx in 0usize..4,
        loss_kind in prop::sample::select(vec![LossKind::Bce, LossKind::Mse]),
    ) {
        let arch = &architectures()[arch_idx];
        let model = Model::init(arch, loss_kind, seed).unwrap();
        let (x, y) = random_batch(seed, rows);
        let (worst, at) = worst_relative_error(&model, &x, &y);
        prop_assert!(worst < TOL, "{arch:?} {loss_kind:?} rows={rows}: {worst:e} at {at}");
    }
}

#[test]
fn default_losses_hold_over_twenty_seeds_for_both_families() {
    for seed in 0..20u64 {
        for rows in [1, 8] {
            for arch in [
                Architecture::Mlp { hidden: vec![12, 8] },
                Architecture::Lstm {
                    units: 3,
                    layout: LstmLayout::Stacked,
                },
            ] {
                let model = Model::init(&arch, arch.family().default_loss(), seed).unwrap();
                let (x, y) = random_batch(seed, rows);
                let (worst, at) = worst_relative_error(&model, &x, &y);
                assert!(worst < TOL, "seed {seed} rows {rows} {arch:?}: {worst:e} at {at}");
            }
        }
    }
}
