use crate::numerics::{
    activate, derive_seed, glorot_uniform, loss, loss_gradient, matmul, rng_from_seed, Activation,
    LossKind, Matrix,
};

use super::{check_input, Architecture, Classifier, ModelError, INPUT_WIDTH, OUTPUT_WIDTH};

/// Default hidden widths for a given hidden-layer count.
pub fn default_hidden_widths(layers: usize) -> Result<Vec<usize>, ModelError> {
    const SCHEDULE: [usize; 4] = [12, 10, 8, 6];
    match layers {
        1 => Ok(vec![12]),
        2 => Ok(vec![12, 8]),
        3 | 4 => Ok(SCHEDULE[..layers].to_vec()),
        other => Err(ModelError::Architecture(format!(
            "no default widths for {other} hidden layers (supported: 1-4)"
        ))),
    }
}

/// Fully connected layer computing `activation(x W + b)`; `W` is `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_width(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_width(&self) -> usize {
        self.weights.cols()
    }

    pub(crate) fn forward(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        let mut z = matmul(x, &self.weights)?;
        z.add_row_vector(&self.bias)?;
        Ok(activate(self.activation, &z))
    }

    /// Given the layer input, its output and dL/d(output), returns
    /// (dL/dW, dL/db, dL/d(input)).
    pub(crate) fn backward(
        &self,
        input: &Matrix,
        output: &Matrix,
        grad_output: &Matrix,
    ) -> Result<(Matrix, Vec<f64>, Matrix), ModelError> {
        let act = self.activation;
        let dz = output.zip_map(grad_output, |y, g| g * act.derivative_from_output(y))?;
        let dw = matmul(&input.transpose(), &dz)?;
        let db = dz.column_sums();
        let dx = matmul(&dz, &self.weights.transpose())?;
        Ok((dw, db, dx))
    }
}

/// Feedforward network: relu hidden layers, sigmoid output of width 4.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub loss: LossKind,
    pub seed: u64,
}

impl MlpModel {
    /// Glorot-initialized network with zero biases. Each layer draws from its
    /// own sub-seed so adding a layer does not perturb the others.
    pub fn new(hidden: &[usize], loss: LossKind, seed: u64) -> Result<Self, ModelError> {
        if hidden.contains(&0) {
            return Err(ModelError::Architecture("hidden widths must be positive".into()));
        }
        let mut sizes = vec![INPUT_WIDTH];
        sizes.extend_from_slice(hidden);
        sizes.push(OUTPUT_WIDTH);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, pair)| {
                let mut rng = rng_from_seed(derive_seed(seed, &format!("layer/{k}")));
                DenseLayer {
                    weights: glorot_uniform(&mut rng, pair[0], pair[1]),
                    bias: vec![0.0; pair[1]],
                    activation: if k == last {
                        Activation::Sigmoid
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Ok(Self { layers, loss, seed })
    }

    /// Builds from explicit layers, checking the 60 -> ... -> 4 contract.
    pub fn from_layers(layers: Vec<DenseLayer>, loss: LossKind, seed: u64) -> Result<Self, ModelError> {
        let Some(first) = layers.first() else {
            return Err(ModelError::Architecture("an MLP needs at least one layer".into()));
        };
        if first.input_width() != INPUT_WIDTH {
            return Err(ModelError::Architecture(format!(
                "input width {} != {INPUT_WIDTH}",
                first.input_width()
            )));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(ModelError::Architecture(format!("layer {k} output does not feed layer {}", k + 1)));
            }
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_width() {
                return Err(ModelError::Architecture(format!("layer {k} bias width mismatch")));
            }
            let expected = if k + 1 == layers.len() {
                Activation::Sigmoid
            } else {
                Activation::Relu
            };
            if layer.activation != expected {
                return Err(ModelError::Architecture(format!(
                    "layer {k} must use {expected}, found {}",
                    layer.activation
                )));
            }
        }
        let out = layers.last().expect("non-empty").output_width();
        if out != OUTPUT_WIDTH {
            return Err(ModelError::Architecture(format!("output width {out} != {OUTPUT_WIDTH}")));
        }
        Ok(Self { layers, loss, seed })
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(DenseLayer::output_width)
            .collect()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::Mlp {
            hidden: self.hidden_widths(),
        }
    }

    /// Layer sizes including input and output, e.g. `[60, 12, 8, 4]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![INPUT_WIDTH];
        sizes.extend(self.layers.iter().map(DenseLayer::output_width));
        sizes
    }

    fn activations(&self, x: &Matrix) -> Result<Vec<Matrix>, ModelError> {
        check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(acts.last().expect("seeded with input"))?;
            acts.push(next);
        }
        Ok(acts)
    }
}

impl Classifier for MlpModel {
    fn forward(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        Ok(self.activations(x)?.pop().expect("at least the output"))
    }

    fn backward(&self, x: &Matrix, targets: &Matrix) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
        let acts = self.activations(x)?;
        let output = acts.last().expect("output");
        let value = loss(self.loss, output, targets)?;
        let mut grad = loss_gradient(self.loss, output, targets)?;

        let mut blocks = vec![Vec::new(); 2 * self.layers.len()];
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let (dw, db, dx) = layer.backward(&acts[k], &acts[k + 1], &grad)?;
            blocks[2 * k] = dw.into_vec();
            blocks[2 * k + 1] = db;
            grad = dx;
        }
        Ok((value, blocks))
    }

    fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|k| [format!("layer{k}.weight"), format!("layer{k}.bias")])
            .collect()
    }

    fn loss_kind(&self) -> LossKind {
        self.loss
    }
}
