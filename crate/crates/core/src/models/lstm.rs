use std::fmt;
use std::str::FromStr;

use crate::numerics::{
    derive_seed, glorot_uniform, loss, loss_gradient, matmul, rng_from_seed, sigmoid, Activation,
    LossKind, Matrix,
};

use super::mlp::DenseLayer;
use super::{check_input, Architecture, Classifier, ModelError, INPUT_WIDTH, OUTPUT_WIDTH};

/// Number of gates per LSTM unit (input, forget, candidate, output).
const GATES: usize = 4;

/// How a unit count maps onto cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LstmLayout {
    /// `units` stacked cells, each 4 wide; the last cell's state is the output.
    #[default]
    Stacked,
    /// One cell `units` wide followed by a dense sigmoid readout to 4 classes.
    Wide,
}

impl fmt::Display for LstmLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LstmLayout::Stacked => "stacked",
            LstmLayout::Wide => "wide",
        })
    }
}

impl FromStr for LstmLayout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stacked" => Ok(LstmLayout::Stacked),
            "wide" => Ok(LstmLayout::Wide),
            other => Err(format!("unknown LSTM layout `{other}` (expected stacked or wide)")),
        }
    }
}

/// One LSTM cell. Gate columns are laid out `[i | f | g | o]`, each `hidden` wide.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    /// `input x 4*hidden`
    pub kernel: Matrix,
    /// `hidden x 4*hidden`
    pub recurrent: Matrix,
    pub bias: Vec<f64>,
}

struct CellTrace {
    input: Matrix,
    h0: Matrix,
    c0: Matrix,
    i: Matrix,
    f: Matrix,
    g: Matrix,
    o: Matrix,
    tanh_c: Matrix,
    h: Matrix,
}

impl LstmCell {
    fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let kernel = glorot_uniform(&mut rng, input, GATES * hidden);
        let recurrent = glorot_uniform(&mut rng, hidden, GATES * hidden);
        Self {
            kernel,
            recurrent,
            bias: vec![0.0; GATES * hidden],
        }
    }

    pub fn input_width(&self) -> usize {
        self.kernel.rows()
    }

    pub fn hidden_width(&self) -> usize {
        self.recurrent.rows()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let h = self.hidden_width();
        if self.kernel.cols() != GATES * h
            || self.recurrent.cols() != GATES * h
            || self.bias.len() != GATES * h
        {
            return Err(ModelError::Architecture(format!(
                "LSTM cell with hidden width {h} needs {} gate columns",
                GATES * h
            )));
        }
        Ok(())
    }

    /// Bias slice of the forget gate.
    pub fn forget_bias_mut(&mut self) -> &mut [f64] {
        let h = self.hidden_width();
        &mut self.bias[h..2 * h]
    }

    /// Bias slice of the input gate.
    pub fn input_bias_mut(&mut self) -> &mut [f64] {
        let h = self.hidden_width();
        &mut self.bias[..h]
    }

    /// One timestep from zero state:
    /// `c = f*c0 + i*g`, `h = o*tanh(c)` with `c0 = h0 = 0`.
    fn step(&self, x: &Matrix) -> Result<CellTrace, ModelError> {
        let n = x.rows();
        let hidden = self.hidden_width();
        let h0 = Matrix::zeros(n, hidden);
        let c0 = Matrix::zeros(n, hidden);

        let mut z = matmul(x, &self.kernel)?;
        let recurrent = matmul(&h0, &self.recurrent)?;
        for (a, b) in z.as_mut_slice().iter_mut().zip(recurrent.as_slice()) {
            *a += b;
        }
        z.add_row_vector(&self.bias)?;

        let i = z.columns(0, hidden).map(sigmoid);
        let f = z.columns(hidden, hidden).map(sigmoid);
        let g = z.columns(2 * hidden, hidden).map(f64::tanh);
        let o = z.columns(3 * hidden, hidden).map(sigmoid);
        let c = f.hadamard(&c0)?.zip_map(&i.hadamard(&g)?, |a, b| a + b)?;
        let tanh_c = c.map(f64::tanh);
        let h = o.hadamard(&tanh_c)?;
        Ok(CellTrace {
            input: x.clone(),
            h0,
            c0,
            i,
            f,
            g,
            o,
            tanh_c,
            h,
        })
    }

    /// Returns (d kernel, d recurrent, d bias, d input).
    fn backward(
        &self,
        trace: &CellTrace,
        dh: &Matrix,
    ) -> Result<(Matrix, Matrix, Vec<f64>, Matrix), ModelError> {
        let n = dh.rows();
        let hidden = self.hidden_width();
        let mut dz = Matrix::zeros(n, GATES * hidden);
        for r in 0..n {
            for j in 0..hidden {
                let dh_rj = dh.get(r, j);
                let (i, f, g, o) = (
                    trace.i.get(r, j),
                    trace.f.get(r, j),
                    trace.g.get(r, j),
                    trace.o.get(r, j),
                );
                let tc = trace.tanh_c.get(r, j);
                let d_o = dh_rj * tc;
                let dc = dh_rj * o * (1.0 - tc * tc);
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * trace.c0.get(r, j);
                let row = dz.row_mut(r);
                row[j] = d_i * i * (1.0 - i);
                row[hidden + j] = d_f * f * (1.0 - f);
                row[2 * hidden + j] = d_g * (1.0 - g * g);
                row[3 * hidden + j] = d_o * o * (1.0 - o);
            }
        }
        let d_kernel = matmul(&trace.input.transpose(), &dz)?;
        let d_recurrent = matmul(&trace.h0.transpose(), &dz)?;
        let d_bias = dz.column_sums();
        let d_input = matmul(&dz, &self.kernel.transpose())?;
        Ok((d_kernel, d_recurrent, d_bias, d_input))
    }
}

/// Single-timestep LSTM classifier over one 60-feature window.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub cells: Vec<LstmCell>,
    /// Present only in the [`LstmLayout::Wide`] layout.
    pub readout: Option<DenseLayer>,
    pub loss: LossKind,
    pub seed: u64,
}

impl LstmModel {
    pub fn new(units: usize, layout: LstmLayout, loss: LossKind, seed: u64) -> Result<Self, ModelError> {
        if !(1..=4).contains(&units) {
            return Err(ModelError::Architecture(format!(
                "LSTM unit count must be 1-4, got {units}"
            )));
        }
        let cell_seed = |k: usize| derive_seed(seed, &format!("layer/{k}"));
        let (cells, readout) = match layout {
            LstmLayout::Stacked => {
                let cells = (0..units)
                    .map(|k| {
                        let input = if k == 0 { INPUT_WIDTH } else { OUTPUT_WIDTH };
                        LstmCell::init(input, OUTPUT_WIDTH, cell_seed(k))
                    })
                    .collect();
                (cells, None)
            }
            LstmLayout::Wide => {
                let cell = LstmCell::init(INPUT_WIDTH, units, cell_seed(0));
                let mut rng = rng_from_seed(cell_seed(1));
                let readout = DenseLayer {
                    weights: glorot_uniform(&mut rng, units, OUTPUT_WIDTH),
                    bias: vec![0.0; OUTPUT_WIDTH],
                    activation: Activation::Sigmoid,
                };
                (vec![cell], Some(readout))
            }
        };
        Ok(Self {
            cells,
            readout,
            loss,
            seed,
        })
    }

    pub fn from_parts(
        cells: Vec<LstmCell>,
        readout: Option<DenseLayer>,
        loss: LossKind,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if cells.is_empty() {
            return Err(ModelError::Architecture("an LSTM needs at least one cell".into()));
        }
        for cell in &cells {
            cell.validate()?;
        }
        if cells[0].input_width() != INPUT_WIDTH {
            return Err(ModelError::Architecture(format!(
                "first cell input width {} != {INPUT_WIDTH}",
                cells[0].input_width()
            )));
        }
        for pair in cells.windows(2) {
            if pair[0].hidden_width() != pair[1].input_width() {
                return Err(ModelError::Architecture("stacked cell widths do not chain".into()));
            }
        }
        let last = cells.last().expect("non-empty").hidden_width();
        match &readout {
            None if last != OUTPUT_WIDTH => {
                return Err(ModelError::Architecture(format!(
                    "final hidden width {last} != {OUTPUT_WIDTH} without a readout"
                )))
            }
            Some(r) if r.input_width() != last || r.output_width() != OUTPUT_WIDTH || r.bias.len() != OUTPUT_WIDTH => {
                return Err(ModelError::Architecture("readout shape mismatch".into()))
            }
            _ => {}
        }
        Ok(Self {
            cells,
            readout,
            loss,
            seed,
        })
    }

    pub fn layout(&self) -> LstmLayout {
        if self.readout.is_some() {
            LstmLayout::Wide
        } else {
            LstmLayout::Stacked
        }
    }

    pub fn units(&self) -> usize {
        match self.layout() {
            LstmLayout::Stacked => self.cells.len(),
            LstmLayout::Wide => self.cells[0].hidden_width(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::Lstm {
            units: self.units(),
            layout: self.layout(),
        }
    }

    fn run(&self, x: &Matrix) -> Result<(Vec<CellTrace>, Matrix), ModelError> {
        check_input(x)?;
        let mut traces: Vec<CellTrace> = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let input = traces.last().map_or(x, |t| &t.h);
            let trace = cell.step(input)?;
            traces.push(trace);
        }
        let h = &traces.last().expect("at least one cell").h;
        let y = match &self.readout {
            Some(readout) => readout.forward(h)?,
            None => h.map(sigmoid),
        };
        Ok((traces, y))
    }

    /// Final cell state of the first cell, for inspection.
    pub fn first_cell_state(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        check_input(x)?;
        let t = self.cells[0].step(x)?;
        let c = t.f.hadamard(&t.c0)?.zip_map(&t.i.hadamard(&t.g)?, |a, b| a + b)?;
        Ok(c)
    }
}

impl Classifier for LstmModel {
    fn forward(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        Ok(self.run(x)?.1)
    }

    fn backward(&self, x: &Matrix, targets: &Matrix) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
        let (traces, y) = self.run(x)?;
        let value = loss(self.loss, &y, targets)?;
        let dy = loss_gradient(self.loss, &y, targets)?;

        let mut readout_grads = Vec::new();
        let last_h = &traces.last().expect("cell").h;
        let mut dh = match &self.readout {
            Some(readout) => {
                let (dw, db, dx) = readout.backward(last_h, &y, &dy)?;
                readout_grads.push(dw.into_vec());
                readout_grads.push(db);
                dx
            }
            None => y.zip_map(&dy, |yv, g| g * yv * (1.0 - yv))?,
        };

        let mut blocks = vec![Vec::new(); 3 * self.cells.len()];
        for (k, cell) in self.cells.iter().enumerate().rev() {
            let (dk, dr, db, dx) = cell.backward(&traces[k], &dh)?;
            blocks[3 * k] = dk.into_vec();
            blocks[3 * k + 1] = dr.into_vec();
            blocks[3 * k + 2] = db;
            dh = dx;
        }
        blocks.extend(readout_grads);
        Ok((value, blocks))
    }

    fn param_blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = self
            .cells
            .iter()
            .flat_map(|c| [c.kernel.as_slice(), c.recurrent.as_slice(), c.bias.as_slice()])
            .collect();
        if let Some(r) = &self.readout {
            blocks.push(r.weights.as_slice());
            blocks.push(r.bias.as_slice());
        }
        blocks
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = self
            .cells
            .iter_mut()
            .flat_map(|c| {
                [
                    c.kernel.as_mut_slice(),
                    c.recurrent.as_mut_slice(),
                    c.bias.as_mut_slice(),
                ]
            })
            .collect();
        if let Some(r) = &mut self.readout {
            blocks.push(r.weights.as_mut_slice());
            blocks.push(r.bias.as_mut_slice());
        }
        blocks
    }

    fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.cells.len())
            .flat_map(|k| {
                [
                    format!("cell{k}.kernel"),
                    format!("cell{k}.recurrent"),
                    format!("cell{k}.bias"),
                ]
            })
            .collect();
        if self.readout.is_some() {
            names.push("readout.weight".into());
            names.push("readout.bias".into());
        }
        names
    }

    fn loss_kind(&self) -> LossKind {
        self.loss
    }
}
