//! Recurrent classifier: memory blocks with input and output gates,
//! peephole connections, and no forget gates.
//!
//! Each block holds `cells_per_block` cells sharing one input gate and one
//! output gate. Cell state accumulates without decay,
//! `s(t) = s(t-1) + y_in * g(net_c)`, which suits short bounded series
//! (tens of frames) and keeps the parameter count down. Gates read the cell
//! state through peephole weights: the input gate sees `s(t-1)`, the output
//! gate the freshly updated `s(t)`. A single sigmoid readout unit consumes
//! the hidden vector after the last frame and yields the probability that
//! the series shows a social interaction.
//!
//! Gate activations use a sharpened sigmoid `1 / (1 + exp(-alpha * x))`;
//! larger `alpha` makes gating more nearly binary. The cell input squashes
//! to (-2, 2) and the cell output to (-1, 1); the readout uses the plain
//! sigmoid.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fmath;
use crate::rng::seeded_rng;

/// Width of one input frame: normalized (distance, orientation).
pub const INPUT_DIM: usize = 2;

/// Architecture and initialization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub num_blocks: usize,
    pub cells_per_block: usize,
    pub input_dim: usize,
    /// Gate sharpness; applies to the two gate sigmoids only.
    pub alpha: f64,
    /// Weights initialize uniformly in `[-init_range, init_range]`.
    pub init_range: f64,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            num_blocks: 35,
            cells_per_block: 2,
            input_dim: INPUT_DIM,
            alpha: 3.5,
            init_range: 0.1,
            seed: 0,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 || self.cells_per_block == 0 {
            return Err(Error::InvalidArgument(String::from(
                "num_blocks and cells_per_block must be positive",
            )));
        }
        if self.input_dim != INPUT_DIM {
            return Err(Error::InvalidArgument(format!(
                "input_dim must be {INPUT_DIM}"
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(String::from(
                "alpha must be positive and finite",
            )));
        }
        if !(self.init_range >= 0.0) || !self.init_range.is_finite() {
            return Err(Error::InvalidArgument(String::from(
                "init_range must be non-negative and finite",
            )));
        }
        Ok(())
    }
}

/// Offsets into the flat parameter vector.
///
/// Per block `j`, in order: input gate `[x(I), y(N), peephole(C), bias]`,
/// output gate `[x(I), y(N), peephole(C), bias]`, then per cell `k` the cell
/// input weights `[x(I), y(N)]` (cells take no bias). After all blocks, the
/// readout layer `[w(N), bias]`. `N = num_blocks * cells_per_block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub num_blocks: usize,
    pub cells_per_block: usize,
    pub input_dim: usize,
}

impl Layout {
    pub fn new(config: &LstmConfig) -> Layout {
        Layout {
            num_blocks: config.num_blocks,
            cells_per_block: config.cells_per_block,
            input_dim: config.input_dim,
        }
    }

    /// Total hidden width `N`.
    pub fn hidden(&self) -> usize {
        self.num_blocks * self.cells_per_block
    }

    fn gate_len(&self) -> usize {
        self.input_dim + self.hidden() + self.cells_per_block + 1
    }

    fn cell_len(&self) -> usize {
        self.input_dim + self.hidden()
    }

    fn block_len(&self) -> usize {
        2 * self.gate_len() + self.cells_per_block * self.cell_len()
    }

    fn block_base(&self, j: usize) -> usize {
        j * self.block_len()
    }

    pub fn in_gate_x(&self, j: usize) -> usize {
        self.block_base(j)
    }

    pub fn in_gate_y(&self, j: usize) -> usize {
        self.in_gate_x(j) + self.input_dim
    }

    pub fn in_gate_peephole(&self, j: usize) -> usize {
        self.in_gate_y(j) + self.hidden()
    }

    pub fn in_gate_bias(&self, j: usize) -> usize {
        self.in_gate_peephole(j) + self.cells_per_block
    }

    pub fn out_gate_x(&self, j: usize) -> usize {
        self.block_base(j) + self.gate_len()
    }

    pub fn out_gate_y(&self, j: usize) -> usize {
        self.out_gate_x(j) + self.input_dim
    }

    pub fn out_gate_peephole(&self, j: usize) -> usize {
        self.out_gate_y(j) + self.hidden()
    }

    pub fn out_gate_bias(&self, j: usize) -> usize {
        self.out_gate_peephole(j) + self.cells_per_block
    }

    pub fn cell_x(&self, j: usize, k: usize) -> usize {
        self.block_base(j) + 2 * self.gate_len() + k * self.cell_len()
    }

    pub fn cell_y(&self, j: usize, k: usize) -> usize {
        self.cell_x(j, k) + self.input_dim
    }

    pub fn readout_w(&self) -> usize {
        self.num_blocks * self.block_len()
    }

    pub fn readout_bias(&self) -> usize {
        self.readout_w() + self.hidden()
    }

    pub fn total(&self) -> usize {
        self.readout_bias() + 1
    }
}

/// Sharpened gate sigmoid `1 / (1 + exp(-alpha * x))`.
pub fn gate_activation(alpha: f64, x: f64) -> f64 {
    fmath::sigmoid(alpha * x)
}

/// Cell input squashing, range (-2, 2), odd about 0.
pub fn cell_input_activation(x: f64) -> f64 {
    4.0 * fmath::sigmoid(x) - 2.0
}

/// Cell output squashing, range (-1, 1), odd about 0.
pub fn cell_output_activation(x: f64) -> f64 {
    2.0 * fmath::sigmoid(x) - 1.0
}

/// Binary cross-entropy with the probability clipped to
/// `[1e-12, 1 - 1e-12]` so a saturated readout cannot produce infinities.
pub fn bce_loss(p: f64, label: bool) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    if label {
        -fmath::ln(p)
    } else {
        -fmath::ln(1.0 - p)
    }
}

/// Recurrent state: cell contents and hidden (cell output) vector, both of
/// width `N`. Both start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmState {
    pub fn zeros(layout: &Layout) -> LstmState {
        LstmState {
            cell: vec![0.0; layout.hidden()],
            hidden: vec![0.0; layout.hidden()],
        }
    }
}

/// Everything the backward pass needs about one time step.
#[derive(Debug, Clone)]
pub(crate) struct StepTrace {
    /// Input gate activations, one per block.
    pub y_in: Vec<f64>,
    /// Output gate activations, one per block.
    pub y_out: Vec<f64>,
    /// Cell input activations `g(net_c)`, one per cell.
    pub g: Vec<f64>,
    /// Cell state after the update.
    pub cell: Vec<f64>,
    /// Hidden vector after the update.
    pub hidden: Vec<f64>,
}

/// The classifier: a config plus its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    config: LstmConfig,
    params: Vec<f64>,
}

impl LstmModel {
    /// Model with all parameters zero (useful as a neutral baseline: it
    /// outputs exactly 0.5 for every input).
    pub fn zeros(config: LstmConfig) -> Result<LstmModel> {
        config.validate()?;
        let total = Layout::new(&config).total();
        Ok(LstmModel {
            config,
            params: vec![0.0; total],
        })
    }

    /// Model with weights drawn uniformly from
    /// `[-init_range, init_range]`, reproducible from `config.seed`.
    pub fn init(config: LstmConfig) -> Result<LstmModel> {
        let mut model = LstmModel::zeros(config)?;
        let r = model.config.init_range;
        if r > 0.0 {
            let mut rng = seeded_rng(model.config.seed);
            for w in model.params.iter_mut() {
                *w = rng.gen_range(-r..=r);
            }
        }
        Ok(model)
    }

    /// Rebuilds a model from a previously exported parameter vector.
    pub fn from_params(config: LstmConfig, params: Vec<f64>) -> Result<LstmModel> {
        config.validate()?;
        let expect = Layout::new(&config).total();
        if params.len() != expect {
            return Err(Error::InvalidArgument(format!(
                "expected {expect} parameters, got {}",
                params.len()
            )));
        }
        Ok(LstmModel { config, params })
    }

    pub fn config(&self) -> &LstmConfig {
        &self.config
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Advances the recurrence by one frame in place, returning the trace
    /// the backward pass needs.
    pub(crate) fn step(&self, state: &mut LstmState, input: &[f64; 2]) -> StepTrace {
        let lay = self.layout();
        let n = lay.hidden();
        let c = lay.cells_per_block;
        let p = &self.params;

        let y_prev = state.hidden.clone();
        let s_prev = state.cell.clone();
        let mut trace = StepTrace {
            y_in: Vec::with_capacity(lay.num_blocks),
            y_out: Vec::with_capacity(lay.num_blocks),
            g: vec![0.0; n],
            cell: vec![0.0; n],
            hidden: vec![0.0; n],
        };

        for j in 0..lay.num_blocks {
            let mut net_in = p[lay.in_gate_bias(j)];
            for (i, u) in input.iter().enumerate() {
                net_in += p[lay.in_gate_x(j) + i] * u;
            }
            for (m, y) in y_prev.iter().enumerate() {
                net_in += p[lay.in_gate_y(j) + m] * y;
            }
            for k in 0..c {
                net_in += p[lay.in_gate_peephole(j) + k] * s_prev[j * c + k];
            }
            let y_in = gate_activation(self.config.alpha, net_in);

            for k in 0..c {
                let mut net_c = 0.0;
                for (i, u) in input.iter().enumerate() {
                    net_c += p[lay.cell_x(j, k) + i] * u;
                }
                for (m, y) in y_prev.iter().enumerate() {
                    net_c += p[lay.cell_y(j, k) + m] * y;
                }
                let g = cell_input_activation(net_c);
                trace.g[j * c + k] = g;
                state.cell[j * c + k] = s_prev[j * c + k] + y_in * g;
            }

            let mut net_out = p[lay.out_gate_bias(j)];
            for (i, u) in input.iter().enumerate() {
                net_out += p[lay.out_gate_x(j) + i] * u;
            }
            for (m, y) in y_prev.iter().enumerate() {
                net_out += p[lay.out_gate_y(j) + m] * y;
            }
            for k in 0..c {
                net_out += p[lay.out_gate_peephole(j) + k] * state.cell[j * c + k];
            }
            let y_out = gate_activation(self.config.alpha, net_out);

            for k in 0..c {
                state.hidden[j * c + k] = y_out * cell_output_activation(state.cell[j * c + k]);
            }
            trace.y_in.push(y_in);
            trace.y_out.push(y_out);
        }

        trace.cell.copy_from_slice(&state.cell);
        trace.hidden.copy_from_slice(&state.hidden);
        trace
    }

    /// Readout from a hidden vector: probability of interaction.
    pub(crate) fn readout(&self, hidden: &[f64]) -> f64 {
        let lay = self.layout();
        let mut z = self.params[lay.readout_bias()];
        for (m, y) in hidden.iter().enumerate() {
            z += self.params[lay.readout_w() + m] * y;
        }
        fmath::sigmoid(z)
    }

    /// Runs the full sequence from zero state and returns the probability
    /// that it shows an interaction.
    pub fn forward(&self, inputs: &[[f64; 2]]) -> f64 {
        self.readout(&self.final_state(inputs).hidden)
    }

    /// Runs the full sequence from zero state and returns the recurrent
    /// state after the last frame (useful for inspecting cell dynamics).
    pub fn final_state(&self, inputs: &[[f64; 2]]) -> LstmState {
        let lay = self.layout();
        let mut state = LstmState::zeros(&lay);
        for u in inputs {
            self.step(&mut state, u);
        }
        state
    }

    /// Like [`forward`](Self::forward) but keeps the per-step traces for
    /// gradient computation.
    pub(crate) fn forward_trace(&self, inputs: &[[f64; 2]]) -> (Vec<StepTrace>, f64) {
        let lay = self.layout();
        let mut state = LstmState::zeros(&lay);
        let mut traces = Vec::with_capacity(inputs.len());
        for u in inputs {
            traces.push(self.step(&mut state, u));
        }
        let p = self.readout(&state.hidden);
        (traces, p)
    }
}
