use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand_distr::{Distribution, Normal};

use super::{MlmError, ModelConfig};
use crate::seed;

const INIT_STD: f64 = 0.1;

/// A `rows x cols` row-major block inside the flat parameter vector.
/// Vectors have `rows == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    pub fn size(&self) -> usize {
        self.rows * self.cols
    }

    pub fn slice<'a>(&self, data: &'a [f64]) -> &'a [f64] {
        &data[self.offset..self.offset + self.size()]
    }

    pub fn slice_mut<'a>(&self, data: &'a mut [f64]) -> &'a mut [f64] {
        &mut data[self.offset..self.offset + self.size()]
    }

    pub fn mat<'a>(&self, data: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.rows, self.cols), self.slice(data)).expect("slot shape")
    }

    pub fn mat_mut<'a>(&self, data: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols), self.slice_mut(data)).expect("slot shape")
    }

    pub fn vec<'a>(&self, data: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(self.slice(data))
    }

    pub fn vec_mut<'a>(&self, data: &'a mut [f64]) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(self.slice_mut(data))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSlots {
    pub wq: Slot,
    pub bq: Slot,
    pub wk: Slot,
    pub bk: Slot,
    pub wv: Slot,
    pub bv: Slot,
    pub wo: Slot,
    pub bo: Slot,
    pub ln1_gamma: Slot,
    pub ln1_beta: Slot,
    pub w1: Slot,
    pub b1: Slot,
    pub w2: Slot,
    pub b2: Slot,
    pub ln2_gamma: Slot,
    pub ln2_beta: Slot,
}

/// Where each tensor lives in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub tok_emb: Slot,
    pub pos_emb: Slot,
    pub emb_ln_gamma: Slot,
    pub emb_ln_beta: Slot,
    pub layers: Vec<LayerSlots>,
    pub out_bias: Slot,
    pub total: usize,
}

struct Allocator(usize);

impl Allocator {
    fn take(&mut self, rows: usize, cols: usize) -> Slot {
        let slot = Slot { offset: self.0, rows, cols };
        self.0 += rows * cols;
        slot
    }
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (d, f) = (cfg.d_model, cfg.d_ff);
        let mut a = Allocator(0);
        let tok_emb = a.take(cfg.vocab_size, d);
        let pos_emb = a.take(cfg.max_len, d);
        let emb_ln_gamma = a.take(1, d);
        let emb_ln_beta = a.take(1, d);
        let layers = (0..cfg.layers)
            .map(|_| LayerSlots {
                wq: a.take(d, d),
                bq: a.take(1, d),
                wk: a.take(d, d),
                bk: a.take(1, d),
                wv: a.take(d, d),
                bv: a.take(1, d),
                wo: a.take(d, d),
                bo: a.take(1, d),
                ln1_gamma: a.take(1, d),
                ln1_beta: a.take(1, d),
                w1: a.take(d, f),
                b1: a.take(1, f),
                w2: a.take(f, d),
                b2: a.take(1, d),
                ln2_gamma: a.take(1, d),
                ln2_beta: a.take(1, d),
            })
            .collect();
        let out_bias = a.take(1, cfg.vocab_size);
        Self {
            tok_emb,
            pos_emb,
            emb_ln_gamma,
            emb_ln_beta,
            layers,
            out_bias,
            total: a.0,
        }
    }

    fn weight_slots(&self) -> Vec<Slot> {
        let mut v = vec![self.tok_emb, self.pos_emb];
        for l in &self.layers {
            v.extend([l.wq, l.wk, l.wv, l.wo, l.w1, l.w2]);
        }
        v
    }

    fn gamma_slots(&self) -> Vec<Slot> {
        let mut v = vec![self.emb_ln_gamma];
        for l in &self.layers {
            v.extend([l.ln1_gamma, l.ln2_gamma]);
        }
        v
    }
}

/// Flat parameter vector plus the config that gives it shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    layout: Layout,
    values: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters except layer-norm gains, which are 1.
    pub fn zeros(config: ModelConfig) -> Result<Self, MlmError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut values = vec![0.0; layout.total];
        for slot in layout.gamma_slots() {
            slot.slice_mut(&mut values).fill(1.0);
        }
        Ok(Self { config, layout, values })
    }

    pub fn from_values(config: ModelConfig, values: Vec<f64>) -> Result<Self, MlmError> {
        config.validate()?;
        let layout = Layout::new(&config);
        if values.len() != layout.total {
            return Err(MlmError::Config(format!(
                "expected {} parameters, got {}",
                layout.total,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MlmError::Config("non-finite parameter".into()));
        }
        Ok(Self { config, layout, values })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zeroes the token embeddings and output bias so every position
    /// predicts the uniform distribution.
    pub fn rig_uniform(&mut self) {
        let layout = self.layout.clone();
        layout.tok_emb.slice_mut(&mut self.values).fill(0.0);
        layout.out_bias.slice_mut(&mut self.values).fill(0.0);
    }
}

/// Weights and embeddings ~ N(0, 0.1²), biases 0, layer-norm gains 1.
pub fn init_model(config: ModelConfig, seed: u64) -> Result<ModelParams, MlmError> {
    let mut params = ModelParams::zeros(config)?;
    let mut rng = seed::rng(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let layout = params.layout.clone();
    for slot in layout.weight_slots() {
        for v in slot.slice_mut(&mut params.values) {
            *v = normal.sample(&mut rng);
        }
    }
    Ok(params)
}
