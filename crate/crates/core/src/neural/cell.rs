use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer geometry: `depth` layers `z_0..z_{K-1}` with `z_0` the input window
/// of `input_size`, hidden layers of `hidden_width` and a scalar output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSpec {
    pub input_size: usize,
    pub depth: usize,
    pub hidden_width: usize,
}

impl CellSpec {
    pub fn new(input_size: usize, depth: usize, hidden_width: usize) -> Result<Self> {
        let spec = Self {
            input_size,
            depth,
            hidden_width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidSpec(format!("depth {} < 2", self.depth)));
        }
        if self.input_size == 0 {
            return Err(Error::InvalidSpec("input size must be >= 1".into()));
        }
        if self.hidden_width == 0 {
            return Err(Error::InvalidSpec("hidden width must be >= 1".into()));
        }
        Ok(())
    }

    /// `[D_0, .., D_{K-1}]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_size];
        dims.extend(std::iter::repeat_n(self.hidden_width, self.depth - 2));
        dims.push(1);
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

/// One affine map `W z + b`; `weights` is `rows × cols`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn same_shape(&self, other: &Layer) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.weights.len() == other.weights.len()
            && self.bias.len() == other.bias.len()
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.cols)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(input).map(|(w, z)| w * z).sum::<f64>() + b),
        );
    }
}

/// Weights and biases of the extrapolation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseCell {
    spec: CellSpec,
    layers: Vec<Layer>,
}

/// Activations recorded by a forward pass, reused by backpropagation.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `z_0 ..= z_{K-1}`.
    pub(crate) activations: Vec<Vec<f64>>,
    /// Pre-activations of layers `1 ..= K-1`.
    pub(crate) pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> f64 {
        self.activations.last().expect("trace of a forward pass")[0]
    }

    /// Smallest |pre-activation| over the hidden layers, i.e. the distance to
    /// the nearest ReLU kink.
    pub fn min_hidden_margin(&self) -> f64 {
        let hidden = self.pre.len().saturating_sub(1);
        self.pre[..hidden]
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

impl DenseCell {
    pub fn from_layers(spec: CellSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        if layers.len() != dims.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} layers for depth {}",
                layers.len(),
                spec.depth
            )));
        }
        for (k, (layer, w)) in layers.iter().zip(dims.windows(2)).enumerate() {
            if layer.rows != w[1]
                || layer.cols != w[0]
                || layer.weights.len() != w[0] * w[1]
                || layer.bias.len() != w[1]
            {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} is {}x{}, expected {}x{}",
                    k + 1,
                    layer.rows,
                    layer.cols,
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &CellSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn zeros_like(&self) -> Vec<Layer> {
        self.layers
            .iter()
            .map(|l| Layer::zeros(l.rows, l.cols))
            .collect()
    }

    /// Iterates all parameters in checkpoint order (per layer: weights then bias).
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn check_input(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.spec.input_size {
            return Err(Error::ShapeMismatch(format!(
                "input window of {} values, cell expects {}",
                xi.len(),
                self.spec.input_size
            )));
        }
        Ok(())
    }

    /// `f(ξ)`: the next log-rate predicted from a window of `N` log-rates.
    pub fn forward(&self, xi: &[f64]) -> Result<f64> {
        self.check_input(xi)?;
        let mut trace = Trace::default();
        self.forward_trace(xi, &mut trace);
        Ok(trace.output())
    }

    /// Forward pass recording activations into `trace`. The input length is
    /// not checked here.
    pub fn forward_trace(&self, xi: &[f64], trace: &mut Trace) {
        let n_layers = self.layers.len();
        trace.activations.resize_with(n_layers + 1, Vec::new);
        trace.pre.resize_with(n_layers, Vec::new);
        trace.activations[0].clear();
        trace.activations[0].extend_from_slice(xi);
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = trace.activations.split_at_mut(k + 1);
            let pre = &mut trace.pre[k];
            layer.apply(&done[k], pre);
            let out = &mut rest[0];
            out.clear();
            if k + 1 < n_layers {
                // ReLU; the subgradient at exactly 0 is 0.
                out.extend(pre.iter().map(|&a| if a > 0.0 { a } else { 0.0 }));
            } else {
                out.extend_from_slice(pre);
            }
        }
    }

    /// Backpropagates an upstream derivative `delta` of the scalar output.
    ///
    /// Adds `delta`-weighted parameter gradients into `grads` when given, and
    /// writes `∂(delta·f)/∂ξ` into `input_grad`.
    pub fn backprop(
        &self,
        trace: &Trace,
        delta: f64,
        mut grads: Option<&mut [Layer]>,
        input_grad: &mut Vec<f64>,
        scratch: &mut Vec<f64>,
    ) {
        let mut upstream = std::mem::take(scratch);
        upstream.clear();
        upstream.push(delta);
        let mut below = std::mem::take(input_grad);
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let z_in = &trace.activations[k];
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g[k];
                for (r, &d) in upstream.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gl.bias[r] += d;
                    let row = &mut gl.weights[r * layer.cols..(r + 1) * layer.cols];
                    for (w, &z) in row.iter_mut().zip(z_in) {
                        *w += d * z;
                    }
                }
            }
            below.clear();
            below.resize(layer.cols, 0.0);
            for (r, &d) in upstream.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                for (b, &w) in below.iter_mut().zip(row) {
                    *b += d * w;
                }
            }
            if k > 0 {
                for (b, &a) in below.iter_mut().zip(&trace.pre[k - 1]) {
                    if a <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            std::mem::swap(&mut upstream, &mut below);
        }
        // `upstream` now holds the gradient w.r.t. z_0.
        *input_grad = upstream;
        *scratch = below;
    }
}

/// Biases set to `b_init`; weights i.i.d. `N(0, sigma_init)` truncated at two
/// standard deviations by redrawing. Deterministic in `seed`.
pub fn init_cell(spec: CellSpec, b_init: f64, sigma_init: f64, seed: u64) -> Result<DenseCell> {
    spec.validate()?;
    if !(b_init > 0.0 && b_init.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "b_init {b_init} must be positive"
        )));
    }
    if !(sigma_init > 0.0 && sigma_init.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "sigma_init {sigma_init} must be positive"
        )));
    }
    let normal = Normal::new(0.0, sigma_init).expect("positive sigma");
    let bound = 2.0 * sigma_init;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layer_dims()
        .windows(2)
        .map(|w| {
            let (cols, rows) = (w[0], w[1]);
            let weights = (0..rows * cols)
                .map(|_| loop {
                    let v: f64 = normal.sample(&mut rng);
                    if v.abs() <= bound {
                        break v;
                    }
                })
                .collect();
            Layer {
                rows,
                cols,
                weights,
                bias: vec![b_init; rows],
            }
        })
        .collect();
    DenseCell::from_layers(spec, layers)
}
