use super::cell::{DenseCell, Layer, Trace};
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Parameter gradients, shaped like the cell's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(cell: &DenseCell) -> Self {
        Self {
            layers: cell.zeros_like(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }
}

/// A training pair: an input window and the next `N_train` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub window: Vec<f64>,
    pub target: Vec<f64>,
}

/// Whether gradients flow through predictions fed back into the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackwardMode {
    /// Full backpropagation through time.
    #[default]
    ThroughTime,
    /// Fed-back predictions are treated as constants.
    StopGradient,
}

/// `[f^(1)(ξ), .., f^(k)(ξ)]`: each prediction is appended to the window and
/// the oldest value dropped.
pub fn rollout(cell: &DenseCell, xi: &[f64], k: usize) -> Result<Vec<f64>> {
    check_window(cell, xi)?;
    let mut buf = Vec::new();
    let mut trace = Trace::default();
    rollout_into(cell, xi, k, &mut buf, &mut trace, None);
    Ok(buf.split_off(xi.len()))
}

/// Fills `buf` with `ξ` followed by `k` predictions, optionally keeping one
/// trace per step.
fn rollout_into(
    cell: &DenseCell,
    xi: &[f64],
    k: usize,
    buf: &mut Vec<f64>,
    trace: &mut Trace,
    mut traces: Option<&mut Vec<Trace>>,
) {
    let n = xi.len();
    buf.clear();
    buf.extend_from_slice(xi);
    if let Some(t) = traces.as_deref_mut() {
        t.resize_with(k, Trace::default);
    }
    for j in 0..k {
        let tr = match traces.as_deref_mut() {
            Some(t) => &mut t[j],
            None => &mut *trace,
        };
        cell.forward_trace(&buf[j..j + n], tr);
        let out = tr.output();
        buf.push(out);
    }
}

fn check_window(cell: &DenseCell, xi: &[f64]) -> Result<()> {
    if xi.len() != cell.spec().input_size {
        return Err(Error::ShapeMismatch(format!(
            "input window of {} values, cell expects {}",
            xi.len(),
            cell.spec().input_size
        )));
    }
    Ok(())
}

fn check_batch(cell: &DenseCell, batch: &[&Sequence]) -> Result<usize> {
    let first = batch.first().ok_or(Error::EmptyBatch)?;
    let n_train = first.target.len();
    if n_train == 0 {
        return Err(Error::ShapeMismatch("empty target".into()));
    }
    for s in batch {
        check_window(cell, &s.window)?;
        if s.target.len() != n_train {
            return Err(Error::ShapeMismatch(format!(
                "targets of lengths {} and {} in one batch",
                n_train,
                s.target.len()
            )));
        }
    }
    Ok(n_train)
}

/// Mean over the batch of the squared Euclidean distance between the
/// rollout and the target.
pub fn loss(cell: &DenseCell, batch: &[&Sequence]) -> Result<f64> {
    let n_train = check_batch(cell, batch)?;
    let mut buf = Vec::new();
    let mut trace = Trace::default();
    let n = cell.spec().input_size;
    let total: f64 = batch
        .iter()
        .map(|s| {
            rollout_into(cell, &s.window, n_train, &mut buf, &mut trace, None);
            buf[n..]
                .iter()
                .zip(&s.target)
                .map(|(o, y)| (o - y).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(total / batch.len() as f64)
}

/// Exact gradient of [`loss`] with respect to every weight and bias.
pub fn backward(cell: &DenseCell, batch: &[&Sequence], mode: BackwardMode) -> Result<Gradients> {
    let mut workspace = Workspace::default();
    let mut grads = Gradients::zeros_like(cell);
    batch_loss_and_gradients(cell, batch, mode, &mut grads, &mut workspace)?;
    Ok(grads)
}

/// Reusable buffers for repeated gradient evaluations.
#[derive(Debug, Default)]
pub struct Workspace {
    buf: Vec<f64>,
    traces: Vec<Trace>,
    trace: Trace,
    feedback: Vec<f64>,
    input_grad: Vec<f64>,
    scratch: Vec<f64>,
}

/// Loss and gradient in one pass; `grads` is overwritten.
pub fn batch_loss_and_gradients(
    cell: &DenseCell,
    batch: &[&Sequence],
    mode: BackwardMode,
    grads: &mut Gradients,
    ws: &mut Workspace,
) -> Result<f64> {
    let n_train = check_batch(cell, batch)?;
    let n = cell.spec().input_size;
    let scale = 1.0 / batch.len() as f64;
    grads.clear();
    let mut total = 0.0;
    for s in batch {
        let mut traces = std::mem::take(&mut ws.traces);
        rollout_into(
            cell,
            &s.window,
            n_train,
            &mut ws.buf,
            &mut ws.trace,
            Some(&mut traces),
        );
        let outputs = &ws.buf[n..];
        total += outputs
            .iter()
            .zip(&s.target)
            .map(|(o, y)| (o - y).powi(2))
            .sum::<f64>();
        // feedback[j] accumulates ∂loss/∂o_j arriving through later windows.
        ws.feedback.clear();
        ws.feedback.resize(n_train, 0.0);
        for j in (0..n_train).rev() {
            let delta = scale * 2.0 * (outputs[j] - s.target[j]) + ws.feedback[j];
            if delta == 0.0 {
                continue;
            }
            cell.backprop(
                &traces[j],
                delta,
                Some(&mut grads.layers),
                &mut ws.input_grad,
                &mut ws.scratch,
            );
            if mode == BackwardMode::ThroughTime {
                // Window j covers buf[j..j+n]; predictions sit at buf[n..].
                for (m, g) in ws.input_grad.iter().enumerate() {
                    let pos = j + m;
                    if pos >= n {
                        ws.feedback[pos - n] += g;
                    }
                }
            }
        }
        ws.traces = traces;
    }
    Ok(total * scale)
}

/// Derivatives of every rollout output with respect to every earlier value
/// in the extended buffer `[ξ_1..ξ_N, o_1..o_k]`.
///
/// Entry `(j, p)` is the total derivative of output `j` when value `p` is
/// perturbed and the perturbation propagated through later predictions.
/// Columns `p >= N + j` are zero.
pub fn rollout_jacobian(cell: &DenseCell, xi: &[f64], k: usize) -> Result<Matrix> {
    check_window(cell, xi)?;
    let n = xi.len();
    let mut buf = Vec::new();
    let mut traces = Vec::new();
    let mut trace = Trace::default();
    rollout_into(cell, xi, k, &mut buf, &mut trace, Some(&mut traces));
    // One-step input gradients ∂f/∂window at each step.
    let mut step_grads = Vec::with_capacity(k);
    let mut scratch = Vec::new();
    for tr in &traces {
        let mut g = Vec::new();
        cell.backprop(tr, 1.0, None, &mut g, &mut scratch);
        step_grads.push(g);
    }
    let mut jac = Matrix::zeros(k, n + k);
    let mut adj = vec![0.0; n + k];
    for j in 0..k {
        adj.fill(0.0);
        adj[n + j] = 1.0;
        for s in (0..=j).rev() {
            let delta = adj[n + s];
            if delta == 0.0 {
                continue;
            }
            for (m, g) in step_grads[s].iter().enumerate() {
                adj[s + m] += delta * g;
            }
        }
        adj[n + j] = 0.0;
        jac.row_mut(j).copy_from_slice(&adj);
    }
    Ok(jac)
}

/// `k × N` matrix of `∂ rollout(ξ)[j] / ∂ξ_m`, recursion paths included.
pub fn input_jacobian(cell: &DenseCell, xi: &[f64], k: usize) -> Result<Matrix> {
    let full = rollout_jacobian(cell, xi, k)?;
    let n = xi.len();
    let mut out = Matrix::zeros(k, n);
    for j in 0..k {
        out.row_mut(j).copy_from_slice(&full.row(j)[..n]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::cell::{init_cell, CellSpec};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_cell(n: usize, c: f64) -> DenseCell {
        let spec = CellSpec::new(n, 3, 2).unwrap();
        let layers = vec![
            Layer::zeros(2, n),
            Layer {
                rows: 1,
                cols: 2,
                weights: vec![0.0, 0.0],
                bias: vec![c],
            },
        ];
        DenseCell::from_layers(spec, layers).unwrap()
    }

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, n_train: usize, b: usize) -> Vec<Sequence> {
        (0..b)
            .map(|_| Sequence {
                window: (0..n).map(|_| rng.random_range(-2.0..0.0)).collect(),
                target: (0..n_train).map(|_| rng.random_range(-2.0..0.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn rollout_steps() {
        let cell = init_cell(CellSpec::new(3, 3, 4).unwrap(), 0.1, 0.4, 9).unwrap();
        let xi = [-1.0, -0.9, -0.7];
        let one = rollout(&cell, &xi, 1).unwrap();
        assert_eq!(one, vec![cell.forward(&xi).unwrap()]);
        let two = rollout(&cell, &xi, 2).unwrap();
        let second = cell.forward(&[xi[1], xi[2], one[0]]).unwrap();
        assert_eq!(two[1], second);
        let five = rollout(&cell, &xi, 5).unwrap();
        assert_eq!(&five[..2], &two[..]);
    }

    #[test]
    fn constant_cell_is_a_fixed_point() {
        let cell = constant_cell(4, -2.5);
        assert_eq!(
            rollout(&cell, &[0.0, 1.0, 2.0, 3.0], 6).unwrap(),
            vec![-2.5; 6]
        );
        let jac = input_jacobian(&cell, &[0.0, 1.0, 2.0, 3.0], 3).unwrap();
        assert!(jac.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn loss_definitions() {
        let cell = init_cell(CellSpec::new(2, 3, 3).unwrap(), 0.1, 0.3, 1).unwrap();
        let w = vec![-0.5, -0.4];
        let out = rollout(&cell, &w, 3).unwrap();
        let exact = Sequence {
            window: w.clone(),
            target: out.clone(),
        };
        assert_eq!(loss(&cell, &[&exact]).unwrap(), 0.0);
        let g = backward(&cell, &[&exact], BackwardMode::ThroughTime).unwrap();
        assert!(g.values().all(|v| v == 0.0));

        let single = Sequence {
            window: w.clone(),
            target: vec![0.3],
        };
        assert_eq!(loss(&cell, &[&single]).unwrap(), (out[0] - 0.3).powi(2));
        assert!(matches!(loss(&cell, &[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn loss_matches_brute_force_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cell = init_cell(CellSpec::new(4, 4, 5).unwrap(), 0.1, 0.3, 2).unwrap();
        let batch = random_batch(&mut rng, 4, 3, 7);
        let refs: Vec<&Sequence> = batch.iter().collect();
        let mut sum = 0.0;
        for s in &batch {
            let mut window = s.window.clone();
            for y in &s.target {
                let o = cell.forward(&window).unwrap();
                sum += (o - y) * (o - y);
                window.remove(0);
                window.push(o);
            }
        }
        let expected = sum / 7.0;
        let got = loss(&cell, &refs).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected.max(1.0));
    }

    /// Central differences, step `h`, over every parameter.
    fn fd_gradients(cell: &DenseCell, batch: &[&Sequence], h: f64) -> Vec<f64> {
        let n_params = cell.params().count();
        (0..n_params)
            .map(|i| {
                let mut plus = cell.clone();
                *plus.params_mut().nth(i).unwrap() += h;
                let mut minus = cell.clone();
                *minus.params_mut().nth(i).unwrap() -= h;
                (loss(&plus, batch).unwrap() - loss(&minus, batch).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..8u64 {
            let spec = CellSpec::new(
                3 + case as usize % 3,
                2 + case as usize % 3,
                3 + case as usize % 4,
            )
            .unwrap();
            let cell = init_cell(spec, 0.1, 0.5, case).unwrap();
            let batch = random_batch(&mut rng, spec.input_size, 1 + case as usize % 4, 3);
            let refs: Vec<&Sequence> = batch.iter().collect();
            let g: Vec<f64> = backward(&cell, &refs, BackwardMode::ThroughTime)
                .unwrap()
                .values()
                .collect();
            let fd = fd_gradients(&cell, &refs, 1e-5);
            for (a, b) in g.iter().zip(&fd) {
                let err = (a - b).abs();
                assert!(
                    err <= 1e-7 || err <= 1e-4 * a.abs().max(b.abs()),
                    "case {case}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn single_step_gradient_equals_plain_backprop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cell = init_cell(CellSpec::new(4, 3, 5).unwrap(), 0.1, 0.4, 8).unwrap();
        let batch = random_batch(&mut rng, 4, 1, 5);
        let refs: Vec<&Sequence> = batch.iter().collect();
        let bptt = backward(&cell, &refs, BackwardMode::ThroughTime).unwrap();
        let stop = backward(&cell, &refs, BackwardMode::StopGradient).unwrap();
        assert_eq!(bptt, stop);
        // Hand-written chain rule for the one-hidden-layer case.
        let (l1, l2) = (&cell.layers()[0], &cell.layers()[1]);
        let mut gw2 = vec![0.0; l2.weights.len()];
        let mut gb2 = 0.0;
        let mut gw1 = vec![0.0; l1.weights.len()];
        let mut gb1 = vec![0.0; l1.rows];
        for s in &batch {
            let pre: Vec<f64> = (0..l1.rows)
                .map(|i| {
                    l1.bias[i]
                        + (0..4)
                            .map(|j| l1.weights[i * 4 + j] * s.window[j])
                            .sum::<f64>()
                })
                .collect();
            let h: Vec<f64> = pre.iter().map(|&a| a.max(0.0)).collect();
            let o = l2.bias[0] + (0..l1.rows).map(|i| l2.weights[i] * h[i]).sum::<f64>();
            let d = 2.0 * (o - s.target[0]) / 5.0;
            gb2 += d;
            for i in 0..l1.rows {
                gw2[i] += d * h[i];
                if pre[i] > 0.0 {
                    let di = d * l2.weights[i];
                    gb1[i] += di;
                    for j in 0..4 {
                        gw1[i * 4 + j] += di * s.window[j];
                    }
                }
            }
        }
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&bptt.layers[0].weights, &gw1));
        assert!(close(&bptt.layers[0].bias, &gb1));
        assert!(close(&bptt.layers[1].weights, &gw2));
        assert!((bptt.layers[1].bias[0] - gb2).abs() < 1e-12);
    }

    #[test]
    fn stop_gradient_differs_when_recursion_matters() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cell = init_cell(CellSpec::new(3, 3, 4).unwrap(), 0.1, 0.5, 3).unwrap();
        let batch = random_batch(&mut rng, 3, 4, 4);
        let refs: Vec<&Sequence> = batch.iter().collect();
        let a = backward(&cell, &refs, BackwardMode::ThroughTime).unwrap();
        let b = backward(&cell, &refs, BackwardMode::StopGradient).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn linear_path_jacobian() {
        // f(ξ) = 0.5·ξ_2 through one active hidden unit: product of path weights.
        let spec = CellSpec::new(3, 3, 2).unwrap();
        let layers = vec![
            Layer {
                rows: 2,
                cols: 3,
                weights: vec![0.0, 2.0, 0.0, 0.0, 0.0, 0.0],
                bias: vec![10.0, 0.0],
            },
            Layer {
                rows: 1,
                cols: 2,
                weights: vec![0.25, 0.0],
                bias: vec![0.0],
            },
        ];
        let cell = DenseCell::from_layers(spec, layers).unwrap();
        let jac = input_jacobian(&cell, &[-1.0, -1.0, -1.0], 1).unwrap();
        assert_eq!(jac.row(0), &[0.0, 0.5, 0.0]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for seed in 0..5 {
            let cell = init_cell(CellSpec::new(4, 3, 6).unwrap(), 0.1, 0.5, seed).unwrap();
            let xi: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..-1.0)).collect();
            let k = 6;
            let jac = input_jacobian(&cell, &xi, k).unwrap();
            let h = 1e-6;
            for m in 0..4 {
                let mut p = xi.clone();
                p[m] += h;
                let mut q = xi.clone();
                q[m] -= h;
                let (rp, rq) = (
                    rollout(&cell, &p, k).unwrap(),
                    rollout(&cell, &q, k).unwrap(),
                );
                for j in 0..k {
                    let fd = (rp[j] - rq[j]) / (2.0 * h);
                    let a = jac.get(j, m);
                    assert!(
                        (a - fd).abs() <= 1e-7 || (a - fd).abs() <= 1e-4 * a.abs().max(fd.abs())
                    );
                }
            }
        }
    }
}
