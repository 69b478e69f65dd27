//! Central-difference verification of [`Mlp::backward`].

use ndarray::{Array2, ArrayView2};

use super::mlp::{Grads, Mlp};

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor so parameters with near-zero gradient are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat parameter index with the largest error.
    pub worst_index: usize,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Numerical gradient of `loss(net(inputs))` with respect to every parameter.
pub fn numeric_gradient<L>(net: &Mlp, inputs: ArrayView2<f64>, loss: &L) -> Vec<f64>
where
    L: Fn(&Array2<f64>) -> (f64, Array2<f64>),
{
    let mut probe = net.clone();
    let eval = |n: &Mlp| loss(&n.forward_batch(inputs).expect("shapes checked").output).0;
    (0..net.num_params())
        .map(|i| {
            let orig = *probe.param(i);
            *probe.param(i) = orig + FD_STEP;
            let up = eval(&probe);
            *probe.param(i) = orig - FD_STEP;
            let down = eval(&probe);
            *probe.param(i) = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn analytic_gradient<L>(net: &Mlp, inputs: ArrayView2<f64>, loss: &L) -> Grads
where
    L: Fn(&Array2<f64>) -> (f64, Array2<f64>),
{
    let acts = net.forward_batch(inputs).expect("shapes checked");
    let (_, d_out) = loss(&acts.output);
    net.backward(&acts, d_out.view())
}

pub fn compare_gradients(analytic: &[f64], numeric: &[f64], tolerance: f64) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let (worst_index, max_rel_error) = analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    GradCheckReport {
        max_rel_error,
        worst_index,
        checked: analytic.len(),
        tolerance,
    }
}

/// Compares backprop against central differences on every parameter.
///
/// `loss` maps network outputs to `(loss, dloss/doutputs)`.
pub fn gradient_check<L>(net: &Mlp, inputs: ArrayView2<f64>, loss: L, tolerance: f64) -> GradCheckReport
where
    L: Fn(&Array2<f64>) -> (f64, Array2<f64>),
{
    let analytic = analytic_gradient(net, inputs, &loss).flat();
    let numeric = numeric_gradient(net, inputs, &loss);
    compare_gradients(&analytic, &numeric, tolerance)
}

/// Mean squared error against fixed targets, as a loss closure.
pub fn mse_loss(targets: Array2<f64>) -> impl Fn(&Array2<f64>) -> (f64, Array2<f64>) {
    move |out: &Array2<f64>| {
        let diff = out - &targets;
        let n = diff.len() as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
        (loss, diff * (2.0 / n))
    }
}
