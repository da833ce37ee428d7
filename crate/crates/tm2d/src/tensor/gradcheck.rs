//! Finite-difference gradient verification.
//!
//! The checker rebuilds the graph from scratch for every probe, so it stays
//! independent of the backward implementation it validates.

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-8;

/// Compare the autodiff gradient of a scalar-valued builder against central
/// finite differences over every element of `input`. Returns the maximum
/// relative error, with an absolute floor of 1e-8 on the denominator.
pub fn grad_check<F>(build: F, input: &Tensor) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    grad_check_multi(
        |g, vars| build(g, vars[0]),
        std::slice::from_ref(input),
        &[],
    )
}

/// Multi-input variant. `probe`: explicit list of (input index, element
/// index) coordinates to probe with finite differences; empty probes every
/// coordinate of every input.
pub fn grad_check_multi<F>(build: F, inputs: &[Tensor], probe: &[(usize, usize)]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    for t in inputs {
        t.assert_finite("grad_check input")?;
    }

    // Autodiff gradients from one clean pass. An output that does not depend
    // on the inputs at all (constant function) has an all-zero gradient.
    let mut graph = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| graph.input(t.clone(), true)).collect();
    let out = build(&mut graph, &vars)?;
    if graph.value(out).numel() != 1 {
        return Err(Error::Contract(format!(
            "grad_check requires a scalar output, got shape {:?}",
            graph.value(out).shape()
        )));
    }
    if graph.requires_grad(out) {
        graph.backward(out)?;
    }
    let ad_grads: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| graph.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vs: Vec<Var> = perturbed.iter().map(|t| g.input(t.clone(), false)).collect();
        let out = build(&mut g, &vs)?;
        Ok(g.value(out).item())
    };

    let coords: Vec<(usize, usize)> = if probe.is_empty() {
        inputs
            .iter()
            .enumerate()
            .flat_map(|(i, t)| (0..t.numel()).map(move |j| (i, j)))
            .collect()
    } else {
        probe.to_vec()
    };

    // A central difference carries cancellation noise of roughly
    // eps·|f| / (2h); differences inside that budget are indistinguishable
    // from an exact match and cannot falsify the gradient, whatever the
    // relative formula would say about them.
    let out_scale = graph.value(out).item().abs().max(1.0);
    let noise = 64.0 * f64::EPSILON * out_scale / (2.0 * FD_STEP);

    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut max_rel = 0.0f64;
    for (ti, ei) in coords {
        let orig = work[ti].data()[ei];
        work[ti].data_mut()[ei] = orig + FD_STEP;
        let plus = eval(&work)?;
        work[ti].data_mut()[ei] = orig - FD_STEP;
        let minus = eval(&work)?;
        work[ti].data_mut()[ei] = orig;

        let fd = (plus - minus) / (2.0 * FD_STEP);
        let ad = ad_grads[ti].data()[ei];
        let diff = (ad - fd).abs();
        if diff <= noise {
            continue;
        }
        let rel = diff / ad.abs().max(fd.abs()).max(REL_FLOOR);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}
