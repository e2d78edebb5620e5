//! Reverse-mode gradients of a small expression, checked against central
//! differences.
//!
//! `cargo run --example autodiff`

use coupled_lab::diffcore::{grad_check, Graph, Matrix, ParamStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = ParamStore::new();
    params.push_segment("w", &[0.3, -0.8, 0.5, 1.1]);
    params.push_segment("b", &[0.1, -0.2]);
    let x = Matrix::from_vec(3, 2, vec![1.0, 0.5, -0.3, 2.0, 0.7, -1.2]);

    // L = Σ tanh(x·W + b)²
    let build = |g: &mut Graph, p: &ParamStore| {
        let xv = g.constant(x.clone());
        let w = g.param(p, 0, 2, 2);
        let b = g.param(p, 4, 1, 2);
        let z = g.matmul(xv, w);
        let z = g.add(z, b);
        let h = g.tanh(z);
        let sq = g.square(h);
        Ok(g.sum(sq))
    };

    let mut g = Graph::new();
    let root = build(&mut g, &params)?;
    println!("L = {:.6}", g.scalar_value(root));
    println!("dL/dθ = {:?}", g.backward(root, &params)?);

    let report = grad_check(build, &mut params, 1e-5, 1e-4)?;
    println!("grad check: {} parameters, max relative error {:.2e}", report.checked, report.max_rel_error);

    params.set_frozen(1, true);
    let mut g = Graph::new();
    let root = build(&mut g, &params)?;
    println!("with the bias frozen: {:?}", g.backward(root, &params)?);
    Ok(())
}
