//! Uses the semismooth Newton solver on a small problem of its own: one
//! equation and one complementarity pair.
//!
//!   x + y - 3 = 0
//!   0 ≤ y ⊥ y - 2x + 1 ≥ 0

use ecpsim::solver::{solve, Mncp, MncpEval};
use ecpsim::SolverConfig;
use nalgebra::{DMatrix, DVector};

struct Toy;

impl Mncp for Toy {
    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, z: &DVector<f64>) -> ecpsim::Result<MncpEval> {
        let (x, y) = (z[0], z[1]);
        Ok(MncpEval {
            values: DVector::from_vec(vec![x + y - 3.0, y, y - 2.0 * x + 1.0]),
            jacobian: DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, -2.0, 1.0]),
            num_equations: 1,
        })
    }
}

fn main() {
    let cfg = SolverConfig::default();
    for start in [[0.0, 0.0], [10.0, -5.0], [-3.0, 7.0]] {
        match solve(&Toy, &DVector::from_row_slice(&start), &cfg) {
            Ok((z, report)) => println!(
                "from {start:?}: x = {:.10}, y = {:.10} in {} iterations (residual {:.1e})",
                z[0], z[1], report.iterations, report.final_residual
            ),
            Err(f) => println!("from {start:?}: {f}"),
        }
    }
}
