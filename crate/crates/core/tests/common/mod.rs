#![allow(dead_code)]

use ecpsim::contact::{assemble, StepUnknowns};
use ecpsim::Simulator;
use nalgebra::{DVector, Vector3, Vector4};
use rand::Rng;

/// Uniformly distributed unit quaternion (scalar first).
pub fn random_orientation(rng: &mut impl Rng) -> Vector4<f64> {
    loop {
        let q = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = q.norm();
        if n > 1e-3 && n <= 1.0 {
            return q / n;
        }
    }
}

/// Worst relative column error of the analytic residual Jacobian against
/// central differences, at a random point around a perturbed cold start.
pub fn jacobian_error(sim: &Simulator, rng: &mut impl Rng) -> f64 {
    let m = sim.poly.num_facets();
    let mut prev = sim.scenario.initial;
    prev.position += Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
    prev.orientation = (prev.orientation + Vector4::from_fn(|_, _| rng.random_range(-0.2..0.2))).normalize();
    prev.linear_velocity += Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    prev.angular_velocity += Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let t = rng.random_range(0.0..sim.scenario.duration);
    let ctx = sim.context(&prev, t, sim.scenario.h);
    let mut z = sim.cold_start(&ctx).to_vector();
    for i in 0..z.len() {
        z[i] += rng.random_range(-0.1..0.1);
    }
    debug_assert!(StepUnknowns::from_vector(&z, m).is_ok());

    let base = assemble(&ctx, &z).unwrap().eval;
    let mut worst = 0.0f64;
    for j in 0..z.len() {
        let step = 1e-6 * z[j].abs().max(1.0);
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[j] += step;
        zm[j] -= step;
        let fp = assemble(&ctx, &zp).unwrap().eval.values;
        let fm = assemble(&ctx, &zm).unwrap().eval.values;
        let fd: DVector<f64> = (fp - fm) / (2.0 * step);
        let an = base.jacobian.column(j);
        worst = worst.max((&fd - an).norm() / an.norm().max(1.0));
    }
    worst
}
