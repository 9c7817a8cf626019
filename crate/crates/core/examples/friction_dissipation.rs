//! Checks that the friction impulse of a sliding, spinning step maximizes
//! dissipated power over the friction ellipsoid, by comparing it with a
//! dense angular grid.

use ecpsim::oracles::{dissipation_grid_max, grid_spacing};
use ecpsim::scenario::bundled;
use ecpsim::stepper::ModeKind;
use ecpsim::Simulator;
use nalgebra::Vector3;

fn main() -> ecpsim::Result<()> {
    let mut sc = bundled("sliding_block")?;
    sc.initial.linear_velocity = Vector3::new(0.6, 0.4, 0.0);
    sc.initial.angular_velocity = Vector3::new(0.0, 0.0, 2.0);
    let sim = Simulator::new(sc)?;
    let (f, plane) = (sim.scenario.friction, sim.scenario.plane);
    let out = sim.run()?;

    let grid = 400;
    let (dt, dp) = grid_spacing(grid);
    println!("grid spacing {dt:.4} x {dp:.4} rad");
    for r in out.records.iter().take(12).filter(|r| r.mode.kind != ModeKind::Separated) {
        let c = &r.contact;
        // Slip of the body at the contact point, plus spin about the normal.
        let arm = c.a1 - r.state.position;
        let slip = |d: Vector3<f64>| d.dot(&r.state.linear_velocity) + arm.cross(&d).dot(&r.state.angular_velocity);
        let v = [slip(plane.tangent), slip(plane.bitangent), plane.normal.dot(&r.state.angular_velocity)];
        let best = dissipation_grid_max(v[0], v[1], v[2], f.mu, c.p_n, f.e_t, f.e_o, f.e_r, grid);

        let e = [f.e_t, f.e_o, f.e_r];
        let solved = [c.p_t, c.p_o, c.p_r];
        let dist = (0..3).map(|i| ((solved[i] - best[i]) / (f.mu * c.p_n * e[i])).powi(2)).sum::<f64>().sqrt();
        println!(
            "t = {:.2}  p = ({:+.4}, {:+.4}, {:+.5})  grid = ({:+.4}, {:+.4}, {:+.5})  normalized distance {:.2e}",
            r.time, c.p_t, c.p_o, c.p_r, best[0], best[1], best[2], dist
        );
    }
    Ok(())
}
