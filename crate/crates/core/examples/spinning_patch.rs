//! Spins a box about the plane normal and checks the torsional friction
//! model against `ω_{k+1} = max(0, ω_k - h μ e_r m g / I_zz)`.

use ecpsim::oracles::spinning_patch_rate;
use ecpsim::scenario::bundled;
use ecpsim::Simulator;

fn main() -> ecpsim::Result<()> {
    let sim = Simulator::new(bundled("spinning_patch")?)?;
    let sc = &sim.scenario;
    let izz = sc.props.body_inertia[(2, 2)];
    let oracle = spinning_patch_rate(
        sc.initial.angular_velocity.z,
        sc.friction.mu,
        sc.friction.e_r,
        sc.props.mass,
        sc.gravity,
        izz,
        sc.h,
        sim.num_steps(),
    );
    let out = sim.run()?;
    let worst = out
        .records
        .iter()
        .zip(&oracle[1..])
        .map(|(r, w)| (r.state.angular_velocity.z - w).abs())
        .fold(0.0, f64::max);
    for (k, r) in out.records.iter().enumerate().step_by(20) {
        println!("t = {:.2}  w_z {:.6}  oracle {:.6}  p_r {:+.3e}", r.time, r.state.angular_velocity.z, oracle[k + 1], r.contact.p_r);
    }
    println!("max |w_z - oracle| = {worst:e}");
    Ok(())
}
