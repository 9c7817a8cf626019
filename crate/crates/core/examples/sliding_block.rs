//! Compares a cube sliding to rest against the closed-form velocity decay
//! `v_{k+1} = max(0, v_k - h μ g)`.

use ecpsim::oracles::sliding_block_velocity;
use ecpsim::scenario::bundled;
use ecpsim::Simulator;

fn main() -> ecpsim::Result<()> {
    let sc = bundled("sliding_block")?;
    let (mu, g, h) = (sc.friction.mu, sc.gravity, sc.h);
    let v0 = sc.initial.linear_velocity.x;
    let sim = Simulator::new(sc)?;
    let out = sim.run()?;
    let oracle = sliding_block_velocity(v0, mu, g, h, out.records.len());

    let mut worst = 0.0f64;
    for (k, r) in out.records.iter().enumerate() {
        let v = r.state.linear_velocity.x;
        worst = worst.max((v - oracle[k + 1]).abs());
        if k % 10 == 9 {
            println!("step {:3}  v_sim {:.6}  v_oracle {:.6}", k + 1, v, oracle[k + 1]);
        }
    }
    let stick = out.records.iter().position(|r| r.state.linear_velocity.x.abs() < 1e-9);
    println!("max deviation {worst:e}, stops at step {:?}", stick.map(|s| s + 1));
    Ok(())
}
