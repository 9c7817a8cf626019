//! Pushes the four-legged desk across the floor and prints the run summary.
//!
//! Pass `--csv` to dump the full trajectory to stdout instead.

use ecpsim::scenario::bundled;
use ecpsim::trajectory::{run_length, write_trajectory};
use ecpsim::Simulator;

fn main() -> ecpsim::Result<()> {
    let sim = Simulator::new(bundled("desk")?)?;
    let out = sim.run()?;

    if std::env::args().any(|a| a == "--csv") {
        return write_trajectory(&out.records, std::io::stdout().lock());
    }

    print!("{}", out.summary.render());
    let last = out.records.last().expect("at least one step");
    println!(
        "final position ({:.4}, {:.4}, {:.4}) after {:.2} s",
        last.state.position.x, last.state.position.y, last.state.position.z, last.time
    );
    let modes: Vec<String> = run_length(out.records.iter().map(|r| r.mode.kind))
        .iter()
        .map(|(m, n)| format!("{m}x{n}"))
        .collect();
    println!("modes: {}", modes.join(" "));
    Ok(())
}
