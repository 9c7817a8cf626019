//! Tilts the T-bar back and forth and reports when the contact patch changes
//! between the full face and a single edge.

use ecpsim::scenario::bundled;
use ecpsim::stepper::ModeKind;
use ecpsim::Simulator;

fn main() -> ecpsim::Result<()> {
    let sim = Simulator::new(bundled("tbar")?)?;
    let out = sim.run()?;

    let mut prev: Option<ModeKind> = None;
    for r in &out.records {
        if prev != Some(r.mode.kind) {
            println!(
                "t = {:5.2} s  {:<9} witnesses {:?}  a1 = ({:+.4}, {:+.4}, {:+.4})  p_n = {:.4}",
                r.time,
                r.mode.kind.as_str(),
                r.mode.witnesses,
                r.contact.a1.x,
                r.contact.a1.y,
                r.contact.a1.z,
                r.contact.p_n
            );
            prev = Some(r.mode.kind);
        }
    }
    println!("max |g(a1)| in contact: {:e}", out.summary.max_contact_gap);
    Ok(())
}
