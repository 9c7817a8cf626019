//! Takes one free-flight step from a few random poses and checks that the
//! solver's contact points match vertex enumeration.

use ecpsim::oracles::closest_point_bruteforce;
use ecpsim::scenario::bundled;
use ecpsim::se3::axis_angle;
use ecpsim::{RigidState, Simulator};
use nalgebra::Vector3;

fn main() -> ecpsim::Result<()> {
    let sim = Simulator::new(bundled("tbar")?)?;
    let plane = sim.scenario.plane;
    let poses = [
        (Vector3::x(), 0.3),
        (Vector3::new(1.0, 1.0, 0.0), 1.1),
        (Vector3::new(0.2, -0.4, 1.0), 2.5),
        (Vector3::y(), std::f64::consts::FRAC_PI_2),
    ];
    for (axis, angle) in poses {
        let mut s = RigidState::at_rest(Vector3::zeros());
        s.orientation = axis_angle(axis, angle);
        let lowest = sim.poly.world_vertices(&s).iter().map(|w| plane.gap(w)).fold(f64::INFINITY, f64::min);
        s.position.z = 0.2 - lowest;

        let rec = sim.step(&s, None, 0.0)?;
        let oracle = closest_point_bruteforce(&sim.poly, &rec.state, &plane);
        println!(
            "angle {angle:.2}: mode {}  gap {:.6} (oracle {:.6})  |gap - oracle| {:.1e}  tied vertices {:?}",
            rec.mode.kind,
            plane.gap(&rec.contact.a1),
            oracle.gap,
            (plane.gap(&rec.contact.a1) - oracle.gap).abs(),
            oracle.ties
        );
    }
    Ok(())
}
