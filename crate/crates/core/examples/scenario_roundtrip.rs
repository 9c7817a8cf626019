//! Builds a scenario in code, serializes it to TOML, parses it back and runs
//! both copies to show they are interchangeable.

use ecpsim::geometry::box_vertices;
use ecpsim::scenario::parse_scenario;
use ecpsim::se3::axis_angle;
use ecpsim::{FrictionParams, InertialProperties, RigidState, Scenario, Simulator, SupportPlane, WrenchProfile};
use nalgebra::Vector3;

fn main() -> ecpsim::Result<()> {
    let half = Vector3::new(0.15, 0.1, 0.05);
    let mass = 2.0;
    let inertia = |a: f64, b: f64| mass * (4.0 * a * a + 4.0 * b * b) / 12.0;

    let mut initial = RigidState::at_rest(Vector3::new(0.0, 0.0, 0.3));
    initial.orientation = axis_angle(Vector3::new(1.0, 0.5, 0.0), 0.4);
    initial.angular_velocity = Vector3::new(0.0, 0.0, 1.5);

    let sc = Scenario {
        name: "tilted_slab".into(),
        description: "slab dropped at a tilt".into(),
        vertices: box_vertices(half),
        props: InertialProperties::diagonal(mass, inertia(half.y, half.z), inertia(half.x, half.z), inertia(half.x, half.y))?,
        plane: SupportPlane::ground(),
        friction: FrictionParams::new(0.4, 1.0, 1.0, 0.1)?,
        gravity: 9.8,
        h: 0.01,
        duration: 0.5,
        initial,
        applied: WrenchProfile::default(),
    };

    let text = sc.to_toml();
    println!("{text}");
    let parsed = parse_scenario(&text)?;

    let a = Simulator::new(sc)?.run()?;
    let b = Simulator::new(parsed)?.run()?;
    let diff = a
        .records
        .iter()
        .zip(&b.records)
        .map(|(x, y)| (x.state.position - y.state.position).norm())
        .fold(0.0, f64::max);
    println!("max position difference between runs: {diff:e}");
    let last = a.records.last().expect("non-empty run");
    println!("final mode {} at z = {:.5}", last.mode.kind, last.state.position.z);
    Ok(())
}
