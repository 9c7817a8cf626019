//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::time::Instant;

use ecpsim::geometry::world_facet;
use ecpsim::oracles::{closest_point_bruteforce, dissipation_grid_max, grid_spacing};
use ecpsim::oracles::{sliding_block_velocity, spinning_patch_rate};
use ecpsim::scenario::{bundled, BUNDLED};
use ecpsim::stepper::ModeKind;
use ecpsim::{RigidState, Simulator};
use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sim(name: &str) -> Simulator {
    Simulator::new(bundled(name).expect("bundled scenario")).expect("valid scenario")
}

fn desk() -> Outcome {
    let s = sim("desk");
    let start = Instant::now();
    let out = match s.run() {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let wall = start.elapsed().as_secs_f64();
    let m = &out.summary;
    let pass = out.records.len() == 400
        && m.max_contact_gap <= 1e-10
        && m.max_complementarity_violation <= 1e-8
        && m.max_cone_violation <= 1e-8
        && wall <= 60.0;
    outcome(
        pass,
        format!(
            "steps {} | max |g(a1)| {:.1e} | compl {:.1e} | cone {:.1e} | {wall:.2} s",
            out.records.len(),
            m.max_contact_gap,
            m.max_complementarity_violation,
            m.max_cone_violation
        ),
    )
}

fn tbar() -> Outcome {
    let s = sim("tbar");
    let start = Instant::now();
    let out = match s.run() {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let wall = start.elapsed().as_secs_f64();
    let max_az = out
        .records
        .iter()
        .filter(|r| r.mode.kind != ModeKind::Separated)
        .map(|r| r.contact.a1.z.abs())
        .fold(0.0, f64::max);
    let runs = ecpsim::trajectory::run_length(out.records.iter().map(|r| r.mode.kind));
    // Surface, then a point or line phase, then Surface again.
    let kinds: Vec<ModeKind> = runs.iter().map(|r| r.0).collect();
    let multi = |k: &ModeKind| matches!(k, ModeKind::Point | ModeKind::Line);
    let sequence = kinds.iter().position(|k| *k == ModeKind::Surface).is_some_and(|a| {
        kinds[a..].iter().position(multi).is_some_and(|b| {
            kinds[a + b..].contains(&ModeKind::Surface)
        })
    });
    let seq: Vec<String> = runs.iter().map(|(k, n)| format!("{k}x{n}")).collect();
    outcome(
        max_az <= 1e-10 && sequence && wall <= 90.0,
        format!("max |a_z| {max_az:.1e} | modes {} | {wall:.2} s", seq.join(" ")),
    )
}

fn sliding_block() -> Outcome {
    let s = sim("sliding_block");
    let sc = &s.scenario;
    let out = match s.run() {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let v0 = sc.initial.linear_velocity.x;
    let oracle = sliding_block_velocity(v0, sc.friction.mu, sc.gravity, sc.h, out.records.len());
    let sim_v: Vec<f64> = out.records.iter().map(|r| r.state.linear_velocity.norm()).collect();
    let stick = |v: &[f64]| v.iter().position(|x| *x <= 1e-12);
    let oracle_stick = stick(&oracle[1..]);
    let sim_stick = stick(&sim_v);
    let stick_ok = match (oracle_stick, sim_stick) {
        (Some(a), Some(b)) => a.abs_diff(b) <= 1,
        (None, None) => true,
        _ => false,
    };
    let near_stick = |k: usize| oracle_stick.is_some_and(|s| k + 1 >= s && k <= s + 1);
    let worst = sim_v
        .iter()
        .enumerate()
        .filter(|(k, _)| !near_stick(*k))
        .map(|(k, v)| (v - oracle[k + 1]).abs())
        .fold(0.0, f64::max);
    outcome(
        out.records.len() == 100 && worst <= 1e-8 && stick_ok,
        format!(
            "steps {} | max |v - oracle| {worst:.1e} | stick step sim {:?} oracle {:?}",
            out.records.len(),
            sim_stick,
            oracle_stick
        ),
    )
}

fn spinning_patch() -> Outcome {
    let s = sim("spinning_patch");
    let sc = &s.scenario;
    let out = match s.run() {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let izz = sc.props.body_inertia[(2, 2)];
    let oracle = spinning_patch_rate(
        sc.initial.angular_velocity.z,
        sc.friction.mu,
        sc.friction.e_r,
        sc.props.mass,
        sc.gravity,
        izz,
        sc.h,
        out.records.len(),
    );
    let worst = out
        .records
        .iter()
        .enumerate()
        .map(|(k, r)| (r.state.angular_velocity.z - oracle[k + 1]).abs())
        .fold(0.0, f64::max);
    outcome(
        out.records.len() == 100 && worst <= 1e-8,
        format!("steps {} | max |w_z - oracle| {worst:.1e}", out.records.len()),
    )
}

fn static_equilibrium() -> Outcome {
    let s = sim("resting_cube");
    let sc = &s.scenario;
    let out = match s.run() {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let expected = sc.h * sc.props.mass * sc.gravity;
    let pn_err = out.records.iter().map(|r| (r.contact.p_n - expected).abs()).fold(0.0, f64::max);
    let disp = out
        .records
        .last()
        .map_or(f64::INFINITY, |r| (r.state.position - sc.initial.position).norm());
    outcome(
        out.records.len() == 100 && disp <= 1e-9 && pn_err <= 1e-10,
        format!("steps {} | displacement {disp:.1e} m | max |p_n - hmg| {pn_err:.1e}", out.records.len()),
    )
}

fn separated_closest_points() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst_gap = 0.0f64;
    let mut worst_hull = 0.0f64;
    let mut failures = 0;
    let mut checked = 0;
    for name in ["resting_cube", "tbar"] {
        let s = sim(name);
        let plane = s.scenario.plane;
        for _ in 0..50 {
            let mut state = RigidState::at_rest(Vector3::zeros());
            state.orientation = common::random_orientation(&mut rng);
            state.linear_velocity = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
            state.angular_velocity = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            // Lift the lowest vertex to a random clearance.
            let lowest = s.poly.world_vertices(&state).iter().map(|w| plane.gap(w)).fold(f64::INFINITY, f64::min);
            state.position.z = rng.random_range(0.02..0.5) - lowest;
            let rec = match s.step(&state, None, 0.0) {
                Ok(r) => r,
                Err(_) => {
                    failures += 1;
                    continue;
                }
            };
            if rec.mode.kind != ModeKind::Separated {
                failures += 1;
                continue;
            }
            let oracle = closest_point_bruteforce(&s.poly, &rec.state, &plane);
            worst_gap = worst_gap.max((plane.gap(&rec.contact.a1) - oracle.gap).abs());
            for f in &s.poly.facets {
                worst_hull = worst_hull.max(world_facet(f, &rec.state, &rec.contact.a1).value);
            }
            checked += 1;
        }
    }
    outcome(
        failures == 0 && worst_gap <= 1e-9 && worst_hull <= 1e-9,
        format!("{checked} poses | max |gap - oracle| {worst_gap:.1e} | max f_i(a1) {worst_hull:.1e} | failures {failures}"),
    )
}

fn propositions() -> Outcome {
    let mut hull = 0.0f64;
    let mut drift = 0.0f64;
    let mut failed = Vec::new();
    for (name, _) in BUNDLED {
        match sim(name).run() {
            Ok(o) => {
                hull = hull.max(o.summary.max_hull_violation);
                drift = drift.max(o.summary.max_quaternion_drift);
            }
            Err(_) => failed.push(name),
        }
    }
    outcome(
        failed.is_empty() && hull <= 1e-10 && drift <= 1e-12,
        format!("{} runs | max f_i(a1) {hull:.1e} | max ||q| - 1| {drift:.1e} | failed {failed:?}", BUNDLED.len()),
    )
}

fn jacobian() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for (name, _) in BUNDLED {
        let s = sim(name);
        for _ in 0..100 {
            worst = worst.max(common::jacobian_error(&s, &mut rng));
        }
    }
    outcome(worst <= 1e-5, format!("{} scenarios x 100 points | max relative error {worst:.1e}", BUNDLED.len()))
}

fn max_dissipation() -> Outcome {
    const GRID: usize = 1000;
    let s = sim("desk");
    let out = match s.run() {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let f = s.scenario.friction;
    let plane = s.scenario.plane;
    let sliding: Vec<_> = out.records.iter().filter(|r| r.contact.sigma > 1e-6).collect();
    if sliding.len() < 20 {
        return outcome(false, format!("only {} sliding steps", sliding.len()));
    }
    let (dt, dp) = grid_spacing(GRID);
    // Two grid cells on the unit sphere of normalized impulses.
    let tol = 2.0 * (dt * dt + dp * dp).sqrt();
    let e = [f.e_t, f.e_o, f.e_r];
    let mut worst = 0.0f64;
    for k in 0..20 {
        let r = sliding[k * sliding.len() / 20];
        let c = &r.contact;
        let arm = c.a1 - r.state.position;
        let slip = |d: Vector3<f64>| {
            d.dot(&r.state.linear_velocity) + arm.cross(&d).dot(&r.state.angular_velocity)
        };
        let v = [slip(plane.tangent), slip(plane.bitangent), plane.normal.dot(&r.state.angular_velocity)];
        let g = dissipation_grid_max(v[0], v[1], v[2], f.mu, c.p_n, e[0], e[1], e[2], GRID);
        let solved = [c.p_t, c.p_o, c.p_r];
        let d = (0..3)
            .map(|i| ((solved[i] - g[i]) / (f.mu * c.p_n * e[i])).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(d);
    }
    outcome(worst <= tol, format!("20 steps | max normalized distance {worst:.2e} (2 cells = {tol:.2e})"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("desk scenario", desk),
        ("T-bar scenario", tbar),
        ("sliding-block oracle", sliding_block),
        ("spinning-patch oracle", spinning_patch),
        ("static equilibrium", static_equilibrium),
        ("separated-phase closest points", separated_closest_points),
        ("contact point in hull, quaternion norm", propositions),
        ("residual Jacobian", jacobian),
        ("maximum dissipation", max_dissipation),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        all &= o.pass;
        println!("[{}] {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
