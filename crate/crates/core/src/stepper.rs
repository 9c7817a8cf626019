//! Time stepping: builds each step's complementarity problem, solves it,
//! checks the contact invariants and classifies the contact mode.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use nalgebra::{DVector, Vector3};

use crate::contact::{
    assemble, num_unknowns, select_active_facet, ContactVariables, FrictionParams, PairLabel,
    StepContext, StepUnknowns,
};
use crate::error::{Error, Result};
use crate::geometry::{world_facet, ConvexPolytope, SupportPlane};
use crate::scenario::Scenario;
use crate::se3::{euler_update, velocity_product_impulse, InertialProperties, RigidState};
use crate::solver::{self, Mncp, MncpEval, SolveReport, SolverConfig, StepFailure};

/// Qualitative contact state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeKind {
    Separated,
    Point,
    Line,
    Surface,
}

impl ModeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeKind::Separated => "Separated",
            ModeKind::Point => "Point",
            ModeKind::Line => "Line",
            ModeKind::Surface => "Surface",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Separated" => Some(ModeKind::Separated),
            "Point" => Some(ModeKind::Point),
            "Line" => Some(ModeKind::Line),
            "Surface" => Some(ModeKind::Surface),
            _ => None,
        }
    }
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mode plus the hull vertices found touching the plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactMode {
    pub kind: ModeKind,
    pub witnesses: Vec<usize>,
}

/// One solved step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Time at the end of the step.
    pub time: f64,
    pub state: RigidState,
    pub contact: ContactVariables,
    pub mode: ContactMode,
    pub solver: SolveReport,
    pub active_facet: usize,
}

/// Stepper settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub solver: SolverConfig,
    /// Normal impulse at or below which the body counts as separated (N·s).
    pub mode_eps: f64,
    /// Gap below which a hull vertex counts as touching (m).
    pub witness_tol: f64,
    /// Bound for the non-penetration and hull-membership checks (m).
    pub check_tol: f64,
    /// Retry a failed step as two half steps, at most twice nested.
    pub halve_on_failure: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            mode_eps: 1e-8,
            witness_tol: 1e-7,
            check_tol: 1e-10,
            halve_on_failure: false,
        }
    }
}

/// Classifies the contact of a solved step.
pub fn classify_mode(
    contact: &ContactVariables,
    poly: &ConvexPolytope,
    state: &RigidState,
    plane: &SupportPlane,
    mode_eps: f64,
    witness_tol: f64,
) -> ContactMode {
    if contact.p_n <= mode_eps {
        return ContactMode { kind: ModeKind::Separated, witnesses: Vec::new() };
    }
    let world = poly.world_vertices(state);
    let witnesses: Vec<usize> = world
        .iter()
        .enumerate()
        .filter(|(_, w)| plane.gap(w) <= witness_tol)
        .map(|(i, _)| i)
        .collect();
    let kind = match witnesses.len() {
        0 | 1 => ModeKind::Point,
        _ => {
            let pts: Vec<Vector3<f64>> = witnesses.iter().map(|&i| world[i]).collect();
            if spans_area(&pts, witness_tol) {
                ModeKind::Surface
            } else {
                ModeKind::Line
            }
        }
    };
    ContactMode { kind, witnesses }
}

fn spans_area(pts: &[Vector3<f64>], tol: f64) -> bool {
    let (mut ia, mut ib, mut best) = (0, 0, 0.0);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = (pts[i] - pts[j]).norm();
            if d > best {
                (ia, ib, best) = (i, j, d);
            }
        }
    }
    if best <= tol {
        return false;
    }
    let dir = (pts[ib] - pts[ia]) / best;
    pts.iter().any(|p| {
        let r = p - pts[ia];
        (r - dir * r.dot(&dir)).norm() > tol
    })
}

/// Unscaled complementarity pairs `(label, x, y)` of a solved step.
pub fn pair_values(
    poly: &ConvexPolytope,
    plane: &SupportPlane,
    friction: &FrictionParams,
    state: &RigidState,
    contact: &ContactVariables,
) -> Vec<(PairLabel, f64, f64)> {
    let mut out: Vec<(PairLabel, f64, f64)> = poly
        .facets
        .iter()
        .enumerate()
        .map(|(i, f)| (PairLabel::Facet(i), contact.l_hull[i], -world_facet(f, state, &contact.a1).value))
        .collect();
    out.push((PairLabel::Plane, contact.l_plane, -plane.gap(&contact.a2)));
    out.push((PairLabel::NonPenetration, contact.p_n, plane.gap(&contact.a1)));
    out.push((
        PairLabel::FrictionCone,
        contact.sigma,
        friction.cone_slack(contact.p_n, contact.p_t, contact.p_o, contact.p_r),
    ));
    out
}

/// `|min(x, y)|`: zero exactly when the pair is complementary.
pub fn complementarity_violation(x: f64, y: f64) -> f64 {
    x.min(y).abs()
}

struct StepProblem<'a> {
    ctx: StepContext<'a>,
}

impl Mncp for StepProblem<'_> {
    fn dim(&self) -> usize {
        num_unknowns(self.ctx.poly.num_facets())
    }

    fn evaluate(&self, z: &DVector<f64>) -> Result<MncpEval> {
        Ok(assemble(&self.ctx, z)?.eval)
    }
}

/// Aggregate invariant measurements over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    /// `max(-g(a1))` over all steps (m), clamped at zero.
    pub max_penetration: f64,
    /// `max |g(a1)|` over steps in contact (m).
    pub max_contact_gap: f64,
    /// `max f_i(a1)` over steps and facets (m).
    pub max_hull_violation: f64,
    pub max_complementarity_violation: f64,
    /// `max(-cone slack)` (N²·s²), clamped at zero.
    pub max_cone_violation: f64,
    pub max_quaternion_drift: f64,
    pub mean_iterations: f64,
    pub iteration_histogram: BTreeMap<usize, usize>,
    pub wall_time_per_step: f64,
}

impl RunSummary {
    pub fn from_records(sim: &Simulator, records: &[TrajectoryRecord], wall: f64) -> Self {
        let mut s = RunSummary { steps: records.len(), ..Default::default() };
        let plane = &sim.scenario.plane;
        for r in records {
            let gap = plane.gap(&r.contact.a1);
            s.max_penetration = s.max_penetration.max(0.0 - gap);
            if r.mode.kind != ModeKind::Separated {
                s.max_contact_gap = s.max_contact_gap.max(gap.abs());
            }
            for f in &sim.poly.facets {
                s.max_hull_violation =
                    s.max_hull_violation.max(world_facet(f, &r.state, &r.contact.a1).value);
            }
            for (label, x, y) in
                pair_values(&sim.poly, plane, &sim.scenario.friction, &r.state, &r.contact)
            {
                s.max_complementarity_violation =
                    s.max_complementarity_violation.max(complementarity_violation(x, y));
                if label == PairLabel::FrictionCone {
                    s.max_cone_violation = s.max_cone_violation.max(-y);
                }
            }
            s.max_quaternion_drift =
                s.max_quaternion_drift.max((r.state.orientation.norm() - 1.0).abs());
            *s.iteration_histogram.entry(r.solver.iterations).or_default() += 1;
            s.mean_iterations += r.solver.iterations as f64;
        }
        if !records.is_empty() {
            s.mean_iterations /= records.len() as f64;
            s.wall_time_per_step = wall / records.len() as f64;
        }
        s
    }

    /// Plain-text report, one `key: value` per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("steps: {}\n", self.steps));
        out.push_str(&format!("max_penetration: {:e}\n", self.max_penetration));
        out.push_str(&format!("max_contact_gap: {:e}\n", self.max_contact_gap));
        out.push_str(&format!("max_hull_violation: {:e}\n", self.max_hull_violation));
        out.push_str(&format!(
            "max_complementarity_violation: {:e}\n",
            self.max_complementarity_violation
        ));
        out.push_str(&format!("max_cone_violation: {:e}\n", self.max_cone_violation));
        out.push_str(&format!("max_quaternion_drift: {:e}\n", self.max_quaternion_drift));
        out.push_str(&format!("mean_iterations: {:.3}\n", self.mean_iterations));
        out.push_str(&format!("wall_time_per_step_s: {:.6}\n", self.wall_time_per_step));
        out.push_str("iterations_histogram:\n");
        for (k, v) in &self.iteration_histogram {
            out.push_str(&format!("  {k}: {v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrajectoryRecord>,
    pub summary: RunSummary,
}

/// Initial guess for a step. [`Simulator::run`] tries them in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    /// Previous step's contact variables.
    Previous,
    /// Closest-vertex geometry; sliding friction if contact is predicted.
    Cold,
    /// Body brought to rest at its start pose by a normal impulse that
    /// cancels the approach velocity. Recovers hard impacts.
    Impact,
}

pub const GUESS_ORDER: [InitialGuess; 3] =
    [InitialGuess::Previous, InitialGuess::Cold, InitialGuess::Impact];

/// Simulator for one scenario; the hull is built once at construction.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub scenario: Scenario,
    pub poly: ConvexPolytope,
    pub config: SimConfig,
}

impl Simulator {
    pub fn new(scenario: Scenario) -> Result<Self> {
        Self::with_config(scenario, SimConfig::default())
    }

    pub fn with_config(scenario: Scenario, config: SimConfig) -> Result<Self> {
        config.solver.validate()?;
        let poly = crate::geometry::convex_hull(&scenario.vertices)?;
        Ok(Self { scenario, poly, config })
    }

    pub fn props(&self) -> &InertialProperties {
        &self.scenario.props
    }

    /// `m g h`, or `m h` without gravity.
    pub fn impulse_scale(&self, h: f64) -> f64 {
        let g = if self.scenario.gravity > 0.0 { self.scenario.gravity } else { 1.0 };
        self.scenario.props.mass * g * h
    }

    pub fn num_steps(&self) -> usize {
        (self.scenario.duration / self.scenario.h).round() as usize
    }

    /// Frozen data of the step `[t, t + h]` starting from `prev`.
    pub fn context(&self, prev: &RigidState, t: f64, h: f64) -> StepContext<'_> {
        let sc = &self.scenario;
        let mut wrench = sc.applied.wrench_at(t);
        let gravity = -sc.plane.normal * (sc.props.mass * sc.gravity);
        for i in 0..3 {
            wrench[i] += gravity[i];
        }
        StepContext {
            poly: &self.poly,
            plane: sc.plane,
            friction: sc.friction,
            props: sc.props,
            prev: *prev,
            h,
            applied_impulse: wrench * h,
            velocity_product: velocity_product_impulse(prev, &sc.props, h),
            active_facet: select_active_facet(&self.poly, prev, &sc.plane),
            impulse_scale: self.impulse_scale(h),
        }
    }

    /// Zero impulses with the contact points at the closest hull vertices.
    pub fn cold_start(&self, ctx: &StepContext<'_>) -> StepUnknowns {
        let plane = &ctx.plane;
        let world = self.poly.world_vertices(&ctx.prev);
        let gaps: Vec<f64> = world.iter().map(|w| plane.gap(w)).collect();
        let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = (0..world.len()).filter(|&i| gaps[i] <= min_gap + 1e-9).collect();
        let a1 = tied.iter().map(|&i| world[i]).sum::<Vector3<f64>>() / tied.len() as f64;
        let mut contact = ContactVariables::zeros(self.poly.num_facets());
        contact.a1 = a1;
        contact.a2 = plane.project(&a1);
        let (others, l_plane) = self.feature_multipliers(ctx, &tied);
        for (i, l) in others {
            contact.l_hull[i] = l;
        }
        contact.l_plane = l_plane;
        contact.l_hull[ctx.active_facet] = (min_gap / contact.l_plane).max(0.0);

        // When contact is predicted, start from a supporting normal impulse
        // and sliding friction on the ellipsoid boundary. All-zero friction
        // unknowns sit on the kink of the cone pair with a singular Jacobian.
        let prev = &ctx.prev;
        let approach = plane.normal.dot(&prev.linear_velocity) * ctx.h;
        if min_gap + approach <= 1e-9 * (1.0 + min_gap.abs()) {
            let f = &ctx.friction;
            contact.p_n = ctx.impulse_scale;
            let r = a1 - prev.position;
            let slip = |d: Vector3<f64>| {
                d.dot(&prev.linear_velocity) + r.cross(&d).dot(&prev.angular_velocity)
            };
            let s = [
                slip(plane.tangent),
                slip(plane.bitangent),
                plane.normal.dot(&prev.angular_velocity),
            ];
            let e = [f.e_t, f.e_o, f.e_r];
            let sigma = (0..3).map(|i| (e[i] * s[i]).powi(2)).sum::<f64>().sqrt();
            if sigma > 0.0 {
                let p: Vec<f64> =
                    (0..3).map(|i| -e[i] * e[i] * f.mu * contact.p_n * s[i] / sigma).collect();
                (contact.p_t, contact.p_o, contact.p_r) = (p[0], p[1], p[2]);
                contact.sigma = sigma;
            }
        }
        StepUnknowns { state_next: self.predict(ctx), contact }
    }

    /// Nonnegative multipliers of the facets through the lowest feature and
    /// of the plane that make the hull gradient antiparallel to the plane
    /// normal at the start pose. Small nonnegative least squares by subset
    /// enumeration (at most two facets besides the active one).
    fn feature_multipliers(&self, ctx: &StepContext<'_>, tied: &[usize]) -> (Vec<(usize, f64)>, f64) {
        let k = ctx.active_facet;
        let rot = ctx.prev.rotation();
        let n = ctx.plane.normal;
        let nk = rot * self.poly.facets[k].normal;
        let fallback = (Vec::new(), (-nk.dot(&n)).max(1e-3));
        let through: Vec<usize> = (0..self.poly.num_facets())
            .filter(|&f| f != k && tied.iter().all(|v| self.poly.facet_vertices[f].contains(v)))
            .collect();
        let mut subsets: Vec<Vec<usize>> = vec![vec![]];
        for (a, &i) in through.iter().enumerate() {
            subsets.push(vec![i]);
            for &j in &through[a + 1..] {
                subsets.push(vec![i, j]);
            }
        }
        let mut best: Option<(f64, Vec<(usize, f64)>, f64)> = None;
        for sub in subsets {
            let mut cols: Vec<Vector3<f64>> = sub.iter().map(|&i| rot * self.poly.facets[i].normal).collect();
            cols.push(n);
            let a = nalgebra::DMatrix::from_fn(3, cols.len(), |r, c| cols[c][r]);
            let b = nalgebra::DVector::from_column_slice((-nk).as_slice());
            let Ok(x) = a.clone().svd(true, true).solve(&b, 1e-12) else { continue };
            if x.iter().any(|v| *v < -1e-12) {
                continue;
            }
            let res = (&a * &x - &b).norm();
            if best.as_ref().is_none_or(|(r, _, _)| res < *r - 1e-12) {
                let l_plane = x[sub.len()];
                let ls = sub.iter().zip(x.iter()).map(|(&i, &l)| (i, l.max(0.0))).collect();
                best = Some((res, ls, l_plane));
            }
        }
        match best {
            Some((_, ls, l_plane)) if l_plane > 1e-3 => (ls, l_plane),
            _ => fallback,
        }
    }

    fn predict(&self, ctx: &StepContext<'_>) -> RigidState {
        euler_update(&ctx.prev, &ctx.prev.velocity(), ctx.h)
    }

    fn warm_start(&self, ctx: &StepContext<'_>, previous: &ContactVariables) -> StepUnknowns {
        let mut contact = previous.clone();
        contact.l_hull.resize(self.poly.num_facets(), 0.0);
        StepUnknowns { state_next: self.predict(ctx), contact }
    }

    fn impact_start(&self, ctx: &StepContext<'_>) -> StepUnknowns {
        let mut u = self.cold_start(ctx);
        let prev = &ctx.prev;
        let approach = (-ctx.plane.normal.dot(&prev.linear_velocity)).max(0.0);
        u.state_next = *prev;
        u.state_next.linear_velocity = Vector3::zeros();
        u.state_next.angular_velocity = Vector3::zeros();
        let c = &mut u.contact;
        c.p_n = self.props().mass * approach + ctx.impulse_scale;
        (c.p_t, c.p_o, c.p_r, c.sigma) = (0.0, 0.0, 0.0, 0.0);
        u
    }

    fn guess(
        &self,
        kind: InitialGuess,
        ctx: &StepContext<'_>,
        previous: Option<&ContactVariables>,
    ) -> Option<StepUnknowns> {
        match kind {
            InitialGuess::Previous => previous.map(|c| self.warm_start(ctx, c)),
            InitialGuess::Cold => Some(self.cold_start(ctx)),
            InitialGuess::Impact => Some(self.impact_start(ctx)),
        }
    }

    /// Solves one step from a given initial guess.
    pub fn solve_step(
        &self,
        ctx: StepContext<'_>,
        guess: &StepUnknowns,
    ) -> std::result::Result<(StepUnknowns, SolveReport), StepFailure> {
        let m = self.poly.num_facets();
        let problem = StepProblem { ctx };
        let (z, report) = solver::solve(&problem, &guess.to_vector(), &self.config.solver)?;
        let u = StepUnknowns::from_vector(&z, m).expect("solver preserves dimension");
        Ok((u, report))
    }

    /// One step of length `h` starting at time `t`.
    pub fn step(
        &self,
        prev: &RigidState,
        previous_contact: Option<&ContactVariables>,
        t: f64,
    ) -> Result<TrajectoryRecord> {
        prev.validate()?;
        self.advance(prev, previous_contact, t, self.scenario.h, 0)
    }

    /// Like [`Simulator::step`] but with an explicit initial guess.
    pub fn step_with(
        &self,
        prev: &RigidState,
        previous_contact: Option<&ContactVariables>,
        t: f64,
        start: InitialGuess,
    ) -> Result<TrajectoryRecord> {
        prev.validate()?;
        let h = self.scenario.h;
        let ctx = self.context(prev, t, h);
        let k = ctx.active_facet;
        let guess = self
            .guess(start, &ctx, previous_contact)
            .unwrap_or_else(|| self.cold_start(&ctx));
        let (u, report) = self.solve_step(ctx, &guess)?;
        self.finish(u, report, t + h, k)
    }

    fn advance(
        &self,
        prev: &RigidState,
        previous_contact: Option<&ContactVariables>,
        t: f64,
        h: f64,
        depth: usize,
    ) -> Result<TrajectoryRecord> {
        let ctx = self.context(prev, t, h);
        let k = ctx.active_facet;
        let mut attempt = None;
        for kind in GUESS_ORDER {
            let Some(guess) = self.guess(kind, &ctx, previous_contact) else { continue };
            match self.solve_step(ctx.clone(), &guess) {
                Ok(ok) => {
                    attempt = Some(Ok(ok));
                    break;
                }
                Err(e) => {
                    log::debug!("t = {t}: {kind:?} guess failed: {e}");
                    attempt = Some(Err(e));
                }
            }
        }
        match attempt.expect("cold start is always available") {
            Ok((u, report)) => self.finish(u, report, t + h, k),
            Err(e) if self.config.halve_on_failure && depth < 2 => {
                log::debug!("t = {t}: {e}; halving step to {}", h / 2.0);
                let mid = self.advance(prev, previous_contact, t, h / 2.0, depth + 1)?;
                let mut end = self.advance(&mid.state, Some(&mid.contact), t + h / 2.0, h / 2.0, depth + 1)?;
                end.solver.iterations += mid.solver.iterations;
                Ok(end)
            }
            Err(e) => {
                let dump = self.diagnostic_dump(&ctx, &e.best);
                log::error!("step at t = {t} failed: {e}\n{dump}");
                Err(Error::Step(e))
            }
        }
    }

    fn finish(
        &self,
        u: StepUnknowns,
        report: SolveReport,
        time: f64,
        active_facet: usize,
    ) -> Result<TrajectoryRecord> {
        let state = u.state_next.normalized();
        let contact = u.contact;
        let plane = &self.scenario.plane;
        let tol = self.config.check_tol;
        let gap = plane.gap(&contact.a1);
        if gap < -tol {
            return Err(Error::InvalidState(format!(
                "t = {time}: contact point penetrates the plane by {:e} m",
                -gap
            )));
        }
        let worst = self
            .poly
            .facets
            .iter()
            .map(|f| world_facet(f, &state, &contact.a1).value)
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > tol {
            return Err(Error::InvalidState(format!(
                "t = {time}: contact point lies {worst:e} m outside the hull"
            )));
        }
        let mode = classify_mode(
            &contact,
            &self.poly,
            &state,
            plane,
            self.config.mode_eps,
            self.config.witness_tol,
        );
        Ok(TrajectoryRecord { time, state, contact, mode, solver: report, active_facet })
    }

    /// Human-readable residual dump for a failed step.
    pub fn diagnostic_dump(&self, ctx: &StepContext<'_>, z: &DVector<f64>) -> String {
        let mut out = String::from("residual at best iterate:\n");
        match assemble(ctx, z) {
            Ok(res) => {
                let (phi, _) = solver::reformulate(&res.eval);
                for (i, v) in phi.iter().enumerate() {
                    let name = if i < crate::contact::NUM_EQUATIONS {
                        format!("eq[{i}]")
                    } else {
                        format!("{:?}", res.pair_labels[i - crate::contact::NUM_EQUATIONS])
                    };
                    out.push_str(&format!("  {name}: {v:e}\n"));
                }
            }
            Err(e) => out.push_str(&format!("  unavailable: {e}\n")),
        }
        out
    }

    /// Runs the whole scenario.
    pub fn run(&self) -> Result<RunOutput> {
        let start = Instant::now();
        let n = self.num_steps();
        let h = self.scenario.h;
        let mut records: Vec<TrajectoryRecord> = Vec::with_capacity(n);
        let mut state = self.scenario.initial;
        for i in 0..n {
            let t = i as f64 * h;
            let prev_contact = records.last().map(|r| &r.contact);
            let mut rec = self
                .advance(&state, prev_contact, t, h, 0)
                .map_err(|e| Error::RunAborted { index: i, time: t, source: Box::new(e) })?;
            rec.time = (i + 1) as f64 * h;
            state = rec.state;
            records.push(rec);
        }
        let wall = start.elapsed().as_secs_f64();
        let summary = RunSummary::from_records(self, &records, wall);
        Ok(RunOutput { records, summary })
    }
}
