//! Scenario files and applied-wrench profiles.
//!
//! Scenarios are TOML documents; the grammar is described in the crate
//! README. Unknown keys are rejected and validation errors carry the line of
//! the offending value.

use std::f64::consts::TAU;
use std::ops::Range;
use std::path::Path;

use nalgebra::{Matrix3, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::contact::FrictionParams;
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, SupportPlane};
use crate::se3::{InertialProperties, RigidState};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_GRAVITY: f64 = 9.8;

/// Which wrench component a profile term drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrenchComponent {
    Fx,
    Fy,
    Fz,
    TauX,
    TauY,
    TauZ,
}

impl WrenchComponent {
    const NAMES: [&'static str; 6] = ["f_x", "f_y", "f_z", "tau_x", "tau_y", "tau_z"];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    pub fn parse(s: &str) -> Option<Self> {
        use WrenchComponent::*;
        let all = [Fx, Fy, Fz, TauX, TauY, TauZ];
        Self::NAMES.iter().position(|n| *n == s).map(|i| all[i])
    }
}

/// Time dependence of one profile term.
#[derive(Debug, Clone, PartialEq)]
pub enum WrenchForm {
    Constant(f64),
    /// `amplitude · sin(2π·frequency·t + phase) + bias`
    Sinusoid { amplitude: f64, frequency: f64, phase: f64, bias: f64 },
    /// Value `values[i]` on `[times[i], times[i+1])`, zero before `times[0]`.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl WrenchForm {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            WrenchForm::Constant(v) => *v,
            WrenchForm::Sinusoid { amplitude, frequency, phase, bias } => {
                amplitude * (TAU * frequency * t + phase).sin() + bias
            }
            WrenchForm::Table { times, values } => {
                match times.partition_point(|&s| s <= t) {
                    0 => 0.0,
                    i => values[i - 1],
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrenchTerm {
    pub component: WrenchComponent,
    pub form: WrenchForm,
}

/// Sum of per-component terms, in world-frame force (N) and moment (N·m)
/// about the centre of mass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WrenchProfile {
    pub terms: Vec<WrenchTerm>,
}

impl WrenchProfile {
    pub fn wrench_at(&self, t: f64) -> Vector6<f64> {
        let mut w = Vector6::zeros();
        for term in &self.terms {
            w[term.component.index()] += term.form.value_at(t);
        }
        w
    }
}

/// Everything needed to run a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    /// Body vertices relative to the centre of mass, body frame.
    pub vertices: Vec<Vector3<f64>>,
    pub props: InertialProperties,
    pub plane: SupportPlane,
    pub friction: FrictionParams,
    pub gravity: f64,
    pub h: f64,
    pub duration: f64,
    pub initial: RigidState,
    pub applied: WrenchProfile,
}

// ---------------------------------------------------------------------------
// File representation

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    format_version: Spanned<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    body: RawBody,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plane: Option<RawPlane>,
    friction: RawFriction,
    simulation: RawSimulation,
    initial: RawInitial,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    applied: Vec<Spanned<RawTerm>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBody {
    mass: Spanned<f64>,
    inertia: Spanned<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cm_offset: Option<[f64; 3]>,
    vertices: Spanned<Vec<[f64; 3]>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlane {
    normal: Spanned<[f64; 3]>,
    #[serde(default)]
    offset: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFriction {
    mu: Spanned<f64>,
    e_t: Spanned<f64>,
    e_o: Spanned<f64>,
    e_r: Spanned<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gravity: Option<Spanned<f64>>,
    h: Spanned<f64>,
    duration: Spanned<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    orientation: Option<Spanned<[f64; 4]>>,
    #[serde(default)]
    linear_velocity: [f64; 3],
    #[serde(default)]
    angular_velocity: [f64; 3],
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    component: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

fn line_of(text: &str, span: &Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, span: &Range<usize>, msg: impl std::fmt::Display) -> Error {
        Error::Scenario(format!("line {}: {msg}", line_of(self.text, span)))
    }

    fn positive(&self, key: &str, v: &Spanned<f64>) -> Result<f64> {
        let x = *v.get_ref();
        if x.is_finite() && x > 0.0 {
            Ok(x)
        } else {
            Err(self.err(&v.span(), format!("`{key}` must be positive, got {x}")))
        }
    }
}

fn finite3(v: [f64; 3]) -> Option<Vector3<f64>> {
    v.iter().all(|x| x.is_finite()).then(|| Vector3::from(v))
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario =
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string().trim_end().to_string()))?;
    let cx = Ctx { text };

    if *raw.format_version.get_ref() != FORMAT_VERSION {
        return Err(cx.err(
            &raw.format_version.span(),
            format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                raw.format_version.get_ref()
            ),
        ));
    }

    let mass = cx.positive("mass", &raw.body.mass)?;
    let inertia = Matrix3::from_row_slice(&raw.body.inertia.get_ref().concat());
    let props = InertialProperties::new(mass, inertia)
        .map_err(|e| cx.err(&raw.body.inertia.span(), e))?;

    let offset = match raw.body.cm_offset {
        Some(o) => finite3(o).ok_or_else(|| cx.err(&raw.body.vertices.span(), "cm_offset must be finite"))?,
        None => Vector3::zeros(),
    };
    let vspan = raw.body.vertices.span();
    let mut vertices = Vec::with_capacity(raw.body.vertices.get_ref().len());
    for v in raw.body.vertices.get_ref() {
        let p = finite3(*v).ok_or_else(|| cx.err(&vspan, "vertex coordinates must be finite"))?;
        vertices.push(p - offset);
    }
    if vertices.len() < 4 {
        return Err(cx.err(&vspan, format!("need at least 4 vertices, got {}", vertices.len())));
    }
    convex_hull(&vertices).map_err(|e| cx.err(&vspan, e))?;

    let plane = match &raw.plane {
        Some(p) => {
            let n = finite3(*p.normal.get_ref())
                .ok_or_else(|| cx.err(&p.normal.span(), "plane normal must be finite"))?;
            SupportPlane::new(n, p.offset).map_err(|e| cx.err(&p.normal.span(), e))?
        }
        None => SupportPlane::ground(),
    };

    let f = &raw.friction;
    let mu = *f.mu.get_ref();
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(cx.err(&f.mu.span(), format!("`mu` must be non-negative, got {mu}")));
    }
    let friction = FrictionParams::new(
        mu,
        cx.positive("e_t", &f.e_t)?,
        cx.positive("e_o", &f.e_o)?,
        cx.positive("e_r", &f.e_r)?,
    )?;

    let s = &raw.simulation;
    let gravity = match &s.gravity {
        Some(g) if !(g.get_ref().is_finite() && *g.get_ref() >= 0.0) => {
            return Err(cx.err(&g.span(), "`gravity` must be non-negative"));
        }
        Some(g) => *g.get_ref(),
        None => DEFAULT_GRAVITY,
    };
    let h = cx.positive("h", &s.h)?;
    let duration = cx.positive("duration", &s.duration)?;
    if duration < h {
        return Err(cx.err(&s.duration.span(), "`duration` must be at least one step `h`"));
    }

    let init = &raw.initial;
    let orientation = match &init.orientation {
        Some(q) => {
            let v = Vector4::from(*q.get_ref());
            if !v.iter().all(|x| x.is_finite()) || (v.norm() - 1.0).abs() > 1e-9 {
                return Err(cx.err(&q.span(), "`orientation` must be a unit quaternion (w, x, y, z)"));
            }
            v / v.norm()
        }
        None => Vector4::new(1.0, 0.0, 0.0, 0.0),
    };
    let initial = RigidState {
        position: finite3(init.position)
            .ok_or_else(|| Error::Scenario("initial.position must be finite".into()))?,
        orientation,
        linear_velocity: finite3(init.linear_velocity)
            .ok_or_else(|| Error::Scenario("initial.linear_velocity must be finite".into()))?,
        angular_velocity: finite3(init.angular_velocity)
            .ok_or_else(|| Error::Scenario("initial.angular_velocity must be finite".into()))?,
    };

    let mut terms = Vec::with_capacity(raw.applied.len());
    for t in &raw.applied {
        terms.push(parse_term(&cx, t)?);
    }

    Ok(Scenario {
        name: raw.name.clone().unwrap_or_default(),
        description: raw.description.clone().unwrap_or_default(),
        vertices,
        props,
        plane,
        friction,
        gravity,
        h,
        duration,
        initial,
        applied: WrenchProfile { terms },
    })
}

fn parse_term(cx: &Ctx<'_>, spanned: &Spanned<RawTerm>) -> Result<WrenchTerm> {
    let span = spanned.span();
    let t = spanned.get_ref();
    let component = WrenchComponent::parse(&t.component).ok_or_else(|| {
        cx.err(&span, format!("unknown wrench component `{}`", t.component))
    })?;
    let need = |name: &str, v: Option<f64>| -> Result<f64> {
        let x = v.ok_or_else(|| cx.err(&span, format!("`{}` term requires `{name}`", t.kind)))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(cx.err(&span, format!("`{name}` must be finite")))
        }
    };
    let unexpected = |names: &[(&str, bool)]| -> Result<()> {
        match names.iter().find(|(_, present)| *present) {
            Some((n, _)) => Err(cx.err(&span, format!("`{n}` is not valid for a `{}` term", t.kind))),
            None => Ok(()),
        }
    };
    let form = match t.kind.as_str() {
        "constant" => {
            unexpected(&[
                ("amplitude", t.amplitude.is_some()),
                ("frequency", t.frequency.is_some()),
                ("phase", t.phase.is_some()),
                ("bias", t.bias.is_some()),
                ("times", t.times.is_some()),
                ("values", t.values.is_some()),
            ])?;
            WrenchForm::Constant(need("value", t.value)?)
        }
        "sinusoid" => {
            unexpected(&[
                ("value", t.value.is_some()),
                ("times", t.times.is_some()),
                ("values", t.values.is_some()),
            ])?;
            WrenchForm::Sinusoid {
                amplitude: need("amplitude", t.amplitude)?,
                frequency: need("frequency", t.frequency)?,
                phase: need("phase", Some(t.phase.unwrap_or(0.0)))?,
                bias: need("bias", Some(t.bias.unwrap_or(0.0)))?,
            }
        }
        "table" => {
            unexpected(&[
                ("value", t.value.is_some()),
                ("amplitude", t.amplitude.is_some()),
                ("frequency", t.frequency.is_some()),
                ("phase", t.phase.is_some()),
                ("bias", t.bias.is_some()),
            ])?;
            let times = t.times.clone().ok_or_else(|| cx.err(&span, "`table` term requires `times`"))?;
            let values = t.values.clone().ok_or_else(|| cx.err(&span, "`table` term requires `values`"))?;
            if times.is_empty() || times.len() != values.len() {
                return Err(cx.err(&span, "`times` and `values` must be non-empty and of equal length"));
            }
            if times.iter().chain(&values).any(|x| !x.is_finite()) {
                return Err(cx.err(&span, "table entries must be finite"));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(cx.err(&span, "`times` must be strictly increasing"));
            }
            WrenchForm::Table { times, values }
        }
        other => return Err(cx.err(&span, format!("unknown term kind `{other}`"))),
    };
    Ok(WrenchTerm { component, form })
}

impl Scenario {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        parse_scenario(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML form; parsing it yields an identical scenario.
    pub fn to_toml(&self) -> String {
        let sp = |v| Spanned::new(0..0, v);
        let q = self.initial.orientation;
        let raw = RawScenario {
            format_version: sp(FORMAT_VERSION),
            name: (!self.name.is_empty()).then(|| self.name.clone()),
            description: (!self.description.is_empty()).then(|| self.description.clone()),
            body: RawBody {
                mass: Spanned::new(0..0, self.props.mass),
                inertia: Spanned::new(0..0, {
                    let m = &self.props.body_inertia;
                    [
                        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
                    ]
                }),
                cm_offset: None,
                vertices: Spanned::new(0..0, self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect()),
            },
            plane: Some(RawPlane {
                normal: Spanned::new(0..0, self.plane.normal.into()),
                offset: self.plane.offset,
            }),
            friction: RawFriction {
                mu: Spanned::new(0..0, self.friction.mu),
                e_t: Spanned::new(0..0, self.friction.e_t),
                e_o: Spanned::new(0..0, self.friction.e_o),
                e_r: Spanned::new(0..0, self.friction.e_r),
            },
            simulation: RawSimulation {
                gravity: Some(Spanned::new(0..0, self.gravity)),
                h: Spanned::new(0..0, self.h),
                duration: Spanned::new(0..0, self.duration),
            },
            initial: RawInitial {
                position: self.initial.position.into(),
                orientation: Some(Spanned::new(0..0, [q[0], q[1], q[2], q[3]])),
                linear_velocity: self.initial.linear_velocity.into(),
                angular_velocity: self.initial.angular_velocity.into(),
            },
            applied: self
                .applied
                .terms
                .iter()
                .map(|t| {
                    let mut r = RawTerm { component: t.component.name().to_string(), ..Default::default() };
                    match &t.form {
                        WrenchForm::Constant(v) => {
                            r.kind = "constant".into();
                            r.value = Some(*v);
                        }
                        WrenchForm::Sinusoid { amplitude, frequency, phase, bias } => {
                            r.kind = "sinusoid".into();
                            r.amplitude = Some(*amplitude);
                            r.frequency = Some(*frequency);
                            r.phase = Some(*phase);
                            r.bias = Some(*bias);
                        }
                        WrenchForm::Table { times, values } => {
                            r.kind = "table".into();
                            r.times = Some(times.clone());
                            r.values = Some(values.clone());
                        }
                    }
                    Spanned::new(0..0, r)
                })
                .collect(),
        };
        toml::to_string(&raw).expect("scenario serializes")
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) || self.duration < h {
            return Err(Error::InvalidParameter(format!("invalid step size {h}")));
        }
        self.h = h;
        Ok(self)
    }

    pub fn with_duration(mut self, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= self.h) {
            return Err(Error::InvalidParameter(format!("invalid duration {duration}")));
        }
        self.duration = duration;
        Ok(self)
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        self.friction = FrictionParams::new(mu, self.friction.e_t, self.friction.e_o, self.friction.e_r)?;
        Ok(self)
    }
}

/// Scenario files shipped with the crate, as `(file name, contents)`.
pub const BUNDLED: [(&str, &str); 5] = [
    ("desk.toml", include_str!("../scenarios/desk.toml")),
    ("tbar.toml", include_str!("../scenarios/tbar.toml")),
    ("sliding_block.toml", include_str!("../scenarios/sliding_block.toml")),
    ("resting_cube.toml", include_str!("../scenarios/resting_cube.toml")),
    ("spinning_patch.toml", include_str!("../scenarios/spinning_patch.toml")),
];

/// Parses a bundled scenario by file name (with or without `.toml`).
pub fn bundled(name: &str) -> Result<Scenario> {
    let file = if name.ends_with(".toml") { name.to_string() } else { format!("{name}.toml") };
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == file)
        .ok_or_else(|| Error::Scenario(format!("no bundled scenario named `{name}`")))?;
    parse_scenario(text)
}
