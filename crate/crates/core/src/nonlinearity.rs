//! Boundary nonlinearities `f(x, u)`, their primitives, and a numeric audit
//! of the structural hypotheses placed on them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::assembly::BoundaryQuadrature;
use crate::error::{check_dim, Error, Result};
use crate::mesh::{Mesh, Point};
use crate::steklov::SteklovSpectrum;

const MODULE: &str = "nonlinearity";

type PointFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// Declared asymptotic data. Limits may be `±∞`; `None` means "not declared".
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Asymptotics {
    /// `lim_{|u|→∞} f(x,u)/u`.
    pub ratio_at_infinity: Option<f64>,
    /// `limsup_{u→0} f(x,u)/u`.
    pub ratio_at_zero: Option<f64>,
    /// `lim_{|u|→∞} f(x,u)`.
    pub value_at_infinity: Option<f64>,
    /// A uniform bound `|F(x,u)| ≤ F̃`.
    pub potential_bound: Option<f64>,
    /// `lim_{u→+∞} u f(x,u)`.
    pub uf_at_pos_infinity: Option<f64>,
    /// `lim_{u→−∞} u f(x,u)`.
    pub uf_at_neg_infinity: Option<f64>,
    /// `lim_{|u|→∞} 2F(x,u) − u f(x,u)`.
    pub nonquadraticity: Option<f64>,
    /// Smallest `p` with `|f| ≤ C(1 + |u|^{p−1})`.
    pub growth_exponent: Option<f64>,
}

/// Potential-first description of `f`: `F`, `f = ∂F/∂u` and `f_u = ∂f/∂u`.
#[derive(Clone)]
pub struct Nonlinearity {
    label: String,
    potential: PointFn,
    value: PointFn,
    slope: PointFn,
    asymptotics: Asymptotics,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity").field("label", &self.label).field("asymptotics", &self.asymptotics).finish()
    }
}

impl Nonlinearity {
    pub fn new(
        label: impl Into<String>,
        potential: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        value: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        slope: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        asymptotics: Asymptotics,
    ) -> Self {
        Nonlinearity {
            label: label.into(),
            potential: Arc::new(potential),
            value: Arc::new(value),
            slope: Arc::new(slope),
            asymptotics,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `F(x, u)`.
    pub fn potential(&self, x: Point, u: f64) -> f64 {
        (self.potential)(x, u)
    }

    /// `f(x, u)`.
    pub fn value(&self, x: Point, u: f64) -> f64 {
        (self.value)(x, u)
    }

    /// `∂f/∂u (x, u)`.
    pub fn slope(&self, x: Point, u: f64) -> f64 {
        (self.slope)(x, u)
    }

    pub fn asymptotics(&self) -> &Asymptotics {
        &self.asymptotics
    }

    pub fn eval(&self, which: Which, x: Point, u: f64) -> f64 {
        match which {
            Which::Potential => self.potential(x, u),
            Which::Value => self.value(x, u),
            Which::Slope => self.slope(x, u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Potential,
    Value,
    Slope,
}

pub const BUILTIN_NAMES: [&str; 4] = ["quartic-well", "bounded-gaussian", "zero", "linear"];

fn param(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>, name: &str) -> Result<f64> {
    match params.get(key).copied().or(default) {
        Some(v) if v.is_finite() => Ok(v),
        Some(v) => Err(Error::param(MODULE, format!("`{name}` parameter `{key}` = {v} is not finite"))),
        None => Err(Error::param(MODULE, format!("`{name}` requires parameter `{key}`"))),
    }
}

/// Looks up a library nonlinearity by name.
///
/// * `quartic-well` (`delta > 0`): `F = (u⁴ − δu²)/(1 + u⁶)`
/// * `bounded-gaussian` (`beta`): `F = (β/2)(1 − e^{−u²})`
/// * `zero`: `F ≡ 0`
/// * `linear` (`slope`): `F = s u²/2`
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Nonlinearity> {
    let known: &[&str] = match name {
        "quartic-well" => &["delta"],
        "bounded-gaussian" => &["beta"],
        "zero" => &[],
        "linear" => &["slope"],
        _ => {
            return Err(Error::param(
                MODULE,
                format!("unknown nonlinearity `{name}` (known: {})", BUILTIN_NAMES.join(", ")),
            ))
        }
    };
    if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::param(MODULE, format!("`{name}` does not take parameter `{k}`")));
    }
    Ok(match name {
        "quartic-well" => {
            let d = param(params, "delta", None, name)?;
            if !(d > 0.0) {
                return Err(Error::param(MODULE, format!("quartic-well needs delta > 0, got {d}")));
            }
            quartic_well(d)
        }
        "bounded-gaussian" => bounded_gaussian(param(params, "beta", None, name)?),
        "zero" => zero(),
        _ => linear(param(params, "slope", Some(1.0), name)?),
    })
}

pub fn quartic_well(delta: f64) -> Nonlinearity {
    let potential = move |_: Point, u: f64| {
        let u2 = u * u;
        (u2 * u2 - delta * u2) / (1.0 + u2 * u2 * u2)
    };
    // f = N/D² with N = −2u⁹ + 4δu⁷ + 4u³ − 2δu, D = 1 + u⁶
    let value = move |_: Point, u: f64| {
        let u2 = u * u;
        let d = 1.0 + u2 * u2 * u2;
        let n = u * (-2.0 * u2 * u2 * u2 * u2 + 4.0 * delta * u2 * u2 * u2 + 4.0 * u2 - 2.0 * delta);
        n / (d * d)
    };
    let slope = move |_: Point, u: f64| {
        let u2 = u * u;
        let u6 = u2 * u2 * u2;
        let d = 1.0 + u6;
        let n = u * (-2.0 * u6 * u2 + 4.0 * delta * u6 + 4.0 * u2 - 2.0 * delta);
        let dn = -18.0 * u6 * u2 + 28.0 * delta * u6 + 12.0 * u2 - 2.0 * delta;
        let dd = 6.0 * u2 * u2 * u;
        (dn * d - 2.0 * n * dd) / (d * d * d)
    };
    // |F| ≤ max(1, δ)·sup_s s²/(1+s³) = max(1, δ)·2^{2/3}/3
    let bound = delta.max(1.0) * 2f64.powf(2.0 / 3.0) / 3.0;
    Nonlinearity::new(
        format!("quartic-well(delta={delta})"),
        potential,
        value,
        slope,
        Asymptotics {
            ratio_at_infinity: Some(0.0),
            ratio_at_zero: Some(-2.0 * delta),
            value_at_infinity: Some(0.0),
            potential_bound: Some(bound),
            uf_at_pos_infinity: Some(0.0),
            uf_at_neg_infinity: Some(0.0),
            nonquadraticity: Some(0.0),
            growth_exponent: Some(1.0),
        },
    )
}

pub fn bounded_gaussian(beta: f64) -> Nonlinearity {
    Nonlinearity::new(
        format!("bounded-gaussian(beta={beta})"),
        move |_, u| 0.5 * beta * (1.0 - (-u * u).exp()),
        move |_, u| beta * u * (-u * u).exp(),
        move |_, u| beta * (1.0 - 2.0 * u * u) * (-u * u).exp(),
        Asymptotics {
            ratio_at_infinity: Some(0.0),
            ratio_at_zero: Some(beta),
            value_at_infinity: Some(0.0),
            potential_bound: Some(0.5 * beta.abs()),
            uf_at_pos_infinity: Some(0.0),
            uf_at_neg_infinity: Some(0.0),
            nonquadraticity: Some(beta),
            growth_exponent: Some(1.0),
        },
    )
}

pub fn zero() -> Nonlinearity {
    Nonlinearity::new(
        "zero",
        |_, _| 0.0,
        |_, _| 0.0,
        |_, _| 0.0,
        Asymptotics {
            ratio_at_infinity: Some(0.0),
            ratio_at_zero: Some(0.0),
            value_at_infinity: Some(0.0),
            potential_bound: Some(0.0),
            uf_at_pos_infinity: Some(0.0),
            uf_at_neg_infinity: Some(0.0),
            nonquadraticity: Some(0.0),
            growth_exponent: Some(1.0),
        },
    )
}

pub fn linear(s: f64) -> Nonlinearity {
    let inf = if s > 0.0 { f64::INFINITY } else if s < 0.0 { f64::NEG_INFINITY } else { 0.0 };
    Nonlinearity::new(
        format!("linear(slope={s})"),
        move |_, u| 0.5 * s * u * u,
        move |_, u| s * u,
        move |_, _| s,
        Asymptotics {
            ratio_at_infinity: Some(s),
            ratio_at_zero: Some(s),
            value_at_infinity: (s == 0.0).then_some(0.0),
            potential_bound: (s == 0.0).then_some(0.0),
            uf_at_pos_infinity: Some(inf),
            uf_at_neg_infinity: Some(inf),
            nonquadraticity: Some(0.0),
            growth_exponent: Some(if s == 0.0 { 1.0 } else { 2.0 }),
        },
    )
}

/// Worst relative mismatch of central differences against the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub potential_vs_value: f64,
    pub value_vs_slope: f64,
    pub potential_at_zero: f64,
}

pub const CONSISTENCY_STEP: f64 = 1e-5;
pub const CONSISTENCY_TOL: f64 = 1e-6;

/// Checks `F′ = f`, `f′ = f_u` and `F(x, 0) = 0` on a grid. Mismatches are
/// measured as `|fd − exact| / max(1, |exact|)`.
pub fn check_consistency(nl: &Nonlinearity, points: &[Point], u_grid: &[f64]) -> ConsistencyReport {
    let h = CONSISTENCY_STEP;
    let mut rep = ConsistencyReport { potential_vs_value: 0.0, value_vs_slope: 0.0, potential_at_zero: 0.0 };
    for &x in points {
        rep.potential_at_zero = rep.potential_at_zero.max(nl.potential(x, 0.0).abs());
        for &u in u_grid {
            let fd = (nl.potential(x, u + h) - nl.potential(x, u - h)) / (2.0 * h);
            let f = nl.value(x, u);
            rep.potential_vs_value = rep.potential_vs_value.max((fd - f).abs() / f.abs().max(1.0));
            let fd = (nl.value(x, u + h) - nl.value(x, u - h)) / (2.0 * h);
            let fu = nl.slope(x, u);
            rep.value_vs_slope = rep.value_vs_slope.max((fd - fu).abs() / fu.abs().max(1.0));
        }
    }
    rep
}

/// Evaluates `F`, `f` or `f_u` at `u_h` on every boundary quadrature point.
pub fn nemytskii_apply(nl: &Nonlinearity, quad: &BoundaryQuadrature, u: &[f64], which: Which) -> Result<Vec<f64>> {
    check_dim(MODULE, quad.n_nodes(), u.len())?;
    let trace = quad.trace(u);
    let mut out = Vec::with_capacity(trace.len());
    for (p, &s) in quad.points().iter().zip(&trace) {
        let v = nl.eval(which, p.x, s);
        if !v.is_finite() {
            return Err(Error::validation(
                MODULE,
                format!("{} evaluated to {v} at x = ({}, {}), u = {s}", nl.label(), p.x[0], p.x[1]),
            ));
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Condition {
    Growth,
    Resonance,
    StrongResonance,
    BoundedUf,
    NqcPlus,
    NqcMinus,
    HocPlus,
    HocMinus,
    SsrHocJoint,
    Bh1,
    Bh2,
    Bh2Prime,
    Bh3,
}

impl Condition {
    pub fn key(&self) -> &'static str {
        match self {
            Condition::Growth => "growth",
            Condition::Resonance => "resonance",
            Condition::StrongResonance => "ssr",
            Condition::BoundedUf => "bounded_uf",
            Condition::NqcPlus => "nqc_plus",
            Condition::NqcMinus => "nqc_minus",
            Condition::HocPlus => "hoc_plus",
            Condition::HocMinus => "hoc_minus",
            Condition::SsrHocJoint => "ssr_hoc_joint",
            Condition::Bh1 => "bh1",
            Condition::Bh2 => "bh2",
            Condition::Bh2Prime => "bh2_prime",
            Condition::Bh3 => "bh3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// A sample where the condition fails (or the extremal sample).
    Point { x: Point, u: f64, value: f64 },
    /// Scan parameters and the statistic they produced.
    Scan { u_max: f64, n_samples: usize, n_points: usize, statistic: f64 },
    /// Best amplitudes for the boundary-integral sign condition.
    Amplitudes { a_minus: f64, a_plus: f64, integral_minus: f64, integral_plus: f64 },
    /// Radius and margin found for the small-amplitude bound.
    Radius { r: f64, epsilon: f64 },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Point { x, u, value } => write!(f, "point x=({}, {}) u={u} value={value}", x[0], x[1]),
            Witness::Scan { u_max, n_samples, n_points, statistic } => {
                write!(f, "scan u_max={u_max} samples={n_samples} points={n_points} statistic={statistic}")
            }
            Witness::Amplitudes { a_minus, a_plus, integral_minus, integral_plus } => write!(
                f,
                "a_minus={a_minus} a_plus={a_plus} integral_minus={integral_minus} integral_plus={integral_plus}"
            ),
            Witness::Radius { r, epsilon } => write!(f, "r={r} epsilon={epsilon}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    pub condition: Condition,
    pub verdict: Verdict,
    pub witness: Witness,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisAudit {
    pub label: String,
    pub entries: Vec<AuditEntry>,
    pub u_max: f64,
    pub n_samples: usize,
    pub n_points: usize,
    pub growth_exponent: f64,
    /// Which admissible exponent range the growth check refers to.
    pub growth_convention: &'static str,
}

impl HypothesisAudit {
    pub fn get(&self, c: Condition) -> Option<&AuditEntry> {
        self.entries.iter().find(|e| e.condition == c)
    }

    pub fn verdict(&self, c: Condition) -> Option<Verdict> {
        self.get(c).map(|e| e.verdict)
    }

    /// Best BH2 amplitudes `(a⁻, a⁺)` when that condition is satisfied.
    pub fn bh2_amplitudes(&self) -> Option<(f64, f64)> {
        match self.get(Condition::Bh2) {
            Some(AuditEntry { verdict: Verdict::Satisfied, witness: Witness::Amplitudes { a_minus, a_plus, .. }, .. }) => {
                Some((*a_minus, *a_plus))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub u_max: f64,
    pub n_samples: usize,
    pub growth_exponent: f64,
    /// `"sobolev"` for `p < (N+2)/(N−2)` or `"trace"` for `p < 2(N−1)/(N−2)`.
    pub growth_convention: &'static str,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { u_max: 20.0, n_samples: 2001, growth_exponent: 2.0, growth_convention: "sobolev" }
    }
}

/// Absolute slack for sign tests on scanned values.
const SIGN_TOL: f64 = 1e-12;

struct Scanner<'a> {
    nl: &'a Nonlinearity,
    points: Vec<Point>,
}

impl Scanner<'_> {
    fn eval(&self, which: Which, x: Point, u: f64) -> Result<f64> {
        let v = self.nl.eval(which, x, u);
        if !v.is_finite() {
            return Err(Error::validation(
                MODULE,
                format!("{} evaluated to {v} at x = ({}, {}), u = {u}", self.nl.label(), x[0], x[1]),
            ));
        }
        Ok(v)
    }

    /// Maximum of `g(x, u)` over points × grid, with the arg-max.
    fn max_of(&self, grid: &[f64], mut g: impl FnMut(Point, f64) -> Result<f64>) -> Result<(f64, Point, f64)> {
        let mut best = (f64::NEG_INFINITY, [0.0, 0.0], 0.0);
        for &x in &self.points {
            for &u in grid {
                let v = g(x, u)?;
                if v > best.0 {
                    best = (v, x, u);
                }
            }
        }
        Ok(best)
    }
}

fn symmetric_grid(u_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(3);
    (0..n).map(|k| -u_max + 2.0 * u_max * k as f64 / (n - 1) as f64).collect()
}

fn limit_is(v: Option<f64>, pred: impl Fn(f64) -> bool) -> Option<bool> {
    v.map(pred)
}

/// Scans the hypotheses on `|u| ≤ u_max` over boundary sample points and
/// combines the scan with the declared asymptotics. Conditions involving
/// limits at infinity are only reported satisfied when both agree.
pub fn audit(
    nl: &Nonlinearity,
    spectrum: Option<&SteklovSpectrum>,
    mesh: Option<&Mesh>,
    opts: &AuditOptions,
) -> Result<HypothesisAudit> {
    if !(opts.u_max > 0.0) {
        return Err(Error::param(MODULE, format!("u_max must be positive, got {}", opts.u_max)));
    }
    if opts.n_samples < 3 {
        return Err(Error::param(MODULE, "audit needs at least 3 samples"));
    }
    let points: Vec<Point> = match mesh {
        Some(m) => m.boundary_nodes().iter().map(|&i| m.nodes()[i]).collect(),
        None => (0..16)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                [t.cos(), t.sin()]
            })
            .collect(),
    };
    let sc = Scanner { nl, points };
    let a = nl.asymptotics();
    let grid = symmetric_grid(opts.u_max, opts.n_samples);
    let n_points = sc.points.len();
    let scan = |statistic: f64| Witness::Scan { u_max: opts.u_max, n_samples: opts.n_samples, n_points, statistic };
    let mut entries = Vec::new();
    let mut push = |condition, verdict, witness, note: String| {
        entries.push(AuditEntry { condition, verdict, witness, note });
    };

    // every sample must be finite
    for &x in &sc.points {
        for &u in &grid {
            sc.eval(Which::Potential, x, u)?;
            sc.eval(Which::Value, x, u)?;
        }
    }

    // growth |f| ≤ C(1 + |u|^{p−1})
    {
        let p = opts.growth_exponent;
        let ratio = |x: Point, u: f64| Ok(sc.eval(Which::Value, x, u)?.abs() / (1.0 + u.abs().powf(p - 1.0)));
        let (c, _, _) = sc.max_of(&grid, ratio)?;
        let (edge, _, _) = sc.max_of(&[-opts.u_max, opts.u_max], ratio)?;
        let (half, _, _) = sc.max_of(&[-0.5 * opts.u_max, 0.5 * opts.u_max], ratio)?;
        let growing = edge > 1.01 * half && edge >= c;
        let verdict = match a.growth_exponent {
            Some(q) if q <= p && !growing => Verdict::Satisfied,
            Some(q) if q > p && growing => Verdict::Violated,
            _ => Verdict::Inconclusive,
        };
        push(
            Condition::Growth,
            verdict,
            scan(c),
            format!("exponent p={p} ({} convention, N=2: unrestricted); statistic is sup |f|/(1+|u|^(p-1))", opts.growth_convention),
        );
    }

    // resonance: f/u → 0
    {
        let (edge, x, u) = sc.max_of(&[-opts.u_max, opts.u_max], |x, u| Ok((sc.eval(Which::Value, x, u)? / u).abs()))?;
        let value = sc.eval(Which::Value, x, u)? / u;
        let (half, _, _) =
            sc.max_of(&[-0.5 * opts.u_max, 0.5 * opts.u_max], |x, u| Ok((sc.eval(Which::Value, x, u)? / u).abs()))?;
        match limit_is(a.ratio_at_infinity, |l| l == 0.0) {
            Some(false) => push(
                Condition::Resonance,
                Verdict::Violated,
                Witness::Point { x, u, value },
                format!("declared lim f/u = {}", a.ratio_at_infinity.unwrap()),
            ),
            Some(true) if edge <= half + SIGN_TOL => {
                push(Condition::Resonance, Verdict::Satisfied, scan(edge), "declared lim f/u = 0; scan decreasing".into())
            }
            _ => push(Condition::Resonance, Verdict::Inconclusive, scan(edge), "declared limit missing or scan disagrees".into()),
        }
    }

    // SSR: f → 0 and |F| ≤ F̃
    let ssr = {
        let (sup_f, x, u) = sc.max_of(&grid, |x, u| Ok(sc.eval(Which::Potential, x, u)?.abs()))?;
        let (verdict, witness, note) = match (a.value_at_infinity, a.potential_bound) {
            (Some(v), _) if v != 0.0 => (
                Verdict::Violated,
                Witness::Point { x, u, value: sc.eval(Which::Value, x, u)? },
                format!("declared lim f = {v}"),
            ),
            (_, Some(b)) if sup_f > b * (1.0 + 1e-12) + SIGN_TOL => (
                Verdict::Violated,
                Witness::Point { x, u, value: sup_f },
                format!("scanned |F| exceeds declared bound {b}"),
            ),
            (Some(_), Some(b)) => (Verdict::Satisfied, scan(sup_f), format!("F_tilde (scan sup |F|) = {sup_f}, declared bound {b}")),
            (Some(_), None) => match a.ratio_at_infinity {
                Some(r) if r != 0.0 => (Verdict::Violated, scan(sup_f), "F grows quadratically".into()),
                _ => (Verdict::Inconclusive, scan(sup_f), "no declared bound on F".into()),
            },
            (None, _) => match a.ratio_at_infinity {
                Some(r) if r != 0.0 => (Verdict::Violated, scan(sup_f), format!("f/u -> {r}, so F is unbounded")),
                _ => (Verdict::Inconclusive, scan(sup_f), "limit of f not declared".into()),
            },
        };
        push(Condition::StrongResonance, verdict, witness, note);
        verdict
    };

    // limsup |u f| ≤ C
    {
        let tail = [-opts.u_max, opts.u_max];
        let (stat, _, _) = sc.max_of(&tail, |x, u| Ok((u * sc.eval(Which::Value, x, u)?).abs()))?;
        let verdict = match (a.uf_at_pos_infinity, a.uf_at_neg_infinity) {
            (Some(p), Some(m)) if p.is_finite() && m.is_finite() => Verdict::Satisfied,
            (Some(p), _) if !p.is_finite() => Verdict::Violated,
            (_, Some(m)) if !m.is_finite() => Verdict::Violated,
            _ => Verdict::Inconclusive,
        };
        push(Condition::BoundedUf, verdict, scan(stat), "statistic is |u f| at |u| = u_max".into());
    }

    // NQC±: 2F − uf → ±∞
    {
        let nqc = |x: Point, u: f64| Ok(2.0 * sc.eval(Which::Potential, x, u)? - u * sc.eval(Which::Value, x, u)?);
        let (at_edge, _, _) = sc.max_of(&[-opts.u_max, opts.u_max], nqc)?;
        for (cond, target) in [(Condition::NqcPlus, f64::INFINITY), (Condition::NqcMinus, f64::NEG_INFINITY)] {
            let verdict = match a.nonquadraticity {
                Some(l) if l == target => Verdict::Satisfied,
                Some(_) => Verdict::Violated,
                None => Verdict::Inconclusive,
            };
            let note = match a.nonquadraticity {
                Some(l) => format!("declared lim (2F - uf) = {l}"),
                None => "limit not declared".into(),
            };
            push(cond, verdict, scan(at_edge), note);
        }
    }

    // HOC±: lim u f ≥ b > 0 / ≤ a < 0, from declared limits only
    let (hoc_plus, hoc_minus) = {
        let (stat, _, _) = sc.max_of(&[-opts.u_max, opts.u_max], |x, u| Ok(u * sc.eval(Which::Value, x, u)?))?;
        let limits = a.uf_at_pos_infinity.zip(a.uf_at_neg_infinity);
        let plus = match limits {
            Some((p, m)) if p > 0.0 && m > 0.0 => Verdict::Satisfied,
            Some(_) => Verdict::Violated,
            None => Verdict::Inconclusive,
        };
        let minus = match limits {
            Some((p, m)) if p < 0.0 && m < 0.0 => Verdict::Satisfied,
            Some(_) => Verdict::Violated,
            None => Verdict::Inconclusive,
        };
        let note = match limits {
            Some((p, m)) => format!("declared lim u f: +inf -> {p}, -inf -> {m}"),
            None => "limits of u f not declared".into(),
        };
        push(Condition::HocPlus, plus, scan(stat), note.clone());
        push(Condition::HocMinus, minus, scan(stat), note);
        (plus, minus)
    };
    {
        let verdict = if ssr == Verdict::Violated || (hoc_plus == Verdict::Violated && hoc_minus == Verdict::Violated) {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        };
        push(
            Condition::SsrHocJoint,
            verdict,
            scan(0.0),
            "a strict HOC limit forces |F| ~ |log u|, which conflicts with a uniform bound on F".into(),
        );
    }

    // BH1: limsup_{u→0} f/u < 0
    {
        let small: Vec<f64> = (3..=8).flat_map(|k| [10f64.powi(-k), -(10f64.powi(-k))]).collect();
        let (worst, x, u) = sc.max_of(&small, |x, u| Ok(sc.eval(Which::Value, x, u)? / u))?;
        let w = Witness::Point { x, u, value: worst };
        match a.ratio_at_zero {
            Some(l) if l < 0.0 && worst < 0.0 => {
                push(Condition::Bh1, Verdict::Satisfied, w, format!("declared limsup f/u at 0 = {l}"))
            }
            Some(l) if l >= 0.0 => push(Condition::Bh1, Verdict::Violated, w, format!("declared limsup f/u at 0 = {l}")),
            _ if worst >= 0.0 => push(Condition::Bh1, Verdict::Violated, w, "f/u >= 0 near the origin".into()),
            _ => push(Condition::Bh1, Verdict::Inconclusive, w, "limit at 0 not declared".into()),
        }
    }

    let spectral = spectrum.zip(mesh);
    let gap = spectrum.and_then(|s| s.gap());

    // BH2: ∫ F(x, a±φ₁) > 0 for some a⁻ < 0 < a⁺
    match spectral {
        Some((s, m)) => {
            let quad = BoundaryQuadrature::new(m);
            let integral = |amp: f64| -> Result<f64> {
                let trace = quad.trace(s.phi(1));
                let mut acc = 0.0;
                for (p, t) in quad.points().iter().zip(trace) {
                    acc += p.weight * sc.eval(Which::Potential, p.x, amp * t)?;
                }
                Ok(acc)
            };
            let amps: Vec<f64> = (0..100).map(|k| 0.1 + (10.0 - 0.1) * k as f64 / 99.0).collect();
            let mut best_plus = (f64::NEG_INFINITY, 0.0);
            let mut best_minus = (f64::NEG_INFINITY, 0.0);
            for &amp in &amps {
                let ip = integral(amp)?;
                if ip > best_plus.0 {
                    best_plus = (ip, amp);
                }
                let im = integral(-amp)?;
                if im > best_minus.0 {
                    best_minus = (im, -amp);
                }
            }
            let verdict = if best_plus.0 > SIGN_TOL && best_minus.0 > SIGN_TOL { Verdict::Satisfied } else { Verdict::Violated };
            push(
                Condition::Bh2,
                verdict,
                Witness::Amplitudes {
                    a_minus: best_minus.1,
                    a_plus: best_plus.1,
                    integral_minus: best_minus.0,
                    integral_plus: best_plus.0,
                },
                "amplitude grid +-[0.1, 10], 100 points each side".into(),
            );
        }
        None => push(Condition::Bh2, Verdict::Inconclusive, scan(0.0), "deferred: needs spectrum and mesh".into()),
    }

    // BH2′: F ≤ (μ₂−μ₁)/2 u² everywhere
    match gap {
        Some(g) => {
            let reach = a.potential_bound.map(|b| (2.0 * b / g).sqrt()).unwrap_or(0.0);
            let wide = symmetric_grid(opts.u_max.max(reach * 1.01), opts.n_samples);
            let (excess, x, u) = sc.max_of(&wide, |x, u| Ok(sc.eval(Which::Potential, x, u)? - 0.5 * g * u * u))?;
            let verdict = if excess > SIGN_TOL {
                Verdict::Violated
            } else if a.potential_bound.is_some() {
                Verdict::Satisfied
            } else {
                Verdict::Inconclusive
            };
            let witness = if verdict == Verdict::Violated {
                Witness::Point { x, u, value: excess }
            } else {
                Witness::Scan { u_max: opts.u_max.max(reach * 1.01), n_samples: opts.n_samples, n_points, statistic: excess }
            };
            push(Condition::Bh2Prime, verdict, witness, format!("gap mu2 - mu1 = {g}"));
        }
        None => push(Condition::Bh2Prime, Verdict::Inconclusive, scan(0.0), "deferred: needs mu2".into()),
    }

    // BH3: 0 ≤ F ≤ (μ₂−μ₁−ε)/2 u² on |u| ≤ r
    match gap {
        Some(g) => {
            let mut found = None;
            let mut last_fail = None;
            for &r in &[1.0, 0.5, 0.25, 0.1, 0.05, 0.01] {
                let local: Vec<f64> = symmetric_grid(r, 201).into_iter().filter(|u| *u != 0.0).collect();
                let (neg, x, u) = sc.max_of(&local, |x, u| Ok(-sc.eval(Which::Potential, x, u)?))?;
                if neg > SIGN_TOL {
                    last_fail = Some(Witness::Point { x, u, value: -neg });
                    continue;
                }
                let (ratio, x, u) = sc.max_of(&local, |x, u| Ok(2.0 * sc.eval(Which::Potential, x, u)? / (u * u)))?;
                let eps = g - ratio;
                if eps > SIGN_TOL {
                    found = Some(Witness::Radius { r, epsilon: eps });
                    break;
                }
                last_fail = Some(Witness::Point { x, u, value: 0.5 * ratio * u * u });
            }
            match (found, last_fail) {
                (Some(w), _) => push(Condition::Bh3, Verdict::Satisfied, w, format!("gap mu2 - mu1 = {g}")),
                (None, Some(w)) => push(Condition::Bh3, Verdict::Violated, w, format!("gap mu2 - mu1 = {g}")),
                (None, None) => unreachable!("radius ladder is non-empty"),
            }
        }
        None => push(Condition::Bh3, Verdict::Inconclusive, scan(0.0), "deferred: needs mu2".into()),
    }

    Ok(HypothesisAudit {
        label: nl.label().to_string(),
        entries,
        u_max: opts.u_max,
        n_samples: opts.n_samples,
        n_points,
        growth_exponent: opts.growth_exponent,
        growth_convention: opts.growth_convention,
    })
}
