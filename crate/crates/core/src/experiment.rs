//! Config-driven experiments: parse a TOML config, run one command, write
//! `<command>.csv`, `<command>.plot.jsonl` and `<command>.meta.json`.
//!
//! Numeric fields accept either numbers or expression strings such as
//! `"sqrt(6)*pi/5"`; `pi` is predefined and functions like `sqrt`, `sin`, `cos`
//! resolve to their `math::` counterparts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use evalexpr::{ContextWithMutableVariables, HashMapContext, Value};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::circle::{self, CircleDisc};
use crate::contour::{self, make_escape, Condition, DeformedContour, ValidationGrid, ValidationReport};
use crate::eigen::{self, Spectrum};
use crate::error::{Error, Result};
use crate::perturb::{self, MatchMode, Parity};
use crate::profile::{make_profile, Domain, ShearProfile};
use crate::resonance::{self, ResonanceOptions, ResonanceRecord, Window};
use crate::segment::{self, SegmentDisc};

pub const WORKERS_ENV: &str = "HYDROSPEC_WORKERS";
const ELLIPTICITY_SAMPLES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Resonances,
    Track,
    Validate,
    SweepAlpha,
    SweepTau,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Spectrum,
        Command::Resonances,
        Command::Track,
        Command::Validate,
        Command::SweepAlpha,
        Command::SweepTau,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Resonances => "resonances",
            Command::Track => "track",
            Command::Validate => "validate",
            Command::SweepAlpha => "sweep-alpha",
            Command::SweepTau => "sweep-tau",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// A number or an arithmetic expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Expr(String),
}

impl Num {
    pub fn eval(&self) -> Result<f64> {
        match self {
            Num::Value(v) => Ok(*v),
            Num::Expr(s) => eval_expr(s),
        }
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num::Value(v)
    }
}

const MATH_FUNCTIONS: [&str; 12] = ["sqrt", "sin", "cos", "tan", "exp", "ln", "abs", "asin", "acos", "atan", "sinh", "cosh"];

/// Evaluates an arithmetic expression with `pi` predefined.
pub fn eval_expr(src: &str) -> Result<f64> {
    let mut expr = src.to_string();
    for f in MATH_FUNCTIONS {
        expr = replace_call(&expr, f, &format!("math::{f}"));
    }
    let mut ctx: HashMapContext = HashMapContext::new();
    ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI))
        .map_err(|e| Error::Config(e.to_string()))?;
    let v = evalexpr::eval_number_with_context(&expr, &ctx)
        .map_err(|e| Error::Config(format!("cannot evaluate `{src}`: {e}")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("`{src}` is not finite")));
    }
    Ok(v)
}

/// Replaces calls `name(` that are not already part of a longer identifier.
fn replace_call(expr: &str, name: &str, with: &str) -> String {
    let pattern = format!("{name}(");
    let mut out = String::with_capacity(expr.len());
    let mut rest = expr;
    while let Some(pos) = rest.find(&pattern) {
        let before = &rest[..pos];
        let prev = before.chars().last();
        out.push_str(before);
        if prev.map_or(true, |ch| !(ch.is_alphanumeric() || ch == '_' || ch == ':')) {
            out.push_str(with);
            out.push('(');
        } else {
            out.push_str(&pattern);
        }
        rest = &rest[pos + pattern.len()..];
    }
    out.push_str(rest);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Segment { a: Num, b: Num },
    Circle { period: Num },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, Num>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, Num>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: Num,
    pub stop: Num,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonGridSpec {
    /// Explicit ascending values starting at 0; overrides the geometric grid.
    #[serde(default)]
    pub values: Option<Vec<Num>>,
    #[serde(default)]
    pub eps_max: Option<Num>,
    #[serde(default)]
    pub levels: Option<usize>,
    /// Drop positive values whose wall layers the grid cannot resolve (segment only).
    #[serde(default)]
    pub resolved: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum WindowSpec {
    Rect { re_min: Num, re_max: Num, im_min: Num, im_max: Num },
    Disk { center: [Num; 2], radius: Num },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub c0: Num,
    pub delta: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub parity: Option<Parity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub escape: Option<EscapeSpec>,
    #[serde(default)]
    pub tau: Option<Num>,
    #[serde(default)]
    pub tau_values: Option<Vec<Num>>,
    #[serde(default)]
    pub alpha: Option<Num>,
    #[serde(default)]
    pub alpha_range: Option<RangeSpec>,
    #[serde(default)]
    pub alpha_values: Option<Vec<Num>>,
    #[serde(default)]
    pub epsilon: Option<Num>,
    #[serde(default)]
    pub epsilon_grid: Option<EpsilonGridSpec>,
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
    #[serde(default)]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub band: Option<Num>,
    #[serde(default)]
    pub cluster_radius: Option<Num>,
    /// Initial guess `[re, im]` for the resonance followed by `track`.
    #[serde(default)]
    pub seed: Option<[Num; 2]>,
    #[serde(default)]
    pub check: Option<CheckSpec>,
    #[serde(default)]
    pub fit: Option<FitSpec>,
    #[serde(default)]
    pub matching: Option<MatchMode>,
    /// Confirm segment resonances with the shooting route (default true).
    #[serde(default)]
    pub shooting: Option<bool>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&src)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.as_ref().and_then(|o| o.dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Fully evaluated parameters; recorded verbatim in the metadata file.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub command: Command,
    pub profile: ShearProfile,
    pub escape: contour::EscapeFunction,
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub epsilon: f64,
    pub epsilon_grid: Vec<f64>,
    pub n: usize,
    pub window: Option<Window>,
    pub band: f64,
    pub cluster_radius: f64,
    pub seed: Option<Complex64>,
    pub check: Option<(f64, f64)>,
    pub fit_degree: usize,
    pub fit_parity: Parity,
    pub matching: MatchMode,
    pub shooting: bool,
}

fn cfg<T>(r: std::result::Result<T, String>) -> Result<T> {
    r.map_err(Error::Config)
}

fn eval_all(v: &[Num]) -> Result<Vec<f64>> {
    v.iter().map(Num::eval).collect()
}

fn eval_map(m: &BTreeMap<String, Num>) -> Result<BTreeMap<String, f64>> {
    m.iter().map(|(k, v)| Ok((k.clone(), v.eval()?))).collect()
}

impl Resolved {
    pub fn from_config(c: &ExperimentConfig) -> Result<Self> {
        let domain = match &c.profile.domain {
            Some(DomainSpec::Segment { a, b }) => Domain::segment(a.eval()?, b.eval()?),
            Some(DomainSpec::Circle { period }) => Domain::circle(period.eval()?),
            None if c.profile.kind == "kolmogorov" => Domain::standard_circle(),
            None => Domain::unit_segment(),
        };
        let profile = make_profile(&c.profile.kind, &eval_map(&c.profile.params)?, domain).map_err(to_config)?;
        let escape = match &c.escape {
            Some(e) => make_escape(&e.family, &eval_map(&e.params)?, domain).map_err(to_config)?,
            None => make_escape("zero", &BTreeMap::new(), domain).map_err(to_config)?,
        };

        let taus = match (c.command, &c.tau, &c.tau_values) {
            (Command::SweepTau, _, Some(v)) => eval_all(v)?,
            (Command::SweepTau, _, None) => return Err(Error::Config("sweep-tau needs `tau_values`".into())),
            (_, Some(t), _) => vec![t.eval()?],
            (_, None, _) => vec![0.0],
        };
        if taus.is_empty() || taus.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("tau values must be >= 0".into()));
        }

        let alphas = match (c.command, &c.alpha, &c.alpha_range, &c.alpha_values) {
            (Command::SweepAlpha, _, _, Some(v)) => eval_all(v)?,
            (Command::SweepAlpha, _, Some(r), None) => {
                let (a, b) = (r.start.eval()?, r.stop.eval()?);
                cfg(if r.count < 2 || !(b > a) {
                    Err(format!("alpha_range needs start < stop and count >= 2, got {a}..{b} x{}", r.count))
                } else {
                    Ok(())
                })?;
                (0..r.count).map(|i| a + (b - a) * i as f64 / (r.count - 1) as f64).collect()
            }
            (Command::SweepAlpha, _, None, None) => {
                return Err(Error::Config("sweep-alpha needs `alpha_range` or `alpha_values`".into()))
            }
            (_, Some(a), _, _) => vec![a.eval()?],
            (Command::Validate, None, _, _) => vec![1.0],
            (_, None, _, _) => return Err(Error::Config("`alpha` is required".into())),
        };
        if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("alpha values must be > 0".into()));
        }

        let epsilon = c.epsilon.as_ref().map(Num::eval).transpose()?.unwrap_or(0.0);
        if !(epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
        }

        let n = c.n.unwrap_or(if domain.is_circle() { 128 } else { segment::DEFAULT_N });

        let seed = c.seed.as_ref().map(|[re, im]| Ok::<_, Error>(Complex64::new(re.eval()?, im.eval()?))).transpose()?;

        let epsilon_grid = match (&c.epsilon_grid, c.command) {
            (Some(g), _) => {
                let values = if let Some(v) = &g.values {
                    eval_all(v)?
                } else {
                    let eps_max = g.eps_max.as_ref().map(Num::eval).transpose()?.unwrap_or(5e-3);
                    if !(eps_max > 0.0) {
                        return Err(Error::Config(format!("eps_max must be > 0, got {eps_max}")));
                    }
                    let levels = g.levels.unwrap_or(3);
                    if g.resolved.unwrap_or(true) && !domain.is_circle() {
                        let c1 = seed.unwrap_or_default();
                        perturb::resolved_epsilon_grid(&profile, alphas[0], c1, n, eps_max, levels)
                    } else {
                        perturb::default_epsilon_grid(eps_max, levels)
                    }
                };
                if values.first() != Some(&0.0) || values.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("epsilon grid must start at 0 and increase strictly".into()));
                }
                values
            }
            (None, Command::Track) => return Err(Error::Config("track needs `epsilon_grid`".into())),
            (None, _) => Vec::new(),
        };
        if c.command == Command::Track && seed.is_none() {
            return Err(Error::Config("track needs `seed = [re, im]`".into()));
        }

        let window = match &c.window {
            Some(WindowSpec::Rect { re_min, re_max, im_min, im_max }) => {
                let w = Window::rect(re_min.eval()?, re_max.eval()?, im_min.eval()?, im_max.eval()?);
                if let Window::Rect { re_min, re_max, im_min, im_max } = w {
                    if !(re_min < re_max && im_min < im_max) {
                        return Err(Error::Config("window bounds must be ordered".into()));
                    }
                }
                Some(w)
            }
            Some(WindowSpec::Disk { center, radius }) => {
                let r = radius.eval()?;
                if !(r > 0.0) {
                    return Err(Error::Config("window radius must be > 0".into()));
                }
                Some(Window::disk(Complex64::new(center[0].eval()?, center[1].eval()?), r))
            }
            None => None,
        };
        if matches!(c.command, Command::Resonances | Command::SweepAlpha | Command::SweepTau) && window.is_none() {
            return Err(Error::Config(format!("{} needs a `window`", c.command)));
        }

        let band = c.band.as_ref().map(Num::eval).transpose()?.unwrap_or(resonance::DEFAULT_BAND);
        let cluster_radius =
            c.cluster_radius.as_ref().map(Num::eval).transpose()?.unwrap_or(resonance::DEFAULT_CLUSTER_RADIUS);
        if !(band > 0.0 && cluster_radius > 0.0) {
            return Err(Error::Config("band and cluster_radius must be > 0".into()));
        }
        let check = c.check.as_ref().map(|k| Ok::<_, Error>((k.c0.eval()?, k.delta.eval()?))).transpose()?;
        if c.command == Command::Validate && check.is_none() {
            return Err(Error::Config("validate needs `check = { c0, delta }`".into()));
        }
        if let Some((_, delta)) = check {
            if !(delta > 0.0) {
                return Err(Error::Config("check.delta must be > 0".into()));
            }
        }
        let fit_degree = c.fit.as_ref().and_then(|f| f.degree).unwrap_or(2);
        let fit_parity = c.fit.as_ref().and_then(|f| f.parity).unwrap_or(Parity::All);
        if fit_degree == 0 {
            return Err(Error::Config("fit degree must be >= 1".into()));
        }
        Ok(Resolved {
            command: c.command,
            profile,
            escape,
            taus,
            alphas,
            epsilon,
            epsilon_grid,
            n,
            window,
            band,
            cluster_radius,
            seed,
            check,
            fit_degree,
            fit_parity,
            matching: c.matching.unwrap_or_default(),
            shooting: c.shooting.unwrap_or(true),
        })
    }

    fn contour(&self, tau: f64) -> Result<DeformedContour> {
        DeformedContour::new(self.escape, tau).map_err(to_config)
    }

    fn resonance_options(&self) -> ResonanceOptions {
        ResonanceOptions { band: self.band, cluster_radius: self.cluster_radius, shooting: self.shooting, keep_states: false }
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::Profile(_) | Error::Escape(_) | Error::Config(_) => e,
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

/// Process exit status for an error: 2 config, 3 contour validation, 4 numerical, 1 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Profile(_) | Error::Escape(_) | Error::InvalidArgument(_) => 2,
        Error::Contour(_) => 3,
        Error::Singular { .. } | Error::EigenNonConvergence(_) | Error::Numerical { .. } => 4,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
    }
}

/// In-memory outputs of one run; written to disk only when complete.
#[derive(Clone, Debug)]
pub struct Outputs {
    pub command: Command,
    pub csv: String,
    pub plot: String,
    pub meta: serde_json::Value,
    /// Set by `validate` when a condition fails; outputs are still written.
    pub failed_validation: Option<ValidationReport>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub rows: usize,
}

#[derive(Serialize)]
struct PlotPoint<'a> {
    series: &'a str,
    param: &'a str,
    value: f64,
    re: f64,
    im: f64,
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn render(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn by_re_im(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

struct Plot(String);

impl Plot {
    fn push(&mut self, series: &str, param: &str, value: f64, z: Complex64) -> Result<()> {
        let p = PlotPoint { series, param, value, re: z.re, im: z.im };
        self.0.push_str(&serde_json::to_string(&p)?);
        self.0.push('\n');
        Ok(())
    }

    fn ellipticity(&mut self, profile: &ShearProfile, contour: &DeformedContour, param: &str, value: f64) -> Result<()> {
        for z in segment::ellipticity_samples(profile, contour, ELLIPTICITY_SAMPLES) {
            self.push("ellipticity", param, value, z)?;
        }
        Ok(())
    }
}

fn spectrum_at(r: &Resolved, contour: &DeformedContour, alpha: f64, epsilon: f64) -> Result<Spectrum> {
    if r.profile.domain.is_circle() {
        let disc = CircleDisc::new(&r.profile, contour, alpha, r.n)?;
        eigen::eig(&disc.q(epsilon)?, true)
    } else {
        let disc = SegmentDisc::new(&r.profile, contour, alpha, r.n)?;
        let p = disc.pencil(epsilon)?;
        eigen::eig_pencil(&p.a, &p.b, true)
    }
}

fn check_contour(r: &Resolved, contour: &DeformedContour) -> Result<Option<ValidationReport>> {
    let Some((c0, delta)) = r.check else {
        return Ok(None);
    };
    let report = contour::validate_contour(&r.profile, contour, c0, delta, ValidationGrid::default()).map_err(to_config)?;
    if !report.ok {
        return Err(Error::Contour(report));
    }
    Ok(Some(report))
}

fn resonance_row(lead: Option<f64>, rec: &ResonanceRecord) -> Vec<String> {
    let mut row: Vec<String> = lead.map(num).into_iter().collect();
    row.extend([
        num(rec.c.re),
        num(rec.c.im),
        rec.multiplicity.to_string(),
        num(rec.dist_to_curve),
        rec.wronskian_abs.map(num).unwrap_or_default(),
    ]);
    row
}

fn sort_records(records: &mut [ResonanceRecord]) {
    records.sort_by(|a, b| by_re_im(&a.c, &b.c));
}

/// Runs the experiment without touching the file system.
pub fn execute(config: &ExperimentConfig) -> Result<Outputs> {
    let r = Resolved::from_config(config)?;
    let mut plot = Plot(String::new());
    let mut failed_validation = None;
    let mut meta = serde_json::Map::new();
    meta.insert("tool".into(), json!({ "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") }));
    meta.insert("config".into(), serde_json::to_value(config)?);
    meta.insert("resolved".into(), serde_json::to_value(&r)?);
    if r.profile.domain.is_circle() {
        let probe = circle::FourierGrid::new(r.n).and_then(|g| circle::convention_self_test(&g));
        meta.insert(
            "fourier_convention".into(),
            json!({ "convention": circle::CONVENTION, "self_test": probe.as_ref().map(|_| "pass".to_string()).unwrap_or_else(|e| e.to_string()) }),
        );
        probe?;
    }

    let table = match r.command {
        Command::Spectrum => {
            let contour = r.contour(r.taus[0])?;
            if let Some(rep) = check_contour(&r, &contour)? {
                meta.insert("validation".into(), serde_json::to_value(rep)?);
            }
            let s = spectrum_at(&r, &contour, r.alphas[0], r.epsilon)?;
            let mut idx: Vec<usize> = (0..s.len()).collect();
            idx.sort_by(|&i, &j| by_re_im(&s.eigenvalues[i], &s.eigenvalues[j]));
            let mut t = Table::new(&["re_c", "im_c", "residual"]);
            for i in idx {
                let z = s.eigenvalues[i];
                t.rows.push(vec![num(z.re), num(z.im), num(s.residuals[i])]);
                plot.push("spectrum", "epsilon", r.epsilon, z)?;
            }
            plot.ellipticity(&r.profile, &contour, "tau", contour.tau)?;
            meta.insert("max_residual".into(), json!(s.max_residual()));
            t
        }
        Command::Resonances => {
            let contour = r.contour(r.taus[0])?;
            if let Some(rep) = check_contour(&r, &contour)? {
                meta.insert("validation".into(), serde_json::to_value(rep)?);
            }
            let window = r.window.expect("checked");
            let mut recs = resonance::resonances_in_window(&r.profile, &contour, r.alphas[0], r.n, window, r.resonance_options())?;
            sort_records(&mut recs);
            let mut t = Table::new(&["re_c", "im_c", "multiplicity", "dist_to_curve", "wronskian_abs"]);
            for rec in &recs {
                t.rows.push(resonance_row(None, rec));
                plot.push("resonances", "alpha", r.alphas[0], rec.c)?;
            }
            plot.ellipticity(&r.profile, &contour, "tau", contour.tau)?;
            meta.insert("records".into(), serde_json::to_value(&recs)?);
            t
        }
        Command::Track => track(&r, &mut plot, &mut meta)?,
        Command::Validate => {
            let contour = r.contour(r.taus[0])?;
            let (c0, delta) = r.check.expect("validate has a check");
            let report = contour::validate_contour(&r.profile, &contour, c0, delta, ValidationGrid::default()).map_err(to_config)?;
            if !report.ok {
                failed_validation = Some(report.clone());
            }
            let mut t = Table::new(&["condition", "passed", "x", "value"]);
            for cond in [Condition::C1Slope, Condition::C2Sign, Condition::C3Ellipticity, Condition::C4ImaginaryPart] {
                let worst = report.failures.iter().find(|v| v.condition == cond);
                t.rows.push(vec![
                    cond.label().to_string(),
                    (!report.failed(cond)).to_string(),
                    worst.map(|v| num(v.x)).unwrap_or_default(),
                    worst.map(|v| num(v.value)).unwrap_or_default(),
                ]);
            }
            plot.ellipticity(&r.profile, &contour, "tau", contour.tau)?;
            meta.insert("validation".into(), serde_json::to_value(&report)?);
            t
        }
        Command::SweepAlpha => {
            let contour = r.contour(r.taus[0])?;
            if let Some(rep) = check_contour(&r, &contour)? {
                meta.insert("validation".into(), serde_json::to_value(rep)?);
            }
            let window = r.window.expect("checked");
            let results = r
                .alphas
                .par_iter()
                .map(|&a| resonance::resonances_in_window(&r.profile, &contour, a, r.n, window, r.resonance_options()))
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(&["alpha", "re_c", "im_c", "multiplicity", "dist_to_curve", "wronskian_abs"]);
            for (&a, mut recs) in r.alphas.iter().zip(results) {
                sort_records(&mut recs);
                for rec in &recs {
                    t.rows.push(resonance_row(Some(a), rec));
                    plot.push("resonances", "alpha", a, rec.c)?;
                }
            }
            plot.ellipticity(&r.profile, &contour, "tau", contour.tau)?;
            t
        }
        Command::SweepTau => {
            let contours = r.taus.iter().map(|&t| r.contour(t)).collect::<Result<Vec<_>>>()?;
            let mut reports = Vec::new();
            for c in &contours {
                if let Some(rep) = check_contour(&r, c)? {
                    reports.push(rep);
                }
            }
            if !reports.is_empty() {
                meta.insert("validation".into(), serde_json::to_value(&reports)?);
            }
            let window = r.window.expect("checked");
            let results = contours
                .par_iter()
                .map(|c| resonance::resonances_in_window(&r.profile, c, r.alphas[0], r.n, window, r.resonance_options()))
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(&["tau", "re_c", "im_c", "multiplicity", "dist_to_curve", "wronskian_abs"]);
            for (c, mut recs) in contours.iter().zip(results) {
                sort_records(&mut recs);
                for rec in &recs {
                    t.rows.push(resonance_row(Some(c.tau), rec));
                    plot.push("resonances", "tau", c.tau, rec.c)?;
                }
                plot.ellipticity(&r.profile, c, "tau", c.tau)?;
            }
            t
        }
    };
    meta.insert("rows".into(), json!(table.rows.len()));
    Ok(Outputs { command: r.command, csv: table.render()?, plot: plot.0, meta: serde_json::Value::Object(meta), failed_validation })
}

fn track(r: &Resolved, plot: &mut Plot, meta: &mut serde_json::Map<String, serde_json::Value>) -> Result<Table> {
    let contour = r.contour(r.taus[0])?;
    if let Some(rep) = check_contour(r, &contour)? {
        meta.insert("validation".into(), serde_json::to_value(rep)?);
    }
    let alpha = r.alphas[0];
    let guess = r.seed.expect("checked");
    let s0 = spectrum_at(r, &contour, alpha, 0.0)?;
    let (_, nearest) = s0.nearest(guess).ok_or_else(|| Error::numerical("track", "empty spectrum"))?;
    let c1 = if r.profile.domain.is_circle() {
        nearest
    } else {
        resonance::refine_resonance(&r.profile, &contour, alpha, nearest).map(|x| x.c).unwrap_or(nearest)
    };
    let branch = perturb::track_branch(&r.profile, &contour, alpha, c1, &r.epsilon_grid, r.n, r.matching)?;
    let mut t = Table::new(&["epsilon", "re_c", "im_c", "match_dist"]);
    for ((&e, &c), &d) in branch.epsilon.iter().zip(&branch.c).zip(&branch.match_dist) {
        t.rows.push(vec![num(e), num(c.re), num(c.im), num(d)]);
        plot.push("branch", "epsilon", e, c)?;
    }
    plot.ellipticity(&r.profile, &contour, "tau", contour.tau)?;
    meta.insert("seed_resonance".into(), json!([c1.re, c1.im]));
    meta.insert("bisections".into(), json!(branch.bisections));
    let fit = perturb::fit_taylor(&branch, r.fit_degree, r.fit_parity);
    meta.insert(
        "fit".into(),
        match fit {
            Ok(f) => json!({
                "coefficients": f.coefficients.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "residual": f.residual,
                "condition": f.condition,
            }),
            Err(e) => json!({ "error": e.to_string() }),
        },
    );
    let prediction = if r.profile.domain.is_circle() {
        perturb::second_order_circle(&r.profile, &contour, alpha, c1, r.n)
            .map(|s| json!({ "order": 2, "coefficient": [s.ctilde.re, s.ctilde.im] }))
    } else {
        perturb::first_order_segment(&r.profile, &contour, alpha, c1, r.n)
            .map(|f| json!({ "order": 1, "coefficient": [f.cdot.re, f.cdot.im] }))
    };
    meta.insert("prediction".into(), prediction.unwrap_or_else(|e| json!({ "error": e.to_string() })));
    Ok(t)
}

/// Writes `<command>.csv`, `<command>.plot.jsonl` and `<command>.meta.json` into `dir`.
pub fn write_outputs(out: &Outputs, dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(dir)?;
    let stem = out.command.name();
    let files = vec![
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}.plot.jsonl")),
        dir.join(format!("{stem}.meta.json")),
    ];
    fs::write(&files[0], &out.csv)?;
    fs::write(&files[1], &out.plot)?;
    fs::write(&files[2], serde_json::to_string_pretty(&out.meta)? + "\n")?;
    let rows = out.csv.lines().count().saturating_sub(1);
    Ok(RunSummary { files, rows })
}

/// Worker pool sized by `HYDROSPEC_WORKERS` (all cores when unset).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::Config(format!("{WORKERS_ENV} must be positive")));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

/// Executes `config` and writes its outputs into `dir`; nothing is written on failure.
///
/// A failing `validate` run is the exception: its report is written and then returned as
/// [`Error::Contour`].
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    faer::set_global_parallelism(faer::Par::Seq);
    let pool = worker_pool()?;
    let out = pool.install(|| execute(config))?;
    let summary = write_outputs(&out, dir)?;
    match out.failed_validation {
        Some(report) => Err(Error::Contour(report)),
        None => Ok(summary),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions() {
        assert!((eval_expr("sqrt(6)*pi/5").unwrap() - 6f64.sqrt() * std::f64::consts::PI / 5.0).abs() < 1e-15);
        assert_eq!(eval_expr("2^3").unwrap(), 8.0);
        assert!((eval_expr("cos(pi)").unwrap() + 1.0).abs() < 1e-15);
        assert!((eval_expr("math::sqrt(4)").unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(eval_expr("3").unwrap(), 3.0);
        assert!(eval_expr("nonsense(").is_err());
        assert!(eval_expr("1/0").is_err());
    }

    #[test]
    fn call_replacement_respects_identifiers() {
        assert_eq!(replace_call("asin(x)+sin(y)", "sin", "math::sin"), "asin(x)+math::sin(y)");
        assert_eq!(replace_call("math::sin(y)", "sin", "math::sin"), "math::sin(y)");
    }

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("plot".parse::<Command>().is_err());
    }

    #[test]
    fn resolves_a_resonance_config() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            command = "resonances"
            N = 48
            tau = 0.1
            alpha = "sqrt(6)*pi/5"
            window = { center = [0, 0], radius = 0.3 }
            [profile]
            kind = "trig"
            params = { omega = "0.7*pi", theta = "pi/2" }
            [escape]
            family = "trig"
            params = { omega = "0.7*pi", window = 1 }
            "#,
        )
        .unwrap();
        let r = Resolved::from_config(&cfg).unwrap();
        assert_eq!(r.n, 48);
        assert!(matches!(r.window, Some(Window::Disk { radius, .. }) if radius == 0.3));
        assert!((r.alphas[0] - 6f64.sqrt() * std::f64::consts::PI / 5.0).abs() < 1e-15);
    }

    #[test]
    fn config_errors_exit_with_2() {
        let bad = [
            "command = \"spectrum\"\n[profile]\nkind = \"couette\"\n",
            "command = \"spectrum\"\nalpha = -1\n[profile]\nkind = \"couette\"\n",
            "command = \"track\"\nalpha = 1\nseed = [0, 0]\nepsilon_grid = { eps_max = -1 }\n[profile]\nkind = \"couette\"\n",
            "command = \"spectrum\"\nalpha = 1\nbogus = 3\n[profile]\nkind = \"couette\"\n",
            "command = \"spectrum\"\nalpha = 1\n[profile]\nkind = \"poiseuille\"\n",
        ];
        for src in bad {
            let e = ExperimentConfig::from_toml(src).and_then(|c| Resolved::from_config(&c)).unwrap_err();
            assert_eq!(exit_code(&e), 2, "{src}: {e}");
        }
    }
}
