//! One function per subcommand. Each writes its artifacts and returns
//! whether every check it ran passed, together with the constants it used.

use std::path::{Path, PathBuf};

use paramsym::calculus::{leibniz_expr, leibniz_truncated};
use paramsym::ellipticity::{check_elliptic, parametrix, Notion, Verdict, ELLIPTIC_CONSTANT};
use paramsym::infinity::{expand_at_infinity, verify_remainder, PolySymbol};
use paramsym::numeric::{log_grid, loglog_slope};
use paramsym::oracle::fit::{CONDITION_LIMIT, RESIDUAL_LIMIT};
use paramsym::oracle::{eigensum_trace, fit_asymptotics, quad_kernel_diagonal, BasisTerm};
use paramsym::symbol::eval::CANCELLATION;
use paramsym::symbol::json::to_node;
use paramsym::symbol::{verify_class, ClassTag, Expr, Family, GridSpec, C64};
use paramsym::trace::resolvent::{homogeneous_parts, resolvent_trace_expansion, ResolventOptions};
use paramsym::trace::{trace_coefficients, TraceOptions, TracePoint};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::io::{at, fmt, parse_point, parse_symbol, read_columns, read_input, CliError, CliResult, Input, Output};

/// Settings shared by every subcommand.
pub struct Context {
    pub grid: (f64, f64, usize),
    /// Whether `--grid` was given explicitly.
    pub grid_given: bool,
    pub tol: Option<f64>,
}

impl Context {
    pub fn mus(&self) -> Vec<f64> {
        log_grid(self.grid.0, self.grid.1, self.grid.2)
    }

    fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

pub struct Outcome {
    pub passed: bool,
    pub constants: Value,
}

fn outcome(passed: bool, constants: Value) -> CliResult<Outcome> {
    Ok(Outcome { passed, constants })
}

fn c64(v: C64) -> Value {
    json!({ "re": v.re, "im": v.im })
}

fn load(out: &mut Output, path: &Path) -> CliResult<Input> {
    let input = read_input(path)?;
    out.record_input(&input);
    Ok(input)
}

fn load_symbol(out: &mut Output, path: &Path) -> CliResult<crate::io::SymbolFile> {
    let input = load(out, path)?;
    parse_symbol(&input)
}

fn excision_name(p: &PolySymbol) -> Value {
    json!(format!("{:?}", p.excision).to_lowercase())
}

fn grid_json(g: &GridSpec) -> Value {
    json!({
        "points_per_decade": g.points_per_decade,
        "min": g.min,
        "max": g.max,
        "fit_from": g.fit_from,
        "fit_to": g.fit_to,
        "slope_tolerance": g.slope_tolerance,
    })
}

pub fn expand(out: &mut Output, ctx: &Context, symbol: &Path, terms: usize, verify: bool, depth: u32) -> CliResult<Outcome> {
    let s = load_symbol(out, symbol)?;
    let poly = s.require_poly(symbol)?;
    let e = at(symbol, expand_at_infinity(poly, terms))?;
    let grid = GridSpec::with_density(ctx.grid.2);
    let coefficients: Vec<Value> = e
        .coeffs
        .iter()
        .zip(&e.exponents)
        .zip(e.coefficient_degrees())
        .map(|((c, x), deg)| json!({ "exponent": x, "expr": to_node(c), "polynomial_degrees": deg }))
        .collect();
    let mut passed = true;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    if verify {
        for n in 1..=terms {
            let rep = at(symbol, verify_remainder(&s.expr, &e, n, depth, &grid))?;
            passed &= rep.passed;
            for est in &rep.estimates {
                rows.push(vec![
                    n.to_string(),
                    format!("{:?}", est.alpha),
                    format!("{:?}", est.beta),
                    est.j.to_string(),
                    fmt(est.max_ratio),
                    fmt(est.slope),
                    est.passed.to_string(),
                ]);
            }
            checks.push(json!({ "truncation": n, "tag": rep.tag, "max_slope": rep.max_slope, "passed": rep.passed }));
        }
        out.write_csv("remainder.csv", &["truncation", "alpha", "beta", "j", "max_ratio", "slope", "passed"], &rows)?;
    }
    out.write_json(
        "expansion.json",
        &json!({
            "kind": "infinity_expansion",
            "dim": e.dim,
            "order": e.order,
            "regularity": e.regularity,
            "truncation": e.truncation,
            "remainder_tag": e.remainder_tag,
            "coefficients": coefficients,
            "remainder_checks": checks,
        }),
    )?;
    outcome(passed, json!({ "excision": excision_name(poly), "class_grid": grid_json(&grid), "depth": depth }))
}

pub fn leibniz(out: &mut Output, a: &Path, b: &Path, terms: usize) -> CliResult<Outcome> {
    let sa = load_symbol(out, a)?;
    let sb = load_symbol(out, b)?;
    if sa.dim != sb.dim {
        return Err(CliError::Usage(format!("dimensions differ: {} and {}", sa.dim, sb.dim)));
    }
    let (expr, tag) = match (&sa.poly, &sb.poly) {
        (Some(pa), Some(pb)) => {
            let t = leibniz_truncated(&sa.expr, &pa.tag(), &sb.expr, &pb.tag(), sa.dim, terms)?;
            (t.main, Some(t.tag))
        }
        _ => (leibniz_expr(&sa.expr, &sb.expr, sa.dim, terms)?, None),
    };
    out.write_json("product.json", &json!({ "dim": sa.dim, "terms": terms, "tag": tag, "expr": to_node(&expr) }))?;
    outcome(true, json!({}))
}

pub fn parametrix_cmd(out: &mut Output, symbol: &Path, terms: usize, notion: &str) -> CliResult<Outcome> {
    let s = load_symbol(out, symbol)?;
    let poly = s.require_poly(symbol)?;
    let notion = Notion::parse(notion)?;
    let p = at(symbol, parametrix(poly, notion, terms))?;
    let d = &p.defect;
    let rows: Vec<Vec<String>> =
        d.sizes.iter().zip(&d.right).zip(&d.left).map(|((s, r), l)| vec![fmt(*s), fmt(*r), fmt(*l)]).collect();
    out.write_csv("defect.csv", &["size", "right", "left"], &rows)?;
    out.write_json(
        "parametrix.json",
        &json!({
            "notion": notion,
            "tag": p.tag,
            "truncation": p.truncation,
            "defect": p.defect,
            "symbol": to_node(&p.symbol),
            "limit_ladder": p.limit_ladder.iter().map(to_node).collect::<Vec<_>>(),
        }),
    )?;
    outcome(true, json!({ "excision": excision_name(poly), "elliptic_constant": ELLIPTIC_CONSTANT }))
}

pub enum TraceInput {
    Symbol { path: PathBuf, point: Option<String> },
    Operator { p: PathBuf, q: Option<PathBuf>, power: u32 },
}

/// Differential order of an operator symbol.
fn operator_order(p: &Expr, dim: usize) -> CliResult<i64> {
    let parts = homogeneous_parts(p, dim)?;
    parts.iter().rposition(|e| !e.is_zero()).map(|m| m as i64).ok_or_else(|| CliError::Usage("operator symbol is zero".into()))
}

fn load_operator(out: &mut Output, p: &Path, q: Option<&Path>) -> CliResult<(Expr, Expr, usize)> {
    let sp = load_symbol(out, p)?;
    let q = match q {
        Some(path) => {
            let sq = load_symbol(out, path)?;
            if sq.dim != sp.dim {
                return Err(CliError::Usage(format!("dimensions differ: {} and {}", sp.dim, sq.dim)));
            }
            sq.expr
        }
        None => Expr::one(),
    };
    Ok((sp.expr, q, sp.dim))
}

fn trace_rows(mus: &[f64], expansion: &[C64], oracle: &[C64]) -> Vec<Vec<String>> {
    mus.iter()
        .zip(expansion.iter().zip(oracle))
        .map(|(mu, (e, o))| vec![fmt(*mu), fmt(e.re), fmt(e.im), fmt(o.re), fmt(o.im), fmt((e - o).norm())])
        .collect()
}

const TRACE_HEADER: [&str; 6] = ["mu", "expansion_re", "expansion_im", "oracle_re", "oracle_im", "residual"];

fn terms_json<'a>(terms: impl Iterator<Item = (f64, bool, C64)> + 'a) -> Vec<Value> {
    terms.map(|(exponent, log, v)| json!({ "exponent": exponent, "log": log, "value": c64(v) })).collect()
}

pub fn trace(out: &mut Output, ctx: &Context, input: TraceInput, terms: usize) -> CliResult<Outcome> {
    let mus = ctx.mus();
    match input {
        TraceInput::Symbol { path, point } => {
            let s = load_symbol(out, &path)?;
            let poly = s.require_poly(&path)?;
            let x = match point {
                Some(p) => parse_point(&p, s.dim)?,
                None if s.expr.depends_on_x() => return Err(CliError::Usage("x-dependent symbols need --point".into())),
                None => vec![0.0; s.dim],
            };
            let mut opts = TraceOptions::new(terms);
            opts.tol = ctx.tol_or(opts.tol);
            let quad_tol = ctx.tol_or(1e-12).max(1e-12);
            let e = at(&path, trace_coefficients(poly, &opts, &TracePoint::At(x.clone())))?;
            let full = &s.expr;
            let oracle: Vec<C64> = mus
                .par_iter()
                .map(|&mu| quad_kernel_diagonal(full, s.dim, &x, mu, quad_tol).map(|q| q.value))
                .collect::<paramsym::Result<_>>()?;
            let values: Vec<C64> = mus.iter().map(|&mu| e.value(mu)).collect();
            out.write_csv("trace.csv", &TRACE_HEADER, &trace_rows(&mus, &values, &oracle))?;
            out.write_json(
                "trace.json",
                &json!({
                    "kind": "kernel_diagonal",
                    "variable": "mu",
                    "m": 1,
                    "dim": e.dim,
                    "point": x,
                    "error_exponent": e.error_exponent,
                    "terms": terms_json(e.terms.iter().map(|t| (t.exponent, t.log, t.value))),
                    "provenance": e.provenance,
                }),
            )?;
            outcome(
                true,
                json!({ "excision": excision_name(poly), "trace_options": opts, "quadrature_tolerance": quad_tol }),
            )
        }
        TraceInput::Operator { p, q, power } => {
            let (p, q, dim) = load_operator(out, &p, q.as_deref())?;
            let mut opts = ResolventOptions::new(power, terms);
            opts.quad_tol = ctx.tol_or(opts.quad_tol);
            let r = resolvent_trace_expansion(&p, &q, dim, &opts)?;
            let sum_tol = ctx.tol_or(1e-13);
            let oracle: Vec<C64> = mus
                .par_iter()
                .map(|&mu| eigensum_trace(&p, &q, power, C64::new(mu.powi(r.m as i32), 0.0), dim, sum_tol).map(|s| s.trace))
                .collect::<paramsym::Result<_>>()?;
            let values: Vec<C64> = mus.iter().map(|&mu| r.value(C64::new(mu.powi(r.m as i32), 0.0))).collect();
            out.write_csv("trace.csv", &TRACE_HEADER, &trace_rows(&mus, &values, &oracle))?;
            out.write_json(
                "trace.json",
                &json!({
                    "kind": "resolvent_trace",
                    "variable": "lambda",
                    "m": r.m,
                    "dim": r.dim,
                    "ell": r.ell,
                    "error_exponent": r.error_exponent,
                    "terms": terms_json(r.terms.iter().map(|t| (t.exponent, t.log, t.value))),
                    "thetas": r.thetas,
                    "spread": r.spread,
                    "off_multiple_max": r.off_multiple_max,
                    "provenance": r.mu_expansion.provenance,
                }),
            )?;
            outcome(true, json!({ "resolvent_options": opts, "eigensum_tolerance": sum_tol }))
        }
    }
}

pub fn verify(
    out: &mut Output,
    ctx: &Context,
    symbol: &Path,
    family: &str,
    depth: u32,
    elliptic: Option<&str>,
) -> CliResult<Outcome> {
    let s = load_symbol(out, symbol)?;
    let poly = s.require_poly(symbol)?;
    let tag = ClassTag::new(Family::parse(family)?, poly.order, poly.regularity)?;
    let mut grid = GridSpec::with_density(ctx.grid.2);
    if let Some(t) = ctx.tol {
        grid.slope_tolerance = t;
    }
    let rep = at(symbol, verify_class(&s.expr, s.dim, &tag, depth, &grid))?;
    let mut passed = rep.passed;
    let ell = match elliptic {
        Some(n) => {
            let r = at(symbol, check_elliptic(poly, Notion::parse(n)?))?;
            passed &= r.verdict != Verdict::Fail;
            Some(r)
        }
        None => None,
    };
    out.write_json("verify.json", &json!({ "class": rep, "ellipticity": ell, "passed": passed }))?;
    outcome(passed, json!({ "class_grid": grid_json(&grid), "depth": depth, "elliptic_constant": ELLIPTIC_CONSTANT }))
}

pub fn oracle_quad(out: &mut Output, ctx: &Context, symbol: &Path, point: Option<&str>) -> CliResult<Outcome> {
    let s = load_symbol(out, symbol)?;
    let x = match point {
        Some(p) => parse_point(p, s.dim)?,
        None => vec![0.0; s.dim],
    };
    let tol = ctx.tol_or(1e-12);
    let res = ctx
        .mus()
        .par_iter()
        .map(|&mu| quad_kernel_diagonal(&s.expr, s.dim, &x, mu, tol).map(|q| (mu, q)))
        .collect::<paramsym::Result<Vec<_>>>();
    let rows: Vec<Vec<String>> =
        at(symbol, res)?.into_iter().map(|(mu, q)| vec![fmt(mu), fmt(q.value.re), fmt(q.value.im), fmt(q.error)]).collect();
    out.write_csv("quad.csv", &["mu", "oracle_re", "oracle_im", "error"], &rows)?;
    outcome(true, json!({ "quadrature_tolerance": tol }))
}

pub fn oracle_eigensum(out: &mut Output, ctx: &Context, p: &Path, q: Option<&Path>, power: u32) -> CliResult<Outcome> {
    let (p, q, dim) = load_operator(out, p, q)?;
    let m = operator_order(&p, dim)?;
    let tol = ctx.tol_or(1e-13);
    let res = ctx
        .mus()
        .par_iter()
        .map(|&mu| eigensum_trace(&p, &q, power, C64::new(mu.powi(m as i32), 0.0), dim, tol).map(|s| (mu, s)))
        .collect::<paramsym::Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = res
        .into_iter()
        .map(|(mu, s)| vec![fmt(mu), fmt(mu.powi(m as i32)), fmt(s.trace.re), fmt(s.trace.im), fmt(s.tail_bound)])
        .collect();
    out.write_csv("eigensum.csv", &["mu", "lambda", "oracle_re", "oracle_im", "tail_bound"], &rows)?;
    outcome(true, json!({ "eigensum_tolerance": tol, "m": m }))
}

/// Parses a basis such as `-1,-2,log-2`.
fn parse_basis(s: &str) -> CliResult<Vec<BasisTerm>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let (log, num) = match t.strip_prefix("log") {
                Some(rest) => (true, rest),
                None => (false, t),
            };
            num.trim()
                .parse::<f64>()
                .map(|e| if log { BasisTerm::log_power(e) } else { BasisTerm::power(e) })
                .map_err(|_| CliError::Usage(format!("basis term {t:?} must be an exponent, optionally prefixed by 'log'")))
        })
        .collect()
}

pub fn oracle_fit(out: &mut Output, data: &Path, basis: &str, column: &str) -> CliResult<Outcome> {
    let input = load(out, data)?;
    let basis = parse_basis(basis)?;
    let cols = read_columns(&input, &["mu", column])?;
    let fit = at(data, fit_asymptotics(&cols[0], &cols[1], &basis))?;
    let passed = !fit.poor_fit && !fit.ill_conditioned;
    out.write_json("fit.json", &json!({ "column": column, "fit": fit }))?;
    outcome(passed, json!({ "condition_limit": CONDITION_LIMIT, "residual_limit": RESIDUAL_LIMIT }))
}

/// Allowed excess of the residual slope over the predicted one.
pub const SLOPE_MARGIN: f64 = 0.25;

struct Artifact {
    variable: String,
    m: f64,
    error_exponent: f64,
    terms: Vec<(f64, bool, C64)>,
}

fn parse_artifact(input: &Input) -> CliResult<Artifact> {
    let bad = |message: &str| CliError::Input { path: input.path.clone(), message: message.into() };
    let v: Value = serde_json::from_str(&input.text).map_err(|e| bad(&e.to_string()))?;
    let variable = v.get("variable").and_then(Value::as_str).unwrap_or("mu").to_string();
    if variable != "mu" && variable != "lambda" {
        return Err(bad("variable must be \"mu\" or \"lambda\""));
    }
    let m = v.get("m").and_then(Value::as_f64).unwrap_or(1.0);
    let error_exponent = v.get("error_exponent").and_then(Value::as_f64).ok_or_else(|| bad("missing error_exponent"))?;
    let terms = v
        .get("terms")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing terms"))?
        .iter()
        .map(|t| {
            let e = t.get("exponent").and_then(Value::as_f64).ok_or_else(|| bad("term without exponent"))?;
            let log = t.get("log").and_then(Value::as_bool).unwrap_or(false);
            let val = t.get("value").ok_or_else(|| bad("term without value"))?;
            let re = val.get("re").and_then(Value::as_f64).ok_or_else(|| bad("value without re"))?;
            let im = val.get("im").and_then(Value::as_f64).unwrap_or(0.0);
            Ok((e, log, C64::new(re, im)))
        })
        .collect::<CliResult<_>>()?;
    Ok(Artifact { variable, m, error_exponent, terms })
}

impl Artifact {
    fn value(&self, mu: f64) -> C64 {
        let t = if self.variable == "lambda" { mu.powf(self.m) } else { mu };
        self.terms.iter().map(|(e, log, v)| v * t.powf(*e) * if *log { t.ln() } else { 1.0 }).sum()
    }

    /// Predicted residual slope in `mu`.
    fn predicted_slope(&self) -> f64 {
        if self.variable == "lambda" {
            self.error_exponent * self.m
        } else {
            self.error_exponent
        }
    }
}

pub fn compare(out: &mut Output, ctx: &Context, expansion: &Path, oracle: &Path) -> CliResult<Outcome> {
    let art = parse_artifact(&load(out, expansion)?)?;
    let data = load(out, oracle)?;
    let cols = read_columns(&data, &["mu", "oracle_re"])?;
    let ims = read_columns(&data, &["oracle_im"]).map(|mut c| c.remove(0)).unwrap_or_else(|_| vec![0.0; cols[0].len()]);
    let mus = &cols[0];
    if mus.is_empty() {
        return Err(CliError::Input { path: oracle.to_path_buf(), message: "no data rows".into() });
    }
    if ctx.grid_given {
        let want = ctx.mus();
        let same = want.len() == mus.len() && want.iter().zip(mus).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs());
        if !same {
            let err = paramsym::Error::GridMismatch(format!("oracle has {} points, grid has {}", mus.len(), want.len()));
            return Err(CliError::Library { path: Some(oracle.to_path_buf()), source: err });
        }
    }
    let tol = ctx.tol_or(1e-6);
    let mut rows = Vec::with_capacity(mus.len());
    let (mut residuals, mut worst, mut scale) = (Vec::new(), 0.0f64, 0.0f64);
    for (i, &mu) in mus.iter().enumerate() {
        let o = C64::new(cols[1][i], ims[i]);
        let e = art.value(mu);
        let res = (e - o).norm();
        let size = o.norm().max(e.norm());
        let rel = if size > 0.0 { res / size } else { 0.0 };
        worst = worst.max(rel);
        scale = scale.max(size);
        residuals.push(res);
        rows.push(json!({ "mu": mu, "expansion": c64(e), "oracle": c64(o), "residual": res, "relative": rel }));
    }
    let predicted = art.predicted_slope();
    let negligible = residuals.iter().all(|r| *r <= CANCELLATION * scale.max(f64::MIN_POSITIVE) * 10.0);
    let slope = if negligible { None } else { Some(loglog_slope(mus, &residuals)) };
    let slope_ok = slope.is_none_or(|s| s <= predicted + SLOPE_MARGIN);
    let passed = worst <= tol && slope_ok;
    out.write_json(
        "compare.json",
        &json!({
            "tolerance": tol,
            "max_relative_residual": worst,
            "residual_slope": slope,
            "predicted_slope": predicted,
            "slope_ok": slope_ok,
            "passed": passed,
            "points": rows,
        }),
    )?;
    outcome(passed, json!({ "tolerance": tol, "slope_margin": SLOPE_MARGIN }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_terms() {
        let b = parse_basis("-1, log-2,-2.5").unwrap();
        assert_eq!(b, vec![BasisTerm::power(-1.0), BasisTerm::log_power(-2.0), BasisTerm::power(-2.5)]);
        assert!(parse_basis("x").is_err());
    }

    #[test]
    fn lambda_artifacts_scale_the_predicted_slope() {
        let a = Artifact { variable: "lambda".into(), m: 2.0, error_exponent: -2.5, terms: vec![(-0.5, false, C64::new(1.0, 0.0))] };
        assert_eq!(a.predicted_slope(), -5.0);
        assert!((a.value(4.0).re - 0.25).abs() < 1e-15);
    }
}
