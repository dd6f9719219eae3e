//! Kernel-diagonal expansions `k(x, x; mu)` as `mu -> infinity`.
//!
//! For `a = chi sum_j a_j` with `a_j` homogeneous of degree `d - j`, the
//! diagonal value expands on two ladders:
//!
//! * `c_j mu^(d - j + n)` from the homogeneous parts,
//! * `(c'_l log mu + c''_l) mu^(d - nu - l)` from the small-`xi` region.
//!
//! Each coefficient is assembled from five kinds of pieces, recorded in the
//! provenance log: the integral over `|xi| >= mu`, the excised integral over
//! `|xi| <= 1`, the `q`-integrals over `1 <= |xi| <= mu`, the homogeneous
//! remainder of the `mu`-series and the compactly supported remainder symbol.

pub mod resolvent;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::infinity::museries::mu_series;
use crate::infinity::PolySymbol;
use crate::oracle::quad::{angular_integral, integrate, integrate_tail, sphere_monomial_integral, SphereRule};
use crate::symbol::eval::{Compiled, Point};
use crate::symbol::expr::{is_integer, snap, Atom, Expr, Monomial, C64};
use crate::symbol::homogeneity::{check_homogeneity, HomogeneityMode};
use crate::symbol::smooth::{self, SmoothFn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// `int_{|xi| >= mu} a_j`.
    Outer,
    /// `int_{|xi| <= 1} chi q_{j,l}`.
    Inner,
    /// `int_{1 <= |xi| <= mu} q_{j,l}`.
    QIntegral,
    /// Homogeneous remainder of the `mu`-series of `a_j`.
    SRemainder,
    /// Compactly supported difference between the symbol and `chi_int sum_j a_j`.
    Remainder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ladder {
    Regular,
    Singular,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contribution {
    pub component: usize,
    pub ell: Option<usize>,
    pub source: Source,
    pub ladder: Ladder,
    pub exponent: f64,
    pub log: bool,
    pub value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceTerm {
    pub exponent: f64,
    pub log: bool,
    pub ladder: Ladder,
    pub value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TracePoint {
    At(Vec<f64>),
    /// Mean over the torus `(R / 2 pi Z)^n`, trapezoidal in each axis.
    TorusMean,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceOptions {
    /// Number `N` of terms on the singular ladder.
    pub n_mu: usize,
    pub j: Option<usize>,
    pub l: Option<usize>,
    /// Absolute tolerance of each radial integral.
    pub tol: f64,
}

impl TraceOptions {
    pub fn new(n_mu: usize) -> Self {
        TraceOptions { n_mu, j: None, l: None, tol: 1e-11 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceExpansion {
    pub dim: usize,
    pub order: f64,
    pub regularity: f64,
    pub j_components: usize,
    pub n_mu: usize,
    pub l_inner: usize,
    /// The expansion holds modulo `O(mu^error_exponent)`.
    pub error_exponent: f64,
    pub terms: Vec<TraceTerm>,
    pub provenance: Vec<Contribution>,
    pub point: TracePoint,
    /// Trapezoidal points per axis used for the torus mean.
    pub torus_points: usize,
}

impl TraceExpansion {
    pub fn value(&self, mu: f64) -> C64 {
        self.terms.iter().map(|t| t.value * mu.powf(t.exponent) * if t.log { mu.ln() } else { 1.0 }).sum()
    }

    pub fn coefficient(&self, exponent: f64, log: bool) -> C64 {
        self.terms
            .iter()
            .filter(|t| t.log == log && (t.exponent - exponent).abs() < 1e-9)
            .map(|t| t.value)
            .sum()
    }

    /// Terms whose coefficient exceeds `tol` times the largest one.
    pub fn significant(&self, tol: f64) -> Vec<&TraceTerm> {
        let m = self.terms.iter().map(|t| t.value.norm()).fold(0.0, f64::max);
        self.terms.iter().filter(|t| t.value.norm() > tol * m).collect()
    }
}

/// Number of extra `mu`-series terms used for the inner part of the
/// homogeneous remainder.
const SERIES_EXTRA: usize = 24;
/// Inner radii tried for the homogeneous remainder.
const INNER_RADII: [f64; 3] = [0.1, 0.05, 0.02];
/// Outer support radius of the remainder symbol.
const REMAINDER_RADIUS: f64 = 4.0;

/// Internal excision `psi(2 |xi|)`: zero for `|xi| <= 1/2`, one for `|xi| >= 1`.
fn chi_int(r: f64) -> f64 {
    smooth::value(SmoothFn::Psi, 2.0 * r)
}

struct Prepared {
    index: usize,
    degree: f64,
    symbol: Compiled,
    /// `q_{j,l}` for `l < L + SERIES_EXTRA`.
    q: Vec<Expr>,
    q_compiled: Vec<Compiled>,
}

/// Total `xi`-degree of a term if it is a monomial in `Xi`, `AbsXi` and
/// `x`-only atoms.
fn xi_degree(m: &Monomial) -> Option<f64> {
    let mut deg = 0.0;
    for (a, p) in m.factors() {
        match a {
            Atom::Xi(_) | Atom::AbsXi => deg += p,
            a if !xi_mu_free(a) => return None,
            _ => {}
        }
    }
    Some(deg)
}

/// Atoms that depend on neither `xi` nor `mu`.
fn xi_mu_free(a: &Atom) -> bool {
    match a {
        Atom::Group(g) => !g.depends_on_mu() && xi_free(g),
        Atom::Xi(_) | Atom::AbsXi | Atom::JapXi | Atom::JapXiMu | Atom::Norm | Atom::Smooth(_) | Atom::Mu => false,
        _ => true,
    }
}

fn xi_free(e: &Expr) -> bool {
    !e.has_atom(&|a| matches!(a, Atom::Xi(_) | Atom::AbsXi | Atom::JapXi | Atom::JapXiMu | Atom::Norm | Atom::Smooth(_)))
}

/// `int_{S^{n-1}} q(x, phi) d sigma` from monomial integrals when every term
/// is `Xi^alpha |xi|^p f(x)`.
fn sphere_integral_exact(q: &Expr, dim: usize, x: &[f64]) -> Option<Result<C64>> {
    let mut total = C64::new(0.0, 0.0);
    for t in q.terms() {
        let mut alpha = vec![0u32; dim];
        let mut rest = Vec::new();
        for (a, p) in t.mono.factors() {
            match a {
                Atom::Xi(i) if is_integer(p) && p >= 0.0 => alpha[*i as usize] += p as u32,
                Atom::AbsXi => {}
                a if xi_mu_free(a) => rest.push((a.clone(), p)),
                _ => return None,
            }
        }
        let f = Expr::monomial(t.coef, Monomial::from_factors(rest));
        let v = match f.eval(&Point::symbol(x, &[0.0; 3][..dim], 0.0)) {
            Ok(v) => v,
            Err(e) => return Some(Err(e)),
        };
        total += v * sphere_monomial_integral(&alpha);
    }
    Some(Ok(total))
}

fn sphere_integral(q: &Expr, qc: &Compiled, rule: &SphereRule, dim: usize, x: &[f64]) -> Result<C64> {
    if q.is_zero() {
        return Ok(C64::new(0.0, 0.0));
    }
    match sphere_integral_exact(q, dim, x) {
        Some(v) => v,
        None => angular_integral(qc, rule, x, 1.0, 1.0),
    }
}

/// `int_a^b r^p dr`, with the logarithm at `p = -1`.
fn power_integral(a: f64, b: f64, p: f64) -> f64 {
    if (p + 1.0).abs() < 1e-12 {
        (b / a).ln()
    } else {
        (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0)
    }
}

pub fn trace_coefficients(a: &PolySymbol, opts: &TraceOptions, point: &TracePoint) -> Result<TraceExpansion> {
    let dim = a.dim;
    let n = dim as f64;
    let (d, nu) = (a.order, a.regularity);
    if a.explicit.is_some() {
        return Err(Error::Argument("kernel expansions need the homogeneous components of the symbol".into()));
    }
    if !(d < -n) {
        return Err(Error::Argument(format!("order {d} is not below -{dim}; the kernel diagonal diverges")));
    }
    if d - nu > 1e-12 {
        return Err(Error::Argument(format!("order minus regularity is {} > 0", d - nu)));
    }
    if opts.n_mu == 0 {
        return Err(Error::Argument("at least one term on the singular ladder is required".into()));
    }
    let big_n = opts.n_mu as f64;
    let j_min = (nu + big_n + n).floor() as i64 + 1;
    let j_min = j_min.max(a.components.len() as i64).max(1) as usize;
    let big_j = match opts.j {
        Some(j) if (j as f64) <= nu + big_n + n => {
            return Err(Error::Argument(format!("J = {j} violates nu - J + N < -n")));
        }
        Some(j) if j < a.components.len() => {
            return Err(Error::Argument(format!("J = {j} is below the number of components {}", a.components.len())));
        }
        Some(j) => j,
        None => j_min,
    };
    let l_min = ((big_j as f64 - 1.0 - n - nu).floor() as i64 + 1).max(opts.n_mu as i64) as usize;
    let big_l = match opts.l {
        Some(l) if l < l_min => return Err(Error::Argument(format!("L = {l} must be at least N and exceed J - 1 - n - nu"))),
        Some(l) => l,
        None => l_min,
    };

    // Excision profile for large mu; must be radial and equal to one outside a ball.
    let excision = a.excision_factor();
    let ex_series = mu_series(&excision, 1)?;
    if ex_series.lead != 0.0 {
        return Err(Error::Argument("excision does not tend to a function of xi".into()));
    }
    let ex_profile = Compiled::new(&ex_series.coeffs[0]);
    let ex_at = |r: f64| -> Result<f64> {
        let mut xi = [0.0; 3];
        xi[0] = r;
        Ok(ex_profile.eval(&Point::symbol(&[0.0; 3][..dim], &xi[..dim], 0.0))?.re)
    };
    if (ex_at(REMAINDER_RADIUS)? - 1.0).abs() > 0.0 {
        return Err(Error::Argument(format!("excision must equal one for |xi| >= {REMAINDER_RADIUS}")));
    }

    let lead = snap(d - nu);
    let mut prepared = Vec::new();
    for (j, c) in a.components.iter().enumerate() {
        if (c.degree - (d - j as f64)).abs() > 1e-12 {
            return Err(Error::Argument(format!("component {j} has degree {} instead of {}", c.degree, d - j as f64)));
        }
        if c.expr.is_zero() {
            continue;
        }
        let h = check_homogeneity(&c.expr, dim, c.degree, HomogeneityMode::Joint)?;
        if !h.passed {
            return Err(Error::Homogeneity { deviation: h.max_deviation, tolerance: h.tolerance });
        }
        let len = big_l + SERIES_EXTRA;
        let q = mu_series(&c.expr, len)?.aligned(lead, len)?;
        for (l, ql) in q.iter().enumerate() {
            let want = nu - j as f64 + l as f64;
            for t in ql.terms() {
                match xi_degree(&t.mono) {
                    Some(deg) if (deg - want).abs() < 1e-9 => {}
                    _ => {
                        return Err(Error::Argument(format!(
                            "mu-coefficient {l} of component {j} is not homogeneous of degree {want} in xi"
                        )))
                    }
                }
            }
        }
        let q_compiled = q.iter().map(Compiled::new).collect();
        prepared.push(Prepared { index: j, degree: c.degree, symbol: Compiled::new(&c.expr), q, q_compiled });
    }

    let depends = a.components.iter().any(|c| c.expr.depends_on_x());
    let ctx = Context { dim, nu, lead, big_l, n_mu: opts.n_mu, tol: opts.tol, rule: SphereRule::standard(dim) };
    let (raw, torus_points) = match point {
        TracePoint::At(x) => {
            if x.len() != dim {
                return Err(Error::Argument(format!("point has {} coordinates, dimension is {dim}", x.len())));
            }
            (ctx.assemble(&prepared, x, &ex_at)?, 1)
        }
        TracePoint::TorusMean => torus_mean(&ctx, &prepared, depends, &ex_at)?,
    };

    let error_exponent = snap(d - nu - big_n);
    let kept: Vec<Contribution> = raw.into_iter().filter(|c| c.exponent > error_exponent + 1e-9).collect();
    let mut terms: Vec<TraceTerm> = Vec::new();
    for c in &kept {
        let ladder = c.ladder;
        match terms.iter_mut().find(|t| t.log == c.log && (t.exponent - c.exponent).abs() < 1e-9) {
            Some(t) => {
                t.value += c.value;
                if t.ladder != ladder {
                    t.ladder = Ladder::Both;
                }
            }
            None => terms.push(TraceTerm { exponent: snap(c.exponent), log: c.log, ladder, value: c.value }),
        }
    }
    terms.sort_by(|a, b| b.exponent.total_cmp(&a.exponent).then(b.log.cmp(&a.log)));
    Ok(TraceExpansion {
        dim,
        order: d,
        regularity: nu,
        j_components: big_j,
        n_mu: opts.n_mu,
        l_inner: big_l,
        error_exponent,
        terms,
        provenance: kept,
        point: point.clone(),
        torus_points,
    })
}

struct Context {
    dim: usize,
    nu: f64,
    lead: f64,
    big_l: usize,
    n_mu: usize,
    tol: f64,
    rule: SphereRule,
}

impl Context {
    fn norm(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    fn assemble(&self, prepared: &[Prepared], x: &[f64], ex_at: &(dyn Fn(f64) -> Result<f64> + Sync)) -> Result<Vec<Contribution>> {
        let mut out = Vec::new();
        for p in prepared {
            out.extend(self.component(p, x, ex_at)?);
        }
        Ok(out)
    }

    fn component(&self, p: &Prepared, x: &[f64], ex_at: &(dyn Fn(f64) -> Result<f64> + Sync)) -> Result<Vec<Contribution>> {
        let n = self.dim as f64;
        let norm = self.norm();
        let j = p.index;
        let regular = snap(p.degree + n);
        let mut out = Vec::new();
        let push = |out: &mut Vec<Contribution>, ell: Option<usize>, source: Source, exponent: f64, log: bool, value: C64| {
            if value != C64::new(0.0, 0.0) {
                let ladder = match source {
                    Source::Outer | Source::SRemainder => Ladder::Regular,
                    Source::Inner | Source::Remainder => Ladder::Singular,
                    Source::QIntegral if !log && (exponent - regular).abs() < 1e-12 && ell.is_some() => Ladder::Regular,
                    Source::QIntegral => Ladder::Singular,
                };
                out.push(Contribution { component: j, ell, source, ladder, exponent: snap(exponent), log, value });
            }
        };

        let radial = |r: f64| -> Result<C64> { Ok(angular_integral(&p.symbol, &self.rule, x, r, 1.0)? * r.powi(self.dim as i32 - 1)) };
        let outer = integrate_tail(radial, 1.0, self.tol * norm)?;
        push(&mut out, None, Source::Outer, regular, false, outer.value / norm);

        let amps: Vec<C64> = p.q.iter().zip(&p.q_compiled).map(|(q, qc)| sphere_integral(q, qc, &self.rule, self.dim, x)).collect::<Result<_>>()?;
        let deg = |l: usize| self.nu - j as f64 + l as f64;

        for (l, amp) in amps.iter().enumerate().take(self.big_l) {
            if *amp == C64::new(0.0, 0.0) {
                continue;
            }
            let singular = self.lead - l as f64;
            let pw = deg(l) + n;
            if l < self.n_mu {
                let inner = integrate(|r| Ok(C64::new(chi_int(r) * r.powf(deg(l) + n - 1.0), 0.0)), 0.5, 1.0, self.tol)?;
                push(&mut out, Some(l), Source::Inner, singular, false, amp * inner.value.re / norm);
                let w = |r: f64| -> Result<C64> { Ok(C64::new((ex_at(r)? - chi_int(r)) * r.powf(deg(l) + n - 1.0), 0.0)) };
                if pw <= 0.0 && ex_at(1e-3)? != 0.0 {
                    return Err(Error::Argument(format!(
                        "mu-coefficient {l} of component {j} is not integrable near xi = 0; excise the symbol in xi"
                    )));
                }
                let mut rem = C64::new(0.0, 0.0);
                for win in [0.0, 0.5, 1.0, 2.0, REMAINDER_RADIUS].windows(2) {
                    rem += integrate(w, win[0], win[1], self.tol)?.value;
                }
                push(&mut out, Some(l), Source::Remainder, singular, false, amp * rem / norm);
            }
            if pw.abs() < 1e-12 {
                if l < self.n_mu {
                    push(&mut out, Some(l), Source::QIntegral, singular, true, amp / norm);
                }
            } else {
                push(&mut out, Some(l), Source::QIntegral, regular, false, amp / (pw * norm));
                if l < self.n_mu {
                    push(&mut out, Some(l), Source::QIntegral, singular, false, -amp / (pw * norm));
                }
            }
        }

        // int_{|xi| <= 1} s^h(xi; 1): direct on [rho, 1], series below rho.
        let scale = amps.iter().take(self.big_l).map(|a| a.norm()).fold(outer.value.norm(), f64::max).max(1e-300);
        let mut last = None;
        for rho in INNER_RADII {
            let tail: Vec<C64> = (self.big_l..amps.len()).map(|l| amps[l] * rho.powf(deg(l) + n) / (deg(l) + n)).collect();
            let size = tail.iter().rev().take(2).map(|t| t.norm()).fold(0.0, f64::max);
            last = Some(size);
            if size > 1e-14 * scale {
                continue;
            }
            let annulus = integrate(radial, rho, 1.0, self.tol * norm)?.value;
            let mut s = annulus + tail.iter().sum::<C64>();
            for (l, amp) in amps.iter().enumerate().take(self.big_l) {
                s -= amp * power_integral(rho, 1.0, deg(l) + n - 1.0);
            }
            push(&mut out, None, Source::SRemainder, regular, false, s / norm);
            return Ok(out);
        }
        Err(Error::Quadrature { achieved: last.unwrap_or(f64::INFINITY), requested: 1e-14 * scale })
    }
}

const TORUS_MAX_POINTS: usize = 4096;

fn torus_grid(dim: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * m);
        for p in &out {
            for k in 0..m {
                let mut q = p.clone();
                q.push(2.0 * PI * k as f64 / m as f64);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn mean_contributions(per_point: Vec<Vec<Contribution>>) -> Vec<Contribution> {
    let count = per_point.len() as f64;
    let mut out: Vec<Contribution> = Vec::new();
    for list in per_point {
        for c in list {
            match out
                .iter_mut()
                .find(|o| o.component == c.component && o.ell == c.ell && o.source == c.source && o.log == c.log && (o.exponent - c.exponent).abs() < 1e-9)
            {
                Some(o) => o.value += c.value,
                None => out.push(c),
            }
        }
    }
    for c in &mut out {
        c.value /= count;
    }
    out
}

fn torus_mean(
    ctx: &Context,
    prepared: &[Prepared],
    depends: bool,
    ex_at: &(dyn Fn(f64) -> Result<f64> + Sync),
) -> Result<(Vec<Contribution>, usize)> {
    if !depends {
        return Ok((ctx.assemble(prepared, &vec![0.0; ctx.dim], ex_at)?, 1));
    }
    let freq = prepared.iter().flat_map(|p| p.q.iter()).map(Expr::max_trig_freq).max().unwrap_or(1).max(1) as usize;
    let mut m = 2 * freq + 2;
    let mut previous: Option<Vec<Contribution>> = None;
    loop {
        let grid = torus_grid(ctx.dim, m);
        let per: Vec<Vec<Contribution>> = grid.par_iter().map(|x| ctx.assemble(prepared, x, ex_at)).collect::<Result<_>>()?;
        let mean = mean_contributions(per);
        if let Some(prev) = &previous {
            let scale = mean.iter().map(|c| c.value.norm()).fold(0.0, f64::max).max(1e-300);
            let diff = mean
                .iter()
                .map(|c| {
                    let p = prev
                        .iter()
                        .find(|o| o.component == c.component && o.ell == c.ell && o.source == c.source && o.log == c.log && (o.exponent - c.exponent).abs() < 1e-9)
                        .map(|o| o.value)
                        .unwrap_or_default();
                    (c.value - p).norm()
                })
                .fold(0.0, f64::max);
            if diff <= 1e-12 * scale {
                return Ok((mean, m));
            }
        }
        if (2 * m).pow(ctx.dim as u32) > TORUS_MAX_POINTS {
            return Err(Error::Quadrature { achieved: f64::NAN, requested: 1e-12 });
        }
        previous = Some(mean);
        m *= 2;
    }
}
