//! Resolvent traces `Tr q(x, D) (lambda - p(x, D))^-l` on the flat torus.
//!
//! For `lambda = mu^m e^(i theta)` the operator has symbol
//! `e^(-i theta l) q # b_theta^{#l}`, where `b_theta` inverts
//! `a_theta = mu^m - e^(-i theta) p`. Its kernel expansion in `mu` is
//! rewritten in powers of `lambda^(1/m)` and `log lambda`; the result must not
//! depend on `theta`.

use std::f64::consts::PI;

use serde::Serialize;

use super::{trace_coefficients, Ladder, TraceExpansion, TraceOptions, TracePoint};
use crate::ellipticity::{homogeneous_parametrix, principal_bound, LowerBound, Notion};
use crate::error::{Error, Result};
use crate::infinity::{Excision, PolySymbol};
use crate::symbol::class::{ClassTag, Family};
use crate::symbol::diff::{derivative_multi, factorial_multi, multi_indices, Domain};
use crate::symbol::expr::{is_integer, snap, Atom, Expr, Monomial, C64};

/// Homogeneous parts of a differential symbol, indexed by `xi`-degree.
pub fn homogeneous_parts(p: &Expr, dim: usize) -> Result<Vec<Expr>> {
    let mut parts: Vec<Vec<crate::symbol::expr::Term>> = Vec::new();
    for t in p.terms() {
        let mut deg = 0.0;
        for (a, e) in t.mono.factors() {
            match a {
                Atom::Xi(i) if (*i as usize) < dim && is_integer(e) && e >= 0.0 => deg += e,
                Atom::AbsXi if is_integer(e / 2.0) && e >= 0.0 => deg += e,
                a if a.depends_on_mu() => return Err(Error::Argument("operator symbols must not depend on mu".into())),
                Atom::Trig { .. } | Atom::X(_) => {}
                a => return Err(Error::Argument(format!("'{}' is not allowed in a differential symbol", crate::symbol::expr::atom_name(a)))),
            }
        }
        let k = deg as usize;
        if parts.len() <= k {
            parts.resize(k + 1, Vec::new());
        }
        parts[k].push(t.clone());
    }
    Ok(parts.into_iter().map(Expr::from_terms).collect())
}

/// `mu^m - e^(-i theta) p`, a strongly polyhomogeneous symbol of order and regularity `m`.
pub fn resolvent_symbol_family(p: &Expr, m: i64, theta: f64) -> Result<(Expr, ClassTag)> {
    if m <= 0 {
        return Err(Error::Argument(format!("operator order must be a positive integer, got {m}")));
    }
    let a = Expr::atom_pow(Atom::Mu, m as f64).sub(&p.scale(C64::from_polar(1.0, -theta)));
    Ok((a, ClassTag::new(Family::BoldPoly, m as f64, m as f64)?))
}

/// Graded Leibniz product of component lists `f_i`, `g_j` (degrees falling by one per index).
pub fn graded_leibniz(f: &[Expr], g: &[Expr], dim: usize, k: usize) -> Result<Vec<Expr>> {
    let zero = vec![0u32; dim];
    let mut out = vec![Expr::zero(); k];
    for (i, fi) in f.iter().enumerate().take(k) {
        if fi.is_zero() {
            continue;
        }
        for (j, gj) in g.iter().enumerate().take(k - i) {
            if gj.is_zero() {
                continue;
            }
            for order in 0..(k - i - j) as u32 {
                if order > 0 && !gj.depends_on_x() {
                    break;
                }
                for alpha in multi_indices(dim, order) {
                    let df = derivative_multi(fi, &alpha, &zero, 0, Domain::Punctured)?;
                    if df.is_zero() {
                        continue;
                    }
                    let dg = derivative_multi(gj, &zero, &alpha, 0, Domain::Punctured)?;
                    if dg.is_zero() {
                        continue;
                    }
                    let c = C64::new(0.0, -1.0).powi(order as i32) / factorial_multi(&alpha);
                    let idx = i + j + order as usize;
                    out[idx] = out[idx].add(&df.mul(&dg).scale(c));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventOptions {
    pub ell: u32,
    /// Terms on the singular ladder in `mu`.
    pub n_mu: usize,
    /// Half-opening `Theta` of the sector, `0 < Theta < pi`.
    pub sector: f64,
    pub thetas: usize,
    /// Allowed relative spread of the coefficients over the angle grid.
    pub theta_tol: f64,
    pub quad_tol: f64,
}

impl ResolventOptions {
    pub fn new(ell: u32, n_mu: usize) -> Self {
        ResolventOptions { ell, n_mu, sector: 0.75 * PI, thetas: 5, theta_tol: 1e-6, quad_tol: 1e-11 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaTerm {
    /// Power of `lambda`.
    pub exponent: f64,
    pub log: bool,
    pub ladder: Ladder,
    pub value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventTrace {
    pub dim: usize,
    pub m: i64,
    pub omega: f64,
    pub ell: u32,
    /// Trace coefficients, `(2 pi)^n` times the torus mean of the kernel diagonal.
    pub terms: Vec<LambdaTerm>,
    /// The expansion holds modulo `O(|lambda|^error_exponent)`.
    pub error_exponent: f64,
    pub thetas: Vec<f64>,
    pub spread: f64,
    pub ellipticity: Vec<LowerBound>,
    /// Largest singular-ladder coefficient at `lambda^(-l - j/m)` with `j` not a multiple of `m`.
    pub off_multiple_max: f64,
    /// Kernel expansion in `mu` at `theta = 0`.
    pub mu_expansion: TraceExpansion,
}

impl ResolventTrace {
    /// Principal branch of `lambda^e` and `log lambda`.
    pub fn value(&self, lambda: C64) -> C64 {
        let ln = lambda.ln();
        self.terms.iter().map(|t| t.value * (ln * t.exponent).exp() * if t.log { ln } else { C64::new(1.0, 0.0) }).sum()
    }

    pub fn coefficient(&self, exponent: f64, log: bool) -> C64 {
        self.terms.iter().filter(|t| t.log == log && (t.exponent - exponent).abs() < 1e-9).map(|t| t.value).sum()
    }
}

fn top_degree(parts: &[Expr]) -> Option<usize> {
    parts.iter().rposition(|e| !e.is_zero())
}

pub fn theta_grid(sector: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0];
    }
    (0..count).map(|k| -sector + 2.0 * sector * k as f64 / (count - 1) as f64).collect()
}

/// `lambda`-coefficients of the symbol `q (lambda - p)^-l` at one sector angle.
fn at_angle(
    pp: &[Expr],
    qp: &[Expr],
    dim: usize,
    m: usize,
    omega: usize,
    opts: &ResolventOptions,
    theta: f64,
) -> Result<(Vec<LambdaTerm>, LowerBound, TraceExpansion, f64)> {
    let rot = C64::from_polar(1.0, -theta);
    // a_theta components, degree m - i.
    let mut a_parts = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let part = pp[m - i].scale(-rot);
        a_parts.push(if i == 0 { Expr::atom_pow(Atom::Mu, m as f64).add(&part) } else { part });
    }
    let bound = principal_bound(&a_parts[0], dim, m as f64, Notion::Grubb)?;
    if !bound.passed {
        let w = bound.witness.as_ref();
        return Err(Error::NotElliptic(format!(
            "mu^{m} - e^(-i {theta:.3}) p_0 is {:.3e} at xi = {:?}, mu = {:?}",
            bound.infimum,
            w.map(|w| w.xi.clone()),
            w.map(|w| w.mu)
        )));
    }
    let d = omega as f64 - (m as f64) * opts.ell as f64;
    let nu = omega as f64;
    let n = dim as f64;
    let big_j = (nu + opts.n_mu as f64 + n).floor() as usize + 1;
    let b = homogeneous_parametrix(&a_parts, dim, big_j)?;
    let mut power = b.clone();
    for _ in 1..opts.ell {
        power = graded_leibniz(&power, &b, dim, big_j)?;
    }
    let q_parts: Vec<Expr> = (0..=omega).map(|i| qp[omega - i].clone()).collect();
    let c: Vec<Expr> = graded_leibniz(&q_parts, &power, dim, big_j)?
        .into_iter()
        .map(|e| e.scale(C64::from_polar(1.0, -theta * opts.ell as f64)))
        .collect();
    let sym = PolySymbol::classical(dim, d, nu, c, Excision::None);
    let mut topts = TraceOptions::new(opts.n_mu);
    topts.tol = opts.quad_tol;
    let e = trace_coefficients(&sym, &topts, &TracePoint::TorusMean)?;

    // mu^a = lambda^(a/m) e^(-i theta a/m), log mu = (log lambda - i theta)/m.
    let vol = (2.0 * PI).powi(dim as i32);
    let mf = m as f64;
    let mut terms: Vec<LambdaTerm> = Vec::new();
    let mut add = |exponent: f64, log: bool, ladder: Ladder, value: C64| {
        let exponent = snap(exponent);
        match terms.iter_mut().find(|t| t.log == log && (t.exponent - exponent).abs() < 1e-9) {
            Some(t) => {
                t.value += value;
                if t.ladder != ladder {
                    t.ladder = Ladder::Both;
                }
            }
            None => terms.push(LambdaTerm { exponent, log, ladder, value }),
        }
    };
    let mut off_multiple: f64 = 0.0;
    for c in &e.provenance {
        let phase = C64::from_polar(1.0, -theta * c.exponent / mf) * vol;
        if c.log {
            add(c.exponent / mf, true, c.ladder, c.value * phase / mf);
            add(c.exponent / mf, false, c.ladder, -c.value * phase * C64::new(0.0, theta / mf));
        } else {
            add(c.exponent / mf, false, c.ladder, c.value * phase);
        }
    }
    for t in &terms {
        if t.ladder == Ladder::Singular {
            let j = snap(-(t.exponent + opts.ell as f64) * mf);
            if !is_integer(j / mf) {
                off_multiple = off_multiple.max(t.value.norm());
            }
        }
    }
    terms.sort_by(|a, b| b.exponent.total_cmp(&a.exponent).then(b.log.cmp(&a.log)));
    Ok((terms, bound, e, off_multiple))
}

pub fn resolvent_trace_expansion(p: &Expr, q: &Expr, dim: usize, opts: &ResolventOptions) -> Result<ResolventTrace> {
    if !(opts.sector > 0.0 && opts.sector < PI) {
        return Err(Error::Argument(format!("sector half-opening {} outside (0, pi)", opts.sector)));
    }
    if opts.ell == 0 {
        return Err(Error::Argument("resolvent power must be positive".into()));
    }
    let pp = homogeneous_parts(p, dim)?;
    let qp = homogeneous_parts(q, dim)?;
    let m = top_degree(&pp).filter(|&m| m > 0).ok_or_else(|| Error::Argument("operator must have positive order".into()))?;
    let omega = top_degree(&qp).ok_or_else(|| Error::Argument("weight operator is zero".into()))?;
    let n = dim as f64;
    if !(omega as f64 - (m as f64) * opts.ell as f64) .lt(&-n) {
        return Err(Error::Argument(format!("omega - m l = {} is not below -{dim}", omega as f64 - (m * opts.ell as usize) as f64)));
    }
    let thetas = theta_grid(opts.sector, opts.thetas);
    let mut runs = Vec::with_capacity(thetas.len());
    for &t in &thetas {
        runs.push(at_angle(&pp, &qp, dim, m, omega, opts, t)?);
    }
    // Spread of every coefficient across the angle grid, relative to the largest one.
    let base = runs.iter().position(|_| true).expect("non-empty grid");
    let zero_index = thetas.iter().position(|t| t.abs() < 1e-15).unwrap_or(base);
    let reference = &runs[zero_index].0;
    let scale = reference.iter().map(|t| t.value.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut spread: f64 = 0.0;
    for (terms, ..) in &runs {
        for t in terms.iter().chain(reference.iter()) {
            let a: C64 = terms.iter().filter(|s| s.log == t.log && (s.exponent - t.exponent).abs() < 1e-9).map(|s| s.value).sum();
            let b: C64 = reference.iter().filter(|s| s.log == t.log && (s.exponent - t.exponent).abs() < 1e-9).map(|s| s.value).sum();
            spread = spread.max((a - b).norm() / scale);
        }
    }
    if spread > opts.theta_tol {
        return Err(Error::Sector { spread });
    }
    let off = runs.iter().map(|r| r.3).fold(0.0, f64::max);
    let ellipticity = runs.iter().map(|r| r.1.clone()).collect();
    let (terms, _, mu_expansion, _) = runs.swap_remove(zero_index);
    let mf = m as f64;
    Ok(ResolventTrace {
        dim,
        m: m as i64,
        omega: omega as f64,
        ell: opts.ell,
        terms,
        error_exponent: mu_expansion.error_exponent / mf,
        thetas,
        spread,
        ellipticity,
        off_multiple_max: off,
        mu_expansion,
    })
}

/// A monomial `c x-free xi^alpha`, for building differential symbols in tests and fixtures.
pub fn xi_monomial(c: f64, alpha: &[u32]) -> Expr {
    let f: Vec<(Atom, f64)> = alpha.iter().enumerate().filter(|(_, &a)| a > 0).map(|(i, &a)| (Atom::Xi(i as u8), a as f64)).collect();
    Expr::monomial(C64::new(c, 0.0), Monomial::from_factors(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::eigensum::{circle_resolvent_trace, eigensum_trace};
    use crate::symbol::expr::TrigKind;

    fn laplacian_1d() -> Expr {
        xi_monomial(-1.0, &[2])
    }

    #[test]
    fn family_and_ellipticity() {
        let (a, tag) = resolvent_symbol_family(&laplacian_1d(), 2, 0.0).unwrap();
        assert_eq!(a, Expr::atom_pow(Atom::Mu, 2.0).add(&xi_monomial(1.0, &[2])));
        assert_eq!(tag.order, 2.0);
        assert!(resolvent_symbol_family(&laplacian_1d(), 0, 0.0).is_err());
        // p = xi^2 on the positive axis fails with a witness; rotated by pi/2 it passes.
        let p = xi_monomial(1.0, &[2]);
        let (bad, _) = resolvent_symbol_family(&p, 2, 0.0).unwrap();
        let r = principal_bound(&bad, 1, 2.0, Notion::Grubb).unwrap();
        assert!(!r.passed);
        let w = r.witness.unwrap();
        assert!((w.xi[0].abs() - w.mu).abs() < 0.05);
        let (good, _) = resolvent_symbol_family(&p, 2, PI / 2.0).unwrap();
        assert!(principal_bound(&good, 1, 2.0, Notion::Grubb).unwrap().passed);
    }

    #[test]
    fn circle_laplacian() {
        let r = resolvent_trace_expansion(&laplacian_1d(), &Expr::one(), 1, &ResolventOptions::new(1, 3)).unwrap();
        assert!((r.coefficient(-0.5, false).re - PI).abs() < 1e-9, "{:?}", r.terms);
        for t in &r.terms {
            if t.exponent != -0.5 {
                assert!(t.value.norm() < 1e-9, "{t:?}");
            }
        }
        assert!(r.spread < 1e-9);
        for mu in [10.0, 20.0, 50.0] {
            let v = r.value(C64::new(mu * mu, 0.0));
            assert!((v.re - circle_resolvent_trace(mu)).abs() < 1e-9 * circle_resolvent_trace(mu));
        }
    }

    #[test]
    fn squared_resolvent_matches_eigensum() {
        let p = laplacian_1d().sub(&Expr::one());
        let r = resolvent_trace_expansion(&p, &Expr::one(), 1, &ResolventOptions::new(2, 4)).unwrap();
        for mu in [20.0, 40.0] {
            let lambda = C64::new(mu * mu, 0.0);
            let oracle = eigensum_trace(&p, &Expr::one(), 2, lambda, 1, 1e-13).unwrap().trace;
            assert!((r.value(lambda) - oracle).norm() < 1e-7 * oracle.norm(), "mu={mu}");
        }
        assert!(r.off_multiple_max < 1e-9);
    }

    #[test]
    fn variable_potential() {
        // p = -xi^2 - cos x: the lowest terms see the mean of the potential only.
        let cos = Expr::atom(Atom::Trig { axis: 0, freq: 1, kind: TrigKind::Cos });
        let p = laplacian_1d().sub(&cos);
        let r = resolvent_trace_expansion(&p, &Expr::one(), 1, &ResolventOptions::new(1, 3)).unwrap();
        assert!((r.coefficient(-0.5, false).re - PI).abs() < 1e-9);
        assert!(r.coefficient(-1.5, false).norm() < 1e-9);
        assert!(r.spread < 1e-8);
    }

    #[test]
    fn preconditions() {
        let o = ResolventOptions::new(1, 2);
        assert!(resolvent_trace_expansion(&xi_monomial(-1.0, &[1]), &Expr::one(), 1, &o).is_err());
        let lap2 = xi_monomial(-1.0, &[2, 0]).add(&xi_monomial(-1.0, &[0, 2]));
        assert!(matches!(resolvent_trace_expansion(&lap2, &Expr::one(), 2, &o), Err(Error::Argument(_))));
        let mut wide = o.clone();
        wide.sector = PI;
        assert!(resolvent_trace_expansion(&laplacian_1d(), &Expr::one(), 1, &wide).is_err());
    }
}
