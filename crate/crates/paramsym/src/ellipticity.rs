//! Ellipticity checks and parametrices.

use serde::Serialize;

use crate::calculus::leibniz_expr;
use crate::error::{Error, Result};
use crate::infinity::{expand_at_infinity, polynomial_degrees, xi_polynomial, Excision, InfinityExpansion, PolySymbol};
use crate::numeric::{log_grid, loglog_slope};
use crate::semisphere::{restrict_to_semisphere, sphere_samples, weighted_taylor};
use crate::symbol::class::{xi_directions, ClassTag, Family};
use crate::symbol::diff::{derivative_multi, factorial_multi, multi_indices, Domain};
use crate::symbol::eval::{Compiled, Point};
use crate::symbol::expr::{Atom, Expr, C64};
use crate::symbol::homogeneity::sample_x;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Notion {
    /// `|a^h(x, xi, mu)^-1| <~ |xi, mu|^-d`.
    Grubb,
    /// `|a_0^-1| <~ |xi|^-nu |xi, mu|^(nu - d)` for `xi != 0`.
    WeakTilde,
    /// Principal symbol bound plus invertibility of the principal limit-symbol.
    ExpansionBased,
    /// Integer `nu >= 0`: bound on the whole semisphere plus the limit-symbol.
    Refined,
}

impl Notion {
    pub fn parse(s: &str) -> Result<Notion> {
        match s.to_ascii_lowercase().as_str() {
            "grubb" => Ok(Notion::Grubb),
            "weaktilde" | "weak_tilde" => Ok(Notion::WeakTilde),
            "expansionbased" | "expansion_based" | "expansion" => Ok(Notion::ExpansionBased),
            "refined" => Ok(Notion::Refined),
            _ => Err(Error::Argument(format!("unknown ellipticity notion '{s}'"))),
        }
    }

    fn full_semisphere(self) -> bool {
        matches!(self, Notion::Grubb | Notion::Refined)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotDetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub mu: f64,
    pub value: f64,
}

/// Infimum of a weighted modulus over a sample set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBound {
    pub infimum: f64,
    pub witness: Option<Witness>,
    pub constant: f64,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub notion: Notion,
    pub principal: LowerBound,
    pub angular: Option<LowerBound>,
    pub limit: Option<LimitReport>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitReport {
    /// `x`-independent multiplier or small perturbation of one.
    pub method: String,
    pub bound: Option<LowerBound>,
    /// Sup of `|perturbation / mean|` for `x`-dependent limit-symbols.
    pub perturbation: Option<f64>,
    pub verdict: Verdict,
}

/// Lower bound required for a pass.
pub const ELLIPTIC_CONSTANT: f64 = 1e-4;

fn bound_from(samples: impl Iterator<Item = Result<(f64, Witness)>>, constant: f64) -> Result<LowerBound> {
    let mut inf = f64::INFINITY;
    let mut witness = None;
    let mut n = 0;
    for s in samples {
        let (v, w) = s?;
        n += 1;
        if v < inf {
            inf = v;
            witness = Some(w);
        }
    }
    Ok(LowerBound { infimum: inf, witness, constant, samples: n, passed: n > 0 && inf >= constant })
}

/// Radii of the semisphere scan: logarithmic near the pole, uniform elsewhere.
fn semisphere_radii() -> Vec<f64> {
    let mut r: Vec<f64> = log_grid(1e-6, 1.0, 10).into_iter().map(|v| v.min(1.0)).collect();
    r.extend((1..100).map(|k| k as f64 / 100.0));
    r.sort_by(f64::total_cmp);
    r.dedup();
    r
}

/// `inf |a_0| |xi|^-nu |xi,mu|^(nu-d)` (or `|xi,mu|^-d`) on the semisphere.
///
/// The grid minimum is refined by golden-section search along its ray.
pub fn principal_bound(a0: &Expr, dim: usize, nu: f64, notion: Notion) -> Result<LowerBound> {
    let c = Compiled::new(a0);
    let weak = !notion.full_semisphere();
    let weighted = |x: &[f64], dir: &[f64], r: f64| -> Result<f64> {
        let xi: Vec<f64> = dir.iter().map(|v| v * r).collect();
        let mu = (1.0 - r * r).max(0.0).sqrt();
        let v = c.eval(&Point::symbol(x, &xi, mu))?.norm();
        Ok(if weak { v * r.powf(-nu) } else { v })
    };
    let radii = semisphere_radii();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, usize)> = None;
    let mut n = 0;
    for x in sample_x(dim, a0.depends_on_x()) {
        for dir in xi_directions(dim) {
            for (i, &r) in radii.iter().enumerate() {
                let v = weighted(&x, &dir, r)?;
                n += 1;
                if best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, x.clone(), dir.clone(), i));
                }
            }
        }
    }
    let (mut inf, x, dir, i) = best.ok_or_else(|| Error::Data("empty semisphere grid".into()))?;
    let (mut lo, mut hi) = (radii[i.saturating_sub(1)], radii[(i + 1).min(radii.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut best_r = radii[i];
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        let (fa, fb) = (weighted(&x, &dir, a)?, weighted(&x, &dir, b)?);
        n += 2;
        if fa < inf {
            inf = fa;
            best_r = a;
        }
        if fb < inf {
            inf = fb;
            best_r = b;
        }
        if fa < fb {
            hi = b;
        } else {
            lo = a;
        }
    }
    let xi: Vec<f64> = dir.iter().map(|v| v * best_r).collect();
    let mu = (1.0 - best_r * best_r).max(0.0).sqrt();
    let witness = Witness { x, xi, mu, value: inf };
    Ok(LowerBound { infimum: inf, witness: Some(witness), constant: ELLIPTIC_CONSTANT, samples: n, passed: inf >= ELLIPTIC_CONSTANT })
}

/// `inf |a_<nu>|` over the unit sphere in `xi`.
pub fn angular_bound(a0: &Expr, dim: usize, degree: f64, nu: f64) -> Result<LowerBound> {
    let f = restrict_to_semisphere(a0, dim, degree, nu)?;
    let c = weighted_taylor(&f, nu, 1)?.remove(0);
    let cc = Compiled::new(&c);
    let mut pts = Vec::new();
    for x in sample_x(dim, c.depends_on_x()) {
        for phi in sphere_samples(dim) {
            pts.push((x.clone(), phi));
        }
    }
    bound_from(
        pts.into_iter().map(|(x, phi)| {
            let v = cc.eval(&Point::polar(&x, 0.0, &phi))?.norm();
            Ok((v, Witness { x, xi: phi, mu: 0.0, value: v }))
        }),
        ELLIPTIC_CONSTANT,
    )
}

/// Torus points used to average over `x`.
fn torus_points(dim: usize) -> Vec<Vec<f64>> {
    let m = 16usize;
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for p in &out {
            for k in 0..m {
                let mut q = p.clone();
                q.push(2.0 * std::f64::consts::PI * k as f64 / m as f64);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn covariable_points(dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dim]];
    for s in log_grid(1e-2, 1e3, 10) {
        for dir in xi_directions(dim) {
            out.push(dir.iter().map(|v| v * s).collect());
        }
    }
    out
}

/// Invertibility of the principal limit-symbol `a_[nu]` as an operator.
pub fn limit_invertibility(limit: &Expr, dim: usize, nu: f64) -> Result<LimitReport> {
    let c = Compiled::new(limit);
    let jap = |xi: &[f64]| (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt();
    if !limit.depends_on_x() {
        let pts = covariable_points(dim);
        let bound = bound_from(
            pts.into_iter().map(|xi| {
                let v = c.eval(&Point::symbol(&vec![0.0; dim], &xi, 0.0))?.norm() * jap(&xi).powf(-nu);
                Ok((v, Witness { x: vec![0.0; dim], xi, mu: 0.0, value: v }))
            }),
            ELLIPTIC_CONSTANT,
        )?;
        let verdict = if bound.passed { Verdict::Pass } else { Verdict::Fail };
        return Ok(LimitReport { method: "multiplier".into(), bound: Some(bound), perturbation: None, verdict });
    }
    // Split into the x-mean m(xi) and a perturbation; Neumann-summable when |p/m| < 1.
    let xs = torus_points(dim);
    let mut worst: f64 = 0.0;
    let mut mean_bound = f64::INFINITY;
    for xi in covariable_points(dim) {
        let vals: Vec<C64> = xs.iter().map(|x| c.eval(&Point::symbol(x, &xi, 0.0))).collect::<Result<_>>()?;
        let m = vals.iter().sum::<C64>() / vals.len() as f64;
        mean_bound = mean_bound.min(m.norm() * jap(&xi).powf(-nu));
        if m.norm() == 0.0 {
            worst = f64::INFINITY;
            continue;
        }
        for v in &vals {
            worst = worst.max((v - m).norm() / m.norm());
        }
    }
    let verdict = if mean_bound >= ELLIPTIC_CONSTANT && worst < 1.0 { Verdict::Pass } else { Verdict::NotDetermined };
    Ok(LimitReport { method: "perturbation".into(), bound: None, perturbation: Some(worst), verdict })
}

pub fn check_elliptic(a: &PolySymbol, notion: Notion) -> Result<EllipticityReport> {
    let principal = a.components.first().ok_or_else(|| Error::Data("the homogeneous principal symbol is required".into()))?;
    let nu = a.regularity;
    if notion == Notion::Refined && !(nu >= 0.0 && nu.fract() == 0.0) {
        return Err(Error::Argument(format!("refined notion needs a nonnegative integer regularity, got {nu}")));
    }
    let principal_rep = principal_bound(&principal.expr, a.dim, nu, notion)?;
    let angular = match notion {
        Notion::WeakTilde | Notion::ExpansionBased => Some(angular_bound(&principal.expr, a.dim, principal.degree, principal.weight)?),
        _ => None,
    };
    let limit = match notion {
        Notion::ExpansionBased | Notion::Refined => {
            let reg = if notion == Notion::Refined { 0.0 } else { nu };
            let sym = PolySymbol { regularity: reg, ..a.clone() };
            let sym = if notion == Notion::Refined { reweight(&sym) } else { sym };
            let e = expand_at_infinity(&sym, 1)?;
            Some(limit_invertibility(&e.coeffs[0], a.dim, reg)?)
        }
        _ => None,
    };
    let mut verdict = if principal_rep.passed { Verdict::Pass } else { Verdict::Fail };
    if notion == Notion::ExpansionBased {
        if let Some(ang) = &angular {
            if !ang.passed {
                verdict = Verdict::Fail;
            }
        }
    }
    if let Some(l) = &limit {
        verdict = match (verdict, l.verdict) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (_, Verdict::NotDetermined) => Verdict::NotDetermined,
            _ => Verdict::Pass,
        };
    }
    Ok(EllipticityReport { notion, principal: principal_rep, angular, limit, verdict })
}

/// Components reweighted as elements of regularity zero.
fn reweight(a: &PolySymbol) -> PolySymbol {
    let mut out = a.clone();
    for (j, c) in out.components.iter_mut().enumerate() {
        c.weight = -(j as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneousInverse {
    #[serde(skip)]
    pub expr: Expr,
    pub tag: ClassTag,
    /// Weighted Taylor coefficients of the reciprocal on the semisphere.
    #[serde(skip)]
    pub taylor: Vec<Expr>,
}

/// Pointwise reciprocal of a homogeneous principal symbol of degree `d`,
/// regularity `nu`.
pub fn invert_homogeneous_symbol(a0: &Expr, dim: usize, d: f64, nu: f64, notion: Notion, taylor_order: usize) -> Result<HomogeneousInverse> {
    let b = principal_bound(a0, dim, nu, notion)?;
    if !b.passed {
        return Err(Error::NotElliptic(format!("principal symbol bound {:.3e} below {:.1e}", b.infimum, b.constant)));
    }
    let inv = a0.pow_int(-1)?;
    let (tag, weight) = match notion {
        Notion::Grubb | Notion::Refined => (ClassTag::new(Family::HomBold, -d, nu.max(0.0))?, 0.0),
        _ => (ClassTag::new(Family::HomBoldWeak, -d, -nu)?, -nu),
    };
    let f = restrict_to_semisphere(&inv, dim, -d, weight)?;
    let taylor = weighted_taylor(&f, weight, taylor_order)?;
    Ok(HomogeneousInverse { expr: inv, tag, taylor })
}

/// Weighted Taylor coefficients of `1 / f` from those of `f` (geometric series).
pub fn reciprocal_taylor(c: &[Expr], n: usize) -> Result<Vec<Expr>> {
    let c0 = c.first().filter(|e| !e.is_zero()).ok_or_else(|| Error::NotElliptic("leading angular coefficient vanishes".into()))?;
    let inv0 = c0.pow_int(-1)?;
    let mut out: Vec<Expr> = vec![inv0.clone()];
    for k in 1..n {
        let mut acc = Expr::zero();
        for i in 1..=k.min(c.len() - 1) {
            acc = acc.add(&c[i].mul(&out[k - i]));
        }
        out.push(inv0.mul(&acc).neg());
    }
    Ok(out)
}

/// Inverse ladder `c~_[j] = -c~_[0] sum_{k+l=j, l<j} a_[k] c~_[l]` with
/// `c~_[0] = chi(2 xi) / a_[0]`.
pub fn limit_ladder(e: &InfinityExpansion, n: usize) -> Result<Vec<Expr>> {
    let a = &e.coeffs;
    let c0 = a.first().filter(|c| !c.is_zero()).ok_or_else(|| Error::NotElliptic("principal limit-symbol vanishes".into()))?;
    let inv = crate::infinity::strip_excision(c0).pow_int(-1)?;
    let head = Expr::atom(Atom::chi(0.5)).mul(&inv);
    let mut out = vec![head.clone()];
    for j in 1..n {
        let mut acc = Expr::zero();
        for l in 0..j {
            if let Some(ak) = a.get(j - l) {
                acc = acc.add(&ak.mul(&out[l]));
            }
        }
        out.push(head.mul(&acc).neg());
    }
    Ok(out)
}

/// Components `b_k` of the parametrix of a symbol with homogeneous
/// components `a_i` (degree `d - i`):
/// `b_0 = a_0^-1`, `b_k = -b_0 sum_{i+|alpha|+l=k, l<k} (1/alpha!) d_xi^alpha a_i D_x^alpha b_l`.
pub fn homogeneous_parametrix(parts: &[Expr], dim: usize, n: usize) -> Result<Vec<Expr>> {
    let a0 = parts.first().ok_or_else(|| Error::Data("no principal component".into()))?;
    let b0 = a0.pow_int(-1)?;
    let mut b = vec![b0.clone()];
    let zero = vec![0u32; dim];
    for k in 1..n {
        let mut acc = Expr::zero();
        for l in 0..k {
            for (i, ai) in parts.iter().enumerate().take(k - l + 1) {
                let order = (k - l - i) as u32;
                if ai.is_zero() {
                    continue;
                }
                for alpha in multi_indices(dim, order) {
                    let da = derivative_multi(ai, &alpha, &zero, 0, Domain::Punctured)?;
                    if da.is_zero() {
                        continue;
                    }
                    let db = derivative_multi(&b[l], &zero, &alpha, 0, Domain::Punctured)?;
                    if db.is_zero() {
                        continue;
                    }
                    let ci = C64::new(0.0, -1.0).powi(order as i32) / factorial_multi(&alpha);
                    acc = acc.add(&da.mul(&db).scale(ci));
                }
            }
        }
        b.push(b0.mul(&acc).neg());
    }
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    /// Sizes at which the defect was sampled: `mu` for strong symbols,
    /// `|xi|` for weakly parametric ones.
    pub sizes: Vec<f64>,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub slope_right: f64,
    pub slope_left: f64,
    /// Defect vanishes to rounding on the whole window.
    pub vanishes: bool,
    /// Smallest sampled size beyond which both defects stay below one.
    pub neumann_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Parametrix {
    #[serde(skip)]
    pub symbol: Expr,
    pub tag: ClassTag,
    pub truncation: usize,
    pub defect: DefectReport,
    #[serde(skip)]
    pub limit_ladder: Vec<Expr>,
}

pub const MAX_PARAMETRIX_ORDER: usize = 4;

/// Leibniz truncation that is exact when `a` is a polynomial in `xi`.
fn defect_truncation(a: &Expr, dim: usize, n: usize) -> usize {
    match polynomial_degrees(&xi_polynomial(a, dim).substitute(&|at| match at {
        Atom::Mu => Some(Ok(Expr::one())),
        _ => None,
    }).unwrap_or_else(|_| Expr::atom(Atom::Norm))) {
        Some(d) => (*d.iter().max().unwrap_or(&0) as usize + 1).min(crate::calculus::MAX_TRUNCATION),
        None => (n + 2).min(crate::calculus::MAX_TRUNCATION),
    }
}

/// Truncated Neumann parametrix:
/// `b0 = chi a^-1`, `r = 1 - a #_n b0`, `b = b0 #_n sum_{k<n} r^{#k}`.
pub fn parametrix(a: &PolySymbol, notion: Notion, n: usize) -> Result<Parametrix> {
    if n == 0 || n > MAX_PARAMETRIX_ORDER {
        return Err(Error::Argument(format!("parametrix order {n} outside 1..={MAX_PARAMETRIX_ORDER}")));
    }
    let rep = check_elliptic(a, notion)?;
    if rep.verdict == Verdict::Fail {
        return Err(Error::NotElliptic(format!("{notion:?} check failed, principal infimum {:.3e}", rep.principal.infimum)));
    }
    let dim = a.dim;
    let full = a.full();
    let strong = a.excision != Excision::Covariable;
    let cut = if strong { Expr::atom(Atom::chi_joint()) } else { Expr::atom(Atom::chi(1.0)) };
    let b0 = cut.mul(&full.pow_int(-1)?);
    let r = Expr::one().sub(&leibniz_expr(&full, &b0, dim, n)?);
    let mut series = Expr::one();
    let mut power = Expr::one();
    for _ in 1..n {
        power = leibniz_expr(&power, &r, dim, n)?;
        series = series.add(&power);
    }
    let b = leibniz_expr(&b0, &series, dim, n)?;

    let k = defect_truncation(&full, dim, n);
    let right = leibniz_expr(&full, &b, dim, k)?.sub(&Expr::one());
    let left = leibniz_expr(&b, &full, dim, k)?.sub(&Expr::one());
    let defect = measure_defect(&right, &left, dim, strong)?;
    if !defect.vanishes {
        let slope = -defect.slope_right.max(defect.slope_left);
        let required = n as f64 - 1.0;
        if slope < required {
            return Err(Error::Convergence { slope, required });
        }
    }
    let ladder = match expand_at_infinity(a, n) {
        Ok(e) => limit_ladder(&e, n).unwrap_or_default(),
        Err(_) => Vec::new(),
    };
    let tag = if strong && a.regularity == 0.0 { ClassTag::strong(-a.order) } else { ClassTag::weak(-a.order, -a.regularity) };
    Ok(Parametrix { symbol: b, tag, truncation: n, defect, limit_ladder: ladder })
}

/// Sup of the defects over `(x, xi)` (strong) or `(x, mu)` (weak) against the other size.
pub fn measure_defect(right: &Expr, left: &Expr, dim: usize, strong: bool) -> Result<DefectReport> {
    let cr = Compiled::new(right);
    let cl = Compiled::new(left);
    let xs = sample_x(dim, right.depends_on_x() || left.depends_on_x());
    let sizes = log_grid(10.0, 1e3, 10);
    let mut inner = vec![0.0];
    inner.extend(log_grid(1e-2, 1e3, 5));
    let mut sr = Vec::with_capacity(sizes.len());
    let mut sl = Vec::with_capacity(sizes.len());
    let mut scale_r: f64 = 0.0;
    for &t in &sizes {
        let (mut mr, mut ml): (f64, f64) = (0.0, 0.0);
        for x in &xs {
            for dir in xi_directions(dim) {
                for &s in &inner {
                    let (xi, mu): (Vec<f64>, f64) = if strong {
                        (dir.iter().map(|v| v * s).collect(), t)
                    } else {
                        (dir.iter().map(|v| v * t).collect(), s)
                    };
                    let p = Point::symbol(x, &xi, mu);
                    mr = mr.max(cr.eval(&p)?.norm());
                    ml = ml.max(cl.eval(&p)?.norm());
                }
            }
        }
        scale_r = scale_r.max(mr).max(ml);
        sr.push(mr);
        sl.push(ml);
    }
    let vanishes = scale_r <= 1e-13;
    let (slope_right, slope_left) = if vanishes { (f64::NEG_INFINITY, f64::NEG_INFINITY) } else { (loglog_slope(&sizes, &sr), loglog_slope(&sizes, &sl)) };
    let mut neumann_threshold = None;
    for i in (0..sizes.len()).rev() {
        if sr[i] < 1.0 && sl[i] < 1.0 {
            neumann_threshold = Some(sizes[i]);
        } else {
            break;
        }
    }
    Ok(DefectReport { sizes, right: sr, left: sl, slope_right, slope_left, vanishes, neumann_threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::expr::TrigKind;

    fn mu2() -> Expr {
        Expr::atom_pow(Atom::Mu, 2.0)
    }
    fn xi2() -> Expr {
        Expr::atom_pow(Atom::Xi(0), 2.0)
    }
    fn sin() -> Expr {
        Expr::atom(Atom::Trig { axis: 0, freq: 1, kind: TrigKind::Sin })
    }

    #[test]
    fn grubb_notion_on_resolvent() {
        let a = PolySymbol::classical(1, 2.0, 0.0, vec![mu2().add(&xi2())], Excision::None);
        let r = check_elliptic(&a, Notion::Grubb).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.principal.infimum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regularity_obstruction() {
        let a0 = Expr::atom_pow(Atom::AbsXi, 2.0);
        let weak = principal_bound(&a0, 1, 2.0, Notion::WeakTilde).unwrap();
        assert!(weak.passed && (weak.infimum - 1.0).abs() < 1e-12);
        let g = principal_bound(&a0, 1, 2.0, Notion::Grubb).unwrap();
        assert!(!g.passed);
        let w = g.witness.unwrap();
        assert!(w.xi[0].abs() < 1e-5 && (w.mu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn limit_symbol_one_passes_everything() {
        let a = PolySymbol::classical(2, 1.0, 0.0, vec![Expr::atom(Atom::Norm)], Excision::Joint);
        for notion in [Notion::Grubb, Notion::WeakTilde, Notion::ExpansionBased, Notion::Refined] {
            assert_eq!(check_elliptic(&a, notion).unwrap().verdict, Verdict::Pass, "{notion:?}");
        }
    }

    #[test]
    fn excised_limit_symbol_is_not_invertible() {
        let a = PolySymbol::classical(
            1,
            -3.0,
            -1.0,
            vec![Expr::atom_pow(Atom::AbsXi, -1.0).mul(&Expr::atom_pow(Atom::Norm, -2.0))],
            Excision::Covariable,
        );
        let r = check_elliptic(&a, Notion::ExpansionBased).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(check_elliptic(&a, Notion::WeakTilde).unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn inverse_examples() {
        let a0 = mu2().add(&xi2());
        let inv = invert_homogeneous_symbol(&a0, 1, 2.0, 2.0, Notion::Grubb, 1).unwrap();
        assert_eq!(inv.expr, a0.pow_int(-1).unwrap());
        assert_eq!(inv.tag, ClassTag::new(Family::HomBold, -2.0, 2.0).unwrap());
        let b = Expr::atom_pow(Atom::AbsXi, 2.0);
        let inv = invert_homogeneous_symbol(&b, 1, 2.0, 2.0, Notion::WeakTilde, 1).unwrap();
        assert_eq!(inv.expr, Expr::atom_pow(Atom::AbsXi, -2.0));
        assert_eq!(inv.taylor[0], Expr::one());
        assert!(matches!(invert_homogeneous_symbol(&b, 1, 2.0, 2.0, Notion::Grubb, 1), Err(Error::NotElliptic(_))));
    }

    #[test]
    fn reciprocal_geometric_series() {
        let c = vec![Expr::one(), Expr::zero(), Expr::real(0.5)];
        let r = reciprocal_taylor(&c, 4).unwrap();
        assert_eq!(r[0], Expr::one());
        assert!(r[1].is_zero());
        assert_eq!(r[2], Expr::real(-0.5));
        assert!(r[3].is_zero());
    }

    #[test]
    fn ladder_matches_geometric_series() {
        // a_[0] = 2, a_[1] = xi: the inverse ladder is 1/2, -xi/4, xi^2/8, -xi^3/16.
        let e = crate::infinity::expand_raw(
            &Expr::real(2.0).add(&Expr::atom(Atom::Xi(0)).mul(&Expr::atom_pow(Atom::Norm, -1.0))),
            1,
            0.0,
            0.0,
            4,
        )
        .unwrap();
        let c = limit_ladder(&e, 4).unwrap();
        let p = Point::symbol(&[0.0], &[1.7], 0.0);
        for (j, cj) in c.iter().enumerate() {
            let want = 0.5 * (-1.7f64 / 2.0).powi(j as i32);
            assert!((cj.eval(&p).unwrap().re - want).abs() < 1e-14, "{j}");
        }
        // sum_{k+l=j} a_k c~_l vanishes once multiplied by chi(xi).
        for j in 1..4 {
            let mut s = Expr::zero();
            for l in 0..=j {
                s = s.add(&e.coeffs[j - l].mul(&c[l]));
            }
            let s = Expr::atom(Atom::chi(1.0)).mul(&s);
            for xi in [0.0, 0.3, 0.9, 1.2, 5.0] {
                assert!(s.eval(&Point::symbol(&[0.0], &[xi], 0.0)).unwrap().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn x_independent_parametrix_is_exact() {
        let a = PolySymbol::classical(1, 2.0, 0.0, vec![mu2().add(&xi2())], Excision::None);
        let p = parametrix(&a, Notion::Grubb, 2).unwrap();
        assert!(p.defect.vanishes, "{:?}", p.defect.right);
    }

    #[test]
    fn perturbed_parametrix_decays() {
        let a = PolySymbol::classical(1, 2.0, 0.0, vec![mu2().add(&xi2()), Expr::zero(), sin()], Excision::None);
        let p = parametrix(&a, Notion::Grubb, 2).unwrap();
        assert!(-p.defect.slope_right >= 1.5, "{}", p.defect.slope_right);
        assert!(-p.defect.slope_left >= 1.5, "{}", p.defect.slope_left);
        assert!(p.defect.neumann_threshold.is_some());
    }

    #[test]
    fn homogeneous_recursion_inverts_resolvent() {
        let parts = vec![mu2().add(&xi2()), Expr::zero(), sin()];
        let b = homogeneous_parametrix(&parts, 1, 3).unwrap();
        assert_eq!(b[0], parts[0].pow_int(-1).unwrap());
        assert!(b[1].is_zero());
        let want = sin().mul(&parts[0].pow_int(-2).unwrap()).neg();
        let p = Point::symbol(&[0.4], &[0.7], 1.3);
        assert!((b[2].eval(&p).unwrap() - want.eval(&p).unwrap()).norm() < 1e-14);
    }
}
