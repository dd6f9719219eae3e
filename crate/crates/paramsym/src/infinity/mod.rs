//! Expansions at infinity `a ~ sum_j a_[nu+j](x, xi) [xi, mu]^(d - nu - j)`
//! and the polynomial `mu`-expansions of brackets and homogeneous symbols.

pub mod museries;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{log_grid, loglog_slope};
use crate::semisphere::{angular_to_symbol, restrict_to_semisphere, weighted_taylor};
use crate::symbol::class::{verify_class, xi_directions, ClassTag, GridSpec, SeminormReport};
use crate::symbol::eval::{Compiled, Point};
use crate::symbol::expr::{is_integer, snap, Atom, Expr, Monomial, Term, C64};
use crate::symbol::homogeneity::{check_homogeneity, sample_x, HomogeneityMode};
pub use museries::{mu_series, zeta_radial, MuSeries};

/// How homogeneous components are cut off near their singular set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Excision {
    /// `chi(xi)`: weakly parametric components, singular on `xi = 0`.
    Covariable,
    /// `chi(xi, mu)`: components smooth away from the origin.
    Joint,
    /// Components that are already smooth everywhere.
    None,
}

/// Homogeneous component of degree `degree` with semisphere weight `weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub expr: Expr,
    pub degree: f64,
    pub weight: f64,
}

/// Polyhomogeneous symbol of order `order` and regularity `regularity`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySymbol {
    pub dim: usize,
    pub order: f64,
    pub regularity: f64,
    pub components: Vec<Component>,
    pub excision: Excision,
    /// Full symbol when it is not the excised sum of the components.
    pub explicit: Option<Expr>,
}

impl PolySymbol {
    /// Components `a_j` of degree `d - j` and weight `nu - j`.
    pub fn classical(dim: usize, order: f64, regularity: f64, parts: Vec<Expr>, excision: Excision) -> Self {
        let components = parts
            .into_iter()
            .enumerate()
            .map(|(j, expr)| Component { expr, degree: order - j as f64, weight: regularity - j as f64 })
            .collect();
        PolySymbol { dim, order, regularity, components, excision, explicit: None }
    }

    /// A symbol given only as an expression; expansions use the `mu`-series.
    pub fn raw(dim: usize, order: f64, regularity: f64, expr: Expr) -> Self {
        PolySymbol { dim, order, regularity, components: Vec::new(), excision: Excision::None, explicit: Some(expr) }
    }

    pub fn excision_factor(&self) -> Expr {
        match self.excision {
            Excision::Covariable => Expr::atom(Atom::chi(1.0)),
            Excision::Joint => Expr::atom(Atom::chi_joint()),
            Excision::None => Expr::one(),
        }
    }

    pub fn full(&self) -> Expr {
        if let Some(e) = &self.explicit {
            return e.clone();
        }
        let sum = Expr::sum(self.components.iter().map(|c| &c.expr));
        self.excision_factor().mul(&sum)
    }

    pub fn is_strong(&self) -> bool {
        self.regularity == 0.0 && self.excision != Excision::Covariable
    }

    pub fn tag(&self) -> ClassTag {
        if self.is_strong() {
            ClassTag::strong(self.order)
        } else {
            ClassTag::weak(self.order, self.regularity)
        }
    }
}

/// Coefficients `a_[nu+j]`, `j < truncation`, paired with exponents `d - nu - j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfinityExpansion {
    pub dim: usize,
    pub order: f64,
    pub regularity: f64,
    #[serde(skip)]
    pub coeffs: Vec<Expr>,
    pub exponents: Vec<f64>,
    pub truncation: usize,
    pub remainder_tag: ClassTag,
}

impl InfinityExpansion {
    fn new(dim: usize, d: f64, nu: f64, coeffs: Vec<Expr>) -> Self {
        let n = coeffs.len();
        InfinityExpansion {
            dim,
            order: d,
            regularity: nu,
            exponents: (0..n).map(|j| snap(d - nu - j as f64)).collect(),
            truncation: n,
            remainder_tag: ClassTag::weak(d, nu + n as f64),
            coeffs,
        }
    }

    /// `sum_{j < n} a_[nu+j] [xi, mu]^(d - nu - j)`.
    pub fn partial_sum(&self, n: usize) -> Expr {
        let parts: Vec<Expr> = self
            .coeffs
            .iter()
            .zip(&self.exponents)
            .take(n)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, e)| c.mul(&Expr::atom_pow(Atom::bracket(), *e)))
            .collect();
        Expr::sum(parts.iter())
    }

    /// `r_{a,n} = a - partial_sum(n)`.
    pub fn remainder(&self, a: &Expr, n: usize) -> Expr {
        a.sub(&self.partial_sum(n))
    }

    /// Class tag of coefficient `j`.
    pub fn coefficient_tag(&self, j: usize) -> ClassTag {
        ClassTag::weak(self.regularity + j as f64, self.regularity + j as f64)
    }

    /// Covariable degrees of each coefficient when it is `chi(xi)` times a
    /// polynomial in `xi` (or a polynomial), `None` otherwise.
    pub fn coefficient_degrees(&self) -> Vec<Option<Vec<u32>>> {
        self.coeffs.iter().map(|c| polynomial_degrees(&strip_excision(&xi_polynomial(c, self.dim)))).collect()
    }
}

/// Expansion at infinity with `n` coefficients.
///
/// With components, coefficient `i` collects `|xi|^(w_j + k) c_{j,k}(x, xi/|xi|)`
/// over all components `j` whose ladder offset `j + w_j - nu` plus the Taylor
/// index `k` equals `i`. Without components, the coefficients are read off the
/// `mu`-series of the full symbol.
pub fn expand_at_infinity(a: &PolySymbol, n: usize) -> Result<InfinityExpansion> {
    if a.components.is_empty() {
        let e = a.explicit.as_ref().ok_or_else(|| Error::Data("symbol has neither components nor an expression".into()))?;
        return expand_raw(e, a.dim, a.order, a.regularity, n);
    }
    let (d, nu) = (a.order, a.regularity);
    let mut coeffs = vec![Expr::zero(); n];
    for (j, comp) in a.components.iter().enumerate() {
        if comp.expr.is_zero() {
            continue;
        }
        let offset = snap(comp.degree - comp.weight - (d - nu));
        let offset = -offset;
        if !(is_integer(offset) && offset >= 0.0) {
            return Err(Error::Argument(format!(
                "component {j} (degree {}, weight {}) is off the exponent ladder of ({d}, {nu})",
                comp.degree, comp.weight
            )));
        }
        let o = offset as usize;
        if o >= n {
            continue;
        }
        let f = restrict_to_semisphere(&comp.expr, a.dim, comp.degree, comp.weight)?;
        let taylor = weighted_taylor(&f, comp.weight, n - o)?;
        for (k, c) in taylor.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let s = angular_to_symbol(c, comp.weight + k as f64)?;
            coeffs[o + k] = coeffs[o + k].add(&s);
        }
    }
    let chi = Expr::atom(Atom::chi(1.0));
    let coeffs = coeffs
        .into_iter()
        .map(|c| {
            let c = c.prune(1e-14);
            match a.excision {
                Excision::Covariable => chi.mul(&c),
                _ => {
                    let p = xi_polynomial(&c, a.dim);
                    if polynomial_degrees(&p).is_some() {
                        p
                    } else {
                        chi.mul(&c)
                    }
                }
            }
        })
        .collect();
    Ok(InfinityExpansion::new(a.dim, d, nu, coeffs))
}

/// Coefficients from the `mu`-series `q_l` of `a` by inverting
/// `q_l = sum_{j+k=l} a_[nu+j] zeta_{d-nu-j,k}`.
pub fn expand_raw(a: &Expr, dim: usize, d: f64, nu: f64, n: usize) -> Result<InfinityExpansion> {
    let q = mu_series(a, n)?.aligned(snap(d - nu), n)?;
    let mut coeffs: Vec<Expr> = Vec::with_capacity(n);
    for l in 0..n {
        let mut c = q[l].clone();
        for (j, aj) in coeffs.iter().enumerate() {
            let z = zeta_radial(d - nu - j as f64, l - j);
            if !z.is_zero() && !aj.is_zero() {
                c = c.sub(&aj.mul(&z));
            }
        }
        coeffs.push(c.prune(1e-14));
    }
    Ok(InfinityExpansion::new(dim, d, nu, coeffs))
}

/// Checks `r_{a,n}` against the class of order `(d, nu + n)`.
pub fn verify_remainder(a: &Expr, e: &InfinityExpansion, n: usize, depth: u32, grid: &GridSpec) -> Result<SeminormReport> {
    let r = e.remainder(a, n);
    verify_class(&r, e.dim, &ClassTag::weak(e.order, e.regularity + n as f64), depth, grid)
}

/// Powers `mu^(lead - j)` with coefficients `coeffs[j]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuExpansion {
    pub lead: f64,
    #[serde(skip)]
    pub coeffs: Vec<Expr>,
    pub truncation: usize,
}

impl MuExpansion {
    pub fn value(&self, x: &[f64], xi: &[f64], mu: f64) -> Result<C64> {
        let p = Point::symbol(x, xi, mu);
        let mut acc = C64::new(0.0, 0.0);
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                acc += c.eval(&p)? * mu.powf(self.lead - j as f64);
            }
        }
        Ok(acc)
    }

    /// Log-log slope in `mu` of `sup |a - expansion|` over a bounded set of
    /// `(x, xi)`; `-inf` when the difference vanishes to rounding.
    pub fn remainder_slope(&self, a: &Expr, dim: usize) -> Result<f64> {
        let c = Compiled::new(a);
        let mus = log_grid(10.0, 1e3, 10);
        let xs = sample_x(dim, a.depends_on_x());
        let mut sups = Vec::with_capacity(mus.len());
        let mut scale: f64 = 0.0;
        for &mu in &mus {
            let mut sup: f64 = 0.0;
            for x in &xs {
                for dir in xi_directions(dim) {
                    for s in [0.5, 1.0, 2.0] {
                        let xi: Vec<f64> = dir.iter().map(|v| v * s).collect();
                        let exact = c.eval(&Point::symbol(x, &xi, mu))?;
                        scale = scale.max(exact.norm());
                        sup = sup.max((exact - self.value(x, &xi, mu)?).norm());
                    }
                }
            }
            sups.push(sup);
        }
        if sups.iter().all(|s| *s <= 1e-13 * scale) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(loglog_slope(&mus, &sups))
    }
}

/// `[xi, mu]^m ~ sum_j zeta_{m,j}(xi) mu^(m-j)` with polynomial coefficients.
pub fn expand_bracket_power(m: f64, n: usize, dim: usize) -> Result<MuExpansion> {
    if m > 0.0 {
        return Err(Error::Argument(format!("bracket power {m} must be nonpositive")));
    }
    if n == 0 {
        return Err(Error::Argument("at least one coefficient is required".into()));
    }
    let coeffs = (0..n).map(|k| xi_polynomial(&zeta_radial(m, k), dim)).collect();
    Ok(MuExpansion { lead: m, coeffs, truncation: n })
}

/// `mu`-expansion of `a`, homogeneous of degree `m` for `|(xi, mu)| >= 1`.
pub fn expand_homogeneous_in_mu(a: &Expr, dim: usize, m: f64, n: usize) -> Result<MuExpansion> {
    let rep = check_homogeneity(a, dim, m, HomogeneityMode::LargeJoint)?;
    if !rep.passed {
        return Err(Error::Homogeneity { deviation: rep.max_deviation, tolerance: rep.tolerance });
    }
    let coeffs = mu_series(a, n)?.aligned(m, n)?;
    Ok(MuExpansion { lead: m, coeffs: coeffs.iter().map(|c| xi_polynomial(&c.prune(1e-14), dim)).collect(), truncation: n })
}

/// `q_l = sum_{j+k=l} a_[nu+j] zeta_{d-nu-j,k}` for `l < n`.
pub fn mu_power_expansion(e: &InfinityExpansion, n: usize) -> Result<MuExpansion> {
    let lead = snap(e.order - e.regularity);
    if lead > 0.0 {
        return Err(Error::Argument(format!("d - nu = {lead} must be nonpositive")));
    }
    if n > e.coeffs.len() {
        return Err(Error::Argument(format!("{n} orders requested, expansion has {}", e.coeffs.len())));
    }
    let mut coeffs = Vec::with_capacity(n);
    for l in 0..n {
        let mut q = Expr::zero();
        for (j, aj) in e.coeffs.iter().enumerate().take(l + 1) {
            let z = zeta_radial(lead - j as f64, l - j);
            if !z.is_zero() && !aj.is_zero() {
                q = q.add(&aj.mul(&z));
            }
        }
        coeffs.push(q);
    }
    Ok(MuExpansion { lead, coeffs, truncation: n })
}

/// Rewrites even nonnegative powers of `|xi|` and `<xi>` as polynomials in `xi`.
pub fn xi_polynomial(e: &Expr, dim: usize) -> Expr {
    let sq = |one: bool| {
        let mut s: Vec<Expr> = (0..dim).map(|i| Expr::atom_pow(Atom::Xi(i as u8), 2.0)).collect();
        if one {
            s.push(Expr::one());
        }
        Expr::sum(s.iter())
    };
    let mut parts = Vec::with_capacity(e.len());
    for t in e.terms() {
        let mut acc = Expr::constant(t.coef);
        let mut keep = Vec::new();
        for (a, p) in t.mono.factors() {
            let even = p > 0.0 && is_integer(p) && (p as i64) % 2 == 0;
            match a {
                Atom::AbsXi | Atom::JapXi if even => {
                    let base = sq(*a == Atom::JapXi);
                    let mut pw = Expr::one();
                    for _ in 0..(p as i64 / 2) {
                        pw = pw.mul(&base);
                    }
                    acc = acc.mul(&pw);
                }
                _ => keep.push((a.clone(), p)),
            }
        }
        parts.push(acc.mul(&Expr::from_terms(vec![Term { coef: C64::new(1.0, 0.0), mono: Monomial::from_factors(keep) }])));
    }
    Expr::sum(parts.iter())
}

/// Divides out a common factor `chi(xi)`, if every term carries it.
pub fn strip_excision(e: &Expr) -> Expr {
    let chi = Atom::chi(1.0);
    if e.is_zero() || !e.terms().iter().all(|t| t.mono.exponent_of(&chi) == 1.0) {
        return e.clone();
    }
    Expr::from_terms(e.terms().iter().map(|t| Term { coef: t.coef, mono: t.mono.with_exponent(&chi, 0.0) }).collect())
}

/// Total `xi`-degree of each term when `e` is a polynomial in `xi` with
/// `x`-dependent coefficients.
pub fn polynomial_degrees(e: &Expr) -> Option<Vec<u32>> {
    let mut out = Vec::new();
    for t in e.terms() {
        let mut deg = 0u32;
        for (a, p) in t.mono.factors() {
            match a {
                Atom::Xi(_) if p > 0.0 && is_integer(p) => deg += p as u32,
                Atom::X(_) | Atom::Trig { .. } => {}
                _ => return None,
            }
        }
        if !out.contains(&deg) {
            out.push(deg);
        }
    }
    out.sort_unstable();
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::expr::TrigKind;

    fn norm(p: f64) -> Expr {
        Expr::atom_pow(Atom::Norm, p)
    }
    fn abs(p: f64) -> Expr {
        Expr::atom_pow(Atom::AbsXi, p)
    }
    fn chi() -> Expr {
        Expr::atom(Atom::chi(1.0))
    }

    fn close(a: &Expr, b: &Expr, dim: usize) -> bool {
        let d = a.sub(b);
        let c = Compiled::new(&d);
        for s in [0.3, 1.5, 4.0] {
            for dir in xi_directions(dim) {
                let xi: Vec<f64> = dir.iter().map(|v| v * s).collect();
                for x in [0.0, 1.3] {
                    if c.eval(&Point::symbol(&vec![x; dim], &xi, 0.0)).unwrap().norm() > 1e-10 {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn bracket_power_examples() {
        let e = expand_bracket_power(0.0, 4, 2).unwrap();
        assert_eq!(e.coeffs[0], Expr::one());
        assert!(e.coeffs[1..].iter().all(Expr::is_zero));
        let e = expand_bracket_power(-2.0, 4, 1).unwrap();
        assert_eq!(e.coeffs[2], Expr::atom_pow(Atom::Xi(0), 2.0).neg());
        assert!(e.coeffs[1].is_zero() && e.coeffs[3].is_zero());
        let e = expand_bracket_power(-1.0, 3, 2).unwrap();
        let want = Expr::atom_pow(Atom::Xi(0), 2.0).add(&Expr::atom_pow(Atom::Xi(1), 2.0)).scale_real(-0.5);
        assert_eq!(e.coeffs[2], want);
        assert!(matches!(expand_bracket_power(1.0, 3, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn homogeneous_in_mu_examples() {
        let mu2 = Expr::atom_pow(Atom::Mu, 2.0);
        let xi2 = Expr::atom_pow(Atom::Xi(0), 2.0);
        let a = mu2.add(&xi2);
        let e = expand_homogeneous_in_mu(&a, 1, 2.0, 4).unwrap();
        assert_eq!(e.coeffs, vec![Expr::one(), Expr::zero(), xi2.clone(), Expr::zero()]);
        assert_eq!(e.remainder_slope(&a, 1).unwrap(), f64::NEG_INFINITY);
        let inv = a.pow_int(-1).unwrap();
        assert_eq!(expand_homogeneous_in_mu(&inv, 1, -2.0, 1).unwrap().coeffs[0], Expr::one());
        let b = Expr::atom(Atom::Mu).mul(&inv);
        let e = expand_homogeneous_in_mu(&b, 1, -1.0, 4).unwrap();
        assert_eq!(e.coeffs[0], Expr::one());
        assert_eq!(e.coeffs[2], xi2.neg());
        let s = e.remainder_slope(&b, 1).unwrap();
        assert!(s < -5.0 + 0.1, "{s}");
        assert!(matches!(
            expand_homogeneous_in_mu(&Expr::atom_pow(Atom::JapXiMu, -2.0), 1, -2.0, 2),
            Err(Error::Homogeneity { .. })
        ));
    }

    #[test]
    fn single_component_model() {
        let (d, nu) = (-2.5, 0.5);
        let a = PolySymbol::classical(2, d, nu, vec![abs(nu).mul(&norm(d - nu))], Excision::Covariable);
        let e = expand_at_infinity(&a, 3).unwrap();
        assert_eq!(e.coeffs[0], chi().mul(&abs(nu)));
        assert!(e.coeffs[1].is_zero() && e.coeffs[2].is_zero());
        assert_eq!(e.exponents, vec![-3.0, -4.0, -5.0]);
    }

    #[test]
    fn strong_principal_limit_symbol() {
        let a = PolySymbol::classical(1, -2.0, 0.0, vec![norm(-2.0)], Excision::Joint);
        let e = expand_at_infinity(&a, 3).unwrap();
        assert_eq!(e.coeffs[0], Expr::one());
        assert_eq!(e.coefficient_degrees()[0], Some(vec![0]));
    }

    #[test]
    fn mu_independent_symbol() {
        let a = Expr::atom_pow(Atom::JapXi, -1.5);
        let e = expand_at_infinity(&PolySymbol::raw(1, -1.5, -1.5, a.clone()), 3).unwrap();
        assert_eq!(e.coeffs[0], a);
        assert!(e.coeffs[1].is_zero() && e.coeffs[2].is_zero());
    }

    #[test]
    fn components_agree_with_series() {
        // chi |xi|^-1 |xi,mu|^-2 plus a component of degree -4 and weight -2
        let c0 = abs(-1.0).mul(&norm(-2.0));
        let c1 = Expr::atom(Atom::Trig { axis: 0, freq: 1, kind: TrigKind::Cos })
            .mul(&Expr::atom(Atom::Xi(0)))
            .mul(&abs(-3.0))
            .mul(&norm(-2.0));
        let a = PolySymbol::classical(1, -3.0, -1.0, vec![c0, c1], Excision::Covariable);
        let e1 = expand_at_infinity(&a, 4).unwrap();
        let e2 = expand_raw(&a.full(), 1, -3.0, -1.0, 4).unwrap();
        for (x, y) in e1.coeffs.iter().zip(&e2.coeffs) {
            assert!(close(x, y, 1), "{x} vs {y}");
        }
    }

    #[test]
    fn mu_power_example() {
        let a = chi().mul(&abs(-1.0)).mul(&norm(-2.0));
        let e = expand_raw(&a, 1, -3.0, -1.0, 3).unwrap();
        let q = mu_power_expansion(&e, 3).unwrap();
        assert_eq!(q.coeffs[0], chi().mul(&abs(-1.0)));
        assert!(q.coeffs[1].is_zero());
        assert_eq!(q.coeffs[2], chi().mul(&abs(1.0)).neg());
        let strong = expand_raw(&norm(2.0), 1, 2.0, 0.0, 2).unwrap();
        assert!(matches!(mu_power_expansion(&strong, 2), Err(Error::Argument(_))));
    }

    #[test]
    fn polynomial_structure() {
        let xi = Expr::atom(Atom::Xi(0));
        let a = Expr::atom_pow(Atom::Mu, 2.0).add(&xi.mul(&xi));
        let sym = PolySymbol::classical(1, 2.0, 0.0, vec![a, Expr::zero(), Expr::atom(Atom::Trig { axis: 0, freq: 1, kind: TrigKind::Sin })], Excision::None);
        let e = expand_at_infinity(&sym, 4).unwrap();
        assert_eq!(e.coeffs[0], Expr::one());
        let degs = e.coefficient_degrees();
        assert!(degs.iter().all(Option::is_some), "{degs:?}");
        let rep = verify_remainder(&sym.full(), &e, 2, 2, &GridSpec::with_density(10)).unwrap();
        assert!(rep.passed, "{}", rep.max_slope);
    }
}
