//! Truncated symbol calculus.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::log_grid;
use crate::symbol::class::{xi_directions, ClassTag};
use crate::symbol::diff::{derivative_multi, factorial_multi, multi_indices, Domain};
use crate::symbol::eval::{Compiled, Point};
use crate::symbol::expr::{Atom, Expr, C64};
use crate::symbol::homogeneity::sample_x;

pub const MAX_TRUNCATION: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncatedSymbol {
    #[serde(skip)]
    pub main: Expr,
    pub tag: ClassTag,
    pub truncation: usize,
    pub remainder_tag: ClassTag,
}

fn check_truncation(n: usize) -> Result<()> {
    if n == 0 || n > MAX_TRUNCATION {
        return Err(Error::Argument(format!("truncation {n} outside 1..={MAX_TRUNCATION}")));
    }
    Ok(())
}

/// Tag of a product: strong only when both factors are strong.
pub fn product_tag(t1: &ClassTag, t0: &ClassTag) -> ClassTag {
    if t1.family.is_strong() && t0.family.is_strong() {
        ClassTag::strong(t1.order + t0.order)
    } else {
        let nu = |t: &ClassTag| if t.family.is_strong() { 0.0 } else { t.regularity };
        ClassTag::weak(t1.order + t0.order, nu(t1) + nu(t0))
    }
}

/// `(-i)^|beta|` as a complex factor.
fn minus_i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// `sum_{|alpha| < n} (1/alpha!) (d_xi^alpha a1) (D_x^alpha a0)` without tags.
pub fn leibniz_expr(a1: &Expr, a0: &Expr, dim: usize, n: usize) -> Result<Expr> {
    let mut parts = Vec::new();
    let x_dep = a0.depends_on_x();
    for k in 0..n as u32 {
        if k > 0 && !x_dep {
            break;
        }
        for alpha in multi_indices(dim, k) {
            let zero = vec![0; dim];
            let d1 = derivative_multi(a1, &alpha, &zero, 0, Domain::Punctured)?;
            if d1.is_zero() {
                continue;
            }
            let d0 = derivative_multi(a0, &zero, &alpha, 0, Domain::Punctured)?;
            if d0.is_zero() {
                continue;
            }
            let c = minus_i_pow(k) / factorial_multi(&alpha);
            parts.push(d1.mul(&d0).scale(c));
        }
    }
    Ok(Expr::sum(parts.iter()))
}

pub fn leibniz_truncated(a1: &Expr, t1: &ClassTag, a0: &Expr, t0: &ClassTag, dim: usize, n: usize) -> Result<TruncatedSymbol> {
    check_truncation(n)?;
    let tag = product_tag(t1, t0);
    Ok(TruncatedSymbol { main: leibniz_expr(a1, a0, dim, n)?, tag, truncation: n, remainder_tag: tag.shifted(n as f64) })
}

/// `sum_{|alpha| < n} (1/alpha!) d_xi^alpha D_x^alpha conj(a)`.
pub fn adjoint_expr(a: &Expr, dim: usize, n: usize) -> Result<Expr> {
    let c = a.conj();
    let x_dep = c.depends_on_x();
    let mut parts = Vec::new();
    for k in 0..n as u32 {
        if k > 0 && !x_dep {
            break;
        }
        for alpha in multi_indices(dim, k) {
            let d = derivative_multi(&c, &alpha, &alpha, 0, Domain::Punctured)?;
            if !d.is_zero() {
                parts.push(d.scale(minus_i_pow(k) / factorial_multi(&alpha)));
            }
        }
    }
    Ok(Expr::sum(parts.iter()))
}

pub fn adjoint_truncated(a: &Expr, tag: &ClassTag, dim: usize, n: usize) -> Result<TruncatedSymbol> {
    check_truncation(n)?;
    Ok(TruncatedSymbol { main: adjoint_expr(a, dim, n)?, tag: *tag, truncation: n, remainder_tag: tag.shifted(n as f64) })
}

pub const SCHEDULE_LIMIT: f64 = 1e9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticSum {
    #[serde(skip)]
    pub symbol: Expr,
    pub tag: Option<ClassTag>,
    /// Excision scale `c_j` used for part `j`.
    pub scales: Vec<f64>,
    /// Measured depth-2 seminorm of each excised part at its scale.
    pub seminorms: Vec<f64>,
}

/// Depth-2 seminorm of `chi(xi / c) a` in the class `tag`, sampled on
/// `|xi| in [c, 1e3 c]` where the excised symbol lives.
pub fn excised_seminorm(a: &Expr, tag: &ClassTag, dim: usize, c: f64) -> Result<f64> {
    let e = Expr::atom(Atom::chi(c)).mul(a);
    let xs = sample_x(dim, a.depends_on_x());
    let radii = log_grid(c, 1e3 * c, 5);
    let mut best: f64 = 0.0;
    for total in 0..=2u32 {
        for ab in 0..=total {
            for alpha in multi_indices(dim, ab) {
                for bb in 0..=(total - ab) {
                    if bb > 0 && !a.depends_on_x() {
                        continue;
                    }
                    for beta in multi_indices(dim, bb) {
                        let j = total - ab - bb;
                        let der = derivative_multi(&e, &alpha, &beta, j, Domain::Punctured)?;
                        if der.is_zero() {
                            continue;
                        }
                        let comp = Compiled::new(&der);
                        for x in &xs {
                            for dir in xi_directions(dim) {
                                for &s in &radii {
                                    let xi: Vec<f64> = dir.iter().map(|v| v * s).collect();
                                    for m in [0.0, 1e-2 * s, s, 1e2 * s] {
                                        let v = comp.eval(&Point::symbol(x, &xi, m))?.norm();
                                        best = best.max(v / tag.weight(ab, j, s, m));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(best)
}

/// `sum_j chi(xi / c_j) a_j`, with `c_j = 2^k` the smallest scale whose
/// excised part has seminorm at most `2^-j` in the class one order higher.
pub fn asymptotic_sum(parts: &[(Expr, ClassTag)], dim: usize) -> Result<AsymptoticSum> {
    if parts.len() > 12 {
        return Err(Error::Argument(format!("{} parts, at most 12 supported", parts.len())));
    }
    let mut scales = Vec::with_capacity(parts.len());
    let mut seminorms = Vec::with_capacity(parts.len());
    let mut terms = Vec::with_capacity(parts.len());
    for (j, (a, tag)) in parts.iter().enumerate() {
        let bound = 0.5f64.powi(j as i32);
        let coarse = tag.shifted(-1.0);
        let mut found = None;
        let mut k = 0;
        loop {
            let c = 2f64.powi(k);
            if c > SCHEDULE_LIMIT {
                break;
            }
            let s = excised_seminorm(a, &coarse, dim, c)?;
            if s <= bound {
                found = Some((c, s));
                break;
            }
            k += 1;
        }
        let (c, s) = found.ok_or(Error::Schedule { index: j, limit: SCHEDULE_LIMIT })?;
        scales.push(c);
        seminorms.push(s);
        terms.push(Expr::atom(Atom::chi(c)).mul(a));
    }
    Ok(AsymptoticSum { symbol: Expr::sum(terms.iter()), tag: parts.first().map(|p| p.1), scales, seminorms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::class::{verify_class, GridSpec};
    use crate::symbol::expr::TrigKind;

    fn sin() -> Expr {
        Expr::atom(Atom::Trig { axis: 0, freq: 1, kind: TrigKind::Sin })
    }
    fn cos() -> Expr {
        Expr::atom(Atom::Trig { axis: 0, freq: 1, kind: TrigKind::Cos })
    }
    fn xi() -> Expr {
        Expr::atom(Atom::Xi(0))
    }
    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    #[test]
    fn x_independent_product_is_pointwise() {
        let a1 = Expr::atom_pow(Atom::Norm, -2.0);
        let a0 = Expr::atom_pow(Atom::JapXi, 3.0);
        for n in 1..=4 {
            assert_eq!(leibniz_expr(&a1, &a0, 2, n).unwrap(), a1.mul(&a0));
        }
    }

    #[test]
    fn derivative_times_multiplication() {
        let r = leibniz_expr(&xi(), &sin(), 1, 2).unwrap();
        assert_eq!(r, xi().mul(&sin()).sub(&cos().scale(i())));
    }

    #[test]
    fn identity_is_neutral() {
        let a = sin().mul(&Expr::atom_pow(Atom::JapXiMu, -1.0));
        let one = Expr::one();
        assert_eq!(leibniz_expr(&a, &one, 1, 4).unwrap(), a);
        assert_eq!(leibniz_expr(&one, &a, 1, 4).unwrap(), a);
    }

    #[test]
    fn adjoint_examples() {
        let a = Expr::atom_pow(Atom::JapXiMu, -2.0);
        assert_eq!(adjoint_expr(&a, 1, 3).unwrap(), a);
        // (i sin(x) xi)^* = -i sin(x) xi + d_xi D_x (-i sin(x) xi) = -i sin(x) xi - cos(x)
        let b = sin().mul(&xi()).scale(i());
        let want = sin().mul(&xi()).scale(-i()).sub(&cos());
        assert_eq!(adjoint_expr(&b, 1, 2).unwrap(), want);
        assert_eq!(adjoint_expr(&adjoint_expr(&b, 1, 2).unwrap(), 1, 2).unwrap(), b);
    }

    #[test]
    fn truncation_bounds() {
        let t = ClassTag::strong(0.0);
        assert!(leibniz_truncated(&Expr::one(), &t, &Expr::one(), &t, 1, 7).is_err());
        let r = leibniz_truncated(&Expr::one(), &t, &Expr::one(), &ClassTag::weak(1.0, 1.0), 1, 3).unwrap();
        assert_eq!(r.tag, ClassTag::weak(1.0, 1.0));
        assert_eq!(r.remainder_tag, ClassTag::weak(-2.0, -2.0));
    }

    #[test]
    fn asymptotic_sum_of_brackets() {
        let d = 1.0;
        let parts: Vec<(Expr, ClassTag)> =
            (0..4).map(|j| (Expr::atom_pow(Atom::JapXiMu, d - j as f64), ClassTag::weak(d - j as f64, -(j as f64)))).collect();
        let s = asymptotic_sum(&parts, 1).unwrap();
        assert_eq!(s.scales.len(), 4);
        assert!(s.scales.windows(2).all(|w| w[0] <= w[1]), "{:?}", s.scales);
        let grid = GridSpec::with_density(10);
        assert!(verify_class(&s.symbol, 1, &ClassTag::weak(d, 0.0), 2, &grid).unwrap().passed);
        for n in 1..=3 {
            let partial = Expr::sum(parts.iter().take(n).map(|p| &p.0));
            let r = s.symbol.sub(&partial);
            let rep = verify_class(&r, 1, &ClassTag::weak(d - n as f64, -(n as f64)), 2, &grid).unwrap();
            assert!(rep.passed, "n={n} slope {}", rep.max_slope);
        }
        assert!(asymptotic_sum(&[], 1).unwrap().symbol.is_zero());
    }

    #[test]
    fn misdeclared_order_fails_schedule() {
        let parts = vec![(Expr::atom_pow(Atom::JapXiMu, 2.0), ClassTag::strong(0.0))];
        assert!(matches!(asymptotic_sum(&parts, 1), Err(Error::Schedule { .. })));
    }
}
