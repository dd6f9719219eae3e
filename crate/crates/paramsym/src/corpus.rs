//! Reference symbols used by the invariant and acceptance suites.

use crate::error::Result;
use crate::infinity::{Excision, PolySymbol};
use crate::symbol::expr::{Atom, Expr, TrigKind};

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub symbol: PolySymbol,
}

fn norm(p: f64) -> Expr {
    Expr::atom_pow(Atom::Norm, p)
}

fn abs(p: f64) -> Expr {
    Expr::atom_pow(Atom::AbsXi, p)
}

fn xi(i: u8) -> Expr {
    Expr::atom(Atom::Xi(i))
}

fn trig(axis: u8, kind: TrigKind) -> Expr {
    Expr::atom(Atom::Trig { axis, freq: 1, kind })
}

fn entry(name: &'static str, symbol: PolySymbol) -> CorpusEntry {
    CorpusEntry { name, symbol }
}

/// Twelve symbols covering weak and strong classes, fractional regularity,
/// `x`-dependence, lower-order components and dimensions one to three.
pub fn corpus() -> Result<Vec<CorpusEntry>> {
    let mu = Expr::atom(Atom::Mu);
    let mu2 = Expr::atom_pow(Atom::Mu, 2.0);
    let xi0sq = xi(0).mul(&xi(0));
    let anis = mu2.add(&xi0sq).add(&xi(1).mul(&xi(1)).scale_real(2.0));
    Ok(vec![
        entry("log_model", PolySymbol::classical(1, -3.0, -1.0, vec![abs(-1.0).mul(&norm(-2.0))], Excision::Covariable)),
        entry("joint_resolvent", PolySymbol::classical(1, -2.0, 0.0, vec![norm(-2.0)], Excision::Joint)),
        entry(
            "schroedinger",
            PolySymbol::classical(1, 2.0, 0.0, vec![mu2.add(&xi0sq), Expr::zero(), trig(0, TrigKind::Sin)], Excision::None),
        ),
        entry("planar_quotient", PolySymbol::classical(2, 0.0, 2.0, vec![xi0sq.mul(&norm(-2.0))], Excision::Covariable)),
        entry("half_regular", PolySymbol::classical(1, -1.0, 0.5, vec![abs(0.5).mul(&norm(-1.5))], Excision::Covariable)),
        entry(
            "two_component",
            PolySymbol::classical(
                1,
                -2.0,
                0.0,
                vec![norm(-2.0), trig(0, TrigKind::Cos).mul(&xi(0)).mul(&abs(-2.0)).mul(&norm(-2.0))],
                Excision::Covariable,
            ),
        ),
        entry("shifted_norm", PolySymbol::classical(1, -1.0, 0.0, vec![mu.add(&norm(1.0)).pow_int(-1)?], Excision::Joint)),
        entry("parameter_free", PolySymbol::classical(2, -2.0, -2.0, vec![abs(-2.0)], Excision::Covariable)),
        entry("spatial_direction", PolySymbol::classical(3, -2.0, 0.0, vec![xi(2).mul(&abs(-1.0)).mul(&norm(-2.0))], Excision::Covariable)),
        entry("mu_weighted", PolySymbol::classical(1, -1.0, 0.0, vec![mu.mul(&norm(-2.0))], Excision::Joint)),
        entry(
            "anisotropic",
            PolySymbol::classical(
                2,
                -2.0,
                0.0,
                vec![anis.pow_int(-1)?, Expr::zero(), trig(0, TrigKind::Cos).mul(&anis.pow_int(-2)?).neg()],
                Excision::Joint,
            ),
        ),
        entry(
            "variable_direction",
            PolySymbol::classical(
                1,
                -1.0,
                0.0,
                vec![Expr::real(2.0).add(&trig(0, TrigKind::Sin)).mul(&xi(0)).mul(&abs(-1.0)).mul(&norm(-1.0))],
                Excision::Covariable,
            ),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::homogeneity::{check_homogeneity, HomogeneityMode};

    #[test]
    fn entries_are_homogeneous_and_distinct() {
        let c = corpus().unwrap();
        assert_eq!(c.len(), 12);
        let mut names: Vec<_> = c.iter().map(|e| e.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 12);
        for e in &c {
            for comp in &e.symbol.components {
                if comp.expr.is_zero() {
                    continue;
                }
                let r = check_homogeneity(&comp.expr, e.symbol.dim, comp.degree, HomogeneityMode::Joint).unwrap();
                assert!(r.passed, "{}: {}", e.name, r.max_deviation);
            }
        }
    }

    #[test]
    fn strong_entries() {
        let strong: Vec<_> = corpus().unwrap().into_iter().filter(|e| e.symbol.is_strong()).map(|e| e.name).collect();
        assert_eq!(strong, ["joint_resolvent", "schroedinger", "shifted_norm", "mu_weighted", "anisotropic"]);
    }
}
