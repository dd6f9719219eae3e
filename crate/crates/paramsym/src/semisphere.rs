//! Polar analysis on the punctured unit semisphere `{(xi, mu) : |(xi, mu)| = 1, mu >= 0, xi != 0}`.
//!
//! Coordinates are `r = |xi|` in `(0, 1]`, `phi = xi / |xi|` and the height
//! `sqrt(1 - r^2) = mu`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{factorial, slope};
use crate::symbol::eval::{Compiled, Point};
use crate::symbol::expr::{is_integer, snap, Atom, Expr, RadialBase, SmoothAtom, Var, C64};
use crate::symbol::homogeneity::{check_homogeneity, sample_x, HomogeneityMode};
use crate::symbol::smooth;

/// A function on the semisphere with a declared weight `r^weight`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarFunction {
    pub dim: usize,
    pub expr: Expr,
    pub weight: f64,
    pub taylor: Option<Vec<Expr>>,
}

fn restrict_map(a: &Atom) -> Option<Result<Expr>> {
    match a {
        Atom::Xi(i) => Some(Ok(Expr::atom(Atom::R).mul(&Expr::atom(Atom::Phi(*i))))),
        Atom::AbsXi => Some(Ok(Expr::atom(Atom::R))),
        Atom::Mu => Some(Ok(Expr::atom(Atom::Height))),
        Atom::Norm => Some(Ok(Expr::one())),
        Atom::JapXi | Atom::JapXiMu => {
            Some(Err(Error::grammar("expr", "Japanese brackets are not homogeneous")))
        }
        Atom::Smooth(s) => match s.base {
            RadialBase::AbsXi => Some(Ok(Expr::atom(Atom::Smooth(SmoothAtom { base: RadialBase::R, ..s.clone() })))),
            RadialBase::Norm => Some(Ok(Expr::real(smooth::derivative(s.f, s.order as usize, s.scale.0)))),
            RadialBase::R => Some(Err(Error::grammar("expr", "polar atom inside a symbol"))),
        },
        Atom::R | Atom::Phi(_) | Atom::Height => Some(Err(Error::grammar("expr", "polar atom inside a symbol"))),
        _ => None,
    }
}

/// Substitution `(xi, mu) -> (r phi, sqrt(1 - r^2))` without the homogeneity check.
pub fn restrict_unchecked(a: &Expr) -> Result<Expr> {
    a.substitute(&restrict_map)
}

/// `a(r phi; sqrt(1 - r^2))` for `a` homogeneous of degree `degree`.
pub fn restrict_to_semisphere(a: &Expr, dim: usize, degree: f64, weight: f64) -> Result<PolarFunction> {
    let rep = check_homogeneity(a, dim, degree, HomogeneityMode::Joint)?;
    if !rep.passed {
        return Err(Error::Homogeneity { deviation: rep.max_deviation, tolerance: rep.tolerance });
    }
    Ok(PolarFunction { dim, expr: restrict_unchecked(a)?, weight, taylor: None })
}

/// Degree-`degree` homogeneous extension `|xi,mu|^d f((xi, mu) / |xi,mu|)`.
pub fn extend_homogeneous(f: &PolarFunction, degree: f64) -> Result<Expr> {
    let norm_inv = || Expr::atom_pow(Atom::Norm, -1.0);
    let body = f.expr.substitute(&|a| match a {
        Atom::R => Some(Ok(Expr::atom(Atom::AbsXi).mul(&norm_inv()))),
        Atom::Phi(i) => Some(Ok(Expr::atom(Atom::Xi(*i)).mul(&Expr::atom_pow(Atom::AbsXi, -1.0)))),
        Atom::Height => Some(Ok(Expr::atom(Atom::Mu).mul(&norm_inv()))),
        Atom::Smooth(s) if s.base == RadialBase::R => {
            Some(Err(Error::grammar("expr", "radial profile of r has no homogeneous extension in the grammar")))
        }
        Atom::Xi(_) | Atom::Mu | Atom::AbsXi | Atom::Norm | Atom::JapXi | Atom::JapXiMu => {
            Some(Err(Error::grammar("expr", "symbol atom inside a polar function")))
        }
        _ => None,
    })?;
    Ok(body.mul(&Expr::atom_pow(Atom::Norm, degree)))
}

fn check_taylor_form(e: &Expr) -> Result<()> {
    for t in e.terms() {
        for (a, p) in t.mono.factors() {
            match a {
                Atom::R => {
                    if !(p > 0.0 && is_integer(p)) {
                        return Err(Error::NotTaylor(format!("factor r^{p} after removing the weight")));
                    }
                }
                Atom::Height | Atom::Phi(_) | Atom::X(_) | Atom::Trig { .. } => {}
                Atom::Smooth(s) if s.base == RadialBase::R => {}
                Atom::Group(g) => {
                    check_taylor_form(g)?;
                    if p < 0.0 && at_origin(g)?.is_zero() {
                        return Err(Error::NotTaylor("denominator vanishes at r = 0".into()));
                    }
                }
                other => {
                    return Err(Error::NotTaylor(format!(
                        "atom {} is not a semisphere variable",
                        crate::symbol::expr::atom_name(other)
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Value at `r = 0` as a function of `(x, phi)`.
fn at_origin(e: &Expr) -> Result<Expr> {
    e.substitute(&|a| match a {
        Atom::R => Some(Ok(Expr::zero())),
        Atom::Height => Some(Ok(Expr::one())),
        Atom::Smooth(s) if s.base == RadialBase::R => Some(Ok(Expr::real(smooth::derivative(s.f, s.order as usize, 0.0)))),
        _ => None,
    })
}

/// Angular coefficients `(1/j!) d_r^j (r^-weight f)|_{r=0}` for `j < n`.
pub fn weighted_taylor(f: &PolarFunction, weight: f64, n: usize) -> Result<Vec<Expr>> {
    let g = f.expr.mul(&Expr::atom_pow(Atom::R, -weight));
    check_taylor_form(&g)?;
    let mut out = Vec::with_capacity(n);
    let mut d = g;
    for j in 0..n {
        out.push(at_origin(&d)?.scale_real(1.0 / factorial(j as u32)));
        if j + 1 < n {
            d = d.derivative_raw(Var::R);
        }
    }
    Ok(out)
}

impl PolarFunction {
    pub fn with_taylor(mut self, n: usize) -> Result<Self> {
        self.taylor = Some(weighted_taylor(&self, self.weight, n)?);
        Ok(self)
    }
}

/// Unit vectors of the sphere `S^{n-1}` used for sampling.
pub fn sphere_samples(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..8).map(|k| {
            let t = 0.3 + k as f64 * std::f64::consts::PI / 4.0;
            vec![t.cos(), t.sin()]
        }).collect(),
        _ => {
            let mut v = Vec::new();
            for i in 0..4 {
                let z = -0.75 + 0.5 * i as f64;
                let s = (1.0 - z * z).sqrt();
                for k in 0..4 {
                    let t = 0.2 + k as f64 * std::f64::consts::FRAC_PI_2;
                    v.push(vec![s * t.cos(), s * t.sin(), z]);
                }
            }
            v
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TaylorDecay {
    /// Sampled radii `2^-k`.
    pub radii: Vec<f64>,
    /// Sup over angles and `x` of the remainder.
    pub remainder: Vec<f64>,
    /// Fitted order; infinite when the remainder vanishes identically.
    pub order: f64,
}

/// Measures the decay of `f - omega(r) sum_{j<n} r^{weight+j} c_j` as `r -> 0`.
pub fn taylor_remainder_decay(f: &PolarFunction, weight: f64, coeffs: &[Expr], ks: std::ops::RangeInclusive<i32>) -> Result<TaylorDecay> {
    let full = Compiled::new(&f.expr);
    let parts: Vec<Compiled> = coeffs.iter().map(Compiled::new).collect();
    let xs = sample_x(f.dim, f.expr.depends_on_x());
    let mut radii = Vec::new();
    let mut rem = Vec::new();
    let mut fscale: f64 = 0.0;
    for k in ks {
        let r = 2f64.powi(-k);
        let om = smooth::value(smooth::SmoothFn::Omega, r);
        let mut sup: f64 = 0.0;
        for x in &xs {
            for phi in sphere_samples(f.dim) {
                let p = Point::polar(x, r, &phi);
                let mut v = full.eval(&p)?;
                fscale = fscale.max(v.norm() * r.powf(-weight));
                for (j, c) in parts.iter().enumerate() {
                    v -= c.eval(&p)? * (om * r.powf(weight + j as f64));
                }
                sup = sup.max(v.norm());
            }
        }
        radii.push(r);
        rem.push(sup);
    }
    let scale = rem.iter().cloned().fold(0.0, f64::max);
    // Remainders at rounding level relative to r^-weight f count as identically zero.
    let order = if scale <= 1e-13 * fscale.max(f64::MIN_POSITIVE) {
        f64::INFINITY
    } else {
        let (lx, ly): (Vec<f64>, Vec<f64>) =
            radii.iter().zip(&rem).filter(|(_, v)| **v > 0.0).map(|(r, v)| (r.log2(), v.log2())).unzip();
        slope(&lx, &ly)
    };
    Ok(TaylorDecay { radii, remainder: rem, order })
}

/// `|xi|^weight c(x, xi / |xi|)` for an angular coefficient `c`.
pub fn angular_to_symbol(c: &Expr, weight: f64) -> Result<Expr> {
    let body = c.substitute(&|a| match a {
        Atom::Phi(i) => Some(Ok(Expr::atom(Atom::Xi(*i)).mul(&Expr::atom_pow(Atom::AbsXi, -1.0)))),
        Atom::R | Atom::Height => Some(Err(Error::grammar("expr", "radial atom in an angular coefficient"))),
        _ => None,
    })?;
    Ok(body.mul(&Expr::atom_pow(Atom::AbsXi, snap(weight))))
}

/// `|xi|^nu a_<nu>(x, xi/|xi|)`.
pub fn principal_angular_symbol(a: &Expr, dim: usize, degree: f64, weight: f64) -> Result<Expr> {
    let f = restrict_to_semisphere(a, dim, degree, weight)?;
    let c = weighted_taylor(&f, weight, 1)?;
    angular_to_symbol(&c[0], weight)
}

/// For `n = 1` the sphere is `{+1, -1}`; returns the coefficient at both points.
pub fn angular_pair(c: &Expr, x: &[f64]) -> Result<(C64, C64)> {
    let cc = Compiled::new(c);
    Ok((cc.eval(&Point::polar(x, 0.0, &[1.0]))?, cc.eval(&Point::polar(x, 0.0, &[-1.0]))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar(e: Expr, w: f64) -> PolarFunction {
        PolarFunction { dim: 1, expr: e, weight: w, taylor: None }
    }

    #[test]
    fn model_symbol_restricts_to_power() {
        let (d, nu) = (-2.5, 0.5);
        let a = Expr::atom_pow(Atom::AbsXi, nu).mul(&Expr::atom_pow(Atom::Norm, d - nu));
        let f = restrict_to_semisphere(&a, 2, d, nu).unwrap();
        assert_eq!(f.expr, Expr::atom_pow(Atom::R, nu));
        assert_eq!(extend_homogeneous(&f, d).unwrap(), a);
    }

    #[test]
    fn resolvent_restricts_to_one() {
        let a = Expr::atom_pow(Atom::Norm, -2.0);
        assert_eq!(restrict_to_semisphere(&a, 1, -2.0, 0.0).unwrap().expr, Expr::one());
        assert_eq!(extend_homogeneous(&polar(Expr::one(), 0.0), 0.0).unwrap(), Expr::one());
    }

    #[test]
    fn non_homogeneous_rejected() {
        let a = Expr::atom_pow(Atom::JapXiMu, -2.0);
        assert!(matches!(restrict_to_semisphere(&a, 1, -2.0, 0.0), Err(Error::Homogeneity { .. })));
    }

    #[test]
    fn taylor_of_inverse_height() {
        let f = polar(Expr::atom_pow(Atom::R, 2.0).mul(&Expr::atom_pow(Atom::Height, -1.0)), 2.0);
        let c = weighted_taylor(&f, 2.0, 5).unwrap();
        let vals: Vec<f64> = c.iter().map(|e| e.as_constant().unwrap().re).collect();
        let want = [1.0, 0.0, 0.5, 0.0, 0.375];
        for (v, w) in vals.iter().zip(want) {
            assert!((v - w).abs() < 1e-14, "{vals:?}");
        }
    }

    #[test]
    fn fractional_remainder_is_not_taylor() {
        let f = polar(Expr::atom_pow(Atom::R, 0.5), 0.0);
        assert!(matches!(weighted_taylor(&f, 0.0, 2), Err(Error::NotTaylor(_))));
    }

    #[test]
    fn excision_profile_has_no_extension() {
        let f = polar(Expr::atom(Atom::smooth(smooth::SmoothFn::Omega, 0, RadialBase::R, 1.0)), 0.0);
        assert!(matches!(extend_homogeneous(&f, 0.0), Err(Error::Grammar { .. })));
    }

    #[test]
    fn principal_angular_examples() {
        let xi0 = Expr::atom_pow(Atom::Xi(0), 2.0);
        let a = xi0.mul(&Expr::atom_pow(Atom::Norm, -2.0));
        let p = principal_angular_symbol(&a, 2, 0.0, 2.0).unwrap();
        assert_eq!(p, xi0);
        let b = Expr::atom_pow(Atom::Norm, -2.0);
        assert_eq!(principal_angular_symbol(&b, 1, -2.0, 0.0).unwrap(), Expr::one());
    }
}
