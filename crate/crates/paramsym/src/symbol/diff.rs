//! Symbolic differentiation with covariable-domain checks.

use super::expr::{is_integer, Atom, Expr, RadialBase, Var};
use super::smooth::SmoothFn;
use crate::error::{Error, Result};

/// Where covariable derivatives are taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// `xi != 0`: any power of `|xi|` is smooth.
    Punctured,
    /// All of `R^n`: `|xi|^p` must be masked by an excision unless `p` is even and nonnegative.
    Full,
}

fn is_excision(a: &Atom) -> bool {
    matches!(a, Atom::Smooth(s) if s.f == SmoothFn::Psi && s.base == RadialBase::AbsXi)
}

fn check_full_domain(e: &Expr) -> Result<()> {
    for t in e.terms() {
        let masked = t.mono.factors().any(|(a, _)| is_excision(a));
        if masked {
            continue;
        }
        for (a, p) in t.mono.factors() {
            match a {
                Atom::AbsXi if !(p >= 0.0 && is_integer(p) && (p as i64) % 2 == 0) => {
                    return Err(Error::Domain(format!(
                        "|xi|^{p} is not smooth at xi = 0; differentiate on the punctured domain or add an excision"
                    )));
                }
                Atom::Smooth(s) if s.base == RadialBase::AbsXi && s.f != SmoothFn::Psi => {
                    return Err(Error::Domain("radial profile of |xi| is not smooth at xi = 0".into()));
                }
                Atom::Group(g) => check_full_domain(g)?,
                _ => {}
            }
        }
    }
    Ok(())
}

pub fn differentiate(e: &Expr, v: Var, domain: Domain) -> Result<Expr> {
    if domain == Domain::Full && matches!(v, Var::Xi(_)) {
        check_full_domain(e)?;
    }
    Ok(e.derivative_raw(v))
}

/// `d_xi^alpha d_x^beta d_mu^j e` (plain derivatives, no factors of `-i`).
pub fn derivative_multi(e: &Expr, alpha: &[u32], beta: &[u32], j: u32, domain: Domain) -> Result<Expr> {
    let mut out = e.clone();
    for (i, &k) in alpha.iter().enumerate() {
        for _ in 0..k {
            out = differentiate(&out, Var::Xi(i as u8), domain)?;
        }
    }
    for (i, &k) in beta.iter().enumerate() {
        for _ in 0..k {
            out = out.derivative_raw(Var::X(i as u8));
        }
    }
    for _ in 0..j {
        out = out.derivative_raw(Var::Mu);
    }
    Ok(out)
}

/// All multi-indices in `dim` variables with total order `k`, in lexicographic order.
pub fn multi_indices(dim: usize, k: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=k).rev() {
            prefix.push(first);
            rec(dim, k - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        if k == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(dim, k, &mut Vec::new(), &mut out);
    out
}

pub fn factorial_multi(alpha: &[u32]) -> f64 {
    alpha.iter().map(|&a| (1..=a).map(|i| i as f64).product::<f64>()).product()
}

#[cfg(test)]
mod tests {
    use super::super::eval::Point;
    use super::*;

    #[test]
    fn mu_second_derivative_of_resolvent() {
        let a = Expr::atom_pow(Atom::Norm, -2.0);
        let d = derivative_multi(&a, &[0], &[0], 2, Domain::Full).unwrap();
        let v = d.eval(&Point::symbol(&[0.0], &[1.0], 1.0)).unwrap();
        assert!((v.re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn full_domain_rejects_bare_abs() {
        let a = Expr::atom(Atom::AbsXi);
        assert!(matches!(differentiate(&a, Var::Xi(0), Domain::Full), Err(Error::Domain(_))));
        assert!(differentiate(&a, Var::Xi(0), Domain::Punctured).is_ok());
        let masked = a.mul(&Expr::atom(Atom::chi(1.0)));
        assert!(differentiate(&masked, Var::Xi(0), Domain::Full).is_ok());
        let even = Expr::atom_pow(Atom::AbsXi, 2.0);
        assert!(differentiate(&even, Var::Xi(0), Domain::Full).is_ok());
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 3), vec![vec![3]]);
        assert_eq!(multi_indices(2, 2).len(), 3);
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(factorial_multi(&[2, 3]), 12.0);
    }
}
