//! Expansions in descending powers of `mu` at fixed `(x, xi)`.
//!
//! A [`MuSeries`] stores `a ~ sum_k c_k(x, xi) mu^(lead - k)`. Atoms that
//! depend on `mu` expand by binomial series; grouped sums are inverted term
//! by term.

use crate::error::{Error, Result};
use crate::numeric::binomial;
use crate::symbol::expr::{is_integer, snap, Atom, Expr, RadialBase};
use crate::symbol::smooth::SmoothFn;

/// Extra coefficients computed before stripping cancelled leading terms.
const PAD: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct MuSeries {
    pub lead: f64,
    pub coeffs: Vec<Expr>,
}

impl MuSeries {
    pub fn zero(len: usize) -> Self {
        MuSeries { lead: 0.0, coeffs: vec![Expr::zero(); len] }
    }

    pub fn constant(c: Expr, len: usize) -> Self {
        let mut coeffs = vec![Expr::zero(); len];
        if len > 0 {
            coeffs[0] = c;
        }
        MuSeries { lead: 0.0, coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Expr::is_zero)
    }

    fn mul(&self, other: &MuSeries, len: usize) -> MuSeries {
        if self.is_zero() || other.is_zero() {
            return MuSeries::zero(len);
        }
        let mut coeffs = vec![Expr::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate().take(len) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(len - i) {
                if !b.is_zero() {
                    coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
                }
            }
        }
        MuSeries { lead: snap(self.lead + other.lead), coeffs }
    }

    fn add(&self, other: &MuSeries, len: usize) -> Result<MuSeries> {
        if self.is_zero() {
            return Ok(other.truncated(len));
        }
        if other.is_zero() {
            return Ok(self.truncated(len));
        }
        let lead = self.lead.max(other.lead);
        let a = self.aligned(lead, len)?;
        let b = other.aligned(lead, len)?;
        Ok(MuSeries { lead, coeffs: a.iter().zip(&b).map(|(x, y)| x.add(y)).collect() })
    }

    fn truncated(&self, len: usize) -> MuSeries {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len, Expr::zero());
        MuSeries { lead: self.lead, coeffs }
    }

    /// Coefficients of `mu^(lead - k)`, `k < len`, for a prescribed `lead`.
    pub fn aligned(&self, lead: f64, len: usize) -> Result<Vec<Expr>> {
        let mut out = vec![Expr::zero(); len];
        if self.is_zero() {
            return Ok(out);
        }
        let shift = snap(lead - self.lead);
        if !is_integer(shift) {
            return Err(Error::Domain(format!(
                "mu exponents {} and {} do not differ by an integer",
                self.lead, lead
            )));
        }
        let shift = shift as i64;
        for (k, c) in self.coeffs.iter().enumerate() {
            let idx = k as i64 + shift;
            if idx < 0 {
                if !c.is_zero() {
                    return Err(Error::Domain(format!("series has a term above mu^{lead}")));
                }
                continue;
            }
            if (idx as usize) < len {
                out[idx as usize] = c.clone();
            }
        }
        Ok(out)
    }

    /// Removes leading coefficients that vanish up to rounding.
    fn strip(&self) -> MuSeries {
        let scale = self.coeffs.iter().map(Expr::coef_scale).fold(0.0, f64::max);
        let cut = 1e-13 * scale;
        let z = self.coeffs.iter().take_while(|c| c.coef_scale() <= cut).count();
        MuSeries { lead: snap(self.lead - z as f64), coeffs: self.coeffs[z..].to_vec() }
    }

    fn inverse(&self, len: usize) -> Result<MuSeries> {
        let c0 = self.coeffs.first().filter(|c| !c.is_zero()).ok_or_else(|| Error::Domain("inverse of a vanishing mu-series".into()))?;
        let inv0 = c0.pow_int(-1)?;
        let mut out: Vec<Expr> = Vec::with_capacity(len);
        out.push(inv0.clone());
        for k in 1..len {
            let mut acc = Expr::zero();
            for i in 1..=k.min(self.coeffs.len() - 1) {
                if !self.coeffs[i].is_zero() && !out[k - i].is_zero() {
                    acc = acc.add(&self.coeffs[i].mul(&out[k - i]));
                }
            }
            out.push(inv0.mul(&acc).neg());
        }
        Ok(MuSeries { lead: snap(-self.lead), coeffs: out })
    }

    fn pow_int(&self, p: i64, len: usize) -> Result<MuSeries> {
        let base = if p < 0 { self.inverse(len)? } else { self.truncated(len) };
        let mut acc = MuSeries::constant(Expr::one(), len);
        for _ in 0..p.unsigned_abs() {
            acc = acc.mul(&base, len);
        }
        Ok(acc)
    }
}

/// `mu^p (1 + s / mu^2)^(p/2)` with `s = base^2`.
fn binomial_series(p: f64, base: Atom, len: usize) -> MuSeries {
    let mut coeffs = vec![Expr::zero(); len];
    for k in 0..len.div_ceil(2) {
        let c = binomial(p / 2.0, k as u32);
        if c != 0.0 {
            coeffs[2 * k] = Expr::atom_pow(base.clone(), 2.0 * k as f64).scale_real(c);
        }
    }
    MuSeries { lead: snap(p), coeffs }
}

fn atom_series(a: &Atom, p: f64, len: usize) -> Result<MuSeries> {
    match a {
        Atom::Mu => Ok(MuSeries { lead: p, coeffs: MuSeries::constant(Expr::one(), len).coeffs }),
        Atom::Norm => Ok(binomial_series(p, Atom::AbsXi, len)),
        Atom::JapXiMu => Ok(binomial_series(p, Atom::JapXi, len)),
        Atom::Smooth(s) if s.base == RadialBase::Norm => {
            // For large mu: psi -> 1, omega -> 0, eta(t) = t.
            let value: Option<f64> = match (s.f, s.order) {
                (SmoothFn::Psi, 0) => Some(1.0),
                (SmoothFn::Eta, 0) => {
                    let scaled = binomial_series(p, Atom::AbsXi, len);
                    let c = s.scale.0.powf(p);
                    return Ok(MuSeries { lead: scaled.lead, coeffs: scaled.coeffs.iter().map(|e| e.scale_real(c)).collect() });
                }
                (SmoothFn::Eta, 1) => Some(1.0),
                _ => None,
            };
            match value {
                Some(v) => Ok(MuSeries::constant(Expr::real(v.powf(p)), len)),
                None if p < 0.0 => Err(Error::Domain("negative power of a profile that vanishes for large mu".into())),
                None => Ok(MuSeries::zero(len)),
            }
        }
        Atom::Group(g) => {
            if !is_integer(p) {
                return Err(Error::Domain("non-integer power of a grouped sum".into()));
            }
            let inner = mu_series(g, len + PAD)?.strip();
            if inner.coeffs.len() < len {
                return Err(Error::Domain("too many cancelled leading terms in a grouped sum".into()));
            }
            inner.pow_int(p as i64, len)
        }
        _ => Ok(MuSeries::constant(Expr::atom_pow(a.clone(), p), len)),
    }
}

/// Expansion of `e` to `len` coefficients.
pub fn mu_series(e: &Expr, len: usize) -> Result<MuSeries> {
    let mut acc = MuSeries::zero(len);
    for t in e.terms() {
        let mut s = MuSeries::constant(Expr::constant(t.coef), len);
        let mut rest: Vec<(Atom, f64)> = Vec::new();
        for (a, p) in t.mono.factors() {
            if a.depends_on_mu() {
                s = s.mul(&atom_series(a, p, len)?, len);
            } else {
                rest.push((a.clone(), p));
            }
        }
        if !rest.is_empty() {
            let m = Expr::monomial(crate::symbol::expr::C64::new(1.0, 0.0), crate::symbol::expr::Monomial::from_factors(rest));
            s = MuSeries { lead: s.lead, coeffs: s.coeffs.iter().map(|c| c.mul(&m)).collect() };
        }
        acc = acc.add(&s, len)?;
    }
    Ok(acc)
}

/// `zeta_{m,k}` in radial form: `C(m/2, k/2) |xi|^k` for even `k`, else zero.
pub fn zeta_radial(m: f64, k: usize) -> Expr {
    if k % 2 == 1 {
        return Expr::zero();
    }
    let c = binomial(m / 2.0, (k / 2) as u32);
    if c == 0.0 {
        Expr::zero()
    } else {
        Expr::atom_pow(Atom::AbsXi, k as f64).scale_real(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::expr::C64;

    fn consts(s: &MuSeries) -> Vec<Expr> {
        s.coeffs.clone()
    }

    #[test]
    fn norm_power() {
        let s = mu_series(&Expr::atom_pow(Atom::Norm, -2.0), 5).unwrap();
        assert_eq!(s.lead, -2.0);
        let c = consts(&s);
        assert_eq!(c[0], Expr::one());
        assert!(c[1].is_zero());
        assert_eq!(c[2], Expr::atom_pow(Atom::AbsXi, 2.0).neg());
        assert_eq!(c[4], Expr::atom_pow(Atom::AbsXi, 4.0));
    }

    #[test]
    fn group_inverse_matches_binomial() {
        let g = Expr::atom_pow(Atom::Mu, 2.0).add(&Expr::atom_pow(Atom::Xi(0), 2.0)).pow_int(-1).unwrap();
        let s = mu_series(&g, 5).unwrap();
        assert_eq!(s.lead, -2.0);
        assert_eq!(s.coeffs[0], Expr::one());
        assert_eq!(s.coeffs[2], Expr::atom_pow(Atom::Xi(0), 2.0).neg());
        assert_eq!(s.coeffs[4], Expr::atom_pow(Atom::Xi(0), 4.0));
    }

    #[test]
    fn cancellation_is_stripped() {
        // (|xi,mu|^2 - mu^2 + mu)^-1 = (mu + |xi|^2)^-1
        let base = Expr::atom_pow(Atom::Norm, 2.0).sub(&Expr::atom_pow(Atom::Mu, 2.0)).add(&Expr::atom(Atom::Mu));
        let s = mu_series(&base.pow_int(-1).unwrap(), 3).unwrap();
        assert_eq!(s.lead, -1.0);
        assert_eq!(s.coeffs[0], Expr::one());
        assert_eq!(s.coeffs[1], Expr::atom_pow(Atom::AbsXi, 2.0).neg());
    }

    #[test]
    fn profiles_at_large_mu() {
        let e = Expr::atom(Atom::chi_joint()).mul(&Expr::atom_pow(Atom::bracket(), -1.0));
        let s = mu_series(&e, 3).unwrap();
        assert_eq!(s.lead, -1.0);
        assert_eq!(s.coeffs[0], Expr::one());
        let w = Expr::atom(Atom::smooth(SmoothFn::Omega, 0, RadialBase::Norm, 1.0));
        assert!(mu_series(&w, 3).unwrap().is_zero());
    }

    #[test]
    fn incompatible_ladders() {
        let e = Expr::atom_pow(Atom::Norm, -1.5).add(&Expr::atom_pow(Atom::Norm, -2.0));
        assert!(mu_series(&e, 3).is_err());
        let ok = Expr::atom_pow(Atom::Norm, -1.5).add(&Expr::atom_pow(Atom::Norm, -2.5).scale(C64::new(0.0, 1.0)));
        assert_eq!(mu_series(&ok, 3).unwrap().lead, -1.5);
    }

    #[test]
    fn zeta_values() {
        assert_eq!(zeta_radial(-1.0, 2), Expr::atom_pow(Atom::AbsXi, 2.0).scale_real(-0.5));
        assert!(zeta_radial(0.0, 2).is_zero());
        assert_eq!(zeta_radial(-3.0, 0), Expr::one());
    }
}
