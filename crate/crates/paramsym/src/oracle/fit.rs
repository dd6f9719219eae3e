//! Least-squares fits of sampled data against `mu^e (log mu)^k` bases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisTerm {
    pub exponent: f64,
    #[serde(default)]
    pub log: bool,
}

impl BasisTerm {
    pub fn power(exponent: f64) -> Self {
        BasisTerm { exponent, log: false }
    }

    pub fn log_power(exponent: f64) -> Self {
        BasisTerm { exponent, log: true }
    }

    pub fn eval(&self, mu: f64) -> f64 {
        let p = mu.powf(self.exponent);
        if self.log {
            p * mu.ln()
        } else {
            p
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub basis: Vec<BasisTerm>,
    pub coefficients: Vec<f64>,
    /// `|A c - y| / |y|`.
    pub residual: f64,
    /// Condition number of the column-normalized design matrix.
    pub condition: f64,
    pub ill_conditioned: bool,
    pub poor_fit: bool,
}

pub const CONDITION_LIMIT: f64 = 1e8;
pub const RESIDUAL_LIMIT: f64 = 1e-6;

pub fn fit_asymptotics(mus: &[f64], values: &[f64], basis: &[BasisTerm]) -> Result<AsymptoticFit> {
    if mus.len() != values.len() {
        return Err(Error::Argument(format!("{} sizes but {} values", mus.len(), values.len())));
    }
    if basis.is_empty() || mus.len() < 2 * basis.len() {
        return Err(Error::Argument(format!("{} samples for {} basis terms; need at least twice as many", mus.len(), basis.len())));
    }
    let (lo, hi) = mus.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &m| (l.min(m), h.max(m)));
    if !(lo > 0.0) || (hi / lo).log10() < 1.5 {
        return Err(Error::Argument(format!("sample range [{lo}, {hi}] spans less than 1.5 decades")));
    }
    let mut a = DMatrix::from_fn(mus.len(), basis.len(), |i, j| basis[j].eval(mus[i]));
    let mut scales = Vec::with_capacity(basis.len());
    for j in 0..basis.len() {
        let n = a.column(j).norm();
        let s = if n > 0.0 { n } else { 1.0 };
        a.column_mut(j).scale_mut(1.0 / s);
        scales.push(s);
    }
    let y = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let c = svd.solve(&y, smax * 1e-15).map_err(|e| Error::Data(e.to_string()))?;
    let resid = (&a * &c - &y).norm() / y.norm().max(f64::MIN_POSITIVE);
    let coefficients: Vec<f64> = c.iter().zip(&scales).map(|(v, s)| v / s).collect();
    Ok(AsymptoticFit {
        basis: basis.to_vec(),
        coefficients,
        residual: resid,
        condition,
        ill_conditioned: condition > CONDITION_LIMIT,
        poor_fit: resid > RESIDUAL_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::log_grid;
    use crate::oracle::eigensum::circle_resolvent_trace;

    #[test]
    fn circle_leading_coefficient() {
        let mus = log_grid(10.0, 10f64.powf(2.5), 10);
        let ys: Vec<f64> = mus.iter().map(|&m| circle_resolvent_trace(m)).collect();
        let f = fit_asymptotics(&mus, &ys, &[BasisTerm::power(-1.0)]).unwrap();
        assert!((f.coefficients[0] - std::f64::consts::PI).abs() < 1e-8);
        assert!(!f.poor_fit && !f.ill_conditioned);
    }

    #[test]
    fn log_basis_is_recovered() {
        let mus = log_grid(10.0, 1e3, 8);
        let ys: Vec<f64> = mus.iter().map(|&m| m.powi(-2) * m.ln() + 3.0 * m.powi(-2)).collect();
        let f = fit_asymptotics(&mus, &ys, &[BasisTerm::log_power(-2.0), BasisTerm::power(-2.0)]).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((f.coefficients[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn wrong_basis_is_flagged() {
        let mus = log_grid(10.0, 1e3, 8);
        let ys: Vec<f64> = mus.iter().map(|&m| m.powi(-2)).collect();
        let f = fit_asymptotics(&mus, &ys, &[BasisTerm::power(-1.0)]).unwrap();
        assert!(f.poor_fit);
    }

    #[test]
    fn preconditions() {
        let mus = [10.0, 20.0, 30.0];
        assert!(fit_asymptotics(&mus, &[1.0, 2.0, 3.0], &[BasisTerm::power(-1.0)]).is_err());
        assert!(fit_asymptotics(&[1.0], &[1.0], &[BasisTerm::power(-1.0)]).is_err());
    }
}
