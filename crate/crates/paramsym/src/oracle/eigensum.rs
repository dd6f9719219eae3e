//! Spectral sums for Fourier multipliers on the flat torus `(R / 2 pi Z)^n`.

use std::f64::consts::PI;

use serde::Serialize;

use super::quad::integrate_tail;
use crate::error::{Error, Result};
use crate::symbol::class::xi_directions;
use crate::symbol::eval::{Compiled, Point};
use crate::symbol::expr::{Expr, C64};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigensumReport {
    /// `sum_k q(k) (lambda - sigma(k))^-l`, the operator trace.
    pub trace: C64,
    /// `trace / (2 pi)^n`, the kernel on the diagonal.
    pub kernel_diagonal: C64,
    /// Lattice cube `|k|_inf <= radius`.
    pub radius: i64,
    /// Bound on the part of the sum not accounted for.
    pub tail_bound: f64,
    /// Estimated decay exponent of the summand.
    pub decay: f64,
    /// Integral estimate of the omitted tail (one dimension only).
    pub tail_correction: C64,
}

fn max_radius(dim: usize) -> i64 {
    match dim {
        1 => 1 << 22,
        2 => 1 << 11,
        _ => 1 << 7,
    }
}

struct Summand {
    sigma: Compiled,
    q: Compiled,
    ell: i32,
    lambda: C64,
}

impl Summand {
    fn at(&self, k: &[f64]) -> Result<C64> {
        let p = Point::symbol(&[0.0; 3][..k.len()], k, 0.0);
        let d = self.lambda - self.sigma.eval(&p)?;
        if d.norm() == 0.0 {
            return Err(Error::Divergence(format!("lambda is an eigenvalue at k = {k:?}")));
        }
        Ok(self.q.eval(&p)? * d.powi(-self.ell))
    }

    fn shell_max(&self, dim: usize, r: f64) -> Result<f64> {
        let mut m: f64 = 0.0;
        for d in xi_directions(dim) {
            let k: Vec<f64> = d.iter().map(|v| v * r).collect();
            m = m.max(self.at(&k)?.norm());
        }
        Ok(m)
    }
}

fn cube_sum(s: &Summand, dim: usize, lo: i64, hi: i64) -> Result<C64> {
    // Points with lo < |k|_inf <= hi (lo = -1 means the full cube).
    let mut total = C64::new(0.0, 0.0);
    let mut k = vec![-hi; dim];
    loop {
        let inf = k.iter().map(|v| v.abs()).max().unwrap_or(0);
        if inf > lo {
            let kf: Vec<f64> = k.iter().map(|&v| v as f64).collect();
            total += s.at(&kf)?;
        }
        let mut i = 0;
        loop {
            if i == dim {
                return Ok(total);
            }
            if k[i] < hi {
                k[i] += 1;
                break;
            }
            k[i] = -hi;
            i += 1;
        }
    }
}

fn sum_1d(s: &Summand, hi: i64) -> Result<C64> {
    // Small terms first for a stable total.
    let mut total = C64::new(0.0, 0.0);
    for k in (1..=hi).rev() {
        total += s.at(&[k as f64])? + s.at(&[-(k as f64)])?;
    }
    Ok(total + s.at(&[0.0])?)
}

/// Trace of `q(D) (lambda - sigma(D))^-l` on the torus, with the lattice
/// radius chosen from a radial majorant of the summand.
pub fn eigensum_trace(sigma: &Expr, q: &Expr, ell: u32, lambda: C64, dim: usize, tol: f64) -> Result<EigensumReport> {
    if sigma.depends_on_x() || q.depends_on_x() || sigma.depends_on_mu() || q.depends_on_mu() {
        return Err(Error::Argument("eigensums need Fourier multipliers in xi only".into()));
    }
    if ell == 0 {
        return Err(Error::Argument("power must be positive".into()));
    }
    let s = Summand { sigma: Compiled::new(sigma), q: Compiled::new(q), ell: ell as i32, lambda };
    let n = dim as f64;
    let mut radius: i64 = 16;
    let max = max_radius(dim);
    let mut acc = if dim == 1 { sum_1d(&s, radius)? } else { cube_sum(&s, dim, -1, radius)? };
    loop {
        let r = radius as f64;
        let m1 = s.shell_max(dim, r)?;
        let m2 = s.shell_max(dim, 2.0 * r)?;
        if m1 == 0.0 && m2 == 0.0 {
            return Ok(report(acc, dim, radius, 0.0, f64::NEG_INFINITY, C64::new(0.0, 0.0)));
        }
        let decay = (m2 / m1).log2();
        if !(decay < -n) {
            if radius >= max {
                return Err(Error::Divergence(format!("summand decays like |k|^{decay:.2}, not summable in dimension {dim}")));
            }
        } else if dim == 1 {
            // Midpoint comparison: sum_{k > K} f(k) ~ int_{K+1/2}^inf f.
            let f = |t: f64| -> Result<C64> { Ok(s.at(&[t])? + s.at(&[-t])?) };
            let corr = integrate_tail(f, r + 0.5, 1e-15 * acc.norm().max(1e-300))?;
            let h = 1e-3 * r;
            let fp = (f(r + 0.5 + h)? - f(r + 0.5 - h)?).norm() / (2.0 * h);
            let bound = fp / 12.0 + corr.error;
            if bound <= tol * acc.norm() || radius >= max {
                return Ok(report(acc + corr.value, dim, radius, bound, decay, corr.value));
            }
        } else {
            let c = m1 * r.powf(-decay);
            let bound = c * 2.0 * n * 3f64.powi(dim as i32 - 1) * r.powf(n + decay) / (-n - decay);
            if bound <= tol * acc.norm() || radius >= max {
                return Ok(report(acc, dim, radius, bound, decay, C64::new(0.0, 0.0)));
            }
        }
        let next = radius * 2;
        acc = if dim == 1 { sum_1d(&s, next)? } else { acc + cube_sum(&s, dim, radius, next)? };
        radius = next;
    }
}

fn report(trace: C64, dim: usize, radius: i64, tail_bound: f64, decay: f64, tail_correction: C64) -> EigensumReport {
    EigensumReport { trace, kernel_diagonal: trace / (2.0 * PI).powi(dim as i32), radius, tail_bound, decay, tail_correction }
}

/// `sum_{k in Z} (mu^2 + k^2)^-1 = (pi / mu) coth(pi mu)`.
pub fn circle_resolvent_trace(mu: f64) -> f64 {
    PI / mu / (PI * mu).tanh()
}
