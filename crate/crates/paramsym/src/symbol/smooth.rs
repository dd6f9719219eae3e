//! Reference cutoff functions and their derivatives.
//!
//! All functions are built from `g(s) = exp(-1/s)` (zero for `s <= 0`).
//! Derivatives of any order come from truncated Taylor jets, so values are
//! exact up to floating point rounding.
//!
//! * `psi(t)`: 0 for `t <= 1`, 1 for `t >= 2`; the excision profile.
//! * `omega(t) = 1 - psi(2t)`: 1 for `t <= 1/2`, 0 for `t >= 1`.
//! * `eta(t) = 1/2 + psi(2t) (t - 1/2)`: the smoothed norm profile, equal to
//!   `t` for `t >= 1` and to `1/2` near zero.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothFn {
    Psi,
    Eta,
    Omega,
}

impl SmoothFn {
    pub fn name(self) -> &'static str {
        match self {
            SmoothFn::Psi => "psi",
            SmoothFn::Eta => "eta",
            SmoothFn::Omega => "omega",
        }
    }
}

/// Below this argument `exp(-1/s)` underflows; the jet is treated as zero.
const FLAT_THRESHOLD: f64 = 1.0 / 700.0;

type Jet = Vec<f64>;

fn jet_mul(a: &[f64], b: &[f64]) -> Jet {
    let n = a.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

fn jet_recip(a: &[f64]) -> Jet {
    let n = a.len();
    let mut out = vec![0.0; n];
    out[0] = 1.0 / a[0];
    for k in 1..n {
        let mut s = 0.0;
        for j in 1..=k {
            s += a[j] * out[k - j];
        }
        out[k] = -s * out[0];
    }
    out
}

fn jet_exp(a: &[f64]) -> Jet {
    let n = a.len();
    let mut out = vec![0.0; n];
    out[0] = a[0].exp();
    for k in 1..n {
        let mut s = 0.0;
        for j in 1..=k {
            s += j as f64 * a[j] * out[k - j];
        }
        out[k] = s / k as f64;
    }
    out
}

/// Jet of `exp(-1/s)` where `s = s0 + slope * h`.
fn flat_jet(s0: f64, slope: f64, n: usize) -> Jet {
    if s0 <= FLAT_THRESHOLD {
        return vec![0.0; n];
    }
    let mut s = vec![0.0; n];
    s[0] = s0;
    if n > 1 {
        s[1] = slope;
    }
    let mut inv = jet_recip(&s);
    inv.iter_mut().for_each(|c| *c = -*c);
    jet_exp(&inv)
}

fn psi_jet(t: f64, n: usize) -> Jet {
    let mut out = vec![0.0; n];
    if t <= 1.0 {
        return out;
    }
    if t >= 2.0 {
        out[0] = 1.0;
        return out;
    }
    let left = flat_jet(t - 1.0, 1.0, n);
    let right = flat_jet(2.0 - t, -1.0, n);
    let denom: Jet = left.iter().zip(&right).map(|(a, b)| a + b).collect();
    jet_mul(&left, &jet_recip(&denom))
}

/// Jet of `psi(2t)` in the variable `t`.
fn half_psi_jet(t: f64, n: usize) -> Jet {
    let mut j = psi_jet(2.0 * t, n);
    let mut scale = 1.0;
    for c in j.iter_mut() {
        *c *= scale;
        scale *= 2.0;
    }
    j
}

/// Taylor jet (coefficients, not derivatives) of `f` at `t` up to `order`.
pub fn jet(f: SmoothFn, t: f64, order: usize) -> Vec<f64> {
    let n = order + 1;
    match f {
        SmoothFn::Psi => psi_jet(t, n),
        SmoothFn::Omega => {
            let mut j = half_psi_jet(t, n);
            j.iter_mut().for_each(|c| *c = -*c);
            j[0] += 1.0;
            j
        }
        SmoothFn::Eta => {
            let mut out = vec![0.0; n];
            if t >= 1.0 {
                out[0] = t;
                if n > 1 {
                    out[1] = 1.0;
                }
                return out;
            }
            let tau = half_psi_jet(t, n);
            let mut lin = vec![0.0; n];
            lin[0] = t - 0.5;
            if n > 1 {
                lin[1] = 1.0;
            }
            let mut out = jet_mul(&tau, &lin);
            out[0] += 0.5;
            out
        }
    }
}

/// `k`-th derivative of `f` at `t`.
pub fn derivative(f: SmoothFn, k: usize, t: f64) -> f64 {
    let j = jet(f, t, k);
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    j[k] * fact
}

pub fn value(f: SmoothFn, t: f64) -> f64 {
    derivative(f, 0, t)
}

/// Support interval outside of which `f^(k)` is constant (for `k = 0`) or zero.
pub fn transition(f: SmoothFn) -> (f64, f64) {
    match f {
        SmoothFn::Psi => (1.0, 2.0),
        SmoothFn::Eta | SmoothFn::Omega => (0.5, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: SmoothFn, k: usize, t: f64) -> f64 {
        let h = 1e-5;
        (derivative(f, k, t + h) - derivative(f, k, t - h)) / (2.0 * h)
    }

    #[test]
    fn plateaus() {
        assert_eq!(value(SmoothFn::Psi, 0.3), 0.0);
        assert_eq!(value(SmoothFn::Psi, 1.0), 0.0);
        assert_eq!(value(SmoothFn::Psi, 2.0), 1.0);
        assert_eq!(value(SmoothFn::Omega, 0.5), 1.0);
        assert_eq!(value(SmoothFn::Omega, 1.0), 0.0);
        assert_eq!(value(SmoothFn::Eta, 0.2), 0.5);
        assert_eq!(value(SmoothFn::Eta, 3.5), 3.5);
        assert_eq!(derivative(SmoothFn::Eta, 1, 3.5), 1.0);
        assert_eq!(derivative(SmoothFn::Eta, 2, 3.5), 0.0);
    }

    #[test]
    fn psi_symmetry() {
        for &t in &[1.1, 1.3, 1.5, 1.77] {
            let a = value(SmoothFn::Psi, t);
            let b = value(SmoothFn::Psi, 3.0 - t);
            assert!((a + b - 1.0).abs() < 1e-15);
        }
        assert!((value(SmoothFn::Psi, 1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for f in [SmoothFn::Psi, SmoothFn::Eta, SmoothFn::Omega] {
            let (lo, hi) = transition(f);
            for i in 1..8 {
                let t = lo + (hi - lo) * i as f64 / 8.0;
                for k in 0..4 {
                    let exact = derivative(f, k + 1, t);
                    let approx = fd(f, k, t);
                    let scale = exact.abs().max(1.0);
                    assert!(
                        (exact - approx).abs() < 1e-5 * scale,
                        "{f:?} k={k} t={t}: {exact} vs {approx}"
                    );
                }
            }
        }
    }

    #[test]
    fn eta_monotone_and_bounded_below() {
        let mut prev = 0.0;
        for i in 0..200 {
            let t = i as f64 * 0.01;
            let v = value(SmoothFn::Eta, t);
            assert!(v >= 0.5 - 1e-15);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }
}
