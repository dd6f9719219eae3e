//! Adaptive Gauss-Kronrod quadrature and rules on the unit sphere.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbol::eval::{Compiled, Point};
use crate::symbol::expr::{Expr, C64};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn zero() -> Self {
        QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evaluations: 0 }
    }

    pub fn add(self, o: QuadResult) -> Self {
        QuadResult { value: self.value + o.value, error: self.error + o.error, evaluations: self.evaluations + o.evaluations }
    }

    pub fn scale(self, c: f64) -> Self {
        QuadResult { value: self.value * c, error: self.error * c.abs(), ..self }
    }
}

fn gk15<F: Fn(f64) -> Result<C64>>(f: &F, a: f64, b: f64) -> Result<(C64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx)? + f(c + dx)?;
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    Ok((k * h, ((k - g) * h).norm()))
}

struct Piece {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error).then(o.a.total_cmp(&self.a))
    }
}

/// Adaptive 7-15 Gauss-Kronrod on `[a, b]` until the error estimate is below `tol`.
pub fn integrate<F: Fn(f64) -> Result<C64>>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult::zero());
    }
    let (v, e) = gk15(&f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut evals = 15;
    while err > tol {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { achieved: err, requested: tol });
        }
        let p = heap.pop().expect("non-empty heap");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::Quadrature { achieved: err, requested: tol });
        }
        let (v1, e1) = gk15(&f, p.a, m)?;
        let (v2, e2) = gk15(&f, m, p.b)?;
        evals += 30;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2 });
        if err <= tol {
            break;
        }
    }
    // Re-sum for a rounding-free total.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, error, evaluations: evals })
}

/// `int_a^inf f` through `r = a / s`, `a > 0`.
pub fn integrate_tail<F: Fn(f64) -> Result<C64>>(f: F, a: f64, tol: f64) -> Result<QuadResult> {
    if a <= 0.0 {
        return Err(Error::Argument("tail integral needs a positive lower limit".into()));
    }
    integrate(|s: f64| if s == 0.0 { Ok(C64::new(0.0, 0.0)) } else { Ok(f(a / s)? * (a / (s * s))) }, 0.0, 1.0, tol)
}

/// `Gamma(k / 2)` for a positive integer `k`.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k > 0);
    let mut g = if k.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `int_{S^{n-1}} phi^alpha d sigma`.
pub fn sphere_monomial_integral(alpha: &[u32]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let n = alpha.len() as u32;
    let num: f64 = alpha.iter().map(|&a| gamma_half(a + 1)).product();
    2.0 * num / gamma_half(alpha.iter().sum::<u32>() + n)
}

/// Surface measure of `S^{n-1}`.
pub fn sphere_area(dim: usize) -> f64 {
    sphere_monomial_integral(&vec![0; dim])
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Quadrature on `S^{n-1}`; exact for polynomials of degree below `2 * resolution`.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(dim: usize, resolution: usize) -> Self {
        match dim {
            1 => SphereRule { points: vec![vec![1.0], vec![-1.0]], weights: vec![1.0, 1.0] },
            2 => {
                let m = 2 * resolution;
                let points = (0..m).map(|k| {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    vec![t.cos(), t.sin()]
                });
                SphereRule { points: points.collect(), weights: vec![2.0 * PI / m as f64; m] }
            }
            _ => {
                let (zs, wz) = gauss_legendre(resolution);
                let m = 2 * resolution;
                let mut points = Vec::with_capacity(zs.len() * m);
                let mut weights = Vec::with_capacity(zs.len() * m);
                for (z, w) in zs.iter().zip(&wz) {
                    let s = (1.0 - z * z).sqrt();
                    for k in 0..m {
                        let t = 2.0 * PI * k as f64 / m as f64;
                        points.push(vec![s * t.cos(), s * t.sin(), *z]);
                        weights.push(w * 2.0 * PI / m as f64);
                    }
                }
                SphereRule { points, weights }
            }
        }
    }

    pub fn standard(dim: usize) -> Self {
        SphereRule::new(dim, if dim == 3 { 24 } else { 32 })
    }

    pub fn integrate<F: FnMut(&[f64]) -> Result<C64>>(&self, mut f: F) -> Result<C64> {
        let mut s = C64::new(0.0, 0.0);
        for (p, w) in self.points.iter().zip(&self.weights) {
            s += f(p)? * *w;
        }
        Ok(s)
    }
}

/// `int_{S^{n-1}} a(x, r phi; mu) d sigma(phi)` for a compiled symbol.
pub fn angular_integral(c: &Compiled, rule: &SphereRule, x: &[f64], r: f64, mu: f64) -> Result<C64> {
    let mut xi = [0.0; 3];
    rule.integrate(|phi| {
        for (i, v) in phi.iter().enumerate() {
            xi[i] = r * v;
        }
        c.eval(&Point::symbol(x, &xi[..phi.len()], mu))
    })
}

/// Radial breakpoints for symbols with structure near `|xi| in {1/2, 1, 2}` and `|xi| ~ mu`.
fn breakpoints(mu: f64) -> Vec<f64> {
    let mut b = vec![0.0, 0.5, 1.0, 2.0];
    for v in [mu, 2.0 * mu] {
        if v > 2.0 {
            b.push(v);
        }
    }
    b.dedup();
    b
}

/// `k(x, x; mu) = int a(x, xi; mu) d-bar xi` with `d-bar xi = (2 pi)^-n d xi`.
pub fn quad_kernel_diagonal(a: &Expr, dim: usize, x: &[f64], mu: f64, tol: f64) -> Result<QuadResult> {
    if tol < 1e-12 {
        return Err(Error::Argument(format!("tolerance {tol:e} below 1e-12")));
    }
    if a.is_zero() {
        return Ok(QuadResult::zero());
    }
    let c = Compiled::new(a);
    let rule = SphereRule::standard(dim);
    let norm = (2.0 * PI).powi(dim as i32);
    let radial = |r: f64| -> Result<C64> { Ok(angular_integral(&c, &rule, x, r, mu)? * r.powi(dim as i32 - 1)) };
    let b = breakpoints(mu);
    let pieces = b.len();
    let share = tol * norm / pieces as f64;
    let mut acc = QuadResult::zero();
    for w in b.windows(2) {
        acc = acc.add(integrate(radial, w[0], w[1], share)?);
    }
    acc = acc.add(integrate_tail(radial, *b.last().expect("breakpoints"), share)?);
    Ok(acc.scale(1.0 / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::expr::Atom;

    #[test]
    fn gauss_kronrod_basics() {
        let r = integrate(|t| Ok(C64::new(t.exp(), 0.0)), 0.0, 1.0, 1e-14).unwrap();
        assert!((r.value.re - (1f64.exp() - 1.0)).abs() < 1e-14);
        let r = integrate_tail(|t| Ok(C64::new(1.0 / (t * t), 0.0)), 2.0, 1e-13).unwrap();
        assert!((r.value.re - 0.5).abs() < 1e-13);
        let r = integrate(|t| Ok(C64::new(t.sqrt(), 0.0)), 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value.re - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_integrals() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        // int_{S^2} z^2 = 4 pi / 3
        assert!((sphere_monomial_integral(&[0, 0, 2]) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert_eq!(sphere_monomial_integral(&[1, 2]), 0.0);
        for dim in 1..=3 {
            let rule = SphereRule::standard(dim);
            for alpha in crate::symbol::diff::multi_indices(dim, 6) {
                let num = rule
                    .integrate(|p| Ok(C64::new(p.iter().zip(&alpha).map(|(v, a)| v.powi(*a as i32)).product(), 0.0)))
                    .unwrap();
                assert!((num.re - sphere_monomial_integral(&alpha)).abs() < 1e-13, "{alpha:?}");
            }
        }
    }

    #[test]
    fn kernel_diagonal_closed_forms() {
        let mu2 = Expr::atom_pow(Atom::Mu, 2.0);
        let a = mu2.add(&Expr::atom_pow(Atom::Xi(0), 2.0)).pow_int(-1).unwrap();
        let r = quad_kernel_diagonal(&a, 1, &[0.0], 10.0, 1e-12).unwrap();
        assert!((r.value.re - 0.05).abs() < 1e-12, "{}", r.value);
        let b = Expr::atom_pow(Atom::Norm, -4.0);
        let r = quad_kernel_diagonal(&b, 2, &[0.0, 0.0], 1.0, 1e-12).unwrap();
        assert!((r.value.re - 1.0 / (4.0 * PI)).abs() < 1e-12, "{}", r.value);
        assert_eq!(quad_kernel_diagonal(&Expr::zero(), 3, &[0.0; 3], 1.0, 1e-10).unwrap().value, C64::new(0.0, 0.0));
        assert!(quad_kernel_diagonal(&a, 1, &[0.0], 1.0, 1e-13).is_err());
    }
}
