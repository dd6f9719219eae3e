//! Numerical evaluation of expressions.

use super::expr::{is_integer, Atom, Expr, RadialBase, TrigKind, C64};
use super::smooth::{self, SmoothFn};
use crate::error::{Error, Result};

/// Values below this fraction of their term mass are rounding noise.
pub const CANCELLATION: f64 = 1e-12;

pub const MAX_DIM: usize = 3;

/// Evaluation point. Symbol atoms read `x`, `xi`, `mu`; semisphere atoms read `r`, `phi`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: [f64; MAX_DIM],
    pub xi: [f64; MAX_DIM],
    pub mu: f64,
    pub r: f64,
    pub phi: [f64; MAX_DIM],
}

fn pad(v: &[f64]) -> [f64; MAX_DIM] {
    let mut out = [0.0; MAX_DIM];
    for (o, x) in out.iter_mut().zip(v) {
        *o = *x;
    }
    out
}

impl Point {
    pub fn symbol(x: &[f64], xi: &[f64], mu: f64) -> Self {
        Point { x: pad(x), xi: pad(xi), mu, ..Default::default() }
    }

    pub fn polar(x: &[f64], r: f64, phi: &[f64]) -> Self {
        Point { x: pad(x), r, phi: pad(phi), ..Default::default() }
    }

    pub fn abs_xi(&self) -> f64 {
        self.xi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug)]
enum Kernel {
    X(usize),
    Xi(usize),
    Mu,
    AbsXi,
    JapXi,
    JapXiMu,
    Norm,
    Smooth { f: SmoothFn, order: usize, base: RadialBase, scale: f64 },
    Trig { axis: usize, freq: f64, kind: TrigKind },
    R,
    Phi(usize),
    Height,
    Group(Box<Compiled>),
}

#[derive(Clone, Debug)]
struct Factor {
    atom: usize,
    exp: f64,
    int_exp: Option<i32>,
}

#[derive(Clone, Debug)]
struct CTerm {
    coef: C64,
    factors: Vec<Factor>,
}

/// Flattened form of an [`Expr`] for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Compiled {
    kernels: Vec<Kernel>,
    terms: Vec<CTerm>,
}

fn kernel_of(a: &Atom) -> Kernel {
    match a {
        Atom::X(i) => Kernel::X(*i as usize),
        Atom::Xi(i) => Kernel::Xi(*i as usize),
        Atom::Mu => Kernel::Mu,
        Atom::AbsXi => Kernel::AbsXi,
        Atom::JapXi => Kernel::JapXi,
        Atom::JapXiMu => Kernel::JapXiMu,
        Atom::Norm => Kernel::Norm,
        Atom::Smooth(s) => Kernel::Smooth { f: s.f, order: s.order as usize, base: s.base, scale: s.scale.0 },
        Atom::Trig { axis, freq, kind } => Kernel::Trig { axis: *axis as usize, freq: *freq as f64, kind: *kind },
        Atom::R => Kernel::R,
        Atom::Phi(i) => Kernel::Phi(*i as usize),
        Atom::Height => Kernel::Height,
        Atom::Group(g) => Kernel::Group(Box::new(Compiled::new(g))),
    }
}

impl Compiled {
    pub fn new(e: &Expr) -> Self {
        let mut atoms: Vec<Atom> = Vec::new();
        let mut terms = Vec::with_capacity(e.len());
        for t in e.terms() {
            let mut factors = Vec::with_capacity(t.mono.len());
            for (a, exp) in t.mono.factors() {
                let idx = match atoms.iter().position(|b| b == a) {
                    Some(i) => i,
                    None => {
                        atoms.push(a.clone());
                        atoms.len() - 1
                    }
                };
                let int_exp = if is_integer(exp) && exp.abs() < i32::MAX as f64 { Some(exp as i32) } else { None };
                factors.push(Factor { atom: idx, exp, int_exp });
            }
            // Nonnegative powers first so a vanishing cutoff is seen before a singular factor.
            factors.sort_by_key(|a| a.exp < 0.0);
            terms.push(CTerm { coef: t.coef, factors });
        }
        Compiled { kernels: atoms.iter().map(kernel_of).collect(), terms }
    }

    fn atom_value(&self, k: &Kernel, p: &Point) -> Result<C64> {
        let re = |v: f64| Ok(C64::new(v, 0.0));
        let abs2: f64 = p.xi.iter().map(|v| v * v).sum();
        match k {
            Kernel::X(i) => re(p.x[*i]),
            Kernel::Xi(i) => re(p.xi[*i]),
            Kernel::Mu => re(p.mu),
            Kernel::AbsXi => re(abs2.sqrt()),
            Kernel::JapXi => re((1.0 + abs2).sqrt()),
            Kernel::JapXiMu => re((1.0 + abs2 + p.mu * p.mu).sqrt()),
            Kernel::Norm => re((abs2 + p.mu * p.mu).sqrt()),
            Kernel::Smooth { f, order, base, scale } => {
                let b = match base {
                    RadialBase::AbsXi => abs2.sqrt(),
                    RadialBase::Norm => (abs2 + p.mu * p.mu).sqrt(),
                    RadialBase::R => p.r,
                };
                re(smooth::derivative(*f, *order, scale * b))
            }
            Kernel::Trig { axis, freq, kind } => {
                let arg = freq * p.x[*axis];
                re(match kind {
                    TrigKind::Sin => arg.sin(),
                    TrigKind::Cos => arg.cos(),
                })
            }
            Kernel::R => re(p.r),
            Kernel::Phi(i) => re(p.phi[*i]),
            Kernel::Height => {
                let h2 = 1.0 - p.r * p.r;
                if h2 < -1e-15 {
                    return Err(Error::Domain(format!("semisphere radius {} exceeds one", p.r)));
                }
                re(h2.max(0.0).sqrt())
            }
            Kernel::Group(g) => g.eval(p),
        }
    }

    pub fn eval(&self, p: &Point) -> Result<C64> {
        self.eval_with_mass(p).map(|(v, _)| v)
    }

    /// Value together with the sum of the absolute values of its terms,
    /// which bounds the rounding error of the sum.
    pub fn eval_with_mass(&self, p: &Point) -> Result<(C64, f64)> {
        let mut vals = Vec::with_capacity(self.kernels.len());
        for k in &self.kernels {
            vals.push(self.atom_value(k, p)?);
        }
        let mut total = C64::new(0.0, 0.0);
        let mut mass = 0.0;
        'terms: for t in &self.terms {
            let mut acc = t.coef;
            for f in &t.factors {
                let v = vals[f.atom];
                if v.re == 0.0 && v.im == 0.0 {
                    if f.exp > 0.0 {
                        continue 'terms;
                    }
                    return Err(Error::Domain("negative power of a vanishing factor".into()));
                }
                let w = if v.im == 0.0 {
                    let x = v.re;
                    match f.int_exp {
                        Some(n) => C64::new(x.powi(n), 0.0),
                        None if x > 0.0 => C64::new(x.powf(f.exp), 0.0),
                        None => return Err(Error::Domain("non-integer power of a negative value".into())),
                    }
                } else {
                    match f.int_exp {
                        Some(n) => v.powi(n),
                        None => return Err(Error::Domain("non-integer power of a complex value".into())),
                    }
                };
                acc *= w;
            }
            total += acc;
            mass += acc.norm();
        }
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::Domain("non-finite value".into()));
        }
        Ok((total, mass))
    }
}

impl Expr {
    /// One-off evaluation. Use [`Compiled`] in loops.
    pub fn eval(&self, p: &Point) -> Result<C64> {
        Compiled::new(self).eval(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_masks_singular_factor() {
        let e = Expr::atom(Atom::chi(1.0)).mul(&Expr::atom_pow(Atom::AbsXi, -1.0));
        let v = e.eval(&Point::symbol(&[0.0], &[0.0], 1.0)).unwrap();
        assert_eq!(v, C64::new(0.0, 0.0));
        let bare = Expr::atom_pow(Atom::AbsXi, -1.0);
        assert!(matches!(bare.eval(&Point::symbol(&[0.0], &[0.0], 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn norms() {
        let p = Point::symbol(&[0.0, 0.0], &[3.0, 4.0], 12.0);
        assert_eq!(Expr::atom(Atom::AbsXi).eval(&p).unwrap().re, 5.0);
        assert_eq!(Expr::atom(Atom::Norm).eval(&p).unwrap().re, 13.0);
        assert!((Expr::atom(Atom::JapXi).eval(&p).unwrap().re - 26f64.sqrt()).abs() < 1e-15);
        assert_eq!(Expr::atom(Atom::bracket()).eval(&p).unwrap().re, 13.0);
    }

    #[test]
    fn group_evaluates_inner_sum() {
        let base = Expr::atom_pow(Atom::Mu, 2.0).add(&Expr::atom_pow(Atom::Xi(0), 2.0));
        let inv = base.pow_int(-1).unwrap();
        let v = inv.eval(&Point::symbol(&[0.0], &[1.0], 1.0)).unwrap();
        assert!((v.re - 0.5).abs() < 1e-15);
    }
}
