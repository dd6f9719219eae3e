//! Canonical sum-of-monomials expressions.
//!
//! An [`Expr`] is a sorted list of terms with distinct monomials and nonzero
//! complex coefficients. A monomial is a sorted list of `(atom, exponent)`
//! pairs. Sums that cannot be expanded (negative powers of polynomials) are
//! kept as [`Atom::Group`] atoms with integer exponents.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_complex::Complex64;

use super::smooth::SmoothFn;
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Exponents closer than this to an integer are snapped to it.
const SNAP: f64 = 1e-12;

/// `f64` with a total order, used for exponents and scales.
#[derive(Clone, Copy, Debug)]
pub struct Real(pub f64);

impl Real {
    pub fn new(v: f64) -> Self {
        Real(if v == 0.0 { 0.0 } else { v })
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Real {}
impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl Hash for Real {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

pub fn snap(e: f64) -> f64 {
    let r = e.round();
    if (e - r).abs() < SNAP {
        r + 0.0
    } else {
        e
    }
}

pub fn is_integer(e: f64) -> bool {
    e == e.round()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RadialBase {
    AbsXi,
    Norm,
    R,
}

/// `f^(order)(scale * base)` for a reference profile `f`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SmoothAtom {
    pub f: SmoothFn,
    pub order: u32,
    pub base: RadialBase,
    pub scale: Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrigKind {
    Sin,
    Cos,
}

/// Variables that may be differentiated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(u8),
    Xi(u8),
    Mu,
    R,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    X(u8),
    Xi(u8),
    Mu,
    /// `|xi|`
    AbsXi,
    /// `<xi> = (1 + |xi|^2)^(1/2)`
    JapXi,
    /// `<xi, mu> = (1 + |xi|^2 + mu^2)^(1/2)`
    JapXiMu,
    /// `|(xi, mu)|`
    Norm,
    Smooth(SmoothAtom),
    Trig { axis: u8, freq: u32, kind: TrigKind },
    /// Semisphere radius `r = |xi| / |(xi, mu)|`.
    R,
    /// Angular variable `phi_i = xi_i / |xi|`.
    Phi(u8),
    /// `sqrt(1 - r^2)`, the value of `mu` on the semisphere.
    Height,
    Group(Box<Expr>),
}

impl Atom {
    pub fn smooth(f: SmoothFn, order: u32, base: RadialBase, scale: f64) -> Atom {
        Atom::Smooth(SmoothAtom { f, order, base, scale: Real::new(scale) })
    }

    /// Excision `chi(xi / c)` with the reference profile.
    pub fn chi(scale: f64) -> Atom {
        Atom::smooth(SmoothFn::Psi, 0, RadialBase::AbsXi, 1.0 / scale)
    }

    pub fn chi_joint() -> Atom {
        Atom::smooth(SmoothFn::Psi, 0, RadialBase::Norm, 1.0)
    }

    /// Smoothed norm `[xi, mu]`.
    pub fn bracket() -> Atom {
        Atom::smooth(SmoothFn::Eta, 0, RadialBase::Norm, 1.0)
    }

    /// Atoms whose values are positive wherever defined, so real powers are allowed.
    pub fn allows_real_exponent(&self) -> bool {
        match self {
            Atom::AbsXi | Atom::JapXi | Atom::JapXiMu | Atom::Norm | Atom::Mu => true,
            Atom::R | Atom::Height => true,
            Atom::Smooth(s) => s.f == SmoothFn::Eta && s.order == 0,
            _ => false,
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match self {
            Atom::X(_) | Atom::Trig { .. } => true,
            Atom::Group(e) => e.depends_on_x(),
            _ => false,
        }
    }

    pub fn depends_on_mu(&self) -> bool {
        match self {
            Atom::Mu | Atom::JapXiMu | Atom::Norm => true,
            Atom::Smooth(s) => s.base == RadialBase::Norm,
            Atom::Group(e) => e.depends_on_mu(),
            _ => false,
        }
    }

    pub fn is_polar(&self) -> bool {
        match self {
            Atom::R | Atom::Phi(_) | Atom::Height => true,
            Atom::Smooth(s) => s.base == RadialBase::R,
            Atom::Group(e) => e.has_atom(&|a| a.is_polar()),
            _ => false,
        }
    }

    /// Derivative of the atom itself (exponent one).
    pub fn derivative(&self, v: Var) -> Expr {
        let xi_of = |i: u8| Expr::atom(Atom::Xi(i));
        match (self, v) {
            (Atom::X(i), Var::X(j)) if *i == j => Expr::one(),
            (Atom::Xi(i), Var::Xi(j)) if *i == j => Expr::one(),
            (Atom::Mu, Var::Mu) | (Atom::R, Var::R) => Expr::one(),
            (Atom::AbsXi | Atom::JapXi | Atom::JapXiMu | Atom::Norm, Var::Xi(j)) => {
                xi_of(j).mul(&Expr::atom_pow(self.clone(), -1.0))
            }
            (Atom::JapXiMu | Atom::Norm, Var::Mu) => {
                Expr::atom(Atom::Mu).mul(&Expr::atom_pow(self.clone(), -1.0))
            }
            (Atom::Smooth(s), _) => {
                let base = match s.base {
                    RadialBase::AbsXi => Atom::AbsXi,
                    RadialBase::Norm => Atom::Norm,
                    RadialBase::R => Atom::R,
                };
                let db = base.derivative(v);
                if db.is_zero() {
                    return Expr::zero();
                }
                let next = Atom::Smooth(SmoothAtom { order: s.order + 1, ..s.clone() });
                Expr::atom(next).mul(&db).scale(C64::new(s.scale.0, 0.0))
            }
            (Atom::Trig { axis, freq, kind }, Var::X(j)) if *axis == j => {
                let k = *freq as f64;
                match kind {
                    TrigKind::Sin => Expr::atom(Atom::Trig { axis: *axis, freq: *freq, kind: TrigKind::Cos })
                        .scale(C64::new(k, 0.0)),
                    TrigKind::Cos => Expr::atom(Atom::Trig { axis: *axis, freq: *freq, kind: TrigKind::Sin })
                        .scale(C64::new(-k, 0.0)),
                }
            }
            (Atom::Height, Var::R) => {
                Expr::atom(Atom::R).mul(&Expr::atom_pow(Atom::Height, -1.0)).scale(C64::new(-1.0, 0.0))
            }
            (Atom::Group(e), _) => e.derivative_raw(v),
            _ => Expr::zero(),
        }
    }
}

/// Product of atom powers, sorted by atom, with nonzero exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    factors: Vec<(Atom, Real)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { factors: Vec::new() }
    }

    pub fn from_factors(mut raw: Vec<(Atom, f64)>) -> Self {
        raw.sort_by(|a, b| a.0.cmp(&b.0));
        let mut factors: Vec<(Atom, Real)> = Vec::with_capacity(raw.len());
        for (a, e) in raw {
            match factors.last_mut() {
                Some((last, le)) if *last == a => *le = Real(le.0 + e),
                _ => factors.push((a, Real(e))),
            }
        }
        factors.iter_mut().for_each(|(_, e)| *e = Real::new(snap(e.0)));
        factors.retain(|(_, e)| e.0 != 0.0);
        Monomial { factors }
    }

    pub fn factors(&self) -> impl Iterator<Item = (&Atom, f64)> {
        self.factors.iter().map(|(a, e)| (a, e.0))
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn exponent_of(&self, atom: &Atom) -> f64 {
        self.factors.iter().find(|(a, _)| a == atom).map(|(_, e)| e.0).unwrap_or(0.0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: Vec<(Atom, Real)> = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.factors, &other.factors);
        while i < a.len() || j < b.len() {
            let ord = if i == a.len() {
                Ordering::Greater
            } else if j == b.len() {
                Ordering::Less
            } else {
                a[i].0.cmp(&b[j].0)
            };
            match ord {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let e = snap(a[i].1 .0 + b[j].1 .0);
                    if e != 0.0 {
                        out.push((a[i].0.clone(), Real::new(e)));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Monomial { factors: out }
    }

    /// Copy with the exponent of `atom` replaced (removed when zero).
    pub fn with_exponent(&self, atom: &Atom, e: f64) -> Monomial {
        let mut raw: Vec<(Atom, f64)> = self.factors.iter().filter(|(a, _)| a != atom).map(|(a, e)| (a.clone(), e.0)).collect();
        if e != 0.0 {
            raw.push((atom.clone(), e));
        }
        Monomial::from_factors(raw)
    }

    /// Total degree in the listed atoms.
    pub fn degree_in(&self, pred: impl Fn(&Atom) -> bool) -> f64 {
        self.factors.iter().filter(|(a, _)| pred(a)).map(|(_, e)| e.0).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Term {
    pub coef: C64,
    pub mono: Monomial,
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Term {}
impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.mono
            .cmp(&other.mono)
            .then(self.coef.re.total_cmp(&other.coef.re))
            .then(self.coef.im.total_cmp(&other.coef.im))
    }
}
impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.mono.hash(state);
        self.coef.re.to_bits().hash(state);
        self.coef.im.to_bits().hash(state);
    }
}

/// Canonical expression: sorted terms, distinct monomials, nonzero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr {
    terms: Vec<Term>,
}

impl Expr {
    pub fn zero() -> Self {
        Expr { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Expr::constant(C64::new(1.0, 0.0))
    }

    pub fn real(v: f64) -> Self {
        Expr::constant(C64::new(v, 0.0))
    }

    pub fn constant(c: C64) -> Self {
        Expr::from_terms(vec![Term { coef: c, mono: Monomial::one() }])
    }

    pub fn atom(a: Atom) -> Self {
        Expr::atom_pow(a, 1.0)
    }

    pub fn atom_pow(a: Atom, e: f64) -> Self {
        Expr::from_terms(vec![Term { coef: C64::new(1.0, 0.0), mono: Monomial::from_factors(vec![(a, e)]) }])
    }

    pub fn monomial(coef: C64, mono: Monomial) -> Self {
        Expr::from_terms(vec![Term { coef, mono }])
    }

    pub fn from_terms(mut terms: Vec<Term>) -> Self {
        terms.sort_by(|a, b| a.mono.cmp(&b.mono));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.mono == t.mono => last.coef += t.coef,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coef.re != 0.0 || t.coef.im != 0.0);
        for t in out.iter_mut() {
            t.coef = C64::new(t.coef.re + 0.0, t.coef.im + 0.0);
        }
        Expr { terms: out }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<C64> {
        match self.terms.as_slice() {
            [] => Some(C64::new(0.0, 0.0)),
            [t] if t.mono.is_empty() => Some(t.coef),
            _ => None,
        }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Expr::from_terms(terms)
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        self.scale(C64::new(-1.0, 0.0))
    }

    pub fn scale(&self, c: C64) -> Expr {
        if c == C64::new(0.0, 0.0) {
            return Expr::zero();
        }
        Expr::from_terms(self.terms.iter().map(|t| Term { coef: t.coef * c, mono: t.mono.clone() }).collect())
    }

    pub fn scale_real(&self, c: f64) -> Expr {
        self.scale(C64::new(c, 0.0))
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        if let Some(e) = absorb_into_group(self, other).or_else(|| absorb_into_group(other, self)) {
            return e;
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Term { coef: a.coef * b.coef, mono: a.mono.mul(&b.mono) });
            }
        }
        Expr::from_terms(terms)
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a Expr>) -> Expr {
        let mut terms = Vec::new();
        for e in items {
            terms.extend(e.terms.iter().cloned());
        }
        Expr::from_terms(terms)
    }

    pub fn product<'a>(items: impl IntoIterator<Item = &'a Expr>) -> Expr {
        let mut acc = Expr::one();
        for e in items {
            acc = acc.mul(e);
        }
        acc
    }

    /// Integer power. Negative powers of sums become grouped atoms.
    pub fn pow_int(&self, n: i64) -> Result<Expr> {
        if n == 0 {
            return Ok(Expr::one());
        }
        if n > 0 {
            let mut acc = Expr::one();
            let mut base = self.clone();
            let mut k = n;
            while k > 0 {
                if k & 1 == 1 {
                    acc = acc.mul(&base);
                }
                k >>= 1;
                if k > 0 {
                    base = base.mul(&base);
                }
            }
            return Ok(acc);
        }
        match self.terms.as_slice() {
            [] => Err(Error::Domain("negative power of zero".into())),
            [t] => {
                let coef = t.coef.powi(n as i32);
                let raw = t.mono.factors().map(|(a, e)| (a.clone(), e * n as f64)).collect();
                Ok(Expr::monomial(coef, Monomial::from_factors(raw)))
            }
            _ => {
                let (lead, base) = self.normalized();
                Ok(Expr::atom_pow(Atom::Group(Box::new(base)), n as f64).scale(lead.powi(n as i32)))
            }
        }
    }

    /// Real power of a single positive term.
    pub fn pow_real(&self, p: f64) -> Result<Expr> {
        let p = snap(p);
        if is_integer(p) {
            return self.pow_int(p as i64);
        }
        match self.terms.as_slice() {
            [t] if t.coef.im == 0.0 && t.coef.re > 0.0 => {
                let mut raw = Vec::new();
                for (a, e) in t.mono.factors() {
                    let ne = snap(e * p);
                    if !is_integer(ne) && !a.allows_real_exponent() {
                        return Err(Error::Domain(format!("non-integer power of {}", atom_name(a))));
                    }
                    raw.push((a.clone(), ne));
                }
                Ok(Expr::monomial(C64::new(t.coef.re.powf(p), 0.0), Monomial::from_factors(raw)))
            }
            _ => Err(Error::Domain("non-integer power of a sum or non-positive constant".into())),
        }
    }

    /// Splits `self = c * base` with the first coefficient of `base` equal to one.
    pub fn normalized(&self) -> (C64, Expr) {
        match self.terms.first() {
            None => (C64::new(0.0, 0.0), Expr::zero()),
            Some(t) => {
                let c = t.coef;
                (c, self.scale(c.inv()))
            }
        }
    }

    pub fn conj(&self) -> Expr {
        Expr::from_terms(
            self.terms
                .iter()
                .map(|t| Term {
                    coef: t.coef.conj(),
                    mono: Monomial::from_factors(
                        t.mono
                            .factors()
                            .map(|(a, e)| match a {
                                Atom::Group(g) => (Atom::Group(Box::new(g.conj())), e),
                                _ => (a.clone(), e),
                            })
                            .collect(),
                    ),
                })
                .collect(),
        )
    }

    /// Visits atoms, descending into grouped sums.
    pub fn has_atom(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        self.terms.iter().any(|t| {
            t.mono.factors().any(|(a, _)| {
                pred(a)
                    || match a {
                        Atom::Group(g) => g.has_atom(pred),
                        _ => false,
                    }
            })
        })
    }

    pub fn depends_on_x(&self) -> bool {
        self.has_atom(&|a| matches!(a, Atom::X(_) | Atom::Trig { .. }))
    }

    pub fn depends_on_mu(&self) -> bool {
        self.has_atom(&|a| a.depends_on_mu())
    }

    pub fn max_trig_freq(&self) -> u32 {
        let mut m = 0;
        self.visit_atoms(&mut |a| {
            if let Atom::Trig { freq, .. } = a {
                m = m.max(*freq);
            }
        });
        m
    }

    pub fn visit_atoms(&self, f: &mut dyn FnMut(&Atom)) {
        for t in &self.terms {
            for (a, _) in t.mono.factors() {
                f(a);
                if let Atom::Group(g) = a {
                    g.visit_atoms(f);
                }
            }
        }
    }

    /// Largest coefficient magnitude.
    pub fn coef_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.norm()).fold(0.0, f64::max)
    }

    /// Drops terms with `|coef| <= rel * max |coef|`.
    pub fn prune(&self, rel: f64) -> Expr {
        let cut = rel * self.coef_scale();
        Expr { terms: self.terms.iter().filter(|t| t.coef.norm() > cut).cloned().collect() }
    }

    /// Derivative without domain checks.
    pub fn derivative_raw(&self, v: Var) -> Expr {
        let mut out: Vec<Expr> = Vec::new();
        for t in &self.terms {
            let factors: Vec<(&Atom, f64)> = t.mono.factors().collect();
            for (i, (a, e)) in factors.iter().enumerate() {
                let da = a.derivative(v);
                if da.is_zero() {
                    continue;
                }
                let raw: Vec<(Atom, f64)> = factors
                    .iter()
                    .enumerate()
                    .map(|(j, (b, f))| ((*b).clone(), if i == j { f - 1.0 } else { *f }))
                    .collect();
                let lead = Expr::monomial(t.coef * *e, Monomial::from_factors(raw));
                out.push(lead.mul(&da));
            }
        }
        Expr::sum(out.iter())
    }

    /// Substitutes atoms. `map` returns the image of an atom or `None` to keep it.
    /// Grouped sums are rebuilt after substituting inside them.
    pub fn substitute(&self, map: &dyn Fn(&Atom) -> Option<Result<Expr>>) -> Result<Expr> {
        let mut parts = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let mut acc = Expr::constant(t.coef);
            let mut keep: Vec<(Atom, f64)> = Vec::new();
            for (a, e) in t.mono.factors() {
                let image = match map(a) {
                    Some(img) => Some(img?),
                    None => match a {
                        Atom::Group(g) => Some(g.substitute(map)?),
                        _ => None,
                    },
                };
                match image {
                    None => keep.push((a.clone(), e)),
                    Some(img) => {
                        let p = if is_integer(e) { img.pow_int(e as i64)? } else { img.pow_real(e)? };
                        acc = acc.mul(&p);
                    }
                }
            }
            if !keep.is_empty() {
                acc = acc.mul(&Expr::monomial(C64::new(1.0, 0.0), Monomial::from_factors(keep)));
            }
            parts.push(acc);
        }
        Ok(Expr::sum(parts.iter()))
    }
}

/// If every term of `host` contains `Group(g)` where `g` is proportional to
/// the multi-term `factor`, bump the group exponent instead of distributing.
fn absorb_into_group(factor: &Expr, host: &Expr) -> Option<Expr> {
    if factor.len() < 2 {
        return None;
    }
    let (lead, base) = factor.normalized();
    let atom = Atom::Group(Box::new(base));
    if !host.terms.iter().all(|t| t.mono.exponent_of(&atom) != 0.0) {
        return None;
    }
    let terms = host
        .terms
        .iter()
        .map(|t| {
            let e = t.mono.exponent_of(&atom);
            Term { coef: t.coef * lead, mono: t.mono.with_exponent(&atom, e + 1.0) }
        })
        .collect();
    Some(Expr::from_terms(terms))
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::real(v)
    }
}

impl From<Atom> for Expr {
    fn from(a: Atom) -> Self {
        Expr::atom(a)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(&self, &rhs)
    }
}
impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(&self, &rhs)
    }
}
impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(&self, &rhs)
    }
}
impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

pub fn atom_name(a: &Atom) -> String {
    match a {
        Atom::X(i) => format!("x{i}"),
        Atom::Xi(i) => format!("xi{i}"),
        Atom::Mu => "mu".into(),
        Atom::AbsXi => "|xi|".into(),
        Atom::JapXi => "<xi>".into(),
        Atom::JapXiMu => "<xi,mu>".into(),
        Atom::Norm => "|xi,mu|".into(),
        Atom::Smooth(s) => {
            let base = match s.base {
                RadialBase::AbsXi => "|xi|",
                RadialBase::Norm => "|xi,mu|",
                RadialBase::R => "r",
            };
            let d = if s.order == 0 { String::new() } else { format!("^({})", s.order) };
            if s.scale.0 == 1.0 {
                format!("{}{}({})", s.f.name(), d, base)
            } else {
                format!("{}{}({}*{})", s.f.name(), d, s.scale.0, base)
            }
        }
        Atom::Trig { axis, freq, kind } => {
            let k = if *kind == TrigKind::Sin { "sin" } else { "cos" };
            if *freq == 1 {
                format!("{k}(x{axis})")
            } else {
                format!("{k}({freq}x{axis})")
            }
        }
        Atom::R => "r".into(),
        Atom::Phi(i) => format!("phi{i}"),
        Atom::Height => "h".into(),
        Atom::Group(g) => format!("({g})"),
    }
}

fn fmt_coef(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else {
        format!("({}{:+}i)", c.re, c.im)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let mut parts: Vec<String> = Vec::new();
            if t.mono.is_empty() || t.coef != C64::new(1.0, 0.0) {
                parts.push(fmt_coef(t.coef));
            }
            for (a, e) in t.mono.factors() {
                if e == 1.0 {
                    parts.push(atom_name(a));
                } else {
                    parts.push(format!("{}^{}", atom_name(a), e));
                }
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xi() -> Expr {
        Expr::atom(Atom::Xi(0))
    }
    fn mu() -> Expr {
        Expr::atom(Atom::Mu)
    }

    #[test]
    fn canonical_sum_merges_and_cancels() {
        let a = xi().add(&mu()).add(&xi());
        assert_eq!(a.len(), 2);
        assert!(a.sub(&a).is_zero());
        assert_eq!(xi().add(&mu()), mu().add(&xi()));
    }

    #[test]
    fn monomial_exponents_snap_and_vanish() {
        let e = Expr::atom_pow(Atom::AbsXi, 0.5).mul(&Expr::atom_pow(Atom::AbsXi, 0.5 + 1e-14));
        assert_eq!(e, Expr::atom(Atom::AbsXi));
        let one = Expr::atom_pow(Atom::Norm, -2.0).mul(&Expr::atom_pow(Atom::Norm, 2.0));
        assert_eq!(one, Expr::one());
    }

    #[test]
    fn group_inverse_cancels_exactly() {
        let p = mu().mul(&mu()).add(&xi().mul(&xi())).add(&Expr::one());
        let inv = p.pow_int(-1).unwrap();
        assert_eq!(p.mul(&inv), Expr::one());
        assert_eq!(inv.mul(&p), Expr::one());
        let sq = inv.mul(&inv);
        assert_eq!(sq.mul(&p), inv);
        let scaled = p.scale_real(3.0);
        assert_eq!(scaled.mul(&inv), Expr::real(3.0));
    }

    #[test]
    fn positive_powers_expand() {
        let p = xi().add(&Expr::one());
        let sq = p.pow_int(2).unwrap();
        assert_eq!(sq.len(), 3);
    }

    #[test]
    fn real_power_rules() {
        let a = Expr::atom_pow(Atom::Norm, 2.0).scale_real(4.0);
        assert_eq!(a.pow_real(0.5).unwrap(), Expr::atom(Atom::Norm).scale_real(2.0));
        assert!(xi().add(&mu()).pow_real(0.5).is_err());
        assert!(xi().pow_real(0.5).is_err());
    }

    #[test]
    fn derivative_of_norm_power() {
        let e = Expr::atom_pow(Atom::Norm, -2.0);
        let d = e.derivative_raw(Var::Mu);
        let want = Expr::atom(Atom::Mu).mul(&Expr::atom_pow(Atom::Norm, -4.0)).scale_real(-2.0);
        assert_eq!(d, want);
    }

    #[test]
    fn trig_derivatives() {
        let s = Expr::atom(Atom::Trig { axis: 0, freq: 3, kind: TrigKind::Sin });
        let d2 = s.derivative_raw(Var::X(0)).derivative_raw(Var::X(0));
        assert_eq!(d2, s.scale_real(-9.0));
    }

    #[test]
    fn substitution_rebuilds_groups() {
        let p = mu().mul(&mu()).add(&xi().mul(&xi())).add(&Expr::one());
        let inv = p.pow_int(-1).unwrap();
        let at = inv
            .substitute(&|a| match a {
                Atom::Mu => Some(Ok(Expr::real(2.0))),
                Atom::Xi(_) => Some(Ok(Expr::zero())),
                _ => None,
            })
            .unwrap();
        assert_eq!(at, Expr::real(0.2));
    }
}
