//! JSON form of expressions: `{"dim": n, "expr": node}`.
//!
//! Nodes are objects `{"node": kind, ...}`; composite nodes carry `children`.
//! Leaf kinds: `const` (`value`: number or `[re, im]`), `phase` (`theta`),
//! `x`, `xi`, `phi` (`index`), `mu`, `r`, `height`, `abs_xi`, `japanese`,
//! `japanese_joint`, `norm`, `bracket`, `chi` (`scale`), `chi_joint`,
//! `smooth` (`function`, `order`, `argument`, `scale`), `omega` (`argument`,
//! `scale`), `sin`/`cos` (`index`, `frequency`). Composite kinds: `sum`,
//! `product`, `pow` (`exponent`), `group` (`exponent`, kept unexpanded).

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use super::expr::{is_integer, Atom, Expr, Monomial, RadialBase, TrigKind, C64};
use super::smooth::SmoothFn;
use crate::error::{Error, Result};

/// A parsed symbol document.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolDoc {
    pub dim: usize,
    pub expr: Expr,
}

pub fn parse_document(text: &str) -> Result<SymbolDoc> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::grammar("$", e.to_string()))?;
    parse_document_value(&v)
}

pub fn parse_document_value(v: &Value) -> Result<SymbolDoc> {
    let obj = v.as_object().ok_or_else(|| Error::grammar("$", "document must be an object"))?;
    let dim = obj
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::grammar("dim", "missing or non-integer dimension"))? as usize;
    if dim == 0 || dim > super::eval::MAX_DIM {
        return Err(Error::grammar("dim", format!("dimension {dim} outside 1..={}", super::eval::MAX_DIM)));
    }
    let node = obj.get("expr").ok_or_else(|| Error::grammar("expr", "missing expression"))?;
    Ok(SymbolDoc { dim, expr: parse_node(node, dim, "expr")? })
}

pub fn to_document(doc: &SymbolDoc) -> Value {
    json!({ "dim": doc.dim, "expr": to_node(&doc.expr) })
}

fn field_f64(o: &Map<String, Value>, key: &str, path: &str) -> Result<Option<f64>> {
    match o.get(key) {
        None => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| Error::grammar(format!("{path}.{key}"), "expected a number")),
    }
}

fn field_index(o: &Map<String, Value>, dim: usize, path: &str) -> Result<u8> {
    let i = o
        .get("index")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::grammar(format!("{path}.index"), "missing index"))?;
    if i as usize >= dim {
        return Err(Error::grammar(format!("{path}.index"), format!("index {i} out of range for dimension {dim}")));
    }
    Ok(i as u8)
}

fn children<'a>(o: &'a Map<String, Value>, path: &str) -> Result<&'a Vec<Value>> {
    o.get("children")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::grammar(format!("{path}.children"), "missing children array"))
}

fn radial(o: &Map<String, Value>, path: &str, default: RadialBase) -> Result<RadialBase> {
    match o.get("argument").map(|v| v.as_str()) {
        None => Ok(default),
        Some(Some("abs_xi")) => Ok(RadialBase::AbsXi),
        Some(Some("norm")) => Ok(RadialBase::Norm),
        Some(Some("r")) => Ok(RadialBase::R),
        _ => Err(Error::grammar(format!("{path}.argument"), "argument must be abs_xi, norm or r")),
    }
}

/// Recognizes `c * |xi|^2`, `c * |xi,mu|^2`, `c * <xi>^2`, `c * <xi,mu>^2`.
pub fn recognize_square(base: &Expr, dim: usize) -> Option<(C64, Atom)> {
    let (c, b) = base.normalized();
    let mut has_one = false;
    let mut has_mu = false;
    let mut xi_seen = vec![false; dim];
    let mut has_abs = false;
    for t in b.terms() {
        if t.coef != C64::new(1.0, 0.0) {
            return None;
        }
        let f: Vec<(&Atom, f64)> = t.mono.factors().collect();
        match f.as_slice() {
            [] => has_one = true,
            [(Atom::Mu, e)] if *e == 2.0 => has_mu = true,
            [(Atom::AbsXi, e)] if *e == 2.0 => has_abs = true,
            [(Atom::Xi(i), e)] if *e == 2.0 && (*i as usize) < dim => xi_seen[*i as usize] = true,
            _ => return None,
        }
    }
    let all_xi = xi_seen.iter().all(|s| *s);
    let any_xi = xi_seen.iter().any(|s| *s);
    let xi_ok = (all_xi && !has_abs) || (has_abs && !any_xi);
    if !xi_ok {
        return None;
    }
    let atom = match (has_one, has_mu) {
        (false, false) => Atom::AbsXi,
        (false, true) => Atom::Norm,
        (true, false) => Atom::JapXi,
        (true, true) => Atom::JapXiMu,
    };
    Some((c, atom))
}

fn power(base: Expr, e: f64, dim: usize, path: &str) -> Result<Expr> {
    let e = super::expr::snap(e);
    let recognizable = !(is_integer(e) && e >= 0.0);
    if recognizable && base.len() > 1 {
        if let Some((c, atom)) = recognize_square(&base, dim) {
            if c.im == 0.0 && c.re > 0.0 {
                return Ok(Expr::atom_pow(atom, 2.0 * e).scale(C64::new(c.re.powf(e), 0.0)));
            }
        }
    }
    if is_integer(e) {
        return base.pow_int(e as i64).map_err(|err| Error::grammar(path, err.to_string()));
    }
    base.pow_real(e).map_err(|err| Error::grammar(path, err.to_string()))
}

pub fn parse_node(v: &Value, dim: usize, path: &str) -> Result<Expr> {
    let o = v.as_object().ok_or_else(|| Error::grammar(path, "node must be an object"))?;
    let kind = o.get("node").and_then(Value::as_str).ok_or_else(|| Error::grammar(path, "missing node kind"))?;
    let atom = |a: Atom| Ok(Expr::atom(a));
    match kind {
        "const" => match o.get("value") {
            Some(Value::Number(n)) => Ok(Expr::real(n.as_f64().unwrap_or(f64::NAN))),
            Some(Value::Array(a)) if a.len() == 2 && a.iter().all(Value::is_number) => {
                Ok(Expr::constant(Complex64::new(a[0].as_f64().unwrap(), a[1].as_f64().unwrap())))
            }
            _ => Err(Error::grammar(format!("{path}.value"), "expected a number or [re, im]")),
        },
        "phase" => {
            let th = field_f64(o, "theta", path)?.ok_or_else(|| Error::grammar(format!("{path}.theta"), "missing angle"))?;
            Ok(Expr::constant(Complex64::from_polar(1.0, th)))
        }
        "x" => atom(Atom::X(field_index(o, dim, path)?)),
        "xi" => atom(Atom::Xi(field_index(o, dim, path)?)),
        "phi" => atom(Atom::Phi(field_index(o, dim, path)?)),
        "mu" => atom(Atom::Mu),
        "r" => atom(Atom::R),
        "height" => atom(Atom::Height),
        "abs_xi" => atom(Atom::AbsXi),
        "japanese" => atom(Atom::JapXi),
        "japanese_joint" => atom(Atom::JapXiMu),
        "norm" => atom(Atom::Norm),
        "bracket" => atom(Atom::bracket()),
        "chi" => {
            let c = field_f64(o, "scale", path)?.unwrap_or(1.0);
            if c <= 0.0 {
                return Err(Error::grammar(format!("{path}.scale"), "scale must be positive"));
            }
            atom(Atom::chi(c))
        }
        "chi_joint" => atom(Atom::chi_joint()),
        "smooth" | "omega" => {
            let f = if kind == "omega" {
                SmoothFn::Omega
            } else {
                match o.get("function").and_then(Value::as_str) {
                    Some("psi") => SmoothFn::Psi,
                    Some("eta") => SmoothFn::Eta,
                    Some("omega") => SmoothFn::Omega,
                    _ => return Err(Error::grammar(format!("{path}.function"), "function must be psi, eta or omega")),
                }
            };
            let order = match o.get("order") {
                None => 0,
                Some(v) => v.as_u64().ok_or_else(|| Error::grammar(format!("{path}.order"), "order must be a nonnegative integer"))?,
            };
            let default = if kind == "omega" { RadialBase::R } else { RadialBase::AbsXi };
            let base = radial(o, path, default)?;
            let scale = field_f64(o, "scale", path)?.unwrap_or(1.0);
            if scale <= 0.0 {
                return Err(Error::grammar(format!("{path}.scale"), "scale must be positive"));
            }
            atom(Atom::smooth(f, order as u32, base, scale))
        }
        "sin" | "cos" => {
            let axis = field_index(o, dim, path)?;
            let k = match o.get("frequency") {
                None => 1i64,
                Some(v) => v.as_i64().ok_or_else(|| Error::grammar(format!("{path}.frequency"), "frequency must be an integer"))?,
            };
            Ok(trig(axis, k, if kind == "sin" { TrigKind::Sin } else { TrigKind::Cos }))
        }
        "sum" | "product" => {
            let ch = children(o, path)?;
            let mut acc = if kind == "sum" { Expr::zero() } else { Expr::one() };
            for (i, c) in ch.iter().enumerate() {
                let e = parse_node(c, dim, &format!("{path}.children[{i}]"))?;
                acc = if kind == "sum" { acc.add(&e) } else { acc.mul(&e) };
            }
            Ok(acc)
        }
        "pow" | "group" => {
            let ch = children(o, path)?;
            if ch.len() != 1 {
                return Err(Error::grammar(format!("{path}.children"), "power takes exactly one child"));
            }
            let e = field_f64(o, "exponent", path)?.ok_or_else(|| Error::grammar(format!("{path}.exponent"), "missing exponent"))?;
            let base = parse_node(&ch[0], dim, &format!("{path}.children[0]"))?;
            if kind == "group" {
                if !is_integer(e) {
                    return Err(Error::grammar(format!("{path}.exponent"), "group exponent must be an integer"));
                }
                if base.len() < 2 {
                    return base.pow_int(e as i64).map_err(|err| Error::grammar(path, err.to_string()));
                }
                let (c, b) = base.normalized();
                return Ok(Expr::atom_pow(Atom::Group(Box::new(b)), e).scale(c.powi(e as i32)));
            }
            power(base, e, dim, path)
        }
        other => Err(Error::grammar(path, format!("unknown node kind '{other}'"))),
    }
}

pub fn trig(axis: u8, k: i64, kind: TrigKind) -> Expr {
    if k == 0 {
        return match kind {
            TrigKind::Sin => Expr::zero(),
            TrigKind::Cos => Expr::one(),
        };
    }
    let a = Expr::atom(Atom::Trig { axis, freq: k.unsigned_abs() as u32, kind });
    if k < 0 && kind == TrigKind::Sin {
        a.neg()
    } else {
        a
    }
}

fn const_node(c: C64) -> Value {
    if c.im == 0.0 {
        json!({"node": "const", "value": c.re})
    } else {
        json!({"node": "const", "value": [c.re, c.im]})
    }
}

fn atom_node(a: &Atom) -> Value {
    match a {
        Atom::X(i) => json!({"node": "x", "index": i}),
        Atom::Xi(i) => json!({"node": "xi", "index": i}),
        Atom::Phi(i) => json!({"node": "phi", "index": i}),
        Atom::Mu => json!({"node": "mu"}),
        Atom::R => json!({"node": "r"}),
        Atom::Height => json!({"node": "height"}),
        Atom::AbsXi => json!({"node": "abs_xi"}),
        Atom::JapXi => json!({"node": "japanese"}),
        Atom::JapXiMu => json!({"node": "japanese_joint"}),
        Atom::Norm => json!({"node": "norm"}),
        Atom::Smooth(s) => {
            let arg = match s.base {
                RadialBase::AbsXi => "abs_xi",
                RadialBase::Norm => "norm",
                RadialBase::R => "r",
            };
            json!({"node": "smooth", "function": s.f.name(), "order": s.order, "argument": arg, "scale": s.scale.0})
        }
        Atom::Trig { axis, freq, kind } => {
            let k = if *kind == TrigKind::Sin { "sin" } else { "cos" };
            json!({"node": k, "index": axis, "frequency": freq})
        }
        Atom::Group(g) => json!({"node": "group", "exponent": 1, "children": [to_node(g)]}),
    }
}

fn factor_node(a: &Atom, e: f64) -> Value {
    match a {
        Atom::Group(g) => json!({"node": "group", "exponent": e, "children": [to_node(g)]}),
        _ if e == 1.0 => atom_node(a),
        _ => json!({"node": "pow", "exponent": e, "children": [atom_node(a)]}),
    }
}

fn monomial_node(coef: C64, m: &Monomial) -> Value {
    let mut parts: Vec<Value> = Vec::new();
    if coef != C64::new(1.0, 0.0) || m.is_empty() {
        parts.push(const_node(coef));
    }
    parts.extend(m.factors().map(|(a, e)| factor_node(a, e)));
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        json!({"node": "product", "children": parts})
    }
}

pub fn to_node(e: &Expr) -> Value {
    match e.terms() {
        [] => const_node(C64::new(0.0, 0.0)),
        [t] => monomial_node(t.coef, &t.mono),
        ts => json!({"node": "sum", "children": ts.iter().map(|t| monomial_node(t.coef, &t.mono)).collect::<Vec<_>>()}),
    }
}
