//! Symbol classes, their inclusions, and numerical seminorm verification.
//!
//! `verify_class` divides every derivative `d_xi^alpha d_x^beta d_mu^j a` by
//! the weight of the class and records the supremum `S(T)` of the ratio over
//! grid points of size `max(|xi|, mu) <= T`. An estimate passes when all
//! ratios are finite and the log-log slope of `S(T)` over the fit window
//! stays below the slope tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diff::{derivative_multi, multi_indices, Domain};
use super::eval::{Compiled, Point, CANCELLATION};
use super::expr::{is_integer, snap, Expr};
use super::homogeneity::{check_homogeneity, sample_x, HomogeneityMode, HomogeneityReport};
use crate::error::{Error, Result};
use crate::numeric::{log_grid, loglog_slope};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "Hormander_10")]
    Hormander10,
    #[serde(rename = "Hormander_poly")]
    HormanderPoly,
    #[serde(rename = "Grubb_10")]
    Grubb10,
    #[serde(rename = "Grubb_poly")]
    GrubbPoly,
    #[serde(rename = "WeakTilde_10")]
    WeakTilde10,
    #[serde(rename = "WeakTilde_poly")]
    WeakTildePoly,
    #[serde(rename = "BoldTilde_10")]
    BoldTilde10,
    #[serde(rename = "BoldTilde_poly")]
    BoldTildePoly,
    #[serde(rename = "Bold_poly")]
    BoldPoly,
    #[serde(rename = "Hom_strong")]
    HomStrong,
    #[serde(rename = "Hom_weak")]
    HomWeak,
    #[serde(rename = "Hom_boldweak")]
    HomBoldWeak,
    #[serde(rename = "Hom_bold")]
    HomBold,
}

impl Family {
    pub fn is_homogeneous(self) -> bool {
        matches!(self, Family::HomStrong | Family::HomWeak | Family::HomBoldWeak | Family::HomBold)
    }

    pub fn is_strong(self) -> bool {
        matches!(self, Family::Hormander10 | Family::HormanderPoly | Family::HomStrong)
    }

    pub fn parse(s: &str) -> Result<Family> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Argument(format!("unknown class family '{s}'")))
    }
}

/// A class `family^{d, nu}`; strong families ignore `nu` (stored as zero).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTag {
    pub family: Family,
    pub order: f64,
    pub regularity: f64,
}

fn nat(v: f64) -> bool {
    let v = snap(v);
    v >= 0.0 && is_integer(v)
}

impl ClassTag {
    pub fn new(family: Family, order: f64, regularity: f64) -> Result<Self> {
        let regularity = if family.is_strong() { 0.0 } else { regularity };
        if family == Family::BoldPoly && !is_integer(snap(regularity)) {
            return Err(Error::Argument(format!("Bold_poly needs an integer regularity, got {regularity}")));
        }
        if !order.is_finite() || !regularity.is_finite() {
            return Err(Error::Argument("order and regularity must be finite".into()));
        }
        Ok(ClassTag { family, order, regularity })
    }

    pub fn strong(order: f64) -> Self {
        ClassTag { family: Family::Hormander10, order, regularity: 0.0 }
    }

    pub fn weak(order: f64, regularity: f64) -> Self {
        ClassTag { family: Family::WeakTilde10, order, regularity }
    }

    pub fn shifted(&self, by: f64) -> Self {
        ClassTag { order: self.order - by, regularity: if self.family.is_strong() { 0.0 } else { self.regularity - by }, ..*self }
    }

    /// Whether `sub` is contained in `self` by one of the known inclusions.
    pub fn contains(&self, sub: &ClassTag) -> bool {
        use Family::*;
        let (d, nu) = (self.order, self.regularity);
        let (e, m) = (sub.order, sub.regularity);
        let weak_le = |m: f64| e <= d + 1e-12 && e - m <= d - nu + 1e-12;
        let poly_le = |m: f64| nat(d - e) && e - m <= d - nu + 1e-12;
        let bold_le = |m: f64| nat(d - e) && nat((d - nu) - (e - m));
        let strong_in_weak = e <= d - nu.max(0.0) + 1e-12;
        let same = (e - d).abs() < 1e-12;
        match self.family {
            Hormander10 => matches!(sub.family, Hormander10 | HormanderPoly) && e <= d + 1e-12,
            HormanderPoly => sub.family == HormanderPoly && nat(d - e),
            Grubb10 => match sub.family {
                Hormander10 | HormanderPoly => e <= d + 1e-12,
                Grubb10 | GrubbPoly | WeakTilde10 | WeakTildePoly | BoldTilde10 | BoldTildePoly | BoldPoly => weak_le(m),
                _ => false,
            },
            GrubbPoly => match sub.family {
                HormanderPoly => nat(d - e),
                GrubbPoly | WeakTildePoly | BoldTildePoly | BoldPoly => poly_le(m),
                _ => false,
            },
            WeakTilde10 => match sub.family {
                Hormander10 | HormanderPoly => strong_in_weak,
                WeakTilde10 | WeakTildePoly | BoldTilde10 | BoldTildePoly => weak_le(m),
                Grubb10 | GrubbPoly => m <= 0.0 && weak_le(m),
                BoldPoly => weak_le(m.min(0.0)),
                _ => false,
            },
            WeakTildePoly => match sub.family {
                HormanderPoly => nat(d - e) && strong_in_weak,
                WeakTildePoly | BoldTildePoly => poly_le(m),
                GrubbPoly => m <= 0.0 && poly_le(m),
                BoldPoly => poly_le(m.min(0.0)),
                _ => false,
            },
            BoldTilde10 => match sub.family {
                Hormander10 | HormanderPoly => strong_in_weak,
                BoldTilde10 | BoldTildePoly => weak_le(m),
                BoldPoly => weak_le(m.min(0.0)),
                _ => false,
            },
            BoldTildePoly => match sub.family {
                HormanderPoly => bold_le(0.0),
                BoldTildePoly => bold_le(m),
                BoldPoly => bold_le(m.min(0.0)),
                _ => false,
            },
            BoldPoly => match sub.family {
                HormanderPoly => nat(d - e),
                BoldTildePoly | BoldPoly => bold_le(m),
                _ => false,
            },
            HomStrong => sub.family == HomStrong && same,
            HomWeak => {
                same && match sub.family {
                    HomWeak | HomBoldWeak => m >= nu - 1e-12,
                    HomStrong => nu <= 0.0,
                    HomBold => nu <= 0.0 && m >= nu - 1e-12,
                    _ => false,
                }
            }
            HomBoldWeak => {
                same && match sub.family {
                    HomBoldWeak => nat(m - nu),
                    HomStrong => nu <= 0.0 && is_integer(snap(nu)),
                    HomBold => nu <= 0.0 && nat(m - nu),
                    _ => false,
                }
            }
            HomBold => {
                same && match sub.family {
                    HomBold | HomBoldWeak => nat(m - nu),
                    HomStrong => true,
                    _ => false,
                }
            }
        }
    }

    pub fn equals(&self, other: &ClassTag) -> bool {
        self.contains(other) && other.contains(self)
    }

    /// Right-hand side of the estimate for `|alpha|` covariable and `j` parameter derivatives.
    pub fn weight(&self, alpha: u32, j: u32, abs_xi: f64, mu: f64) -> f64 {
        use Family::*;
        let (d, nu) = (self.order, self.regularity);
        let (a, j) = (alpha as f64, j as f64);
        if self.family.is_homogeneous() {
            let n = (abs_xi * abs_xi + mu * mu).sqrt();
            let strong = n.powf(d - a - j);
            let weak = abs_xi.powf(nu - a) * n.powf(d - nu - j);
            return match self.family {
                HomStrong => strong,
                HomBold => weak + strong,
                _ => weak,
            };
        }
        let jx = (1.0 + abs_xi * abs_xi).sqrt();
        let jxm = (1.0 + abs_xi * abs_xi + mu * mu).sqrt();
        let strong = jxm.powf(d - a - j);
        let weak = jx.powf(nu - a) * jxm.powf(d - nu - j);
        match self.family {
            Hormander10 | HormanderPoly => strong,
            Grubb10 | GrubbPoly | BoldPoly => weak + strong,
            _ => weak,
        }
    }
}

/// Sampling grid for seminorm checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_decade: usize,
    pub min: f64,
    pub max: f64,
    /// Window of sizes `T` used for the slope fit.
    pub fit_from: f64,
    pub fit_to: f64,
    pub slope_tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points_per_decade: 40, min: 1e-2, max: 1e3, fit_from: 10.0, fit_to: 1e3, slope_tolerance: 0.1 }
    }
}

impl GridSpec {
    pub fn with_density(points_per_decade: usize) -> Self {
        GridSpec { points_per_decade, ..Default::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateResult {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub j: u32,
    pub max_ratio: f64,
    pub slope: f64,
    pub finite: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeminormReport {
    pub tag: ClassTag,
    pub depth: u32,
    pub grid: GridSpec,
    pub estimates: Vec<EstimateResult>,
    pub max_slope: f64,
    pub homogeneity: Option<HomogeneityReport>,
    pub passed: bool,
}

impl SeminormReport {
    pub fn failures(&self) -> impl Iterator<Item = &EstimateResult> {
        self.estimates.iter().filter(|e| !e.passed)
    }
}

/// Unit covariable directions used for grids.
pub fn xi_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => vec![vec![1.0, 0.0], vec![0.6, -0.8]],
        _ => vec![vec![1.0, 0.0, 0.0], vec![0.48, -0.6, 0.64]],
    }
}

struct Sample {
    bucket: usize,
    abs_xi: f64,
    mu: f64,
    point: Point,
}

fn symbol_samples(dim: usize, grid: &GridSpec, xs: &[Vec<f64>]) -> (Vec<Sample>, Vec<f64>) {
    let mut sizes = vec![0.0];
    sizes.extend(log_grid(grid.min, grid.max, grid.points_per_decade));
    let mut out = Vec::new();
    for x in xs {
        for (i, &s) in sizes.iter().enumerate() {
            let dirs = if s == 0.0 { vec![vec![0.0; dim]] } else { xi_directions(dim) };
            for dir in dirs {
                let xi: Vec<f64> = dir.iter().map(|v| v * s).collect();
                for (k, &mu) in sizes.iter().enumerate() {
                    out.push(Sample { bucket: i.max(k), abs_xi: s, mu, point: Point::symbol(x, &xi, mu) });
                }
            }
        }
    }
    (out, sizes)
}

/// Semisphere samples `|(xi, mu)| = 1`; bucket index orders `1 / r`.
fn hom_samples(dim: usize, grid: &GridSpec, xs: &[Vec<f64>]) -> (Vec<Sample>, Vec<f64>) {
    let inv: Vec<f64> = log_grid(1.0, grid.max, grid.points_per_decade);
    let mut out = Vec::new();
    for x in xs {
        for (i, &t) in inv.iter().enumerate() {
            let r = 1.0 / t;
            let mu = (1.0 - r * r).max(0.0).sqrt();
            for dir in xi_directions(dim) {
                let xi: Vec<f64> = dir.iter().map(|v| v * r).collect();
                out.push(Sample { bucket: i, abs_xi: r, mu, point: Point::symbol(x, &xi, mu) });
            }
        }
    }
    (out, inv)
}

/// Checks the class estimates up to derivative order `depth`.
pub fn verify_class(a: &Expr, dim: usize, tag: &ClassTag, depth: u32, grid: &GridSpec) -> Result<SeminormReport> {
    if depth > 6 {
        return Err(Error::Argument(format!("derivative depth {depth} exceeds 6")));
    }
    let hom = tag.family.is_homogeneous();
    let xs = sample_x(dim, a.depends_on_x());
    let (samples, sizes) = if hom { hom_samples(dim, grid, &xs) } else { symbol_samples(dim, grid, &xs) };
    let domain = if hom { Domain::Punctured } else { Domain::Full };
    let x_dep = a.depends_on_x();

    let mut combos = Vec::new();
    for total in 0..=depth {
        for ab in 0..=total {
            for alpha in multi_indices(dim, ab) {
                for bb in 0..=(total - ab) {
                    if bb > 0 && !x_dep {
                        continue;
                    }
                    for beta in multi_indices(dim, bb) {
                        combos.push((alpha.clone(), beta, total - ab - bb));
                    }
                }
            }
        }
    }

    let mut estimates = Vec::with_capacity(combos.len());
    for (alpha, beta, j) in combos {
        let der = derivative_multi(a, &alpha, &beta, j, domain)?;
        let alen: u32 = alpha.iter().sum();
        let mut bucket_max = vec![0.0f64; sizes.len()];
        let mut finite = true;
        if !der.is_zero() {
            let c = Compiled::new(&der);
            let ratios: Vec<Result<f64>> = samples
                .par_iter()
                .map(|s| {
                    let (v, mass) = c.eval_with_mass(&s.point)?;
                    // Exact cancellation leaves rounding noise, not a size.
                    let v = if v.norm() <= CANCELLATION * mass { 0.0 } else { v.norm() };
                    Ok(v / tag.weight(alen, j, s.abs_xi, s.mu))
                })
                .collect();
            for (s, r) in samples.iter().zip(ratios) {
                let r = r?;
                if !r.is_finite() {
                    finite = false;
                    continue;
                }
                bucket_max[s.bucket] = bucket_max[s.bucket].max(r);
            }
        }
        let mut running = 0.0f64;
        let mut sup = Vec::with_capacity(sizes.len());
        for b in &bucket_max {
            running = running.max(*b);
            sup.push(running);
        }
        let (fx, fy): (Vec<f64>, Vec<f64>) = sizes
            .iter()
            .zip(&sup)
            .filter(|(t, _)| **t >= grid.fit_from * (1.0 - 1e-12) && **t <= grid.fit_to * (1.0 + 1e-12))
            .map(|(t, s)| (*t, *s))
            .unzip();
        let (px, py): (Vec<f64>, Vec<f64>) = fx.iter().zip(&fy).filter(|(_, v)| **v > 0.0).map(|(t, v)| (*t, *v)).unzip();
        let slope = if px.len() >= 3 { loglog_slope(&px, &py) } else { 0.0 };
        let passed = finite && slope <= grid.slope_tolerance;
        estimates.push(EstimateResult { alpha, beta, j, max_ratio: running, slope, finite, passed });
    }

    let homogeneity = if hom { Some(check_homogeneity(a, dim, tag.order, HomogeneityMode::Joint)?) } else { None };
    let max_slope = estimates.iter().map(|e| e.slope).fold(f64::NEG_INFINITY, f64::max);
    let passed = estimates.iter().all(|e| e.passed) && homogeneity.as_ref().map(|h| h.passed).unwrap_or(true);
    Ok(SeminormReport { tag: *tag, depth, grid: grid.clone(), estimates, max_slope, homogeneity, passed })
}

#[cfg(test)]
mod tests {
    use super::super::expr::Atom;
    use super::*;

    fn tag(f: Family, d: f64, nu: f64) -> ClassTag {
        ClassTag::new(f, d, nu).unwrap()
    }

    #[test]
    fn inclusions() {
        use Family::*;
        for nu in [-2.0, 0.0, 1.5] {
            assert!(tag(Grubb10, 1.0, nu).contains(&tag(Hormander10, 1.0, 0.0)));
            assert!(tag(Grubb10, 1.0, nu).contains(&tag(WeakTilde10, 1.0, nu)));
        }
        assert!(tag(WeakTilde10, 1.0, -1.0).equals(&tag(Grubb10, 1.0, -1.0)));
        assert!(!tag(WeakTilde10, 1.0, 1.0).contains(&tag(Grubb10, 1.0, 1.0)));
        assert!(tag(Grubb10, 0.0, 0.0).contains(&tag(Grubb10, 0.0, 1.0)));
        assert!(!tag(Grubb10, 0.0, 1.0).contains(&tag(Grubb10, 0.0, 0.0)));
        assert!(tag(WeakTilde10, 2.0, 0.0).contains(&tag(Hormander10, 2.0, 0.0)));
        assert!(tag(BoldTildePoly, 2.0, -1.0).equals(&tag(BoldPoly, 2.0, -1.0)));
        assert!(tag(BoldTildePoly, 2.0, 0.0).contains(&tag(BoldPoly, 2.0, 3.0)));
        assert!(tag(BoldTildePoly, 2.0, 1.0).contains(&tag(BoldTildePoly, -1.0, -2.0)));
        assert!(tag(HomWeak, 2.0, -1.0).contains(&tag(HomStrong, 2.0, 0.0)));
        assert!(!tag(HomWeak, 2.0, 1.0).contains(&tag(HomStrong, 2.0, 0.0)));
        assert!(ClassTag::new(BoldPoly, 1.0, 0.5).is_err());
    }

    #[test]
    fn defining_examples_pass() {
        let grid = GridSpec::with_density(10);
        let d = -1.5;
        let a = Expr::atom_pow(Atom::JapXiMu, d);
        assert!(verify_class(&a, 1, &ClassTag::strong(d), 2, &grid).unwrap().passed);
        let b = Expr::atom_pow(Atom::JapXi, 0.5).mul(&Expr::atom_pow(Atom::JapXiMu, d - 0.5));
        assert!(verify_class(&b, 2, &ClassTag::weak(d, 0.5), 2, &grid).unwrap().passed);
    }

    #[test]
    fn mu_independent_regularity() {
        let grid = GridSpec::with_density(10);
        let d = 1.0;
        let a = Expr::atom_pow(Atom::JapXi, d);
        assert!(verify_class(&a, 1, &ClassTag::weak(d, d), 3, &grid).unwrap().passed);
        let r = verify_class(&a, 1, &ClassTag::weak(d, d + 1.0), 3, &grid).unwrap();
        assert!(!r.passed);
        assert!(r.max_slope > 0.9);
    }

    #[test]
    fn homogeneous_weak_family() {
        let grid = GridSpec::with_density(10);
        let a = Expr::atom_pow(Atom::AbsXi, -1.0).mul(&Expr::atom_pow(Atom::Norm, -2.0));
        let t = ClassTag::new(Family::HomWeak, -3.0, -1.0).unwrap();
        assert!(verify_class(&a, 1, &t, 2, &grid).unwrap().passed);
        let bad = ClassTag::new(Family::HomWeak, -3.0, 0.0).unwrap();
        assert!(!verify_class(&a, 1, &bad, 2, &grid).unwrap().passed);
    }
}
