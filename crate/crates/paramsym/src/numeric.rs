//! Small numerical helpers shared across modules.

/// `count` points per decade from `lo` to `hi` inclusive (both powers of ten or not).
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=n).map(|k| lo * 10f64.powf(decades * k as f64 / n as f64)).collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Slope of `log10 y` against `log10 x`, skipping nonpositive values.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.log10(), y.log10())).unzip();
    slope(&lx, &ly)
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Generalized binomial coefficient `C(a, k)`.
pub fn binomial(a: f64, k: u32) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c *= (a - i as f64) / (i as f64 + 1.0);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_slope() {
        let g = log_grid(1e-2, 1e3, 40);
        assert_eq!(g.len(), 201);
        assert!((g[200] - 1e3).abs() < 1e-9);
        let ys: Vec<f64> = g.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        assert!((loglog_slope(&g, &ys) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5.0, 2), 10.0);
        assert_eq!(binomial(-1.0, 3), -1.0);
        assert!((binomial(0.5, 2) + 0.125).abs() < 1e-16);
    }
}
