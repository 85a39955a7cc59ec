//! Quadrature primitives shared by the factor, oracle and strategy modules.

/// Number of Simpson sub-intervals (always even, at least 2) so that each
/// sub-interval of `[0, len]` is no longer than `substep`.
pub fn even_intervals(len: f64, substep: f64) -> usize {
    if len <= 0.0 {
        return 2;
    }
    let n = (len / substep).ceil() as usize;
    let n = n.max(2);
    n + (n & 1)
}

/// Composite Simpson rule over equally spaced samples. `values.len()` must
/// be odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    debug_assert!(values.len() % 2 == 1);
    let n = values.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let mut odd = 0.0;
    let mut even = 0.0;
    for (k, v) in values.iter().enumerate().take(n).skip(1) {
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (values[0] + values[n] + 4.0 * odd + 2.0 * even)
}

/// Running integral at every sample of an equally spaced, odd-length
/// series. Even nodes use Simpson panels; odd nodes use the three-point
/// quadratic rule over the first half of the panel, whose local error is
/// `O(h^4)`.
pub fn cumulative(values: &[f64], h: f64, out: &mut Vec<f64>) {
    debug_assert!(values.len() % 2 == 1);
    out.clear();
    out.push(0.0);
    let mut acc = 0.0;
    let mut k = 0;
    while k + 2 < values.len() {
        let (f0, f1, f2) = (values[k], values[k + 1], values[k + 2]);
        out.push(acc + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2));
        acc += h / 3.0 * (f0 + 4.0 * f1 + f2);
        out.push(acc);
        k += 2;
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.1;
        let v: Vec<f64> = (0..=10).map(|k| (k as f64 * h).powi(3)).collect();
        assert!((simpson(&v, h) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let h = 1.0 / 64.0;
        let v: Vec<f64> = (0..=64).map(|k| (0.7 * k as f64 * h).exp()).collect();
        let mut out = Vec::new();
        cumulative(&v, h, &mut out);
        for (k, c) in out.iter().enumerate() {
            let exact = ((0.7 * k as f64 * h).exp() - 1.0) / 0.7;
            assert!((c - exact).abs() < 5e-9, "node {k}: {c} vs {exact}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(32);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(62)).sum();
        assert!((m - 2.0 / 63.0).abs() < 1e-13);
        let (x5, _) = gauss_legendre(5);
        assert!(x5[2].abs() < 1e-15);
    }

    #[test]
    fn even_intervals_respects_substep() {
        assert_eq!(even_intervals(1.0, 0.3), 4);
        assert_eq!(even_intervals(1.0, 1.0), 2);
        assert_eq!(even_intervals(0.0, 0.1), 2);
        assert_eq!(even_intervals(1.0, 1.0 / 128.0), 128);
    }
}
