//! Gauss–Legendre rules on `[0, 1]`.

/// Nodes and weights of the `k`-point Gauss–Legendre rule mapped to `[0, 1]`,
/// nodes ascending. Roots of `P_k` by Newton iteration from the Tricomi
/// initial guess.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k > 0, "rule needs at least one node");
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(k, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(k, t);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        // t descends from near 1; mirror pairs fill both ends
        x[k - 1 - i] = 0.5 * (1.0 + t);
        x[i] = 0.5 * (1.0 - t);
        w[k - 1 - i] = 0.5 * wi;
        w[i] = 0.5 * wi;
    }
    (x, w)
}

/// `(P_k(t), P_k'(t))` by the three-term recurrence.
fn legendre(k: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if k == 0 {
        return (1.0, 0.0);
    }
    let d = k as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one_and_nodes_ascend() {
        for k in [1, 2, 5, 64, 2048] {
            let (x, w) = gauss_legendre(k);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13, "k = {k}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            assert!(x.iter().all(|&t| t > 0.0 && t < 1.0));
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let (x, w) = gauss_legendre(5);
        for p in 0..10 {
            let q: f64 = x.iter().zip(&w).map(|(t, wi)| wi * t.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn midpoint_rule_and_smooth_integrand() {
        let (x, w) = gauss_legendre(1);
        assert_eq!((x[0], w[0]), (0.5, 1.0));
        let (x, w) = gauss_legendre(40);
        let q: f64 = x.iter().zip(&w).map(|(t, wi)| wi * (10.0 * t).cos()).sum();
        assert!((q - (10f64).sin() / 10.0).abs() < 1e-15);
    }
}
