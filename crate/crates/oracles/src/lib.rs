//! Independent reference numerics for the test suites.
//!
//! Everything here is implemented directly from textbook definitions
//! (row reduction, minor expansion, quadrature, series expansions) so the
//! main crate's linear algebra and samplers can be checked against an
//! implementation that shares no code with them. Dense matrices are plain
//! `Vec<Vec<f64>>`, row major. Not optimized; test-sized inputs only.

/// Natural log of the gamma function, Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Error function via Taylor series (|x| <= 2) or a continued fraction.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x > 6.0 {
        return 1.0;
    }
    if x <= 2.0 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut cf = 0.0;
        for k in (1..=80).rev() {
            cf = (k as f64 / 2.0) / (x + cf);
        }
        let erfc = (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + cf);
        1.0 - erfc
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Gauss-Legendre nodes and weights on [-1, 1], Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate f over [a, b] with n-point Gauss-Legendre.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    rec(f, a, b, simpson(f, a, b), tol, 40)
}

/// Normalizer, mean and variance of an unnormalized log density on [a, b].
pub fn density_moments<F: Fn(f64) -> f64>(
    log_density: F,
    a: f64,
    b: f64,
    n: usize,
) -> (f64, f64, f64) {
    // shift by the max of the log density at the nodes to avoid underflow
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let xs: Vec<f64> = nodes.iter().map(|&t| mid + half * t).collect();
    let ls: Vec<f64> = xs.iter().map(|&x| log_density(x)).collect();
    let lmax = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for ((&x, &l), &w) in xs.iter().zip(&ls).zip(&weights) {
        let d = w * (l - lmax).exp();
        z += d;
        m1 += d * x;
        m2 += d * x * x;
    }
    let mean = m1 / z;
    let var = m2 / z - mean * mean;
    (z * half * lmax.exp(), mean, var)
}

/// Matrix inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n, "square matrix required");
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = aug[row][col];
            if factor != 0.0 {
                let src = aug[col].clone();
                for (d, s) in aug[row].iter_mut().zip(src.iter()) {
                    *d -= factor * s;
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Solve A x = b by Gauss-Jordan.
pub fn gauss_jordan_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let inv = gauss_jordan_inverse(a)?;
    Some(mat_vec(&inv, b))
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Determinant by cofactor (minor) expansion along the first row. O(n!).
pub fn det_minor_expansion(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 1 {
        return a[0][0];
    }
    let mut det = 0.0;
    for j in 0..n {
        let minor: Vec<Vec<f64>> = a[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(c, _)| c != j)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * a[0][j] * det_minor_expansion(&minor);
    }
    det
}

/// Matrix rank by row reduction with a relative tolerance.
pub fn rank_row_reduction(a: &[Vec<f64>], tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let rows = m.len();
    let cols = m[0].len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut rank = 0;
    for col in 0..cols {
        let pivot = (rank..rows).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()));
        let pivot = match pivot {
            Some(p) if m[p][col].abs() > tol * scale => p,
            _ => continue,
        };
        m.swap(rank, pivot);
        let p = m[rank][col];
        for row in 0..rows {
            if row != rank {
                let f = m[row][col] / p;
                for c in 0..cols {
                    m[row][c] -= f * m[rank][c];
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Autocovariances gamma(0..=max_lag) of a stationary AR(p) process with the
/// given innovation variance, from the Yule-Walker equations.
pub fn yule_walker_autocov(coeffs: &[f64], innovation_var: f64, max_lag: usize) -> Vec<f64> {
    let p = coeffs.len();
    if p == 0 {
        let mut g = vec![0.0; max_lag + 1];
        g[0] = innovation_var;
        return g;
    }
    // unknowns gamma(0..=p); equations:
    //   gamma(0) - sum_i phi_i gamma(i) = sigma^2
    //   gamma(k) - sum_i phi_i gamma(|k-i|) = 0   for k = 1..=p
    let n = p + 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    b[0] = innovation_var;
    for k in 0..n {
        a[k][k] += 1.0;
        for (i, &phi) in coeffs.iter().enumerate() {
            let lag = (k as isize - (i as isize + 1)).unsigned_abs();
            a[k][lag] -= phi;
        }
    }
    let mut gamma = gauss_jordan_solve(&a, &b).expect("Yule-Walker system is nonsingular");
    // recurse for higher lags
    for k in n..=max_lag {
        let g = (0..p).map(|i| coeffs[i] * gamma[k - 1 - i]).sum();
        gamma.push(g);
    }
    gamma.truncate(max_lag + 1);
    gamma
}

/// Kolmogorov-Smirnov statistic of a sample against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    d
}

/// Asymptotic KS critical value at significance alpha.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c / (n as f64).sqrt()
}

/// Pearson chi-square statistic for observed bin counts vs expected probabilities.
/// Bins with expected count below 5 are merged into their left neighbor.
/// Returns (statistic, degrees of freedom).
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> (f64, usize) {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    let mut merged: Vec<(f64, f64)> = Vec::new(); // (obs, exp)
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * n as f64;
        match merged.last_mut() {
            Some(last) if last.1 < 5.0 => {
                last.0 += o as f64;
                last.1 += e;
            }
            _ => merged.push((o as f64, e)),
        }
    }
    // the final bin may still be under-filled; fold it back
    if merged.len() >= 2 && merged.last().unwrap().1 < 5.0 {
        let (o, e) = merged.pop().unwrap();
        let last = merged.last_mut().unwrap();
        last.0 += o;
        last.1 += e;
    }
    let stat = merged
        .iter()
        .map(|&(o, e)| (o - e) * (o - e) / e)
        .sum::<f64>();
    (stat, merged.len().saturating_sub(1))
}

/// Chi-square quantile via the Wilson-Hilferty approximation.
pub fn chi_square_quantile(df: usize, prob: f64) -> f64 {
    let k = df as f64;
    let z = normal_quantile(prob);
    let t = 1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt();
    k * t * t * t
}

/// Standard normal quantile by bisection on normal_cdf.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Lag-k sample autocorrelation.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    let m = mean(xs);
    let var: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let cov: f64 = (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum();
    cov / var
}

/// Poisson pmf evaluated directly through ln_gamma.
pub fn poisson_pmf(rate: f64, k: u64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-rate + k as f64 * rate.ln() - ln_gamma(k as f64 + 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 2..15u64 {
            let f: f64 = (1..n).map(|k| k as f64).product();
            assert!((ln_gamma(n as f64) - f.ln()).abs() < 1e-10, "n={n}");
        }
        // gamma(1/2) = sqrt(pi)
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.0)).abs() < 1e-15);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-10);
        assert!((erf(2.0) - 0.995_322_265_018_952_9).abs() < 1e-10);
        assert!((erf(3.0) - 0.999_977_909_503_001_4).abs() < 1e-9);
        assert!((erf(-1.0) + erf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // 5-point rule is exact through degree 9
        let val = integrate(|x| x.powi(8), -1.0, 1.0, 5);
        assert!((val - 2.0 / 9.0).abs() < 1e-13);
        let val = integrate(|x| (-x * x / 2.0).exp(), -8.0, 8.0, 80);
        assert!((val - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn adaptive_simpson_gaussian_mass() {
        let val = adaptive_simpson(&|x: f64| (-x * x / 2.0).exp(), -10.0, 10.0, 1e-12);
        assert!((val - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn gauss_jordan_inverts_known_matrix() {
        let a = vec![vec![4.0, 1.0], vec![2.0, 3.0]];
        let inv = gauss_jordan_inverse(&a).unwrap();
        // det = 10
        assert!((inv[0][0] - 0.3).abs() < 1e-12);
        assert!((inv[0][1] + 0.1).abs() < 1e-12);
        assert!((inv[1][0] + 0.2).abs() < 1e-12);
        assert!((inv[1][1] - 0.4).abs() < 1e-12);
        assert!(gauss_jordan_inverse(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_none());
    }

    #[test]
    fn det_expansion_matches_rule_of_sarrus() {
        let a = vec![
            vec![2.0, -1.0, 0.5],
            vec![1.0, 3.0, -2.0],
            vec![0.0, 1.0, 1.0],
        ];
        let sarrus = 2.0 * (3.0 + 2.0) - (-1.0) * (1.0 - 0.0) + 0.5 * (1.0 - 0.0);
        assert!((det_minor_expansion(&a) - sarrus).abs() < 1e-12);
    }

    #[test]
    fn rank_detects_duplicate_column() {
        let a = vec![
            vec![1.0, 2.0, 2.0],
            vec![1.0, 3.0, 3.0],
            vec![1.0, 4.0, 4.0],
            vec![1.0, 5.0, 5.0],
            vec![1.0, 6.0, 6.0],
        ];
        assert_eq!(rank_row_reduction(&a, 1e-10), 2);
    }

    #[test]
    fn yule_walker_ar1_closed_form() {
        // AR(1): gamma(0) = s2/(1-phi^2), gamma(k) = phi^k gamma(0)
        let g = yule_walker_autocov(&[0.5], 1.0, 3);
        let g0 = 1.0 / (1.0 - 0.25);
        assert!((g[0] - g0).abs() < 1e-12);
        assert!((g[1] - 0.5 * g0).abs() < 1e-12);
        assert!((g[3] - 0.125 * g0).abs() < 1e-12);
    }

    #[test]
    fn ks_statistic_of_exact_grid_is_small() {
        // quantile grid of the uniform distribution
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.5 / n as f64 + 1e-12);
    }

    #[test]
    fn chi_square_quantile_reference() {
        // chi2(0.99, 10) = 23.209; Wilson-Hilferty is good to ~0.1 here
        assert!((chi_square_quantile(10, 0.99) - 23.209).abs() < 0.15);
        assert!((chi_square_quantile(30, 0.99) - 50.892).abs() < 0.2);
    }

    #[test]
    fn density_moments_of_gaussian() {
        let (z, m, v) = density_moments(|x| -0.5 * (x - 1.5) * (x - 1.5) / 0.25, -6.0, 9.0, 200);
        assert!((m - 1.5).abs() < 1e-10);
        assert!((v - 0.25).abs() < 1e-10);
        assert!((z - (2.0 * std::f64::consts::PI * 0.25).sqrt()).abs() < 1e-10);
    }
}
