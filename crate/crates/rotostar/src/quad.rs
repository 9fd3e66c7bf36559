//! Quadrature rules and orthogonal-polynomial utilities shared by every module.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

/// Gauss-Legendre nodes and weights on [-1, 1], Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
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
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Legendre polynomial P_l(x).
pub fn legendre_p(l: usize, x: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=l {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Derivative P_l'(x), stable up to and including x = ±1.
pub fn legendre_p_deriv(l: usize, x: f64) -> f64 {
    if l == 0 {
        return 0.0;
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut dp0, mut dp1) = (0.0, 1.0);
    for k in 2..=l {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        let dp2 = dp0 + (2.0 * kf - 1.0) * p1;
        p0 = p1;
        p1 = p2;
        dp0 = dp1;
        dp1 = dp2;
    }
    dp1
}

/// Normalized associated Legendre function with unit L²([-1,1]) norm,
/// i.e. sqrt((2l+1)/2 (l-m)!/(l+m)!) P_l^m(x) without the Condon-Shortley phase.
pub fn assoc_legendre_norm(l: usize, m: usize, x: f64) -> f64 {
    assert!(m <= l);
    let s = (1.0 - x * x).max(0.0).sqrt();
    // diagonal start P̄_mm
    let mut pmm = (0.5f64).sqrt();
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = pmm; // P̄_{m,m}
    let mut p = ((2 * m + 3) as f64).sqrt() * x * pmm; // P̄_{m+1,m}
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
            .sqrt();
        let pnext = a * (x * p - b * pm1);
        pm1 = p;
        p = pnext;
    }
    p
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Gauss-Jacobi nodes/weights on [-1,1] for weight (1-x)^alpha (1+x)^beta,
/// by Golub-Welsch on the symmetric recurrence matrix.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0 && alpha > -1.0 && beta > -1.0);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let ab = alpha + beta;
    diag[0] = (beta - alpha) / (ab + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let d = 2.0 * kf + ab;
        diag[k] = (beta * beta - alpha * alpha) / (d * (d + 2.0));
        let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
        let den = d * d * (d + 1.0) * (d - 1.0);
        off[k - 1] = (num / den).sqrt();
    }
    let mut j = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        j[[k, k]] = diag[k];
        if k + 1 < n {
            j[[k, k + 1]] = off[k];
            j[[k + 1, k]] = off[k];
        }
    }
    let (vals, vecs) = j.eigh(UPLO::Lower).expect("jacobi eigensolve");
    let mu0 = (2f64).powf(ab + 1.0)
        * (ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0) - ln_gamma(ab + 2.0)).exp();
    let mut nodes: Vec<f64> = vals.to_vec();
    let mut weights: Vec<f64> = (0..n).map(|k| mu0 * vecs[[0, k]] * vecs[[0, k]]).collect();
    // eigh returns ascending eigenvalues already; keep the pairing explicit anyway
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].partial_cmp(&nodes[b]).unwrap());
    nodes = idx.iter().map(|&i| nodes[i]).collect();
    weights = idx.iter().map(|&i| weights[i]).collect();
    (nodes, weights)
}

/// Map a rule from [-1,1] to [a,b].
pub fn map_rule(nodes: &[f64], weights: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        nodes.iter().map(|&x| mid + half * x).collect(),
        weights.iter().map(|&w| w * half).collect(),
    )
}

/// Composite Gauss-Legendre integration of f over consecutive panels.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, breaks: &[f64], order: usize) -> f64 {
    let (gx, gw) = gauss_legendre(order);
    let mut total = 0.0;
    for p in breaks.windows(2) {
        let (xs, ws) = map_rule(&gx, &gw, p[0], p[1]);
        for (x, w) in xs.iter().zip(&ws) {
            total += w * f(*x);
        }
    }
    total
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        left + right + err / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Barycentric differentiation matrix for distinct nodes.
pub fn diff_matrix(x: &[f64]) -> Array2<f64> {
    let n = x.len();
    let mut w = vec![1.0f64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[i] *= x[i] - x[j];
            }
        }
    }
    // rescale to tame over/underflow before inverting
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in w.iter_mut() {
        *v = scale / *v;
    }
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if i != j {
                d[[i, j]] = w[j] / (w[i] * (x[i] - x[j]));
                s += d[[i, j]];
            }
        }
        d[[i, i]] = -s;
    }
    d
}

/// Apply the differentiation matrix to sampled values.
pub fn diff_apply(d: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let yv = Array1::from(y.to_vec());
    d.dot(&yv).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_abs_diff_eq!(s, 2.0 / 15.0, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn legendre_orthogonality() {
        let (x, w) = gauss_legendre(24);
        for l in 0..12 {
            for lp in 0..12 {
                let s: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(x, w)| w * legendre_p(l, *x) * legendre_p(lp, *x))
                    .sum();
                let expect = if l == lp { 2.0 / (2 * l + 1) as f64 } else { 0.0 };
                assert_abs_diff_eq!(s, expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn assoc_legendre_orthonormal() {
        let (x, w) = gauss_legendre(40);
        for m in 0..4usize {
            for l in m..(m + 6) {
                for lp in m..(m + 6) {
                    let s: f64 = x
                        .iter()
                        .zip(&w)
                        .map(|(x, w)| {
                            w * assoc_legendre_norm(l, m, *x) * assoc_legendre_norm(lp, m, *x)
                        })
                        .sum();
                    let expect = if l == lp { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(s, expect, epsilon = 1e-12);
                }
            }
        }
        // m = 0 reduction to ordinary Legendre
        for l in 0..6 {
            let v = assoc_legendre_norm(l, 0, 0.3);
            let expect = ((2 * l + 1) as f64 / 2.0).sqrt() * legendre_p(l, 0.3);
            assert_abs_diff_eq!(v, expect, epsilon = 1e-13);
        }
    }

    #[test]
    fn jacobi_matches_legendre_at_zero_exponents() {
        let (xj, wj) = gauss_jacobi(12, 0.0, 0.0);
        let (xl, wl) = gauss_legendre(12);
        for i in 0..12 {
            assert_abs_diff_eq!(xj[i], xl[i], epsilon = 1e-12);
            assert_abs_diff_eq!(wj[i], wl[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobi_singular_weight_moment() {
        // ∫_{-1}^{1} (1-x)^{-1/2} dx = 2√2
        let (_, w) = gauss_jacobi(6, -0.5, 0.0);
        let s: f64 = w.iter().sum();
        assert_abs_diff_eq!(s, 2.0 * (2f64).sqrt(), epsilon = 1e-12);
        // ∫ (1-x)^{-1/2} x² dx: substitute u = 1-x: ∫_0^2 u^{-1/2}(1-u)² du
        let exact = 2.0f64.sqrt() * (2.0 - 8.0 / 3.0 + 8.0 / 5.0);
        let (x, w) = gauss_jacobi(6, -0.5, 0.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert_abs_diff_eq!(s, exact, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_simpson_smooth() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert_abs_diff_eq!(v, 1f64.exp() - 1.0, epsilon = 1e-11);
    }

    #[test]
    fn diff_matrix_exact_on_polynomials() {
        let (x, _) = gauss_legendre(10);
        let d = diff_matrix(&x);
        let y: Vec<f64> = x.iter().map(|x| x.powi(5)).collect();
        let dy = diff_apply(&d, &y);
        for (xi, dyi) in x.iter().zip(&dy) {
            assert_abs_diff_eq!(*dyi, 5.0 * xi.powi(4), epsilon = 1e-10);
        }
    }

    #[test]
    fn ln_gamma_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(5.0), (24f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            ln_gamma(0.5),
            (std::f64::consts::PI.sqrt()).ln(),
            epsilon = 1e-12
        );
    }
}
