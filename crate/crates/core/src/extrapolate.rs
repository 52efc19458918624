//! One-sided polynomial extrapolation to an endpoint.

/// Fits the interpolating polynomial through `(xs[i], ys[i])` and returns its
/// derivatives of order `0..xs.len()` at `x = 0`.
pub fn derivatives_at_zero(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert_eq!(n, ys.len());
    // Vandermonde system, partial pivoting.
    let mut a: Vec<Vec<f64>> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let mut row: Vec<f64> = (0..n).map(|j| x.powi(j as i32)).collect();
            row.push(y);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut coef = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * coef[c]).sum();
        coef[r] = (a[r][n] - s) / a[r][r];
    }
    let mut fact = 1.0;
    coef.iter()
        .enumerate()
        .map(|(k, &c)| {
            if k > 0 {
                fact *= k as f64;
            }
            c * fact
        })
        .collect()
}

/// Derivatives at 0 of `f` from samples at `h, 2h, ..., points·h`.
pub fn one_sided_derivatives<F: Fn(f64) -> f64>(f: F, h: f64, points: usize) -> Vec<f64> {
    let xs: Vec<f64> = (1..=points).map(|i| i as f64 * h).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    derivatives_at_zero(&xs, &ys)
}
