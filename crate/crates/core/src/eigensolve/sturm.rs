//! Bisection on Sturm sequence counts for symmetric tridiagonal matrices.

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal
/// matrix with diagonal `diag` and off-diagonal `off`.
pub fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] / q };
        q = diag[i] - x - coupling;
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues in `[lo, hi)`, ascending, each to about machine precision.
pub fn eigenvalues_in(diag: &[f64], off: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let first = count_below(diag, off, lo);
    let last = count_below(diag, off, hi);
    (first..last)
        .map(|k| {
            // eigenvalue k (0-based) lies in [lo, hi)
            let (mut a, mut b) = (lo, hi);
            loop {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b || b - a <= 2.0 * f64::EPSILON * a.abs().max(b.abs()) {
                    break mid;
                }
                if count_below(diag, off, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
        })
        .collect()
}
