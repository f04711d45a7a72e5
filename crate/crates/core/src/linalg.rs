//! Tiny dense linear-algebra helpers shared by the fitting and
//! multilateration code. Systems here are at most a handful of unknowns
//! (polynomial orders, 2-D position updates), so plain Gaussian elimination
//! with partial pivoting is both sufficient and dependency-free.

/// Solves `a * x = b` in place for a small square system.
///
/// Returns `None` when the matrix is singular to working precision, which
/// callers surface as rank-deficiency or degenerate-geometry errors.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = a.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), n);

    for col in 0..n {
        // Partial pivot: largest magnitude entry on or below the diagonal.
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-12 * scale_of(&a) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);

        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for col in (row + 1)..n {
            sum -= a[row][col] * x[col];
        }
        x[row] = sum / a[row][row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Magnitude scale of a matrix, used to make the singularity threshold
/// relative rather than absolute.
fn scale_of(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1e-300)
}
