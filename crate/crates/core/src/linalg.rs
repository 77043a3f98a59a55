//! Small dense linear solves for the Newton systems.

use crate::scalar::Real;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot vanishes relative to the matrix scale.
pub(crate) fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    if a.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
        return None;
    }
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, &v| m.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::from_usize(n.max(1)).unwrap();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() <= tiny {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![0.0f64, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let x_true = [1.0f64, -2.0, 0.5];
        let b: Vec<f64> = a.iter().map(|r| r.iter().zip(&x_true).map(|(p, q)| p * q).sum()).collect();
        let x = solve_dense(a, b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_none() {
        let a = vec![vec![1.0f64, 2.0], vec![2.0, 4.0]];
        assert!(solve_dense(a, vec![1.0, 2.0]).is_none());
    }
}
