//! Dense least squares by Householder QR.

use crate::error::{Error, Result};

/// Solves `min |A x − b|₂` for a row-major `m × n` matrix with `m ≥ n`.
pub fn lstsq(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    if m < n || n == 0 || b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!("least squares needs a consistent {m}x{n} system with m >= n")));
    }
    // Column-major copy.
    let mut q: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    let mut rhs = b.to_vec();
    let scale = q.iter().flatten().fold(0f64, |s, x| s.max(x.abs()));
    for k in 0..n {
        let norm = q[k][k..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::InvalidArgument(format!("rank-deficient least-squares system (column {k})")));
        }
        let alpha = if q[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = q[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in q.iter_mut().skip(k) {
                let d: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= d * vi;
                }
            }
            let d: f64 = v.iter().zip(&rhs[k..]).map(|(a, b)| a * b).sum::<f64>() * 2.0 / vnorm2;
            for (c, vi) in rhs[k..].iter_mut().zip(&v) {
                *c -= d * vi;
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| q[j][k] * x[j]).sum();
        x[k] = (rhs[k] - s) / q[k][k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_square_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = lstsq(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_line_fit() {
        let a: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let b: Vec<f64> = (0..5).map(|i| 1.0 + 2.0 * i as f64).collect();
        let x = lstsq(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(lstsq(&a, &[1.0, 2.0, 3.0]).is_err());
    }
}
