//! Symmetric eigensolvers for 2×2 and 3×3 matrices.

/// Eigenvalues ascending with unit eigenvectors as columns of `vectors`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen<const N: usize> {
    pub values: [f64; N],
    pub vectors: [[f64; N]; N],
}

impl<const N: usize> SymEigen<N> {
    pub fn vector(&self, k: usize) -> [f64; N] {
        let mut v = [0.0; N];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = self.vectors[i][k];
        }
        v
    }
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
pub fn sym_eigen<const N: usize>(m: &[[f64; N]; N]) -> SymEigen<N> {
    let mut a = *m;
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..N).flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off.sqrt() <= 1e-300_f64.max(1e-17 * scale) {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = std::array::from_fn(|k| a[order[k]][order[k]]);
    let mut vectors = [[0.0; N]; N];
    for (k, &o) in order.iter().enumerate() {
        for i in 0..N {
            vectors[i][k] = v[i][o];
        }
    }
    SymEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let e = sym_eigen(&[[3.0, 0.0], [0.0, 1.0]]);
        assert_eq!(e.values, [1.0, 3.0]);
        assert_eq!(e.vector(0), [0.0, 1.0]);
    }

    #[test]
    fn reconstructs_matrix() {
        let m = [[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, 3.0]];
        let e = sym_eigen(&m);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| e.vectors[i][k] * e.values[k] * e.vectors[j][k]).sum();
                assert!((r - m[i][j]).abs() < 1e-13);
            }
        }
        assert!(e.values[0] <= e.values[1] && e.values[1] <= e.values[2]);
        let tr: f64 = e.values.iter().sum();
        assert!((tr - 9.0).abs() < 1e-13);
    }
}
