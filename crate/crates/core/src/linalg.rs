//! Small dense matrices for frames, Newton steps, and least squares.
//!
//! Everything here targets tiny systems (dimension at most a few dozen), so
//! plain row-major storage with partial-pivot elimination and Householder
//! reflections is both simple and accurate; no external solver is worth the
//! dependency at these sizes.

use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("matrix needs at least one row"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::domain("ragged rows in matrix constructor"));
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `A^T v` without forming the transpose.
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..self.cols {
                out[j] += row[j] * v[i];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn frobenius_distance(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Determinant by LU with partial pivoting; meant for small square
    /// matrices (frames, Jacobians).
    pub fn det(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            det *= a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / a[col * n + col];
                for j in col..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
            }
        }
        det
    }

    /// Solve `A x = rhs` for square `A` by partial-pivot elimination.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(rhs.len(), self.rows);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            let pval = a[piv * n + col];
            if pval.abs() < 1e-300 {
                return Err(Error::conditioning(format!(
                    "singular {n}x{n} system in dense solve (pivot {pval:.2e})"
                )));
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                b.swap(col, piv);
            }
            for r in col + 1..n {
                let factor = a[r * n + col] / a[col * n + col];
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
                b[r] -= factor * b[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = b[col];
            for j in col + 1..n {
                s -= a[col * n + j] * b[j];
            }
            b[col] = s / a[col * n + col];
        }
        Ok(b)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Least squares `min |A x - b|` by Householder QR; requires
/// `rows >= cols` and full column rank.
pub fn lstsq(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(b.len(), a.rows);
    let (m, n) = (a.rows, a.cols);
    if m < n {
        return Err(Error::domain(format!(
            "least squares needs rows >= cols, got {m} x {n}"
        )));
    }
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        // Householder vector for column col below the diagonal.
        let mut norm = 0.0;
        for i in col..m {
            norm += r[(i, col)] * r[(i, col)];
        }
        let norm = norm.sqrt();
        if norm < 1e-300 {
            return Err(Error::conditioning(format!(
                "rank deficiency at column {col} in least squares"
            )));
        }
        let alpha = if r[(col, col)] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; m - col];
        v[0] = r[(col, col)] - alpha;
        for i in col + 1..m {
            v[i - col] = r[(i, col)];
        }
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in col..n {
                let mut dot = 0.0;
                for i in col..m {
                    dot += v[i - col] * r[(i, j)];
                }
                let scale = 2.0 * dot / vnorm2;
                for i in col..m {
                    r[(i, j)] -= scale * v[i - col];
                }
            }
            let mut dot = 0.0;
            for i in col..m {
                dot += v[i - col] * rhs[i];
            }
            let scale = 2.0 * dot / vnorm2;
            for i in col..m {
                rhs[i] -= scale * v[i - col];
            }
        }
        r[(col, col)] = alpha;
    }
    // Back substitution on the upper-triangular n x n block.
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = rhs[col];
        for j in col + 1..n {
            s -= r[(col, j)] * x[j];
        }
        if r[(col, col)].abs() < 1e-300 {
            return Err(Error::conditioning("zero diagonal in QR back substitution"));
        }
        x[col] = s / r[(col, col)];
    }
    Ok(x)
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
