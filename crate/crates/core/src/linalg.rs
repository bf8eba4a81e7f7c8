//! Small dense linear algebra: complex LU solves, determinants, and a
//! Jacobi eigen-solver used for null vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `AᴴA`
    pub fn gram(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let s: Complex64 = (0..n).map(|k| self.get(k, i).conj() * self.get(k, j)).sum();
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Determinant by Laplace expansion along the first row.
    pub fn det_cofactor(&self) -> Complex64 {
        fn rec(m: &[Complex64], n: usize) -> Complex64 {
            match n {
                0 => Complex64::new(1.0, 0.0),
                1 => m[0],
                2 => m[0] * m[3] - m[1] * m[2],
                _ => {
                    let mut acc = ZERO;
                    for col in 0..n {
                        let minor: Vec<Complex64> = (1..n)
                            .flat_map(|r| (0..n).filter(move |&c| c != col).map(move |c| (r, c)))
                            .map(|(r, c)| m[r * n + c])
                            .collect();
                        let term = m[col] * rec(&minor, n - 1);
                        if col % 2 == 0 {
                            acc += term;
                        } else {
                            acc -= term;
                        }
                    }
                    acc
                }
            }
        }
        rec(&self.data, self.n)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det_lu(&self) -> Complex64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&x, &y| a[x * n + k].norm().partial_cmp(&a[y * n + k].norm()).unwrap())
                .unwrap();
            if a[piv * n + k] == ZERO {
                return ZERO;
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                det = -det;
            }
            let d = a[k * n + k];
            det *= d;
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                for c in k..n {
                    let v = a[k * n + c];
                    a[r * n + c] -= f * v;
                }
            }
        }
        det
    }

    /// Solve `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = self.max_abs();
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&p, &q| a[p * n + k].norm().partial_cmp(&a[q * n + k].norm()).unwrap())
                .unwrap();
            if a[piv * n + k].norm() <= 1e-300_f64.max(1e-15 * scale * f64::EPSILON) {
                return Err(Error::Undefined("singular linear system".into()));
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                x.swap(k, piv);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                if f == ZERO {
                    continue;
                }
                for c in k..n {
                    let v = a[k * n + c];
                    a[r * n + c] -= f * v;
                }
                let xk = x[k];
                x[r] -= f * xk;
            }
        }
        for k in (0..n).rev() {
            let s: Complex64 = (k + 1..n).map(|c| a[k * n + c] * x[c]).sum();
            x[k] = (x[k] - s) / a[k * n + k];
        }
        Ok(x)
    }
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi sweeps.
///
/// Returns eigenvalues ascending with matching column eigenvectors
/// (`vectors[i][k]` is component `i` of eigenvector `k`).
pub fn symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let norm: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm || norm == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
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
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[x][x].partial_cmp(&m[y][y]).unwrap());
    let values = order.iter().map(|&k| m[k][k]).collect();
    let vectors = (0..n).map(|i| order.iter().map(|&k| v[i][k]).collect()).collect();
    (values, vectors)
}

/// Approximate null vector of `a` from the smallest right singular vector.
#[derive(Debug, Clone)]
pub struct NullVector {
    pub vector: Vec<Complex64>,
    /// Singular values, ascending.
    pub singular_values: Vec<f64>,
}

impl NullVector {
    /// True when the two smallest singular values agree within `rel` of the largest.
    pub fn is_degenerate(&self, rel: f64) -> bool {
        let s = &self.singular_values;
        s.len() >= 2 && (s[1] - s[0]) <= rel * s[s.len() - 1]
    }
}

/// Null vector via the eigenvectors of `AᴴA`, using the real 2n×2n embedding
/// `[[Re, −Im], [Im, Re]]` of the Hermitian Gram matrix.
pub fn null_vector(a: &CMatrix) -> NullVector {
    let n = a.dim();
    let h = a.gram();
    let mut big = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = h.get(i, j);
            big[i][j] = z.re;
            big[i + n][j + n] = z.re;
            big[i][j + n] = -z.im;
            big[i + n][j] = z.im;
        }
    }
    let (vals, vecs) = symmetric_eigen(&big);
    // every eigenvalue of the embedding appears twice
    let singular_values: Vec<f64> = (0..n).map(|k| vals[2 * k].max(0.0).sqrt()).collect();
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(vecs[i][0], vecs[i + n][0])).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    // fix the global phase on the largest component for reproducibility
    let big_idx = (0..n)
        .max_by(|&x, &y| v[x].norm().partial_cmp(&v[y].norm()).unwrap())
        .unwrap_or(0);
    let phase = if v[big_idx] == ZERO {
        Complex64::new(1.0, 0.0)
    } else {
        v[big_idx].conj() / v[big_idx].norm()
    };
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
    NullVector {
        vector: v,
        singular_values,
    }
}
