//! Small dense linear algebra for d×d problems: symmetric eigendecomposition
//! by cyclic Jacobi rotations, orthonormal frames, Cholesky.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// Square orthogonal matrix; row `i` is the direction `w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame(Array2<f64>);

impl OrthonormalFrame {
    /// Wraps `rows` after checking squareness and orthonormality to `1e-8`.
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() != rows.ncols() {
            return Err(Error::DimensionMismatch {
                expected: rows.nrows(),
                found: rows.ncols(),
            });
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let f = Self(rows);
        if f.orthonormality_error() > 1e-8 {
            return Err(Error::InvalidParameter(
                "frame rows are not orthonormal".into(),
            ));
        }
        Ok(f)
    }

    pub(crate) fn new_unchecked(rows: Array2<f64>) -> Self {
        Self(rows)
    }

    pub fn identity(d: usize) -> Self {
        Self(Array2::eye(d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.0
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    /// `W x`: coordinates of `x` along the frame directions.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.0
            .rows()
            .into_iter()
            .map(|w| w.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Wᵀ z`.
    pub fn unproject(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        for (i, zi) in z.iter().enumerate() {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += self.0[[i, j]] * zi;
            }
        }
        x
    }

    /// `max |W Wᵀ − I|` entrywise.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.0.dot(&self.0.t());
        let d = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                m = m.max((g[[i, j]] - target).abs());
            }
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(rows)?)
    }
}

impl Serialize for OrthonormalFrame {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrthonormalFrame {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Self::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut a = Array2::zeros((n, d));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.len(),
            });
        }
        for (j, v) in r.iter().enumerate() {
            a[[i, j]] = *v;
        }
    }
    Ok(a)
}

/// Real symmetric matrix. Constructors copy the upper triangle onto the lower,
/// so `A[i][j] == A[j][i]` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Array2<f64>);

impl SymMatrix {
    /// Builds from the upper triangle of `a`; the lower triangle is ignored.
    pub fn from_upper(a: Array2<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let mut a = a;
        let d = a.nrows();
        for i in 0..d {
            for j in 0..i {
                a[[i, j]] = a[[j, i]];
            }
        }
        Ok(Self(a))
    }

    /// Symmetrizes `(a + aᵀ)/2`.
    pub fn symmetrize(a: &Array2<f64>) -> Result<Self> {
        let s = (a + &a.t()) * 0.5;
        Self::from_upper(s)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self(Array2::from_diag(&Array1::from(diag.to_vec())))
    }

    pub fn identity(d: usize) -> Self {
        Self(Array2::eye(d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().sum()
    }

    /// `Wᵀ A W` for an orthogonal `W`.
    pub fn conjugate_by(&self, w: &OrthonormalFrame) -> SymMatrix {
        let m = w.matrix().t().dot(&self.0).dot(w.matrix());
        SymMatrix::symmetrize(&m).expect("square")
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Row `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: OrthonormalFrame,
    /// Smallest gap between adjacent eigenvalues (`+inf` when `d == 1`).
    pub eigengap: f64,
}

impl EigenDecomposition {
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues are sorted descending (stable, so ties keep their diagonal
/// order); each eigenvector's largest-magnitude component is made positive,
/// ties going to the lowest index.
pub fn symmetric_eigen(a: &SymMatrix) -> Result<EigenDecomposition> {
    let d = a.dim();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    if a.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut m = a.0.clone();
    let mut v: Array2<f64> = Array2::eye(d);
    let norm = a.frobenius();
    let tol = JACOBI_REL_TOL * norm;

    let off = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += m[[i, j]] * m[[i, j]];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&m) <= tol;
    let mut sweep = 0;
    while !converged && sweep < JACOBI_MAX_SWEEPS {
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
        sweep += 1;
        converged = off(&m) <= tol;
    }
    if !converged {
        return Err(Error::EigenNoConvergence { sweeps: sweep });
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut rows = Array2::zeros((d, d));
    for (r, &i) in order.iter().enumerate() {
        let col = v.column(i);
        let mut best = 0;
        for k in 1..d {
            if col[k].abs() > col[best].abs() {
                best = k;
            }
        }
        let sign = if col[best] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..d {
            rows[[r, k]] = sign * col[k];
        }
    }
    let eigengap = eigenvalues
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: OrthonormalFrame::new_unchecked(rows),
        eigengap,
    })
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &SymMatrix) -> Result<Array2<f64>> {
    let d = a.dim();
    let mut l = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let mut s = a.0[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::SingularCovariance);
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

pub fn log_det_spd(a: &SymMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * l.diag().iter().map(|v| v.ln()).sum::<f64>())
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn inverse_spd(a: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky(a)?;
    let d = a.dim();
    let mut inv = Array2::<f64>::zeros((d, d));
    for c in 0..d {
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..d {
                s -= l[[k, i]] * inv[[k, c]];
            }
            inv[[i, c]] = s / l[[i, i]];
        }
    }
    SymMatrix::symmetrize(&inv)
}

/// Spectral norm `‖A‖_op = sqrt(λ_max(AᵀA))`.
pub fn operator_norm(a: &Array2<f64>) -> Result<f64> {
    let ata = SymMatrix::symmetrize(&a.t().dot(a))?;
    let eig = symmetric_eigen(&ata)?;
    Ok(eig.lambda_max().max(0.0).sqrt())
}

/// Column means of a row-per-sample matrix.
pub fn column_means(x: &Array2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn random_sym(d: usize, rng: &mut RngState) -> SymMatrix {
        let a = Array2::from_shape_fn((d, d), |_| rng.normal());
        SymMatrix::symmetrize(&a).unwrap()
    }

    fn residual_ok(a: &SymMatrix, e: &EigenDecomposition) -> bool {
        let d = a.dim();
        (0..d).all(|i| {
            let v = e.eigenvectors.row(i);
            let av = a.matrix().dot(&v);
            let r = (&av - &(&v * e.eigenvalues[i]))
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            r <= 1e-8 * (1.0 + e.eigenvalues[i].abs())
        })
    }

    #[test]
    fn identity_spectrum() {
        let a = SymMatrix::identity(3);
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert!(residual_ok(&a, &e));
        assert_eq!(e.eigengap, 0.0);
    }

    #[test]
    fn diagonal_sorted_with_sign_convention() {
        let a = SymMatrix::from_diag(&[3.0, 6.0]);
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.eigenvalues, vec![6.0, 3.0]);
        assert_eq!(e.eigenvectors.row(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(e.eigenvectors.row(1).to_vec(), vec![1.0, 0.0]);
        assert_eq!(e.eigengap, 3.0);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = RngState::new(17);
        for d in [1, 2, 5, 12] {
            let a = random_sym(d, &mut rng);
            let e = symmetric_eigen(&a).unwrap();
            assert!(residual_ok(&a, &e));
            assert!(e.eigenvectors.orthonormality_error() < 1e-10);
            let v = e.eigenvectors.matrix();
            let lam = Array2::from_diag(&Array1::from(e.eigenvalues.clone()));
            let rec = v.t().dot(&lam).dot(v);
            let err = (&rec - a.matrix()).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(err <= 1e-9, "d={d} err={err}");
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn symmetric_storage_exact() {
        let mut rng = RngState::new(2);
        let a = random_sym(6, &mut rng);
        let m = a.matrix();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(m[[i, j]], m[[j, i]]);
            }
        }
    }

    #[test]
    fn cholesky_inverse_and_logdet() {
        let a = SymMatrix::from_upper(ndarray::array![[4.0, 2.0], [2.0, 3.0]]).unwrap();
        assert!((log_det_spd(&a).unwrap() - 8f64.ln()).abs() < 1e-14);
        let inv = inverse_spd(&a).unwrap();
        let p = a.matrix().dot(inv.matrix());
        assert!((p[[0, 0]] - 1.0).abs() < 1e-14 && p[[0, 1]].abs() < 1e-14);
        let sing = SymMatrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(cholesky(&sing), Err(Error::SingularCovariance)));
    }

    #[test]
    fn operator_norm_of_rotation_deviation() {
        let t: f64 = 0.1;
        let m = ndarray::array![[1.0 - t.cos(), t.sin()], [-t.sin(), 1.0 - t.cos()]];
        let n = operator_norm(&m).unwrap();
        assert!((n - 2.0 * (t / 2.0).sin()).abs() < 1e-12);
    }
}
