//! Symmetric eigendecomposition, thin SVD and the Moore–Penrose pseudoinverse.
//!
//! Both decompositions are Jacobi methods: cyclic two-sided rotations for
//! symmetric matrices, one-sided (Hestenes) rotations on columns for the SVD.
//! Signs of the returned vectors are whatever the rotations produce; callers
//! that need a canonical form apply it themselves.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

const MAX_SWEEPS: usize = 50;
const EIGEN_TOL: f64 = 1e-12;
/// Singular values at or below this fraction of σ₁ are treated as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Consecutive singular values closer than this fraction of σ₁ are flagged.
pub const DEGENERACY_TOL: f64 = 1e-6;
const ORTHOGONALITY_TOL: f64 = 1e-15;

/// `A = vectors · diag(values) · vectorsᵀ`, values descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub vectors: Matrix,
    pub values: Vec<f64>,
    pub sweeps: usize,
    /// Off-diagonal Frobenius norm before the first sweep and after each sweep.
    pub off_diagonal_history: Vec<f64>,
}

/// `A = u · diag(sigma) · vᵀ` with `k = min(rows, cols)` triplets.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    /// Number of singular values above `RANK_TOL · σ₁`. Columns of `u` past
    /// this index are an orthonormal completion, not singular vectors.
    pub rank: usize,
    /// Some pair of consecutive singular values is closer than
    /// `DEGENERACY_TOL · σ₁`, so the matching singular vectors are not
    /// individually identified.
    pub degenerate: bool,
}

impl ThinSvd {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.sigma.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let us = Matrix::from_fn(self.u.rows(), self.sigma.len(), |i, j| {
            self.u[(i, j)] * self.sigma[j]
        });
        us.matmul_tr(&self.v).expect("shapes agree by construction")
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi.
///
/// The input is symmetrized first; asymmetry above `1e-8 · ‖A‖_F` is rejected.
/// Sweeps stop once every off-diagonal entry is below `1e-12 · ‖A‖_F`, or
/// after 50 sweeps.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "sym_eigen",
            left: a.shape(),
            right: (a.cols(), a.rows()),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Err(Error::Empty("sym_eigen"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("sym_eigen input"));
    }
    let norm = a.frobenius_norm();
    let at = a.transpose();
    let asym = a.sub(&at)?.frobenius_norm();
    if asym > 1e-8 * norm {
        return Err(Error::NotSymmetric(asym / norm));
    }
    let mut w = a.add(&at)?.scale(0.5);
    // Rows of `vt` are the eigenvectors, so rotations touch contiguous memory.
    let mut vt = Matrix::identity(n);
    let threshold = EIGEN_TOL * norm;
    let skip = 1e-3 * threshold;

    let mut history = vec![off_diagonal_norm(&w)];
    let mut sweeps = 0;
    let mut row_p = vec![0.0; n];
    let mut row_q = vec![0.0; n];
    while sweeps < MAX_SWEEPS {
        let largest = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max(w[(i, j)].abs()));
        if largest < threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w[(p, q)];
                if apq.abs() <= skip {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                row_p.copy_from_slice(w.row(p));
                row_q.copy_from_slice(w.row(q));
                for k in 0..n {
                    let (xp, xq) = (row_p[k], row_q[k]);
                    row_p[k] = c * xp - s * xq;
                    row_q[k] = s * xp + c * xq;
                }
                row_p[p] = app - t * apq;
                row_q[q] = aqq + t * apq;
                row_p[q] = 0.0;
                row_q[p] = 0.0;
                w.row_mut(p).copy_from_slice(&row_p);
                w.row_mut(q).copy_from_slice(&row_q);
                for k in 0..n {
                    w[(k, p)] = row_p[k];
                    w[(k, q)] = row_q[k];
                }

                for k in 0..n {
                    let (vp, vq) = (vt[(p, k)], vt[(q, k)]);
                    vt[(p, k)] = c * vp - s * vq;
                    vt[(q, k)] = s * vp + c * vq;
                }
            }
        }
        sweeps += 1;
        history.push(off_diagonal_norm(&w));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].total_cmp(&w[(i, i)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| vt[(order[j], i)]);
    Ok(SymEigen {
        vectors,
        values,
        sweeps,
        off_diagonal_history: history,
    })
}

/// Thin SVD by one-sided Jacobi.
///
/// Tall inputs are orthogonalized column by column; wide inputs are handled by
/// decomposing the transpose and swapping the factors. Columns of `u` for zero
/// singular values are filled with an orthonormal completion and reported
/// through [`ThinSvd::rank`].
pub fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    if a.is_empty() {
        return Err(Error::Empty("thin_svd"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("thin_svd input"));
    }
    if a.rows() >= a.cols() {
        Ok(tall_svd(a))
    } else {
        let t = tall_svd(&a.transpose());
        Ok(ThinSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
            rank: t.rank,
            degenerate: t.degenerate,
        })
    }
}

fn tall_svd(a: &Matrix) -> ThinSvd {
    let (n, m) = a.shape();
    // Row j of `cols` is column j of A.
    let mut cols = a.transpose();
    let mut vt = Matrix::identity(m);

    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha = frobenius_row(&cols, p);
                let beta = frobenius_row(&cols, q);
                let gamma = dot(cols.row(p), cols.row(q));
                if gamma == 0.0 || gamma.abs() <= ORTHOGONALITY_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut cols, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..m).map(|j| frobenius_row(&cols, j).sqrt()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let s1 = sigma[0];
    let rank = sigma.iter().take_while(|&&s| s > RANK_TOL * s1 && s > 0.0).count();

    let mut u_cols: Vec<Vec<f64>> = order[..rank]
        .iter()
        .map(|&j| cols.row(j).iter().map(|x| x / norms[j]).collect())
        .collect();
    complete_orthonormal(&mut u_cols, n, m);

    let u = Matrix::from_columns(&u_cols).expect("uniform column length");
    let v = Matrix::from_fn(m, m, |i, j| vt[(order[j], i)]);
    let degenerate = sigma
        .windows(2)
        .any(|w| (w[0] - w[1]).abs() < DEGENERACY_TOL * s1);
    ThinSvd {
        u,
        sigma,
        v,
        rank,
        degenerate,
    }
}

fn frobenius_row(a: &Matrix, i: usize) -> f64 {
    let r = a.row(i);
    dot(r, r)
}

fn rotate_rows(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..a.cols() {
        let (xp, xq) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = c * xp - s * xq;
        a[(q, k)] = s * xp + c * xq;
    }
}

/// Extends `basis` (orthonormal vectors of length `n`) to `target` vectors by
/// orthogonalizing standard basis vectors against it.
pub(crate) fn complete_orthonormal(basis: &mut Vec<Vec<f64>>, n: usize, target: usize) {
    let mut k = 0;
    while basis.len() < target && k < n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        k += 1;
        // Two passes of Gram–Schmidt keep the completion orthogonal to round-off.
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = dot(&e, b);
                for (x, y) in e.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let len = dot(&e, &e).sqrt();
        if len > 1e-6 {
            basis.push(e.into_iter().map(|x| x / len).collect());
        }
    }
}

/// `A† = V · Σ† · Uᵀ`, inverting only singular values above `RANK_TOL · σ₁`.
pub fn pseudoinverse(a: &Matrix) -> Result<Matrix> {
    let svd = thin_svd(a)?;
    let inv: Vec<f64> = svd
        .sigma
        .iter()
        .enumerate()
        .map(|(j, &s)| if j < svd.rank { 1.0 / s } else { 0.0 })
        .collect();
    let v_scaled = Matrix::from_fn(svd.v.rows(), inv.len(), |i, j| svd.v[(i, j)] * inv[j]);
    v_scaled.matmul_tr(&svd.u)
}

/// `‖AᵀA − I‖_F` for the columns of `a`.
pub fn orthonormality_error(a: &Matrix) -> f64 {
    let g = a.tr_matmul(a).expect("gram matrix");
    g.sub(&Matrix::identity(a.cols())).expect("square").frobenius_norm()
}
