use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// Off-diagonal tolerance for the Jacobi sweeps, relative to the column norms.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 80;

/// Default number of power iterations in [`svd_randomized`].
pub const DEFAULT_POWER_ITERS: usize = 1;

/// Truncated singular value decomposition `x ≈ u · diag(sigma) · vt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// Left singular vectors as columns.
    pub u: Matrix,
    /// Singular values, descending.
    pub sigma: Vec<f64>,
    /// Right singular vectors as rows.
    pub vt: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let us = self
            .u
            .transpose()
            .scale_rows(&self.sigma)
            .expect("sigma length matches u columns");
        us.t_matmul(&self.vt).expect("consistent svd shapes")
    }
}

fn check_input(x: &Matrix, k: usize) -> Result<()> {
    if x.is_empty() {
        return Err(Error::invalid(format!(
            "svd of an empty {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    let p = x.rows().min(x.cols());
    if k == 0 || k > p {
        return Err(Error::invalid(format!(
            "rank {k} outside 1..={p} for a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

/// Top-`k` singular triplets of `x` via one-sided Jacobi.
///
/// Output is deterministic: values sort descending (ties keep their Jacobi
/// order) and each row of `vt` is signed so that its first nonzero entry is
/// positive.
pub fn svd_truncated(x: &Matrix, k: usize) -> Result<SvdResult> {
    check_input(x, k)?;
    let mut full = jacobi_svd(x);
    truncate(&mut full, k);
    Ok(full)
}

fn truncate(svd: &mut SvdResult, k: usize) {
    if svd.sigma.len() > k {
        svd.sigma.truncate(k);
        svd.vt = svd.vt.row_range(0, k);
        let u = &svd.u;
        svd.u = Matrix::from_fn(u.rows(), k, |i, j| u[(i, j)]);
    }
}

/// Thin SVD with `p = min(rows, cols)` triplets.
fn jacobi_svd(x: &Matrix) -> SvdResult {
    // Work on a tall matrix; a wide input is handled through its transpose.
    let wide = x.rows() < x.cols();
    let tall = if wide { x.transpose() } else { x.clone() };
    let (m, n) = tall.shape();

    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| tall.column(j)).collect();
    let mut rot: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1f64.hypot(zeta));
                let c = 1.0 / 1f64.hypot(t);
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut rot, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma_raw: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep column order
    order.sort_by(|&a, &b| sigma_raw[b].total_cmp(&sigma_raw[a]));

    let sigma: Vec<f64> = order.iter().map(|&j| sigma_raw[j]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let negligible = smax * (m.max(n) as f64) * f64::EPSILON;

    // Normalized columns give the left vectors of the tall problem; columns
    // with negligible norm are replaced by an orthonormal completion.
    let mut left: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[slot] > negligible && sigma[slot] > 0.0 {
            left.push(cols[j].iter().map(|v| v / sigma[slot]).collect());
        } else {
            left.push(vec![0.0; m]);
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut left, &pending, m);
    let right: Vec<Vec<f64>> = order.iter().map(|&j| rot[j].clone()).collect();

    // tall = L Σ Rᵀ; for a wide input x = R Σ Lᵀ.
    let (u_cols, v_rows) = if wide { (right, left) } else { (left, right) };
    let mut u = Matrix::from_fn(u_cols[0].len(), n, |i, j| u_cols[j][i]);
    let mut vt = Matrix::from_rows(&v_rows).expect("rows share a length");
    apply_sign_convention(&mut u, &mut vt);
    SvdResult { u, sigma, vt }
}

fn rotate_pair(vecs: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = vecs.split_at_mut(q);
    let (vp, vq) = (&mut head[p], &mut tail[0]);
    for (a, b) in vp.iter_mut().zip(vq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Fills the vectors at `pending` slots with unit vectors orthogonal to every
/// other vector in `vecs`, drawing candidates from the standard basis.
fn complete_orthonormal(vecs: &mut [Vec<f64>], pending: &[usize], dim: usize) {
    let mut candidate = 0;
    for &slot in pending {
        loop {
            assert!(candidate < dim, "cannot complete an orthonormal basis");
            let mut v = vec![0.0; dim];
            v[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (i, other) in vecs.iter().enumerate() {
                    if i == slot || (pending.contains(&i) && norm(other) == 0.0) {
                        continue;
                    }
                    let proj = dot(&v, other);
                    v.iter_mut().zip(other).for_each(|(a, b)| *a -= proj * b);
                }
            }
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|a| *a /= nv);
                vecs[slot] = v;
                break;
            }
        }
    }
}

fn apply_sign_convention(u: &mut Matrix, vt: &mut Matrix) {
    for j in 0..vt.rows() {
        let lead = vt.row(j).iter().copied().find(|v| v.abs() > 1e-12);
        if lead.is_some_and(|v| v < 0.0) {
            vt.row_mut(j).iter_mut().for_each(|v| *v = -*v);
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
        }
    }
}

/// Orthonormalizes the columns of a tall matrix with twice-iterated modified
/// Gram-Schmidt. Rank-deficient columns are replaced so the result always has
/// orthonormal columns.
pub fn orthonormal_columns(y: &Matrix) -> Matrix {
    let (m, l) = y.shape();
    assert!(l <= m, "cannot orthonormalize {l} columns in dimension {m}");
    let mut cols: Vec<Vec<f64>> = (0..l).map(|j| y.column(j)).collect();
    let mut pending = Vec::new();
    for j in 0..l {
        let before = norm(&cols[j]);
        for _ in 0..2 {
            for i in 0..j {
                if pending.contains(&i) {
                    continue;
                }
                let proj = dot(&cols[j], &cols[i]);
                let (head, tail) = cols.split_at_mut(j);
                tail[0]
                    .iter_mut()
                    .zip(&head[i])
                    .for_each(|(a, b)| *a -= proj * b);
            }
        }
        let after = norm(&cols[j]);
        if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 0.0 {
            cols[j].iter_mut().for_each(|a| *a /= after);
        } else {
            cols[j].iter_mut().for_each(|a| *a = 0.0);
            pending.push(j);
        }
    }
    complete_orthonormal(&mut cols, &pending, m);
    Matrix::from_fn(m, l, |i, j| cols[j][i])
}

pub(crate) fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Randomized range-finder SVD with one power iteration.
pub fn svd_randomized(x: &Matrix, k: usize, oversample: usize, seed: u64) -> Result<SvdResult> {
    svd_randomized_with(x, k, oversample, DEFAULT_POWER_ITERS, seed)
}

pub fn svd_randomized_with(
    x: &Matrix,
    k: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<SvdResult> {
    check_input(x, k)?;
    let l = k + oversample;
    if l > x.rows().min(x.cols()) {
        return Err(Error::invalid(format!(
            "rank {k} + oversample {oversample} exceeds min dimension of {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = gaussian_matrix(x.cols(), l, &mut rng);
    let mut q = orthonormal_columns(&x.matmul(&omega)?);
    for _ in 0..power_iters {
        let z = orthonormal_columns(&x.t_matmul(&q)?);
        q = orthonormal_columns(&x.matmul(&z)?);
    }
    // x ≈ q qᵀ x; factor the small l×n projection exactly.
    let projected = q.t_matmul(x)?;
    let mut small = jacobi_svd(&projected);
    truncate(&mut small, k);
    let u = q.matmul(&small.u)?;
    Ok(SvdResult {
        u,
        sigma: small.sigma,
        vt: small.vt,
    })
}

/// Absolute cosine similarity between matching rows of two component
/// matrices.
pub fn component_cosine_similarity(prev: &Matrix, new: &Matrix) -> Result<Vec<f64>> {
    if prev.shape() != new.shape() {
        return Err(Error::dims(format!(
            "component sets {}x{} vs {}x{}",
            prev.rows(),
            prev.cols(),
            new.rows(),
            new.cols()
        )));
    }
    prev.row_iter()
        .zip(new.row_iter())
        .enumerate()
        .map(|(j, (a, b))| {
            let (na, nb) = (norm(a), norm(b));
            if na == 0.0 || nb == 0.0 {
                return Err(Error::invalid(format!("component {j} has zero norm")));
            }
            Ok((dot(a, b).abs() / (na * nb)).min(1.0))
        })
        .collect()
}

/// Haar-distributed random orthogonal `d×d` matrix.
pub fn random_orthogonal(d: usize, seed: u64) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::invalid("random_orthogonal needs d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Gram-Schmidt yields the QR factor with a positive diagonal in R, which
    // makes Q Haar-distributed.
    Ok(orthonormal_columns(&gaussian_matrix(d, d, &mut rng)))
}

/// Largest principal angle (radians) between the row spaces of `a` and `b`.
/// Both must have orthonormal rows; `a` should not have more rows than `b`.
pub fn max_principal_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(Error::dims("principal angle between different ambient dimensions"));
    }
    // sines of the principal angles are the singular values of a(I − bᵀb)
    let coeffs = a.matmul_t(b)?;
    let residual = a.sub(&coeffs.matmul(b)?)?;
    let k = residual.rows().min(residual.cols());
    let top = svd_truncated(&residual, k)?.sigma[0];
    Ok(top.min(1.0).asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn orthonormality_error(rows_of: &Matrix) -> f64 {
        rows_of
            .matmul_t(rows_of)
            .unwrap()
            .max_abs_diff(&Matrix::identity(rows_of.rows()))
    }

    #[test]
    fn identity_case() {
        let svd = svd_truncated(&Matrix::identity(2), 2).unwrap();
        assert_eq!(svd.sigma, vec![1.0, 1.0]);
        assert_eq!(svd.vt, Matrix::identity(2));
    }

    #[test]
    fn diagonal_case() {
        let svd = svd_truncated(&Matrix::diag(&[3.0, 2.0]), 2).unwrap();
        assert_eq!(svd.sigma, vec![3.0, 2.0]);
        assert_eq!(svd.vt, Matrix::identity(2));
        let swapped = svd_truncated(&Matrix::diag(&[2.0, 3.0]), 2).unwrap();
        assert_eq!(swapped.sigma, vec![3.0, 2.0]);
        assert_eq!(swapped.vt.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn random_reconstruction() {
        for (r, c) in [(5, 3), (3, 5), (7, 7), (1, 4), (4, 1)] {
            let x = random_matrix(r, c, (r * 10 + c) as u64);
            let svd = svd_truncated(&x, r.min(c)).unwrap();
            let err = svd.reconstruct().sub(&x).unwrap().frobenius_norm();
            assert!(err < 1e-10, "{r}x{c}: {err}");
            assert!(orthonormality_error(&svd.vt) < 1e-8);
            assert!(orthonormality_error(&svd.u.transpose()) < 1e-8);
            assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_left_vectors_are_completed() {
        // rank 1, but ask for all three triplets
        let x = Matrix::from_fn(4, 3, |i, j| (i + 1) as f64 * (j + 1) as f64);
        let svd = svd_truncated(&x, 3).unwrap();
        assert!(svd.sigma[1] < 1e-12);
        assert!(orthonormality_error(&svd.u.transpose()) < 1e-8);
        assert!(orthonormality_error(&svd.vt) < 1e-8);
        let err = svd.reconstruct().sub(&x).unwrap().frobenius_norm();
        assert!(err < 1e-10 * x.frobenius_norm());
    }

    #[test]
    fn zero_matrix() {
        let svd = svd_truncated(&Matrix::zeros(3, 2), 2).unwrap();
        assert_eq!(svd.sigma, vec![0.0, 0.0]);
        assert!(orthonormality_error(&svd.vt) < 1e-12);
    }

    #[test]
    fn sign_convention_holds() {
        let x = random_matrix(6, 4, 3);
        let svd = svd_truncated(&x, 4).unwrap();
        for row in svd.vt.row_iter() {
            let lead = row.iter().find(|v| v.abs() > 1e-12).unwrap();
            assert!(*lead > 0.0);
        }
        // flipping the input does not change the factor signs of vt
        let neg = svd_truncated(&x.scaled(-1.0), 4).unwrap();
        assert!(neg.vt.max_abs_diff(&svd.vt) < 1e-10);
    }

    #[test]
    fn rejects_bad_rank() {
        let x = random_matrix(3, 2, 0);
        assert!(svd_truncated(&x, 0).is_err());
        assert!(svd_truncated(&x, 3).is_err());
        assert!(svd_truncated(&Matrix::zeros(0, 2), 1).is_err());
    }

    #[test]
    fn randomized_diagonal() {
        let mut x = Matrix::zeros(10, 12);
        x[(0, 0)] = 3.0;
        x[(1, 1)] = 2.0;
        let svd = svd_randomized(&x, 2, 2, 7).unwrap();
        assert!((svd.sigma[0] - 3.0).abs() < 1e-12);
        assert!((svd.sigma[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn randomized_full_rank_square_is_exact() {
        let x = random_matrix(8, 8, 11);
        let exact = svd_truncated(&x, 8).unwrap();
        let approx = svd_randomized(&x, 8, 0, 5).unwrap();
        for (a, b) in approx.sigma.iter().zip(&exact.sigma) {
            assert!((a - b).abs() <= 1e-6 * b);
        }
    }

    #[test]
    fn randomized_rejects_oversized_sketch() {
        let x = random_matrix(4, 6, 0);
        assert!(svd_randomized(&x, 3, 2, 0).is_err());
    }

    #[test]
    fn cosine_similarity_cases() {
        let v = random_matrix(3, 5, 9);
        assert!(component_cosine_similarity(&v, &v)
            .unwrap()
            .iter()
            .all(|&c| (c - 1.0).abs() < 1e-15));
        assert!(component_cosine_similarity(&v, &v.scaled(-1.0))
            .unwrap()
            .iter()
            .all(|&c| (c - 1.0).abs() < 1e-15));
        let e1 = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let e2 = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(component_cosine_similarity(&e1, &e2).unwrap(), vec![0.0]);
        assert!(component_cosine_similarity(&e1, &Matrix::zeros(1, 2)).is_err());
        assert!(component_cosine_similarity(&e1, &v).is_err());
    }

    #[test]
    fn random_orthogonal_cases() {
        let q1 = random_orthogonal(1, 3).unwrap();
        assert_eq!(q1.as_slice()[0].abs(), 1.0);
        let q = random_orthogonal(4, 42).unwrap();
        assert!(q.t_matmul(&q).unwrap().max_abs_diff(&Matrix::identity(4)) < 1e-10);
        assert_eq!(q, random_orthogonal(4, 42).unwrap());
        assert!(random_orthogonal(0, 1).is_err());
    }

    #[test]
    fn principal_angle_of_equal_spans_is_zero() {
        let q = random_orthogonal(5, 1).unwrap();
        let a = q.row_range(0, 2);
        // same span, different basis
        let mix = Matrix::from_rows(&[vec![0.6, 0.8], vec![-0.8, 0.6]]).unwrap();
        let b = mix.matmul(&a).unwrap();
        assert!(max_principal_angle(&a, &b).unwrap() < 1e-7);
        let c = q.row_range(2, 4);
        assert!((max_principal_angle(&a, &c).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    }
}
