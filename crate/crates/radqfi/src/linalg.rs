//! Dense complex linear algebra helpers shared across the crate.
//!
//! Operators are stored as `Array2<C64>`. Vectorization is row-major
//! throughout: `vec(X)[i*D + j] = X[i, j]`, so a map `X -> A X B†` has the
//! matrix `A ⊗ conj(B)` and `<<A|B>> = Tr[A†B] = vec(A)† vec(B)`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Inverse, OperationNorm, Solve, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type Mat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn eye(n: usize) -> Mat {
    Array2::from_diag_elem(n, ONE)
}

pub fn zeros(r: usize, c: usize) -> Mat {
    Array2::zeros((r, c))
}

/// Conjugate transpose.
pub fn dagger(a: &Mat) -> Mat {
    a.t().mapv(|z| z.conj())
}

pub fn conj(a: &Mat) -> Mat {
    a.mapv(|z| z.conj())
}

/// Row-major vectorization |A>>.
pub fn vec_op(a: &Mat) -> CVec {
    Array1::from_iter(a.iter().cloned())
}

/// Inverse of [`vec_op`] for a square operator of dimension `d`.
pub fn unvec_op(v: &CVec, d: usize) -> Mat {
    Array2::from_shape_vec((d, d), v.to_vec()).expect("length must be d*d")
}

/// Hilbert-Schmidt inner product <<A|B>> = Tr[A†B].
pub fn hs_inner(a: &Mat, b: &Mat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn vdot(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(a: &Mat) -> C64 {
    a.diag().sum()
}

/// Entrywise max-norm.
pub fn max_abs(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frob(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    ndarray::linalg::kron(a, b)
}

/// (A + A†)/2, with the anti-Hermitian residue reported.
pub fn hermitize(a: &Mat) -> (Mat, f64) {
    let ad = dagger(a);
    let h = (a + &ad).mapv(|z| z * 0.5);
    let residue = max_abs(&(a - &ad)) * 0.5;
    (h, residue)
}

pub fn hermiticity_defect(a: &Mat) -> f64 {
    hermitize(a).1
}

/// Eigenvalues and right eigenvectors (columns) of a general complex matrix.
pub fn eig_pairs(a: &Mat) -> Result<(CVec, Mat)> {
    let (w, v) = a.eig()?;
    Ok((w, v))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// Hermitian matrix. LAPACK sees our row-major buffer as the transpose, i.e.
/// conj(A), so its eigenvectors come back conjugated; undo that here.
pub fn eigh_pairs(a: &Mat) -> Result<(Array1<f64>, Mat)> {
    let (w, v) = a.eigh(UPLO::Lower)?;
    Ok((w, v.mapv(|z| z.conj())))
}

/// S^{-1/2} for Hermitian positive definite S.
pub fn inv_sqrt_psd(s: &Mat, min_eig_tol: f64) -> Result<Mat> {
    let (w, u) = eigh_pairs(s)?;
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= min_eig_tol {
        return Err(Error::IndefiniteNormalization(min));
    }
    let ud = dagger(&u);
    let mut core = zeros(w.len(), w.len());
    for (k, lk) in w.iter().enumerate() {
        core[(k, k)] = C64::from(lk.powf(-0.5));
    }
    Ok(u.dot(&core).dot(&ud))
}

/// Frechet derivative of S -> S^{-1/2} at Hermitian PD `s` in direction `ds`,
/// by divided differences over the eigendecomposition of `s`.
pub fn d_inv_sqrt_psd(s: &Mat, ds: &Mat, min_eig_tol: f64) -> Result<Mat> {
    let (w, u) = eigh_pairs(s)?;
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= min_eig_tol {
        return Err(Error::IndefiniteNormalization(min));
    }
    let ud = dagger(&u);
    let m = ud.dot(ds).dot(&u);
    let n = w.len();
    let mut core = zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let (wa, wb) = (w[a], w[b]);
            let dd = if (wa - wb).abs() < 1e-12 * wa.abs().max(1.0) {
                -0.5 * wa.powf(-1.5)
            } else {
                (wa.powf(-0.5) - wb.powf(-0.5)) / (wa - wb)
            };
            core[(a, b)] = m[(a, b)] * dd;
        }
    }
    Ok(u.dot(&core).dot(&ud))
}

/// Matrix exponential by Pade approximation with scaling and squaring
/// (Higham 2005, degree-13 approximant).
pub fn expm(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let norm = a.opnorm_one()?;
    let theta13 = 5.371920351148152;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.mapv(|z| z / C64::from(2f64.powi(s)));

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let u_inner =
        &a6.mapv(|z| z * B[13]) + &a4.mapv(|z| z * B[11]) + &a2.mapv(|z| z * B[9]);
    let u = a.dot(
        &(&a6.dot(&u_inner)
            + &a6.mapv(|z| z * B[7])
            + &a4.mapv(|z| z * B[5])
            + &a2.mapv(|z| z * B[3])
            + &id.mapv(|z| z * B[1])),
    );
    let v_inner =
        &a6.mapv(|z| z * B[12]) + &a4.mapv(|z| z * B[10]) + &a2.mapv(|z| z * B[8]);
    let v = &a6.dot(&v_inner)
        + &a6.mapv(|z| z * B[6])
        + &a4.mapv(|z| z * B[4])
        + &a2.mapv(|z| z * B[2])
        + &id.mapv(|z| z * B[0]);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = solve_matrix(&lhs, &rhs)?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Frechet derivative of the matrix exponential: d/ds expm(A + sE) at s = 0,
/// via expm of the block matrix [[A, E], [0, A]].
pub fn expm_frechet(a: &Mat, e: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let mut block = zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = a[(i, j)];
            block[(i, n + j)] = e[(i, j)];
            block[(n + i, n + j)] = a[(i, j)];
        }
    }
    let full = expm(&block)?;
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = full[(i, n + j)];
        }
    }
    Ok(out)
}

/// Solve A X = B column by column.
pub fn solve_matrix(a: &Mat, b: &Mat) -> Result<Mat> {
    let mut x = zeros(b.nrows(), b.ncols());
    for (j, col) in b.columns().into_iter().enumerate() {
        let xj = a.solve(&col.to_owned())?;
        x.column_mut(j).assign(&xj);
    }
    Ok(x)
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    Ok(a.inv()?)
}

/// Largest singular value (operator 2-norm) via eigh of A†A.
pub fn opnorm2(a: &Mat) -> Result<f64> {
    let ata = dagger(a).dot(a);
    let (w, _) = eigh_pairs(&ata)?;
    Ok(w.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt())
}

/// Checks Hermiticity, positivity (to `tol`), and unit trace.
pub fn check_density_matrix(rho: &Mat, tol: f64) -> Result<()> {
    let herm = hermiticity_defect(rho);
    if herm > tol {
        return Err(Error::NotDensityMatrix(format!(
            "Hermiticity defect {herm:.3e}"
        )));
    }
    let tr = trace(rho);
    if (tr - ONE).norm() > tol.max(1e-10) {
        return Err(Error::NotDensityMatrix(format!("trace = {tr}")));
    }
    let (h, _) = hermitize(rho);
    let (w, _) = eigh_pairs(&h)?;
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol.max(1e-9) {
        return Err(Error::NotDensityMatrix(format!(
            "negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Purification of a density matrix on a doubled space, system factor first:
/// |psi> = sum_k sqrt(w_k) |u_k> ⊗ |k>.
pub fn purify(rho: &Mat) -> Result<CVec> {
    let d = rho.nrows();
    let (w, u) = eigh_pairs(rho)?;
    let mut psi: CVec = Array1::zeros(d * d);
    for k in 0..d {
        if w[k] > 1e-14 {
            let a = C64::from(w[k].sqrt());
            for i in 0..d {
                psi[i * d + k] += a * u[(i, k)];
            }
        }
    }
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(psi.mapv(|z| z / C64::from(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn randmat(n: usize, seed: u64) -> Mat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn vec_roundtrip_and_superop_convention() {
        let a = randmat(3, 1);
        let b = randmat(3, 2);
        let x = randmat(3, 3);
        assert_eq!(unvec_op(&vec_op(&x), 3), x);
        // vec(A X B†) = (A ⊗ conj B) vec(X)
        let lhs = vec_op(&a.dot(&x).dot(&dagger(&b)));
        let sup = kron(&a, &conj(&b));
        let rhs = sup.dot(&vec_op(&x));
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            assert_abs_diff_eq!(l.re, r.re, epsilon = 1e-12);
            assert_abs_diff_eq!(l.im, r.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn expm_matches_series_small() {
        let a = randmat(4, 3).mapv(|z| z * 0.3);
        let e = expm(&a).unwrap();
        let mut term = eye(4);
        let mut sum = eye(4);
        for k in 1..40 {
            term = term.dot(&a).mapv(|z| z / C64::from(k as f64));
            sum = &sum + &term;
        }
        assert!(max_abs(&(&e - &sum)) < 1e-12);
    }

    #[test]
    fn expm_scaling_branch() {
        let a = randmat(4, 4).mapv(|z| z * 9.0);
        let e = expm(&a).unwrap();
        let half = expm(&a.mapv(|z| z * 0.5)).unwrap();
        assert!(max_abs(&(&e - &half.dot(&half))) < 1e-8 * max_abs(&e).max(1.0));
    }

    #[test]
    fn inv_sqrt_and_derivative() {
        let g = randmat(4, 5);
        let s = dagger(&g).dot(&g) + eye(4).mapv(|z| z * 0.5);
        let isq = inv_sqrt_psd(&s, 1e-14).unwrap();
        let should_be_id = isq.dot(&isq).dot(&s);
        assert!(max_abs(&(&should_be_id - &eye(4))) < 1e-12);

        let ds0 = randmat(4, 6);
        let ds = &ds0 + &dagger(&ds0);
        let dis = d_inv_sqrt_psd(&s, &ds, 1e-14).unwrap();
        let eps = 1e-6;
        let sp = &s + &ds.mapv(|z| z * eps);
        let sm = &s - &ds.mapv(|z| z * eps);
        let fd = (&inv_sqrt_psd(&sp, 1e-14).unwrap() - &inv_sqrt_psd(&sm, 1e-14).unwrap())
            .mapv(|z| z / C64::from(2.0 * eps));
        assert!(max_abs(&(&dis - &fd)) < 1e-8);
    }

    #[test]
    fn purify_reconstructs_marginal() {
        let g = randmat(3, 7);
        let mut rho = dagger(&g).dot(&g);
        let tr = trace(&rho);
        rho = rho.mapv(|z| z / tr);
        let psi = purify(&rho).unwrap();
        let mut red = zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    red[(i, j)] += psi[i * 3 + k] * psi[j * 3 + k].conj();
                }
            }
        }
        assert!(max_abs(&(&red - &rho)) < 1e-12);
    }
}
