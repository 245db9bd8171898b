//! Kraus channels, the emission isometry, and the transfer matrix.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lindblad::Superoperator;
use crate::linalg::{self, Mat};

/// Default isometry tolerance for exactly corrected channels.
pub const ISOMETRY_TOL: f64 = 1e-10;

/// One time step of system-plus-emitted-qudit evolution, V = sum_m K_m ⊗ |m>,
/// together with the parameter derivative blocks dK_m at the working point.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim_system: usize,
    kraus: Vec<Mat>,
    d_kraus: Vec<Mat>,
    isometry_defect: f64,
}

impl KrausChannel {
    /// Builds a channel, enforcing the isometry condition sum K†K = 1 to
    /// [`ISOMETRY_TOL`].
    pub fn new(kraus: Vec<Mat>, d_kraus: Vec<Mat>) -> Result<Self> {
        Self::with_tolerance(kraus, d_kraus, ISOMETRY_TOL)
    }

    /// Builds a channel with a relaxed isometry tolerance (first-order
    /// discretizations have an O(dt^2) defect).
    pub fn with_tolerance(kraus: Vec<Mat>, d_kraus: Vec<Mat>, tol: f64) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::DimensionMismatch("empty Kraus list".into()));
        }
        if kraus.len() != d_kraus.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} Kraus blocks but {} derivative blocks",
                kraus.len(),
                d_kraus.len()
            )));
        }
        let d = kraus[0].nrows();
        for k in kraus.iter().chain(d_kraus.iter()) {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus block is {}x{}, expected {}x{}",
                    k.nrows(),
                    k.ncols(),
                    d,
                    d
                )));
            }
        }
        let mut s = linalg::zeros(d, d);
        for k in &kraus {
            s = s + linalg::dagger(k).dot(k);
        }
        let defect = linalg::max_abs(&(&s - &linalg::eye(d)));
        if defect > tol {
            return Err(Error::NotIsometry { defect, tol });
        }
        Ok(Self {
            dim_system: d,
            kraus,
            d_kraus,
            isometry_defect: defect,
        })
    }

    pub fn dim_system(&self) -> usize {
        self.dim_system
    }

    pub fn dim_photon(&self) -> usize {
        self.kraus.len()
    }

    pub fn kraus(&self) -> &[Mat] {
        &self.kraus
    }

    pub fn d_kraus(&self) -> &[Mat] {
        &self.d_kraus
    }

    pub fn isometry_defect(&self) -> f64 {
        self.isometry_defect
    }

    /// The channel map E(X) = sum_m K_m X K_m†.
    pub fn apply(&self, x: &Mat) -> Mat {
        apply_pair(&self.kraus, &self.kraus, x)
    }

    /// The dual (Heisenberg) map E†(X) = sum_m K_m† X K_m.
    pub fn apply_adjoint(&self, x: &Mat) -> Mat {
        let d = self.dim_system;
        let mut out = linalg::zeros(d, d);
        for k in &self.kraus {
            out = out + linalg::dagger(k).dot(x).dot(k);
        }
        out
    }

    /// Dense transfer matrix T_V = sum_m K_m ⊗ conj(K_m); applying it to
    /// vec(X) equals vec(E(X)).
    pub fn transfer_matrix(&self) -> Superoperator {
        let d2 = self.dim_system * self.dim_system;
        let mut t = linalg::zeros(d2, d2);
        for k in &self.kraus {
            t = t + linalg::kron(k, &linalg::conj(k));
        }
        Superoperator::from_matrix(t)
    }

    /// Photon-basis rotation K_m <- sum_{m'} u_{m m'} K_{m'} (theta-independent
    /// u, so the derivative blocks rotate the same way).
    pub fn photon_rotate(&self, u: &Mat) -> Result<Self> {
        let d = self.dim_photon();
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "rotation is {}x{}, photon dimension is {}",
                u.nrows(),
                u.ncols(),
                d
            )));
        }
        let rotate = |blocks: &[Mat]| -> Vec<Mat> {
            (0..d)
                .map(|m| {
                    let mut out = linalg::zeros(self.dim_system, self.dim_system);
                    for (mp, b) in blocks.iter().enumerate() {
                        out = out + b.mapv(|z| z * u[(m, mp)]);
                    }
                    out
                })
                .collect()
        };
        Self::with_tolerance(
            rotate(&self.kraus),
            rotate(&self.d_kraus),
            self.isometry_defect.max(ISOMETRY_TOL) * 10.0,
        )
    }

    /// Block-diagonal direct sum of two channels (requires equal photon
    /// dimensions); the parts evolve independently.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.dim_photon() != other.dim_photon() {
            return Err(Error::DimensionMismatch(
                "direct sum needs equal photon dimensions".into(),
            ));
        }
        let d1 = self.dim_system;
        let d2 = other.dim_system;
        let emb = |a: &Mat, b: &Mat| -> Mat {
            let mut out = linalg::zeros(d1 + d2, d1 + d2);
            for i in 0..d1 {
                for j in 0..d1 {
                    out[(i, j)] = a[(i, j)];
                }
            }
            for i in 0..d2 {
                for j in 0..d2 {
                    out[(d1 + i, d1 + j)] = b[(i, j)];
                }
            }
            out
        };
        let kraus = self
            .kraus
            .iter()
            .zip(&other.kraus)
            .map(|(a, b)| emb(a, b))
            .collect();
        let d_kraus = self
            .d_kraus
            .iter()
            .zip(&other.d_kraus)
            .map(|(a, b)| emb(a, b))
            .collect();
        Self::with_tolerance(kraus, d_kraus, 10.0 * (ISOMETRY_TOL + self.isometry_defect + other.isometry_defect))
    }

    /// Tensors an untouched ancilla of dimension `da` onto the system
    /// (K_m -> K_m ⊗ 1); used to run purified boundaries through oracles.
    pub fn extend_with_ancilla(&self, da: usize) -> Self {
        let id = linalg::eye(da);
        let kraus = self.kraus.iter().map(|k| linalg::kron(k, &id)).collect();
        let d_kraus = self.d_kraus.iter().map(|k| linalg::kron(k, &id)).collect();
        Self {
            dim_system: self.dim_system * da,
            kraus,
            d_kraus,
            isometry_defect: self.isometry_defect,
        }
    }
}

/// Evaluates sum_m A_m X B_m† by plain matrix products.
pub fn apply_pair(a: &[Mat], b: &[Mat], x: &Mat) -> Mat {
    let d = a[0].nrows();
    let mut out = linalg::zeros(d, d);
    for (am, bm) in a.iter().zip(b.iter()) {
        out = out + am.dot(x).dot(&linalg::dagger(bm));
    }
    out
}

/// A one-site superoperator X -> sum_m A_m X B_m†, kept in Kraus form so it
/// can be applied in O(d D^3) instead of O(D^4).
#[derive(Debug, Clone)]
pub struct SiteMap {
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
}

impl SiteMap {
    pub fn new(a: Vec<Mat>, b: Vec<Mat>) -> Self {
        assert_eq!(a.len(), b.len());
        Self { a, b }
    }

    /// The transfer map itself: A = B = K.
    pub fn transfer(ch: &KrausChannel) -> Self {
        Self::new(ch.kraus().to_vec(), ch.kraus().to_vec())
    }

    /// Both legs dotted: X -> sum dK_m X dK_m†.
    pub fn deriv_both(ch: &KrausChannel) -> Self {
        Self::new(ch.d_kraus().to_vec(), ch.d_kraus().to_vec())
    }

    /// Ket leg dotted: X -> sum dK_m X K_m†.
    pub fn deriv_ket(ch: &KrausChannel) -> Self {
        Self::new(ch.d_kraus().to_vec(), ch.kraus().to_vec())
    }

    /// Bra leg dotted: X -> sum K_m X dK_m†.
    pub fn deriv_bra(ch: &KrausChannel) -> Self {
        Self::new(ch.kraus().to_vec(), ch.d_kraus().to_vec())
    }

    /// Photon-operator insertion: X -> sum_{m m'} g_{m' m} A_m X B_{m'}†.
    /// With A = B = K this is the dressed transfer map of a one-site
    /// observable g on the emitted qudit.
    pub fn photon_insertion(g: &Mat, a: &[Mat], b: &[Mat]) -> Self {
        let d = a.len();
        let dim = a[0].nrows();
        let mut bg: Vec<Mat> = Vec::with_capacity(d);
        // fold g into the bra-side blocks: sum_{m'} conj(g_{m' m}) B_{m'}
        for m in 0..d {
            let mut acc = linalg::zeros(dim, dim);
            for mp in 0..d {
                acc = acc + b[mp].mapv(|z| z * g[(mp, m)].conj());
            }
            bg.push(acc);
        }
        Self::new(a.to_vec(), bg)
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        apply_pair(&self.a, &self.b, x)
    }

    /// <<1| M |X>> = Tr[M(X)], evaluated as Tr[C X] with C = sum B_m† A_m
    /// precomputed by [`Self::left_trace_operator`].
    pub fn left_trace_operator(&self) -> Mat {
        let d = self.a[0].nrows();
        let mut c = linalg::zeros(d, d);
        for (am, bm) in self.a.iter().zip(self.b.iter()) {
            c = c + linalg::dagger(bm).dot(am);
        }
        c
    }
}

/// Tr[C X] for a precomputed left-trace operator.
pub fn trace_with(c: &Mat, x: &Mat) -> C64 {
    c.iter()
        .zip(x.t().iter())
        .map(|(a, b)| a * b)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, eye, hs_inner, max_abs, vec_op, zeros};
    use num_complex::Complex64 as C64;

    fn amplitude_damping(p: f64) -> KrausChannel {
        let mut k0 = zeros(2, 2);
        k0[(0, 0)] = C64::from(1.0);
        k0[(1, 1)] = C64::from((1.0 - p).sqrt());
        let mut k1 = zeros(2, 2);
        k1[(0, 1)] = C64::from(p.sqrt());
        KrausChannel::new(vec![k0, k1], vec![zeros(2, 2), zeros(2, 2)]).unwrap()
    }

    #[test]
    fn identity_channel_transfer_is_identity() {
        let ch = KrausChannel::new(vec![eye(3)], vec![zeros(3, 3)]).unwrap();
        let t = ch.transfer_matrix();
        assert!(max_abs(&(t.matrix() - &eye(9))) < 1e-14);
    }

    #[test]
    fn transfer_matrix_matches_kraus_application() {
        let ch = amplitude_damping(0.36);
        let t = ch.transfer_matrix();
        let mut x = zeros(2, 2);
        x[(0, 0)] = C64::new(0.3, 0.0);
        x[(0, 1)] = C64::new(0.1, -0.2);
        x[(1, 0)] = C64::new(0.1, 0.2);
        x[(1, 1)] = C64::new(0.7, 0.0);
        let via_matrix = t.matrix().dot(&vec_op(&x));
        let via_kraus = vec_op(&ch.apply(&x));
        let diff: f64 = via_matrix
            .iter()
            .zip(via_kraus.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn amplitude_damping_transfer_eigenvalues() {
        // p = 0.36: eigenvalues {1, 0.8, 0.8, 0.64}
        let ch = amplitude_damping(0.36);
        let (w, _) = crate::linalg::eig_pairs(ch.transfer_matrix().matrix()).unwrap();
        let mut mags: Vec<f64> = w.iter().map(|z| z.norm()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((mags[0] - 1.0).abs() < 1e-12);
        assert!((mags[1] - 0.8).abs() < 1e-12);
        assert!((mags[2] - 0.8).abs() < 1e-12);
        assert!((mags[3] - 0.64).abs() < 1e-12);
    }

    #[test]
    fn unit_left_fixed_vector() {
        let ch = amplitude_damping(0.2);
        // <<1| T = <<1|, i.e. E†(1) = 1
        let one = eye(2);
        let back = ch.apply_adjoint(&one);
        assert!(max_abs(&(&back - &one)) < 1e-12);
    }

    #[test]
    fn rejects_non_isometry() {
        let k0 = eye(2).mapv(|z| z * 0.9);
        assert!(matches!(
            KrausChannel::new(vec![k0], vec![zeros(2, 2)]),
            Err(crate::error::Error::NotIsometry { .. })
        ));
    }

    #[test]
    fn photon_insertion_contraction() {
        let ch = amplitude_damping(0.3);
        let mut g = zeros(2, 2);
        g[(0, 1)] = C64::new(0.4, 0.7);
        g[(1, 0)] = C64::new(0.4, -0.7);
        g[(1, 1)] = C64::from(2.0);
        let site = SiteMap::photon_insertion(&g, ch.kraus(), ch.kraus());
        let x = eye(2).mapv(|z| z * 0.5);
        let direct = {
            let mut out = zeros(2, 2);
            for m in 0..2 {
                for mp in 0..2 {
                    out = out
                        + ch.kraus()[m]
                            .dot(&x)
                            .dot(&dagger(&ch.kraus()[mp]))
                            .mapv(|z| z * g[(mp, m)]);
                }
            }
            out
        };
        assert!(max_abs(&(&site.apply(&x) - &direct)) < 1e-13);
        // left-trace operator agrees with explicit trace
        let c = site.left_trace_operator();
        let lhs = trace_with(&c, &x);
        let rhs = hs_inner(&eye(2), &site.apply(&x));
        assert!((lhs - rhs).norm() < 1e-13);
    }
}
