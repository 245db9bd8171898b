//! Biorthogonal spectral analysis of the transfer matrix, including the
//! construction of a positive stationary left basis.
//!
//! The transfer matrix of a channel is non-normal, so left and right
//! eigenvectors are computed independently (from T and T†), matched by
//! eigenvalue, and re-biorthogonalized cluster by cluster through the Gram
//! matrix. Peripheral modes (|λ| within `peripheral_tol` of the unit circle)
//! are grouped by phase; the phase-zero left space is rotated into a basis of
//! minimal projectors {J^μ} with 0 ≤ J^μ ≤ 1, so that overlaps
//! c_μ = Tr(J^μ ρ) of density matrices land in [0, 1]. The right basis is
//! adjusted to keep <<J^μ|Ψ_ν>> = δ^μ_ν.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lindblad::Superoperator;
use crate::linalg::{self, CVec, Mat};

pub const DEFAULT_PERIPHERAL_TOL: f64 = 1e-9;
const CLUSTER_TOL: f64 = 1e-7;
const PSD_MEMBERSHIP_TOL: f64 = 1e-8;

/// One unit-circle eigenmode e^{iΔ} of the transfer matrix.
#[derive(Debug, Clone)]
pub struct PeripheralMode {
    /// Phase Δ ∈ (-π, π].
    pub phase: f64,
    /// Degeneracy label within the phase cluster.
    pub index: usize,
    /// Right eigenmatrix Ψ_{Δμ}.
    pub right: Mat,
    /// Left eigenmatrix J^{Δμ}; for Δ = 0 a PSD operator with 0 ≤ J ≤ 1.
    pub left: Mat,
}

/// One decaying (|λ| < 1) mode with its biorthogonal left/right pair.
#[derive(Debug, Clone)]
pub struct DecayingMode {
    pub value: C64,
    pub right: Mat,
    pub left: Mat,
}

/// Full biorthogonal eigensystem of a transfer matrix.
#[derive(Debug, Clone)]
pub struct TransferSpectrum {
    pub eigenvalues: Vec<C64>,
    pub peripheral: Vec<PeripheralMode>,
    pub decaying: Vec<DecayingMode>,
    /// 1 - |λ_2| with λ_2 the largest decaying eigenvalue.
    pub gap: f64,
    /// Present when the peripheral space is exactly one mode at Δ = 0.
    pub steady_state: Option<Mat>,
    pub peripheral_tol: f64,
}

impl TransferSpectrum {
    /// Stationary (Δ = 0) peripheral modes.
    pub fn stationary(&self) -> Vec<&PeripheralMode> {
        self.peripheral
            .iter()
            .filter(|m| m.phase.abs() < 1e-6)
            .collect()
    }

    pub fn d_ss(&self) -> usize {
        self.stationary().len()
    }

    pub fn unique_steady_state(&self) -> Result<&Mat> {
        self.steady_state
            .as_ref()
            .ok_or(Error::NonUniqueSteadyState(self.peripheral.len()))
    }

    /// Correlation time in steps, -1/ln|λ_2|.
    pub fn tau_star(&self) -> f64 {
        let l2 = 1.0 - self.gap;
        if l2 <= 0.0 {
            return 0.0;
        }
        -1.0 / l2.ln()
    }
}

/// Full biorthogonal decomposition of a channel superoperator.
pub fn spectral_decompose(t: &Superoperator, peripheral_tol: f64) -> Result<TransferSpectrum> {
    let d = t.dim();
    let (w, rmat) = linalg::eig_pairs(t.matrix())?;
    let td = linalg::dagger(t.matrix());
    let (wl, lmat) = linalg::eig_pairs(&td)?;
    let n = w.len();

    // cluster eigenvalues of T into connected components
    let clusters = cluster_indices(&w.to_vec(), CLUSTER_TOL);

    // match each cluster to left eigenvectors of T (columns of lmat with
    // eigenvalue ~ conj λ), greedily by distance
    let mut taken = vec![false; n];
    let mut modes: Vec<(C64, Vec<usize>, Vec<usize>)> = Vec::new();
    for cl in &clusters {
        let mean = cl.iter().map(|&i| w[i]).sum::<C64>() / C64::from(cl.len() as f64);
        let mut lefts = Vec::with_capacity(cl.len());
        for _ in 0..cl.len() {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for j in 0..n {
                if !taken[j] {
                    let dd = (wl[j].conj() - mean).norm();
                    if dd < best_d {
                        best_d = dd;
                        best = j;
                    }
                }
            }
            taken[best] = true;
            lefts.push(best);
        }
        modes.push((mean, cl.clone(), lefts));
    }

    let mut peripheral = Vec::new();
    let mut decaying = Vec::new();
    let mut lambda2: f64 = 0.0;

    for (mean, rights, lefts) in &modes {
        let is_peripheral = mean.norm() >= 1.0 - peripheral_tol;
        let k = rights.len();
        let rcols: Vec<CVec> = rights.iter().map(|&i| rmat.column(i).to_owned()).collect();
        let lcols: Vec<CVec> = lefts.iter().map(|&j| lmat.column(j).to_owned()).collect();
        // Gram_{ab} = l_a† r_b
        let mut gram = linalg::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                gram[(a, b)] = linalg::vdot(&lcols[a], &rcols[b]);
            }
        }
        let ginv = linalg::inverse(&gram).map_err(|_| Error::DefectivePeripheralBlock {
            phase: mean.arg(),
            cond: f64::INFINITY,
        })?;
        // condition estimate for the peripheral sanity gate
        if is_peripheral {
            let cond = linalg::frob(&gram) * linalg::frob(&ginv) / k as f64;
            if !cond.is_finite() || cond > 1e10 {
                return Err(Error::DefectivePeripheralBlock {
                    phase: mean.arg(),
                    cond,
                });
            }
        }
        // biorthogonalized lefts: l'_a = sum_c (ginv†)_{ca} l_c
        let lprime: Vec<CVec> = (0..k)
            .map(|a| {
                let mut v: CVec = ndarray::Array1::zeros(n);
                for c in 0..k {
                    let coef = ginv[(a, c)].conj();
                    v = v + lcols[c].mapv(|z| z * coef);
                }
                v
            })
            .collect();

        if is_peripheral {
            for (idx, (r, l)) in rcols.iter().zip(lprime.iter()).enumerate() {
                peripheral.push(PeripheralMode {
                    phase: mean.arg(),
                    index: idx,
                    right: linalg::unvec_op(r, d),
                    left: linalg::unvec_op(l, d),
                });
            }
        } else {
            lambda2 = lambda2.max(mean.norm());
            for (r, l) in rcols.iter().zip(lprime.iter()) {
                decaying.push(DecayingMode {
                    value: *mean,
                    right: linalg::unvec_op(r, d),
                    left: linalg::unvec_op(l, d),
                });
            }
        }
    }

    rebuild_stationary_basis(&mut peripheral)?;
    enforce_conjugate_pairing(&mut peripheral);

    let stationary: Vec<&PeripheralMode> = peripheral
        .iter()
        .filter(|m| m.phase.abs() < 1e-6)
        .collect();
    let steady_state = if peripheral.len() == 1 && stationary.len() == 1 {
        let psi = &stationary[0].right;
        let tr = linalg::trace(psi);
        let (h, _) = linalg::hermitize(&psi.mapv(|z| z / tr));
        Some(h)
    } else {
        None
    };

    Ok(TransferSpectrum {
        eigenvalues: w.to_vec(),
        peripheral,
        decaying,
        gap: 1.0 - lambda2,
        steady_state,
        peripheral_tol,
    })
}

/// Overlaps c_{Δμ} = <<J^{Δμ}|ρ_in>> of the initial state with the conserved
/// and oscillating quantities, in the order of `spectrum.peripheral`.
pub fn overlap_coefficients(spectrum: &TransferSpectrum, rho_in: &Mat) -> Result<Vec<C64>> {
    linalg::check_density_matrix(rho_in, 1e-9)?;
    Ok(spectrum
        .peripheral
        .iter()
        .map(|m| linalg::hs_inner(&m.left, rho_in))
        .collect())
}

fn cluster_indices(w: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = w.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (w[i] - w[j]).norm() < tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::HashMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Rotates the Δ=0 left space into minimal projectors (PSD, bounded by 1)
/// and re-biorthogonalizes the right space against them.
fn rebuild_stationary_basis(peripheral: &mut [PeripheralMode]) -> Result<()> {
    let idx: Vec<usize> = peripheral
        .iter()
        .enumerate()
        .filter(|(_, m)| m.phase.abs() < 1e-6)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Ok(());
    }
    let k = idx.len();
    let d = peripheral[idx[0]].left.nrows();

    // Hermitian orthonormal basis of the left span (real vector space)
    let mut herm_basis: Vec<Mat> = Vec::new();
    let candidates: Vec<Mat> = idx
        .iter()
        .flat_map(|&i| {
            let j = &peripheral[i].left;
            let jd = linalg::dagger(j);
            let re = (j + &jd).mapv(|z| z * 0.5);
            let im = (j - &jd).mapv(|z| z * C64::new(0.0, 0.5));
            [re, im]
        })
        .collect();
    for cand in candidates {
        let mut v = cand;
        for b in &herm_basis {
            let ov = linalg::hs_inner(b, &v).re;
            v = v - b.mapv(|z| z * ov);
        }
        let norm = linalg::frob(&v);
        if norm > 1e-8 {
            herm_basis.push(v.mapv(|z| z / C64::from(norm)));
        }
        if herm_basis.len() == k {
            break;
        }
    }
    if herm_basis.len() != k {
        return Err(Error::PsdBasisFailure(f64::NAN));
    }

    // minimal projectors from a random Hermitian combination; retried with
    // fresh coefficients, then a rank-one fallback for non-commuting spans
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut js: Option<Vec<Mat>> = None;
    let mut most_negative: f64 = 0.0;
    'outer: for _attempt in 0..8 {
        let mut combo = linalg::zeros(d, d);
        for b in &herm_basis {
            let coef = rng.gen::<f64>() - 0.5;
            combo = combo + b.mapv(|z| z * coef);
        }
        let (vals, vecs) = linalg::eigh_pairs(&combo)?;
        // cluster eigenvalues of the combo
        let groups = cluster_indices(
            &vals.iter().map(|&x| C64::from(x)).collect::<Vec<_>>(),
            1e-7 * (1.0 + vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()))),
        );
        if groups.len() != k {
            continue;
        }
        let mut projs = Vec::with_capacity(k);
        for g in &groups {
            let mut p = linalg::zeros(d, d);
            for &ii in g {
                let col = vecs.column(ii);
                for a in 0..d {
                    for b in 0..d {
                        p[(a, b)] += col[a] * col[b].conj();
                    }
                }
            }
            // membership: projection of p onto the span must return p
            let mut phat = linalg::zeros(d, d);
            for hb in &herm_basis {
                let ov = linalg::hs_inner(hb, &p).re;
                phat = phat + hb.mapv(|z| z * ov);
            }
            if linalg::max_abs(&(&phat - &p)) > PSD_MEMBERSHIP_TOL {
                continue 'outer;
            }
            projs.push(p);
        }
        js = Some(projs);
        break;
    }
    let js = match js {
        Some(v) => v,
        None => {
            // non-commuting stationary span: collect PSD elements from
            // span-projected random pure states
            let mut collected: Vec<Mat> = Vec::new();
            for _ in 0..400 {
                if collected.len() == k {
                    break;
                }
                let v: CVec = ndarray::Array1::from_shape_fn(d, |_| {
                    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                });
                let mut p = linalg::zeros(d, d);
                for a in 0..d {
                    for b in 0..d {
                        p[(a, b)] = v[a] * v[b].conj();
                    }
                }
                let mut phat = linalg::zeros(d, d);
                for hb in &herm_basis {
                    let ov = linalg::hs_inner(hb, &p).re;
                    phat = phat + hb.mapv(|z| z * ov);
                }
                let (wv, _) = linalg::eigh_pairs(&phat)?;
                let min = wv.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = wv.iter().cloned().fold(0.0f64, f64::max);
                most_negative = most_negative.min(min);
                if min < -1e-10 * max.max(1.0) || max <= 1e-12 {
                    continue;
                }
                let cand = phat.mapv(|z| z / C64::from(max));
                // keep only if linearly independent of what we have
                let mut resid = cand.clone();
                for c in &collected {
                    let ov = linalg::hs_inner(c, &resid);
                    let nn = C64::from(linalg::hs_inner(c, c).re);
                    resid = resid - c.mapv(|z| z * (ov / nn));
                }
                if linalg::frob(&resid) > 1e-6 {
                    collected.push(cand);
                }
            }
            if collected.len() != k {
                return Err(Error::PsdBasisFailure(most_negative));
            }
            collected
        }
    };

    // re-biorthogonalize rights against the new lefts
    let rights: Vec<Mat> = idx.iter().map(|&i| peripheral[i].right.clone()).collect();
    let mut gram = linalg::zeros(k, k);
    for (mu, j) in js.iter().enumerate() {
        for (b, r) in rights.iter().enumerate() {
            gram[(mu, b)] = linalg::hs_inner(j, r);
        }
    }
    let ginv = linalg::inverse(&gram).map_err(|_| Error::DefectivePeripheralBlock {
        phase: 0.0,
        cond: f64::INFINITY,
    })?;
    for (nu, &i) in idx.iter().enumerate() {
        let mut psi = linalg::zeros(d, d);
        for (b, r) in rights.iter().enumerate() {
            psi = psi + r.mapv(|z| z * ginv[(b, nu)]);
        }
        let (psi, _) = linalg::hermitize(&psi);
        peripheral[i].right = psi;
        peripheral[i].left = js[nu].clone();
        peripheral[i].index = nu;
        peripheral[i].phase = 0.0;
    }
    Ok(())
}

/// Rebuilds each Δ < 0 cluster as the dagger of its Δ > 0 partner so that
/// c*_{Δμ} = c_{-Δμ} holds exactly.
fn enforce_conjugate_pairing(peripheral: &mut [PeripheralMode]) {
    let n = peripheral.len();
    for i in 0..n {
        if peripheral[i].phase <= 1e-6 {
            continue;
        }
        let phase = peripheral[i].phase;
        let index = peripheral[i].index;
        let left_conj = linalg::dagger(&peripheral[i].left);
        let right_conj = linalg::dagger(&peripheral[i].right);
        for (j, partner) in peripheral.iter_mut().enumerate() {
            if j != i && (partner.phase + phase).abs() < 1e-6 && partner.index == index {
                partner.left = left_conj.clone();
                partner.right = right_conj.clone();
            }
        }
    }
}
