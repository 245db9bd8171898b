//! Haar-averaged joint (system + radiation) QFI.
//!
//! The average over initial states is done exactly: the first and second
//! Haar moments E[ψψ†] = 1/D and E[|<ψ|G|ψ>|^2] = (Tr[GG†] + |Tr G|^2)/(D(D+1))
//! turn the averaged QFI into closed contractions with identity caps,
//!
//! ```text
//!   E F = 4 [ (α~ + Σβ~)/D - (|γ~|^2 + δ~)/(D(D+1)) ]
//! ```
//!
//! evaluated by the same streaming engines as the finite-time curves. The
//! Monte Carlo estimator samples Haar states and runs the brute-force QFI.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{trace_with, KrausChannel, SiteMap};
use crate::error::Result;
use crate::linalg::{self, Mat};
use crate::spectral::TransferSpectrum;

/// The identity-capped contraction variables of the Haar average.
#[derive(Debug, Clone)]
pub struct TildeVariables {
    /// α~(t) = sum_{τ<t} <<A| T^τ |1>>.
    pub alpha_tilde: C64,
    /// β~_τ(t) = <<1| B_up T^τ B_dn M_τ |1>> with M_τ = 2 sum_{τ' <= t-2-τ} T^{τ'}.
    pub beta_tildes: Vec<C64>,
    /// γ~(t) = Tr G with G = sum_{τ<t} E†^τ(Q), Q = sum K†dK.
    pub gamma_tilde: C64,
    /// δ~(t) = Tr[G G†].
    pub delta_tilde: C64,
}

/// Exact Haar-averaged joint QFI split against the radiation-curve bulk.
#[derive(Debug, Clone)]
pub struct HaarJointQfi {
    /// The exact average E_ψ F_SR(T).
    pub value: f64,
    /// The radiation-curve value 4(Tα + 2Σ(T-τ-1)Reβ - T^2|γ|^2).
    pub bulk: f64,
    /// value - bulk, the finite-size correction c(T).
    pub correction: f64,
}

/// Exact E_ψ F_SR(T) for any channel (no steady-state assumptions): the Haar
/// moments are identities, and all contractions are evaluated exactly.
pub fn haar_joint_qfi_exact(ch: &KrausChannel, t: usize) -> f64 {
    let d = ch.dim_system();
    let one = linalg::eye(d);
    let transfer = SiteMap::transfer(ch);
    let a_site = SiteMap::deriv_both(ch);
    let bup = SiteMap::deriv_ket(ch);
    let bdn = SiteMap::deriv_bra(ch);
    let c_a = a_site.left_trace_operator();
    let c_up = bup.left_trace_operator();

    // first term: diagonal + ordered pairs with |1>> boundary
    let mut v = one.clone();
    let mut g = linalg::zeros(d, d);
    let mut alpha_sum = 0.0;
    let mut beta_sum = 0.0;
    // second term: G = sum E†^τ(Q)
    let q = crate::qfi::a_left_operator(ch);
    let mut qc = q.clone();
    let mut gmat = linalg::zeros(d, d);
    for _ in 0..t {
        alpha_sum += trace_with(&c_a, &v).re;
        beta_sum += 2.0 * trace_with(&c_up, &g).re;
        gmat += &qc;
        qc = ch.apply_adjoint(&qc);
        g = transfer.apply(&g) + bdn.apply(&v);
        v = transfer.apply(&v);
    }
    let gamma_tilde = linalg::trace(&gmat);
    let delta_tilde = linalg::hs_inner(&gmat, &gmat).re;
    let df = d as f64;
    4.0 * ((alpha_sum + beta_sum) / df
        - (gamma_tilde.norm_sqr() + delta_tilde) / (df * (df + 1.0)))
}

/// The tilde variables by their defining contractions (O(t^2) for the β list;
/// intended for identity checks at small t).
pub fn tilde_variables(ch: &KrausChannel, t: usize) -> TildeVariables {
    let d = ch.dim_system();
    let one = linalg::eye(d);
    let a_site = SiteMap::deriv_both(ch);
    let bup = SiteMap::deriv_ket(ch);
    let bdn = SiteMap::deriv_bra(ch);
    let c_a = a_site.left_trace_operator();
    let c_up = bup.left_trace_operator();

    let mut alpha_tilde = C64::new(0.0, 0.0);
    let mut v = one.clone();
    for _ in 0..t {
        alpha_tilde += trace_with(&c_a, &v);
        v = ch.apply(&v);
    }

    // prefix sums P_k = sum_{τ'=0}^{k} E^{τ'}(1)
    let n_beta = t.saturating_sub(1);
    let mut prefixes: Vec<Mat> = Vec::with_capacity(n_beta);
    let mut running = one.clone();
    let mut acc = linalg::zeros(d, d);
    for _ in 0..n_beta {
        acc += &running;
        prefixes.push(acc.clone());
        running = ch.apply(&running);
    }
    let mut beta_tildes = Vec::with_capacity(n_beta);
    for tau in 0..n_beta {
        // 2 <<1| Bup T^tau Bdn |P_{t-2-tau}>>
        let mut x = bdn.apply(&prefixes[t - 2 - tau].mapv(|z| z * 2.0));
        for _ in 0..tau {
            x = ch.apply(&x);
        }
        beta_tildes.push(trace_with(&c_up, &x));
    }

    let q = crate::qfi::a_left_operator(ch);
    let mut qc = q.clone();
    let mut gmat = linalg::zeros(d, d);
    for _ in 0..t {
        gmat += &qc;
        qc = ch.apply_adjoint(&qc);
    }
    TildeVariables {
        alpha_tilde,
        beta_tildes,
        gamma_tilde: linalg::trace(&gmat),
        delta_tilde: C64::from(linalg::hs_inner(&gmat, &gmat).re),
    }
}

/// Haar-averaged joint QFI for a unique-fixed-point channel, split into the
/// radiation bulk and the exactly computed correction c(T).
pub fn haar_joint_qfi(
    ch: &KrausChannel,
    spectrum: &TransferSpectrum,
    t: usize,
) -> Result<HaarJointQfi> {
    let curve = crate::qfi::qfi_curve(ch, spectrum, t, 1.0)?;
    let bulk = curve.values[t - 1];
    let value = haar_joint_qfi_exact(ch, t);
    Ok(HaarJointQfi {
        value,
        bulk,
        correction: value - bulk,
    })
}

/// Degenerate-spectrum Haar average: the stationary-mode double sum with
/// weights Tr(J^μ/D) and Tr(J^μ J^ν), plus the exact residual c'(T).
pub fn haar_joint_qfi_degenerate(
    ch: &KrausChannel,
    spectrum: &TransferSpectrum,
    t: usize,
) -> Result<HaarJointQfi> {
    let d = ch.dim_system() as f64;
    let stats = spectrum.stationary();
    let a_site = SiteMap::deriv_both(ch);
    let bup = SiteMap::deriv_ket(ch);

    let mut first = 0.0;
    let mut gdiag_sum = C64::new(0.0, 0.0);
    for mode in &stats {
        let w = linalg::trace(&mode.left).re / d;
        let alpha_mu = linalg::hs_inner(&mode.left, &a_site.apply(&mode.right));
        // β^μ_μ(τ) weighted sum over τ
        let mut v = crate::qfi::b_operator(ch, &mode.right);
        let mut beta_sum = 0.0;
        for tau in 0..t.saturating_sub(1) {
            let b = linalg::hs_inner(&mode.left, &bup.apply(&v));
            beta_sum += (t - tau - 1) as f64 * b.re;
            v = ch.apply(&v);
        }
        first += w * (t as f64 * alpha_mu.re + 2.0 * beta_sum);
        gdiag_sum += C64::from(w) * linalg::hs_inner(&mode.left, &bup.apply(&mode.right));
    }

    let mut second = gdiag_sum.norm_sqr();
    for m1 in &stats {
        let g_mu = linalg::hs_inner(&linalg::eye(ch.dim_system()), &bup.apply(&m1.right)) / d;
        for m2 in &stats {
            let g_nu =
                linalg::hs_inner(&linalg::eye(ch.dim_system()), &bup.apply(&m2.right)) / d;
            let jj = linalg::hs_inner(&m1.left, &m2.left);
            second += (jj * g_mu * g_nu.conj()).re;
        }
    }
    let main = 4.0 * (first - (t * t) as f64 * (d / (d + 1.0)) * second);
    let value = haar_joint_qfi_exact(ch, t);
    Ok(HaarJointQfi {
        value,
        bulk: main,
        correction: value - main,
    })
}

/// Seeded Monte Carlo over Haar initial states; per-sample seeds are derived
/// from (seed, index) so the result is independent of thread scheduling.
pub fn haar_monte_carlo(
    ch: &KrausChannel,
    t: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    // fail fast on guard violations before spawning workers
    let probe = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        crate::oracle::haar_state(ch.dim_system(), &mut rng)
    };
    crate::oracle::pure_qfi_brute(ch, &probe, t)?;

    let values: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15),
            );
            let psi = crate::oracle::haar_state(ch.dim_system(), &mut rng);
            crate::oracle::pure_qfi_brute(ch, &psi, t).expect("guard checked above")
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
