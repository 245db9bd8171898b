//! Ground-truth computations at desk scale: brute-force state construction,
//! pure and mixed QFI, photocounting classical Fisher information, and the
//! tilted-Liouvillian formula.

use num_complex::Complex64 as C64;

use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::lindblad::LindbladModel;
use crate::linalg::{self, CVec, Mat};

/// D * d^T guard for full-state construction.
pub const FULL_STATE_GUARD: usize = 1 << 22;
/// d^T guard for the mixed-state eigendecomposition.
pub const MIXED_STATE_GUARD: usize = 1 << 12;
/// d^T guard for record enumeration.
pub const RECORD_GUARD: usize = 1 << 16;
/// Eigenvalue floor in the SLD sum.
const SLD_FLOOR: f64 = 1e-12;
/// Probability floor in the classical FI sum.
const CFI_FLOOR: f64 = 1e-14;

/// The joint system-plus-radiation state |Ψ;T> and its parameter derivative.
/// Index layout: system factor slowest, then photons most-recent-first, i.e.
/// `amplitudes[((i * d + m_T) * d + m_{T-1}) ...]`; record orderings only
/// matter up to a fixed relabeling.
#[derive(Debug, Clone)]
pub struct FullState {
    pub dim_system: usize,
    pub dim_photon: usize,
    pub steps: usize,
    pub amplitudes: CVec,
    pub d_amplitudes: CVec,
}

/// Builds |Ψ;T> = V ... V |ψ_0> with the analytic derivative accumulated by
/// the product rule (one dK insertion per step).
pub fn full_state(ch: &KrausChannel, psi0: &CVec, steps: usize) -> Result<FullState> {
    let d_sys = ch.dim_system();
    let d_ph = ch.dim_photon();
    if psi0.len() != d_sys {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system dimension is {}",
            psi0.len(),
            d_sys
        )));
    }
    let final_dim = d_ph
        .checked_pow(steps as u32)
        .and_then(|x| x.checked_mul(d_sys))
        .unwrap_or(usize::MAX);
    if final_dim > FULL_STATE_GUARD {
        return Err(Error::MemoryGuard(final_dim, FULL_STATE_GUARD));
    }
    let mut psi = psi0.to_vec();
    let mut dpsi = vec![C64::new(0.0, 0.0); psi0.len()];
    for _ in 0..steps {
        let rest = psi.len() / d_sys;
        let mut new_psi = vec![C64::new(0.0, 0.0); psi.len() * d_ph];
        let mut new_dpsi = vec![C64::new(0.0, 0.0); psi.len() * d_ph];
        // psi[(i, r)] -> new[(i, m, r)]; the fresh photon index slots in
        // between the system index and the older photons
        for (m, (k, dk)) in ch.kraus().iter().zip(ch.d_kraus()).enumerate() {
            for i in 0..d_sys {
                for j in 0..d_sys {
                    let kij = k[(i, j)];
                    let dkij = dk[(i, j)];
                    if kij.norm_sqr() == 0.0 && dkij.norm_sqr() == 0.0 {
                        continue;
                    }
                    for r in 0..rest {
                        let src = j * rest + r;
                        let dst = (i * d_ph + m) * rest + r;
                        new_psi[dst] += kij * psi[src];
                        new_dpsi[dst] += kij * dpsi[src] + dkij * psi[src];
                    }
                }
            }
        }
        psi = new_psi;
        dpsi = new_dpsi;
    }
    Ok(FullState {
        dim_system: d_sys,
        dim_photon: d_ph,
        steps,
        amplitudes: CVec::from_vec(psi),
        d_amplitudes: CVec::from_vec(dpsi),
    })
}

/// Pure-state QFI F = 4(<∂Ψ|∂Ψ> - |<Ψ|∂Ψ>|^2) of the joint state.
pub fn pure_qfi_brute(ch: &KrausChannel, psi0: &CVec, steps: usize) -> Result<f64> {
    let st = full_state(ch, psi0, steps)?;
    Ok(pure_qfi_of(&st))
}

pub fn pure_qfi_of(st: &FullState) -> f64 {
    let gg = linalg::vdot(&st.d_amplitudes, &st.d_amplitudes).re;
    let s = linalg::vdot(&st.amplitudes, &st.d_amplitudes);
    4.0 * (gg - s.norm_sqr())
}

/// Mixed-state QFI of the radiation after tracing out the system:
/// F = sum_{λ_i + λ_j > ε} 2 |<i|∂ρ|j>|^2 / (λ_i + λ_j).
pub fn radiation_qfi_brute(ch: &KrausChannel, psi0: &CVec, steps: usize) -> Result<f64> {
    let d_ph = ch.dim_photon();
    let dim_r = d_ph.checked_pow(steps as u32).unwrap_or(usize::MAX);
    if dim_r > MIXED_STATE_GUARD {
        return Err(Error::MemoryGuard(dim_r, MIXED_STATE_GUARD));
    }
    let st = full_state(ch, psi0, steps)?;
    let d_sys = st.dim_system;

    // ρ_R[r, r'] = sum_i Ψ[i,r] conj(Ψ[i,r']); ∂ρ_R by the product rule
    let mut rho = linalg::zeros(dim_r, dim_r);
    let mut drho = linalg::zeros(dim_r, dim_r);
    for i in 0..d_sys {
        for r in 0..dim_r {
            let a = st.amplitudes[i * dim_r + r];
            let da = st.d_amplitudes[i * dim_r + r];
            for rp in 0..dim_r {
                let b = st.amplitudes[i * dim_r + rp].conj();
                let db = st.d_amplitudes[i * dim_r + rp].conj();
                rho[(r, rp)] += a * b;
                drho[(r, rp)] += da * b + a * db;
            }
        }
    }
    let (w, u) = linalg::eigh_pairs(&rho)?;
    // <i|∂ρ|j> in the eigenbasis
    let ud = linalg::dagger(&u);
    let m = ud.dot(&drho).dot(&u);
    let mut f = 0.0;
    for i in 0..dim_r {
        for j in 0..dim_r {
            let denom = w[i].max(0.0) + w[j].max(0.0);
            if denom > SLD_FLOOR {
                f += 2.0 * m[(i, j)].norm_sqr() / denom;
            }
        }
    }
    Ok(f)
}

/// Classical Fisher information of the photocounting record in the emission
/// basis: I = sum_m (∂p_m)^2 / p_m with analytic probability derivatives.
pub fn photocount_cfi(ch: &KrausChannel, psi0: &CVec, steps: usize) -> Result<f64> {
    let d_ph = ch.dim_photon();
    let dim_r = d_ph.checked_pow(steps as u32).unwrap_or(usize::MAX);
    if dim_r > RECORD_GUARD {
        return Err(Error::MemoryGuard(dim_r, RECORD_GUARD));
    }
    let st = full_state(ch, psi0, steps)?;
    let d_sys = st.dim_system;
    let mut fi = 0.0;
    for r in 0..dim_r {
        let mut p = 0.0;
        let mut dp = 0.0;
        for i in 0..d_sys {
            let a = st.amplitudes[i * dim_r + r];
            let da = st.d_amplitudes[i * dim_r + r];
            p += a.norm_sqr();
            dp += 2.0 * (a.conj() * da).re;
        }
        if p > CFI_FLOOR {
            fi += dp * dp / p;
        }
    }
    Ok(fi)
}

/// Classical FI of the joint record that also measures the leftover system
/// qubit in the basis `u_sys` (rows are measurement vectors) after T steps.
/// Product measurements on the GHZ emitter need this last measurement: the
/// radiation-only record is insensitive there.
pub fn photocount_cfi_joint(
    ch: &KrausChannel,
    psi0: &CVec,
    steps: usize,
    u_sys: &Mat,
) -> Result<f64> {
    let d_ph = ch.dim_photon();
    let dim_r = d_ph.checked_pow(steps as u32).unwrap_or(usize::MAX);
    if dim_r > RECORD_GUARD {
        return Err(Error::MemoryGuard(dim_r, RECORD_GUARD));
    }
    let st = full_state(ch, psi0, steps)?;
    let d_sys = st.dim_system;
    let mut fi = 0.0;
    for s in 0..d_sys {
        for r in 0..dim_r {
            let mut a = C64::new(0.0, 0.0);
            let mut da = C64::new(0.0, 0.0);
            for i in 0..d_sys {
                a += u_sys[(s, i)] * st.amplitudes[i * dim_r + r];
                da += u_sys[(s, i)] * st.d_amplitudes[i * dim_r + r];
            }
            let p = a.norm_sqr();
            let dp = 2.0 * (a.conj() * da).re;
            if p > CFI_FLOOR {
                fi += dp * dp / p;
            }
        }
    }
    Ok(fi)
}

/// The two-parameter tilted generator of the Mølmer total-QFI formula,
/// with θ_1 on the ket side and θ_2 on the bra side.
#[derive(Debug, Clone)]
pub struct TiltedLiouvillian {
    pub matrix: Mat,
}

pub fn tilted_liouvillian(
    model: &LindbladModel,
    theta1: f64,
    theta2: f64,
) -> TiltedLiouvillian {
    let d = model.dim();
    let id = linalg::eye(d);
    let i = C64::new(0.0, 1.0);
    let h1 = model.hamiltonian() + &model.d_hamiltonian().mapv(|z| z * theta1);
    let h2 = model.hamiltonian() + &model.d_hamiltonian().mapv(|z| z * theta2);
    let mut m = linalg::kron(&h1, &id).mapv(|z| -i * z)
        + linalg::kron(&id, &h2.t().to_owned()).mapv(|z| i * z);
    for (l, dl) in model.jumps().iter().zip(model.d_jumps()) {
        let l1 = l + &dl.mapv(|z| z * theta1);
        let l2 = l + &dl.mapv(|z| z * theta2);
        m = m + linalg::kron(&l1, &linalg::conj(&l2))
            - linalg::kron(&linalg::dagger(&l1).dot(&l1), &id).mapv(|z| z * 0.5)
            - linalg::kron(&id, &linalg::dagger(&l2).dot(&l2).t().to_owned())
                .mapv(|z| z * 0.5);
    }
    TiltedLiouvillian { matrix: m }
}

/// Mølmer total QFI at time t with a 4-point mixed-difference stencil at
/// half-width `d_theta`; returns the value and a step-halving error estimate.
pub fn molmer_qfi(
    model: &LindbladModel,
    rho0: &Mat,
    t: f64,
    d_theta: f64,
) -> Result<(f64, f64)> {
    let v = molmer_qfi_raw(model, rho0, t, d_theta)?;
    let v2 = molmer_qfi_raw(model, rho0, t, d_theta / 2.0)?;
    Ok((v2, (v2 - v).abs() / 3.0))
}

fn molmer_qfi_raw(model: &LindbladModel, rho0: &Mat, t: f64, eps: f64) -> Result<f64> {
    let rv = linalg::vec_op(rho0);
    let one = linalg::vec_op(&linalg::eye(model.dim()));
    let mut logs = [0.0; 4];
    for (idx, (s1, s2)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .enumerate()
    {
        let tilt = tilted_liouvillian(model, s1 * eps, s2 * eps);
        let prop = linalg::expm(&tilt.matrix.mapv(|z| z * t))?;
        let out = prop.dot(&rv);
        let overlap = linalg::vdot(&one, &out);
        let a = overlap.norm();
        if !a.is_finite() || a < 1e-280 {
            return Err(Error::OverlapUnderflow(a));
        }
        logs[idx] = a.ln();
    }
    Ok(4.0 * (logs[0] - logs[1] - logs[2] + logs[3]) / (4.0 * eps * eps))
}

/// Asymptotic Mølmer rate 4 ∂_{θ1}∂_{θ2} λ(θ_1, θ_2) from the leading
/// eigenvalue of the tilted generator, by the same 4-point stencil.
pub fn molmer_rate(model: &LindbladModel, d_theta: f64) -> Result<(f64, f64)> {
    let v = molmer_rate_raw(model, d_theta)?;
    let v2 = molmer_rate_raw(model, d_theta / 2.0)?;
    Ok((v2, (v2 - v).abs() / 3.0))
}

fn molmer_rate_raw(model: &LindbladModel, eps: f64) -> Result<f64> {
    let mut vals = [C64::new(0.0, 0.0); 4];
    for (idx, (s1, s2)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .enumerate()
    {
        let tilt = tilted_liouvillian(model, s1 * eps, s2 * eps);
        let (w, _) = linalg::eig_pairs(&tilt.matrix)?;
        let lead = w
            .iter()
            .cloned()
            .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap())
            .unwrap();
        vals[idx] = lead;
    }
    Ok(4.0 * ((vals[0] - vals[1] - vals[2] + vals[3]) / C64::from(4.0 * eps * eps)).re)
}

/// Haar-random pure state on C^dim from normalized complex Gaussians.
pub fn haar_state<R: rand::Rng>(dim: usize, rng: &mut R) -> CVec {
    use rand_distr::StandardNormal;
    let mut psi: CVec = ndarray::Array1::from_shape_fn(dim, |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.mapv_inplace(|z| z / C64::from(n));
    psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eye, vec_op, zeros};
    use ndarray::array;

    fn ghz_channel(delta: f64) -> KrausChannel {
        let mut k0 = zeros(2, 2);
        k0[(0, 0)] = C64::from(1.0);
        let mut k1 = zeros(2, 2);
        k1[(1, 1)] = C64::from(1.0);
        let dk0 = k0.mapv(|z| z * C64::new(0.0, -delta / 2.0));
        let dk1 = k1.mapv(|z| z * C64::new(0.0, delta / 2.0));
        KrausChannel::new(vec![k0, k1], vec![dk0, dk1]).unwrap()
    }

    fn plus() -> CVec {
        array![C64::from(1.0 / 2f64.sqrt()), C64::from(1.0 / 2f64.sqrt())]
    }

    #[test]
    fn identity_channel_keeps_state() {
        let ch = KrausChannel::new(vec![eye(2)], vec![zeros(2, 2)]).unwrap();
        let st = full_state(&ch, &plus(), 1).unwrap();
        for (a, b) in st.amplitudes.iter().zip(plus().iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(pure_qfi_of(&st).abs() < 1e-14);
    }

    #[test]
    fn ghz_emitter_state_and_qfi() {
        // T = 2 from |+>: (|000> + |111>)/sqrt(2); joint QFI = T^2 δ^2
        let delta = 0.7;
        let ch = ghz_channel(delta);
        let st = full_state(&ch, &plus(), 2).unwrap();
        let mut expect: CVec = ndarray::Array1::zeros(8);
        expect[0] = C64::from(1.0 / 2f64.sqrt());
        expect[7] = C64::from(1.0 / 2f64.sqrt());
        for (a, b) in st.amplitudes.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
        for t in 1..=6 {
            let f = pure_qfi_brute(&ch, &plus(), t).unwrap();
            let tf = t as f64;
            assert!((f - tf * tf * delta * delta).abs() < 1e-12);
        }
        // norm preservation invariants
        let n: f64 = st.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(linalg::vdot(&st.amplitudes, &st.d_amplitudes).re.abs() < 1e-10);
    }

    #[test]
    fn ghz_radiation_is_insensitive_but_x_basis_recovers() {
        let delta = 0.5;
        let ch = ghz_channel(delta);
        let t = 5;
        let rad = radiation_qfi_brute(&ch, &plus(), t).unwrap();
        assert!(rad.abs() < 1e-9, "radiation QFI {rad}");
        // computational-basis photocounting sees nothing
        let cfi_z = photocount_cfi(&ch, &plus(), t).unwrap();
        assert!(cfi_z.abs() < 1e-10);
        // X-basis measurement (photon-rotated channel) recovers T^2 δ^2 at
        // a generic working point; exactly at θ = 0 the distribution sits on
        // a cosine maximum and the first derivative vanishes
        let s = C64::from(1.0 / 2f64.sqrt());
        let u = array![[s, s], [s, -s]];
        let ch_generic = crate::models::ghz_emitter_at(delta, 0.4);
        let chx = ch_generic.photon_rotate(&u).unwrap();
        let cfi_x = photocount_cfi_joint(&chx, &plus(), t, &u).unwrap();
        let tf = t as f64;
        assert!(
            (cfi_x - tf * tf * delta * delta).abs() < 1e-8,
            "X-basis CFI {cfi_x}"
        );
        // without the final system measurement the record is insensitive
        let cfi_rad = photocount_cfi(&chx, &plus(), t).unwrap();
        assert!(cfi_rad.abs() < 1e-10);
    }

    #[test]
    fn derivative_matches_fidelity_curvature() {
        // 8(1 - |<Ψ(θ)|Ψ(θ+ε)>|)/ε^2 agrees with the analytic QFI
        let kappa: f64 = 0.6;
        let dt = 0.05;
        let mut l = zeros(2, 2);
        l[(0, 1)] = C64::from(kappa.sqrt());
        let mut drive = zeros(2, 2);
        drive[(0, 1)] = C64::from(0.4);
        drive[(1, 0)] = C64::from(0.4);
        let mut dh = zeros(2, 2);
        dh[(0, 0)] = C64::from(0.5);
        dh[(1, 1)] = C64::from(-0.5);
        let build = |theta: f64| {
            let model = LindbladModel::new(
                &drive + &dh.mapv(|z| z * theta),
                vec![l.clone()],
                dh.clone(),
                vec![zeros(2, 2)],
            )
            .unwrap();
            crate::lindblad::discretize(&model, dt, crate::lindblad::DiscretizeMode::ExactIsometry)
                .unwrap()
                .channel
        };
        let psi0 = plus();
        let t = 6;
        let f_analytic = pure_qfi_brute(&build(0.0), &psi0, t).unwrap();
        let eps = 1e-4;
        let sp = full_state(&build(eps), &psi0, t).unwrap();
        let s0 = full_state(&build(0.0), &psi0, t).unwrap();
        let fid = linalg::vdot(&s0.amplitudes, &sp.amplitudes).norm();
        let f_fd = 8.0 * (1.0 - fid) / (eps * eps);
        assert!(
            ((f_analytic - f_fd) / f_analytic.max(1e-12)).abs() < 1e-4,
            "{f_analytic} vs {f_fd}"
        );
    }

    #[test]
    fn tilted_reduces_to_liouvillian_on_diagonal() {
        let mut l = zeros(2, 2);
        l[(0, 1)] = C64::from(0.8);
        let mut h = zeros(2, 2);
        h[(0, 1)] = C64::new(0.2, 0.1);
        h[(1, 0)] = C64::new(0.2, -0.1);
        let model =
            LindbladModel::new(h.clone(), vec![l.clone()], h, vec![l]).unwrap();
        let tilt = tilted_liouvillian(&model, 0.0, 0.0);
        let liouv = crate::lindblad::build_liouvillian(&model);
        assert!(linalg::max_abs(&(&tilt.matrix - liouv.matrix())) < 1e-12);
    }

    #[test]
    fn molmer_zero_for_theta_independent_model() {
        let mut l = zeros(2, 2);
        l[(0, 1)] = C64::from(0.8);
        let model = LindbladModel::new(zeros(2, 2), vec![l], zeros(2, 2), vec![zeros(2, 2)])
            .unwrap();
        let rho0 = eye(2).mapv(|z| z * 0.5);
        let (f, err) = molmer_qfi(&model, &rho0, 3.0, 1e-3).unwrap();
        assert!(f.abs() < 1e-6 + 10.0 * err);
    }

    #[test]
    fn molmer_slope_matches_transfer_rate() {
        let model = crate::models::random_lindblad_model(2, 1, 6, false);
        // dt -> 0 extrapolation of the transfer-matrix rate
        let rate_of = |dt: f64| {
            let ch = crate::lindblad::discretize(
                &model,
                dt,
                crate::lindblad::DiscretizeMode::ExactIsometry,
            )
            .unwrap()
            .channel;
            let sp = crate::spectral::spectral_decompose(
                &ch.transfer_matrix(),
                crate::spectral::DEFAULT_PERIPHERAL_TOL,
            )
            .unwrap();
            crate::qfi::asymptotic_rate(&ch, &sp, dt).unwrap().rate()
        };
        let (r1, r2, r4) = (rate_of(1e-2), rate_of(5e-3), rate_of(2.5e-3));
        let mps = (4.0 * (2.0 * r4 - r2) - (2.0 * r2 - r1)) / 3.0;
        let rho0 = eye(2).mapv(|z| z * 0.5);
        let (f1, _) = molmer_qfi(&model, &rho0, 30.0, 1e-3).unwrap();
        let (f2, _) = molmer_qfi(&model, &rho0, 40.0, 1e-3).unwrap();
        let slope = (f2 - f1) / 10.0;
        assert!(
            ((slope - mps) / mps).abs() < 1e-4,
            "molmer slope {slope} vs transfer rate {mps}"
        );
    }

    #[test]
    fn memory_guards_fire() {
        let ch = ghz_channel(0.3);
        let psi = plus();
        assert!(matches!(
            full_state(&ch, &psi, 30),
            Err(Error::MemoryGuard(_, _))
        ));
        assert!(matches!(
            radiation_qfi_brute(&ch, &psi, 15),
            Err(Error::MemoryGuard(_, _))
        ));
        let _ = vec_op(&eye(1));
    }
}
