//! QFI of channels with multiple steady states: initial-state-dependent
//! variables, the stationary Γ matrix, and optimization of the quadratic
//! coefficient over initial states.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{KrausChannel, SiteMap};
use crate::contraction::exact_qfi_curve;
use crate::error::{Error, Result};
use crate::linalg::{self, CVec, Mat};
use crate::qfi::QfiCurve;
use crate::spectral::TransferSpectrum;

/// Stationary-sector matrix Γ^μ_ν = <<J^μ| sum_m dK_m ⊗ conj(K_m) |Ψ_ν>>.
#[derive(Debug, Clone)]
pub struct GammaMatrix {
    pub dim: usize,
    pub entries: Mat,
}

impl GammaMatrix {
    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|m| self.entries[(m, m)]).collect()
    }
}

/// The long-range (initial-state-dependent) contraction variables.
#[derive(Debug, Clone)]
pub struct LongRangeVariables {
    pub alpha: C64,
    pub betas: Vec<C64>,
    pub gamma: C64,
    /// Stationary-sector β_∞ = sum_{μν} c_μ Γ^μ_ν conj(Γ^ν_μ).
    pub beta_inf: C64,
    /// |γ|^2 = |sum_μ c_μ Γ^μ_μ|^2 over the stationary sector.
    pub gamma_sq: f64,
    /// Peripheral overlaps c_{Δμ}, ordered as `spectrum.peripheral`.
    pub c: Vec<C64>,
}

/// Split of the quadratic T^2 coefficient β_∞ - |γ|^2 into diagonal and
/// off-diagonal parts.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticCoefficient {
    /// sum_μ c_μ (1 - c_μ) |Γ^μ_μ|^2.
    pub diagonal: f64,
    /// sum_{μ≠ν} c_μ (Γ^μ_ν conj(Γ^ν_μ) - c_ν Γ^μ_μ conj(Γ^ν_ν)).
    pub off_diagonal: f64,
    pub total: f64,
}

/// Initial-state optimization outcome.
#[derive(Debug, Clone)]
pub struct OptimizedState {
    pub state: CVec,
    pub c: Vec<f64>,
    pub value: f64,
    /// Box-relaxed maximum over c ∈ [0,1]^{d_ss}; not necessarily reachable
    /// by a physical state.
    pub box_value: f64,
    pub converged: bool,
    pub gradient_norm: f64,
    pub restarts: usize,
}

/// Γ^μ_ν over the stationary (phase-zero) peripheral basis.
pub fn gamma_matrix(ch: &KrausChannel, spectrum: &TransferSpectrum) -> Result<GammaMatrix> {
    let stat = spectrum.stationary();
    if stat.is_empty() {
        return Err(Error::NoStationaryModes);
    }
    let k = stat.len();
    let mut entries = linalg::zeros(k, k);
    for (mu, jm) in stat.iter().enumerate() {
        for (nu, pn) in stat.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (km, dkm) in ch.kraus().iter().zip(ch.d_kraus()) {
                acc += linalg::hs_inner(
                    &jm.left,
                    &dkm.dot(&pn.right).dot(&linalg::dagger(km)),
                );
            }
            entries[(mu, nu)] = acc;
        }
    }
    Ok(GammaMatrix { dim: k, entries })
}

/// Long-range variables: single (Δ, μ) sums with c_{Δμ}
/// weights and J/Ψ caps; β_τ evaluated by iterated channel application so the
/// e^{iΔτ} phases of oscillating modes enter exactly.
pub fn long_range_variables(
    ch: &KrausChannel,
    spectrum: &TransferSpectrum,
    rho_in: &Mat,
    n_beta: usize,
) -> Result<LongRangeVariables> {
    let c = crate::spectral::overlap_coefficients(spectrum, rho_in)?;
    let bup = SiteMap::deriv_ket(ch);
    let a_site = SiteMap::deriv_both(ch);

    let mut alpha = C64::new(0.0, 0.0);
    let mut gamma = C64::new(0.0, 0.0);
    let mut betas = vec![C64::new(0.0, 0.0); n_beta];
    for (cm, mode) in c.iter().zip(spectrum.peripheral.iter()) {
        alpha += *cm * linalg::hs_inner(&mode.left, &a_site.apply(&mode.right));
        gamma += *cm * linalg::hs_inner(&mode.left, &bup.apply(&mode.right));
        // β_τ chain: Bdn |Ψ>>, then τ transfer applications, closed by <<J|Bup
        let mut v = crate::qfi::b_operator(ch, &mode.right);
        for beta in betas.iter_mut() {
            *beta += *cm * linalg::hs_inner(&mode.left, &bup.apply(&v));
            v = ch.apply(&v);
        }
    }

    // stationary-sector closed forms
    let g = gamma_matrix(ch, spectrum)?;
    let stat_idx: Vec<usize> = spectrum
        .peripheral
        .iter()
        .enumerate()
        .filter(|(_, m)| m.phase.abs() < 1e-6)
        .map(|(i, _)| i)
        .collect();
    let cs: Vec<C64> = stat_idx.iter().map(|&i| c[i]).collect();
    let mut beta_inf = C64::new(0.0, 0.0);
    let mut gsum = C64::new(0.0, 0.0);
    for (m, cm) in cs.iter().enumerate() {
        gsum += *cm * g.entries[(m, m)];
        for n in 0..g.dim {
            beta_inf += *cm * g.entries[(m, n)] * g.entries[(n, m)].conj();
        }
    }
    Ok(LongRangeVariables {
        alpha,
        betas,
        gamma,
        beta_inf,
        gamma_sq: gsum.norm_sqr(),
        c,
    })
}

/// Exact finite-time QFI curve from an arbitrary initial density matrix;
/// valid for any peripheral structure. The value at every T equals the
/// brute-force joint QFI from a purification of `rho_in`.
pub fn long_range_qfi_curve(
    ch: &KrausChannel,
    _spectrum: &TransferSpectrum,
    rho_in: &Mat,
    t_max: usize,
    dt: f64,
) -> Result<QfiCurve> {
    linalg::check_density_matrix(rho_in, 1e-9)?;
    let exact = exact_qfi_curve(ch, rho_in, t_max);
    Ok(QfiCurve {
        steps: (1..=t_max).collect(),
        times: (1..=t_max).map(|t| t as f64 * dt).collect(),
        values: exact.values,
        term_alpha: exact.term_diag,
        term_beta: exact.term_cross,
        term_gamma: exact.term_overlap,
    })
}

/// β_∞ - |γ|^2 for a stationary coefficient vector, split into the diagonal
/// and off-diagonal parts.
pub fn quadratic_coefficient(c: &[f64], g: &GammaMatrix) -> Result<QuadraticCoefficient> {
    if c.len() != g.dim {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a {}-dimensional stationary sector",
            c.len(),
            g.dim
        )));
    }
    let mut diagonal = 0.0;
    let mut off = C64::new(0.0, 0.0);
    for m in 0..g.dim {
        diagonal += c[m] * (1.0 - c[m]) * g.entries[(m, m)].norm_sqr();
        for n in 0..g.dim {
            if n != m {
                off += C64::from(c[m])
                    * (g.entries[(m, n)] * g.entries[(n, m)].conj()
                        - C64::from(c[n]) * g.entries[(m, m)] * g.entries[(n, n)].conj());
            }
        }
    }
    Ok(QuadraticCoefficient {
        diagonal,
        off_diagonal: off.re,
        total: diagonal + off.re,
    })
}

fn coefficients_of_state(psi: &CVec, stats: &[&crate::spectral::PeripheralMode]) -> Vec<f64> {
    stats
        .iter()
        .map(|m| {
            let jpsi = m.left.dot(psi);
            linalg::vdot(psi, &jpsi).re
        })
        .collect()
}

/// Maximizes the quadratic coefficient over pure initial states by projected
/// gradient ascent with random restarts; also reports the box-relaxed
/// maximum over c ∈ [0,1]^{d_ss} as a diagnostic upper bound.
pub fn optimize_initial_state(
    ch: &KrausChannel,
    spectrum: &TransferSpectrum,
    restarts: usize,
    seed: u64,
) -> Result<OptimizedState> {
    let g = gamma_matrix(ch, spectrum)?;
    let stats = spectrum.stationary();
    let d = ch.dim_system();
    let k = stats.len();
    if k < 2 {
        // nothing to optimize: the steady state realizes the only mode
        let rho = spectrum
            .steady_state
            .clone()
            .unwrap_or_else(|| linalg::eye(d).mapv(|z| z / C64::from(d as f64)));
        let psi = dominant_eigvec(&rho)?;
        return Ok(OptimizedState {
            c: coefficients_of_state(&psi, &stats),
            state: psi,
            value: 0.0,
            box_value: 0.0,
            converged: true,
            gradient_norm: 0.0,
            restarts: 0,
        });
    }

    // a_μ = sum_ν Γ^μ_ν conj(Γ^ν_μ), g_μ = Γ^μ_μ
    let a: Vec<C64> = (0..k)
        .map(|m| {
            (0..k)
                .map(|n| g.entries[(m, n)] * g.entries[(n, m)].conj())
                .sum()
        })
        .collect();
    let gd: Vec<C64> = g.diagonal();

    let objective = |c: &[f64]| -> f64 {
        let lin: f64 = c.iter().zip(&a).map(|(cm, am)| cm * am.re).sum();
        let gs: C64 = c.iter().zip(&gd).map(|(cm, gm)| C64::from(*cm) * gm).sum();
        lin - gs.norm_sqr()
    };
    let grad_c = |c: &[f64]| -> Vec<f64> {
        let gs: C64 = c.iter().zip(&gd).map(|(cm, gm)| C64::from(*cm) * gm).sum();
        (0..k)
            .map(|m| a[m].re - 2.0 * (gs.conj() * gd[m]).re)
            .collect()
    };

    let runs: Vec<(CVec, f64, bool, f64)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(r as u64 + 1)));
            let mut psi: CVec = ndarray::Array1::from_shape_fn(d, |_| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            normalize(&mut psi);
            let mut step = 0.5;
            let mut val = {
                let c = coefficients_of_state(&psi, &stats);
                objective(&c)
            };
            let mut gn = f64::INFINITY;
            let mut converged = false;
            for _ in 0..400 {
                let c = coefficients_of_state(&psi, &stats);
                let dc = grad_c(&c);
                // chain rule: grad_ψ* = sum_μ (dq/dc_μ) J^μ ψ, tangent-projected
                let mut grad: CVec = ndarray::Array1::zeros(d);
                for (m, mode) in stats.iter().enumerate() {
                    grad = grad + mode.left.dot(&psi).mapv(|z| z * dc[m]);
                }
                let overlap = linalg::vdot(&psi, &grad);
                grad = grad - psi.mapv(|z| z * overlap);
                gn = grad.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if gn < 1e-11 {
                    converged = true;
                    break;
                }
                // backtracking ascent
                let mut accepted = false;
                for _ in 0..30 {
                    let mut trial = &psi + &grad.mapv(|z| z * step);
                    normalize(&mut trial);
                    let tv = objective(&coefficients_of_state(&trial, &stats));
                    if tv > val + 1e-16 {
                        psi = trial;
                        val = tv;
                        step *= 1.3;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    converged = gn < 1e-7;
                    break;
                }
            }
            (psi, val, converged, gn)
        })
        .collect();

    let best = runs
        .into_iter()
        .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
        .unwrap();
    let box_value = box_maximum(&objective, &grad_c, k, seed);
    let c = coefficients_of_state(&best.0, &stats);
    Ok(OptimizedState {
        state: best.0,
        c,
        value: best.1,
        box_value,
        converged: best.2,
        gradient_norm: best.3,
        restarts: restarts.max(1),
    })
}

fn normalize(psi: &mut CVec) {
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.mapv_inplace(|z| z / C64::from(n));
}

fn dominant_eigvec(rho: &Mat) -> Result<CVec> {
    let (w, v) = linalg::eigh_pairs(rho)?;
    let mut best = 0;
    for (i, x) in w.iter().enumerate() {
        if *x > w[best] {
            best = i;
        }
    }
    Ok(v.column(best).to_owned())
}

fn box_maximum(
    objective: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    k: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0f1);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..32 {
        let mut c: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let mut step = 0.25;
        let mut val = objective(&c);
        for _ in 0..500 {
            let gr = grad(&c);
            let mut trial: Vec<f64> = c
                .iter()
                .zip(&gr)
                .map(|(x, g)| (x + step * g).clamp(0.0, 1.0))
                .collect();
            let tv = objective(&trial);
            if tv > val + 1e-15 {
                c = std::mem::take(&mut trial);
                val = tv;
                step *= 1.2;
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        best = best.max(val);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::KrausChannel;
    use crate::linalg::zeros;
    use crate::spectral::{spectral_decompose, DEFAULT_PERIPHERAL_TOL};

    fn ghz_channel(delta: f64) -> KrausChannel {
        let mut k0 = zeros(2, 2);
        k0[(0, 0)] = C64::from(1.0);
        let mut k1 = zeros(2, 2);
        k1[(1, 1)] = C64::from(1.0);
        let dk0 = k0.mapv(|z| z * C64::new(0.0, -delta / 2.0));
        let dk1 = k1.mapv(|z| z * C64::new(0.0, delta / 2.0));
        KrausChannel::new(vec![k0, k1], vec![dk0, dk1]).unwrap()
    }

    #[test]
    fn ghz_gamma_matrix_structure() {
        let delta = 0.7;
        let ch = ghz_channel(delta);
        let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
        let g = gamma_matrix(&ch, &sp).unwrap();
        assert_eq!(g.dim, 2);
        // diag(± i δ/2) up to mode ordering; off-diagonals vanish
        let mut diags: Vec<C64> = g.diagonal();
        diags.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((diags[0] - C64::new(0.0, -delta / 2.0)).norm() < 1e-12);
        assert!((diags[1] - C64::new(0.0, delta / 2.0)).norm() < 1e-12);
        assert!(g.entries[(0, 1)].norm() < 1e-12);
        assert!(g.entries[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn quadratic_coefficient_closed_forms() {
        // c = e_μ with diagonal Γ -> 0; c = (1/2, 1/2) with Γ = diag(g, -g) -> g^2
        let gv = 0.35;
        let mut entries = zeros(2, 2);
        entries[(0, 0)] = C64::from(gv);
        entries[(1, 1)] = C64::from(-gv);
        let g = GammaMatrix { dim: 2, entries };
        let q1 = quadratic_coefficient(&[1.0, 0.0], &g).unwrap();
        assert!(q1.total.abs() < 1e-14);
        let q2 = quadratic_coefficient(&[0.5, 0.5], &g).unwrap();
        assert!((q2.total - gv * gv).abs() < 1e-14);
        let q0 = quadratic_coefficient(&[0.0, 0.0], &g).unwrap();
        assert!(q0.total.abs() < 1e-14);
    }

    #[test]
    fn ghz_balanced_state_curve() {
        let delta = 0.6;
        let ch = ghz_channel(delta);
        let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
        let mut plus = zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                plus[(i, j)] = C64::from(0.5);
            }
        }
        let curve = long_range_qfi_curve(&ch, &sp, &plus, 10, 1.0).unwrap();
        for (t, f) in curve.steps.iter().zip(&curve.values) {
            let tf = *t as f64;
            assert!((f - tf * tf * delta * delta).abs() < 1e-10);
        }
        // variables reduce: beta_inf - |gamma|^2 equals the quadratic coefficient
        let vars = long_range_variables(&ch, &sp, &plus, 8).unwrap();
        let g = gamma_matrix(&ch, &sp).unwrap();
        let c = crate::spectral::overlap_coefficients(&sp, &plus).unwrap();
        let cs: Vec<f64> = c.iter().map(|z| z.re).collect();
        let q = quadratic_coefficient(&cs, &g).unwrap();
        assert!(((vars.beta_inf.re - vars.gamma_sq) - q.total).abs() < 1e-12);
        // quadratic coefficient of the curve itself is delta^2/4 * 4
        assert!((q.total * 4.0 - delta * delta).abs() < 1e-12);
    }

    #[test]
    fn quadratic_coefficient_matches_curve_fit() {
        // block-diagonal channel with two gapped blocks: the T^2 coefficient
        // of F(T) over a late window equals 4(beta_inf - |gamma|^2)
        let a = crate::models::random_channel(2, 2, 81, crate::models::Encoding::Hamiltonian);
        let b = crate::models::random_channel(2, 2, 82, crate::models::Encoding::Hamiltonian);
        let ch = a.direct_sum(&b).unwrap();
        let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
        assert_eq!(sp.d_ss(), 2);
        let mut rho_in = zeros(4, 4);
        // an equal mixture across the two blocks with intrablock purity
        for (w, base) in [(0.5, 0usize), (0.5, 2)] {
            let v = [C64::from(0.8), C64::new(0.48, 0.36)];
            for i in 0..2 {
                for j in 0..2 {
                    rho_in[(base + i, base + j)] = C64::from(w) * v[i] * v[j].conj();
                }
            }
        }
        let tau = sp.tau_star();
        let t_lo = (5.0 * tau).ceil() as usize;
        let t_hi = (10.0 * tau).ceil() as usize;
        let curve = long_range_qfi_curve(&ch, &sp, &rho_in, t_hi, 1.0).unwrap();
        // quadratic fit over the window
        let (mut s0, mut s1, mut s2, mut s3, mut s4) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
        let (mut b0, mut b1, mut b2) = (0.0f64, 0.0, 0.0);
        for t in t_lo..=t_hi {
            let x = t as f64;
            let y = curve.values[t - 1];
            s0 += 1.0;
            s1 += x;
            s2 += x * x;
            s3 += x * x * x;
            s4 += x * x * x * x;
            b0 += y;
            b1 += x * y;
            b2 += x * x * y;
        }
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let m = [[s0, s1, s2], [s1, s2, s3], [s2, s3, s4]];
        let mut mq = m;
        mq[0][2] = b0;
        mq[1][2] = b1;
        mq[2][2] = b2;
        let quad_fit = det3(mq) / det3(m);
        let vars = long_range_variables(&ch, &sp, &rho_in, 4).unwrap();
        let quad_pred = 4.0 * (vars.beta_inf.re - vars.gamma_sq);
        assert!(
            ((quad_fit - quad_pred) / quad_pred).abs() < 1e-3,
            "fit {quad_fit} vs predicted {quad_pred}"
        );
    }

    #[test]
    fn optimizer_finds_balanced_superposition() {
        let delta = 0.8;
        let ch = ghz_channel(delta);
        let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
        let opt = optimize_initial_state(&ch, &sp, 8, 42).unwrap();
        // analytic max of c(1-c)g^2 at c = 1/2: (delta/2)^2 * ... = delta^2/4
        let expect = delta * delta / 4.0;
        assert!(
            (opt.value - expect).abs() < 1e-6 * expect.max(1.0),
            "value {} vs {}",
            opt.value,
            expect
        );
        assert!((opt.c[0] - 0.5).abs() < 1e-4);
        // physicality: returned c re-derives from the returned state
        let stats = sp.stationary();
        let c2 = coefficients_of_state(&opt.state, &stats);
        for (x, y) in opt.c.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(opt.box_value >= opt.value - 1e-9);
    }
}
