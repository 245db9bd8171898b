//! Cross-module invariants: oracle equivalence on random channels, trace
//! preservation, QFI additivity, spectral power consistency, and the
//! Fisher-information hierarchy.

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use radqfi::channel::{KrausChannel, SiteMap};
use radqfi::contraction::exact_qfi_curve;
use radqfi::lindblad::{discretize, DiscretizeMode};
use radqfi::linalg::{self, CVec, Mat};
use radqfi::models::{random_channel, random_lindblad_model, Encoding};
use radqfi::oracle;
use radqfi::qfi;
use radqfi::spectral::{spectral_decompose, DEFAULT_PERIPHERAL_TOL};

fn random_density(d: usize, seed: u64) -> Mat {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = Mat::from_shape_fn((d, d), |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let rho = linalg::dagger(&g).dot(&g);
    let tr = linalg::trace(&rho);
    rho.mapv(|z| z / tr)
}

#[test]
fn discretized_channels_preserve_trace() {
    let model = random_lindblad_model(3, 2, 4, true);
    let ch = discretize(&model, 0.01, DiscretizeMode::ExactIsometry)
        .unwrap()
        .channel;
    for seed in 0..1000 {
        let rho = random_density(3, seed);
        let out = ch.apply(&rho);
        assert!((linalg::trace(&out).re - 1.0).abs() < 1e-12);
        assert!(linalg::trace(&out).im.abs() < 1e-12);
    }
}

#[test]
fn formula_matches_brute_force_on_random_channels() {
    // the master property: F(T) from the transfer contraction equals the
    // brute-force QFI of the purified-boundary state
    for (seed, d, p) in [(1u64, 2, 2), (2, 3, 2), (3, 2, 3), (4, 3, 3)] {
        let ch = random_channel(d, p, seed, Encoding::Mixed);
        let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
        let rho = sp.unique_steady_state().unwrap().clone();
        let curve = qfi::qfi_curve(&ch, &sp, 8, 1.0).unwrap();
        let che = ch.extend_with_ancilla(d);
        let psi0 = linalg::purify(&rho).unwrap();
        for t in 1..=8 {
            let brute = oracle::pure_qfi_brute(&che, &psi0, t).unwrap();
            let rel = (curve.values[t - 1] - brute).abs() / brute.abs().max(1e-12);
            assert!(rel < 1e-10, "seed {seed} T {t}: rel {rel}");
        }
    }
}

#[test]
fn exact_curve_matches_brute_force_from_any_state() {
    for seed in 10..14 {
        let ch = random_channel(2, 2, seed, Encoding::Hamiltonian);
        let rho = random_density(2, seed * 7 + 1);
        let curve = exact_qfi_curve(&ch, &rho, 6);
        let che = ch.extend_with_ancilla(2);
        let psi0 = linalg::purify(&rho).unwrap();
        for t in 1..=6 {
            let brute = oracle::pure_qfi_brute(&che, &psi0, t).unwrap();
            let rel = (curve.values[t - 1] - brute).abs() / brute.abs().max(1e-12);
            assert!(rel < 1e-10, "seed {seed} T {t}: rel {rel}");
        }
    }
}

#[test]
fn qfi_additivity_on_product_channels() {
    // tensor product of two independent channels: F = F_1 + F_2
    let a = random_channel(2, 2, 21, Encoding::Hamiltonian);
    let b = random_channel(2, 2, 22, Encoding::Hamiltonian);
    let kron_ch = {
        let mut kraus = Vec::new();
        let mut d_kraus = Vec::new();
        for (ka, dka) in a.kraus().iter().zip(a.d_kraus()) {
            for (kb, dkb) in b.kraus().iter().zip(b.d_kraus()) {
                kraus.push(linalg::kron(ka, kb));
                d_kraus.push(&linalg::kron(dka, kb) + &linalg::kron(ka, dkb));
            }
        }
        KrausChannel::new(kraus, d_kraus).unwrap()
    };
    let rho_a = random_density(2, 31);
    let rho_b = random_density(2, 32);
    let f_a = exact_qfi_curve(&a, &rho_a, 6).values;
    let f_b = exact_qfi_curve(&b, &rho_b, 6).values;
    let f_ab = exact_qfi_curve(&kron_ch, &linalg::kron(&rho_a, &rho_b), 6).values;
    for t in 0..6 {
        let sum = f_a[t] + f_b[t];
        assert!(
            (f_ab[t] - sum).abs() < 1e-9 * sum.abs().max(1.0),
            "T {}: {} vs {}",
            t + 1,
            f_ab[t],
            sum
        );
    }
}

#[test]
fn transfer_power_consistency() {
    // iterated application of T agrees with the spectral reconstruction
    let ch = random_channel(2, 2, 41, Encoding::Mixed);
    let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
    let x = random_density(2, 5);
    let mut iterated = x.clone();
    for tau in 1..=50usize {
        iterated = ch.apply(&iterated);
        let mut rec = linalg::zeros(2, 2);
        for m in &sp.peripheral {
            let lam = C64::from_polar(1.0, m.phase).powu(tau as u32);
            let ov = linalg::hs_inner(&m.left, &x);
            rec = rec + m.right.mapv(|z| z * (lam * ov));
        }
        for m in &sp.decaying {
            let lam = m.value.powu(tau as u32);
            let ov = linalg::hs_inner(&m.left, &x);
            rec = rec + m.right.mapv(|z| z * (lam * ov));
        }
        assert!(
            linalg::max_abs(&(&rec - &iterated)) < 1e-8,
            "tau {tau}: {}",
            linalg::max_abs(&(&rec - &iterated))
        );
    }
}

#[test]
fn beta_decay_bounded_by_gap_envelope() {
    let ch = random_channel(2, 2, 51, Encoding::Hamiltonian);
    let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
    let vars = qfi::qfi_variables(&ch, &sp, 60).unwrap();
    let rate = qfi::asymptotic_rate(&ch, &sp, 1.0).unwrap();
    let g2 = vars.gamma.norm_sqr();
    let c: f64 = rate.k_coeffs.iter().map(|k| k.norm()).sum();
    let lam2 = 1.0 - sp.gap;
    for (tau, beta) in vars.betas.iter().enumerate() {
        let bound = c * lam2.powi(tau as i32) + 1e-12;
        assert!(
            (beta - C64::from(g2)).norm() <= bound * (1.0 + 1e-9),
            "tau {tau}"
        );
    }
}

#[test]
fn fisher_information_hierarchy_small_instances() {
    let mut rng_seed = 100u64;
    for _ in 0..6 {
        rng_seed += 1;
        let ch = random_channel(2, 2, rng_seed, Encoding::Mixed);
        let psi0 = {
            let mut v: CVec = ndarray::Array1::zeros(2);
            v[0] = C64::from(0.6);
            v[1] = C64::new(0.64, 0.48);
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.mapv(|z| z / C64::from(n))
        };
        let t = 5;
        let full = oracle::pure_qfi_brute(&ch, &psi0, t).unwrap();
        let rad = oracle::radiation_qfi_brute(&ch, &psi0, t).unwrap();
        let cfi = oracle::photocount_cfi(&ch, &psi0, t).unwrap();
        assert!(cfi <= rad + 1e-6, "seed {rng_seed}: cfi {cfi} rad {rad}");
        assert!(rad <= full + 1e-6, "seed {rng_seed}: rad {rad} full {full}");
    }
}

#[test]
fn haar_average_slope_matches_radiation_slope() {
    // the joint and radiation QFI grow at the same asymptotic rate
    let ch = radqfi::models::random_unital_channel(2, 2, 61);
    let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
    let t = (30.0 * sp.tau_star()).ceil() as usize;
    let curve = qfi::qfi_curve(&ch, &sp, t, 1.0).unwrap();
    let slope_curve = curve.values[t - 1] - curve.values[t - 2];
    let slope_haar = radqfi::haar::haar_joint_qfi_exact(&ch, t)
        - radqfi::haar::haar_joint_qfi_exact(&ch, t - 1);
    assert!(
        ((slope_haar - slope_curve) / slope_curve).abs() < 1e-6,
        "haar slope {slope_haar} vs curve slope {slope_curve} at T = {t}"
    );
}

#[test]
fn photocount_parallelizable_site_maps_agree() {
    // SiteMap photon insertion against a directly built superoperator
    let ch = random_channel(2, 3, 71, Encoding::Photon);
    let g = {
        let mut g = linalg::zeros(3, 3);
        g[(0, 1)] = C64::new(0.3, 0.2);
        g[(1, 0)] = C64::new(0.3, -0.2);
        g[(2, 2)] = C64::from(1.5);
        g
    };
    let site = SiteMap::photon_insertion(&g, ch.kraus(), ch.kraus());
    let x = random_density(2, 8);
    let mut direct = linalg::zeros(2, 2);
    for m in 0..3 {
        for mp in 0..3 {
            direct = direct
                + ch.kraus()[m]
                    .dot(&x)
                    .dot(&linalg::dagger(&ch.kraus()[mp]))
                    .mapv(|z| z * g[(mp, m)]);
        }
    }
    assert!(linalg::max_abs(&(&site.apply(&x) - &direct)) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn prop_gauge_invariance_of_variables(seed in 0u64..10_000, angle in 0.01f64..1.5) {
        let ch = random_channel(2, 2, seed, Encoding::Hamiltonian);
        let sp = spectral_decompose(&ch.transfer_matrix(), DEFAULT_PERIPHERAL_TOL).unwrap();
        if let Ok(rho) = sp.unique_steady_state() {
            let (a0, g0, b0) = qfi::variables_for_boundary(&ch, rho, 6);
            let mut u = linalg::zeros(2, 2);
            u[(0, 0)] = C64::from(angle.cos());
            u[(0, 1)] = C64::from(angle.sin());
            u[(1, 0)] = C64::from(-angle.sin());
            u[(1, 1)] = C64::from(angle.cos());
            let chr = ch.photon_rotate(&u).unwrap();
            let (a1, g1, b1) = qfi::variables_for_boundary(&chr, rho, 6);
            prop_assert!((a0 - a1).abs() < 1e-10 * (1.0 + a0.abs()));
            prop_assert!((g0 - g1).norm() < 1e-10 * (1.0 + g0.norm()));
            for (x, y) in b0.iter().zip(b1.iter()) {
                prop_assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()));
            }
        }
    }

    #[test]
    fn prop_full_state_norm_and_orthogonality(seed in 0u64..10_000) {
        let ch = random_channel(2, 2, seed, Encoding::Mixed);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed ^ 0xf00d);
        let psi0 = oracle::haar_state(2, &mut rng);
        let st = oracle::full_state(&ch, &psi0, 5).unwrap();
        let n: f64 = st.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((n - 1.0).abs() < 1e-10);
        let ov = linalg::vdot(&st.amplitudes, &st.d_amplitudes);
        prop_assert!(ov.re.abs() < 1e-9);
    }
}
