//! Concrete physical models: the boundary time crystal, the GHZ emitter, the
//! collective-spin population monitor, and random channel generators.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::lindblad::LindbladModel;
use crate::linalg::{self, CVec, Mat};

/// Collective spin operators on the symmetric (Dicke) subspace of N qubits,
/// dimension N + 1, ordered from M = S down to M = -S.
#[derive(Debug, Clone)]
pub struct CollectiveSpinBasis {
    pub n: usize,
    pub dim: usize,
    pub sx: Mat,
    pub sy: Mat,
    pub sz: Mat,
    pub sminus: Mat,
}

impl CollectiveSpinBasis {
    pub fn new(n: usize) -> Self {
        let s = n as f64 / 2.0;
        let dim = n + 1;
        let m_of = |k: usize| s - k as f64;
        let mut sp = linalg::zeros(dim, dim);
        for k in 1..dim {
            let m = m_of(k);
            sp[(k - 1, k)] = C64::from((s * (s + 1.0) - m * (m + 1.0)).sqrt());
        }
        let sm = linalg::dagger(&sp);
        let sx = (&sp + &sm).mapv(|z| z * 0.5);
        let sy = (&sp - &sm).mapv(|z| z * C64::new(0.0, -0.5));
        let mut sz = linalg::zeros(dim, dim);
        for k in 0..dim {
            sz[(k, k)] = C64::from(m_of(k));
        }
        Self {
            n,
            dim,
            sx,
            sy,
            sz,
            sminus: sm,
        }
    }
}

/// Boundary time crystal: H = ω S^x, L = sqrt(κ/S) S^- on the symmetric
/// subspace; the estimated parameter is ω.
#[derive(Debug, Clone)]
pub struct BtcModel {
    pub n: usize,
    pub omega: f64,
    pub kappa: f64,
    pub basis: CollectiveSpinBasis,
    pub model: LindbladModel,
}

pub fn btc_model(n: usize, omega: f64, kappa: f64) -> Result<BtcModel> {
    if n < 1 || omega <= 0.0 || kappa <= 0.0 {
        return Err(Error::DimensionMismatch(
            "btc model needs n >= 1 and positive rates".into(),
        ));
    }
    let basis = CollectiveSpinBasis::new(n);
    let s = n as f64 / 2.0;
    let h = basis.sx.mapv(|z| z * omega);
    let l = basis.sminus.mapv(|z| z * C64::from((kappa / s).sqrt()));
    let dh = basis.sx.clone();
    let dl = linalg::zeros(basis.dim, basis.dim);
    let model = LindbladModel::new(h, vec![l], dh, vec![dl])?;
    Ok(BtcModel {
        n,
        omega,
        kappa,
        basis,
        model,
    })
}

impl BtcModel {
    /// Steady state from the kernel of the Liouvillian (the fixed point of
    /// the exact channel e^{L dt} for every dt).
    pub fn liouvillian_steady_state(&self) -> Result<Mat> {
        let l = crate::lindblad::build_liouvillian(&self.model);
        let (w, v) = linalg::eig_pairs(l.matrix())?;
        let mut best = 0;
        for (i, z) in w.iter().enumerate() {
            if z.norm() < w[best].norm() {
                best = i;
            }
        }
        let rho = linalg::unvec_op(&v.column(best).to_owned(), self.basis.dim);
        let (rho, _) = linalg::hermitize(&rho);
        let tr = linalg::trace(&rho);
        Ok(rho.mapv(|z| z / tr))
    }

    /// Closed-form steady state ρ_ss ∝ η η† with
    /// η = sum_j (2 i κ S^- / (ω N))^j; the series terminates since S^- is
    /// nilpotent on the Dicke ladder.
    pub fn reference_steady_state(&self) -> Mat {
        let dim = self.basis.dim;
        let fac = C64::new(0.0, 2.0 * self.kappa / (self.omega * self.n as f64));
        let mut eta = linalg::zeros(dim, dim);
        let mut term = linalg::eye(dim);
        for _ in 0..=self.n {
            eta += &term;
            term = self.basis.sminus.dot(&term).mapv(|z| z * fac);
        }
        let rho = eta.dot(&linalg::dagger(&eta));
        let tr = linalg::trace(&rho);
        rho.mapv(|z| z / tr)
    }
}

/// GHZ emitter: rotate the system by e^{-i θ (δ/2) Z}, then copy it onto the
/// fresh photon with a CNOT. One step maps the branch phases apart by δθ, so
/// the emitted state is (|0...0> + e^{-iTδθ}|1...1>)/sqrt(2) from |+> and the
/// joint QFI is exactly T^2 δ^2.
pub fn ghz_emitter(delta: f64) -> KrausChannel {
    ghz_emitter_at(delta, 0.0)
}

/// GHZ emitter linearized at a general working point θ; the channel picks up
/// branch phases e^{∓iθδ/2}. Useful for basis-rotated photocounting, whose
/// classical FI has a removable zero exactly at θ = 0.
pub fn ghz_emitter_at(delta: f64, theta: f64) -> KrausChannel {
    let mut k0 = linalg::zeros(2, 2);
    k0[(0, 0)] = C64::from_polar(1.0, -theta * delta / 2.0);
    let mut k1 = linalg::zeros(2, 2);
    k1[(1, 1)] = C64::from_polar(1.0, theta * delta / 2.0);
    // dK_m = K_m (-i δ/2 Z)
    let dk0 = k0.mapv(|z| z * C64::new(0.0, -delta / 2.0));
    let dk1 = k1.mapv(|z| z * C64::new(0.0, delta / 2.0));
    KrausChannel::new(vec![k0, k1], vec![dk0, dk1]).expect("projector channel is an isometry")
}

/// N-qubit population monitor: H = ω Σ_i h_i with single-site h = E Z (so
/// every computational product state is an energy eigenstate), monitored by
/// L_i = sqrt(κ) |-E><-E|_i on each site. Full 2^N space.
#[derive(Debug, Clone)]
pub struct SpinMonitorModel {
    pub n: usize,
    pub omega: f64,
    pub kappa: f64,
    pub e: f64,
    pub model: LindbladModel,
    /// Eigenvalues of Σ h_i per computational basis state.
    pub energies: Vec<f64>,
}

pub const SPIN_MONITOR_MAX_N: usize = 6;

pub fn spin_monitor_model(n: usize, omega: f64, kappa: f64, e: f64) -> Result<SpinMonitorModel> {
    if n == 0 || n > SPIN_MONITOR_MAX_N {
        return Err(Error::MemoryGuard(1 << n, 1 << SPIN_MONITOR_MAX_N));
    }
    let dim = 1usize << n;
    let mut energies = vec![0.0f64; dim];
    for (x, en) in energies.iter_mut().enumerate() {
        for i in 0..n {
            *en += if (x >> i) & 1 == 0 { e } else { -e };
        }
    }
    let mut h = linalg::zeros(dim, dim);
    let mut dh = linalg::zeros(dim, dim);
    for x in 0..dim {
        h[(x, x)] = C64::from(omega * energies[x]);
        dh[(x, x)] = C64::from(energies[x]);
    }
    let mut jumps = Vec::with_capacity(n);
    let mut d_jumps = Vec::with_capacity(n);
    for i in 0..n {
        let mut l = linalg::zeros(dim, dim);
        for x in 0..dim {
            if (x >> i) & 1 == 1 {
                l[(x, x)] = C64::from(kappa.sqrt());
            }
        }
        jumps.push(l);
        d_jumps.push(linalg::zeros(dim, dim));
    }
    let model = LindbladModel::new(h, jumps, dh, d_jumps)?;
    Ok(SpinMonitorModel {
        n,
        omega,
        kappa,
        e,
        model,
        energies,
    })
}

impl SpinMonitorModel {
    pub fn e_max(&self) -> f64 {
        self.n as f64 * self.e
    }

    pub fn e_min(&self) -> f64 {
        -(self.n as f64) * self.e
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Gate-composed channel for one step dt: the exact sensing phase
    /// e^{-i ω dt Σh_i} followed by an exact per-site weak measurement of the
    /// |-E> population with click probability p = κ dt. Exactly an isometry,
    /// keeps every energy projector exactly stationary, and reproduces the
    /// Lindblad generator as dt -> 0. The emitted qudit is the N-bit click
    /// pattern (d = 2^N).
    pub fn exact_channel(&self, dt: f64) -> Result<KrausChannel> {
        if dt <= 0.0 {
            return Err(Error::NonPositiveStep(dt));
        }
        let p = self.kappa * dt;
        if p >= 1.0 {
            return Err(Error::StepTooLarge(p));
        }
        let dim = self.dim();
        let mut kraus = Vec::with_capacity(dim);
        let mut d_kraus = Vec::with_capacity(dim);
        for pattern in 0..dim {
            let mut k = linalg::zeros(dim, dim);
            for x in 0..dim {
                // click amplitude per site: |-E> populated and clicked
                // -> sqrt(p); populated, no click -> sqrt(1-p); ground, no
                // click -> 1; ground with click -> 0
                let mut amp = 1.0;
                let mut allowed = true;
                for i in 0..self.n {
                    let minus = (x >> i) & 1 == 1;
                    let click = (pattern >> i) & 1 == 1;
                    match (minus, click) {
                        (true, true) => amp *= p.sqrt(),
                        (true, false) => amp *= (1.0 - p).sqrt(),
                        (false, false) => {}
                        (false, true) => {
                            allowed = false;
                            break;
                        }
                    }
                }
                if allowed && amp != 0.0 {
                    let phase = C64::from_polar(1.0, -self.omega * dt * self.energies[x]);
                    k[(x, x)] = phase * amp;
                }
            }
            let mut dk = linalg::zeros(dim, dim);
            for x in 0..dim {
                dk[(x, x)] = k[(x, x)] * C64::new(0.0, -dt * self.energies[x]);
            }
            kraus.push(k);
            d_kraus.push(dk);
        }
        KrausChannel::new(kraus, d_kraus)
    }

    /// GHZ superposition of the extremal energy product states.
    pub fn ghz_extremal_state(&self) -> CVec {
        let dim = self.dim();
        let mut psi: CVec = ndarray::Array1::zeros(dim);
        let a = C64::from(1.0 / 2f64.sqrt());
        psi[0] = a; // all |+E>
        psi[dim - 1] = a; // all |-E>
        psi
    }

    /// Computational product state |x>, an eigenstate of Σ h_i.
    pub fn energy_eigenstate(&self, x: usize) -> CVec {
        let dim = self.dim();
        let mut psi: CVec = ndarray::Array1::zeros(dim);
        psi[x] = C64::from(1.0);
        psi
    }
}

/// Parameter encoding of [`random_channel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// K_m(θ) = K_m e^{-iθG} with a random Hermitian system generator.
    Hamiltonian,
    /// Photon-leg rotation dK_m = i Σ g_{m m'} K_{m'}.
    Photon,
    /// Both encodings combined.
    Mixed,
}

/// Random exact-isometry channel with a seeded θ-encoding: the Kraus blocks
/// come from the QR factorization of a complex Gaussian (D d) x D block.
pub fn random_channel(d_sys: usize, d_photon: usize, seed: u64, encoding: Encoding) -> KrausChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = d_sys * d_photon;
    let g = Mat::from_shape_fn((rows, d_sys), |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let q = thin_qr_orthonormal(&g);
    let kraus: Vec<Mat> = (0..d_photon)
        .map(|m| {
            Mat::from_shape_fn((d_sys, d_sys), |(i, j)| q[(m * d_sys + i, j)])
        })
        .collect();
    let mut d_kraus = vec![linalg::zeros(d_sys, d_sys); d_photon];
    if matches!(encoding, Encoding::Hamiltonian | Encoding::Mixed) {
        let raw = Mat::from_shape_fn((d_sys, d_sys), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let (gen, _) = linalg::hermitize(&raw);
        for (dk, k) in d_kraus.iter_mut().zip(&kraus) {
            *dk = &*dk + &k.dot(&gen.mapv(|z| z * C64::new(0.0, -1.0)));
        }
    }
    if matches!(encoding, Encoding::Photon | Encoding::Mixed) {
        let raw = Mat::from_shape_fn((d_photon, d_photon), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let (gen, _) = linalg::hermitize(&raw);
        for m in 0..d_photon {
            for mp in 0..d_photon {
                let coef = C64::new(0.0, 1.0) * gen[(m, mp)];
                if coef.norm_sqr() > 0.0 {
                    d_kraus[m] = &d_kraus[m] + &kraus[mp].mapv(|z| z * coef);
                }
            }
        }
    }
    KrausChannel::new(kraus, d_kraus).expect("orthonormalized block is an isometry")
}

/// Random mixed-unitary channel (unital, ρ_ss = 1/D) with a Hamiltonian
/// encoding; used where the Haar tilde identities are exact.
pub fn random_unital_channel(d_sys: usize, d_photon: usize, seed: u64) -> KrausChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<f64> = (0..d_photon).map(|_| rng.gen::<f64>() + 0.2).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    let raw = Mat::from_shape_fn((d_sys, d_sys), |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let (gen, _) = linalg::hermitize(&raw);
    let mut kraus = Vec::with_capacity(d_photon);
    let mut d_kraus = Vec::with_capacity(d_photon);
    for w in &weights {
        let g = Mat::from_shape_fn((d_sys, d_sys), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let u = thin_qr_orthonormal(&g);
        let k = u.mapv(|z| z * C64::from(w.sqrt()));
        d_kraus.push(k.dot(&gen.mapv(|z| z * C64::new(0.0, -1.0))));
        kraus.push(k);
    }
    KrausChannel::new(kraus, d_kraus).expect("mixed-unitary set is an isometry")
}

/// Random Lindblad model with Hermitian Hamiltonian encoding and jump
/// derivatives, for the tilted-formula cross-checks.
pub fn random_lindblad_model(
    d: usize,
    n_jumps: usize,
    seed: u64,
    jump_encoding: bool,
) -> LindbladModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut herm = |scale: f64| {
        let raw = Mat::from_shape_fn((d, d), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let (h, _) = linalg::hermitize(&raw);
        h.mapv(|z| z * scale)
    };
    let h = herm(1.0);
    let dh = herm(1.0);
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let mut jumps = Vec::new();
    let mut d_jumps = Vec::new();
    for _ in 0..n_jumps {
        let l = Mat::from_shape_fn((d, d), |_| {
            C64::new(rng2.gen::<f64>() - 0.5, rng2.gen::<f64>() - 0.5)
        });
        let dl = if jump_encoding {
            Mat::from_shape_fn((d, d), |_| {
                C64::new(rng2.gen::<f64>() - 0.5, rng2.gen::<f64>() - 0.5)
            })
            .mapv(|z| z * 0.3)
        } else {
            linalg::zeros(d, d)
        };
        jumps.push(l);
        d_jumps.push(dl);
    }
    LindbladModel::new(h, jumps, dh, d_jumps).expect("hermitized inputs")
}

/// Dephasing sensor H = θ Z/2, L = sqrt(κ) Z as a Lindblad model at θ = 0.
pub fn dephasing_sensor_model(kappa: f64) -> LindbladModel {
    let mut z = linalg::zeros(2, 2);
    z[(0, 0)] = C64::from(1.0);
    z[(1, 1)] = C64::from(-1.0);
    LindbladModel::new(
        linalg::zeros(2, 2),
        vec![z.mapv(|v| v * C64::from(kappa.sqrt()))],
        z.mapv(|v| v * 0.5),
        vec![linalg::zeros(2, 2)],
    )
    .expect("valid sensor model")
}

/// Orthonormalizes the columns of a tall matrix (modified Gram-Schmidt).
fn thin_qr_orthonormal(a: &Mat) -> Mat {
    let (rows, cols) = (a.nrows(), a.ncols());
    let mut q = a.clone();
    for j in 0..cols {
        for i in 0..j {
            let qi = q.column(i).to_owned();
            let ov = linalg::vdot(&qi, &q.column(j).to_owned());
            let upd = &q.column(j).to_owned() - &qi.mapv(|z| z * ov);
            q.column_mut(j).assign(&upd);
        }
        let n = q
            .column(j)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let col = q.column(j).mapv(|z| z / C64::from(n));
        q.column_mut(j).assign(&col);
    }
    let _ = rows;
    q
}
