//! Brute-force oracle: a discretised bath diagonalised exactly.
//!
//! The coupled system of `N + 1` oscillators has the symmetric coupling
//! matrix
//!
//! ```text
//! A00 = W^2 + sum w_i^2 mu_i / m,   A0i = -w_i^2 sqrt(mu_i / m),   Aii = w_i^2
//! ```
//!
//! whose eigenpairs give the moment sums directly. This is the independent
//! check of every continuum-limit formula: no response functions, no
//! principal values, just a dense eigensolve.
//!
//! Mass-conserving discretisation: each bin's integrated mass sits at the
//! bin midpoint, which preserves the total-mass and diagonal-entry sum
//! rules exactly.

use crate::error::{Error, Result};
use crate::particle::{thermal_coth, ParticleParams};
use crate::spectral::SpectralDensity;

/// A concrete bath of `N` oscillators.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteBath {
    /// Oscillator frequencies, strictly increasing.
    pub freqs: Vec<f64>,
    /// Oscillator masses (bin-integrated `mu`), nonnegative.
    pub masses: Vec<f64>,
    pub particle: ParticleParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Uniform,
    Log,
}

/// Default lower edge for densities whose mass diverges at zero frequency.
pub const DEFAULT_OMEGA_MIN_FACTOR: f64 = 1e-3;

/// Bins `[band.0, band.1]` into `n` intervals, assigning each bin's exact
/// integrated mass to its midpoint frequency.
pub fn discretize_with_band(
    env: &SpectralDensity,
    particle: &ParticleParams,
    n: usize,
    strategy: Strategy,
    band: (f64, f64),
) -> Result<FiniteBath> {
    if n < 1 {
        return Err(Error::Domain("need at least one bin".into()));
    }
    let (lo, hi) = band;
    if !(hi > lo) || !(lo >= 0.0) {
        return Err(Error::Domain(format!("bad discretisation band [{lo}, {hi}]")));
    }
    if lo == 0.0 {
        if let SpectralDensity::OhmicSharp { eta, .. } | SpectralDensity::Drude { eta, .. } = *env {
            if eta > 0.0 {
                return Err(Error::Domain(
                    "mass is non-integrable at omega = 0; use a positive lower edge".into(),
                ));
            }
        }
    }
    if strategy == Strategy::Log && lo <= 0.0 {
        return Err(Error::Domain("log binning needs a positive lower edge".into()));
    }

    let edge = |i: usize| -> f64 {
        let f = i as f64 / n as f64;
        match strategy {
            Strategy::Uniform => lo + f * (hi - lo),
            Strategy::Log => lo * (hi / lo).powf(f),
        }
    };
    let mut freqs = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (edge(i), edge(i + 1));
        freqs.push(0.5 * (a + b));
        masses.push(env.mass_integral(a, b)?);
    }
    Ok(FiniteBath { freqs, masses, particle: *particle })
}

/// Discretisation over the environment's natural band: lower edge
/// `1e-3 * Omega` (the ohmic mass diverges at zero), upper edge at the
/// cutoff or grid end.
pub fn discretize(
    env: &SpectralDensity,
    particle: &ParticleParams,
    n: usize,
    strategy: Strategy,
) -> Result<FiniteBath> {
    let lo = DEFAULT_OMEGA_MIN_FACTOR * particle.omega;
    let hi = match *env {
        SpectralDensity::OhmicSharp { omega_c, .. } => omega_c,
        SpectralDensity::Drude { omega_c, .. } => 50.0 * omega_c.max(particle.omega),
        SpectralDensity::RcCircuit { resistance, capacitance, .. } => {
            50.0 / (resistance * capacitance)
        }
        SpectralDensity::Tabulated { ref grid } => grid.last().unwrap().0,
    };
    let lo = match *env {
        SpectralDensity::Tabulated { ref grid } => grid[0].0.max(lo.min(grid[0].0 + 1e-12)),
        _ => lo,
    };
    discretize_with_band(env, particle, n, strategy, (lo, hi))
}

/// Symmetric coupling matrix, stored column-major (it is symmetric, so the
/// layout only matters to the eigensolver).
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl CouplingMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.dim + i]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }
}

/// Assembles the `(N+1) x (N+1)` coupling matrix of the bath.
pub fn build_matrix(bath: &FiniteBath) -> Result<CouplingMatrix> {
    let n = bath.freqs.len();
    if bath.masses.len() != n {
        return Err(Error::Domain("freqs and masses must have equal length".into()));
    }
    for w in bath.freqs.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Domain("bath frequencies must be strictly increasing".into()));
        }
    }
    for (&w, &mu) in bath.freqs.iter().zip(&bath.masses) {
        if !(w > 0.0) || mu < 0.0 || !mu.is_finite() {
            return Err(Error::Domain(format!("invalid bath oscillator (w = {w}, mu = {mu})")));
        }
    }
    let m = bath.particle.mass;
    let dim = n + 1;
    let mut data = vec![0.0; dim * dim];
    let mut diag0 = bath.particle.omega * bath.particle.omega;
    for (i, (&w, &mu)) in bath.freqs.iter().zip(&bath.masses).enumerate() {
        let w2 = w * w;
        diag0 += w2 * mu / m;
        let c = -w2 * (mu / m).sqrt();
        data[(i + 1) * dim] = c; // A[0, i+1]
        data[i + 1] = c; // A[i+1, 0]
        data[(i + 1) * dim + i + 1] = w2;
    }
    data[0] = diag0;
    Ok(CouplingMatrix { dim, data })
}

/// Eigenvalues and particle weights of the coupling matrix.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    /// `nu_j^2`, ascending.
    pub nu_sq: Vec<f64>,
    /// `(0|U_j)^2`: squared first components of the orthonormal eigenvectors.
    pub weights: Vec<f64>,
}

/// Full symmetric eigendecomposition (LAPACK: Householder tridiagonalisation
/// followed by MRRR on the tridiagonal form).
///
/// Only the first component of each eigenvector is kept. For `uplo = 'L'`
/// every Householder reflector of `dsytrd` has `v[0] = 0` and therefore
/// fixes `e_0`, so the first row of the tridiagonal eigenvector matrix
/// equals the first row of the full-matrix one.
pub fn decompose(matrix: &CouplingMatrix) -> Result<ModeDecomposition> {
    let n = matrix.dim;
    let mut a = matrix.data.clone();
    let (nu_sq, first_row) = lapack::sym_eig_first_row(n, &mut a)
        .map_err(|code| Error::ModelInconsistency(format!("LAPACK failure, info = {code}")))?;
    for (&v, &w) in nu_sq.iter().zip(&first_row) {
        if !(v > 0.0) {
            return Err(Error::ModelInconsistency(format!(
                "non-positive eigenvalue {v}: the discretised system is not positive definite"
            )));
        }
        if !w.is_finite() {
            return Err(Error::ModelInconsistency("non-finite eigenvector component".into()));
        }
    }
    let weights = first_row.iter().map(|&c| c * c).collect();
    Ok(ModeDecomposition { nu_sq, weights })
}

/// Direct weighted mode sums for `<q^2>` and `<p^2>` at temperature `T`.
pub fn exact_moments(
    modes: &ModeDecomposition,
    particle: &ParticleParams,
    temperature: f64,
) -> Result<(f64, f64)> {
    if temperature < 0.0 || !temperature.is_finite() {
        return Err(Error::Domain(format!("temperature must be >= 0, got {temperature}")));
    }
    let mut q2 = 0.0;
    let mut p2 = 0.0;
    for (&nu2, &w) in modes.nu_sq.iter().zip(&modes.weights) {
        let nu = nu2.sqrt();
        let c = thermal_coth(nu, temperature, particle);
        q2 += w * particle.hbar / (2.0 * particle.mass * nu) * c;
        p2 += w * particle.mass * particle.hbar * nu / 2.0 * c;
    }
    Ok((q2, p2))
}

mod lapack {
    //! Minimal FFI onto the system LAPACK (provided by openblas).

    use std::os::raw::c_char;

    #[link(name = "openblas")]
    extern "C" {
        fn dsytrd_(
            uplo: *const c_char,
            n: *const i32,
            a: *mut f64,
            lda: *const i32,
            d: *mut f64,
            e: *mut f64,
            tau: *mut f64,
            work: *mut f64,
            lwork: *const i32,
            info: *mut i32,
        );
        fn dstemr_(
            jobz: *const c_char,
            range: *const c_char,
            n: *const i32,
            d: *mut f64,
            e: *mut f64,
            vl: *const f64,
            vu: *const f64,
            il: *const i32,
            iu: *const i32,
            m: *mut i32,
            w: *mut f64,
            z: *mut f64,
            ldz: *const i32,
            nzc: *const i32,
            isuppz: *mut i32,
            tryrac: *mut i32,
            work: *mut f64,
            lwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
    }

    /// All eigenvalues (ascending) plus the first component of each
    /// orthonormal eigenvector of the symmetric matrix `a` (column-major,
    /// n x n; destroyed).
    pub fn sym_eig_first_row(n: usize, a: &mut [f64]) -> std::result::Result<(Vec<f64>, Vec<f64>), i32> {
        assert_eq!(a.len(), n * n);
        if n == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        if n == 1 {
            return Ok((vec![a[0]], vec![1.0]));
        }
        let nn = n as i32;
        let uplo = b'L' as c_char;
        let mut info = 0i32;

        let mut d = vec![0.0f64; n];
        let mut e = vec![0.0f64; n]; // dstemr wants length n
        let mut tau = vec![0.0f64; n - 1];
        let m1 = -1i32;
        let mut wk = [0.0f64];
        unsafe {
            dsytrd_(&uplo, &nn, a.as_mut_ptr(), &nn, d.as_mut_ptr(), e.as_mut_ptr(), tau.as_mut_ptr(), wk.as_mut_ptr(), &m1, &mut info);
        }
        if info != 0 {
            return Err(info);
        }
        let lwork = wk[0] as i32;
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        unsafe {
            dsytrd_(&uplo, &nn, a.as_mut_ptr(), &nn, d.as_mut_ptr(), e.as_mut_ptr(), tau.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info);
        }
        if info != 0 {
            return Err(info);
        }

        let (jobz, range) = (b'V' as c_char, b'A' as c_char);
        let mut m_found = 0i32;
        let mut w = vec![0.0f64; n];
        let mut z = vec![0.0f64; n * n];
        let mut isuppz = vec![0i32; 2 * n];
        let mut tryrac = 1i32;
        let (vl, vu) = (0.0f64, 0.0f64);
        let (il, iu) = (1i32, nn);
        let (mut wk, mut iwk) = ([0.0f64], [0i32]);
        unsafe {
            dstemr_(&jobz, &range, &nn, d.as_mut_ptr(), e.as_mut_ptr(), &vl, &vu, &il, &iu, &mut m_found, w.as_mut_ptr(), z.as_mut_ptr(), &nn, &nn, isuppz.as_mut_ptr(), &mut tryrac, wk.as_mut_ptr(), &m1, iwk.as_mut_ptr(), &m1, &mut info);
        }
        if info != 0 {
            return Err(info);
        }
        let lwork = wk[0] as i32;
        let liwork = iwk[0];
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        let mut iwork = vec![0i32; liwork.max(1) as usize];
        unsafe {
            dstemr_(&jobz, &range, &nn, d.as_mut_ptr(), e.as_mut_ptr(), &vl, &vu, &il, &iu, &mut m_found, w.as_mut_ptr(), z.as_mut_ptr(), &nn, &nn, isuppz.as_mut_ptr(), &mut tryrac, work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info);
        }
        if info != 0 {
            return Err(info);
        }
        if m_found as usize != n {
            return Err(-1000 - m_found);
        }
        let first_row = (0..n).map(|j| z[j * n]).collect();
        Ok((w, first_row))
    }
}
