//! Two-lead Aharonov–Bohm probe of the transverse state.
//!
//! A particle travelling in a harmonic waveguide is tapped by two
//! point-contact leads at transverse positions `+-x`. The tunnel-junction
//! scattering problem reduces to channel sums over the transverse
//! oscillator eigenfunctions; the fringe pattern as a function of the
//! flux phase reads off `sigma(x, -x)` and hence the transverse coherence
//! length `xi`.
//!
//! Conventions for the scattering solution:
//! - `lambda_n = k_n / kappa`; evanescent channels take the decaying
//!   branch `+i |lambda_n|`, which makes the aggregates complex.
//! - the closed forms for `s1`, `s2` use `R`, `conj(Z)` in the numerators
//!   and `|R|^2 + |Z|^2` in the denominator, reducing to the real
//!   expressions when every included channel propagates.

use num_complex::Complex64;

use crate::equilibrium::GaussianDensityMatrix;
use crate::error::{Error, Result};
use crate::finite_bath::FiniteBath;
use crate::particle::{thermal_coth, ParticleParams};

/// Hard ceiling on the transverse order; the normalised recurrence is
/// stable far beyond any physical use, this only bounds the cost.
const CHI_MAX_ORDER: usize = 5_000_000;
/// Relative settling tolerance for the channel aggregates.
const CHANNEL_SUM_TOL: f64 = 1e-8;
/// Evanescent channels included before the first convergence check.
const EVANESCENT_START: usize = 20;
/// Give up once the evanescent tail exceeds this count.
const EVANESCENT_BUDGET: usize = 600_000;

/// Tunnel junction between the waveguide and the two leads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    /// Half-separation `x` of the lead contact points.
    pub half_separation: f64,
    /// Coupling strength `alpha` (real).
    pub alpha: f64,
    /// Contact width `epsilon`.
    pub epsilon: f64,
    /// Incident longitudinal wavevector `k`.
    pub k: f64,
    /// Incident transverse channel index `n'`.
    pub n_incident: usize,
    /// Initial channel truncation; the solver extends it as needed.
    pub n_channels: usize,
    pub particle: ParticleParams,
}

impl Junction {
    pub fn validate(&self) -> Result<()> {
        if !self.half_separation.is_finite() || !self.alpha.is_finite() {
            return Err(Error::Domain("x and alpha must be finite".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.k > 0.0) {
            return Err(Error::Domain(format!("k must be positive, got {}", self.k)));
        }
        if self.n_channels > 0 && self.n_incident >= self.n_channels {
            return Err(Error::Domain(format!(
                "incident channel {} outside truncation {}",
                self.n_incident, self.n_channels
            )));
        }
        Ok(())
    }

    /// `alpha epsilon^(3/2)`, the coupling that enters every formula.
    fn g(&self) -> f64 {
        self.alpha * self.epsilon.powf(1.5)
    }
}

/// Normalised oscillator eigenfunctions `chi_0..=chi_nmax` at `q`, by the
/// three-term recurrence on the weighted functions (never the bare
/// polynomials, which overflow near order 300).
pub fn chi_all(n_max: usize, q: f64, particle: &ParticleParams) -> Result<Vec<f64>> {
    if n_max > CHI_MAX_ORDER {
        return Err(Error::Domain(format!("transverse order {n_max} beyond the overflow guard")));
    }
    let scale = (particle.mass * particle.omega / particle.hbar).sqrt();
    let z = q * scale;
    let prefactor = scale.sqrt();
    let mut out = Vec::with_capacity(n_max + 1);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * z * z).exp();
    out.push(prefactor * h0);
    if n_max == 0 {
        return Ok(out);
    }
    let h1 = 2f64.sqrt() * z * h0;
    out.push(prefactor * h1);
    let (mut prev, mut cur) = (h0, h1);
    for n in 1..n_max {
        let np1 = (n + 1) as f64;
        let next = (2.0 / np1).sqrt() * z * cur - (n as f64 / np1).sqrt() * prev;
        out.push(prefactor * next);
        prev = cur;
        cur = next;
    }
    Ok(out)
}

/// `chi_n(q)`.
pub fn chi(n: usize, q: f64, particle: &ParticleParams) -> Result<f64> {
    Ok(*chi_all(n, q, particle)?.last().unwrap())
}

/// Longitudinal wavevectors: `kappa` in the leads (always real) and `k_n`
/// per channel, positive-imaginary for evanescent ones.
#[derive(Debug, Clone)]
pub struct ChannelWavevectors {
    pub kappa: f64,
    pub k_n: Vec<Complex64>,
}

pub fn channel_wavevectors(junction: &Junction, n_max: usize) -> Result<ChannelWavevectors> {
    junction.validate()?;
    let p = &junction.particle;
    let e_inc = p.energy_level(junction.n_incident);
    let kappa = (junction.k * junction.k + 2.0 * p.mass * e_inc / (p.hbar * p.hbar)).sqrt();
    let k_n = (0..=n_max)
        .map(|n| {
            let disc = junction.k * junction.k
                + 2.0 * p.mass * (e_inc - p.energy_level(n)) / (p.hbar * p.hbar);
            if disc >= 0.0 {
                Complex64::new(disc.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, (-disc).sqrt())
            }
        })
        .collect();
    Ok(ChannelWavevectors { kappa, k_n })
}

/// Solved junction: channel coefficients, lead amplitudes, aggregates.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    /// Transmission per channel (reported set: open channels + 20).
    pub t: Vec<Complex64>,
    /// Reflection per channel; `t_n = delta_nn' + r_n` by construction.
    pub r: Vec<Complex64>,
    pub s1: Complex64,
    pub s2: Complex64,
    /// Aggregate `R`; complex once evanescent channels contribute.
    pub big_r: Complex64,
    pub big_z: Complex64,
    /// `lambda_n = k_n / kappa` for the reported channels.
    pub lambdas: Vec<Complex64>,
    pub k_n: Vec<Complex64>,
    pub kappa: f64,
    /// Total channels summed into the aggregates.
    pub channels_used: usize,
    /// Last relative change of the aggregates at the final doubling.
    pub tail_estimate: f64,
}

/// Solves the tunnel-junction linear system.
///
/// Channel truncation: all open channels plus 20 evanescent ones, doubling
/// the evanescent tail until the aggregates settle to 1e-8 relative. A
/// tail that stagnates above tolerance is reported as a truncation error
/// carrying the tail estimate.
pub fn scattering_solve(junction: &Junction) -> Result<ScatteringSolution> {
    junction.validate()?;
    let p = &junction.particle;
    let x = junction.half_separation;
    let e_inc = p.energy_level(junction.n_incident);
    let long_energy = p.hbar * p.hbar * junction.k * junction.k / (2.0 * p.mass);

    // open channels: E_n <= E_incident + longitudinal energy
    let n_open = {
        let nf = ((e_inc + long_energy) / (p.hbar * p.omega) - 0.5).floor();
        let mut n = nf.max(0.0) as usize;
        while p.energy_level(n + 1) <= e_inc + long_energy {
            n += 1;
        }
        n + 1
    };

    let beta = junction.g() * p.mass / (p.hbar * p.hbar);
    let kappa = (junction.k * junction.k + 2.0 * p.mass * e_inc / (p.hbar * p.hbar)).sqrt();
    let c_aggr = beta * beta / (kappa * kappa);

    let mut n_ev = EVANESCENT_START.max(junction.n_channels.saturating_sub(n_open));
    let mut prev: Option<(Complex64, Complex64)> = None;
    let mut last_delta = f64::INFINITY;
    let mut stagnant = 0u32;
    let (big_r, big_z, channels_used, tail_estimate) = if junction.alpha == 0.0 {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), n_open + n_ev, 0.0)
    } else {
        loop {
            let n_total = n_open + n_ev;
            let (sxx, sxm) = aggregate_sums(junction, kappa, n_total - 1)?;
            let r_now = Complex64::new(1.0, 0.0) + c_aggr * sxx;
            let z_now = c_aggr * sxm;
            if let Some((r_prev, z_prev)) = prev {
                // changes measured against the aggregate scale: Z far below
                // R cannot move the amplitudes, however it wiggles
                let scale = r_now.norm().max(z_now.norm());
                let dr = (r_now - r_prev).norm() / scale;
                let dz = (z_now - z_prev).norm() / scale;
                let delta = dr.max(dz);
                if delta <= CHANNEL_SUM_TOL {
                    break (r_now, z_now, n_total, delta);
                }
                if delta > 0.5 * last_delta {
                    stagnant += 1;
                    if stagnant >= 3 {
                        return Err(Error::Truncation { tail_estimate: delta });
                    }
                } else {
                    stagnant = 0;
                }
                last_delta = delta;
            }
            prev = Some((r_now, z_now));
            n_ev *= 2;
            if n_ev > EVANESCENT_BUDGET {
                return Err(Error::Truncation { tail_estimate: last_delta });
            }
        }
    };

    let den = big_r.norm_sqr() + big_z.norm_sqr();
    if den == 0.0 {
        return Err(Error::ResonanceSingular);
    }

    let chi_x = chi_all(n_open + EVANESCENT_START, x, p)?;
    let sign = |n: usize| if n % 2 == 0 { 1.0 } else { -1.0 };
    let chi_inc_x = chi_x[junction.n_incident];
    let chi_inc_mx = sign(junction.n_incident) * chi_inc_x;

    let pref = Complex64::new(0.0, -beta / kappa); // g m / (i hbar^2 kappa)
    let s1 = pref * (big_r * chi_inc_x - big_z * chi_inc_mx) / den;
    let s2 = pref * (big_r * chi_inc_mx - big_z.conj() * chi_inc_x) / den;

    // back-substitution through the channel equations
    let n_report = n_open + EVANESCENT_START;
    let waves = channel_wavevectors(junction, n_report - 1)?;
    let mut t = Vec::with_capacity(n_report);
    let mut r = Vec::with_capacity(n_report);
    let mut lambdas = Vec::with_capacity(n_report);
    for n in 0..n_report {
        let k_n = waves.k_n[n];
        lambdas.push(k_n / kappa);
        let r_n = if junction.alpha == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            if k_n.norm() < 1e-12 * kappa {
                return Err(Error::ModelInconsistency(format!("channel {n} sits at threshold")));
            }
            beta / (Complex64::i() * k_n) * (s1 * chi_x[n] + s2 * sign(n) * chi_x[n])
        };
        let t_n = if n == junction.n_incident { r_n + 1.0 } else { r_n };
        r.push(r_n);
        t.push(t_n);
    }

    Ok(ScatteringSolution {
        t,
        r,
        s1,
        s2,
        big_r,
        big_z,
        lambdas,
        k_n: waves.k_n,
        kappa,
        channels_used,
        tail_estimate,
    })
}

/// One pass of the channel sums `sum 1/lambda_n chi_n(x) chi_n(+-x)` up to
/// `n_max`, with `chi_n(-x) = (-1)^n chi_n(x)`.
fn aggregate_sums(junction: &Junction, kappa: f64, n_max: usize) -> Result<(Complex64, Complex64)> {
    let p = &junction.particle;
    let x = junction.half_separation;
    let e_inc = p.energy_level(junction.n_incident);
    let chi_x = chi_all(n_max, x, p)?;
    let mut sxx = Complex64::new(0.0, 0.0);
    let mut sxm = Complex64::new(0.0, 0.0);
    for (n, &cx) in chi_x.iter().enumerate() {
        let disc =
            junction.k * junction.k + 2.0 * p.mass * (e_inc - p.energy_level(n)) / (p.hbar * p.hbar);
        let inv_lambda = if disc >= 0.0 {
            let kn = disc.sqrt();
            if kn < 1e-12 * kappa {
                return Err(Error::ModelInconsistency(format!("channel {n} sits at threshold")));
            }
            Complex64::new(kappa / kn, 0.0)
        } else {
            // lambda = +i |lambda|: decaying branch
            Complex64::new(0.0, -kappa / (-disc).sqrt())
        };
        let cm = if n % 2 == 0 { cx } else { -cx };
        sxx += inv_lambda * cx * cx;
        sxm += inv_lambda * cx * cm;
    }
    Ok((sxx, sxm))
}

/// High-energy factorised transmission
/// `tau = (alpha eps m / i hbar k) * sqrt(eps) / (1 + (alpha eps m / hbar k)^2)`.
pub fn high_energy_tau(junction: &Junction) -> Complex64 {
    let p = &junction.particle;
    let a = junction.alpha * junction.epsilon * p.mass / (p.hbar * junction.k);
    Complex64::new(0.0, -a) * junction.epsilon.sqrt() / (1.0 + a * a)
}

/// Transverse coherence length from the effective parameters:
/// `xi^2 = (hbar / 4 m~ W) sinh(hbar W / k T~)`, infinite at `T~ = 0`.
///
/// This is the exact consequence of the canonical Gaussian state; it is
/// algebraically identical to the moment form
/// `xi^2 = hbar^2 <q^2> / (4 <p^2><q^2> - hbar^2)`.
pub fn coherence_length(t_eff: f64, m_eff: f64, particle: &ParticleParams) -> Result<f64> {
    if t_eff < 0.0 || !(m_eff > 0.0) {
        return Err(Error::Domain(format!("need T~ >= 0 and m~ > 0, got ({t_eff}, {m_eff})")));
    }
    if t_eff == 0.0 {
        return Ok(f64::INFINITY);
    }
    let x = particle.hbar * particle.omega / (particle.kb * t_eff);
    let xi_sq = particle.hbar / (4.0 * m_eff * particle.omega) * x.sinh();
    Ok(xi_sq.sqrt())
}

/// The same length from the raw moments.
pub fn coherence_length_from_moments(q2: f64, p2: f64, particle: &ParticleParams) -> Result<f64> {
    if !(q2 > 0.0) || !(p2 > 0.0) {
        return Err(Error::Domain("moments must be positive".into()));
    }
    let h2 = particle.hbar * particle.hbar;
    let den = 4.0 * q2 * p2 - h2;
    if den <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((h2 * q2 / den).sqrt())
}

/// Fringe data on a phase grid.
#[derive(Debug, Clone)]
pub struct FringePattern {
    pub phi: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Probability into lead 1, `|tau|^2 sigma(x, x)`.
    pub p1: f64,
    /// Probability into lead 2, `|tau|^2 sigma(-x, -x)`.
    pub p2: f64,
    /// Normalised contrast `exp(-x^2 / 2 xi^2)`.
    pub contrast: f64,
    pub xi: f64,
}

/// `P(phi) = |tau|^2 [sigma(x,x) + sigma(-x,-x) + 2 sigma(x,-x) cos phi]`,
/// evaluated in the manifestly nonnegative factored form.
pub fn fringe_pattern(
    sigma: &GaussianDensityMatrix,
    junction: &Junction,
    tau: Complex64,
    phi_grid: &[f64],
) -> Result<FringePattern> {
    if phi_grid.len() < 2 {
        return Err(Error::Domain("phase grid needs at least two points".into()));
    }
    let x = junction.half_separation;
    let sxx = sigma.evaluate(x, x);
    let smm = sigma.evaluate(-x, -x);
    let t2 = tau.norm_sqr();
    let xi = sigma.coherence_length();
    let contrast = (-(x * x) / (2.0 * xi * xi)).exp(); // 1 when xi = inf
    let amp = t2 * (sxx + smm);
    let intensity = phi_grid.iter().map(|&phi| amp * (1.0 + contrast * phi.cos())).collect();
    Ok(FringePattern {
        phi: phi_grid.to_vec(),
        intensity,
        p1: t2 * sxx,
        p2: t2 * smm,
        contrast,
        xi,
    })
}

/// Flux-averaged contrast `C^2 = (<P^2> - <P>^2) / 2 P1 P2` sampled on a
/// 1024-point uniform grid over `[0, 2pi)`; exact to rounding for the
/// degree-2 trigonometric polynomial `P`. The variance is accumulated in
/// the centered two-pass form, which is the same quantity without the
/// catastrophic `<P^2> - <P>^2` cancellation at small contrast.
pub fn sampled_contrast(sigma: &GaussianDensityMatrix, x: f64) -> f64 {
    const N: usize = 1024;
    let sxx = sigma.evaluate(x, x);
    let smm = sigma.evaluate(-x, -x);
    let sxm = sigma.evaluate(x, -x);
    let p1 = sxx;
    let p2 = smm;
    let sample = |i: usize| {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / N as f64;
        sxx + smm + 2.0 * sxm * phi.cos()
    };
    let mean = (0..N).map(sample).sum::<f64>() / N as f64;
    let variance = (0..N)
        .map(|i| {
            let d = sample(i) - mean;
            d * d
        })
        .sum::<f64>()
        / N as f64;
    (variance / (2.0 * p1 * p2)).max(0.0).sqrt()
}

/// The two no-boundary-scattering ratios of longitudinal energy to the
/// coupling scales, with mean bath energies from the Bose factor.
#[derive(Debug, Clone, Copy)]
pub struct ValidityReport {
    /// `(p_z^2/2m) / (<q^2> sum mu_i w_i^2)`.
    pub ratio_static: f64,
    /// `(p_z^2/2m) / sqrt(<q^2> sum mu_i w_i^2 <eps_i>)`.
    pub ratio_fluctuation: f64,
    /// Both ratios at or above 100.
    pub pass: bool,
}

pub fn validity_check(
    junction: &Junction,
    bath: &FiniteBath,
    q2: f64,
    temperature: f64,
) -> Result<ValidityReport> {
    junction.validate()?;
    if temperature < 0.0 {
        return Err(Error::Domain("temperature must be >= 0".into()));
    }
    let p = &junction.particle;
    let lhs = p.hbar * p.hbar * junction.k * junction.k / (2.0 * p.mass);
    let mut static_sum = 0.0;
    let mut fluct_sum = 0.0;
    for (&w, &mu) in bath.freqs.iter().zip(&bath.masses) {
        let w2mu = mu * w * w;
        static_sum += w2mu;
        let mean_energy = 0.5 * p.hbar * w * thermal_coth(w, temperature, p);
        fluct_sum += w2mu * mean_energy;
    }
    let ratio_static = lhs / (q2 * static_sum);
    let ratio_fluctuation = lhs / (q2 * fluct_sum).sqrt();
    Ok(ValidityReport {
        ratio_static,
        ratio_fluctuation,
        pass: ratio_static >= 100.0 && ratio_fluctuation >= 100.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::density_matrix;
    use crate::quadrature;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn reduced() -> ParticleParams {
        ParticleParams::reduced()
    }

    fn junction(x: f64, alpha: f64, eps: f64, k: f64, n_inc: usize) -> Junction {
        Junction {
            half_separation: x,
            alpha,
            epsilon: eps,
            k,
            n_incident: n_inc,
            n_channels: 0,
            particle: reduced(),
        }
    }

    #[test]
    fn chi_ground_state_values() {
        let p = reduced();
        let c0 = chi(0, 0.0, &p).unwrap();
        assert!((c0 - std::f64::consts::PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(chi(1, 0.0, &p).unwrap(), 0.0);
        // parity
        for n in 0..6 {
            let plus = chi(n, 0.83, &p).unwrap();
            let minus = chi(n, -0.83, &p).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((plus - sign * minus).abs() < 1e-15);
        }
    }

    #[test]
    fn chi_matches_explicit_hermite_5() {
        // H5(z) = 32 z^5 - 160 z^3 + 120 z
        let p = reduced();
        for &z in &[0.3f64, 1.1, 2.7] {
            let h5 = 32.0 * z.powi(5) - 160.0 * z.powi(3) + 120.0 * z;
            let expect = std::f64::consts::PI.powf(-0.25) / (32.0 * 120.0f64).sqrt()
                * h5
                * (-0.5 * z * z).exp();
            let got = chi(5, z, &p).unwrap();
            assert!((got - expect).abs() < 1e-13 * expect.abs().max(1.0), "z={z}");
        }
    }

    #[test]
    fn chi_normalized_by_quadrature() {
        let p = reduced();
        for &n in &[0usize, 5, 20] {
            let l = (2.0 * n as f64 + 1.0).sqrt() + 12.0;
            let norm = quadrature::integrate(
                |q| {
                    let c = chi(n, q, &p).unwrap();
                    c * c
                },
                -l,
                l,
                1e-12,
                0.0,
                400_000,
            )
            .unwrap()
            .value;
            assert!((norm - 1.0).abs() < 1e-10, "n={n}: {norm}");
        }
    }

    #[test]
    fn chi_overflow_guard() {
        let p = reduced();
        assert!(chi_all(CHI_MAX_ORDER + 1, 0.0, &p).is_err());
        // stable far beyond naive Hermite polynomials
        let big = chi(5000, 0.7, &p).unwrap();
        assert!(big.is_finite() && big.abs() < 1.0);
    }

    #[test]
    fn wavevectors_basics() {
        let j = junction(0.5, 0.1, 0.1, 3.0, 2);
        let w = channel_wavevectors(&j, 20).unwrap();
        // n = n' gives k_n = k
        assert!((w.k_n[2].re - 3.0).abs() < 1e-14);
        assert_eq!(w.k_n[2].im, 0.0);
        // ground incident: kappa = sqrt(k^2 + m Omega / hbar) in reduced units
        let j0 = junction(0.5, 0.1, 0.1, 3.0, 0);
        let w0 = channel_wavevectors(&j0, 5).unwrap();
        assert!((w0.kappa - (9.0f64 + 1.0).sqrt()).abs() < 1e-14);
        // evanescent branch: positive imaginary
        let deep = w.k_n.last().unwrap();
        assert_eq!(deep.re, 0.0);
        assert!(deep.im > 0.0);
    }

    #[test]
    fn alpha_zero_is_trivial() {
        let j = junction(0.7, 0.0, 0.05, 4.0, 1);
        let sol = scattering_solve(&j).unwrap();
        assert_eq!(sol.s1, Complex64::new(0.0, 0.0));
        assert_eq!(sol.s2, Complex64::new(0.0, 0.0));
        assert_eq!(sol.big_r, Complex64::new(1.0, 0.0));
        assert_eq!(sol.big_z, Complex64::new(0.0, 0.0));
        for (n, (&t, &r)) in sol.t.iter().zip(&sol.r).enumerate() {
            assert_eq!(r, Complex64::new(0.0, 0.0));
            let expect = if n == 1 { 1.0 } else { 0.0 };
            assert_eq!(t, Complex64::new(expect, 0.0));
        }
    }

    #[test]
    fn continuity_identity_exact() {
        let j = junction(0.6, 0.02, 0.08, 5.0, 0);
        let sol = scattering_solve(&j).unwrap();
        for (n, (&t, &r)) in sol.t.iter().zip(&sol.r).enumerate() {
            let delta = if n == 0 { 1.0 } else { 0.0 };
            assert!((t - delta - r).norm() <= 1e-12, "channel {n}");
        }
        assert!(sol.tail_estimate <= CHANNEL_SUM_TOL);
    }

    #[test]
    fn high_energy_factorizes() {
        // longitudinal energy 1e4 times the incident transverse energy
        let k = 100.003;
        let j = junction(0.7, 0.2, 0.05, k, 0);
        let sol = scattering_solve(&j).unwrap();
        let p = reduced();
        let tau = high_energy_tau(&j);
        let c_x = chi(0, 0.7, &p).unwrap();
        let c_mx = chi(0, -0.7, &p).unwrap();
        let rel1 = (sol.s1 - tau * c_x).norm() / (tau * c_x).norm();
        let rel2 = (sol.s2 - tau * c_mx).norm() / (tau * c_mx).norm();
        assert!(rel1 < 5e-3, "s1 off by {rel1}");
        assert!(rel2 < 5e-3, "s2 off by {rel2}");
        // and the amplitude ratio matches |chi(x)/chi(-x)| = 1
        let ratio = sol.s1.norm() / sol.s2.norm();
        assert!((ratio - 1.0).abs() < 5e-3);
    }

    #[test]
    fn centered_leads_have_equal_amplitudes() {
        // x = 0 with even incident channel: Z = R - 1, s1 = s2
        let j = junction(0.0, 1e-3, 0.1, 3.0, 0);
        let sol = scattering_solve(&j).unwrap();
        assert!((sol.big_z - (sol.big_r - 1.0)).norm() <= 1e-15 * sol.big_r.norm());
        let rel = (sol.s1 - sol.s2).norm() / sol.s1.norm();
        assert!(rel < 1e-8, "s1 != s2 at x = 0: rel = {rel}");
    }

    #[test]
    fn strong_coupling_truncation_errors_out() {
        // aggregates cannot settle to 1e-8: the evanescent tail of R grows
        // logarithmically, so the solver must report truncation
        let j = junction(0.4, 5.0, 0.5, 2.1, 0);
        match scattering_solve(&j) {
            Err(Error::Truncation { tail_estimate }) => assert!(tail_estimate > 1e-8),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn coherence_length_limits() {
        let p = reduced();
        assert!(coherence_length(0.0, 1.0, &p).unwrap().is_infinite());
        assert!(coherence_length(-1.0, 1.0, &p).is_err());
        // pure state from moments
        assert!(coherence_length_from_moments(0.5, 0.5, &p).unwrap().is_infinite());
        // thermal scaling sanity: xi shrinks with temperature
        let xi_warm = coherence_length(1.0, 1.0, &p).unwrap();
        let xi_hot = coherence_length(5.0, 1.0, &p).unwrap();
        assert!(xi_hot < xi_warm);
    }

    #[test]
    fn fringe_centered_leads() {
        let dm = density_matrix(0.8, 0.9, &reduced()).unwrap();
        let j = junction(0.0, 0.1, 0.1, 5.0, 0);
        let grid: Vec<f64> = (0..64).map(|i| 2.0 * std::f64::consts::PI * i as f64 / 64.0).collect();
        let f = fringe_pattern(&dm, &j, Complex64::new(0.3, 0.1), &grid).unwrap();
        assert_eq!(f.contrast, 1.0);
        // P(phi) = 2|tau|^2 sigma(0,0) (1 + cos phi); minimum at pi is 0
        let p_pi = fringe_pattern(&dm, &j, Complex64::new(0.3, 0.1), &[0.0, std::f64::consts::PI])
            .unwrap()
            .intensity[1];
        assert_eq!(p_pi, 0.0);
        let t2 = Complex64::new(0.3, 0.1).norm_sqr();
        assert!((f.intensity[0] - 2.0 * t2 * dm.evaluate(0.0, 0.0) * 2.0).abs() < 1e-14);
        assert!((f.p1 - f.p2).abs() < 1e-18);
    }

    #[test]
    fn sampled_contrast_matches_closed_form() {
        let p = reduced();
        for &(q2, p2, x) in &[(0.6, 0.7, 0.4), (1.5, 0.3, 1.1), (0.5, 0.50000001, 2.0)] {
            let dm = density_matrix(q2, p2, &p).unwrap();
            let xi = dm.coherence_length();
            let closed = (-(x * x) / (2.0 * xi * xi)).exp();
            let sampled = sampled_contrast(&dm, x);
            assert!(
                (sampled - closed).abs() < 1e-10,
                "q2={q2} p2={p2} x={x}: {sampled} vs {closed}"
            );
        }
    }

    #[test]
    fn validity_ratios() {
        let p = reduced();
        // decoupled bath: unconditional pass
        let empty = FiniteBath { freqs: vec![1.0], masses: vec![0.0], particle: p };
        let j = junction(0.5, 0.1, 0.1, 2.0, 0);
        let rep = validity_check(&j, &empty, 1.0, 0.0).unwrap();
        assert!(rep.ratio_static.is_infinite());
        assert!(rep.ratio_fluctuation.is_infinite());
        assert!(rep.pass);

        // fixed bath: ratios scale exactly as k^2
        let bath = FiniteBath { freqs: vec![0.5, 2.0], masses: vec![0.3, 0.1], particle: p };
        let r1 = validity_check(&junction(0.5, 0.1, 0.1, 2.0, 0), &bath, 0.7, 0.5).unwrap();
        let r2 = validity_check(&junction(0.5, 0.1, 0.1, 4.0, 0), &bath, 0.7, 0.5).unwrap();
        assert!((r2.ratio_static / r1.ratio_static - 4.0).abs() < 1e-12);
        assert!((r2.ratio_fluctuation / r1.ratio_fluctuation - 4.0).abs() < 1e-12);

        // inclusive threshold: ratio exactly 100 passes
        let unit = FiniteBath { freqs: vec![1.0], masses: vec![2.0], particle: p };
        let rep = validity_check(&junction(0.5, 0.1, 0.1, 20.0, 0), &unit, 1.0, 0.0).unwrap();
        assert_eq!(rep.ratio_static, 100.0);
        assert!(rep.pass);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_coherence_routes_agree(x_arg in 0.01f64..8.0, m_eff in 0.3f64..4.0) {
            // canonical moments at effective temperature T~ = 1/x
            let p = reduced();
            let t_eff = 1.0 / x_arg;
            let c = 1.0 / (x_arg / 2.0).tanh();
            let q2 = c / (2.0 * m_eff);
            let p2 = m_eff * c / 2.0;
            let xi_a = coherence_length(t_eff, m_eff, &p).unwrap();
            let xi_b = coherence_length_from_moments(q2, p2, &p).unwrap();
            prop_assert!((xi_a - xi_b).abs() <= 1e-12 * xi_b, "{} vs {}", xi_a, xi_b);
        }

        #[test]
        fn prop_contrast_monotonicity(x1 in 0.1f64..3.0, dx in 0.05f64..2.0, xi in 0.2f64..5.0, dxi in 0.05f64..3.0) {
            let c = |x: f64, xi: f64| (-(x * x) / (2.0 * xi * xi)).exp();
            // decreasing in x at fixed xi, increasing in xi at fixed x > 0
            prop_assert!(c(x1 + dx, xi) < c(x1, xi));
            prop_assert!(c(x1, xi + dxi) > c(x1, xi));
        }

        #[test]
        fn prop_fringe_nonnegative(q2 in 0.1f64..5.0, scale in 1.0f64..40.0, x in 0.0f64..3.0) {
            let p = reduced();
            let p2 = scale * 0.25 / q2;
            let dm = density_matrix(q2, p2, &p).unwrap();
            let j = junction(x, 0.1, 0.1, 5.0, 0);
            let grid: Vec<f64> = (0..97).map(|i| 2.0 * std::f64::consts::PI * i as f64 / 97.0).collect();
            let f = fringe_pattern(&dm, &j, Complex64::new(0.7, -0.2), &grid).unwrap();
            prop_assert!(f.intensity.iter().all(|&v| v >= 0.0));
            // symmetry P(phi) = P(-phi)
            let fwd = fringe_pattern(&dm, &j, Complex64::new(0.7, -0.2), &[1.234, 0.0]).unwrap().intensity[0];
            let bwd = fringe_pattern(&dm, &j, Complex64::new(0.7, -0.2), &[-1.234, 0.0]).unwrap().intensity[0];
            prop_assert_eq!(fwd.to_bits(), bwd.to_bits());
        }

        #[test]
        fn prop_continuity_identity(
            x in 0.0f64..1.5,
            alpha in 0.0f64..0.02,
            k in 1.1f64..12.0,
            n_inc in 0usize..3,
        ) {
            let j = junction(x, alpha, 0.08, k, n_inc);
            // skip accidental threshold configurations
            if let Ok(sol) = scattering_solve(&j) {
                for (n, (&t, &r)) in sol.t.iter().zip(&sol.r).enumerate() {
                    let d = if n == n_inc { 1.0 } else { 0.0 };
                    prop_assert!((t - d - r).norm() <= 1e-12);
                }
            }
        }
    }
}
