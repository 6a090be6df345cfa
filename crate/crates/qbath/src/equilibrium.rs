//! Continuum-limit equilibrium state of the coupled particle.
//!
//! Mode sums over the coupled system collapse, in the continuum limit, to
//! a single weighted integral with a near-Lorentzian kernel,
//!
//! ```text
//! M[f] = (2/pi) int_0^inf Gamma u^2 f(u^2) du / [(u^2 - W^2 - Delta)^2 + Gamma^2 u^2]
//! ```
//!
//! plus one term `w* f(nu*^2)` per real pole. `<q^2>` and `<p^2>` are
//! `M[f]` with thermal-oscillator kernels; from them follow the effective
//! temperature and mass fixed by the canonical form of the reduced density
//! operator at the bare frequency, its entropy, and the Gaussian position
//! representation.

use crate::error::{Error, Result};
use crate::particle::{thermal_coth, ParticleParams};
use crate::quadrature;
use crate::spectral::{BathResponse, SpectralDensity};

const MOMENT_REL_TOL: f64 = 1e-10;
const MOMENT_MAX_EVALS: usize = 2_000_000;
/// Numerical slack on the Heisenberg bound (quadrature tolerance).
const HEISENBERG_SLACK: f64 = 1e-8;

/// Value and diagnostics of one weighted integral.
#[derive(Debug, Clone, Copy)]
pub struct MomentResult {
    pub value: f64,
    pub abs_error: f64,
    /// False when no resonance root could be bracketed and the integrator
    /// fell back to uniform panel refinement.
    pub resonance_bracketed: bool,
}

/// `(2/pi) int Gamma u^2 f(u^2) / [(u^2-W^2-Delta)^2 + Gamma^2 u^2] du`,
/// split at every resonance root and spectral cutoff, plus the pole sum
/// when `include_pole` is set.
pub fn weighted_integral(
    f: impl Fn(f64) -> f64,
    response: &BathResponse,
    include_pole: bool,
) -> Result<MomentResult> {
    let p = *response.particle();
    let omega2 = p.omega * p.omega;
    let h = |u: f64| u * u - omega2 - response.delta(u);

    let mut value = 0.0;
    let mut abs_error = 0.0;
    let mut any_root = false;

    for (lo, hi) in response.env().support() {
        let finite_hi = if hi.is_finite() {
            hi
        } else {
            8.0 * p.omega.max(drude_scale(response.env()))
        };

        // resonance roots of u^2 - W^2 - Delta(u) inside this stretch
        let mut roots = Vec::new();
        let n_scan = 1024;
        let (mut pu, mut ph) = (f64::NAN, f64::NAN);
        for i in 0..=n_scan {
            let u = lo + (finite_hi - lo) * i as f64 / n_scan as f64;
            if u <= 0.0 {
                continue;
            }
            let hv = h(u);
            if !hv.is_finite() {
                continue;
            }
            if ph.is_finite() && hv.signum() != ph.signum() {
                if let Some(r) = quadrature::bisect(h, pu, u, 1e-13) {
                    roots.push(r);
                }
            }
            pu = u;
            ph = hv;
        }
        any_root |= !roots.is_empty();

        // panel splits: resonance cores (+-1 and +-10 half-widths) and kinks
        let mut cuts: Vec<f64> = Vec::new();
        for &r in &roots {
            let w = 0.5 * response.gamma(r);
            for c in [r - 10.0 * w, r - w, r, r + w, r + 10.0 * w] {
                if c > lo && c < finite_hi {
                    cuts.push(c);
                }
            }
        }
        cuts.extend(kinks(response.env(), lo, finite_hi));
        if roots.is_empty() {
            // fallback: uniform refinement of the stretch
            for i in 1..64 {
                cuts.push(lo + (finite_hi - lo) * i as f64 / 64.0);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut panels = Vec::new();
        let mut prev = lo;
        for c in cuts.into_iter().chain(std::iter::once(finite_hi)) {
            if c > prev {
                panels.push((prev, c));
                prev = c;
            }
        }

        let integrand = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let g = response.gamma(u);
            if g == 0.0 {
                return 0.0;
            }
            let d = h(u);
            2.0 / std::f64::consts::PI * g * u * u * f(u * u) / (d * d + g * g * u * u)
        };

        let out = quadrature::integrate_panels(integrand, &panels, MOMENT_REL_TOL, 0.0, MOMENT_MAX_EVALS)?;
        value += out.value;
        abs_error += out.abs_error;

        if !hi.is_finite() {
            // geometric tail chunks; integrand decays at least like u^-2
            let mut a = finite_hi;
            let mut calm = 0;
            for _ in 0..64 {
                let b = 2.0 * a;
                let chunk =
                    quadrature::integrate(integrand, a, b, MOMENT_REL_TOL, 0.0, MOMENT_MAX_EVALS)?;
                value += chunk.value;
                abs_error += chunk.abs_error;
                a = b;
                if chunk.value.abs() <= 1e-13 * value.abs() {
                    calm += 1;
                    if calm >= 2 {
                        break;
                    }
                } else {
                    calm = 0;
                }
            }
        }
    }

    if include_pole {
        for pole in response.poles() {
            value += pole.weight * f(pole.nu_star_sq);
        }
    }

    Ok(MomentResult { value, abs_error, resonance_bracketed: any_root })
}

fn drude_scale(env: &SpectralDensity) -> f64 {
    match *env {
        SpectralDensity::Drude { omega_c, eta } => omega_c.max(eta),
        SpectralDensity::RcCircuit { resistance, capacitance, .. } => 1.0 / (resistance * capacitance),
        _ => 1.0,
    }
}

fn kinks(env: &SpectralDensity, lo: f64, hi: f64) -> Vec<f64> {
    match *env {
        SpectralDensity::Tabulated { ref grid } => {
            grid.iter().map(|&(w, _)| w).filter(|&w| w > lo && w < hi).collect()
        }
        _ => Vec::new(),
    }
}

/// `<q^2>` at temperature `T` (`T = 0` uses the exact `coth -> 1` limit).
pub fn q2_mean(
    env: &SpectralDensity,
    particle: &ParticleParams,
    temperature: f64,
    include_pole: bool,
) -> Result<f64> {
    check_temperature(temperature)?;
    if env.is_null() {
        let c = thermal_coth(particle.omega, temperature, particle);
        return Ok(particle.hbar / (2.0 * particle.mass * particle.omega) * c);
    }
    let response = BathResponse::new(env, *particle)?;
    let p = *particle;
    weighted_integral(
        move |nu2: f64| {
            let nu = nu2.sqrt();
            p.hbar / (2.0 * p.mass * nu) * thermal_coth(nu, temperature, &p)
        },
        &response,
        include_pole,
    )
    .map(|m| m.value)
}

/// `<p^2>` at temperature `T`.
pub fn p2_mean(
    env: &SpectralDensity,
    particle: &ParticleParams,
    temperature: f64,
    include_pole: bool,
) -> Result<f64> {
    check_temperature(temperature)?;
    if env.is_null() {
        let c = thermal_coth(particle.omega, temperature, particle);
        return Ok(particle.mass * particle.hbar * particle.omega / 2.0 * c);
    }
    let response = BathResponse::new(env, *particle)?;
    let p = *particle;
    weighted_integral(
        move |nu2: f64| {
            let nu = nu2.sqrt();
            p.mass * p.hbar * nu / 2.0 * thermal_coth(nu, temperature, &p)
        },
        &response,
        include_pole,
    )
    .map(|m| m.value)
}

fn check_temperature(t: f64) -> Result<()> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("temperature must be >= 0, got {t}")));
    }
    Ok(())
}

fn check_moments(q2: f64, p2: f64) -> Result<()> {
    if !(q2 > 0.0) || !(p2 > 0.0) {
        return Err(Error::Domain(format!("moments must be positive: q2 = {q2}, p2 = {p2}")));
    }
    Ok(())
}

/// Heisenberg ratio `hbar^2 / (4 q2 p2)`, with the numerical-slack policy:
/// ratios in `(1, 1 + slack]` are treated as the pure state, beyond is an
/// upstream failure.
fn purity_ratio(q2: f64, p2: f64, particle: &ParticleParams) -> Result<f64> {
    check_moments(q2, p2)?;
    let bound = particle.hbar * particle.hbar / 4.0;
    let r = bound / (q2 * p2);
    if r > 1.0 + HEISENBERG_SLACK {
        return Err(Error::UncertaintyViolation { product: q2 * p2, bound });
    }
    Ok(r.min(1.0))
}

/// `k T~ = (hbar W / 2) / artanh sqrt(hbar^2 / 4 <p^2><q^2>)`; exactly 0 at
/// the Heisenberg bound.
pub fn effective_temperature(q2: f64, p2: f64, particle: &ParticleParams) -> Result<f64> {
    let r = purity_ratio(q2, p2, particle)?;
    if r >= 1.0 {
        return Ok(0.0);
    }
    let arg = r.sqrt().atanh();
    Ok(particle.hbar * particle.omega / (2.0 * particle.kb * arg))
}

/// `m~ = sqrt(<p^2> / W^2 <q^2>)`.
pub fn effective_mass(q2: f64, p2: f64, particle: &ParticleParams) -> Result<f64> {
    check_moments(q2, p2)?;
    Ok((p2 / (particle.omega * particle.omega * q2)).sqrt())
}

/// Thermal-oscillator entropy in units of `kb`:
/// `S = x/(e^x - 1) - ln(1 - e^-x)` with `x = hbar W / k T~`; 0 at `T~ = 0`.
pub fn entropy_of(t_eff: f64, particle: &ParticleParams) -> Result<f64> {
    if t_eff < 0.0 || !t_eff.is_finite() {
        return Err(Error::Domain(format!("effective temperature must be >= 0, got {t_eff}")));
    }
    if t_eff == 0.0 {
        return Ok(0.0);
    }
    let x = particle.hbar * particle.omega / (particle.kb * t_eff);
    let ex_m1 = x.exp_m1();
    let s = if ex_m1.is_finite() { x / ex_m1 } else { 0.0 };
    Ok(s - (-(-x).exp_m1()).ln())
}

/// Purity `tr sigma^2 = hbar / (2 sqrt(<q^2><p^2>))`.
pub fn purity_from_moments(q2: f64, p2: f64, particle: &ParticleParams) -> Result<f64> {
    Ok(purity_ratio(q2, p2, particle)?.sqrt())
}

/// Position representation
/// `sigma(q, q') = norm exp(-a_minus (q-q')^2 - a_plus (q+q')^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDensityMatrix {
    /// `<p^2> / 2 hbar^2`.
    pub a_minus: f64,
    /// `1 / 8 <q^2>`.
    pub a_plus: f64,
    /// `(2 pi <q^2>)^(-1/2)`, normalising the diagonal to unit trace.
    pub norm: f64,
    pub hbar: f64,
}

impl GaussianDensityMatrix {
    pub fn evaluate(&self, q: f64, qp: f64) -> f64 {
        let d = q - qp;
        let s = q + qp;
        self.norm * (-self.a_minus * d * d - self.a_plus * s * s).exp()
    }

    /// Inverse map back to the moments.
    pub fn q2(&self) -> f64 {
        1.0 / (8.0 * self.a_plus)
    }

    pub fn p2(&self) -> f64 {
        2.0 * self.hbar * self.hbar * self.a_minus
    }

    /// Decay scale of `sigma(x,-x)/sigma(x,x) = exp(-x^2 / 2 xi^2)`;
    /// infinite for a pure state.
    pub fn coherence_length(&self) -> f64 {
        let d = self.a_minus - self.a_plus;
        if d <= 0.0 {
            f64::INFINITY
        } else {
            (1.0 / (8.0 * d)).sqrt()
        }
    }
}

/// Builds the Gaussian position representation from the moments.
pub fn density_matrix(q2: f64, p2: f64, particle: &ParticleParams) -> Result<GaussianDensityMatrix> {
    let r = purity_ratio(q2, p2, particle)?;
    let a_plus = 1.0 / (8.0 * q2);
    let a_minus = if r >= 1.0 {
        a_plus // pure state: infinite coherence length, exactly
    } else {
        p2 / (2.0 * particle.hbar * particle.hbar)
    };
    Ok(GaussianDensityMatrix {
        a_minus,
        a_plus,
        norm: 1.0 / (2.0 * std::f64::consts::PI * q2).sqrt(),
        hbar: particle.hbar,
    })
}

/// Full equilibrium summary at one `(environment, T)` point.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumState {
    pub temperature: f64,
    pub q2: f64,
    pub p2: f64,
    pub t_eff: f64,
    pub m_eff: f64,
    /// Entropy in units of `kb`.
    pub entropy: f64,
}

/// One-stop evaluation of `<q^2>`, `<p^2>`, `T~`, `m~`, `S`.
pub fn equilibrium_state(
    env: &SpectralDensity,
    particle: &ParticleParams,
    temperature: f64,
    include_pole: bool,
) -> Result<EquilibriumState> {
    check_temperature(temperature)?;
    let (q2, p2) = if env.is_null() {
        let c = thermal_coth(particle.omega, temperature, particle);
        (
            particle.hbar / (2.0 * particle.mass * particle.omega) * c,
            particle.mass * particle.hbar * particle.omega / 2.0 * c,
        )
    } else {
        let response = BathResponse::new(env, *particle)?;
        let p = *particle;
        let q2 = weighted_integral(
            |nu2: f64| {
                let nu = nu2.sqrt();
                p.hbar / (2.0 * p.mass * nu) * thermal_coth(nu, temperature, &p)
            },
            &response,
            include_pole,
        )?
        .value;
        let p2 = weighted_integral(
            |nu2: f64| {
                let nu = nu2.sqrt();
                p.mass * p.hbar * nu / 2.0 * thermal_coth(nu, temperature, &p)
            },
            &response,
            include_pole,
        )?
        .value;
        (q2, p2)
    };
    let t_eff = effective_temperature(q2, p2, particle)?;
    let m_eff = effective_mass(q2, p2, particle)?;
    let entropy = entropy_of(t_eff, particle)?;
    Ok(EquilibriumState { temperature, q2, p2, t_eff, m_eff, entropy })
}
