//! Bath spectral densities and the response functions they induce.
//!
//! The environment is a mass distribution `mu(omega)`; everything the
//! particle feels enters through
//!
//! ```text
//! Gamma(u) = pi u^2 mu(u) / 2m
//! Delta(u) = PV int_0^inf (w^2 u^2 / m) mu(w) / (u^2 - w^2) dw
//! ```
//!
//! `delta` evaluates the principal value by analytic pole subtraction plus
//! adaptive quadrature; `delta_analytic` carries the closed forms (exact
//! log form for the sharp ohmic cutoff, rational form for Drude, exact
//! per-segment antiderivatives for tabulated densities) that the
//! quadrature path is tested against and that the moment integrals use.
//!
//! Where `mu` vanishes the reduced resolvent can have real poles
//! (undamped dressed modes). `find_real_poles` brackets and bisects them;
//! for a root hugging a sharp cutoff edge the distance to the edge is
//! below f64 resolution, so the search runs in the log offset
//! `s = -ln((u - e)/e)` where the edge log-divergence is linear.

use std::io::BufRead;

use crate::error::{Error, Result};
use crate::particle::ParticleParams;
use crate::quadrature;

/// Budget for one principal-value evaluation (design: 1e6 integrand calls).
const PV_MAX_EVALS: usize = 1_000_000;
const PV_REL_TOL: f64 = 1e-10;

/// Bath mass distribution `mu(omega)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// `mu = 2 eta / (pi w^2)` below `omega_c`, zero above.
    OhmicSharp { eta: f64, omega_c: f64 },
    /// `mu = (2 eta / pi w^2) * omega_c^2 / (w^2 + omega_c^2)`.
    Drude { eta: f64, omega_c: f64 },
    /// Capacitive coupling to an RC line; identical to `Drude` with
    /// `eta = R e^2 / l^2`, `omega_c = 1/RC`.
    RcCircuit { charge: f64, plate_distance: f64, capacitance: f64, resistance: f64 },
    /// Piecewise-linear interpolation through `(omega, mu)` nodes,
    /// zero outside the grid.
    Tabulated { grid: Vec<(f64, f64)> },
}

impl SpectralDensity {
    /// Validating constructor for tabulated densities.
    pub fn tabulated(grid: Vec<(f64, f64)>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::Domain("tabulated grid needs at least two nodes".into()));
        }
        for w in grid.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Domain(format!(
                    "grid frequencies must be strictly increasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(w, v) in &grid {
            if !w.is_finite() || !v.is_finite() || w < 0.0 || v < 0.0 {
                return Err(Error::Domain(format!("invalid grid node ({w}, {v})")));
            }
        }
        Ok(SpectralDensity::Tabulated { grid })
    }

    /// Two-column CSV with header `omega,mu`, strictly increasing first column.
    pub fn from_csv(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Domain("empty spectral-density file".into()))?
            .map_err(|e| Error::Domain(format!("read error: {e}")))?;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if cols != ["omega", "mu"] {
            return Err(Error::Domain(format!("expected header 'omega,mu', got '{header}'")));
        }
        let mut grid = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Domain(format!("read error: {e}")))?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let mut it = t.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Domain(format!("line {}: missing column", i + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Domain(format!("line {}: {e}", i + 2)))
            };
            let w = parse(it.next())?;
            let v = parse(it.next())?;
            grid.push((w, v));
        }
        Self::tabulated(grid)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralDensity::OhmicSharp { eta, omega_c } | SpectralDensity::Drude { eta, omega_c } => {
                if eta < 0.0 || !eta.is_finite() {
                    return Err(Error::Domain(format!("eta must be nonnegative, got {eta}")));
                }
                if !(omega_c > 0.0) {
                    return Err(Error::Domain(format!("omega_c must be positive, got {omega_c}")));
                }
                Ok(())
            }
            SpectralDensity::RcCircuit { plate_distance, capacitance, resistance, .. } => {
                if !(plate_distance > 0.0 && capacitance > 0.0 && resistance > 0.0) {
                    return Err(Error::Domain("RC parameters must be positive".into()));
                }
                Ok(())
            }
            SpectralDensity::Tabulated { ref grid } => {
                Self::tabulated(grid.clone()).map(|_| ())
            }
        }
    }

    /// The exactly equivalent `Drude` parameters of an `RcCircuit`.
    pub fn rc_equivalent_drude(&self) -> Option<SpectralDensity> {
        match *self {
            SpectralDensity::RcCircuit { charge, plate_distance, capacitance, resistance } => {
                Some(SpectralDensity::Drude {
                    eta: resistance * charge * charge / (plate_distance * plate_distance),
                    omega_c: 1.0 / (resistance * capacitance),
                })
            }
            _ => None,
        }
    }

    /// True when `mu` vanishes identically (decoupled particle).
    pub fn is_null(&self) -> bool {
        match *self {
            SpectralDensity::OhmicSharp { eta, .. } | SpectralDensity::Drude { eta, .. } => eta == 0.0,
            SpectralDensity::RcCircuit { charge, .. } => charge == 0.0,
            SpectralDensity::Tabulated { ref grid } => grid.iter().all(|&(_, v)| v == 0.0),
        }
    }

    /// `mu(omega)` without domain checks; 0 outside the support.
    fn mu_raw(&self, omega: f64) -> f64 {
        match *self {
            SpectralDensity::OhmicSharp { eta, omega_c } => {
                if omega < omega_c {
                    2.0 * eta / (std::f64::consts::PI * omega * omega)
                } else {
                    0.0
                }
            }
            SpectralDensity::Drude { eta, omega_c } => {
                2.0 * eta / (std::f64::consts::PI * omega * omega) * omega_c * omega_c
                    / (omega * omega + omega_c * omega_c)
            }
            SpectralDensity::RcCircuit { .. } => {
                self.rc_equivalent_drude().unwrap().mu_raw(omega)
            }
            SpectralDensity::Tabulated { ref grid } => {
                let n = grid.len();
                if omega < grid[0].0 || omega > grid[n - 1].0 {
                    return 0.0;
                }
                let idx = grid.partition_point(|&(w, _)| w <= omega);
                if idx == 0 {
                    return grid[0].1;
                }
                if idx == n {
                    return grid[n - 1].1;
                }
                let (w0, v0) = grid[idx - 1];
                let (w1, v1) = grid[idx];
                v0 + (v1 - v0) * (omega - w0) / (w1 - w0)
            }
        }
    }

    /// Maximal intervals on which `mu > 0`. `Drude` reports an unbounded
    /// interval as `(0, +inf)`.
    pub fn support(&self) -> Vec<(f64, f64)> {
        match *self {
            SpectralDensity::OhmicSharp { eta, omega_c } => {
                if eta > 0.0 { vec![(0.0, omega_c)] } else { vec![] }
            }
            SpectralDensity::Drude { eta, .. } => {
                if eta > 0.0 { vec![(0.0, f64::INFINITY)] } else { vec![] }
            }
            SpectralDensity::RcCircuit { .. } => self.rc_equivalent_drude().unwrap().support(),
            SpectralDensity::Tabulated { ref grid } => {
                // a segment carries mass unless both ends vanish
                let mut out: Vec<(f64, f64)> = Vec::new();
                for seg in grid.windows(2) {
                    let ((w0, v0), (w1, v1)) = (seg[0], seg[1]);
                    if v0 > 0.0 || v1 > 0.0 {
                        match out.last_mut() {
                            Some(last) if last.1 == w0 => last.1 = w1,
                            _ => out.push((w0, w1)),
                        }
                    }
                }
                out
            }
        }
    }

    /// Integration-domain kinks inside `(lo, hi)` (tabulated nodes, cutoff).
    fn kinks_within(&self, lo: f64, hi: f64) -> Vec<f64> {
        match *self {
            SpectralDensity::Tabulated { ref grid } => grid
                .iter()
                .map(|&(w, _)| w)
                .filter(|&w| w > lo && w < hi)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Exact `int_lo^hi mu(w) dw` (closed form per variant).
    pub fn mass_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(hi >= lo) {
            return Err(Error::Domain(format!("bad mass band [{lo}, {hi}]")));
        }
        match *self {
            SpectralDensity::OhmicSharp { eta, omega_c } => {
                let hi = hi.min(omega_c);
                if hi <= lo {
                    return Ok(0.0);
                }
                if lo <= 0.0 {
                    return Err(Error::Domain(
                        "ohmic mass diverges at omega = 0; use a positive lower edge".into(),
                    ));
                }
                Ok(2.0 * eta / std::f64::consts::PI * (1.0 / lo - 1.0 / hi))
            }
            SpectralDensity::Drude { eta, omega_c } => {
                if lo <= 0.0 {
                    return Err(Error::Domain(
                        "drude mass diverges at omega = 0; use a positive lower edge".into(),
                    ));
                }
                // int 2eta/pi [1/w^2 - 1/(w^2+wc^2)] dw
                let anti = |w: f64| -1.0 / w - (w / omega_c).atan() / omega_c;
                Ok(2.0 * eta / std::f64::consts::PI * (anti(hi) - anti(lo)))
            }
            SpectralDensity::RcCircuit { .. } => {
                self.rc_equivalent_drude().unwrap().mass_integral(lo, hi)
            }
            SpectralDensity::Tabulated { ref grid } => {
                let mut total = 0.0;
                for seg in grid.windows(2) {
                    let ((w0, v0), (w1, v1)) = (seg[0], seg[1]);
                    let a = lo.max(w0);
                    let b = hi.min(w1);
                    if b > a {
                        let slope = (v1 - v0) / (w1 - w0);
                        let va = v0 + slope * (a - w0);
                        let vb = v0 + slope * (b - w0);
                        total += 0.5 * (va + vb) * (b - a);
                    }
                }
                Ok(total)
            }
        }
    }

    /// Frequency of a sharp upper edge where `mu` jumps to zero, if any.
    pub fn jump_edge(&self) -> Option<f64> {
        match *self {
            SpectralDensity::OhmicSharp { eta, omega_c } if eta > 0.0 => Some(omega_c),
            SpectralDensity::Tabulated { ref grid } => {
                let &(w, v) = grid.last().unwrap();
                if v > 0.0 { Some(w) } else { None }
            }
            _ => None,
        }
    }
}

/// `mu(omega)` per the variant's closed form.
pub fn evaluate_mu(env: &SpectralDensity, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    Ok(env.mu_raw(omega))
}

/// `Gamma(u) = pi u^2 mu(u) / 2m`.
pub fn gamma(env: &SpectralDensity, particle: &ParticleParams, u: f64) -> Result<f64> {
    let mu = evaluate_mu(env, u)?;
    Ok(std::f64::consts::PI * u * u * mu / (2.0 * particle.mass))
}

/// Per-segment antiderivative of `w^2 (a + b w) / (u^2 - w^2)`.
///
/// The two log terms carry the principal value across `w = u`; evaluating
/// at the endpoints of a segment containing the pole yields the PV exactly.
fn segment_antideriv(u: f64, w: f64, a: f64, b: f64) -> f64 {
    let log_ratio = ((u + w) / (u - w).abs()).ln();
    let log_diff = ((u * u - w * w).abs()).ln();
    -a * w + 0.5 * a * u * log_ratio - 0.5 * b * w * w - 0.5 * b * u * u * log_diff
}

/// Same antiderivative evaluated at a jump edge `w = e` for `u = e(1 + exp(-s))`,
/// with the divergent logs rewritten in `s` so that unrepresentably small
/// `u - e` stays exact: `ln|u - e| = ln e - s`.
fn segment_antideriv_at_edge(u: f64, e: f64, a: f64, b: f64, s: f64) -> f64 {
    let log_ratio = (u + e).ln() - (e.ln() - s);
    let log_diff = (u + e).ln() + (e.ln() - s);
    -a * e + 0.5 * a * u * log_ratio - 0.5 * b * e * e - 0.5 * b * u * u * log_diff
}

/// Closed-form `Delta(u)`; exact for every supported variant.
///
/// For `OhmicSharp` this is `(eta u / pi m) ln((u + wc)/|u - wc|)`, for
/// `Drude` `eta u^2 wc / (m (u^2 + wc^2))`, for tabulated densities the
/// sum of exact per-segment antiderivatives. Diverges logarithmically at a
/// sharp cutoff; callers never evaluate there.
pub fn delta_analytic(env: &SpectralDensity, particle: &ParticleParams, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("u must be positive, got {u}")));
    }
    let m = particle.mass;
    match *env {
        SpectralDensity::OhmicSharp { eta, omega_c } => {
            Ok(eta * u / (std::f64::consts::PI * m) * ((u + omega_c) / (u - omega_c).abs()).ln())
        }
        SpectralDensity::Drude { eta, omega_c } => {
            Ok(eta * u * u * omega_c / (m * (u * u + omega_c * omega_c)))
        }
        SpectralDensity::RcCircuit { .. } => {
            delta_analytic(&env.rc_equivalent_drude().unwrap(), particle, u)
        }
        SpectralDensity::Tabulated { ref grid } => {
            let mut sum = 0.0;
            for seg in grid.windows(2) {
                let ((w0, v0), (w1, v1)) = (seg[0], seg[1]);
                if v0 == 0.0 && v1 == 0.0 {
                    continue;
                }
                if u == w0 || u == w1 {
                    return Err(Error::Domain(format!(
                        "u = {u} sits exactly on a tabulated grid node"
                    )));
                }
                let b = (v1 - v0) / (w1 - w0);
                let a = v0 - b * w0;
                sum += segment_antideriv(u, w1, a, b) - segment_antideriv(u, w0, a, b);
            }
            Ok(u * u / m * sum)
        }
    }
}

/// `Delta(u(s))` near a jump edge `e`, parametrised by `u = e (1 + exp(-s))`.
fn delta_at_edge(env: &SpectralDensity, particle: &ParticleParams, e: f64, s: f64) -> f64 {
    let m = particle.mass;
    let u = e * (1.0 + (-s).exp());
    match *env {
        SpectralDensity::OhmicSharp { eta, .. } => {
            // ln((u+e)/(u-e)) = ln(2 + exp(-s)) + s
            eta * u / (std::f64::consts::PI * m) * ((2.0 + (-s).exp()).ln() + s)
        }
        SpectralDensity::Tabulated { ref grid } => {
            let mut sum = 0.0;
            for seg in grid.windows(2) {
                let ((w0, v0), (w1, v1)) = (seg[0], seg[1]);
                if v0 == 0.0 && v1 == 0.0 {
                    continue;
                }
                let b = (v1 - v0) / (w1 - w0);
                let a = v0 - b * w0;
                let f_hi = if w1 == e {
                    segment_antideriv_at_edge(u, e, a, b, s)
                } else {
                    segment_antideriv(u, w1, a, b)
                };
                let f_lo = if w0 == e {
                    segment_antideriv_at_edge(u, e, a, b, s)
                } else {
                    segment_antideriv(u, w0, a, b)
                };
                sum += f_hi - f_lo;
            }
            u * u / m * sum
        }
        _ => delta_analytic(env, particle, u).unwrap_or(f64::NAN),
    }
}

/// Principal-value `Delta(u)` by analytic pole subtraction and adaptive
/// quadrature: the pole term `mu(u) w^2 u^2 / m` times the PV kernel is
/// integrated in closed form, the regularised remainder adaptively.
pub fn delta(env: &SpectralDensity, particle: &ParticleParams, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("u must be positive, got {u}")));
    }
    if let SpectralDensity::Tabulated { ref grid } = *env {
        if grid.iter().any(|&(w, _)| w == u) {
            return Err(Error::Domain(format!("u = {u} sits exactly on a tabulated grid node")));
        }
    }
    if env.is_null() {
        return Ok(0.0);
    }
    let m = particle.mass;
    let g = |w: f64| w * w * u * u * env.mu_raw(w) / m;

    let mut total = 0.0;
    for (lo, hi) in env.support() {
        let finite_hi = if hi.is_finite() { hi } else { 8.0 * (u.max(drude_cutoff(env))) };
        total += pv_over_interval(env, g, u, lo, finite_hi)?;
        if !hi.is_finite() {
            // geometric tail chunks of the plain integrand (decays ~ w^-4 here)
            let mut a = finite_hi;
            for _ in 0..80 {
                let b = 2.0 * a;
                let chunk = quadrature::integrate(
                    |w| g(w) / (u * u - w * w),
                    a,
                    b,
                    PV_REL_TOL,
                    0.0,
                    PV_MAX_EVALS,
                )?;
                total += chunk.value;
                a = b;
                if chunk.value.abs() <= 1e-13 * total.abs() {
                    break;
                }
            }
        }
    }
    Ok(total)
}

fn drude_cutoff(env: &SpectralDensity) -> f64 {
    match *env {
        SpectralDensity::Drude { omega_c, .. } => omega_c,
        SpectralDensity::RcCircuit { resistance, capacitance, .. } => 1.0 / (resistance * capacitance),
        _ => 1.0,
    }
}

fn pv_over_interval(
    env: &SpectralDensity,
    g: impl Fn(f64) -> f64,
    u: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let mut splits = env.kinks_within(lo, hi);
    if u > lo && u < hi {
        // pole inside: subtract g(u)/(u^2 - w^2) and integrate the remainder
        let gu = g(u);
        // exact derivative step, kept clear of the nearest kink
        let mut step = 1e-6 * u;
        for &k in splits.iter().chain([lo, hi].iter()) {
            let d = (k - u).abs();
            if d > 0.0 {
                step = step.min(0.25 * d);
            }
        }
        let gprime = (g(u + step) - g(u - step)) / (2.0 * step);
        let guard = 1e-8 * u;
        let regular = move |w: f64| {
            if (w - u).abs() <= guard {
                -gprime / (w + u)
            } else {
                (g(w) - gu) / ((u - w) * (u + w))
            }
        };
        splits.push(u);
        splits.sort_by(f64::total_cmp);
        let mut panels = Vec::new();
        let mut prev = lo;
        for p in splits.into_iter().chain(std::iter::once(hi)) {
            if p > prev {
                panels.push((prev, p));
                prev = p;
            }
        }
        // PV int_lo^hi dw/(u^2-w^2) = [ln((u+w)/|u-w|)]_lo^hi / 2u
        let kernel = (((u + hi) / (u - hi).abs()).ln() - ((u + lo) / (u - lo).abs()).ln()) / (2.0 * u);
        // absolute floor: the remainder can cancel to pure round-off noise
        // (constant G for the sharp ohmic density), so anchor the goal to
        // the subtraction-term scale instead of the remainder itself
        let scale = gu.abs() * ((hi - lo) / (2.0 * u) + kernel.abs());
        let reg =
            quadrature::integrate_panels(regular, &panels, PV_REL_TOL, 1e-12 * scale, PV_MAX_EVALS)?;
        Ok(reg.value + gu * kernel)
    } else {
        let mut panels = Vec::new();
        let mut prev = lo;
        for p in splits.into_iter().chain(std::iter::once(hi)) {
            if p > prev {
                panels.push((prev, p));
                prev = p;
            }
        }
        let out = quadrature::integrate_panels(
            |w| g(w) / ((u - w) * (u + w)),
            &panels,
            PV_REL_TOL,
            0.0,
            PV_MAX_EVALS,
        )?;
        Ok(out.value)
    }
}

/// A real-axis pole of the reduced resolvent: an undamped dressed mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleRecord {
    /// Squared frequency `nu*^2` of the mode.
    pub nu_star_sq: f64,
    /// Residue weight `w* = 1 / (1 - Delta~'(nu*^2))`; may underflow to 0
    /// for a root exponentially close to a sharp cutoff.
    pub weight: f64,
    pub kind: PoleKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoleKind {
    /// Root at a representable distance from any spectral edge.
    Interior,
    /// Root pinned to a sharp cutoff edge `e`: `u* = e (1 + exp(-log_gap))`.
    /// `ln_weight` is the log of the residue weight, which itself may be
    /// far below the smallest positive f64.
    CutoffEdge { edge: f64, log_gap: f64, ln_weight: f64 },
}

/// Brackets and bisects roots of `g(u) = u^2 - Omega^2 - Delta(u)` inside a
/// band where `Gamma` vanishes. Returns every root found (caller decides).
pub fn find_real_poles(
    env: &SpectralDensity,
    particle: &ParticleParams,
    band: (f64, f64),
) -> Result<Vec<PoleRecord>> {
    let (blo, bhi) = band;
    if !(blo >= 0.0 && bhi > blo) {
        return Err(Error::Domain(format!("bad search band ({blo}, {bhi})")));
    }
    // precondition: the open band must not intersect the continuum
    // (endpoints may touch a support edge)
    let n_check = 257;
    for i in 0..n_check {
        let f = (i as f64 + 0.5) / n_check as f64;
        let uu = blo + f * (bhi - blo);
        if uu > 0.0 && env.mu_raw(uu) > 0.0 {
            return Err(Error::ModelInconsistency(format!(
                "search band ({blo}, {bhi}) intersects the continuum: Gamma({uu}) > 0"
            )));
        }
    }

    let omega2 = particle.omega * particle.omega;
    let g_of = |uu: f64| -> f64 {
        match delta_analytic(env, particle, uu) {
            Ok(d) => uu * uu - omega2 - d,
            Err(_) => f64::NAN,
        }
    };

    let mut poles = Vec::new();

    // edge-pinned root: band starts at a positive jump of mu
    let mut interior_lo = blo;
    if let Some(e) = env.jump_edge() {
        if (blo - e).abs() <= 1e-9 * e {
            let mu_edge = env.mu_raw(e * (1.0 - 1e-9));
            if mu_edge > 0.0 {
                let s_hi_from_band = if bhi >= 2.0 * e { 0.0 } else { -(bhi / e - 1.0).ln() };
                if let Some(p) = edge_pole(env, particle, e, mu_edge, s_hi_from_band) {
                    poles.push(p);
                }
                interior_lo = (2.0 * e).min(bhi);
            }
        }
    }

    // plain scan over the remaining band
    if interior_lo < bhi {
        let n_scan = 2048;
        let mut prev_u = f64::NAN;
        let mut prev_g = f64::NAN;
        for i in 0..=n_scan {
            let uu = interior_lo + (bhi - interior_lo) * i as f64 / n_scan as f64;
            let gv = g_of(uu);
            if !gv.is_finite() {
                continue;
            }
            if prev_g.is_finite() && gv.signum() != prev_g.signum() {
                if let Some(root) = quadrature::bisect(g_of, prev_u, uu, 1e-14) {
                    let z = root * root;
                    let weight = interior_weight(env, particle, z);
                    poles.push(PoleRecord { nu_star_sq: z, weight, kind: PoleKind::Interior });
                }
            }
            prev_u = uu;
            prev_g = gv;
        }
    }

    poles.sort_by(|a, b| a.nu_star_sq.total_cmp(&b.nu_star_sq));
    Ok(poles)
}

/// Residue weight `1/(1 - dDelta~/dz)` by central difference in `z = u^2`
/// with relative step 1e-6.
fn interior_weight(env: &SpectralDensity, particle: &ParticleParams, z: f64) -> f64 {
    let h = 1e-6;
    let dp = delta_analytic(env, particle, (z * (1.0 + h)).sqrt()).unwrap_or(f64::NAN);
    let dm = delta_analytic(env, particle, (z * (1.0 - h)).sqrt()).unwrap_or(f64::NAN);
    let deriv = (dp - dm) / (2.0 * z * h);
    1.0 / (1.0 - deriv)
}

/// Root search in `s = -ln((u - e)/e)`: the edge log-divergence makes
/// `g(u(s))` asymptotically linear in `s` (decreasing, since `Delta ~ C s`),
/// so the root is representable in `s` even when `u* - e` underflows.
fn edge_pole(
    env: &SpectralDensity,
    particle: &ParticleParams,
    e: f64,
    mu_edge: f64,
    s_min: f64,
) -> Option<PoleRecord> {
    let omega2 = particle.omega * particle.omega;
    let g_edge = |s: f64| -> f64 {
        let u = e * (1.0 + (-s).exp());
        u * u - omega2 - delta_at_edge(env, particle, e, s)
    };
    let s_lo = s_min.max(1e-3);
    let g_lo = g_edge(s_lo);
    if g_lo <= 0.0 {
        // already negative at the pinned region's outer rim; any root
        // further out belongs to the plain scan
        return None;
    }
    let mut s_hi = (2.0 * s_lo).max(64.0);
    let mut g_hi = g_edge(s_hi);
    let mut tries = 0;
    while g_hi > 0.0 && tries < 60 {
        s_hi *= 2.0;
        g_hi = g_edge(s_hi);
        tries += 1;
    }
    if g_hi > 0.0 {
        return None;
    }
    let s_star = quadrature::bisect(g_edge, s_lo, s_hi, 1e-14)?;

    let u_star = e * (1.0 + (-s_star).exp());
    let z = u_star * u_star;
    if s_star < 11.0 {
        // root far enough from the edge for the finite-difference weight
        let weight = interior_weight(env, particle, z);
        return Some(PoleRecord { nu_star_sq: z, weight, kind: PoleKind::Interior });
    }
    // dDelta~/dz ~ -C e^s / (2 e^2), C = e^3 mu(e-) / 2m
    let c_edge = e * e * e * mu_edge / (2.0 * particle.mass);
    let ln_arg = (c_edge / (2.0 * e * e)).ln() + s_star;
    let (weight, ln_weight) = if ln_arg > 700.0 {
        (0.0, -ln_arg)
    } else {
        let w = 1.0 / (1.0 + ln_arg.exp());
        (w, w.ln())
    };
    Some(PoleRecord {
        nu_star_sq: z,
        weight,
        kind: PoleKind::CutoffEdge { edge: e, log_gap: s_star, ln_weight },
    })
}

/// Natural pole-search bands: every maximal `Gamma = 0` region adjacent to
/// or between support intervals (sharp-ohmic above-cutoff band, tabulated
/// gaps and the region above the grid).
pub fn gap_bands(env: &SpectralDensity, particle: &ParticleParams) -> Vec<(f64, f64)> {
    let sup = env.support();
    if sup.is_empty() {
        return Vec::new();
    }
    let top = sup.last().unwrap().1;
    if !top.is_finite() {
        return Vec::new(); // Drude-like: continuum everywhere
    }
    let upper = 4.0 * top.max(particle.omega).max(bath_scale(env, particle));
    let mut bands = Vec::new();
    if sup[0].0 > 0.0 {
        bands.push((0.0, sup[0].0));
    }
    for w in sup.windows(2) {
        bands.push((w[0].1, w[1].0));
    }
    bands.push((top, upper));
    bands
}

fn bath_scale(env: &SpectralDensity, particle: &ParticleParams) -> f64 {
    match *env {
        SpectralDensity::OhmicSharp { eta, .. } | SpectralDensity::Drude { eta, .. } => {
            eta / particle.mass
        }
        _ => particle.omega,
    }
}

/// The response pair `(Gamma, Delta)` plus any real poles, ready for the
/// continuum-limit moment integrals.
#[derive(Debug, Clone)]
pub struct BathResponse<'a> {
    env: &'a SpectralDensity,
    particle: ParticleParams,
    poles: Vec<PoleRecord>,
}

impl<'a> BathResponse<'a> {
    /// Builds the response and auto-detects real poles in the natural gap
    /// bands. A null environment carries the bare particle pole
    /// `(Omega^2, weight 1)`.
    pub fn new(env: &'a SpectralDensity, particle: ParticleParams) -> Result<Self> {
        env.validate()?;
        let poles = if env.is_null() {
            vec![PoleRecord {
                nu_star_sq: particle.omega * particle.omega,
                weight: 1.0,
                kind: PoleKind::Interior,
            }]
        } else {
            let mut all = Vec::new();
            for band in gap_bands(env, &particle) {
                if band.1 > band.0 {
                    all.extend(find_real_poles(env, &particle, band)?);
                }
            }
            all
        };
        Ok(Self { env, particle, poles })
    }

    pub fn env(&self) -> &SpectralDensity {
        self.env
    }

    pub fn particle(&self) -> &ParticleParams {
        &self.particle
    }

    pub fn gamma(&self, u: f64) -> f64 {
        std::f64::consts::PI * u * u * self.env.mu_raw(u) / (2.0 * self.particle.mass)
    }

    pub fn delta(&self, u: f64) -> f64 {
        delta_analytic(self.env, &self.particle, u).unwrap_or(f64::NAN)
    }

    pub fn poles(&self) -> &[PoleRecord] {
        &self.poles
    }
}
