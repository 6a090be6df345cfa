//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]`/`[FAIL]` line with the measured figure (run with
//! `cargo test -p qbath --test acceptance -- --nocapture` to see them).

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qbath::equilibrium::{
    density_matrix, effective_mass, effective_temperature, entropy_of, equilibrium_state,
    purity_from_moments, q2_mean, weighted_integral,
};
use qbath::finite_bath::{build_matrix, decompose, discretize_with_band, exact_moments, Strategy};
use qbath::interferometer::{
    chi, coherence_length, high_energy_tau, sampled_contrast, scattering_solve, Junction,
};
use qbath::{BathResponse, ParticleParams, SpectralDensity};

fn reduced() -> ParticleParams {
    ParticleParams::reduced()
}

fn ohmic(eta: f64, omega_c: f64) -> SpectralDensity {
    SpectralDensity::OhmicSharp { eta, omega_c }
}

struct Criterion {
    name: &'static str,
    started: Instant,
    limit_s: f64,
}

impl Criterion {
    fn start(name: &'static str, limit_s: f64) -> Self {
        Self { name, started: Instant::now(), limit_s }
    }

    fn finish(self, ok: bool, detail: String) {
        let dt = self.started.elapsed().as_secs_f64();
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("[{verdict}] {} ({dt:.2} s): {detail}", self.name);
        assert!(ok, "{} failed: {detail}", self.name);
        assert!(
            dt < self.limit_s,
            "{} exceeded its {} s runtime budget ({dt:.2} s)",
            self.name,
            self.limit_s
        );
    }
}

#[test]
fn criterion_01_decoupled_limit_exactness() {
    let c = Criterion::start("criterion 1: decoupled-limit exactness", 1.0);
    let p = reduced();
    let env = ohmic(0.0, 100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let t: f64 = rng.gen_range(0.1..10.0);
        let st = equilibrium_state(&env, &p, t, false).unwrap();
        let coth = 1.0 / (1.0 / (2.0 * t)).tanh();
        let q2_exact = 0.5 * coth;
        worst = worst
            .max((st.t_eff / t - 1.0).abs())
            .max((st.m_eff - 1.0).abs())
            .max((st.q2 / q2_exact - 1.0).abs());
    }
    c.finish(worst < 1e-9, format!("max relative error {worst:.3e} (tolerance 1e-9)"));
}

#[test]
fn criterion_02_oracle_equivalence() {
    let c = Criterion::start("criterion 2: continuum vs exact-diagonalization oracle", 60.0);
    let p = reduced();
    let temps = [0.0, 1.0];
    let mut ok = true;
    let mut detail = String::new();
    for eta in [0.1, 0.5, 1.0] {
        let env = ohmic(eta, 100.0);
        let continuum: Vec<(f64, f64)> = temps
            .iter()
            .map(|&t| {
                let st = equilibrium_state(&env, &p, t, false).unwrap();
                (st.q2, st.p2)
            })
            .collect();
        let mut errs = Vec::new();
        for n in [500usize, 1000, 2000, 4000] {
            // refine both discretisation parameters together: the band edge
            // shifts the resonance by ~ 2 eta omega_min / pi, a bias no bin
            // count can remove, so the study scales it as 1/N down to the
            // default 1e-3 at N = 4000
            let omega_min = 1e-3 * (4000.0 / n as f64);
            let bath =
                discretize_with_band(&env, &p, n, Strategy::Log, (omega_min, 100.0)).unwrap();
            let modes = decompose(&build_matrix(&bath).unwrap()).unwrap();
            let mut worst = 0.0f64;
            for (i, &t) in temps.iter().enumerate() {
                let (q2, p2) = exact_moments(&modes, &p, t).unwrap();
                worst = worst
                    .max((q2 / continuum[i].0 - 1.0).abs())
                    .max((p2 / continuum[i].1 - 1.0).abs());
            }
            errs.push(worst);
        }
        let monotone = errs.windows(2).all(|w| w[1] < w[0]);
        let within = *errs.last().unwrap() < 0.01;
        ok &= monotone && within;
        detail.push_str(&format!(
            "eta={eta}: err(N)={:?} monotone={monotone} final<1%={within}; ",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
        ));
    }
    c.finish(ok, detail);
}

#[test]
fn criterion_03_effective_temperature_asymptote() {
    let c = Criterion::start("criterion 3: T~(0) weak-coupling asymptote", 10.0);
    let p = reduced();
    let (eta, wc) = (0.05, 1e4);
    let st = equilibrium_state(&ohmic(eta, wc), &p, 0.0, false).unwrap();
    let gamma_par = eta * (wc / 1.0f64).ln();
    let asym = 1.0 / (2.0 * std::f64::consts::PI / gamma_par).ln();
    let rel = (st.t_eff / asym - 1.0).abs();
    c.finish(rel < 0.10, format!("kT~(0) = {:.6}, asymptote {asym:.6}, rel {rel:.3} (tol 0.10)", st.t_eff));
}

#[test]
fn criterion_04_effective_mass_asymptote() {
    let c = Criterion::start("criterion 4: m~(0) weak-coupling asymptote", 10.0);
    let p = reduced();
    let (eta, wc) = (0.05, 1e4);
    let st = equilibrium_state(&ohmic(eta, wc), &p, 0.0, false).unwrap();
    let gamma_par = eta * (wc / 1.0f64).ln();
    let asym = 1.0 + gamma_par / std::f64::consts::PI;
    let rel = (st.m_eff / asym - 1.0).abs();
    c.finish(rel < 0.10, format!("m~(0) = {:.6}, asymptote {asym:.6}, rel {rel:.3} (tol 0.10)", st.m_eff));
}

#[test]
fn criterion_05_coherence_length_asymptote() {
    let c = Criterion::start("criterion 5: xi^2(0) weak-coupling asymptote", 10.0);
    let p = reduced();
    let (eta, wc) = (0.02, 1e4);
    let st = equilibrium_state(&ohmic(eta, wc), &p, 0.0, false).unwrap();
    let xi = coherence_length(st.t_eff, st.m_eff, &p).unwrap();
    let asym_sq = (1.0 / eta) * std::f64::consts::PI / (4.0 * (wc / 1.0f64).ln());
    let rel = (xi * xi / asym_sq - 1.0).abs();
    c.finish(
        rel < 0.15,
        format!("xi^2(0) = {:.4}, asymptote {asym_sq:.4}, rel {rel:.3} (tol 0.15)", xi * xi),
    );
}

#[test]
fn criterion_06_figure_shape_properties() {
    let c = Criterion::start("criterion 6: figure-shape properties on the (T, eta) grid", 120.0);
    let p = reduced();
    let mut ok = true;
    let mut detail = String::new();
    for eta in [0.1, 0.5, 1.0] {
        let env = ohmic(eta, 100.0);
        let mut t_effs = Vec::new();
        let mut entropies = Vec::new();
        let mut xis = Vec::new();
        for i in 0..40 {
            let t = 5.0 * i as f64 / 39.0;
            let st = equilibrium_state(&env, &p, t, false).unwrap();
            t_effs.push(st.t_eff);
            entropies.push(st.entropy);
            xis.push(coherence_length(st.t_eff, st.m_eff, &p).unwrap());
        }
        let t_mono = t_effs.windows(2).all(|w| w[1] >= w[0]);
        let s_mono = entropies.windows(2).all(|w| w[1] >= w[0]);
        let xi_mono = xis.windows(2).all(|w| w[1] <= w[0]);
        let residual = t_effs[0] > 0.0 && entropies[0] > 0.0 && xis[0].is_finite();
        let st_hot = equilibrium_state(&env, &p, 100.0, false).unwrap();
        let classical = (st_hot.t_eff / 100.0 - 1.0).abs() < 0.05;
        ok &= t_mono && s_mono && xi_mono && residual && classical;
        detail.push_str(&format!(
            "eta={eta}: T~ mono={t_mono} S mono={s_mono} xi mono={xi_mono} residual(T~(0)={:.3},S(0)={:.3},xi(0)={:.3}) T~/T@100={:.4}; ",
            t_effs[0], entropies[0], xis[0], st_hot.t_eff / 100.0
        ));
    }
    c.finish(ok, detail);
}

#[test]
fn criterion_07_uncertainty_and_purity() {
    let c = Criterion::start("criterion 7: Heisenberg bound and purity identity", 120.0);
    let p = reduced();
    let mut ok = true;
    let mut worst_purity = 0.0f64;
    for eta in [0.1, 0.5, 1.0] {
        let env = ohmic(eta, 100.0);
        for i in 0..40 {
            let t = 5.0 * i as f64 / 39.0;
            let st = equilibrium_state(&env, &p, t, false).unwrap();
            ok &= st.q2 * st.p2 >= 0.25 * (1.0 - 1e-8);
            // purity two ways: hbar/2 sqrt(q2 p2) vs the Fock sum tanh(x/2)
            let direct = purity_from_moments(st.q2, st.p2, &p).unwrap();
            let x = 1.0 / st.t_eff;
            let z = 1.0 - (-x).exp();
            let fock: f64 = (0..400).map(|n| (z * (-(n as f64) * x).exp()).powi(2)).sum();
            worst_purity = worst_purity.max((direct - fock).abs());
        }
    }
    ok &= worst_purity < 1e-10;
    c.finish(ok, format!("bound held on 3x40 grid; purity route mismatch {worst_purity:.2e} (tol 1e-10)"));
}

#[test]
fn criterion_08_contrast_identity() {
    let c = Criterion::start("criterion 8: sampled contrast equals closed form", 10.0);
    let p = reduced();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let t_eff: f64 = rng.gen_range(0.2..2.0);
        let m_eff: f64 = rng.gen_range(0.5..2.0);
        let x: f64 = rng.gen_range(0.0..3.0);
        let coth = 1.0 / (1.0 / (2.0 * t_eff)).tanh();
        let q2 = coth / (2.0 * m_eff);
        let p2 = m_eff * coth / 2.0;
        let dm = density_matrix(q2, p2, &p).unwrap();
        let xi = coherence_length(t_eff, m_eff, &p).unwrap();
        let closed = (-(x * x) / (2.0 * xi * xi)).exp();
        let sampled = sampled_contrast(&dm, x);
        worst = worst.max((sampled - closed).abs());
    }
    c.finish(worst < 1e-10, format!("max |sampled - closed| = {worst:.2e} (tol 1e-10)"));
}

#[test]
fn criterion_09_scattering_limits() {
    let c = Criterion::start("criterion 9: scattering limits", 30.0);
    let p = reduced();

    // alpha = 0: exact trivial solution
    let trivial = Junction {
        half_separation: 0.8,
        alpha: 0.0,
        epsilon: 0.1,
        k: 4.1,
        n_incident: 1,
        n_channels: 0,
        particle: p,
    };
    let sol0 = scattering_solve(&trivial).unwrap();
    let trivial_ok = sol0.s1.norm() == 0.0
        && sol0.s2.norm() == 0.0
        && sol0
            .t
            .iter()
            .enumerate()
            .all(|(n, t)| *t == Complex64::new(if n == 1 { 1.0 } else { 0.0 }, 0.0));

    // high energy: longitudinal energy 1e4 times the incident transverse one
    let high = Junction {
        half_separation: 0.7,
        alpha: 0.2,
        epsilon: 0.05,
        k: 100.003,
        n_incident: 0,
        n_channels: 0,
        particle: p,
    };
    let sol = scattering_solve(&high).unwrap();
    let ratio = sol.s1.norm() / sol.s2.norm();
    let chi_ratio = (chi(0, 0.7, &p).unwrap() / chi(0, -0.7, &p).unwrap()).abs();
    let ratio_ok = (ratio / chi_ratio - 1.0).abs() < 5e-3;
    let tau = high_energy_tau(&high);
    let s1_ok = (sol.s1 - tau * chi(0, 0.7, &p).unwrap()).norm() / sol.s1.norm() < 5e-3;

    // continuity identity on every solved instance
    let mut cont = 0.0f64;
    for sol in [&sol0, &sol] {
        for (n, (&t, &r)) in sol.t.iter().zip(&sol.r).enumerate() {
            let d = if n == if sol.s1.norm() == 0.0 { 1 } else { 0 } { 1.0 } else { 0.0 };
            cont = cont.max((t - d - r).norm());
        }
    }
    let cont_ok = cont <= 1e-12;

    c.finish(
        trivial_ok && ratio_ok && s1_ok && cont_ok,
        format!(
            "trivial={trivial_ok}, |s1/s2|/|chi ratio| - 1 = {:.2e} (tol 5e-3), s1 vs tau chi ok={s1_ok}, continuity residual {cont:.2e} (tol 1e-12)",
            (ratio / chi_ratio - 1.0).abs()
        ),
    );
}

#[test]
fn criterion_10_sum_rules() {
    let c = Criterion::start("criterion 10: eigenbasis sum rules", 30.0);
    let p = reduced();
    let mut ok = true;
    let mut detail = String::new();
    for eta in [0.1, 0.5, 1.0] {
        let env = ohmic(eta, 100.0);
        let resp = BathResponse::new(&env, p).unwrap();
        let one = weighted_integral(|_| 1.0, &resp, true).unwrap().value;
        let nu2 = weighted_integral(|v| v, &resp, true).unwrap().value;
        let expect = 1.0 + 2.0 * eta * 100.0 / std::f64::consts::PI;
        let e1 = (one - 1.0).abs();
        let e2 = (nu2 / expect - 1.0).abs();
        ok &= e1 < 1e-6 && e2 < 1e-4;
        detail.push_str(&format!("eta={eta}: |M[1]-1|={e1:.2e} (tol 1e-6), nu^2 rel={e2:.2e} (tol 1e-4); "));
    }
    c.finish(ok, detail);
}

// The remaining examples the criteria reference implicitly: q2_mean at
// finite temperature against the oracle is covered by criterion 2; the
// response-level identities live in the unit suites.
#[test]
fn pipeline_smoke_q2_matches_closed_form_at_zero_coupling() {
    let p = reduced();
    let env = ohmic(0.0, 50.0);
    let q2 = q2_mean(&env, &p, 0.0, false).unwrap();
    assert_eq!(q2, 0.5);
    assert_eq!(effective_temperature(q2, 0.5, &p).unwrap(), 0.0);
    assert_eq!(effective_mass(q2, 0.5, &p).unwrap(), 1.0);
    assert_eq!(entropy_of(0.0, &p).unwrap(), 0.0);
}
