//! Supporting identities: the log-covariance series, the Fejér/Parseval
//! identity, ball energies, √m decay of `∫|F[g]|^m`, and a self-test suite
//! running all of them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use super::{h1_real_zeros, h_k_root, q_func, QDeriv};
use crate::error::{domain, Error, Result};
use crate::quad::CompositeGl;
use crate::spectral::{Atom, GridDensity, SpectralMeasure};

/// Dilogarithm `Li₂(x) = Σ x^k/k²` for `0 ≤ x < 1`.
pub fn dilog(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x > 0.5 {
        return PI * PI / 6.0 - x.ln() * (-x).ln_1p() - dilog(1.0 - x);
    }
    let mut term = x;
    let mut sum = 0.0;
    for k in 1..200 {
        let add = term / (k * k) as f64;
        sum += add;
        if add < 1e-18 * sum {
            break;
        }
        term *= x;
    }
    sum
}

/// `cov(log|ξ|, log|η|) = ¼ Σ θ^{2k}/k²` for standard complex Gaussians with `|E ξη̄| = θ`.
pub fn log_cov_series(theta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta) {
        return domain(format!("theta must lie in [0, 1), got {theta}"));
    }
    Ok(0.25 * dilog(theta * theta))
}

/// Sample estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Monte Carlo `cov(log|ξ|, log|η|)` with `η = θξ + √(1−θ²)ζ`.
pub fn log_cov_monte_carlo(theta: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    if !(0.0..1.0).contains(&theta) {
        return domain(format!("theta must lie in [0, 1), got {theta}"));
    }
    if samples < 2 {
        return domain("need at least two samples");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = (1.0 - theta * theta).sqrt();
    let mut xs = Vec::with_capacity(samples);
    let mut ys = Vec::with_capacity(samples);
    for _ in 0..samples {
        let xi = complex_normal(&mut rng);
        let zeta = complex_normal(&mut rng);
        xs.push(xi.norm().ln());
        ys.push((theta * xi + c * zeta).norm().ln());
    }
    let n = samples as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let prods: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    let mp = prods.iter().sum::<f64>() / n;
    let var = prods.iter().map(|p| (p - mp).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate { value: cov, se: (var / n).sqrt() })
}

/// `P(a < y* < b)` for a two-atom measure, by sampling the two coefficients.
pub fn two_atom_probability_monte_carlo(
    m: &SpectralMeasure,
    a: f64,
    b: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let atoms = m.atoms();
    if atoms.len() != 2 || m.density().is_some() {
        return domain("needs a measure made of exactly two atoms");
    }
    let [Atom { location: l1, mass: w1 }, Atom { location: l2, mass: w2 }] = [atoms[0], atoms[1]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x1 = complex_normal(&mut rng);
        let x2 = complex_normal(&mut rng);
        let y = ((w2.sqrt() * x2.norm()) / (w1.sqrt() * x1.norm())).ln() / (2.0 * PI * (l2 - l1));
        if a < y && y < b {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    Ok(McEstimate { value: p, se: (p * (1.0 - p) / samples as f64).sqrt() })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Both sides of `∫_{−2T}^{2T} (1 − |x|/2T) F[γ](x) dx = ∫ 2T sinc²(2πTξ) dγ(ξ)`.
pub fn fejer_parseval_check(gamma: &SpectralMeasure, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("T must be positive, got {t}"));
    }
    let mut points: Vec<(f64, f64)> = gamma.atoms().iter().map(|a| (a.location, a.mass)).collect();
    if let Some(d) = gamma.density() {
        points.extend(d.midpoints().zip(d.values()).map(|(l, v)| (l, v * d.h())).filter(|p| p.1 != 0.0));
    }
    let rhs: f64 = points.iter().map(|&(l, w)| w * 2.0 * t * sinc(2.0 * PI * t * l).powi(2)).sum();
    // Re F[γ] is even, so integrate over [0, 2T] and double.
    let radius = gamma.support_radius().max(1.0);
    let panels = (8.0 * t * radius).ceil() as usize + 8;
    let rule = CompositeGl::new(0.0, 2.0 * t, panels, 16);
    let lhs = 2.0
        * rule.integrate(|x| {
            let re: f64 = points.iter().map(|&(l, w)| w * (2.0 * PI * x * l).cos()).sum();
            (1.0 - x / (2.0 * t)) * re
        });
    if !(lhs.is_finite() && rhs.is_finite()) {
        return Err(Error::Numeric("Fejér/Parseval sides are not finite".into()));
    }
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallEnergy {
    /// `(1/2ε) ∫ μ(τ−ε, τ+ε) dμ(τ)` for each ε.
    pub values: Vec<f64>,
    /// `∫ |F[μ]|² = ∫ p²` for the piecewise-constant density; infinite with atoms.
    pub energy: f64,
}

/// Mass of the piecewise-constant density in `(lo, hi)`.
fn density_mass_between(d: &GridDensity, lo: f64, hi: f64) -> f64 {
    let h = d.h();
    let g0 = d.grid_min();
    let n = d.len() as i64;
    let i0 = (((lo - g0) / h).floor() as i64).clamp(0, n);
    let i1 = (((hi - g0) / h).ceil() as i64).clamp(0, n);
    let mut s = 0.0;
    for i in i0..i1 {
        let c0 = g0 + i as f64 * h;
        let overlap = (hi.min(c0 + h) - lo.max(c0)).max(0.0);
        s += d.values()[i as usize] * overlap;
    }
    s
}

pub fn mu_ball_energy_limit(mu: &SpectralMeasure, eps_list: &[f64]) -> Result<BallEnergy> {
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return domain("ball radii must be positive");
    }
    let atoms = mu.atoms();
    let mut values = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut acc = 0.0;
        for x in atoms {
            for y in atoms {
                if (x.location - y.location).abs() < eps {
                    acc += x.mass * y.mass;
                }
            }
        }
        if let Some(d) = mu.density() {
            for x in atoms {
                acc += 2.0 * x.mass * density_mass_between(d, x.location - eps, x.location + eps);
            }
            // Cell pairs at lag j overlap the band |s − t| < ε on area O_j.
            let h = d.h();
            let p = d.values();
            let area = |u: f64| h * u - 0.5 * u * u.abs();
            let max_lag = ((eps / h).ceil() as usize + 1).min(p.len() - 1);
            for lag in 0..=max_lag {
                let hi = h.min(eps - lag as f64 * h);
                let lo = (-h).max(-eps - lag as f64 * h);
                if hi <= lo {
                    continue;
                }
                let o = area(hi) - area(lo);
                let s: f64 = p.iter().zip(&p[lag..]).map(|(x, y)| x * y).sum();
                acc += if lag == 0 { o * s } else { 2.0 * o * s };
            }
        }
        values.push(acc / (2.0 * eps));
    }
    let energy = if !atoms.is_empty() {
        f64::INFINITY
    } else {
        mu.density().map_or(0.0, |d| d.h() * d.values().iter().map(|v| v * v).sum::<f64>())
    };
    Ok(BallEnergy { values, energy })
}

/// `(m, √m ∫|F[g]|^m dx)` for `m = 2..=m_max`, with `F[g]` the transform of the
/// grid measure integrated over one period `1/h` by the trapezoid rule.
pub fn clt_decay_check(g: &GridDensity, m_max: u32) -> Result<Vec<(u32, f64)>> {
    if m_max < 2 {
        return domain("m_max must be at least 2");
    }
    let mass = g.mass();
    if (mass - 1.0).abs() > 1e-6 {
        return domain(format!("density must have unit mass, got {mass}"));
    }
    let n = (256 * g.len()).next_power_of_two().clamp(1 << 16, 1 << 22);
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> =
        g.values().iter().map(|&v| rustfft::num_complex::Complex::new(v * g.h(), 0.0)).collect();
    buf.resize(n, rustfft::num_complex::Complex::new(0.0, 0.0));
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let modulus: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
    let dx = 1.0 / (n as f64 * g.h());
    Ok((2..=m_max)
        .map(|m| {
            let s: f64 = modulus.iter().map(|a| a.powi(m as i32)).sum();
            (m, (m as f64).sqrt() * s * dx)
        })
        .collect())
}

/// Relative change of the sequence over its last decade of `m`.
pub fn clt_last_decade_change(seq: &[(u32, f64)]) -> f64 {
    let (m_last, v_last) = *seq.last().unwrap();
    let target = (m_last / 10).max(seq[0].0);
    let v = seq.iter().find(|(m, _)| *m >= target).unwrap().1;
    ((v_last - v) / v_last).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, detail }
}

fn failed(name: impl Into<String>, e: Error) -> CheckResult {
    check(name, false, format!("error: {e}"))
}

/// Test measures shared by the identity checks.
pub fn identity_test_measures() -> Result<Vec<(&'static str, SpectralMeasure)>> {
    Ok(vec![
        ("gaussian", SpectralMeasure::from_density(GridDensity::gaussian(-6.0, 6.0, 1.0 / 64.0)?, 1.0)?),
        ("uniform", SpectralMeasure::from_density(GridDensity::uniform(-1.0, 1.0, 1.0 / 128.0)?, 1.0)?),
        (
            "two-atom",
            SpectralMeasure::new(
                vec![Atom { location: -0.5, mass: 0.3 }, Atom { location: 1.2, mass: 0.7 }],
                None,
                false,
                1.0,
            )?,
        ),
    ])
}

pub fn parseval_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let measures = match identity_test_measures() {
        Ok(m) => m,
        Err(e) => return vec![failed("parseval", e)],
    };
    for ((name, m), t) in measures.iter().zip([1.0, 1.5, 0.7]) {
        let label = format!("parseval/{name}");
        match fejer_parseval_check(m, t) {
            Ok((lhs, rhs)) => {
                let rel = (lhs - rhs).abs() / rhs.abs();
                out.push(check(label, rel < 1e-6, format!("T = {t}: lhs {lhs:.12}, rhs {rhs:.12}, rel {rel:.2e}")));
            }
            Err(e) => out.push(failed(label, e)),
        }
    }
    out
}

/// q ∈ [0,1], q(0,t,t) = 1, q_a(0,t,t) = 0, sup_x q < 1 off the diagonal.
pub fn q_property_check(name: &str, m: &SpectralMeasure) -> CheckResult {
    let label = format!("q-properties/{name}");
    let run = || -> Result<(bool, String)> {
        let lim = 0.8 * m.delta();
        let ys: Vec<f64> = (0..10).map(|i| -lim + 2.0 * lim * i as f64 / 9.0).collect();
        let mut max_q: f64 = 0.0;
        let mut min_q = f64::INFINITY;
        for i in 0..100 {
            let x = -5.0 + 10.0 * i as f64 / 99.0;
            for &y1 in &ys {
                for &y2 in &ys {
                    let q = q_func(m, x, y1, y2, QDeriv::None)?;
                    max_q = max_q.max(q);
                    min_q = min_q.min(q);
                }
            }
        }
        let mut diag_err: f64 = 0.0;
        let mut grad: f64 = 0.0;
        for &t in &ys {
            diag_err = diag_err.max((q_func(m, 0.0, t, t, QDeriv::None)? - 1.0).abs());
            grad = grad.max(q_func(m, 0.0, t, t, QDeriv::D1)?.abs());
        }
        let mut sup_off: f64 = 0.0;
        for (a, b) in [(-0.3, 0.2), (0.0, 0.5), (-0.6, -0.1)] {
            for i in 0..=4000 {
                let x = -20.0 + 40.0 * i as f64 / 4000.0;
                sup_off = sup_off.max(q_func(m, x, a * m.delta(), b * m.delta(), QDeriv::None)?);
            }
        }
        let ok = min_q >= 0.0 && max_q <= 1.0 + 1e-12 && diag_err < 1e-12 && grad < 1e-8 && sup_off < 1.0 - 1e-9;
        Ok((
            ok,
            format!(
                "q ∈ [{min_q:.3e}, {max_q:.15}], |q(0,t,t)−1| ≤ {diag_err:.1e}, |q_a(0,t,t)| ≤ {grad:.1e}, off-diagonal sup {sup_off:.6}"
            ),
        ))
    };
    match run() {
        Ok((ok, detail)) => check(label, ok, detail),
        Err(e) => failed(label, e),
    }
}

/// Sign changes of the difference inside `h₁` on a wide grid, and the roots found.
pub fn h1_root_count(m: &SpectralMeasure, a: f64, b: f64) -> Result<(usize, (f64, f64))> {
    let roots = h1_real_zeros(m, a, b)?;
    let lo = roots.0 - 20.0;
    let hi = roots.1 + 20.0;
    let n = 200_000;
    let mut changes = 0;
    let mut prev = h_k_root(m, a, b, 1, lo)?;
    for i in 1..=n {
        let v = h_k_root(m, a, b, 1, lo + (hi - lo) * i as f64 / n as f64)?;
        if v != 0.0 && prev != 0.0 && v.signum() != prev.signum() {
            changes += 1;
        }
        if v != 0.0 {
            prev = v;
        }
    }
    Ok((changes, roots))
}

pub fn run_selftest() -> Vec<CheckResult> {
    let mut out = parseval_checks();
    match identity_test_measures() {
        Ok(ms) => {
            for (name, m) in &ms {
                out.push(q_property_check(name, m));
            }
            for (name, m) in ms.iter().take(2) {
                let label = format!("h1-two-roots/{name}");
                match h1_root_count(m, -0.2, 0.3) {
                    Ok((c, (z1, z2))) => {
                        out.push(check(label, c == 2, format!("{c} sign changes, roots {z1:.9}, {z2:.9}")))
                    }
                    Err(e) => out.push(failed(label, e)),
                }
            }
        }
        Err(e) => out.push(failed("test-measures", e)),
    }

    match log_cov_series(0.5) {
        Ok(v) => out.push(check(
            "log-cov/series",
            (v - 0.066_913_16).abs() < 1e-7,
            format!("¼Li₂(0.25) = {v:.10}"),
        )),
        Err(e) => out.push(failed("log-cov/series", e)),
    }
    match (log_cov_series(0.5), log_cov_monte_carlo(0.5, 1_000_000, 0x5eed)) {
        (Ok(v), Ok(mc)) => out.push(check(
            "log-cov/monte-carlo",
            (mc.value - v).abs() < 4.0 * mc.se,
            format!("MC {:.6} ± {:.6} vs {v:.6}", mc.value, mc.se),
        )),
        (Err(e), _) | (_, Err(e)) => out.push(failed("log-cov/monte-carlo", e)),
    }

    match GridDensity::gaussian(-6.0, 6.0, 1.0 / 64.0).and_then(|g| clt_decay_check(&g, 64)) {
        Ok(seq) => {
            let worst = seq.iter().map(|(_, v)| (v - 1.0).abs()).fold(0.0, f64::max);
            out.push(check("clt-decay/gaussian", worst < 1e-6, format!("max |√m∫|F|^m − 1| = {worst:.2e} for m ≤ 64")));
        }
        Err(e) => out.push(failed("clt-decay/gaussian", e)),
    }

    let eps = [0.2, 0.1, 0.05, 0.02, 0.01];
    match GridDensity::uniform(-1.0, 1.0, 1.0 / 256.0)
        .and_then(|d| SpectralMeasure::from_density(d, 1.0))
        .and_then(|m| mu_ball_energy_limit(&m, &eps))
    {
        Ok(be) => {
            let last = *be.values.last().unwrap();
            let monotone = be.values.windows(2).all(|w| w[1] >= w[0] - 1e-12);
            let below = be.values.iter().all(|v| *v <= be.energy + 1e-6);
            let rel = (last - be.energy).abs() / be.energy;
            out.push(check(
                "ball-energy/uniform",
                monotone && below && rel < 0.01,
                format!("values {:?}, energy {:.6}, rel gap {rel:.2e}", be.values, be.energy),
            ));
        }
        Err(e) => out.push(failed("ball-energy/uniform", e)),
    }
    out
}
