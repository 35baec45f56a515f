//! Closed-form and series quantities: mean zero density, the `q` function,
//! `l_k`/`h_k`, the variance series, and regime classification.

pub mod identities;
mod series;

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::quad::adaptive_simpson;
use crate::spectral::{SpectralMeasure, TailClass};
use crate::zeros::Rectangle;

pub use series::{
    linear_limit_l1, v_asymptotic, LinearLimit, SeriesResult, SeriesTerm, TermMethod,
    DEFAULT_K_MAX, LINEAR_LIMIT_FACTOR,
};

fn check_strip(m: &SpectralMeasure, y: f64, what: &str) -> Result<()> {
    if !(y.abs() < m.delta()) {
        return domain(format!("{what}: |{y}| is not below Δ = {}", m.delta()));
    }
    Ok(())
}

/// Mean number of zeros per unit area at height `y`:
/// `L(y) = 4π (m₀m₂ − m₁²)/m₀²`, the y-derivative of `m₁/m₀`.
pub fn mean_density(m: &SpectralMeasure, y: f64) -> Result<f64> {
    check_strip(m, y, "mean_density")?;
    let [m0, m1, m2] = m.exp_moments(y);
    if !(m0 > 0.0 && m0.is_finite() && m2.is_finite()) {
        return Err(Error::Numeric(format!("moments at y = {y} are not usable (m0 = {m0})")));
    }
    let mu = m1 / m0;
    // centered second moment, always ≥ 0 up to rounding
    let var = (m2 / m0 - mu * mu).max(0.0);
    Ok(4.0 * PI * var)
}

/// `E n_f(rect) = (t1 − t0) ∫_a^b L(y) dy`.
pub fn expected_count(m: &SpectralMeasure, rect: &Rectangle) -> Result<f64> {
    rect.check_strip(m.delta())?;
    if rect.a == rect.b {
        return Ok(0.0);
    }
    let err = std::cell::Cell::new(None);
    let integral = adaptive_simpson(
        |y| match mean_density(m, y) {
            Ok(v) => v,
            Err(e) => {
                err.set(Some(e));
                f64::NAN
            }
        },
        rect.a,
        rect.b,
        1e-8,
    );
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok((rect.t1 - rect.t0) * integral?)
}

/// Which derivative of `q` to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QDeriv {
    None,
    D1,
    D2,
    D12,
}

/// `q(x, y₁, y₂) = |r(x + iy₁ + iy₂)|² / (r(2iy₁) r(2iy₂))` and its partials in `y₁`, `y₂`.
pub fn q_func(m: &SpectralMeasure, x: f64, y1: f64, y2: f64, deriv: QDeriv) -> Result<f64> {
    check_strip(m, y1, "q_func")?;
    check_strip(m, y2, "q_func")?;
    let w = Complex64::new(x, y1 + y2);
    let r = m.eval_r(w, 0)?;
    let n = r.norm_sqr();
    let [a0, a1, _] = m.exp_moments(y1);
    let [b0, b1, _] = m.exp_moments(y2);
    let d = a0 * b0;
    if deriv == QDeriv::None {
        return Ok(n / d);
    }
    let r1 = m.eval_r(w, 1)?;
    // ∂w/∂y = i for both heights, so ∂N/∂y₁ = ∂N/∂y₂.
    let n1 = 2.0 * (r.conj() * Complex64::i() * r1).re;
    let d1 = 4.0 * PI * a1 * b0;
    let d2 = 4.0 * PI * a0 * b1;
    match deriv {
        QDeriv::D1 => Ok((n1 * d - n * d1) / (d * d)),
        QDeriv::D2 => Ok((n1 * d - n * d2) / (d * d)),
        _ => {
            let r2 = m.eval_r(w, 2)?;
            let n12 = 2.0 * (r1.norm_sqr() - (r.conj() * r2).re);
            let d12 = 16.0 * PI * PI * a1 * b1;
            Ok((n12 * d + n1 * d2 - n1 * d1 - n * d12) / (d * d) - 2.0 * (n1 * d - n * d1) * d2 / (d * d * d))
        }
    }
}

/// Returns `(r(2iy), −i r′(2iy)/r(2iy))`, checking that the latter is real.
fn log_derivative_on_axis(m: &SpectralMeasure, y: f64) -> Result<(f64, f64)> {
    let z = Complex64::new(0.0, 2.0 * y);
    let r = m.eval_r(z, 0)?;
    let r1 = m.eval_r(z, 1)?;
    let ratio = -Complex64::i() * r1 / r;
    let scale = ratio.re.abs().max(1.0);
    if ratio.im.abs() > 1e-10 * scale || r.im.abs() > 1e-10 * r.re.abs() {
        return Err(Error::Numeric(format!(
            "−i r′(2iy)/r(2iy) at y = {y} has imaginary residue {}",
            ratio.im
        )));
    }
    Ok((r.re, ratio.re))
}

/// `l^y_k(λ) = (2/r^k(2iy)) (−ik r′(2iy)/r(2iy) + πλ)`.
pub fn l_k(m: &SpectralMeasure, y: f64, k: u32, lambda: f64) -> Result<f64> {
    check_strip(m, y, "l_k")?;
    if k == 0 {
        return domain("l_k needs k ≥ 1");
    }
    let (r, g) = log_derivative_on_axis(m, y)?;
    Ok(2.0 / r.powi(k as i32) * (k as f64 * g + PI * lambda))
}

/// `h^{a,b}_k(λ) = (l^a_k(λ) e^{2πaλ} − l^b_k(λ) e^{2πbλ})²`.
pub fn h_k(m: &SpectralMeasure, a: f64, b: f64, k: u32, lambda: f64) -> Result<f64> {
    Ok(h_k_root(m, a, b, k, lambda)?.powi(2))
}

/// The difference inside the square of `h_k`.
pub fn h_k_root(m: &SpectralMeasure, a: f64, b: f64, k: u32, lambda: f64) -> Result<f64> {
    Ok(l_k(m, a, k, lambda)? * (2.0 * PI * a * lambda).exp() - l_k(m, b, k, lambda)? * (2.0 * PI * b * lambda).exp())
}

/// `ψ(y) = 2 m₁(y)/m₀(y)`, the zero of `l^y_1`.
pub fn psi(m: &SpectralMeasure, y: f64) -> Result<f64> {
    check_strip(m, y, "psi")?;
    let [m0, m1, _] = m.exp_moments(y);
    Ok(2.0 * m1 / m0)
}

/// The two real zeros `z₁ < ψ(a) < ψ(b) < z₂` of `h^{a,b}_1`.
pub fn h1_real_zeros(m: &SpectralMeasure, a: f64, b: f64) -> Result<(f64, f64)> {
    if m.is_degenerate() {
        return domain("h1_real_zeros needs a non-degenerate measure");
    }
    if !(a < b) {
        return domain(format!("h1_real_zeros needs a < b, got a = {a}, b = {b}"));
    }
    let pa = psi(m, a)?;
    let pb = psi(m, b)?;
    if !(pa < pb) {
        return Err(Error::Convergence(format!("ψ(a) = {pa} is not below ψ(b) = {pb}")));
    }
    let c = m.exp_moments(b)[0] / m.exp_moments(a)[0];
    // e^{2π(b−a)λ} = C (λ − ψa)/(λ − ψb) in log form; increasing on both outer branches.
    let phi = |l: f64| 2.0 * PI * (b - a) * l - c.ln() - ((l - pa) / (l - pb)).ln();
    const LIMIT: f64 = 1e6;

    let z1 = {
        let hi = pa - 1e-12 * pa.abs().max(1.0);
        let mut step = 1.0;
        let mut lo = pa - step;
        while phi(lo) >= 0.0 {
            step *= 2.0;
            lo = pa - step;
            if lo < -LIMIT {
                return Err(Error::Convergence("no sign change of h₁ below ψ(a) within 10⁶".into()));
            }
        }
        bisect(phi, lo, hi)?
    };
    let z2 = {
        let lo = pb + 1e-12 * pb.abs().max(1.0);
        let mut step = 1.0;
        let mut hi = pb + step;
        while phi(hi) <= 0.0 {
            step *= 2.0;
            hi = pb + step;
            if hi > LIMIT {
                return Err(Error::Convergence("no sign change of h₁ above ψ(b) within 10⁶".into()));
            }
        }
        bisect(phi, lo, hi)?
    };
    Ok((z1, z2))
}

/// Root of an increasing function with `f(lo) < 0 < f(hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::Convergence(format!("no bracket on [{lo}, {hi}]")));
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form limit of `V(T)/T²` for a measure made of exactly two atoms.
///
/// The zeros then sit on one horizontal line at height
/// `y* = log(√w₂|ξ₂| / (√w₁|ξ₁|)) / (2π(λ₂ − λ₁))` with spacing `1/(λ₂ − λ₁)`,
/// so `n/T → (λ₂ − λ₁)·1{a < y* < b}`. With `R = |ξ₂|²/|ξ₁|²`, `P(R ≤ t) = t/(1+t)`.
pub fn two_atom_l2(m: &SpectralMeasure, a: f64, b: f64) -> Option<f64> {
    let p = two_atom_probability(m, a, b)?;
    let [x, y] = [m.atoms()[0], m.atoms()[1]];
    let gap = y.location - x.location;
    Some(gap * gap * p * (1.0 - p))
}

/// `P(a < y* < b)` for a two-atom measure.
pub fn two_atom_probability(m: &SpectralMeasure, a: f64, b: f64) -> Option<f64> {
    if m.atoms().len() != 2 || m.density().is_some() || m.singular_flag() {
        return None;
    }
    let [x, y] = [m.atoms()[0], m.atoms()[1]];
    let gap = y.location - x.location;
    let ratio = x.mass / y.mass;
    let cdf = |t: f64| if t.is_infinite() { 1.0 } else { t / (1.0 + t) };
    let lo = ratio * (4.0 * PI * gap * a).exp();
    let hi = ratio * (4.0 * PI * gap * b).exp();
    Some((cdf(hi) - cdf(lo)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Quadratic,
    Linear,
    Superlinear,
    Undetermined,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Quadratic => "Quadratic",
            Regime::Linear => "Linear",
            Regime::Superlinear => "Superlinear",
            Regime::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

/// Outcome of the regime classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    pub fired_condition: String,
    pub a: f64,
    pub b: f64,
    /// `lim V(T)/T` over `[0, T] × [a, b]`; `+∞` for super-linear growth.
    pub l1: Option<f64>,
    /// `lim V(T)/T²`.
    pub l2: Option<f64>,
    pub k_truncation: u32,
    pub tail_bound: f64,
    pub diagnostic: String,
}

impl RegimeReport {
    pub fn to_json(&self) -> serde_json::Value {
        let num = |v: Option<f64>| match v {
            None => serde_json::Value::Null,
            Some(x) if x.is_infinite() => serde_json::Value::String("inf".into()),
            Some(x) => serde_json::json!(x),
        };
        serde_json::json!({
            "regime": self.regime,
            "fired_condition": self.fired_condition,
            "a": self.a,
            "b": self.b,
            "L1": num(self.l1),
            "L2": num(self.l2),
            "k_truncation": self.k_truncation,
            "tail_bound": self.tail_bound,
            "diagnostic": self.diagnostic,
        })
    }

    /// Parses the object written by [`RegimeReport::to_json`].
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |what: &str| Error::Config(format!("regime report: missing or invalid `{what}`"));
        let num = |key: &str| -> Result<Option<f64>> {
            match v.get(key) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(serde_json::Value::String(s)) if s == "inf" => Ok(Some(f64::INFINITY)),
                Some(x) => x.as_f64().map(Some).ok_or_else(|| bad(key)),
            }
        };
        let regime = match v.get("regime").and_then(|r| r.as_str()) {
            Some("Quadratic") => Regime::Quadratic,
            Some("Linear") => Regime::Linear,
            Some("Superlinear") => Regime::Superlinear,
            Some("Undetermined") => Regime::Undetermined,
            _ => return Err(bad("regime")),
        };
        Ok(Self {
            regime,
            fired_condition: v.get("fired_condition").and_then(|s| s.as_str()).ok_or_else(|| bad("fired_condition"))?.into(),
            a: v.get("a").and_then(|x| x.as_f64()).ok_or_else(|| bad("a"))?,
            b: v.get("b").and_then(|x| x.as_f64()).ok_or_else(|| bad("b"))?,
            l1: num("L1")?,
            l2: num("L2")?,
            k_truncation: v.get("k_truncation").and_then(|x| x.as_u64()).unwrap_or(0) as u32,
            tail_bound: v.get("tail_bound").and_then(|x| x.as_f64()).unwrap_or(0.0),
            diagnostic: v.get("diagnostic").and_then(|s| s.as_str()).unwrap_or("").into(),
        })
    }
}

pub fn classify_regime(m: &SpectralMeasure, a: f64, b: f64) -> Result<RegimeReport> {
    classify_regime_with(m, a, b, DEFAULT_K_MAX)
}

/// Decision order: atoms, then no density, then square-integrability at both
/// heights, then non-removable non-L² mass, else undetermined.
pub fn classify_regime_with(m: &SpectralMeasure, a: f64, b: f64, k_max: u32) -> Result<RegimeReport> {
    if m.is_degenerate() {
        return domain("a single-atom measure has no zeros; there is no regime to classify");
    }
    if !(a > -m.delta() && a < b && b < m.delta()) {
        return domain(format!("need −Δ < a < b < Δ, got a = {a}, b = {b}, Δ = {}", m.delta()));
    }
    let mut report = RegimeReport {
        regime: Regime::Undetermined,
        fired_condition: String::new(),
        a,
        b,
        l1: None,
        l2: None,
        k_truncation: 0,
        tail_bound: 0.0,
        diagnostic: String::new(),
    };
    if m.has_atoms() {
        report.regime = Regime::Quadratic;
        report.fired_condition = "Thm1:atom".into();
        report.l2 = two_atom_l2(m, a, b);
        report.diagnostic = format!("{} atom(s) in the spectral measure", m.atoms().len());
        return Ok(report);
    }
    if m.singular_flag() || m.density().is_none() {
        report.regime = Regime::Superlinear;
        report.fired_condition = "Thm3:no-density".into();
        report.l1 = Some(f64::INFINITY);
        report.diagnostic = "spectral measure has no density".into();
        return Ok(report);
    }
    let ca = m.check_cond_l2(a)?;
    let cb = m.check_cond_l2(b)?;
    if ca.holds && cb.holds {
        let lim = linear_limit_l1(m, a, b, k_max)?;
        report.regime = Regime::Linear;
        report.fired_condition = "Thm2:condL2".into();
        report.l1 = Some(lim.l1);
        report.k_truncation = k_max;
        report.tail_bound = lim.tail_bound;
        report.diagnostic = "density square-integrable with weights at both heights".into();
        return Ok(report);
    }
    let failing = if ca.holds { &cb } else { &ca };
    if let Some(reason) = non_removable_mass(m, a, b) {
        report.regime = Regime::Superlinear;
        report.fired_condition = "Thm3:condInf".into();
        report.l1 = Some(f64::INFINITY);
        report.diagnostic = reason;
        return Ok(report);
    }
    report.regime = Regime::Undetermined;
    report.fired_condition = "Remark:gap".into();
    report.diagnostic = format!("{}; non-L² mass is confined to at most two points", failing.diagnostic);
    Ok(report)
}

/// Whether the annotations place non-square-integrable mass where no two small
/// intervals can remove it, for `y = a` or `y = b`.
fn non_removable_mass(m: &SpectralMeasure, a: f64, b: f64) -> Option<String> {
    let d = m.density()?;
    for y in [a, b] {
        if let Some(TailClass::Exponential { rate }) = d.tail() {
            if 4.0 * PI * y.abs() >= rate {
                return Some(format!("exponential tail of rate {rate} is not square-integrable against e^{{4π·{y}·λ}}"));
            }
        }
    }
    let mut bad: Vec<f64> = d.singularities().iter().filter(|s| s.exponent >= 0.5).map(|s| s.location).collect();
    bad.sort_by(f64::total_cmp);
    bad.dedup();
    if bad.len() >= 3 {
        return Some(format!("{} singular points with exponent ≥ 1/2", bad.len()));
    }
    None
}
