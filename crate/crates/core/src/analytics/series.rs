//! The asymptotic variance series.
//!
//! With `G_y` the tilted density `e^{4πyλ}p(λ)/m₀(y)` (a probability density
//! with mean `μ_y = m₁/m₀`) and `G_y^k` its k-fold convolution, the
//! `(1/4π²) h_k(λ+τ) dρ^{*k}(λ) dρ^{*k}(τ)` integrand equals
//!
//! ```text
//! [(λ+τ−2kμ_a)√(G_a^k(λ)G_a^k(τ)) − (λ+τ−2kμ_b)√(G_b^k(λ)G_b^k(τ))]² dλ dτ
//! ```
//!
//! which never forms `r(2iy)^{-k}` or `ρ^{*k}` explicitly. Since
//! `∫ T sinc²(2πTu) du = 1/2`, the `T → ∞` limit of term k is
//! `(2/k²) ∫ [(λ−kμ_a)G_a^k(λ) − (λ−kμ_b)G_b^k(λ)]² dλ`.
//!
//! Terms decay like `c·k^{-3/2}` (CLT spreading of `G^k`; the cross term dies
//! geometrically since `sup_x q < 1`), which gives the tail estimate.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::quad::CompositeGl;
use crate::spectral::{fft_convolve, GridDensity, SpectralMeasure, DEFAULT_MAX_GRID_POINTS};

pub const DEFAULT_K_MAX: u32 = 24;

/// `lim V(T)/T` over `[0, T] × [a, b]` is half the large-`T` value of
/// [`v_asymptotic`]. Fixed against the integrated covariance of `∂_y log|f|`
/// and against simulation.
pub const LINEAR_LIMIT_FACTOR: f64 = 0.5;

/// Relative level below which the ends of `G^k` are trimmed.
const TRIM: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TermMethod {
    ExactAtoms,
    GridQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesTerm {
    pub k: u32,
    pub value: f64,
    pub method: TermMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    /// Partial sum over `k ≤ k_max`.
    pub value: f64,
    pub terms: Vec<SeriesTerm>,
    /// `c·Σ_{k>k_max} k^{-3/2}` with `c` fitted to the last term.
    pub tail_estimate: f64,
    /// Twice the estimate: term k is at most twice its no-overlap asymptote.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLimit {
    /// Partial sum plus tail estimate: `lim V(T)/T` per unit length.
    pub l1: f64,
    pub partial_sum: f64,
    /// Bound on `|L1 − l1|` given the tail envelope.
    pub tail_bound: f64,
    pub terms: Vec<SeriesTerm>,
    pub k_max: u32,
}

/// `Σ_{k>K} k^{-3/2}` by Euler–Maclaurin.
pub(crate) fn zeta_tail_3_2(k: u32) -> f64 {
    let s = 1.5;
    let x = k as f64;
    if k == 0 {
        return f64::INFINITY;
    }
    if k < 8 {
        // sum a few terms exactly, then switch to the expansion
        return (k + 1..=8).map(|j| (j as f64).powf(-s)).sum::<f64>() + zeta_tail_3_2(8);
    }
    x.powf(1.0 - s) / (s - 1.0) - 0.5 * x.powf(-s) + s * x.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0) / 720.0
}

/// `G^k` on the lattice `k·g₀ + (k−1)h/2 + (n+½)h`, cells `n ∈ [start, start+len)`.
#[derive(Debug, Clone)]
struct Lattice {
    start: i64,
    values: Vec<f64>,
}

impl Lattice {
    fn get(&self, n: i64) -> f64 {
        let i = n - self.start;
        if i < 0 || i >= self.values.len() as i64 {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }
}

fn trim(mut l: Lattice) -> Lattice {
    let peak = l.values.iter().cloned().fold(0.0, f64::max);
    let cut = peak * TRIM;
    let first = l.values.iter().position(|&v| v > cut).unwrap_or(0);
    let last = l.values.iter().rposition(|&v| v > cut).map_or(0, |i| i + 1);
    if first >= last {
        return Lattice { start: l.start, values: vec![0.0] };
    }
    l.values.truncate(last);
    l.values.drain(..first);
    Lattice { start: l.start + first as i64, values: l.values }
}

struct TiltedPowers {
    grid_min: f64,
    h: f64,
    mu: f64,
    powers: Vec<Lattice>,
}

impl TiltedPowers {
    fn new(d: &GridDensity, y: f64, k_max: u32) -> Result<Self> {
        let h = d.h();
        let expo: Vec<f64> = d.midpoints().map(|l| 4.0 * PI * y * l).collect();
        let shift = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut g: Vec<f64> = d.values().iter().zip(&expo).map(|(p, e)| p * (e - shift).exp()).collect();
        let mass = h * g.iter().sum::<f64>();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Numeric(format!("tilted density at y = {y} has mass {mass}")));
        }
        for v in &mut g {
            *v /= mass;
        }
        let mu = h * g.iter().zip(d.midpoints()).map(|(v, l)| v * l).sum::<f64>();
        let base = trim(Lattice { start: 0, values: g });
        let mut powers = vec![base.clone()];
        for k in 2..=k_max {
            let prev = powers.last().unwrap();
            let len = prev.values.len() + base.values.len() - 1;
            if len > DEFAULT_MAX_GRID_POINTS {
                return Err(Error::Size { requested: len, limit: DEFAULT_MAX_GRID_POINTS });
            }
            let mut v = fft_convolve(&prev.values, &base.values);
            for x in &mut v {
                *x = (*x * h).max(0.0);
            }
            // renormalize the FFT round-off away
            let s = h * v.iter().sum::<f64>();
            for x in &mut v {
                *x /= s;
            }
            let next = trim(Lattice { start: prev.start + base.start, values: v });
            if next.values.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("convolution power {k} at y = {y} is not finite")));
            }
            powers.push(next);
        }
        Ok(Self { grid_min: d.grid_min(), h, mu, powers })
    }

    fn lambda(&self, k: u32, n: i64) -> f64 {
        k as f64 * self.grid_min + (k as f64 - 1.0) * 0.5 * self.h + (n as f64 + 0.5) * self.h
    }
}

fn prepare(m: &SpectralMeasure, a: f64, b: f64, k_max: u32) -> Result<(TiltedPowers, TiltedPowers)> {
    if m.has_atoms() {
        return domain("the variance series needs an atom-free measure");
    }
    if m.is_degenerate() {
        return domain("the variance series needs a non-degenerate measure");
    }
    let Some(d) = m.density() else {
        return domain("the variance series needs a density");
    };
    if m.singular_flag() {
        return domain("the variance series needs a measure without singular part");
    }
    if !(a < b) {
        return domain(format!("need a < b, got a = {a}, b = {b}"));
    }
    for y in [a, b] {
        if !(y.abs() < m.delta()) {
            return domain(format!("height {y} outside the strip |y| < {}", m.delta()));
        }
    }
    if k_max == 0 {
        return domain("k_max must be at least 1");
    }
    Ok((TiltedPowers::new(d, a, k_max)?, TiltedPowers::new(d, b, k_max)?))
}

fn tail_from_terms(terms: &[SeriesTerm]) -> f64 {
    let last = terms.last().unwrap();
    let c = last.value * (last.k as f64).powf(1.5);
    c * zeta_tail_3_2(last.k)
}

/// `T → ∞` limit of `V(T)/T` over `[0, T] × [a, b]` (finite under square-integrability at `a`, `b`).
pub fn linear_limit_l1(m: &SpectralMeasure, a: f64, b: f64, k_max: u32) -> Result<LinearLimit> {
    if m.has_atoms() || m.density().is_none() || m.singular_flag() {
        return Err(Error::CondL2("the measure is not absolutely continuous".into()));
    }
    for y in [a, b] {
        let c = m.check_cond_l2(y)?;
        if !c.holds {
            return Err(Error::CondL2(format!("at y = {y}: {}", c.diagnostic)));
        }
    }
    let (ga, gb) = prepare(m, a, b, k_max)?;
    let terms: Vec<SeriesTerm> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let la = &ga.powers[k as usize - 1];
            let lb = &gb.powers[k as usize - 1];
            let kf = k as f64;
            let mut s = 0.0;
            for n in la.start.min(lb.start)..la.end().max(lb.end()) {
                let l = ga.lambda(k, n);
                let d = (l - kf * ga.mu) * la.get(n) - (l - kf * gb.mu) * lb.get(n);
                s += d * d;
            }
            let value = LINEAR_LIMIT_FACTOR * 2.0 * ga.h * s / (kf * kf);
            SeriesTerm { k, value, method: TermMethod::GridQuadrature }
        })
        .collect();
    let partial: f64 = terms.iter().map(|t| t.value).sum();
    let tail = tail_from_terms(&terms);
    let l1 = partial + tail;
    if !(l1.is_finite() && l1 > 0.0) {
        return Err(Error::Numeric(format!("linear limit evaluated to {l1}")));
    }
    Ok(LinearLimit { l1, partial_sum: partial, tail_bound: tail, terms, k_max })
}

/// `W_j = ∫_{−h}^{h} (h − |u|) T sinc²(2πT(jh + u)) du`: the kernel integrated
/// over a pair of grid cells at lag `j`.
fn fejer_cell_weights(h: f64, t: f64, n: usize) -> Vec<f64> {
    let panels = ((4.0 * h * t).ceil() as usize).max(1);
    let left = CompositeGl::new(-h, 0.0, panels, 12);
    let right = CompositeGl::new(0.0, h, panels, 12);
    let kernel = |u: f64| {
        let x = 2.0 * PI * t * u;
        let s = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        t * s * s
    };
    (0..n)
        .map(|j| {
            let c = j as f64 * h;
            left.integrate(|u| (h + u) * kernel(c + u)) + right.integrate(|u| (h - u) * kernel(c + u))
        })
        .collect()
}

/// `v^{a,b}(T) = (1/4π²) Σ_{k ≤ k_max} k⁻² ∬ T sinc²(2πT(λ−τ)) h_k(λ+τ) dρ^{*k}(λ) dρ^{*k}(τ)`.
///
/// The double integral is summed over all grid cell pairs with the kernel
/// integrated exactly over each pair; the full lag range is covered through
/// FFT correlations, so there is no band truncation.
pub fn v_asymptotic(m: &SpectralMeasure, a: f64, b: f64, t: f64, k_max: u32) -> Result<SeriesResult> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("T must be positive, got {t}"));
    }
    let (ga, gb) = prepare(m, a, b, k_max)?;
    let max_len = (0..k_max as usize)
        .map(|i| {
            let (la, lb) = (&ga.powers[i], &gb.powers[i]);
            (la.end().max(lb.end()) - la.start.min(lb.start)) as usize
        })
        .max()
        .unwrap();
    let w = fejer_cell_weights(ga.h, t, max_len);
    let terms: Vec<SeriesTerm> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let value = v_term(&ga, &gb, k, &w);
            SeriesTerm { k, value, method: TermMethod::GridQuadrature }
        })
        .collect();
    if let Some(bad) = terms.iter().find(|x| !x.value.is_finite()) {
        return Err(Error::Numeric(format!("series term {} is not finite", bad.k)));
    }
    let value: f64 = terms.iter().map(|x| x.value).sum();
    let tail = tail_from_terms(&terms);
    Ok(SeriesResult { value, terms, tail_estimate: tail, tail_bound: 2.0 * tail })
}

/// One series term. The bracket is `Σ_p u_p(λ) v_p(τ)` with four separable
/// pieces, so the kernel sum reduces to correlations of products.
fn v_term(ga: &TiltedPowers, gb: &TiltedPowers, k: u32, w: &[f64]) -> f64 {
    let la = &ga.powers[k as usize - 1];
    let lb = &gb.powers[k as usize - 1];
    let lo = la.start.min(lb.start);
    let hi = la.end().max(lb.end());
    let n = (hi - lo) as usize;
    let kf = k as f64;
    let mut sa = Vec::with_capacity(n);
    let mut sb = Vec::with_capacity(n);
    let mut xa = Vec::with_capacity(n);
    let mut xb = Vec::with_capacity(n);
    for c in lo..hi {
        let l = ga.lambda(k, c);
        let (a, b) = (la.get(c).sqrt(), lb.get(c).sqrt());
        sa.push(a);
        sb.push(b);
        xa.push((l - kf * ga.mu) * a);
        xb.push((l - kf * gb.mu) * b);
    }
    // B(λ,τ) = xa(λ)sa(τ) + sa(λ)xa(τ) − xb(λ)sb(τ) − sb(λ)xb(τ)
    let u: [&[f64]; 4] = [&xa, &sa, &xb, &sb];
    let v: [&[f64]; 4] = [&sa, &xa, &sb, &xb];
    let sign = [1.0, 1.0, -1.0, -1.0];

    // Kernel at lags −(n−1)..=(n−1), transformed once.
    let size = (3 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut kw = vec![Complex::new(0.0, 0.0); size];
    for (i, slot) in kw.iter_mut().take(2 * n - 1).enumerate() {
        let lag = (i as i64 - (n as i64 - 1)).unsigned_abs() as usize;
        *slot = Complex::new(w[lag], 0.0);
    }
    fwd.process(&mut kw);

    let mut total = 0.0;
    let mut buf = vec![Complex::new(0.0, 0.0); size];
    for p in 0..4 {
        for q in p..4 {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for i in 0..n {
                buf[i] = Complex::new(v[p][i] * v[q][i], 0.0);
            }
            fwd.process(&mut buf);
            for (x, y) in buf.iter_mut().zip(&kw) {
                *x *= y;
            }
            inv.process(&mut buf);
            let mut s = 0.0;
            for i in 0..n {
                s += u[p][i] * u[q][i] * buf[i + n - 1].re;
            }
            s /= size as f64;
            let mult = if p == q { 1.0 } else { 2.0 };
            total += mult * sign[p] * sign[q] * s;
        }
    }
    total.max(0.0) / (kf * kf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_tail_matches_direct_sum() {
        for k in [1u32, 5, 12, 24, 100] {
            let direct: f64 = (k + 1..2_000_000).map(|j| (j as f64).powf(-1.5)).sum::<f64>() + 2.0 / (2e6f64).sqrt();
            assert!((zeta_tail_3_2(k) - direct).abs() < 1e-6, "k={k}");
        }
    }

    #[test]
    fn fejer_weights_sum_to_kernel_mass() {
        // Σ_j W_j over all lags = h ∫ T sinc² = h/2
        let h = 1.0 / 64.0;
        let t = 3.0;
        let w = fejer_cell_weights(h, t, 200_000);
        let s = w[0] + 2.0 * w[1..].iter().sum::<f64>();
        assert!((s / (0.5 * h) - 1.0).abs() < 3e-5, "{}", s / (0.5 * h));
    }
}
