//! Zero counting by the argument principle with adaptive boundary refinement.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::gafsim::GafRealization;

pub const DEFAULT_BOUNDARY_EPS: f64 = 1e-12;
pub const MAX_REFINEMENT_DEPTH: u32 = 24;
/// Vertical shift applied on each retry, as a fraction of the rectangle height.
pub const RETRY_SHIFT: f64 = 1e-7;
pub const MAX_RETRIES: usize = 3;

/// Initial samples per edge for functions without a spacing hint.
const GENERIC_SAMPLES: usize = 32;
const MIN_SAMPLES: usize = 4;

/// `[t0, t1] × [a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub t0: f64,
    pub t1: f64,
    pub a: f64,
    pub b: f64,
}

impl Rectangle {
    pub fn new(t0: f64, t1: f64, a: f64, b: f64) -> Result<Self> {
        if ![t0, t1, a, b].iter().all(|v| v.is_finite()) {
            return domain("rectangle bounds must be finite");
        }
        if !(t0 < t1) {
            return domain(format!("rectangle needs t0 < t1, got [{t0}, {t1}]"));
        }
        if !(a <= b) {
            return domain(format!("rectangle needs a ≤ b, got [{a}, {b}]"));
        }
        Ok(Self { t0, t1, a, b })
    }

    pub fn check_strip(&self, delta: f64) -> Result<()> {
        if !(self.a > -delta && self.b < delta) {
            return domain(format!(
                "rectangle heights [{}, {}] leave the strip |Im z| < {delta}",
                self.a, self.b
            ));
        }
        Ok(())
    }

    pub fn shifted(&self, dy: f64) -> Self {
        Self { a: self.a + dy, b: self.b + dy, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingResult {
    pub count: u64,
    pub total_arg_increment: f64,
    pub segments_used: usize,
    pub min_boundary_modulus: f64,
}

/// A function analytic near the contours it is asked about.
pub trait AnalyticFn {
    fn eval(&self, z: Complex64) -> Result<Complex64>;

    /// `f(x0 + s·dx + iy)` for `s = 0..n`.
    fn eval_horizontal(&self, x0: f64, dx: f64, n: usize, y: f64, out: &mut Vec<Complex64>) -> Result<()> {
        out.clear();
        for s in 0..n {
            out.push(self.eval(Complex64::new(x0 + s as f64 * dx, y))?);
        }
        Ok(())
    }

    /// Sample spacing that keeps the phase change between samples small away
    /// from zeros (e.g. from a frequency bound). `None` means unknown; every
    /// step is then cross-checked at its midpoint.
    fn sample_spacing(&self) -> Option<f64> {
        None
    }

    fn strip_half_width(&self) -> Option<f64> {
        None
    }
}

impl<F: Fn(Complex64) -> Complex64> AnalyticFn for F {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self(z))
    }
}

impl AnalyticFn for GafRealization {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.eval_f(z, 0)
    }

    fn eval_horizontal(&self, x0: f64, dx: f64, n: usize, y: f64, out: &mut Vec<Complex64>) -> Result<()> {
        GafRealization::eval_horizontal(self, x0, dx, n, y, out);
        Ok(())
    }

    fn sample_spacing(&self) -> Option<f64> {
        let l = self.modes().max_abs_frequency();
        // e^{2πiλx} turns by at most π/4 per step
        Some(if l > 0.0 { 1.0 / (8.0 * l) } else { f64::INFINITY })
    }

    fn strip_half_width(&self) -> Option<f64> {
        Some(self.modes().delta())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WindingOptions {
    pub boundary_eps: f64,
    pub max_depth: u32,
}

impl Default for WindingOptions {
    fn default() -> Self {
        Self { boundary_eps: DEFAULT_BOUNDARY_EPS, max_depth: MAX_REFINEMENT_DEPTH }
    }
}

struct Tracker<'a, F: ?Sized> {
    f: &'a F,
    opts: WindingOptions,
    check_mid: bool,
    segments: usize,
    min_modulus: f64,
    buf: Vec<Complex64>,
}

impl<'a, F: AnalyticFn + ?Sized> Tracker<'a, F> {
    fn new(f: &'a F, opts: WindingOptions) -> Self {
        Self {
            f,
            opts,
            check_mid: f.sample_spacing().is_none(),
            segments: 0,
            min_modulus: f64::INFINITY,
            buf: Vec::new(),
        }
    }

    fn observe(&mut self, z: Complex64, v: Complex64) -> Result<()> {
        let m = v.norm();
        if !m.is_finite() {
            return Err(Error::Numeric(format!("non-finite function value at {z}")));
        }
        self.min_modulus = self.min_modulus.min(m);
        if m < self.opts.boundary_eps {
            return Err(Error::BoundaryZero { min_modulus: m, location: format!("{z}") });
        }
        Ok(())
    }

    fn eval(&mut self, z: Complex64) -> Result<Complex64> {
        let v = self.f.eval(z)?;
        self.observe(z, v)?;
        Ok(v)
    }

    /// Continuous change of arg f along the straight segment `z0 → z1`.
    fn segment(&mut self, z0: Complex64, z1: Complex64) -> Result<f64> {
        let len = (z1 - z0).norm();
        if len == 0.0 {
            return Ok(0.0);
        }
        let n = match self.f.sample_spacing() {
            Some(s) if s.is_finite() => ((len / s).ceil() as usize).max(MIN_SAMPLES),
            Some(_) => MIN_SAMPLES,
            None => GENERIC_SAMPLES,
        };
        let step = (z1 - z0) / n as f64;
        let mut vals = std::mem::take(&mut self.buf);
        if z0.im == z1.im {
            self.f.eval_horizontal(z0.re, step.re, n + 1, z0.im, &mut vals)?;
        } else {
            vals.clear();
            for s in 0..=n {
                vals.push(self.f.eval(z0 + step * s as f64)?);
            }
        }
        let point = |s: usize| if s == n { z1 } else { z0 + step * s as f64 };
        for (s, v) in vals.iter().enumerate() {
            self.observe(point(s), *v)?;
        }
        let mut total = 0.0;
        for s in 0..n {
            total += self.refine(point(s), vals[s], point(s + 1), vals[s + 1], 0)?;
        }
        self.buf = vals;
        Ok(total)
    }

    fn refine(&mut self, za: Complex64, fa: Complex64, zb: Complex64, fb: Complex64, depth: u32) -> Result<f64> {
        let d = (fb * fa.conj()).arg();
        if d.abs() < FRAC_PI_2 && !self.check_mid {
            self.segments += 1;
            return Ok(d);
        }
        if depth >= self.opts.max_depth {
            let m = fa.norm().min(fb.norm());
            let at = format!("{}", (za + zb) * 0.5);
            if m < self.opts.boundary_eps * 1e3 {
                return Err(Error::BoundaryZero { min_modulus: m, location: at });
            }
            return Err(Error::RefinementLimit { depth, location: at });
        }
        let zm = (za + zb) * 0.5;
        let fm = self.eval(zm)?;
        if d.abs() < FRAC_PI_2 {
            let d1 = (fm * fa.conj()).arg();
            let d2 = (fb * fm.conj()).arg();
            if d1.abs() < FRAC_PI_2 && d2.abs() < FRAC_PI_2 && (d1 + d2 - d).abs() < 1e-9 {
                self.segments += 1;
                return Ok(d);
            }
        }
        Ok(self.refine(za, fa, zm, fm, depth + 1)? + self.refine(zm, fm, zb, fb, depth + 1)?)
    }
}

fn to_count(total: f64) -> Result<u64> {
    let turns = total / (2.0 * PI);
    let count = turns.round();
    if (turns - count).abs() >= 1e-3 {
        return Err(Error::Numeric(format!("argument increment {total} is not a whole number of turns")));
    }
    if count < 0.0 {
        return Err(Error::Numeric(format!("negative winding number {count}")));
    }
    Ok(count as u64)
}

fn check_strip<F: AnalyticFn + ?Sized>(f: &F, rect: &Rectangle) -> Result<()> {
    if let Some(delta) = f.strip_half_width() {
        rect.check_strip(delta)?;
    }
    Ok(())
}

/// Zeros of `f` inside `rect`, counted with multiplicity, by walking the
/// boundary counterclockwise.
pub fn winding_number<F: AnalyticFn + ?Sized>(f: &F, rect: &Rectangle) -> Result<WindingResult> {
    winding_number_with(f, rect, WindingOptions::default())
}

pub fn winding_number_with<F: AnalyticFn + ?Sized>(
    f: &F,
    rect: &Rectangle,
    opts: WindingOptions,
) -> Result<WindingResult> {
    check_strip(f, rect)?;
    if rect.a == rect.b {
        return Ok(WindingResult {
            count: 0,
            total_arg_increment: 0.0,
            segments_used: 0,
            min_boundary_modulus: f64::INFINITY,
        });
    }
    let c = [
        Complex64::new(rect.t0, rect.a),
        Complex64::new(rect.t1, rect.a),
        Complex64::new(rect.t1, rect.b),
        Complex64::new(rect.t0, rect.b),
    ];
    let mut tr = Tracker::new(f, opts);
    let mut total = 0.0;
    for i in 0..4 {
        total += tr.segment(c[i], c[(i + 1) % 4])?;
    }
    Ok(WindingResult {
        count: to_count(total)?,
        total_arg_increment: total,
        segments_used: tr.segments,
        min_boundary_modulus: tr.min_modulus,
    })
}

/// Change of a continuous branch of `arg f` along the segment `z0 → z1`.
pub fn arg_increment_segment<F: AnalyticFn + ?Sized>(f: &F, z0: Complex64, z1: Complex64) -> Result<f64> {
    Tracker::new(f, WindingOptions::default()).segment(z0, z1)
}

/// `Δ arg f` along `[t0, t1] × {y}`; reversing the endpoints negates the result exactly.
pub fn arg_increment_line(g: &GafRealization, t0: f64, t1: f64, y: f64) -> Result<f64> {
    let delta = g.modes().delta();
    if !(y.abs() < delta) {
        return domain(format!("line height {y} is outside the strip |Im z| < {delta}"));
    }
    if t1 < t0 {
        return Ok(-arg_increment_line(g, t1, t0, y)?);
    }
    arg_increment_segment(g, Complex64::new(t0, y), Complex64::new(t1, y))
}

/// Retries `attempt` on a boundary zero with the rectangle nudged upwards.
fn with_retries<T>(rect: &Rectangle, mut attempt: impl FnMut(&Rectangle) -> Result<T>) -> Result<T> {
    let shift = RETRY_SHIFT * (rect.b - rect.a);
    let mut r = *rect;
    let mut tries = 0;
    loop {
        match attempt(&r) {
            Err(Error::BoundaryZero { .. }) if tries < MAX_RETRIES => {
                tries += 1;
                r = r.shifted(shift);
            }
            other => return other,
        }
    }
}

/// Number of zeros of one realization in `rect`.
pub fn count_zeros(g: &GafRealization, rect: &Rectangle) -> Result<u64> {
    with_retries(rect, |r| winding_number(g, r).map(|w| w.count))
}

/// Counts in the nested rectangles `[t0, T_j] × [a, b]` for increasing `ts`,
/// sharing the bottom and top edges between rectangles.
pub fn count_zeros_nested<F: AnalyticFn + ?Sized>(f: &F, t0: f64, ts: &[f64], a: f64, b: f64) -> Result<Vec<u64>> {
    if ts.is_empty() {
        return Ok(Vec::new());
    }
    if ts[0] <= t0 || ts.windows(2).any(|w| w[1] <= w[0]) {
        return domain("rectangle ends must increase and exceed t0");
    }
    let rect = Rectangle::new(t0, *ts.last().unwrap(), a, b)?;
    check_strip(f, &rect)?;
    if a == b {
        return Ok(vec![0; ts.len()]);
    }
    with_retries(&rect, |r| {
        let mut tr = Tracker::new(f, WindingOptions::default());
        let p = |x: f64, y: f64| Complex64::new(x, y);
        let left = tr.segment(p(t0, r.b), p(t0, r.a))?;
        let mut bottom = 0.0;
        let mut top = 0.0;
        let mut prev = t0;
        let mut out = Vec::with_capacity(ts.len());
        for &t in ts {
            bottom += tr.segment(p(prev, r.a), p(t, r.a))?;
            top += tr.segment(p(prev, r.b), p(t, r.b))?;
            let right = tr.segment(p(t, r.a), p(t, r.b))?;
            out.push(to_count(left + bottom + right - top)?);
            prev = t;
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gafsim::{sample_realization, ModeSet};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn simple_examples() {
        let r = Rectangle::new(0.0, 1.0, 0.0, 0.5).unwrap();
        assert_eq!(winding_number(&|z: Complex64| z - c(0.5, 0.25), &r).unwrap().count, 1);
        let r = Rectangle::new(-3.0, 2.0, -1.5, 4.0).unwrap();
        assert_eq!(winding_number(&|z: Complex64| z.exp(), &r).unwrap().count, 0);
        let r = Rectangle::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let w = winding_number(&|z: Complex64| z * z, &r).unwrap();
        assert_eq!(w.count, 2);
        assert!((w.total_arg_increment - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn boundary_zero_is_detected() {
        let r = Rectangle::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let e = winding_number(&|z: Complex64| z - c(0.5, 0.0), &r).unwrap_err();
        assert!(matches!(e, Error::BoundaryZero { .. }), "{e}");
    }

    #[test]
    fn near_boundary_zero_is_resolved() {
        let r = Rectangle::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let w = winding_number(&|z: Complex64| z - c(0.5, 1e-9), &r).unwrap();
        assert_eq!(w.count, 1);
        let w = winding_number(&|z: Complex64| z - c(0.5, -1e-9), &r).unwrap();
        assert_eq!(w.count, 0);
    }

    #[test]
    fn single_mode_line_increment() {
        let ms = Arc::new(ModeSet::from_parts(vec![1.7], vec![1.0], 1.0).unwrap());
        let g = sample_realization(&ms, 9);
        let d = arg_increment_line(&g, -0.3, 4.2, 0.2).unwrap();
        assert!((d - 2.0 * PI * 1.7 * 4.5).abs() < 1e-9);
        let back = arg_increment_line(&g, 4.2, -0.3, 0.2).unwrap();
        assert_eq!(back, -d);
    }

    #[test]
    fn degenerate_counts_zero() {
        let ms = Arc::new(ModeSet::from_parts(vec![0.4], vec![2.0], 1.0).unwrap());
        for seed in 0..5 {
            let g = sample_realization(&ms, seed);
            let r = Rectangle::new(0.0, 30.0, -0.5, 0.5).unwrap();
            assert_eq!(count_zeros(&g, &r).unwrap(), 0);
        }
    }

    #[test]
    fn strip_is_enforced() {
        let ms = Arc::new(ModeSet::from_parts(vec![0.4, 1.0], vec![2.0, 1.0], 0.5).unwrap());
        let g = sample_realization(&ms, 0);
        let r = Rectangle::new(0.0, 1.0, -0.2, 0.6).unwrap();
        assert!(matches!(count_zeros(&g, &r), Err(Error::Domain(_))));
        assert!(Rectangle::new(1.0, 1.0, 0.0, 0.1).is_err());
        assert!(Rectangle::new(0.0, 1.0, 0.2, 0.1).is_err());
    }

    #[test]
    fn nested_counts_match_individual_rectangles() {
        let g = crate::spectral::SpectralMeasure::gaussian(1.0).unwrap();
        let ms = Arc::new(crate::gafsim::discretize_measure(&g, 128).unwrap());
        for seed in 0..10 {
            let f = sample_realization(&ms, seed);
            let ts = [2.0, 5.0, 11.0];
            let nested = count_zeros_nested(&f, 0.0, &ts, -0.3, 0.25).unwrap();
            for (t, n) in ts.iter().zip(&nested) {
                let r = Rectangle::new(0.0, *t, -0.3, 0.25).unwrap();
                assert_eq!(count_zeros(&f, &r).unwrap(), *n);
            }
        }
    }
}
