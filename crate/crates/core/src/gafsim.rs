//! Random-wave simulation: `f(z) = Σ_j √w_j ξ_j e^{2πiλ_j z}`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::spectral::SpectralMeasure;

/// Discrete frequencies and weights standing in for a spectral measure.
#[derive(Debug, Clone)]
pub struct ModeSet {
    frequencies: Vec<f64>,
    weights: Vec<f64>,
    delta: f64,
    source: Option<Arc<SpectralMeasure>>,
}

impl ModeSet {
    /// Modes given directly (no originating measure).
    pub fn from_parts(frequencies: Vec<f64>, weights: Vec<f64>, delta: f64) -> Result<Self> {
        if frequencies.len() != weights.len() {
            return Err(Error::InvalidMeasure("frequency and weight lists differ in length".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure(format!("mode weight {w} is not positive")));
        }
        if frequencies.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite mode frequency".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidMeasure(format!("strip half-width must be positive, got {delta}")));
        }
        Ok(Self { frequencies, weights, delta, source: None })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn source(&self) -> Option<&SpectralMeasure> {
        self.source.as_deref()
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn max_abs_frequency(&self) -> f64 {
        self.frequencies.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }

    /// Covariance of the mode sum: `Σ w_j e^{-2πiλ_j z}`.
    pub fn covariance(&self, z: Complex64) -> Complex64 {
        self.frequencies
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| w * (Complex64::new(0.0, -2.0 * PI * l) * z).exp())
            .sum()
    }
}

/// Atoms become modes as they are; the density is cut into at most `n_modes`
/// cells of equal mass (exact for the piecewise-constant grid density), each
/// represented by a mode at the cell's mass centroid.
pub fn discretize_measure(m: &SpectralMeasure, n_modes: usize) -> Result<ModeSet> {
    if m.singular_flag() {
        return domain("cannot discretize a measure with a singular continuous part");
    }
    let mut freqs: Vec<f64> = m.atoms().iter().map(|a| a.location).collect();
    let mut weights: Vec<f64> = m.atoms().iter().map(|a| a.mass).collect();
    if let Some(d) = m.density() {
        if n_modes == 0 {
            return domain("n_modes must be positive for a measure with a density");
        }
        let h = d.h();
        let total = d.mass();
        if total > 0.0 {
            let target = total / n_modes as f64;
            let mut bin_mass = 0.0;
            let mut bin_moment = 0.0;
            let mut filled = 0usize;
            let flush = |mass: &mut f64, moment: &mut f64, freqs: &mut Vec<f64>, weights: &mut Vec<f64>| {
                if *mass > 0.0 {
                    freqs.push(*moment / *mass);
                    weights.push(*mass);
                }
                *mass = 0.0;
                *moment = 0.0;
            };
            for (i, &p) in d.values().iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let mut x = d.grid_min() + i as f64 * h;
                let end = x + h;
                while x < end {
                    let last_bin = filled + 1 >= n_modes;
                    let room = target - bin_mass;
                    let span = if last_bin { end - x } else { (room / p).min(end - x) };
                    let x1 = if span >= end - x { end } else { x + span };
                    if x1 <= x {
                        // Remaining room is below one ulp of x: the bin is full.
                        flush(&mut bin_mass, &mut bin_moment, &mut freqs, &mut weights);
                        filled += 1;
                        continue;
                    }
                    let mass = p * (x1 - x);
                    bin_mass += mass;
                    bin_moment += p * 0.5 * (x1 * x1 - x * x);
                    x = x1;
                    if !last_bin && bin_mass >= target * (1.0 - 1e-12) {
                        flush(&mut bin_mass, &mut bin_moment, &mut freqs, &mut weights);
                        filled += 1;
                    }
                }
            }
            flush(&mut bin_mass, &mut bin_moment, &mut freqs, &mut weights);
            // Bin masses add up to the grid mass up to rounding; pin the sum.
            let n_atoms = m.atoms().len();
            let got: f64 = weights[n_atoms..].iter().sum();
            for w in &mut weights[n_atoms..] {
                *w *= total / got;
            }
        }
    }
    if freqs.is_empty() {
        return Err(Error::InvalidMeasure("measure has no mass to discretize".into()));
    }
    let mut ms = ModeSet::from_parts(freqs, weights, m.delta())?;
    ms.source = Some(Arc::new(m.clone()));
    Ok(ms)
}

/// One draw of the GAF. Coefficients are a pure function of `(modes, seed)`.
#[derive(Debug, Clone)]
pub struct GafRealization {
    modes: Arc<ModeSet>,
    xi: Vec<Complex64>,
    seed: u64,
    // √w_j ξ_j split into real and imaginary parts for the batch kernels.
    amp_re: Vec<f64>,
    amp_im: Vec<f64>,
}

/// Standard complex Gaussian for mode `j`: real and imaginary parts N(0, 1/2),
/// drawn from a ChaCha8 stream selected by `j` under key `seed`.
pub fn mode_coefficient(seed: u64, j: u64) -> Complex64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_realization(ms: &Arc<ModeSet>, seed: u64) -> GafRealization {
    let xi: Vec<Complex64> = (0..ms.len() as u64).map(|j| mode_coefficient(seed, j)).collect();
    GafRealization::with_coefficients(ms.clone(), xi, seed)
}

impl GafRealization {
    /// Realization with prescribed coefficients (`seed` is only recorded).
    pub fn with_coefficients(modes: Arc<ModeSet>, xi: Vec<Complex64>, seed: u64) -> Self {
        assert_eq!(modes.len(), xi.len(), "one coefficient per mode");
        let (amp_re, amp_im) = xi
            .iter()
            .zip(&modes.weights)
            .map(|(x, w)| {
                let a = x * w.sqrt();
                (a.re, a.im)
            })
            .unzip();
        Self { modes, xi, seed, amp_re, amp_im }
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.xi
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `f(z)` (order 0) or `f'(z)` (order 1), for `|Im z| < Δ`.
    pub fn eval_f(&self, z: Complex64, order: u32) -> Result<Complex64> {
        if order > 1 {
            return domain(format!("derivative order {order} not supported (0 or 1)"));
        }
        if !(z.im.abs() < self.modes.delta) {
            return domain(format!("|Im z| = {} is not inside the strip of half-width {}", z.im.abs(), self.modes.delta));
        }
        Ok(self.eval_unchecked(z, order))
    }

    pub(crate) fn eval_unchecked(&self, z: Complex64, order: u32) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &l) in self.modes.frequencies.iter().enumerate() {
            let e = Complex64::from_polar((-2.0 * PI * l * z.im).exp(), 2.0 * PI * l * z.re);
            let mut t = Complex64::new(self.amp_re[j], self.amp_im[j]) * e;
            if order == 1 {
                t *= Complex64::new(0.0, 2.0 * PI * l);
            }
            acc += t;
        }
        acc
    }

    /// `f(x0 + s·dx + iy)` for `s = 0..n`, one rotation per mode and step.
    pub fn eval_horizontal(&self, x0: f64, dx: f64, n: usize, y: f64, out: &mut Vec<Complex64>) {
        const REANCHOR: usize = 64;
        let m = self.modes.len();
        let freqs = &self.modes.frequencies;
        let mut c_re = vec![0.0; m];
        let mut c_im = vec![0.0; m];
        let mut w_re = vec![0.0; m];
        let mut w_im = vec![0.0; m];
        for (j, &l) in freqs.iter().enumerate() {
            let (s, c) = (2.0 * PI * l * dx).sin_cos();
            w_re[j] = c;
            w_im[j] = s;
        }
        out.clear();
        out.reserve(n);
        for s in 0..n {
            if s % REANCHOR == 0 {
                let x = x0 + s as f64 * dx;
                for (j, &l) in freqs.iter().enumerate() {
                    let r = (-2.0 * PI * l * y).exp();
                    let (sn, cs) = (2.0 * PI * l * x).sin_cos();
                    let (ar, ai) = (self.amp_re[j] * r, self.amp_im[j] * r);
                    c_re[j] = ar * cs - ai * sn;
                    c_im[j] = ar * sn + ai * cs;
                }
            }
            let mut sr = 0.0;
            let mut si = 0.0;
            for j in 0..m {
                sr += c_re[j];
                si += c_im[j];
                let (cr, ci) = (c_re[j], c_im[j]);
                c_re[j] = cr * w_re[j] - ci * w_im[j];
                c_im[j] = cr * w_im[j] + ci * w_re[j];
            }
            out.push(Complex64::new(sr, si));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridDensity;

    #[test]
    fn atoms_are_kept_verbatim() {
        let m = SpectralMeasure::symmetric_pair(1.0, 0.5, 1.0).unwrap();
        let ms = discretize_measure(&m, 16).unwrap();
        assert_eq!(ms.frequencies(), &[-1.0, 1.0]);
        assert_eq!(ms.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn uniform_equal_mass_bins() {
        let m = SpectralMeasure::from_density(GridDensity::uniform(-1.0, 1.0, 1.0 / 256.0).unwrap(), 1.0)
            .unwrap();
        let ms = discretize_measure(&m, 4).unwrap();
        let want = [-0.75, -0.25, 0.25, 0.75];
        assert_eq!(ms.len(), 4);
        for (f, w) in ms.frequencies().iter().zip(want) {
            assert!((f - w).abs() < 1e-12, "{f}");
        }
        for w in ms.weights() {
            assert!((w - 0.25).abs() < 1e-12);
        }
        assert!((ms.total_weight() - 1.0).abs() < 1e-12);
    }

    fn covariance_error(ms: &ModeSet, g: &SpectralMeasure, xmax: f64) -> f64 {
        (0..=1000)
            .map(|i| {
                let z = Complex64::new(xmax * (-1.0 + 0.002 * i as f64), 0.0);
                (ms.covariance(z) - g.eval_r(z, 0).unwrap()).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gaussian_modes_reproduce_covariance() {
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        let ms = discretize_measure(&g, 512).unwrap();
        assert!((ms.total_weight() - g.total_mass()).abs() < 1e-10);
        // The two outermost equal-mass cells each carry 1/n of the mass and
        // decorrelate for |x| ≳ 1, so the sup error on |x| ≤ 5 is about 2.5/n.
        assert!(covariance_error(&ms, &g, 1.0) < 1e-3);
        let e512 = covariance_error(&ms, &g, 5.0);
        assert!(e512 < 5.5e-3, "{e512}");
        let ms = discretize_measure(&g, 4096).unwrap();
        let e4096 = covariance_error(&ms, &g, 5.0);
        assert!(e4096 < 1e-3, "{e4096}");
        assert!(e4096 < e512 / 6.0);
    }

    #[test]
    fn coefficients_are_deterministic() {
        let ms = Arc::new(ModeSet::from_parts(vec![0.0, 1.0, 2.0], vec![1.0; 3], 1.0).unwrap());
        let a = sample_realization(&ms, 42);
        let b = sample_realization(&ms, 42);
        let c = sample_realization(&ms, 43);
        assert_eq!(a.coefficients(), b.coefficients());
        assert_ne!(a.coefficients(), c.coefficients());
    }

    #[test]
    fn single_zero_mode_is_constant() {
        let ms = Arc::new(ModeSet::from_parts(vec![0.0], vec![1.0], 1.0).unwrap());
        let g = sample_realization(&ms, 7);
        for z in [Complex64::new(0.0, 0.0), Complex64::new(3.1, -0.4), Complex64::new(-9.0, 0.9)] {
            assert_eq!(g.eval_f(z, 0).unwrap(), g.coefficients()[0]);
        }
        assert!(g.eval_f(Complex64::new(0.0, 1.0), 0).is_err());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        let ms = Arc::new(discretize_measure(&g, 64).unwrap());
        let f = sample_realization(&ms, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let z = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-0.5..0.5));
            let step = 1e-5;
            let fd = (f.eval_f(z + step, 0).unwrap() - f.eval_f(z - step, 0).unwrap()) / (2.0 * step);
            let d = f.eval_f(z, 1).unwrap();
            assert!((fd - d).norm() <= 1e-6 * d.norm(), "{z}: {fd} vs {d}");
        }
    }

    #[test]
    fn two_mode_zeros_lie_on_a_line() {
        let ms = Arc::new(ModeSet::from_parts(vec![-1.0, 1.0], vec![0.5, 0.5], 1.0).unwrap());
        let xi = vec![Complex64::new(0.3, -1.2), Complex64::new(0.8, 0.1)];
        let f = GafRealization::with_coefficients(ms, xi.clone(), 0);
        let y = (xi[1].norm() / xi[0].norm()).ln() / (4.0 * PI);
        // e^{4πiz} = -ξ₁/ξ₂ pins the real part too
        let w = -xi[0] / xi[1];
        let x = w.arg() / (4.0 * PI);
        let z = Complex64::new(x, y);
        assert!((z.im - (w.norm().ln() / (-4.0 * PI))).abs() < 1e-14);
        assert!(f.eval_f(z, 0).unwrap().norm() < 1e-13);
        assert!(f.eval_f(z + 0.5, 0).unwrap().norm() < 1e-13);
    }

    #[test]
    fn horizontal_batch_matches_pointwise() {
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        let ms = Arc::new(discretize_measure(&g, 256).unwrap());
        let f = sample_realization(&ms, 3);
        let mut out = Vec::new();
        f.eval_horizontal(-2.0, 0.013, 500, 0.17, &mut out);
        for (s, v) in out.iter().enumerate() {
            let p = f.eval_f(Complex64::new(-2.0 + 0.013 * s as f64, 0.17), 0).unwrap();
            assert!((v - p).norm() < 1e-12 * p.norm().max(1.0));
        }
    }
}
