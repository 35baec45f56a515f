//! Spectral measures and the measure-level primitives built on them.
//!
//! A measure is stored as a finite list of atoms plus an optional density
//! sampled at the midpoints of a uniform grid. Local singularities and the
//! tail class of the density are carried as annotations: quadrature only ever
//! uses the grid samples, while square-integrability decisions only ever use
//! the annotations.

mod convolve;
pub mod descriptor;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub use convolve::DEFAULT_MAX_GRID_POINTS;
pub(crate) use convolve::fft_convolve;

/// Default grid spacing for builtin densities.
pub const DEFAULT_GRID_STEP: f64 = 1.0 / 256.0;

/// A point mass of the spectral measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Local singularity annotation: `p(λ) ~ c |λ - location|^(-exponent)` near `location`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub location: f64,
    pub exponent: f64,
}

/// Decay class of the density at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailClass {
    Gaussian,
    /// `p(λ) ≲ e^{-rate |λ|}`
    Exponential { rate: f64 },
    Compact,
}

/// Absolutely continuous part, sampled at cell midpoints
/// `grid_min + (i + 1/2) h`, `i = 0..values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid_min: f64,
    h: f64,
    values: Vec<f64>,
    singularities: Vec<Singularity>,
    tail: Option<TailClass>,
}

impl GridDensity {
    pub fn new(
        grid_min: f64,
        grid_max: f64,
        h: f64,
        values: Vec<f64>,
        singularities: Vec<Singularity>,
        tail: Option<TailClass>,
    ) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidMeasure(format!("grid spacing must be positive, got {h}")));
        }
        if !(grid_min.is_finite() && grid_max.is_finite() && grid_max > grid_min) {
            return Err(Error::InvalidMeasure(format!(
                "grid bounds [{grid_min}, {grid_max}] are not an interval"
            )));
        }
        let n = cells_between(grid_min, grid_max, h)?;
        if values.len() != n {
            return Err(Error::InvalidMeasure(format!(
                "grid [{grid_min}, {grid_max}] with h = {h} has {n} cells but {} values were given",
                values.len()
            )));
        }
        Self::from_parts(grid_min, h, values, singularities, tail)
    }

    pub(crate) fn from_parts(
        grid_min: f64,
        h: f64,
        values: Vec<f64>,
        singularities: Vec<Singularity>,
        tail: Option<TailClass>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidMeasure("density grid is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMeasure(format!(
                "density value {} at cell {i} is negative or non-finite",
                values[i]
            )));
        }
        for s in &singularities {
            if !(s.exponent > 0.0 && s.exponent < 1.0) || !s.location.is_finite() {
                return Err(Error::InvalidMeasure(format!(
                    "singularity exponent must lie in (0, 1), got {} at {}",
                    s.exponent, s.location
                )));
            }
        }
        if let Some(TailClass::Exponential { rate }) = tail {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidMeasure(format!("exponential tail rate must be positive, got {rate}")));
            }
        }
        Ok(Self { grid_min, h, values, singularities, tail })
    }

    /// `e^{-π λ²}` sampled on the grid; unit mass on the full line.
    pub fn gaussian(grid_min: f64, grid_max: f64, h: f64) -> Result<Self> {
        let n = cells_between(grid_min, grid_max, h)?;
        let values = (0..n)
            .map(|i| {
                let x = grid_min + (i as f64 + 0.5) * h;
                (-PI * x * x).exp()
            })
            .collect();
        Self::new(grid_min, grid_max, h, values, vec![], Some(TailClass::Gaussian))
    }

    /// Uniform probability density on `[grid_min, grid_max]`.
    pub fn uniform(grid_min: f64, grid_max: f64, h: f64) -> Result<Self> {
        let n = cells_between(grid_min, grid_max, h)?;
        let v = 1.0 / (grid_max - grid_min);
        Self::new(grid_min, grid_max, h, vec![v; n], vec![], Some(TailClass::Compact))
    }

    /// `|λ|^{-1/2}` on `[grid_min, grid_max]`, annotated with its singularity at 0.
    pub fn inv_sqrt(grid_min: f64, grid_max: f64, h: f64) -> Result<Self> {
        let n = cells_between(grid_min, grid_max, h)?;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let x = grid_min + (i as f64 + 0.5) * h;
            if x == 0.0 {
                return Err(Error::InvalidMeasure(
                    "inv_sqrt grid has a midpoint at the singularity; shift the grid".into(),
                ));
            }
            values.push(1.0 / x.abs().sqrt());
        }
        let sing = if grid_min < 0.0 && grid_max > 0.0 {
            vec![Singularity { location: 0.0, exponent: 0.5 }]
        } else {
            vec![]
        };
        Self::new(grid_min, grid_max, h, values, sing, Some(TailClass::Compact))
    }

    pub fn grid_min(&self) -> f64 {
        self.grid_min
    }

    pub fn grid_max(&self) -> f64 {
        self.grid_min + self.values.len() as f64 * self.h
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn tail(&self) -> Option<TailClass> {
        self.tail
    }

    #[inline]
    pub fn midpoint(&self, i: usize) -> f64 {
        self.grid_min + (i as f64 + 0.5) * self.h
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.midpoint(i))
    }

    /// Midpoint-rule mass `h Σ p_i`.
    pub fn mass(&self) -> f64 {
        self.h * self.values.iter().sum::<f64>()
    }

}

fn cells_between(grid_min: f64, grid_max: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(grid_max > grid_min) {
        return Err(Error::InvalidMeasure(format!(
            "cannot grid [{grid_min}, {grid_max}] with step {h}"
        )));
    }
    let exact = (grid_max - grid_min) / h;
    let n = exact.round();
    if (exact - n).abs() > 1e-6 || n < 1.0 {
        return Err(Error::InvalidMeasure(format!(
            "grid length {} is not a multiple of h = {h}",
            grid_max - grid_min
        )));
    }
    Ok(n as usize)
}

/// Result of the square-integrability test for a finite linear limit.
#[derive(Debug, Clone, PartialEq)]
pub struct CondL2Check {
    pub holds: bool,
    pub diagnostic: String,
}

/// A spectral measure `ρ` together with the strip half-width `Δ` of the GAF it defines.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    density: Option<GridDensity>,
    singular_flag: bool,
    delta: f64,
    degenerate: bool,
}

impl SpectralMeasure {
    /// Builds and validates a measure. A single atom with nothing else is
    /// rejected; use [`SpectralMeasure::degenerate`] for that case.
    pub fn new(
        atoms: Vec<Atom>,
        density: Option<GridDensity>,
        singular_flag: bool,
        delta: f64,
    ) -> Result<Self> {
        Self::build(atoms, density, singular_flag, delta, false)
    }

    /// A single atom: the degenerate GAF `f(z) = √w ξ e^{2πiλz}`.
    pub fn degenerate(location: f64, mass: f64, delta: f64) -> Result<Self> {
        Self::build(vec![Atom { location, mass }], None, false, delta, true)
    }

    pub(crate) fn build(
        mut atoms: Vec<Atom>,
        density: Option<GridDensity>,
        singular_flag: bool,
        delta: f64,
        allow_degenerate: bool,
    ) -> Result<Self> {
        if !(delta > 0.0) || delta.is_nan() {
            return Err(Error::InvalidMeasure(format!("strip half-width must be positive, got {delta}")));
        }
        for a in &atoms {
            if !(a.mass > 0.0 && a.mass.is_finite() && a.location.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom at {} has non-positive or non-finite mass {}",
                    a.location, a.mass
                )));
            }
        }
        atoms.sort_by(|x, y| x.location.total_cmp(&y.location));
        if atoms.windows(2).any(|w| w[0].location == w[1].location) {
            return Err(Error::InvalidMeasure("atom locations must be distinct".into()));
        }
        if let Some(d) = &density {
            if let Some(TailClass::Exponential { rate }) = d.tail {
                // ∫ e^{4π|y||λ|} e^{-rate|λ|} dλ must converge for every |y| < Δ.
                if rate < 4.0 * PI * delta * (1.0 - 1e-12) {
                    return Err(Error::InvalidMeasure(format!(
                        "exponential tail rate {rate} gives no finite exponential moment up to Δ = {delta} (need rate ≥ 4πΔ = {})",
                        4.0 * PI * delta
                    )));
                }
            }
        }
        let atom_mass: f64 = atoms.iter().map(|a| a.mass).sum();
        let density_mass = density.as_ref().map_or(0.0, |d| d.mass());
        if !(atom_mass + density_mass > 0.0) && !singular_flag {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        let single_atom = atoms.len() == 1 && density_mass == 0.0 && !singular_flag;
        if single_atom && !allow_degenerate {
            return Err(Error::InvalidMeasure(
                "measure is a single atom; flag it as degenerate explicitly".into(),
            ));
        }
        Ok(Self { atoms, density, singular_flag, delta, degenerate: single_atom })
    }

    /// The two-atom measure `w δ_{-λ} + w δ_{λ}`.
    pub fn symmetric_pair(lambda: f64, weight: f64, delta: f64) -> Result<Self> {
        Self::new(
            vec![Atom { location: -lambda, mass: weight }, Atom { location: lambda, mass: weight }],
            None,
            false,
            delta,
        )
    }

    /// The Gaussian density `e^{-πλ²}` on `[-6, 6]` with the default grid step.
    pub fn gaussian(delta: f64) -> Result<Self> {
        Self::new(vec![], Some(GridDensity::gaussian(-6.0, 6.0, DEFAULT_GRID_STEP)?), false, delta)
    }

    pub fn from_density(density: GridDensity, delta: f64) -> Result<Self> {
        Self::new(vec![], Some(density), false, delta)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&GridDensity> {
        self.density.as_ref()
    }

    pub fn singular_flag(&self) -> bool {
        self.singular_flag
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn has_atoms(&self) -> bool {
        !self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.density.as_ref().map_or(0.0, |d| d.mass())
    }

    /// Largest |λ| carrying mass (atoms or non-zero grid cells).
    pub fn support_radius(&self) -> f64 {
        let mut r = self.atoms.iter().map(|a| a.location.abs()).fold(0.0, f64::max);
        if let Some(d) = &self.density {
            for (i, &v) in d.values.iter().enumerate() {
                if v > 0.0 {
                    r = r.max(d.midpoint(i).abs());
                }
            }
        }
        r
    }

    fn check_doubled_strip(&self, y: f64, what: &str) -> Result<()> {
        if !(y.abs() < 2.0 * self.delta) {
            return domain(format!("{what}: |{y}| is not below 2Δ = {}", 2.0 * self.delta));
        }
        Ok(())
    }

    /// `r^{(order)}(z) = ∫ (-2πiλ)^order e^{-2πizλ} dρ(λ)` for `|Im z| < 2Δ`.
    pub fn eval_r(&self, z: Complex64, order: u32) -> Result<Complex64> {
        if order > 2 {
            return domain(format!("derivative order {order} not supported (0, 1 or 2)"));
        }
        self.check_doubled_strip(z.im, "eval_r")?;
        let term = |lambda: f64| -> Complex64 {
            // e^{-2πizλ} = e^{2π y λ} e^{-2πi x λ}
            let phase = Complex64::from_polar((2.0 * PI * z.im * lambda).exp(), -2.0 * PI * z.re * lambda);
            match order {
                0 => phase,
                1 => phase * Complex64::new(0.0, -2.0 * PI * lambda),
                _ => phase * (-(2.0 * PI * lambda).powi(2)),
            }
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            acc += a.mass * term(a.location);
        }
        if let Some(d) = &self.density {
            let mut s = Complex64::new(0.0, 0.0);
            for (i, &v) in d.values.iter().enumerate() {
                if v != 0.0 {
                    s += v * term(d.midpoint(i));
                }
            }
            acc += d.h * s;
        }
        if !(acc.re.is_finite() && acc.im.is_finite()) {
            return Err(Error::Numeric(format!("r^({order})({z}) is not finite")));
        }
        Ok(acc)
    }

    /// Exponential tilt `dρ_y = e^{2πyλ} dρ`, `|y| < 2Δ`. The tilted measure is
    /// assigned the strip half-width `Δ - |y|/2` on which its transform stays analytic.
    pub fn tilt(&self, y: f64) -> Result<SpectralMeasure> {
        self.check_doubled_strip(y, "tilt")?;
        if y == 0.0 {
            return Ok(self.clone());
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { location: a.location, mass: a.mass * (2.0 * PI * y * a.location).exp() })
            .collect();
        let density = self.density.as_ref().map(|d| {
            let values = d
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (2.0 * PI * y * d.midpoint(i)).exp())
                .collect();
            let tail = match d.tail {
                Some(TailClass::Exponential { rate }) => {
                    Some(TailClass::Exponential { rate: rate - 2.0 * PI * y.abs() })
                }
                t => t,
            };
            GridDensity { values, tail, ..d.clone() }
        });
        let out = Self {
            atoms,
            density,
            singular_flag: self.singular_flag,
            delta: self.delta - 0.5 * y.abs(),
            degenerate: self.degenerate,
        };
        if !out.total_mass().is_finite() {
            return Err(Error::Numeric(format!("tilt by {y} overflows")));
        }
        Ok(out)
    }

    /// `m_j(y) = ∫ λ^j e^{4πyλ} dρ(λ)` for `j ∈ {0,1,2}` and `|y| < Δ`.
    pub fn exp_moment(&self, y: f64, j: u32) -> Result<f64> {
        if j > 2 {
            return domain(format!("moment order {j} not supported (0, 1 or 2)"));
        }
        if !(y.abs() < self.delta) {
            return domain(format!("exp_moment: |{y}| is not below Δ = {}", self.delta));
        }
        let [m0, m1, m2] = self.exp_moments(y);
        let v = [m0, m1, m2][j as usize];
        if !v.is_finite() {
            return Err(Error::Numeric(format!("moment m_{j}({y}) is not finite")));
        }
        Ok(v)
    }

    /// All three moments in one pass; no domain check.
    pub(crate) fn exp_moments(&self, y: f64) -> [f64; 3] {
        let mut m = [0.0; 3];
        let mut add = |lambda: f64, w: f64| {
            let e = w * (4.0 * PI * y * lambda).exp();
            m[0] += e;
            m[1] += e * lambda;
            m[2] += e * lambda * lambda;
        };
        for a in &self.atoms {
            add(a.location, a.mass);
        }
        if let Some(d) = &self.density {
            for (i, &v) in d.values.iter().enumerate() {
                if v != 0.0 {
                    add(d.midpoint(i), d.h * v);
                }
            }
        }
        m
    }

    /// Decides whether `(1+λ²) e^{4πyλ} p(λ) ∈ L²` from the density annotations.
    pub fn check_cond_l2(&self, y: f64) -> Result<CondL2Check> {
        let Some(d) = &self.density else {
            return domain("measure has no density part; the no-density branch applies");
        };
        if self.singular_flag {
            return domain("measure has a singular continuous part; the no-density branch applies");
        }
        let mut failures = Vec::new();
        for s in &d.singularities {
            if s.exponent >= 0.5 {
                failures.push(format!(
                    "singularity at λ = {} has exponent {} ≥ 1/2 (not locally square-integrable)",
                    s.location, s.exponent
                ));
            }
        }
        if let Some(TailClass::Exponential { rate }) = d.tail {
            if 4.0 * PI * y.abs() >= rate {
                failures.push(format!(
                    "exponential tail of rate {rate} does not absorb the weight e^{{4π·{y}·λ}}"
                ));
            }
        }
        if failures.is_empty() {
            Ok(CondL2Check { holds: true, diagnostic: format!("square-integrable at y = {y}") })
        } else {
            Ok(CondL2Check { holds: false, diagnostic: failures.join("; ") })
        }
    }

    /// `F[ρ](x) = ∫ e^{-2πixλ} dρ(λ)` on a grid of real `x`.
    pub fn fourier_density(&self, x_grid: &[f64]) -> Result<Vec<Complex64>> {
        x_grid.iter().map(|&x| self.eval_r(Complex64::new(x, 0.0), 0)).collect()
    }

    /// Mirror image `ρ̃(I) = ρ(-I)`.
    pub fn flip(&self) -> SpectralMeasure {
        let mut atoms: Vec<Atom> =
            self.atoms.iter().map(|a| Atom { location: -a.location, mass: a.mass }).collect();
        atoms.reverse();
        let density = self.density.as_ref().map(|d| {
            let mut values = d.values.clone();
            values.reverse();
            GridDensity {
                grid_min: -d.grid_max(),
                h: d.h,
                values,
                singularities: d
                    .singularities
                    .iter()
                    .map(|s| Singularity { location: -s.location, exponent: s.exponent })
                    .collect(),
                tail: d.tail,
            }
        });
        Self { atoms, density, ..self.clone() }
    }

    /// `ρ^{*k}` with the default grid-size cap.
    pub fn convolve_power(&self, k: u32) -> Result<SpectralMeasure> {
        self.convolve_power_with_limit(k, DEFAULT_MAX_GRID_POINTS)
    }

    pub fn convolve_power_with_limit(&self, k: u32, max_points: usize) -> Result<SpectralMeasure> {
        convolve::convolve_power(self, k, max_points)
    }

    pub(crate) fn from_raw(
        atoms: Vec<Atom>,
        density: Option<GridDensity>,
        singular_flag: bool,
        delta: f64,
    ) -> Self {
        let degenerate = atoms.len() == 1 && density.is_none() && !singular_flag;
        Self { atoms, density, singular_flag, delta, degenerate }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> SpectralMeasure {
        SpectralMeasure::symmetric_pair(1.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn eval_r_two_atoms_is_cosine() {
        let v = pair().eval_r(Complex64::new(0.25, 0.0), 0).unwrap();
        assert!(v.norm() < 1e-15);
        let x = 0.137;
        let v = pair().eval_r(Complex64::new(x, 0.0), 0).unwrap();
        assert!((v.re - (2.0 * PI * x).cos()).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn eval_r_at_origin_is_total_mass() {
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        let v = g.eval_r(Complex64::new(0.0, 0.0), 0).unwrap();
        assert!((v.re - g.total_mass()).abs() < 1e-14);
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eval_r_gaussian_on_imaginary_axis() {
        // r(z) = e^{-πz²}; r(2i·0.25) = e^{π/4}
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        let v = g.eval_r(Complex64::new(0.0, 0.5), 0).unwrap();
        assert!((v.re - (PI / 4.0).exp()).abs() < 1e-10, "{v}");
        assert!(v.im.abs() < 1e-12);
        assert!((v.re - 2.19328).abs() < 1e-5);
    }

    #[test]
    fn eval_r_rejects_points_outside_doubled_strip() {
        let g = pair();
        assert!(matches!(g.eval_r(Complex64::new(0.0, 2.0), 0), Err(Error::Domain(_))));
        assert!(matches!(g.eval_r(Complex64::new(0.0, 0.0), 3), Err(Error::Domain(_))));
    }

    #[test]
    fn eval_r_derivatives_match_closed_form() {
        // r(z) = cos(2πz): r' = -2π sin, r'' = -4π² cos
        let z = Complex64::new(0.3, 0.1);
        let m = pair();
        let r1 = m.eval_r(z, 1).unwrap();
        let r2 = m.eval_r(z, 2).unwrap();
        let e1 = -2.0 * PI * (2.0 * PI * z).sin();
        let e2 = -4.0 * PI * PI * (2.0 * PI * z).cos();
        assert!((r1 - e1).norm() < 1e-12);
        assert!((r2 - e2).norm() < 1e-11);
    }

    #[test]
    fn tilt_examples() {
        let m = pair();
        assert_eq!(m.tilt(0.0).unwrap(), m);
        let one = SpectralMeasure::degenerate(1.0, 1.0, 1.0).unwrap();
        let t = one.tilt(0.3).unwrap();
        assert!((t.atoms()[0].mass - (2.0 * PI * 0.3).exp()).abs() < 1e-12);
        let y = 0.17;
        let t = m.tilt(y).unwrap();
        assert!((t.total_mass() - (2.0 * PI * y).cosh()).abs() < 1e-13);
        assert!(matches!(m.tilt(2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn tilt_mass_equals_r_on_imaginary_axis() {
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        for y in [-0.7, -0.2, 0.4, 1.1] {
            let t = g.tilt(y).unwrap();
            let r = g.eval_r(Complex64::new(0.0, y), 0).unwrap().re;
            assert!((t.total_mass() / r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_moment_examples() {
        let m = pair();
        let y = 0.05;
        assert!((m.exp_moment(y, 0).unwrap() - (4.0 * PI * y).cosh()).abs() < 1e-13);
        assert!((m.exp_moment(y, 1).unwrap() - (4.0 * PI * y).sinh()).abs() < 1e-13);
        let d0 = SpectralMeasure::degenerate(0.0, 1.0, 1.0).unwrap();
        assert_eq!(d0.exp_moment(0.3, 0).unwrap(), 1.0);
        assert_eq!(d0.exp_moment(0.3, 1).unwrap(), 0.0);
        assert_eq!(d0.exp_moment(0.3, 2).unwrap(), 0.0);
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        for y in [-0.3, 0.0, 0.25] {
            let e = (4.0 * PI * y * y).exp();
            assert!((g.exp_moment(y, 0).unwrap() - e).abs() < 1e-8);
        }
        assert!(matches!(m.exp_moment(1.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn cond_l2_examples() {
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        assert!(g.check_cond_l2(0.9).unwrap().holds);
        let inv = SpectralMeasure::from_density(GridDensity::inv_sqrt(-1.0, 1.0, 1.0 / 256.0).unwrap(), 1.0)
            .unwrap();
        let c = inv.check_cond_l2(0.0).unwrap();
        assert!(!c.holds);
        assert!(c.diagnostic.contains("λ = 0"));
        let u = SpectralMeasure::from_density(GridDensity::uniform(-1.0, 1.0, 1.0 / 256.0).unwrap(), 1.0)
            .unwrap();
        assert!(u.check_cond_l2(0.0).unwrap().holds);
        assert!(matches!(pair().check_cond_l2(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn fourier_density_examples() {
        let d0 = SpectralMeasure::degenerate(0.0, 1.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
        for v in d0.fourier_density(&xs).unwrap() {
            assert!((v - 1.0).norm() < 1e-15);
        }
        for (v, x) in pair().fourier_density(&xs).unwrap().iter().zip(&xs) {
            assert!((v.re - (2.0 * PI * x).cos()).abs() < 1e-14);
        }
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        let err = g
            .fourier_density(&xs)
            .unwrap()
            .iter()
            .zip(&xs)
            .map(|(v, x)| (v - (-PI * x * x).exp()).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn measure_invariants_are_enforced() {
        assert!(SpectralMeasure::new(vec![Atom { location: 0.0, mass: 1.0 }], None, false, 1.0).is_err());
        assert!(SpectralMeasure::new(
            vec![Atom { location: 0.0, mass: 1.0 }, Atom { location: 0.0, mass: 2.0 }],
            None,
            false,
            1.0
        )
        .is_err());
        assert!(SpectralMeasure::new(vec![Atom { location: 0.0, mass: -1.0 }], None, false, 1.0).is_err());
        assert!(GridDensity::new(0.0, 1.0, 0.25, vec![1.0, -1.0, 1.0, 1.0], vec![], None).is_err());
        assert!(GridDensity::new(0.0, 1.0, 0.25, vec![1.0; 3], vec![], None).is_err());
        let bad_tail = GridDensity::new(
            0.0,
            1.0,
            0.25,
            vec![1.0; 4],
            vec![],
            Some(TailClass::Exponential { rate: 1.0 }),
        )
        .unwrap();
        assert!(SpectralMeasure::from_density(bad_tail, 1.0).is_err());
        assert!(GridDensity::new(
            0.0,
            1.0,
            0.25,
            vec![1.0; 4],
            vec![Singularity { location: 0.5, exponent: 1.0 }],
            None
        )
        .is_err());
    }

    #[test]
    fn flip_mirrors_the_transform() {
        let m = SpectralMeasure::new(
            vec![Atom { location: 0.3, mass: 0.2 }, Atom { location: -1.1, mass: 0.7 }],
            Some(GridDensity::uniform(0.0, 1.0, 0.125).unwrap()),
            false,
            1.0,
        )
        .unwrap();
        let z = Complex64::new(0.41, 0.2);
        let a = m.flip().eval_r(z, 0).unwrap();
        let b = m.eval_r(Complex64::new(-z.re, -z.im), 0).unwrap();
        assert!((a - b).norm() < 1e-13);
    }
}
