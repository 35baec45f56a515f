//! Convolution powers of spectral measures.

use rustfft::{num_complex::Complex, FftPlanner};

use super::{Atom, GridDensity, Singularity, SpectralMeasure};
use crate::error::{domain, Error, Result};

/// Default cap on the number of grid cells of a convolution power.
pub const DEFAULT_MAX_GRID_POINTS: usize = 1 << 24;

const MAX_SINGULARITIES: usize = 4096;

/// Linear convolution `c_n = Σ a_i b_{n-i}` by zero-padded FFT (direct for tiny inputs).
pub(crate) fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; n];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let size = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(size, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(n);
    fa.into_iter().map(|c| c.re * scale).collect()
}

/// Density on a grid: origin and midpoint samples, common step implied.
struct Sampled {
    origin: f64,
    values: Vec<f64>,
}

fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|x, y| x.location.total_cmp(&y.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if (a.location - last.location).abs() <= 1e-12 * last.location.abs().max(1.0) => {
                last.mass += a.mass;
            }
            _ => out.push(a),
        }
    }
    out
}

fn binomial(k: u32, j: u32) -> f64 {
    let mut c = 1.0;
    for i in 0..j {
        c = c * (k - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Singular points of `D^{*n}`, `n = 1..=k`: sums of `n` annotated points
/// whose exponents add to `Σα - (n-1) > 0`.
fn singular_combos(sing: &[Singularity], k: u32) -> Vec<Vec<Singularity>> {
    let mut by_n = vec![Vec::new(); k as usize + 1];
    fn dfs(
        sing: &[Singularity],
        start: usize,
        n: u32,
        loc: f64,
        exponent: f64,
        k: u32,
        by_n: &mut [Vec<Singularity>],
        budget: &mut usize,
    ) {
        for i in start..sing.len() {
            if *budget == 0 {
                return;
            }
            let e = if n == 0 { sing[i].exponent } else { exponent + sing[i].exponent - 1.0 };
            if e <= 0.0 {
                continue;
            }
            let l = loc + sing[i].location;
            by_n[n as usize + 1].push(Singularity { location: l, exponent: e });
            *budget -= 1;
            if n + 1 < k {
                dfs(sing, i, n + 1, l, e, k, by_n, budget);
            }
        }
    }
    let mut budget = MAX_SINGULARITIES;
    dfs(sing, 0, 0, 0.0, 0.0, k, &mut by_n, &mut budget);
    by_n
}

pub(super) fn convolve_power(m: &SpectralMeasure, k: u32, max_points: usize) -> Result<SpectralMeasure> {
    if k == 0 {
        return domain("convolution power must be at least 1");
    }
    if m.singular_flag {
        return domain("convolution power of a measure with a singular continuous part");
    }
    if k == 1 {
        return Ok(m.clone());
    }

    // A^{*j}, j = 0..=k
    let mut atom_powers: Vec<Vec<Atom>> = vec![vec![Atom { location: 0.0, mass: 1.0 }]];
    if !m.atoms.is_empty() {
        for _ in 1..=k {
            let prev = atom_powers.last().unwrap();
            let mut next = Vec::with_capacity(prev.len() * m.atoms.len());
            for p in prev {
                for a in &m.atoms {
                    next.push(Atom { location: p.location + a.location, mass: p.mass * a.mass });
                }
            }
            let next = merge_atoms(next);
            if next.len() > max_points {
                return Err(Error::Size { requested: next.len(), limit: max_points });
            }
            atom_powers.push(next);
        }
    }
    let atoms_k: Vec<Atom> = if m.atoms.is_empty() { Vec::new() } else { atom_powers[k as usize].clone() };
    let total = m.total_mass().powi(k as i32);

    let Some(d) = &m.density else {
        return Ok(SpectralMeasure::from_raw(atoms_k, None, false, m.delta));
    };
    let h = d.h;

    // D^{*n}, n = 1..=k
    let mut dens_powers: Vec<Sampled> = vec![Sampled { origin: d.grid_min, values: d.values.clone() }];
    for _ in 2..=k {
        let prev = dens_powers.last().unwrap();
        let len = prev.values.len() + d.values.len() - 1;
        if len > max_points {
            return Err(Error::Size { requested: len, limit: max_points });
        }
        let mut values = fft_convolve(&prev.values, &d.values);
        for v in &mut values {
            *v = (*v * h).max(0.0);
        }
        dens_powers.push(Sampled { origin: prev.origin + d.grid_min + 0.5 * h, values });
    }

    let values = if m.atoms.is_empty() {
        let top = dens_powers.pop().unwrap();
        (top.origin, top.values)
    } else {
        // Σ_{j<k} C(k,j) A^{*j} * D^{*(k-j)}, deposited on the lattice of D^{*k}.
        let base = dens_powers[k as usize - 1].origin;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..k {
            let src = &dens_powers[(k - j) as usize - 1];
            for a in &atom_powers[j as usize] {
                lo = lo.min(a.location + src.origin);
                hi = hi.max(a.location + src.origin + src.values.len() as f64 * h);
            }
        }
        let start = base + ((lo - base) / h).floor() * h;
        let n = ((hi - start) / h).ceil() as usize + 2;
        if n > max_points {
            return Err(Error::Size { requested: n, limit: max_points });
        }
        let mut out = vec![0.0; n];
        for j in 0..k {
            let src = &dens_powers[(k - j) as usize - 1];
            let c = binomial(k, j);
            for a in &atom_powers[j as usize] {
                let offset = (a.location + src.origin - start) / h;
                let mut i0 = offset.floor();
                let mut frac = offset - i0;
                if frac < 1e-9 {
                    frac = 0.0;
                } else if frac > 1.0 - 1e-9 {
                    frac = 0.0;
                    i0 += 1.0;
                }
                let i0 = i0 as usize;
                let w = c * a.mass;
                for (q, &v) in src.values.iter().enumerate() {
                    out[i0 + q] += w * (1.0 - frac) * v;
                    if frac > 0.0 {
                        out[i0 + q + 1] += w * frac * v;
                    }
                }
            }
        }
        (start, out)
    };
    let (origin, mut values) = values;

    let atom_mass: f64 = atoms_k.iter().map(|a| a.mass).sum();
    let got = h * values.iter().sum::<f64>();
    let want = total - atom_mass;
    if got > 0.0 && want > 0.0 {
        let s = want / got;
        for v in &mut values {
            *v *= s;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("convolution power {k} produced non-finite values")));
    }

    let combos = singular_combos(&d.singularities, k);
    let mut singularities: Vec<Singularity> = Vec::new();
    for j in 0..k.min(atom_powers.len() as u32) {
        let n = (k - j) as usize;
        for s in &combos[n] {
            for a in &atom_powers[j as usize] {
                singularities.push(Singularity { location: s.location + a.location, exponent: s.exponent });
            }
        }
    }
    singularities.sort_by(|x, y| x.location.total_cmp(&y.location));
    singularities.dedup_by(|x, y| {
        if (x.location - y.location).abs() <= 1e-12 * y.location.abs().max(1.0) {
            y.exponent = y.exponent.max(x.exponent);
            true
        } else {
            false
        }
    });
    singularities.truncate(MAX_SINGULARITIES);

    let density = GridDensity::from_parts(origin, h, values, singularities, d.tail)?;
    Ok(SpectralMeasure::from_raw(atoms_k, Some(density), false, m.delta))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::GridDensity;

    #[test]
    fn fft_matches_direct() {
        let a: Vec<f64> = (0..100).map(|i| ((i * 7) % 13) as f64).collect();
        let b: Vec<f64> = (0..77).map(|i| ((i * 5) % 11) as f64 - 3.0).collect();
        let fast = fft_convolve(&a, &b);
        let mut slow = vec![0.0; a.len() + b.len() - 1];
        for i in 0..a.len() {
            for j in 0..b.len() {
                slow[i + j] += a[i] * b[j];
            }
        }
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn dirac_power() {
        let m = SpectralMeasure::degenerate(0.7, 1.0, 1.0).unwrap();
        let p = m.convolve_power(3).unwrap();
        assert_eq!(p.atoms().len(), 1);
        assert!((p.atoms()[0].location - 2.1).abs() < 1e-15);
        assert!((p.atoms()[0].mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_square_is_triangle() {
        let h = 1.0 / 256.0;
        let m = SpectralMeasure::from_density(GridDensity::uniform(-1.0, 1.0, h).unwrap(), 1.0).unwrap();
        let p = m.convolve_power(2).unwrap();
        let d = p.density().unwrap();
        assert!((d.grid_min() + 2.0 - 0.5 * h).abs() < 1e-12);
        let mut best = (f64::INFINITY, 0.0);
        for (i, x) in d.midpoints().enumerate() {
            let expect = (0.25 * (2.0 - x.abs())).max(0.0);
            assert!((d.values()[i] - expect).abs() < 2.0 * h, "x={x}");
            if x.abs() < best.0 {
                best = (x.abs(), d.values()[i]);
            }
        }
        assert!((best.1 - 0.5).abs() < 1e-3);
    }

    #[test]
    fn gaussian_square() {
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        let p = g.convolve_power(2).unwrap();
        let d = p.density().unwrap();
        let err = d
            .midpoints()
            .zip(d.values())
            .map(|(x, v)| (v - (-PI * x * x / 2.0).exp() / 2f64.sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn mixed_power_mass_and_transform() {
        let m = SpectralMeasure::new(
            vec![Atom { location: 0.3, mass: 0.4 }, Atom { location: -0.55, mass: 0.25 }],
            Some(GridDensity::gaussian(-5.0, 5.0, 1.0 / 128.0).unwrap()),
            false,
            1.0,
        )
        .unwrap();
        for k in [2u32, 3, 5] {
            let p = m.convolve_power(k).unwrap();
            let rel = (p.total_mass() - m.total_mass().powi(k as i32)).abs() / m.total_mass().powi(k as i32);
            assert!(rel < 1e-10, "k={k}: {rel}");
            for x in [0.0, 0.13, 0.4] {
                let z = num_complex::Complex64::new(x, 0.05);
                let lhs = p.eval_r(z, 0).unwrap();
                let rhs = m.eval_r(z, 0).unwrap().powi(k as i32);
                assert!((lhs - rhs).norm() < 1e-4 * rhs.norm().max(1.0), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn singularity_annotations_propagate() {
        let m = SpectralMeasure::from_density(GridDensity::inv_sqrt(-1.0, 1.0, 1.0 / 64.0).unwrap(), 1.0)
            .unwrap();
        // 1/2 + 1/2 - 1 = 0: the square is bounded near 0
        assert!(m.convolve_power(2).unwrap().density().unwrap().singularities().is_empty());
        let s = vec![Singularity { location: 0.25, exponent: 0.8 }];
        let d = GridDensity::new(-1.0, 1.0, 0.25, vec![1.0; 8], s, None).unwrap();
        let m = SpectralMeasure::from_density(d, 1.0).unwrap();
        let p = m.convolve_power(2).unwrap();
        let ann = p.density().unwrap().singularities();
        assert_eq!(ann.len(), 1);
        assert!((ann[0].location - 0.5).abs() < 1e-12 && (ann[0].exponent - 0.6).abs() < 1e-12);
    }

    #[test]
    fn size_limit_and_domain() {
        let g = SpectralMeasure::gaussian(1.0).unwrap();
        assert!(matches!(g.convolve_power_with_limit(4, 5000), Err(Error::Size { .. })));
        assert!(matches!(g.convolve_power(0), Err(Error::Domain(_))));
        let s = SpectralMeasure::new(vec![], Some(GridDensity::uniform(0.0, 1.0, 0.5).unwrap()), true, 1.0).unwrap();
        assert!(matches!(s.convolve_power(2), Err(Error::Domain(_))));
    }
}
