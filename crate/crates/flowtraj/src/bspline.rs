//! Multilevel cubic B-spline least-squares approximation of scattered data
//! over a rectangular domain.
//!
//! Each level holds a uniform tensor-product cubic control lattice; level
//! `l+1` doubles the cell count of level `l` and fits the residual left by
//! the coarser levels. The per-level least-squares problem is solved with
//! conjugate gradients on the normal equations (the design matrix has 16
//! nonzeros per sample, so it stays implicit).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("no samples to fit")]
    NoSamples,
    #[error("sample ({0}, {1}) outside domain")]
    SampleOutOfDomain(f64, f64),
    #[error("evaluation point ({0}, {1}) outside domain")]
    OutOfDomain(f64, f64),
}

/// Scattered (x, y, z) observations over the domain [0, w] x [0, h].
#[derive(Debug, Clone)]
pub struct ScatteredSamples {
    pub points: Vec<(f64, f64, f64)>,
    pub width: f64,
    pub height: f64,
}

impl ScatteredSamples {
    pub fn new(points: Vec<(f64, f64, f64)>, width: f64, height: f64) -> Result<Self, SplineError> {
        if points.is_empty() {
            return Err(SplineError::NoSamples);
        }
        for &(x, y, z) in &points {
            if !(0.0..=width).contains(&x) || !(0.0..=height).contains(&y) || !z.is_finite() {
                return Err(SplineError::SampleOutOfDomain(x, y));
            }
        }
        Ok(ScatteredSamples {
            points,
            width,
            height,
        })
    }
}

/// Cubic B-spline basis values for local coordinate t in [0, 1].
#[inline]
fn basis(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        (1.0 - t).powi(3) / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

#[derive(Debug, Clone)]
struct Lattice {
    cells_x: usize,
    cells_y: usize,
    /// (cells_x + 3) * (cells_y + 3) control coefficients, row-major.
    coef: Vec<f64>,
}

impl Lattice {
    fn cols(&self) -> usize {
        self.cells_x + 3
    }

    /// Anchor cell and basis weights for a domain point.
    fn locate(&self, x: f64, y: f64, w: f64, h: f64) -> (usize, usize, [f64; 4], [f64; 4]) {
        let sx = (x / w) * self.cells_x as f64;
        let sy = (y / h) * self.cells_y as f64;
        let ix = (sx.floor() as usize).min(self.cells_x - 1);
        let iy = (sy.floor() as usize).min(self.cells_y - 1);
        (ix, iy, basis(sx - ix as f64), basis(sy - iy as f64))
    }

    fn eval(&self, x: f64, y: f64, w: f64, h: f64) -> f64 {
        let (ix, iy, bx, by) = self.locate(x, y, w, h);
        let cols = self.cols();
        let mut acc = 0.0;
        for (dy, wy) in by.iter().enumerate() {
            let row = (iy + dy) * cols + ix;
            for (dx, wx) in bx.iter().enumerate() {
                acc += wy * wx * self.coef[row + dx];
            }
        }
        acc
    }
}

/// Composite surface: the sum of all refinement levels.
#[derive(Debug, Clone)]
pub struct SplineSurface {
    width: f64,
    height: f64,
    levels: Vec<Lattice>,
}

impl SplineSurface {
    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, SplineError> {
        let eps = 1e-9;
        if !(-eps..=self.width + eps).contains(&x) || !(-eps..=self.height + eps).contains(&y) {
            return Err(SplineError::OutOfDomain(x, y));
        }
        let xc = x.clamp(0.0, self.width);
        let yc = y.clamp(0.0, self.height);
        Ok(self
            .levels
            .iter()
            .map(|l| l.eval(xc, yc, self.width, self.height))
            .sum())
    }

    /// Root-mean-square residual against a sample set.
    pub fn rmse(&self, samples: &ScatteredSamples) -> f64 {
        let ss: f64 = samples
            .points
            .iter()
            .map(|&(x, y, z)| {
                let e = self.eval(x, y).unwrap_or(0.0) - z;
                e * e
            })
            .sum();
        (ss / samples.points.len() as f64).sqrt()
    }
}

/// Least-squares fit of one lattice to residual values via CGNR.
fn fit_level(
    samples: &ScatteredSamples,
    residual: &[f64],
    cells: usize,
) -> (Lattice, Vec<f64>) {
    let mut lat = Lattice {
        cells_x: cells,
        cells_y: cells,
        coef: vec![0.0; (cells + 3) * (cells + 3)],
    };
    let n = samples.points.len();
    let m = lat.coef.len();
    let cols = lat.cols();

    // Precompute each sample's 16 (index, weight) pairs.
    let mut support: Vec<(usize, [f64; 4], [f64; 4])> = Vec::with_capacity(n);
    for &(x, y, _) in &samples.points {
        let (ix, iy, bx, by) = lat.locate(x, y, samples.width, samples.height);
        support.push((iy * cols + ix, bx, by));
    }

    let apply = |phi: &[f64], out: &mut [f64]| {
        for (s, &(base, bx, by)) in support.iter().enumerate() {
            let mut acc = 0.0;
            for (dy, wy) in by.iter().enumerate() {
                let row = base + dy * cols;
                for (dx, wx) in bx.iter().enumerate() {
                    acc += wy * wx * phi[row + dx];
                }
            }
            out[s] = acc;
        }
    };
    let apply_t = |r: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (s, &(base, bx, by)) in support.iter().enumerate() {
            let rs = r[s];
            for (dy, wy) in by.iter().enumerate() {
                let row = base + dy * cols;
                for (dx, wx) in bx.iter().enumerate() {
                    out[row + dx] += wy * wx * rs;
                }
            }
        }
    };

    // CGNR: minimize ||A phi - residual||^2 starting from phi = 0.
    let mut phi = vec![0.0; m];
    let mut r = residual.to_vec(); // b - A*0
    let mut s = vec![0.0; m];
    apply_t(&r, &mut s);
    let mut p = s.clone();
    let mut gamma: f64 = s.iter().map(|x| x * x).sum();
    let gamma0 = gamma.max(1e-300);
    let mut q = vec![0.0; n];
    let max_iter = (2 * m).clamp(64, 1200);
    for _ in 0..max_iter {
        if gamma <= 1e-26 * gamma0 {
            break;
        }
        apply(&p, &mut q);
        let qq: f64 = q.iter().map(|x| x * x).sum();
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for i in 0..m {
            phi[i] += alpha * p[i];
        }
        for i in 0..n {
            r[i] -= alpha * q[i];
        }
        apply_t(&r, &mut s);
        let gamma_next: f64 = s.iter().map(|x| x * x).sum();
        let beta = gamma_next / gamma;
        for i in 0..m {
            p[i] = s[i] + beta * p[i];
        }
        gamma = gamma_next;
    }

    lat.coef = phi;
    apply(&lat.coef, &mut q);
    let new_residual: Vec<f64> = residual.iter().zip(&q).map(|(r0, pred)| r0 - pred).collect();
    (lat, new_residual)
}

/// Hierarchical fit: level l fits the residual of level l-1 on a lattice
/// with twice the cells (base lattice 4x4 control points = one cell).
pub fn fit(samples: &ScatteredSamples, levels: usize) -> SplineSurface {
    assert!(levels >= 1, "need at least one level");
    let mut surface = SplineSurface {
        width: samples.width,
        height: samples.height,
        levels: Vec::with_capacity(levels),
    };
    let mut residual: Vec<f64> = samples.points.iter().map(|&(_, _, z)| z).collect();
    for level in 0..levels {
        let cells = 1usize << level;
        let (lat, next) = fit_level(samples, &residual, cells);
        surface.levels.push(lat);
        residual = next;
    }
    surface
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn jittered_grid(seed: u64, n: usize, w: f64, h: f64, f: impl Fn(f64, f64) -> f64) -> ScatteredSamples {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let x = ((i as f64 + 0.5) / n as f64 * w + rng.gen_range(-0.3..0.3)).clamp(0.0, w);
                let y = ((j as f64 + 0.5) / n as f64 * h + rng.gen_range(-0.3..0.3)).clamp(0.0, h);
                pts.push((x, y, f(x, y)));
            }
        }
        ScatteredSamples::new(pts, w, h).unwrap()
    }

    #[test]
    fn single_sample_interpolates() {
        let s = ScatteredSamples::new(vec![(3.25, 7.5, 4.2)], 10.0, 10.0).unwrap();
        let surf = fit(&s, 1);
        assert!((surf.eval(3.25, 7.5).unwrap() - 4.2).abs() < 1e-6);
    }

    #[test]
    fn plane_reproduced_to_machine_precision() {
        let s = jittered_grid(11, 10, 16.0, 12.0, |x, y| 2.0 * x + 3.0 * y + 1.0);
        let surf = fit(&s, 3);
        assert!(surf.rmse(&s) < 1e-6, "rmse {}", surf.rmse(&s));
        // held-out points also match the plane
        let v = surf.eval(5.3, 7.7).unwrap();
        assert!((v - (2.0 * 5.3 + 3.0 * 7.7 + 1.0)).abs() < 1e-5);
    }

    #[test]
    fn constant_data_gives_constant_surface() {
        let s = jittered_grid(5, 12, 10.0, 10.0, |_, _| 2.5);
        let surf = fit(&s, 2);
        for &(x, y) in &[(0.0, 0.0), (5.0, 5.0), (9.99, 0.3), (2.0, 8.0)] {
            assert!((surf.eval(x, y).unwrap() - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn rmse_non_increasing_over_levels() {
        let s = jittered_grid(7, 8, 10.0, 10.0, |x, y| (x * 0.7).sin() + (y * 0.5).cos());
        let mut prev = f64::INFINITY;
        for levels in 1..=5 {
            let surf = fit(&s, levels);
            let rmse = surf.rmse(&s);
            assert!(rmse <= prev + 1e-12, "level {levels}: {rmse} > {prev}");
            prev = rmse;
        }
    }

    #[test]
    fn eval_outside_domain_errors() {
        let s = ScatteredSamples::new(vec![(1.0, 1.0, 1.0)], 4.0, 4.0).unwrap();
        let surf = fit(&s, 1);
        assert!(matches!(surf.eval(5.0, 1.0), Err(SplineError::OutOfDomain(..))));
        assert!(matches!(surf.eval(1.0, -0.5), Err(SplineError::OutOfDomain(..))));
    }

    #[test]
    fn continuity_no_jumps() {
        let s = jittered_grid(3, 8, 10.0, 10.0, |x, y| x * y * 0.1);
        let surf = fit(&s, 3);
        // finite Lipschitz bound along a sample path
        let mut prev = surf.eval(0.0, 5.0).unwrap();
        for i in 1..=1000 {
            let x = i as f64 * 0.01;
            let cur = surf.eval(x, 5.0).unwrap();
            assert!((cur - prev).abs() < 0.05, "jump at x={x}");
            prev = cur;
        }
    }
}
