//! Adaptive Runge-Kutta-Fehlberg (RKF45) integration of planar ODEs
//! `dp/dt = f(p)` over autonomous vector fields.

use crate::geom::Vec2;

/// Fehlberg tableau coefficients (4th/5th order pair).
const A: [[f64; 5]; 5] = [
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];

/// One embedded RKF45 step of size `h` from `p`. Returns the 5th-order
/// estimate and the local error estimate (4th vs 5th order difference).
pub fn rkf45_step(p: Vec2, h: f64, f: &impl Fn(Vec2) -> Vec2) -> (Vec2, f64) {
    let mut k = [Vec2::default(); 6];
    k[0] = f(p) * h;
    for i in 0..5 {
        let mut q = p;
        for (j, kj) in k.iter().enumerate().take(i + 1) {
            q += *kj * A[i][j];
        }
        k[i + 1] = f(q) * h;
    }
    let mut y4 = p;
    let mut y5 = p;
    for i in 0..6 {
        y4 += k[i] * B4[i];
        y5 += k[i] * B5[i];
    }
    (y5, (y5 - y4).norm())
}

/// Integrates `dp/dt = f(p)` from `p0` over `t_span` with adaptive step
/// control targeting absolute local error `tol` per unit time.
pub fn integrate(p0: Vec2, t_span: f64, tol: f64, f: &impl Fn(Vec2) -> Vec2) -> Vec2 {
    let mut p = p0;
    let mut t = 0.0;
    let mut h = t_span;
    let h_min = t_span * 1e-9;
    while t < t_span {
        if t + h > t_span {
            h = t_span - t;
        }
        let (next, err) = rkf45_step(p, h, f);
        let budget = tol * (h / t_span).max(1e-12);
        if err <= budget || h <= h_min {
            p = next;
            t += h;
        }
        // Standard safety-factored step update, clamped to x0.1..x5.
        let scale = if err > 0.0 {
            0.9 * (budget / err).powf(0.2)
        } else {
            5.0
        };
        h *= scale.clamp(0.1, 5.0);
        if h < h_min {
            h = h_min;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_field_is_exact() {
        let f = |_: Vec2| Vec2::new(1.0, 0.0);
        let p = integrate(Vec2::new(3.0, 3.0), 1.0, 1e-4, &f);
        assert_relative_eq!(p.x, 4.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn vortex_preserves_radius() {
        let omega = 0.1;
        let f = move |p: Vec2| Vec2::new(-omega * p.y, omega * p.x);
        let mut p = Vec2::new(10.0, 0.0);
        for _ in 0..20 {
            p = integrate(p, 1.0, 1e-4, &f);
        }
        let r = p.norm();
        assert!((r - 10.0).abs() / 10.0 < 1e-3, "radius drifted to {r}");
        // Analytic position after t=20: angle omega*t
        let expect = Vec2::new(10.0 * (omega * 20.0).cos(), 10.0 * (omega * 20.0).sin());
        assert!((p - expect).norm() < 1e-2, "position error {}", (p - expect).norm());
    }

    #[test]
    fn time_scaling_equivalence() {
        // Advection under c*f over time t equals advection under f over c*t
        // for autonomous fields.
        let omega = 0.2;
        let f = move |p: Vec2| Vec2::new(-omega * p.y, omega * p.x);
        let cf = move |p: Vec2| Vec2::new(-2.0 * omega * p.y, 2.0 * omega * p.x);
        let a = integrate(Vec2::new(5.0, 1.0), 2.0, 1e-8, &cf);
        let b = integrate(Vec2::new(5.0, 1.0), 4.0, 1e-8, &f);
        assert!((a - b).norm() < 1e-5);
    }
}
