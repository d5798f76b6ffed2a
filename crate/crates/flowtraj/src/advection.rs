//! Dense particle advection through per-mini-batch averaged flow,
//! streakline collection, and streak-flow extraction via scattered-data
//! B-spline fitting.

use crate::bspline::{fit, ScatteredSamples};
use crate::cells::DominantGroup;
use crate::flow::FlowMap;
use crate::geom::Vec2;
use crate::rkf45;
use crate::sampling::FlowVector;

pub const ADVECTION_TOL: f64 = 1e-4;

/// One injected particle: its origin, per-mini-batch path, birth step and
/// liveness. Particles that leave the frame freeze and are marked dead.
#[derive(Debug, Clone)]
pub struct Particle {
    pub origin: Vec2,
    pub positions: Vec<Vec2>,
    pub birth: usize,
    pub alive: bool,
}

impl Particle {
    pub fn current(&self) -> Vec2 {
        *self.positions.last().unwrap()
    }
}

/// All particles injected at one origin over the memory window; the
/// streakline connects their current positions, newest first.
#[derive(Debug, Clone)]
pub struct Streakline {
    pub origin: Vec2,
    pub points: Vec<Vec2>,
}

/// Dense streak flow with a degeneracy flag (too few samples).
#[derive(Debug, Clone)]
pub struct StreakFlow {
    pub flow: FlowMap,
    pub degenerate: bool,
}

/// A grid of particle origins advected one mini-batch at a time.
#[derive(Debug, Clone)]
pub struct ParticleField {
    width: usize,
    height: usize,
    memory: usize,
    step: usize,
    /// Per origin, particles ordered oldest first.
    lines: Vec<(Vec2, Vec<Particle>)>,
}

impl ParticleField {
    /// Injects the first particle generation at every `stride`-th pixel.
    pub fn new(width: usize, height: usize, stride: usize, memory: usize) -> ParticleField {
        assert!(stride >= 1 && memory >= 1);
        let mut lines = Vec::new();
        let mut y = 0;
        while y < height {
            let mut x = 0;
            while x < width {
                let origin = Vec2::new(x as f64, y as f64);
                lines.push((
                    origin,
                    vec![Particle {
                        origin,
                        positions: vec![origin],
                        birth: 0,
                        alive: true,
                    }],
                ));
                x += stride;
            }
            y += stride;
        }
        ParticleField {
            width,
            height,
            memory,
            step: 0,
            lines,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Advances every live particle one mini-batch step through the
    /// stationary averaged field (RKF45, unit time), then injects a fresh
    /// particle at each origin. Per-origin history is capped at `memory`
    /// particles.
    pub fn advect(&mut self, avg_flow: &FlowMap) {
        assert_eq!(avg_flow.width(), self.width);
        assert_eq!(avg_flow.height(), self.height);
        self.step += 1;
        let field = |p: Vec2| avg_flow.sample(p.x, p.y);
        for (origin, particles) in &mut self.lines {
            for particle in particles.iter_mut() {
                if !particle.alive {
                    continue;
                }
                let next = rkf45::integrate(particle.current(), 1.0, ADVECTION_TOL, &field);
                if avg_flow.contains(next.x, next.y) {
                    particle.positions.push(next);
                } else {
                    // frozen at the last in-frame position
                    particle.alive = false;
                }
            }
            particles.push(Particle {
                origin: *origin,
                positions: vec![*origin],
                birth: self.step,
                alive: true,
            });
            if particles.len() > self.memory {
                let cut = particles.len() - self.memory;
                particles.drain(..cut);
            }
        }
    }

    /// One streakline per origin with at least two live particles, points
    /// ordered by injection recency (newest first).
    pub fn streaklines(&self) -> Vec<Streakline> {
        self.lines
            .iter()
            .filter_map(|(origin, particles)| {
                let points: Vec<Vec2> = particles
                    .iter()
                    .rev()
                    .filter(|p| p.alive)
                    .map(|p| p.current())
                    .collect();
                (points.len() >= 2).then_some(Streakline {
                    origin: *origin,
                    points,
                })
            })
            .collect()
    }
}

/// Scattered (position, per-step displacement) samples read off consecutive
/// streakline points.
fn streak_samples(streaklines: &[Streakline]) -> Vec<(Vec2, Vec2)> {
    let mut samples = Vec::new();
    for line in streaklines {
        for pair in line.points.windows(2) {
            let from = pair[0];
            let disp = pair[1] - pair[0];
            samples.push((from, disp));
        }
    }
    samples
}

fn fit_component_maps(
    samples: &[(Vec2, Vec2)],
    width: usize,
    height: usize,
    levels: usize,
) -> StreakFlow {
    if samples.len() < 4 {
        return StreakFlow {
            flow: FlowMap::zeros(width, height),
            degenerate: true,
        };
    }
    let (wf, hf) = (width as f64, height as f64);
    let clamp = |p: Vec2| (p.x.clamp(0.0, wf), p.y.clamp(0.0, hf));
    let us: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|&(p, d)| {
            let (x, y) = clamp(p);
            (x, y, d.x)
        })
        .collect();
    let vs: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|&(p, d)| {
            let (x, y) = clamp(p);
            (x, y, d.y)
        })
        .collect();
    let su = fit(&ScatteredSamples::new(us, wf, hf).unwrap(), levels);
    let sv = fit(&ScatteredSamples::new(vs, wf, hf).unwrap(), levels);
    let mut flow = FlowMap::zeros(width, height);
    for y in 0..height {
        for x in 0..width {
            let u = su.eval(x as f64, y as f64).unwrap_or(0.0);
            let v = sv.eval(x as f64, y as f64).unwrap_or(0.0);
            flow.set(x, y, u as f32, v as f32);
        }
    }
    StreakFlow {
        flow,
        degenerate: false,
    }
}

/// Dense streak flow from streakline displacement samples.
pub fn streak_flow(
    streaklines: &[Streakline],
    width: usize,
    height: usize,
    levels: usize,
) -> StreakFlow {
    fit_component_maps(&streak_samples(streaklines), width, height, levels)
}

/// Which fine-to-coarse level feeds the sparse interpolation.
#[derive(Debug, Clone, Copy)]
pub enum RepresentationLevel<'a> {
    Vectors(&'a [FlowVector]),
    Groups(&'a [DominantGroup]),
    Representatives(&'a [DominantGroup]),
}

impl<'a> RepresentationLevel<'a> {
    pub fn samples(&self) -> Vec<(Vec2, Vec2)> {
        match self {
            RepresentationLevel::Vectors(vs) => vs
                .iter()
                .map(|f| (Vec2::new(f.x, f.y), Vec2::new(f.u, f.v)))
                .collect(),
            RepresentationLevel::Groups(gs) | RepresentationLevel::Representatives(gs) => gs
                .iter()
                .map(|g| {
                    let disp = Vec2::new(g.theta.cos(), g.theta.sin()) * g.mean_magnitude;
                    (Vec2::new(g.x, g.y), disp)
                })
                .collect(),
        }
    }
}

/// Interpolated flow map from a fine-to-coarse representation level.
pub fn interpolate_sparse(
    level: RepresentationLevel,
    width: usize,
    height: usize,
    levels: usize,
) -> StreakFlow {
    fit_component_maps(&level.samples(), width, height, levels)
}
