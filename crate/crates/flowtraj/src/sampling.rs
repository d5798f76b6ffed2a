//! Key-point sampling and flow-vector construction with median-kernel
//! smoothing, plus the dual magnitude threshold.

use crate::flow::FlowMap;
use crate::geom::wrap_angle;

/// A sampled motion vector: start position, displacement, magnitude, angle
/// against the positive x-axis in [0, 2pi), and frame index.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlowVector {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub magnitude: f64,
    pub angle: f64,
    pub frame: usize,
}

impl FlowVector {
    pub fn new(x: f64, y: f64, u: f64, v: f64, frame: usize) -> FlowVector {
        let magnitude = u.hypot(v);
        FlowVector {
            x,
            y,
            u,
            v,
            magnitude,
            angle: wrap_angle(v.atan2(u)),
            frame,
        }
    }
}

/// How start positions are picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingStrategy {
    /// Lattice points every `step` pixels.
    Grid { step: usize },
    /// Lattice points where flow magnitude is at least `min_mag`.
    MotionGrid { step: usize, min_mag: f64 },
}

pub fn sample_keypoints(flow: &FlowMap, strategy: SamplingStrategy) -> Vec<(usize, usize)> {
    let (step, min_mag, offset) = match strategy {
        SamplingStrategy::Grid { step } => (step.max(1), None, step.max(1) / 2),
        SamplingStrategy::MotionGrid { step, min_mag } => (step.max(1), Some(min_mag), 0),
    };
    let mut points = Vec::new();
    let mut y = offset;
    while y < flow.height() {
        let mut x = offset;
        while x < flow.width() {
            match min_mag {
                Some(m) if flow.magnitude(x, y) < m => {}
                _ => points.push((x, y)),
            }
            x += step;
        }
        y += step;
    }
    points
}

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// One flow vector per key point; the displacement is the component-wise
/// median of the flow over a K x K neighborhood clipped to frame bounds.
pub fn build_flow_vectors(
    points: &[(usize, usize)],
    flow: &FlowMap,
    kernel: usize,
    frame: usize,
) -> Vec<FlowVector> {
    assert!(kernel >= 1 && kernel % 2 == 1, "kernel must be odd");
    let half = kernel / 2;
    let mut us = Vec::with_capacity(kernel * kernel);
    let mut vs = Vec::with_capacity(kernel * kernel);
    points
        .iter()
        .map(|&(px, py)| {
            us.clear();
            vs.clear();
            let x0 = px.saturating_sub(half);
            let y0 = py.saturating_sub(half);
            let x1 = (px + half).min(flow.width() - 1);
            let y1 = (py + half).min(flow.height() - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (u, v) = flow.at(x, y);
                    us.push(u as f64);
                    vs.push(v as f64);
                }
            }
            let u = median_in_place(&mut us);
            let v = median_in_place(&mut vs);
            FlowVector::new(px as f64, py as f64, u, v, frame)
        })
        .collect()
}

/// Keeps vectors with lo <= magnitude <= hi.
pub fn dual_threshold(vectors: Vec<FlowVector>, lo: f64, hi: f64) -> Vec<FlowVector> {
    assert!(lo >= 0.0 && lo < hi, "need 0 <= lo < hi");
    vectors
        .into_iter()
        .filter(|f| f.magnitude >= lo && f.magnitude <= hi)
        .collect()
}

/// CSV dump: header then x,y,u,v,L,theta,t rows.
pub fn vectors_to_csv(vectors: &[FlowVector]) -> String {
    let mut out = String::from("x,y,u,v,L,theta,t\n");
    for f in vectors {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            f.x, f.y, f.u, f.v, f.magnitude, f.angle, f.frame
        ));
    }
    out
}

/// Parses the CSV format written by [`vectors_to_csv`].
pub fn vectors_from_csv(text: &str) -> Result<Vec<FlowVector>, csv::Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.deserialize::<(f64, f64, f64, f64, f64, f64, usize)>() {
        let (x, y, u, v, _mag, _theta, t) = record?;
        out.push(FlowVector::new(x, y, u, v, t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{synth_field, FieldKind};

    #[test]
    fn grid_count_on_8x8() {
        let m = synth_field(FieldKind::Uniform { a: 1.0, b: 0.0 }, 8, 8);
        let pts = sample_keypoints(&m, SamplingStrategy::Grid { step: 4 });
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn motion_grid_thresholds() {
        let zero = FlowMap::zeros(6, 6);
        let pts = sample_keypoints(
            &zero,
            SamplingStrategy::MotionGrid {
                step: 1,
                min_mag: 0.5,
            },
        );
        assert!(pts.is_empty());

        let m = synth_field(FieldKind::Uniform { a: 1.0, b: 0.0 }, 6, 6);
        let pts = sample_keypoints(
            &m,
            SamplingStrategy::MotionGrid {
                step: 1,
                min_mag: 0.5,
            },
        );
        assert_eq!(pts.len(), 36);
    }

    #[test]
    fn median_of_constant_field() {
        let m = synth_field(FieldKind::Uniform { a: 2.0, b: 1.0 }, 20, 20);
        let pts = sample_keypoints(&m, SamplingStrategy::Grid { step: 5 });
        let vecs = build_flow_vectors(&pts, &m, 13, 0);
        assert_eq!(vecs.len(), pts.len());
        for f in &vecs {
            assert!((f.u - 2.0).abs() < 1e-12 && (f.v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn median_rejects_single_outlier() {
        // Eight (1,0) neighbors and one (100,100) center; the 9-element
        // median must land on (1,0). Oracle: explicit sort of the nine
        // per-component values.
        let mut m = synth_field(FieldKind::Uniform { a: 1.0, b: 0.0 }, 3, 3);
        m.set(1, 1, 100.0, 100.0);
        let mut us: Vec<f64> = (0..9).map(|i| m.u()[i] as f64).collect();
        let mut vs: Vec<f64> = (0..9).map(|i| m.v()[i] as f64).collect();
        us.sort_by(f64::total_cmp);
        vs.sort_by(f64::total_cmp);
        assert_eq!((us[4], vs[4]), (1.0, 0.0));

        let vecs = build_flow_vectors(&[(1, 1)], &m, 3, 0);
        assert_eq!((vecs[0].u, vecs[0].v), (1.0, 0.0));
    }

    #[test]
    fn corner_kernel_clips() {
        let mut m = synth_field(FieldKind::Uniform { a: 1.0, b: 0.0 }, 8, 8);
        m.set(7, 7, 50.0, 0.0); // far corner, outside the clipped kernel
        let vecs = build_flow_vectors(&[(0, 0)], &m, 13, 3);
        // kernel clipped to [0,6]x[0,6]: all ones
        assert_eq!((vecs[0].u, vecs[0].v), (1.0, 0.0));
        assert_eq!(vecs[0].frame, 3);
    }

    #[test]
    fn dual_threshold_interval() {
        let mk = |mag: f64| FlowVector::new(0.0, 0.0, mag, 0.0, 0);
        let vecs = vec![mk(0.05), mk(1.0), mk(100.0)];
        let kept = dual_threshold(vecs, 0.1, 50.0);
        assert_eq!(kept.len(), 1);
        assert!((kept[0].magnitude - 1.0).abs() < 1e-12);

        let all = dual_threshold(vec![mk(0.0), mk(9.0)], 0.0, f64::INFINITY);
        assert_eq!(all.len(), 2);
        assert!(dual_threshold(Vec::new(), 0.1, 1.0).is_empty());
    }

    #[test]
    fn vector_invariants() {
        let f = FlowVector::new(1.0, 2.0, -3.0, 4.0, 7);
        assert!((f.magnitude - f.u.hypot(f.v)).abs() < 1e-9);
        assert!((0.0..std::f64::consts::TAU).contains(&f.angle));
    }

    #[test]
    fn csv_round_trip() {
        let vecs = vec![
            FlowVector::new(1.5, 2.0, 0.5, -0.25, 3),
            FlowVector::new(0.0, 0.0, -1.0, 1.0, 0),
        ];
        let csv = vectors_to_csv(&vecs);
        let back = vectors_from_csv(&csv).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[0].u - 0.5).abs() < 1e-6 && (back[0].v + 0.25).abs() < 1e-6);
        assert_eq!(back[0].frame, 3);
    }
}
