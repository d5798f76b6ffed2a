//! Trajectory types and their JSON/CSV interchange formats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trajectory {0} has fewer than 2 points")]
    TooShort(usize),
}

/// A long-range trajectory: ordered points with per-point descriptor
/// (cosine of the streak-flow angle) and velocity, spanning a range of
/// memory windows.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub window_start: usize,
    pub window_end: usize,
    pub points: Vec<Vec2>,
    /// Per-point cosine of the streak-flow angle.
    pub descriptors: Vec<f64>,
    /// Per-point velocity in px/step.
    pub velocities: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Serialises trajectories as a JSON array (the pipeline's output format).
pub fn to_json(trajectories: &[Trajectory]) -> String {
    serde_json::to_string_pretty(trajectories).expect("trajectory serialisation cannot fail")
}

pub fn from_json(text: &str) -> Result<Vec<Trajectory>, TrajectoryError> {
    Ok(serde_json::from_str(text)?)
}

/// Annotated trajectories arrive either as the JSON schema above, as a bare
/// JSON array of point lists `[[ [x,y], ... ], ...]`, or as CSV rows
/// `id,x,y` grouped by id in file order.
pub fn parse_annotated_json(text: &str) -> Result<Vec<Trajectory>, TrajectoryError> {
    if let Ok(full) = serde_json::from_str::<Vec<Trajectory>>(text) {
        return Ok(full);
    }
    let bare: Vec<Vec<(f64, f64)>> = serde_json::from_str(text)?;
    Ok(bare
        .into_iter()
        .enumerate()
        .map(|(id, pts)| from_points(id, pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect()))
        .collect())
}

pub fn parse_annotated_csv(text: &str) -> Result<Vec<Trajectory>, TrajectoryError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut order: Vec<usize> = Vec::new();
    let mut by_id: std::collections::BTreeMap<usize, Vec<Vec2>> = Default::default();
    for record in reader.deserialize::<(usize, f64, f64)>() {
        let (id, x, y) = record?;
        if !by_id.contains_key(&id) {
            order.push(id);
        }
        by_id.entry(id).or_default().push(Vec2::new(x, y));
    }
    Ok(order
        .into_iter()
        .map(|id| from_points(id, by_id.remove(&id).unwrap()))
        .collect())
}

/// A plain point-list trajectory with zeroed descriptors and unit spacing
/// velocities, used for annotations.
pub fn from_points(id: usize, points: Vec<Vec2>) -> Trajectory {
    let n = points.len();
    let velocities = if n >= 2 {
        let mut v: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        v.push(*v.last().unwrap());
        v
    } else {
        vec![0.0; n]
    };
    Trajectory {
        id,
        window_start: 0,
        window_end: 0,
        points,
        descriptors: vec![0.0; n],
        velocities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let t = vec![Trajectory {
            id: 3,
            window_start: 0,
            window_end: 2,
            points: vec![Vec2::new(0.0, 0.0), Vec2::new(1.5, 2.0)],
            descriptors: vec![1.0, 0.5],
            velocities: vec![2.5, 2.5],
        }];
        let text = to_json(&t);
        let back = from_json(&text).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn bare_point_lists_accepted() {
        let text = "[[[0.0, 0.0], [5.0, 0.0], [10.0, 0.0]], [[1.0, 1.0], [1.0, 2.0]]]";
        let ts = parse_annotated_json(text).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].len(), 3);
        assert_eq!(ts[0].velocities, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn csv_groups_by_id() {
        let text = "id,x,y\n0,0.0,0.0\n0,1.0,0.0\n1,5.0,5.0\n1,5.0,6.0\n0,2.0,0.0\n";
        let ts = parse_annotated_csv(text).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].len(), 3);
        assert_eq!(ts[1].points[0], Vec2::new(5.0, 5.0));
    }

    #[test]
    fn malformed_inputs_error() {
        assert!(parse_annotated_json("not json").is_err());
        assert!(parse_annotated_csv("id,x,y\n0,a,b\n").is_err());
    }
}
