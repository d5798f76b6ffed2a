//! Dense flow maps: the Middlebury `.flo` file format, synthetic analytic
//! fields for testing, and per-mini-batch averaging.

use byteorder::{ByteOrder, LittleEndian};
use thiserror::Error;

use crate::geom::Vec2;

/// Sentinel float at the head of every `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("bad magic: expected {FLO_MAGIC}, found {0}")]
    BadMagic(f32),
    #[error("truncated flow file: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing bytes after flow payload: {0} extra")]
    TrailingData(usize),
    #[error("bad dimensions {width}x{height}")]
    BadDimensions { width: i32, height: i32 },
    #[error("non-finite value at pixel ({x},{y})")]
    NonFinite { x: usize, y: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("empty input sequence")]
    EmptyInput,
}

/// What to do with NaN/Inf values found while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonFinitePolicy {
    /// Replace with zero (real flow files mark unknowns with large sentinels).
    #[default]
    ReplaceZero,
    /// Reject the file.
    Reject,
}

/// Dense per-pixel 2-D velocity field for one frame or one averaged
/// mini-batch. Components are stored row-major, one value per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowMap {
    pub fn zeros(width: usize, height: usize) -> FlowMap {
        assert!(width >= 1 && height >= 1, "flow map must be at least 1x1");
        FlowMap {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    /// Builds a map from raw components. All values must be finite.
    pub fn from_components(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> FlowMap {
        assert!(width >= 1 && height >= 1, "flow map must be at least 1x1");
        assert_eq!(u.len(), width * height);
        assert_eq!(v.len(), width * height);
        debug_assert!(u.iter().chain(v.iter()).all(|x| x.is_finite()));
        FlowMap {
            width,
            height,
            u,
            v,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, u: f32, v: f32) {
        let i = y * self.width + x;
        self.u[i] = u;
        self.v[i] = v;
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    /// Flow magnitude at an integer pixel.
    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        let (u, v) = self.at(x, y);
        (u as f64).hypot(v as f64)
    }

    /// Bilinear sample at a sub-pixel position, clamped to the border.
    pub fn sample(&self, x: f64, y: f64) -> Vec2 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let lerp = |a: f32, b: f32, t: f64| a as f64 * (1.0 - t) + b as f64 * t;
        let (u00, v00) = self.at(x0, y0);
        let (u10, v10) = self.at(x1, y0);
        let (u01, v01) = self.at(x0, y1);
        let (u11, v11) = self.at(x1, y1);
        let u = lerp(u00, u10, fx) * (1.0 - fy) + lerp(u01, u11, fx) * fy;
        let v = lerp(v00, v10, fx) * (1.0 - fy) + lerp(v01, v11, fx) * fy;
        Vec2::new(u, v)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }
}

/// Parses a Middlebury-style `.flo` byte buffer.
///
/// Layout: float32 sentinel 202021.25, int32 width, int32 height, then
/// row-major interleaved float32 (u, v) pairs, all little-endian.
pub fn parse_flo(bytes: &[u8], policy: NonFinitePolicy) -> Result<FlowMap, FlowError> {
    if bytes.len() < 12 {
        return Err(FlowError::Truncated {
            expected: 12,
            actual: bytes.len(),
        });
    }
    let magic = LittleEndian::read_f32(&bytes[0..4]);
    if magic != FLO_MAGIC {
        return Err(FlowError::BadMagic(magic));
    }
    let width = LittleEndian::read_i32(&bytes[4..8]);
    let height = LittleEndian::read_i32(&bytes[8..12]);
    if width < 1 || height < 1 {
        return Err(FlowError::BadDimensions { width, height });
    }
    let (w, h) = (width as usize, height as usize);
    let expected = 12 + w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .ok_or(FlowError::BadDimensions { width, height })?;
    if bytes.len() < expected {
        return Err(FlowError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FlowError::TrailingData(bytes.len() - expected));
    }
    let mut u = vec![0.0f32; w * h];
    let mut v = vec![0.0f32; w * h];
    for i in 0..w * h {
        let off = 12 + i * 8;
        let mut ui = LittleEndian::read_f32(&bytes[off..off + 4]);
        let mut vi = LittleEndian::read_f32(&bytes[off + 4..off + 8]);
        if !ui.is_finite() || !vi.is_finite() {
            match policy {
                NonFinitePolicy::ReplaceZero => {
                    if !ui.is_finite() {
                        ui = 0.0;
                    }
                    if !vi.is_finite() {
                        vi = 0.0;
                    }
                }
                NonFinitePolicy::Reject => {
                    return Err(FlowError::NonFinite {
                        x: i % w,
                        y: i / w,
                    });
                }
            }
        }
        u[i] = ui;
        v[i] = vi;
    }
    Ok(FlowMap {
        width: w,
        height: h,
        u,
        v,
    })
}

/// Serialises a flow map into `.flo` bytes. `parse_flo(write_flo(m)) == m`
/// bit-exactly for finite inputs.
pub fn write_flo(map: &FlowMap) -> Vec<u8> {
    let mut out = vec![0u8; 12 + map.width * map.height * 8];
    LittleEndian::write_f32(&mut out[0..4], FLO_MAGIC);
    LittleEndian::write_i32(&mut out[4..8], map.width as i32);
    LittleEndian::write_i32(&mut out[8..12], map.height as i32);
    for i in 0..map.width * map.height {
        let off = 12 + i * 8;
        LittleEndian::write_f32(&mut out[off..off + 4], map.u[i]);
        LittleEndian::write_f32(&mut out[off + 4..off + 8], map.v[i]);
    }
    out
}

/// Analytic field kinds used as deterministic test inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    /// Every pixel carries (a, b).
    Uniform { a: f64, b: f64 },
    /// Rigid rotation about (cx, cy): (-omega*(y-cy), omega*(x-cx)).
    Vortex { cx: f64, cy: f64, omega: f64 },
    /// Hyperbolic point at (cx, cy): ((x-cx), -(y-cy)).
    Saddle { cx: f64, cy: f64 },
    /// Top half (speed, 0), bottom half (-speed, 0), separated by a
    /// zero-flow band of the given height centred vertically.
    TwoLane { gap: f64, speed: f64 },
}

pub fn synth_field(kind: FieldKind, width: usize, height: usize) -> FlowMap {
    let mut map = FlowMap::zeros(width, height);
    for y in 0..height {
        for x in 0..width {
            let (u, v) = match kind {
                FieldKind::Uniform { a, b } => (a, b),
                FieldKind::Vortex { cx, cy, omega } => {
                    (-omega * (y as f64 - cy), omega * (x as f64 - cx))
                }
                FieldKind::Saddle { cx, cy } => (x as f64 - cx, -(y as f64 - cy)),
                FieldKind::TwoLane { gap, speed } => {
                    let mid = height as f64 / 2.0;
                    let yf = y as f64;
                    if yf < mid - gap / 2.0 {
                        (speed, 0.0)
                    } else if yf >= mid + gap / 2.0 {
                        (-speed, 0.0)
                    } else {
                        (0.0, 0.0)
                    }
                }
            };
            map.set(x, y, u as f32, v as f32);
        }
    }
    map
}

/// Per-pixel arithmetic mean of a sequence of same-sized maps.
pub fn average_flow(maps: &[FlowMap]) -> Result<FlowMap, FlowError> {
    let first = maps.first().ok_or(FlowError::EmptyInput)?;
    let (w, h) = (first.width, first.height);
    for m in maps {
        if m.width != w || m.height != h {
            return Err(FlowError::DimensionMismatch(w, h, m.width, m.height));
        }
    }
    let n = maps.len() as f64;
    let mut u = vec![0.0f32; w * h];
    let mut v = vec![0.0f32; w * h];
    for i in 0..w * h {
        let su: f64 = maps.iter().map(|m| m.u[i] as f64).sum();
        let sv: f64 = maps.iter().map(|m| m.v[i] as f64).sum();
        u[i] = (su / n) as f32;
        v[i] = (sv / n) as f32;
    }
    Ok(FlowMap {
        width: w,
        height: h,
        u,
        v,
    })
}

/// Spatiotemporal video volume layout: frame size, cell size, mini-batch
/// length and memory-window size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VideoVolumeConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub cell_w: usize,
    pub cell_h: usize,
    pub minibatch: usize,
    pub memory_cell: usize,
}

impl VideoVolumeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.cell_w == 0 || self.cell_w > self.width {
            return Err(format!("cell_w {} out of range 1..={}", self.cell_w, self.width));
        }
        if self.cell_h == 0 || self.cell_h > self.height {
            return Err(format!("cell_h {} out of range 1..={}", self.cell_h, self.height));
        }
        if self.minibatch == 0 || self.minibatch > self.frames {
            return Err(format!(
                "minibatch {} out of range 1..={}",
                self.minibatch, self.frames
            ));
        }
        if self.memory_cell == 0 {
            return Err("memory_cell must be >= 1".into());
        }
        Ok(())
    }

    /// Number of cell columns; remainder pixels on the right belong to the
    /// last column.
    pub fn grid_cols(&self) -> usize {
        (self.width / self.cell_w).max(1)
    }

    pub fn grid_rows(&self) -> usize {
        (self.height / self.cell_h).max(1)
    }

    /// Cell indices for a position; half-open cell boundaries, remainder
    /// pixels fold into the last row/column.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let col = ((x / self.cell_w as f64) as usize).min(self.grid_cols() - 1);
        let row = ((y / self.cell_h as f64) as usize).min(self.grid_rows() - 1);
        (col, row)
    }
}
