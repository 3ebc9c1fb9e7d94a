//! Transforms from a landmark set to the three classifier inputs.
//!
//! * [`absolute_features`] — the 136 raw coordinates scaled into `[0, 1]`.
//! * [`modified_features`] — 114 values built from part centroids, offsets
//!   relative to those centroids (eyebrows anchored to their eye), and the
//!   face-outline bounding box.
//! * [`rasterize`] — a binary occupancy grid for the convolutional net,
//!   plus [`hflip`] for augmentation.
//!
//! All transforms are pure; every emitted value is scaled by the frame
//! size after the geometric computation.

use thiserror::Error;

use crate::landmarks::{parts, LandmarkSet, Point, FRAME_SIZE};
use crate::scalar::Scalar;

/// Length of the absolute representation: x and y for all 68 points.
pub const ABSOLUTE_LEN: usize = 136;

/// Length of the modified representation: outline box (4), mouth (2+40),
/// nose (2+18), right eye with brow (2+12+10), left eye with brow (2+12+10).
pub const MODIFIED_LEN: usize = 114;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("part center requires at least one point")]
    EmptyPart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Absolute,
    Modified,
}

impl FeatureKind {
    pub fn len(&self) -> usize {
        match self {
            FeatureKind::Absolute => ABSOLUTE_LEN,
            FeatureKind::Modified => MODIFIED_LEN,
        }
    }
}

/// An input vector for the dense networks.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub kind: FeatureKind,
    pub values: Vec<T>,
}

impl<T> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

/// All 136 coordinates divided by the frame size, point order preserved.
pub fn absolute_features<T: Scalar>(lm: &LandmarkSet<T>) -> FeatureVector<T> {
    let scale = T::from_usize(FRAME_SIZE);
    let values = lm.to_flat().into_iter().map(|v| v / scale).collect();
    FeatureVector {
        kind: FeatureKind::Absolute,
        values,
    }
}

/// Arithmetic mean of a nonempty point list.
pub fn part_center<T: Scalar>(points: &[Point<T>]) -> Result<Point<T>, FeatureError> {
    if points.is_empty() {
        return Err(FeatureError::EmptyPart);
    }
    let n = T::from_usize(points.len());
    let mut sx = T::zero();
    let mut sy = T::zero();
    for p in points {
        sx += p.x;
        sy += p.y;
    }
    Ok(Point::new(sx / n, sy / n))
}

/// The part-relative representation, 114 values in a fixed order:
/// outline center/width/height, then for each of mouth, nose, right eye,
/// left eye its centroid followed by point offsets from that centroid.
/// Eyebrow points are taken relative to the centroid of the matching eye.
/// The face outline is the jaw bounding box; its width, height, and
/// midpoint stand in for the jaw points themselves.
pub fn modified_features<T: Scalar>(lm: &LandmarkSet<T>) -> FeatureVector<T> {
    let scale = T::from_usize(FRAME_SIZE);
    let two = T::from_f64(2.0);
    let mut values = Vec::with_capacity(MODIFIED_LEN);

    let jaw = lm.part(parts::JAW);
    let mut min_x = jaw[0].x;
    let mut max_x = jaw[0].x;
    let mut min_y = jaw[0].y;
    let mut max_y = jaw[0].y;
    for p in jaw {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    values.push((min_x + max_x) / two / scale);
    values.push((min_y + max_y) / two / scale);
    values.push((max_x - min_x) / scale);
    values.push((max_y - min_y) / scale);

    let mut push_part = |anchor: Point<T>, points: &[Point<T>], with_anchor: bool| {
        if with_anchor {
            values.push(anchor.x / scale);
            values.push(anchor.y / scale);
        }
        for p in points {
            values.push((p.x - anchor.x) / scale);
            values.push((p.y - anchor.y) / scale);
        }
    };

    let mouth_center = part_center(lm.part(parts::MOUTH)).expect("mouth part is nonempty");
    push_part(mouth_center, lm.part(parts::MOUTH), true);

    let nose_center = part_center(lm.part(parts::NOSE)).expect("nose part is nonempty");
    push_part(nose_center, lm.part(parts::NOSE), true);

    let right_eye_center =
        part_center(lm.part(parts::RIGHT_EYE)).expect("right eye part is nonempty");
    push_part(right_eye_center, lm.part(parts::RIGHT_EYE), true);
    push_part(right_eye_center, lm.part(parts::RIGHT_BROW), false);

    let left_eye_center =
        part_center(lm.part(parts::LEFT_EYE)).expect("left eye part is nonempty");
    push_part(left_eye_center, lm.part(parts::LEFT_EYE), true);
    push_part(left_eye_center, lm.part(parts::LEFT_BROW), false);

    debug_assert_eq!(values.len(), MODIFIED_LEN);
    FeatureVector {
        kind: FeatureKind::Modified,
        values,
    }
}

/// Binary occupancy grid over `{0, 1}`; row index is y, column index is x.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkGrid {
    size: usize,
    cells: Vec<u8>,
}

impl LandmarkGrid {
    pub fn zeros(size: usize) -> Self {
        LandmarkGrid {
            size,
            cells: vec![0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.cells[row * self.size + col] = v;
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    /// Number of occupied cells.
    pub fn active_cells(&self) -> usize {
        self.cells.iter().filter(|&&c| c != 0).count()
    }
}

/// Projects each point into a `FRAME_SIZE` x `FRAME_SIZE` grid of zeros,
/// setting `cell[round(y)][round(x)] = 1`. Coincident points collapse.
pub fn rasterize<T: Scalar>(lm: &LandmarkSet<T>) -> LandmarkGrid {
    rasterize_sized(lm, FRAME_SIZE)
}

/// [`rasterize`] into an arbitrary grid size. Rounding is half-away-from-zero;
/// rounded indices are clamped to `[0, size - 1]`.
pub fn rasterize_sized<T: Scalar>(lm: &LandmarkSet<T>, size: usize) -> LandmarkGrid {
    assert!(size > 0, "grid size must be positive");
    let mut grid = LandmarkGrid::zeros(size);
    let hi = (size - 1) as f64;
    for p in lm.points() {
        let col = p.x.to_f64().round().clamp(0.0, hi) as usize;
        let row = p.y.to_f64().round().clamp(0.0, hi) as usize;
        grid.set(row, col, 1);
    }
    grid
}

/// Mirrors a grid left-to-right: `out[r][c] = in[r][size - 1 - c]`.
pub fn hflip(grid: &LandmarkGrid) -> LandmarkGrid {
    let size = grid.size();
    let mut out = LandmarkGrid::zeros(size);
    for r in 0..size {
        for c in 0..size {
            out.set(r, c, grid.get(r, size - 1 - c));
        }
    }
    out
}
