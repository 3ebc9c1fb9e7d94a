//! 68-point facial landmark sets in a 350x350 pixel frame.
//!
//! Point indices follow the standard 68-point layout used by common
//! pretrained detectors: jaw 0-16, right brow 17-21, left brow 22-26,
//! nose 27-35, right eye 36-41, left eye 42-47, mouth 48-67.

use std::ops::Range;

use thiserror::Error;

use crate::scalar::Scalar;

/// Number of points in a landmark set.
pub const LANDMARK_COUNT: usize = 68;

/// Edge length of the pixel frame landmark coordinates live in.
pub const FRAME_SIZE: usize = 350;

/// Index ranges of the face parts within the 68-point layout.
pub mod parts {
    use std::ops::Range;

    pub const JAW: Range<usize> = 0..17;
    pub const RIGHT_BROW: Range<usize> = 17..22;
    pub const LEFT_BROW: Range<usize> = 22..27;
    pub const NOSE: Range<usize> = 27..36;
    pub const RIGHT_EYE: Range<usize> = 36..42;
    pub const LEFT_EYE: Range<usize> = 42..48;
    pub const MOUTH: Range<usize> = 48..68;
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LandmarkError {
    #[error("expected {LANDMARK_COUNT} landmark points, got {0}")]
    WrongPointCount(usize),
    #[error("landmark coordinate at point {0} is not finite")]
    NonFiniteCoordinate(usize),
}

/// A 2D point in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }
}

/// Exactly 68 ordered landmark points. Coordinates are finite reals;
/// values outside the frame are legal (rasterization clamps them).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet<T> {
    points: Vec<Point<T>>,
}

impl<T: Scalar> LandmarkSet<T> {
    pub fn new(points: Vec<Point<T>>) -> Result<Self, LandmarkError> {
        if points.len() != LANDMARK_COUNT {
            return Err(LandmarkError::WrongPointCount(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(LandmarkError::NonFiniteCoordinate(i));
            }
        }
        Ok(LandmarkSet { points })
    }

    /// Builds a set from 136 interleaved coordinates `[x0, y0, x1, y1, ..]`.
    pub fn from_flat(coords: &[T]) -> Result<Self, LandmarkError> {
        if coords.len() != 2 * LANDMARK_COUNT {
            return Err(LandmarkError::WrongPointCount(coords.len() / 2));
        }
        let points = coords
            .chunks_exact(2)
            .map(|c| Point::new(c[0], c[1]))
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    /// The points of one face part, by layout index range.
    pub fn part(&self, range: Range<usize>) -> &[Point<T>] {
        &self.points[range]
    }

    /// Interleaved coordinates `[x0, y0, x1, y1, ..]`, length 136.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(2 * LANDMARK_COUNT);
        for p in &self.points {
            out.push(p.x);
            out.push(p.y);
        }
        out
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| Point::new(p.x + dx, p.y + dy))
            .collect();
        LandmarkSet { points }
    }

    /// Converts the coordinate precision through `f64`.
    pub fn cast<U: Scalar>(&self) -> LandmarkSet<U> {
        let points = self
            .points
            .iter()
            .map(|p| Point::new(U::from_f64(p.x.to_f64()), U::from_f64(p.y.to_f64())))
            .collect();
        LandmarkSet { points }
    }
}
