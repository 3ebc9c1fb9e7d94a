//! Seeded synthetic face generator with two separable expressions.
//!
//! Both prototypes share every landmark outside the mouth; the happiness
//! variant raises the mouth corners and lowers the mid-lip. The geometry
//! offsets are large relative to the default jitter so a simple threshold on
//! mouth-corner height separates the classes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::landmarks::{LandmarkSet, Point, FRAME_SIZE, LANDMARK_COUNT};
use crate::scalar::Scalar;

use super::{DatasetRecord, LabeledDataset};

/// Mouth-corner indices raised in the happiness prototype.
pub const RAISED_MOUTH_CORNERS: [usize; 2] = [48, 54];
/// Mid-lip indices lowered in the happiness prototype.
pub const LOWERED_MID_LIP: [usize; 4] = [51, 57, 62, 66];
/// Pixels the mouth corners move up (toward smaller y).
pub const CORNER_LIFT: f64 = 12.0;
/// Pixels the mid-lip points move down (toward larger y).
pub const MID_LIP_DROP: f64 = 6.0;

/// Parameters for [`synth_generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Records generated per class.
    pub per_class: usize,
    /// Seed for the jitter stream.
    pub seed: u64,
    /// Standard deviation of the per-coordinate Gaussian jitter, in pixels.
    /// Must be finite and nonnegative; zero reproduces the prototypes exactly.
    pub jitter_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            per_class: 200,
            seed: 0,
            jitter_sigma: 2.0,
        }
    }
}

/// The resting face: a fixed 68-point layout centered in the frame.
pub fn neutral_prototype() -> [Point<f64>; LANDMARK_COUNT] {
    use std::f64::consts::PI;
    let mut pts = Vec::with_capacity(LANDMARK_COUNT);
    // Jaw: an arc from ear height down through the chin and back up.
    for i in 0..17 {
        let t = i as f64 / 16.0;
        pts.push(Point {
            x: 95.0 + 160.0 * t,
            y: 130.0 + 130.0 * (PI * t).sin(),
        });
    }
    // Brows: gentle five-point arches above each eye.
    for k in 0..5 {
        pts.push(Point {
            x: 120.0 + 10.0 * k as f64,
            y: 108.0 - 4.0 * (PI * k as f64 / 4.0).sin(),
        });
    }
    for k in 0..5 {
        pts.push(Point {
            x: 190.0 + 10.0 * k as f64,
            y: 108.0 - 4.0 * (PI * k as f64 / 4.0).sin(),
        });
    }
    const NOSE: [(f64, f64); 9] = [
        (175.0, 130.0),
        (175.0, 145.0),
        (175.0, 160.0),
        (175.0, 172.0),
        (159.0, 185.0),
        (167.0, 188.0),
        (175.0, 190.0),
        (183.0, 188.0),
        (191.0, 185.0),
    ];
    const RIGHT_EYE: [(f64, f64); 6] = [
        (128.0, 130.0),
        (136.0, 124.0),
        (146.0, 124.0),
        (152.0, 130.0),
        (146.0, 136.0),
        (136.0, 136.0),
    ];
    const LEFT_EYE: [(f64, f64); 6] = [
        (198.0, 130.0),
        (206.0, 124.0),
        (216.0, 124.0),
        (222.0, 130.0),
        (216.0, 136.0),
        (206.0, 136.0),
    ];
    const MOUTH: [(f64, f64); 20] = [
        (139.0, 215.0),
        (151.0, 207.0),
        (163.0, 203.0),
        (175.0, 201.0),
        (187.0, 203.0),
        (199.0, 207.0),
        (211.0, 215.0),
        (199.0, 223.0),
        (187.0, 227.0),
        (175.0, 229.0),
        (163.0, 227.0),
        (151.0, 223.0),
        (147.0, 215.0),
        (163.0, 211.0),
        (175.0, 210.0),
        (187.0, 211.0),
        (203.0, 215.0),
        (187.0, 219.0),
        (175.0, 220.0),
        (163.0, 219.0),
    ];
    for (x, y) in NOSE.iter().chain(&RIGHT_EYE).chain(&LEFT_EYE).chain(&MOUTH) {
        pts.push(Point { x: *x, y: *y });
    }
    pts.try_into().expect("prototype has 68 points")
}

/// The smiling face: the neutral layout with corners lifted and mid-lip
/// dropped. The two moves cancel over the mouth, so its centroid is shared
/// with the neutral prototype.
pub fn happiness_prototype() -> [Point<f64>; LANDMARK_COUNT] {
    let mut pts = neutral_prototype();
    for &i in &RAISED_MOUTH_CORNERS {
        pts[i].y -= CORNER_LIFT;
    }
    for &i in &LOWERED_MID_LIP {
        pts[i].y += MID_LIP_DROP;
    }
    pts
}

/// Generates `per_class` happiness records followed by `per_class` neutral
/// records, each a prototype with seeded Gaussian jitter on every coordinate,
/// clamped to the frame.
pub fn synth_generate<T: Scalar>(config: &SynthConfig) -> LabeledDataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prototypes = [
        ("happiness", happiness_prototype()),
        ("neutral", neutral_prototype()),
    ];
    let mut records = Vec::with_capacity(config.per_class * 2);
    for (label, proto) in &prototypes {
        for i in 0..config.per_class {
            let points = jittered(proto, config.jitter_sigma, &mut rng);
            records.push(DatasetRecord {
                image_id: format!("synth-{label}-{i:04}"),
                label: (*label).to_string(),
                submitter: "synthetic".to_string(),
                landmarks: LandmarkSet::new(points).expect("jittered prototype is valid"),
            });
        }
    }
    LabeledDataset::new(records)
}

fn jittered<T: Scalar>(
    proto: &[Point<f64>; LANDMARK_COUNT],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Point<T>> {
    let noise = (sigma > 0.0)
        .then(|| Normal::new(0.0, sigma).expect("jitter sigma must be finite and nonnegative"));
    proto
        .iter()
        .map(|p| {
            let (dx, dy) = match &noise {
                Some(n) => (n.sample(rng), n.sample(rng)),
                None => (0.0, 0.0),
            };
            Point {
                x: T::from_f64(clamp_coord(p.x + dx)),
                y: T::from_f64(clamp_coord(p.y + dy)),
            }
        })
        .collect()
}

fn clamp_coord(v: f64) -> f64 {
    v.clamp(0.0, FRAME_SIZE as f64)
}
