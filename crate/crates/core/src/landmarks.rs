//! The 45-point facial landmark scheme and cross-sensor landmark pairs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FaceRect, SensorId, SensorImage};

pub const NUM_LANDMARKS: usize = 45;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, o: &Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    LeftBrow,
    RightBrow,
    LeftEye,
    RightEye,
    Nose,
    Lips,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::LeftBrow,
        Region::RightBrow,
        Region::LeftEye,
        Region::RightEye,
        Region::Nose,
        Region::Lips,
    ];

    pub fn indices(self) -> std::ops::Range<usize> {
        match self {
            Region::LeftBrow => 0..5,
            Region::RightBrow => 5..10,
            Region::LeftEye => 10..17,
            Region::RightEye => 17..24,
            Region::Nose => 24..33,
            Region::Lips => 33..45,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::LeftBrow => "left_brow",
            Region::RightBrow => "right_brow",
            Region::LeftEye => "left_eye",
            Region::RightEye => "right_eye",
            Region::Nose => "nose",
            Region::Lips => "lips",
        }
    }
}

pub fn region_of(index: usize) -> Result<Region> {
    Region::ALL
        .into_iter()
        .find(|r| r.indices().contains(&index))
        .ok_or(Error::IndexOutOfRange(index))
}

/// Eye-center landmark of each eye, used for inter-ocular normalization.
pub const LEFT_PUPIL: usize = 16;
pub const RIGHT_PUPIL: usize = 23;

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub sensor: SensorId,
    points: Vec<Point2>,
    pub face_rect: FaceRect,
}

impl LandmarkSet {
    pub fn new(sensor: SensorId, points: Vec<Point2>, face_rect: FaceRect) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(Error::LandmarkCount {
                side: sensor.as_str(),
                expected: NUM_LANDMARKS,
                got: points.len(),
            });
        }
        if let Some(index) = points.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::NonFiniteLandmark {
                side: sensor.as_str(),
                index,
            });
        }
        Ok(Self {
            sensor,
            points,
            face_rect,
        })
    }

    /// Builds a set whose face rectangle is the bounding box of the points.
    pub fn with_bounding_rect(sensor: SensorId, points: Vec<Point2>) -> Result<Self> {
        let rect = bounding_rect(&points)?;
        Self::new(sensor, points, rect)
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Replaces the points, keeping the face rectangle.
    pub fn with_points(&self, points: Vec<Point2>) -> Result<Self> {
        Self::new(self.sensor, points, self.face_rect)
    }

    pub fn inter_ocular(&self) -> f64 {
        self.points[LEFT_PUPIL].dist(&self.points[RIGHT_PUPIL])
    }
}

pub fn bounding_rect(points: &[Point2]) -> Result<FaceRect> {
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    FaceRect::new(x0, y0, x1 - x0, y1 - y0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkPair {
    pub left: LandmarkSet,
    pub right: LandmarkSet,
}

impl LandmarkPair {
    pub fn new(left: LandmarkSet, right: LandmarkSet) -> Result<Self> {
        if left.sensor != SensorId::Left || right.sensor != SensorId::Right {
            return Err(Error::Config("landmark pair sides are swapped".into()));
        }
        Ok(Self { left, right })
    }
}

/// JSON layout of a landmark file.
#[derive(Debug, Serialize, Deserialize)]
struct LandmarkFile {
    left: Vec<Point2>,
    right: Vec<Point2>,
    left_rect: FaceRect,
    right_rect: FaceRect,
}

pub fn landmarks_from_json(text: &str, origin: &Path) -> Result<LandmarkPair> {
    let f: LandmarkFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: origin.to_path_buf(),
        source,
    })?;
    LandmarkPair::new(
        LandmarkSet::new(SensorId::Left, f.left, f.left_rect)?,
        LandmarkSet::new(SensorId::Right, f.right, f.right_rect)?,
    )
}

pub fn landmarks_to_json(pair: &LandmarkPair) -> String {
    let f = LandmarkFile {
        left: pair.left.points.clone(),
        right: pair.right.points.clone(),
        left_rect: pair.left.face_rect,
        right_rect: pair.right.face_rect,
    };
    serde_json::to_string_pretty(&f).expect("landmark file serializes")
}

pub fn load_landmarks(path: impl AsRef<Path>) -> Result<LandmarkPair> {
    let path = path.as_ref();
    landmarks_from_json(&fs::read_to_string(path)?, path)
}

pub fn save_landmarks(path: impl AsRef<Path>, pair: &LandmarkPair) -> Result<()> {
    fs::write(path, landmarks_to_json(pair))?;
    Ok(())
}

/// Stand-in for the face detector and landmark extractor.
pub trait LandmarkProvider {
    fn landmarks(&self, left: &SensorImage, right: &SensorImage) -> Result<LandmarkPair>;
}

/// Serves landmarks read from a file regardless of image content.
#[derive(Debug, Clone)]
pub struct FileLandmarks {
    pair: LandmarkPair,
}

impl FileLandmarks {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            pair: load_landmarks(path)?,
        })
    }
}

impl LandmarkProvider for FileLandmarks {
    fn landmarks(&self, _left: &SensorImage, _right: &SensorImage) -> Result<LandmarkPair> {
        Ok(self.pair.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points(offset: f64) -> Vec<Point2> {
        (0..NUM_LANDMARKS)
            .map(|i| Point2::new((i % 9) as f64 * 3.7 + offset, (i / 9) as f64 * 4.1 + 0.123))
            .collect()
    }

    #[test]
    fn region_layout() {
        assert_eq!(region_of(0).unwrap(), Region::LeftBrow);
        assert_eq!(region_of(24).unwrap(), Region::Nose);
        assert_eq!(region_of(44).unwrap(), Region::Lips);
        assert!(matches!(region_of(45), Err(Error::IndexOutOfRange(45))));
    }

    #[test]
    fn region_partition_is_total_and_disjoint() {
        let sizes: Vec<usize> = Region::ALL.iter().map(|r| r.indices().len()).collect();
        assert_eq!(sizes, vec![5, 5, 7, 7, 9, 12]);
        for i in 0..NUM_LANDMARKS {
            let hits = Region::ALL.iter().filter(|r| r.indices().contains(&i)).count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let pair = LandmarkPair::new(
            LandmarkSet::with_bounding_rect(SensorId::Left, grid_points(0.1)).unwrap(),
            LandmarkSet::with_bounding_rect(SensorId::Right, grid_points(1.0 / 3.0)).unwrap(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lm.json");
        save_landmarks(&path, &pair).unwrap();
        let back = load_landmarks(&path).unwrap();
        for (a, b) in back.right.points().iter().zip(pair.right.points()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        assert_eq!(back, pair);
    }

    #[test]
    fn short_side_is_a_count_error() {
        let mut short = grid_points(0.0);
        short.pop();
        let text = serde_json::json!({
            "left": grid_points(0.0),
            "right": short,
            "left_rect": {"x": 0.0, "y": 0.0, "w": 10.0, "h": 10.0},
            "right_rect": {"x": 0.0, "y": 0.0, "w": 10.0, "h": 10.0},
        })
        .to_string();
        let err = landmarks_from_json(&text, Path::new("x.json")).unwrap_err();
        assert!(
            matches!(err, Error::LandmarkCount { side: "right", got: 44, .. }),
            "{err}"
        );
    }

    #[test]
    fn nan_coordinates_rejected() {
        let mut pts = grid_points(0.0);
        pts[7].y = f64::NAN;
        let rect = FaceRect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            LandmarkSet::new(SensorId::Left, pts, rect),
            Err(Error::NonFiniteLandmark { index: 7, .. })
        ));
    }

    #[test]
    fn malformed_json_names_position() {
        let err = landmarks_from_json("{\"left\": [[1,2],", Path::new("bad.json")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json") && msg.contains("line 1"), "{msg}");
    }
}
