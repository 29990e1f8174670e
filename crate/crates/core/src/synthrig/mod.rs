//! Synthetic two-camera rig producing landmark pairs and sensor images for
//! live faces and presentation attacks with known geometry.
//!
//! World frame: x right, y down, z forward from the cameras. The left camera
//! sits at the origin and the right camera is offset by `-baseline` along x,
//! so a point at depth `Z` has horizontal disparity `+focal * baseline / Z`.

mod dataset;
mod render;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dataset::{
    allocate_counts, generate_dataset, load_manifest, sample_scene, synthesize, DatasetConfig,
    ManifestRow, Mix, SampleFiles, Split, SynthSample,
};
pub use render::{render_sensor, TextureParams};

use crate::error::{Error, Result};
use crate::ingest::{SensorId, SensorImage};
use crate::labels::SceneKind;
use crate::landmarks::{LandmarkPair, LandmarkSet, Point2, Region, NUM_LANDMARKS};

pub type Point3 = [f64; 3];

/// Index of the nose tip in the template.
pub const NOSE_TIP: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal: f64,
    pub principal_point: (f64, f64),
    pub position: Point3,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn project_point(&self, p: &Point3) -> Option<Point2> {
        let (x, y, z) = (
            p[0] - self.position[0],
            p[1] - self.position[1],
            p[2] - self.position[2],
        );
        (z > 0.0).then(|| {
            Point2::new(
                self.focal * x / z + self.principal_point.0,
                self.focal * y / z + self.principal_point.1,
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RigPreset {
    /// Identical intrinsics, pure horizontal translation.
    Rectified,
    /// Small vertical offset and focal mismatch; the pipeline never reads them.
    #[default]
    Uncalibrated,
}

impl std::str::FromStr for RigPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectified" => Ok(RigPreset::Rectified),
            "uncalibrated" | "default" => Ok(RigPreset::Uncalibrated),
            _ => Err(Error::Config(format!("unknown rig preset {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub left: CameraModel,
    pub right: CameraModel,
}

pub const DEFAULT_BASELINE_MM: f64 = 30.0;
pub const DEFAULT_FOCAL_PX: f64 = 600.0;

impl Rig {
    pub fn preset(p: RigPreset) -> Self {
        let base = CameraModel {
            focal: DEFAULT_FOCAL_PX,
            principal_point: (319.5, 239.5),
            position: [0.0, 0.0, 0.0],
            width: 640,
            height: 480,
        };
        let right = match p {
            RigPreset::Rectified => CameraModel {
                position: [-DEFAULT_BASELINE_MM, 0.0, 0.0],
                ..base
            },
            RigPreset::Uncalibrated => CameraModel {
                focal: DEFAULT_FOCAL_PX * 1.015,
                principal_point: (321.0, 238.0),
                position: [-DEFAULT_BASELINE_MM, 1.5, 0.0],
                ..base
            },
        };
        Rig { left: base, right }
    }

    /// Lateral midpoint between the two cameras.
    pub fn center_x(&self) -> f64 {
        (self.left.position[0] + self.right.position[0]) / 2.0
    }

    pub fn camera(&self, sensor: SensorId) -> &CameraModel {
        match sensor {
            SensorId::Left => &self.left,
            SensorId::Right => &self.right,
        }
    }
}

/// 45 head-frame landmark positions in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTemplate45 {
    pub points: Vec<Point3>,
}

#[derive(Deserialize)]
struct TemplateFile {
    version: u32,
    points: Vec<Point3>,
}

const TEMPLATE_V1: &str = include_str!("../../data/face_template_v1.json");

impl FaceTemplate45 {
    pub fn standard() -> Self {
        let f: TemplateFile = serde_json::from_str(TEMPLATE_V1).expect("bundled template parses");
        assert_eq!(f.version, 1);
        assert_eq!(f.points.len(), NUM_LANDMARKS);
        Self { points: f.points }
    }

    /// A distinct subject: per-axis proportions within ±8% and ±1 mm jitter.
    pub fn subject(rng: &mut impl Rng) -> Self {
        let base = Self::standard();
        let s = [
            rng.random_range(0.92..1.08),
            rng.random_range(0.92..1.08),
            rng.random_range(0.92..1.08),
        ];
        let points = base
            .points
            .iter()
            .map(|p| {
                [
                    p[0] * s[0] + rng.random_range(-1.0..1.0),
                    p[1] * s[1] + rng.random_range(-1.0..1.0),
                    p[2] * s[2] + rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        Self { points }
    }

    pub fn centroid(&self) -> Point3 {
        centroid(&self.points)
    }
}

fn centroid(pts: &[Point3]) -> Point3 {
    let n = pts.len() as f64;
    let mut c = [0.0; 3];
    for p in pts {
        for k in 0..3 {
            c[k] += p[k] / n;
        }
    }
    c
}

/// Head rotation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Pose {
    /// `Rz(roll) * Rx(pitch) * Ry(yaw)`.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let (sy, cy) = self.yaw.to_radians().sin_cos();
        let (sp, cp) = self.pitch.to_radians().sin_cos();
        let (sr, cr) = self.roll.to_radians().sin_cos();
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rx = [[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]];
        let rz = [[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]];
        matmul(&rz, &matmul(&rx, &ry))
    }
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

pub fn rotate(m: &[[f64; 3]; 3], p: &Point3) -> Point3 {
    [
        m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
        m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
        m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Depth of the face (or print) centroid, mm.
    pub distance: f64,
    /// Print size relative to a real face; ignored for live, latex and paper-on-face.
    pub scale: f64,
    pub pose: Pose,
    /// Lateral offset of the centroid from the rig center, mm.
    pub offset: (f64, f64),
    pub rig: Rig,
    pub seed: u64,
    pub cylinder_radius: f64,
    /// Std-dev of Gaussian noise added to each projected landmark, pixels.
    pub landmark_noise: f64,
}

impl SceneSpec {
    pub fn new(kind: SceneKind, distance: f64, rig: Rig, seed: u64) -> Self {
        Self {
            kind,
            distance,
            scale: 1.0,
            pose: Pose::default(),
            offset: (0.0, 0.0),
            rig,
            seed,
            cylinder_radius: 100.0,
            landmark_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(300.0..=2000.0).contains(&self.distance) {
            return Err(Error::Config(format!(
                "scene distance {} mm outside [300, 2000]",
                self.distance
            )));
        }
        let p = self.pose;
        if [p.yaw, p.pitch, p.roll].iter().any(|a| a.abs() > 40.0) {
            return Err(Error::Config(format!("pose {p:?} exceeds ±40°")));
        }
        if !(self.scale > 0.0) || !(self.cylinder_radius > 0.0) || self.landmark_noise < 0.0 {
            return Err(Error::Config("scale, radius and noise must be positive".into()));
        }
        Ok(())
    }
}

/// World-space landmark positions for the scene's geometry.
pub fn make_geometry(spec: &SceneSpec, template: &FaceTemplate45) -> Vec<Point3> {
    let rot = spec.pose.matrix();
    let origin = [spec.rig.center_x() + spec.offset.0, spec.offset.1, spec.distance];
    let place = |local: &[Point3]| -> Vec<Point3> {
        local
            .iter()
            .map(|p| {
                let r = rotate(&rot, p);
                [r[0] + origin[0], r[1] + origin[1], r[2] + origin[2]]
            })
            .collect()
    };
    let c = template.centroid();
    let centered: Vec<Point3> = template
        .points
        .iter()
        .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
        .collect();
    // Template flattened onto its z = 0 plane and scaled to the print size.
    let flat = |scale: f64| -> Vec<Point3> {
        let pts: Vec<Point3> = template
            .points
            .iter()
            .map(|p| [p[0] * scale, p[1] * scale, 0.0])
            .collect();
        let fc = centroid(&pts);
        pts.iter().map(|p| [p[0] - fc[0], p[1] - fc[1], 0.0]).collect()
    };
    match spec.kind {
        SceneKind::Live | SceneKind::LatexMask => place(&centered),
        SceneKind::Plane => place(&flat(spec.scale)),
        SceneKind::Cylinder => {
            let r = spec.cylinder_radius;
            let wrapped: Vec<Point3> = flat(spec.scale)
                .iter()
                .map(|p| {
                    let t = p[0] / r;
                    [r * t.sin(), p[1], r * (1.0 - t.cos())]
                })
                .collect();
            place(&wrapped)
        }
        SceneKind::PaperOnFace => {
            // Paper lies on the eye plane; the nose pokes through a cut-out.
            let nose = Region::Nose.indices();
            let pts: Vec<Point3> = template
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let z = if nose.contains(&i) { p[2] } else { 0.0 };
                    [p[0] - c[0], p[1] - c[1], z - c[2]]
                })
                .collect();
            place(&pts)
        }
    }
}

/// Pinhole projection; the face rectangle is the bounding box of the projections.
pub fn project(points: &[Point3], cam: &CameraModel, sensor: SensorId) -> Result<LandmarkSet> {
    let pts = points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            cam.project_point(p).ok_or(Error::BehindCamera {
                index,
                z: p[2] - cam.position[2],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LandmarkSet::with_bounding_rect(sensor, pts)
}

/// A fully rendered scene: images, landmarks and the ground-truth geometry.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub spec: SceneSpec,
    pub geometry: Vec<Point3>,
    /// Landmarks as the extractor would report them (including injected noise).
    pub landmarks: LandmarkPair,
    pub left: SensorImage,
    pub right: SensorImage,
}

/// Projects the scene into both cameras, adds landmark noise and renders both sensors.
pub fn render_scene(spec: &SceneSpec, template: &FaceTemplate45) -> Result<RenderedScene> {
    spec.validate()?;
    let geometry = make_geometry(spec, template);
    let landmarks = scene_landmarks(spec, &geometry)?;
    let left = render_sensor(&landmarks.left, spec, &spec.rig.left)?;
    let right = render_sensor(&landmarks.right, spec, &spec.rig.right)?;
    Ok(RenderedScene {
        spec: spec.clone(),
        geometry,
        landmarks,
        left,
        right,
    })
}

pub fn scene_landmarks(spec: &SceneSpec, geometry: &[Point3]) -> Result<LandmarkPair> {
    let mut sides = Vec::with_capacity(2);
    for sensor in [SensorId::Left, SensorId::Right] {
        let clean = project(geometry, spec.rig.camera(sensor), sensor)?;
        let set = if spec.landmark_noise > 0.0 {
            let mut rng = crate::rng::stream(spec.seed, crate::rng::mix(&[0x1a9d, sensor as u64]));
            let normal = rand_distr::Normal::new(0.0, spec.landmark_noise).expect("valid sigma");
            let pts: Vec<Point2> = clean
                .points()
                .iter()
                .map(|p| Point2::new(p.x + rng.sample(normal), p.y + rng.sample(normal)))
                .collect();
            LandmarkSet::new(sensor, pts, clean.face_rect)?
        } else {
            clean
        };
        sides.push(set);
    }
    let right = sides.pop().unwrap();
    let left = sides.pop().unwrap();
    LandmarkPair::new(left, right)
}
