use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{render_scene, FaceTemplate45, Pose, RenderedScene, Rig, RigPreset, SceneSpec};
use crate::augment::{augment_landmarks, sample_crop_options, AugmentConfig};
use crate::disparity::{build_sensor_crop, build_stack, SampleStack, StackOptions};
use crate::error::{Error, Result};
use crate::ingest::{SensorId, SensorImage};
use crate::labels::{Label, SceneKind};
use crate::landmarks::save_landmarks;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?}")))
    }
}

/// Scene-kind proportions, kept in `SceneKind` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Mix {
    weights: Vec<(SceneKind, f64)>,
}

impl Mix {
    pub fn new(mut weights: Vec<(SceneKind, f64)>) -> Result<Self> {
        weights.sort_by_key(|(k, _)| *k);
        if weights.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("scene kind listed twice in mix".into()));
        }
        if weights.iter().any(|(_, p)| !(*p >= 0.0)) {
            return Err(Error::Config("mix proportions must be non-negative".into()));
        }
        let total: f64 = weights.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("mix proportions sum to {total}, expected 1")));
        }
        weights.retain(|(_, p)| *p > 0.0);
        Ok(Self { weights })
    }

    pub fn only(kind: SceneKind) -> Self {
        Self {
            weights: vec![(kind, 1.0)],
        }
    }

    /// Equal weight over `kinds`.
    pub fn uniform(kinds: &[SceneKind]) -> Result<Self> {
        let p = 1.0 / kinds.len() as f64;
        Self::new(kinds.iter().map(|&k| (k, p)).collect())
    }

    pub fn weights(&self) -> &[(SceneKind, f64)] {
        &self.weights
    }
}

impl Default for Mix {
    /// Half live, the rest spread evenly over the four attack kinds.
    fn default() -> Self {
        Self::new(vec![
            (SceneKind::Live, 0.5),
            (SceneKind::Plane, 0.125),
            (SceneKind::Cylinder, 0.125),
            (SceneKind::PaperOnFace, 0.125),
            (SceneKind::LatexMask, 0.125),
        ])
        .expect("default mix is valid")
    }
}

/// Parses `live=0.5,plane=0.25,cylinder=0.25`.
impl FromStr for Mix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut weights = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once(['=', ':'])
                .ok_or_else(|| Error::Config(format!("mix entry {part:?} is not kind=proportion")))?;
            let kind: SceneKind = k.trim().parse()?;
            let p: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad proportion in mix entry {part:?}")))?;
            weights.push((kind, p));
        }
        Self::new(weights)
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|(k, p)| format!("{k}={p}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl TryFrom<String> for Mix {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Mix> for String {
    fn from(m: Mix) -> String {
        m.to_string()
    }
}

/// Splits `n` by `weights` (summing to 1): floors first, then the leftover
/// units go to the largest fractional parts, earlier entries winning ties.
pub fn allocate_counts(n: usize, weights: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n: usize,
    pub mix: Mix,
    pub seed: u64,
    pub rig: RigPreset,
    /// Apparent (face-equivalent) distance range, mm.
    pub distance_range: (f64, f64),
    pub max_pose_deg: f64,
    pub max_offset_mm: f64,
    /// Print size range for plane and cylinder attacks.
    pub scale_range: (f64, f64),
    pub cylinder_radius: f64,
    pub landmark_noise: f64,
    /// Train / val / test fractions.
    pub splits: (f64, f64, f64),
    /// Landmark and crop augmentation for training-split samples.
    pub augment: Option<AugmentConfig>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            mix: Mix::default(),
            seed: 0,
            rig: RigPreset::default(),
            distance_range: (300.0, 1200.0),
            max_pose_deg: 25.0,
            max_offset_mm: 30.0,
            scale_range: (0.5, 1.0),
            cylinder_radius: 100.0,
            landmark_noise: 0.0,
            splits: (0.7, 0.15, 0.15),
            augment: None,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let (d0, d1) = self.distance_range;
        let (s0, s1) = self.scale_range;
        let (a, b, c) = self.splits;
        if !(300.0 <= d0 && d0 <= d1 && d1 <= 2000.0) {
            return Err(Error::Config(format!("distance range {d0}..{d1} not within [300, 2000]")));
        }
        if !(0.0 < s0 && s0 <= s1) {
            return Err(Error::Config(format!("bad scale range {s0}..{s1}")));
        }
        if !(0.0..=40.0).contains(&self.max_pose_deg) || !(self.max_offset_mm >= 0.0) {
            return Err(Error::Config("pose must be within ±40° and offset non-negative".into()));
        }
        if [a, b, c].iter().any(|v| !(*v >= 0.0)) || ((a + b + c) - 1.0).abs() > 1e-6 {
            return Err(Error::Config("split fractions must be non-negative and sum to 1".into()));
        }
        if let Some(aug) = &self.augment {
            aug.validate()?;
        }
        Ok(())
    }

    /// Scene plan: kind and split for every scene index. Counts per kind are
    /// exact, and each kind is split with the same fractions.
    pub fn plan(&self) -> Vec<(SceneKind, Split)> {
        let kinds: Vec<SceneKind> = self.mix.weights().iter().map(|(k, _)| *k).collect();
        let probs: Vec<f64> = self.mix.weights().iter().map(|(_, p)| *p).collect();
        let mut plan = Vec::with_capacity(self.n);
        for (kind, count) in kinds.iter().zip(allocate_counts(self.n, &probs)) {
            let (a, b, c) = self.splits;
            let per = allocate_counts(count, &[a, b, c]);
            for (split, m) in Split::ALL.iter().zip(per) {
                plan.extend(std::iter::repeat_n((*kind, *split), m));
            }
        }
        plan.shuffle(&mut rng::stream(self.seed, 0xd15));
        plan
    }
}

/// Randomized scene parameters and subject for scene `index`.
pub fn sample_scene(cfg: &DatasetConfig, kind: SceneKind, index: usize) -> (SceneSpec, FaceTemplate45) {
    let mut r = rng::stream(cfg.seed, rng::mix(&[0x5ce, index as u64]));
    let subject = FaceTemplate45::subject(&mut r);
    let (d0, d1) = cfg.distance_range;
    let mut spec = SceneSpec::new(kind, d0, Rig::preset(cfg.rig), rng::mix(&[cfg.seed, index as u64]));
    let a = cfg.max_pose_deg;
    let angle = |r: &mut rand_chacha::ChaCha8Rng| if a > 0.0 { r.random_range(-a..=a) } else { 0.0 };
    spec.pose = Pose {
        yaw: angle(&mut r),
        pitch: angle(&mut r),
        roll: angle(&mut r),
    };
    let o = cfg.max_offset_mm;
    spec.offset = if o > 0.0 {
        (r.random_range(-o..=o), r.random_range(-o..=o))
    } else {
        (0.0, 0.0)
    };
    spec.cylinder_radius = cfg.cylinder_radius;
    spec.landmark_noise = cfg.landmark_noise;
    match kind {
        SceneKind::Plane | SceneKind::Cylinder => {
            let (s0, s1) = cfg.scale_range;
            spec.scale = if s1 > s0 { r.random_range(s0..=s1) } else { s0 };
            // A smaller print held proportionally closer: same apparent size.
            let lo = (300.0 / spec.scale).max(d0).min(d1);
            let apparent = if d1 > lo { r.random_range(lo..=d1) } else { lo };
            spec.distance = (apparent * spec.scale).clamp(300.0, 2000.0);
        }
        _ => {
            spec.distance = if d1 > d0 { r.random_range(d0..=d1) } else { d0 };
        }
    }
    (spec, subject)
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub id: String,
    pub index: usize,
    pub split: Split,
    pub scene: RenderedScene,
    pub stack: SampleStack,
    /// The right sensor's own face crop, in intensity units.
    pub right_crop: SensorImage,
}

pub fn sample_id(index: usize) -> String {
    format!("s{index:06}")
}

/// Renders scene `index` and assembles its stack. Training-split samples get
/// landmark and crop augmentation when configured.
pub fn synthesize(cfg: &DatasetConfig, index: usize, kind: SceneKind, split: Split) -> Result<SynthSample> {
    let (spec, subject) = sample_scene(cfg, kind, index);
    let scene = render_scene(&spec, &subject)?;
    let (pair, opts) = match (&cfg.augment, split) {
        (Some(aug), Split::Train) => {
            let mut r = rng::stream(aug.seed ^ cfg.seed, rng::mix(&[0xa06, index as u64]));
            let pair = augment_landmarks(&scene.landmarks, aug, &mut r)?;
            let rect = pair.left.face_rect;
            let opts = sample_crop_options(aug, rect.w, rect.h, &mut r);
            (pair, opts)
        }
        _ => (scene.landmarks.clone(), StackOptions::default()),
    };
    let mut stack = build_stack(&scene.left, &scene.right, &pair, &opts)?.labeled(kind);
    let id = sample_id(index);
    stack.meta.id = id.clone();
    let right = build_sensor_crop(&scene.right, &scene.landmarks.right.face_rect, &StackOptions::default())?;
    let mut right_planes = right;
    right_planes.map_inplace(|v| v * crate::ingest::MAX_INTENSITY as f32);
    Ok(SynthSample {
        id,
        index,
        split,
        scene,
        stack,
        right_crop: SensorImage::new(SensorId::Right, right_planes)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFiles {
    /// Ten-channel stack.
    pub stack: String,
    /// Right sensor crop (`SENS`).
    pub right: String,
    /// Landmark pair JSON.
    pub landmarks: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub kind: SceneKind,
    pub label: Label,
    pub split: Split,
    pub distance_mm: f64,
    pub pose: Pose,
    pub scale: f64,
    pub seed: u64,
    pub files: SampleFiles,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Writes every sample under `out/samples/` and the manifest (one JSON row
/// per sample, in index order). Output bytes do not depend on `jobs`.
pub fn generate_dataset(cfg: &DatasetConfig, out: &Path, jobs: usize) -> Result<Vec<ManifestRow>> {
    cfg.validate()?;
    let samples_dir = out.join("samples");
    fs::create_dir_all(&samples_dir)?;
    let plan = cfg.plan();

    let one = |(index, &(kind, split)): (usize, &(SceneKind, Split))| -> Result<ManifestRow> {
        let s = synthesize(cfg, index, kind, split)?;
        let files = SampleFiles {
            stack: format!("samples/{}.stk", s.id),
            right: format!("samples/{}_right.sens", s.id),
            landmarks: format!("samples/{}.json", s.id),
        };
        s.stack.save(out.join(&files.stack))?;
        s.right_crop.save(out.join(&files.right))?;
        save_landmarks(out.join(&files.landmarks), &s.scene.landmarks)?;
        let spec = &s.scene.spec;
        Ok(ManifestRow {
            id: s.id,
            kind,
            label: kind.label(),
            split,
            distance_mm: spec.distance,
            pose: spec.pose,
            scale: spec.scale,
            seed: spec.seed,
            files,
        })
    };

    let rows: Vec<ManifestRow> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| plan.par_iter().enumerate().map(one).collect::<Result<Vec<_>>>())?
    } else {
        plan.iter().enumerate().map(one).collect::<Result<Vec<_>>>()?
    };

    let mut w = BufWriter::new(File::create(out.join(MANIFEST_FILE))?);
    for row in &rows {
        serde_json::to_writer(&mut w, row).expect("manifest row serializes");
        w.write_all(b"\n")?;
    }
    w.flush()?;
    log::info!("wrote {} samples to {}", rows.len(), out.display());
    Ok(rows)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Json {
                path: PathBuf::from(format!("{}:{}", path.display(), i + 1)),
                source: e,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_is_exact() {
        assert_eq!(allocate_counts(1000, &[0.5, 0.5]), vec![500, 500]);
        assert_eq!(allocate_counts(10, &[1.0 / 3.0; 3]), vec![4, 3, 3]);
        assert_eq!(allocate_counts(7, &[0.7, 0.15, 0.15]), vec![5, 1, 1]);
        for n in 0..200 {
            assert_eq!(allocate_counts(n, &[0.2, 0.3, 0.5]).iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn mix_parsing() {
        let m: Mix = "live=0.5, plane=0.25,cylinder:0.25".parse().unwrap();
        assert_eq!(m.weights().len(), 3);
        assert!("live=0.5,plane=0.4".parse::<Mix>().is_err());
        assert!("live=0.5,live=0.5".parse::<Mix>().is_err());
        assert!("ghost=1".parse::<Mix>().is_err());
        assert_eq!(m.to_string().parse::<Mix>().unwrap(), m);
    }

    #[test]
    fn plan_counts_follow_mix_and_splits() {
        let cfg = DatasetConfig {
            n: 1000,
            mix: "live=0.5,plane=0.5".parse().unwrap(),
            ..DatasetConfig::default()
        };
        let plan = cfg.plan();
        let live = plan.iter().filter(|(k, _)| *k == SceneKind::Live).count();
        assert_eq!(live, 500);
        let test_live = plan
            .iter()
            .filter(|(k, s)| *k == SceneKind::Live && *s == Split::Test)
            .count();
        assert_eq!(test_live, 75);
    }

    #[test]
    fn spoof_prints_sit_closer() {
        let cfg = DatasetConfig::default();
        for i in 0..50 {
            let (s, _) = sample_scene(&cfg, SceneKind::Plane, i);
            assert!(s.distance >= 300.0 && s.distance <= 1200.0);
            assert!(s.scale >= 0.5 && s.scale <= 1.0);
            s.validate().unwrap();
        }
    }
}
