use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{estimate_alignment, interpolate_window, sparse_disparity, Alignment};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::ingest::{
    crop_window, CropWindow, FaceRect, SensorImage, DEFAULT_EXTENSION, DEFAULT_FACE_BG_RATIO,
    MAX_INTENSITY,
};
use crate::labels::{Label, SceneKind};
use crate::landmarks::LandmarkPair;
use crate::planes::Planes;

pub const STACK_SIDE: usize = 128;
pub const STACK_CHANNELS: usize = 10;

/// Disparity normalizer: the largest map value observed on the device.
pub const DISPARITY_SCALE: f32 = 480.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackOptions {
    pub extension: f64,
    pub face_bg_ratio: f64,
    /// Face-box translation applied before cropping, in pixels.
    pub rect_shift: (f64, f64),
    pub side: usize,
}

impl Default for StackOptions {
    fn default() -> Self {
        Self {
            extension: DEFAULT_EXTENSION,
            face_bg_ratio: DEFAULT_FACE_BG_RATIO,
            rect_shift: (0.0, 0.0),
            side: STACK_SIDE,
        }
    }
}

impl StackOptions {
    fn window(&self, img_w: usize, img_h: usize, rect: &FaceRect) -> Result<CropWindow> {
        let rect = rect.translated(self.rect_shift.0, self.rect_shift.1);
        crop_window(img_w, img_h, &rect, self.extension, self.face_bg_ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StackMeta {
    #[serde(default)]
    pub id: String,
    pub crop: Option<CropWindow>,
    pub alignment: Option<Alignment>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

/// Model input: `[left B,G1,G2,R | aligned right B,G1,G2,R | map_x | map_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStack {
    pub planes: Planes,
    pub label: Option<Label>,
    pub attack_kind: Option<SceneKind>,
    pub meta: StackMeta,
}

#[derive(Serialize, Deserialize)]
struct Trailer {
    label: Option<Label>,
    attack_kind: Option<SceneKind>,
    meta: StackMeta,
}

impl SampleStack {
    pub fn labeled(mut self, kind: SceneKind) -> Self {
        self.label = Some(kind.label());
        self.attack_kind = (kind != SceneKind::Live).then_some(kind);
        self
    }

    pub fn side(&self) -> usize {
        self.planes.width()
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        let mut w = Writer::new(w);
        w.magic(b"STK0")?;
        w.u32(self.planes.width() as u32)?;
        w.u32(self.planes.channels() as u32)?;
        w.f32s(self.planes.data())?;
        let trailer = Trailer {
            label: self.label,
            attack_kind: self.attack_kind,
            meta: self.meta.clone(),
        };
        w.bytes(&serde_json::to_vec(&trailer).expect("trailer serializes"))?;
        w.finish()?;
        Ok(())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new("STK0 stack", buf);
        r.magic(b"STK0")?;
        let side = r.u32()? as usize;
        let channels = r.u32()? as usize;
        if channels != STACK_CHANNELS {
            return Err(r.error(format!("expected {STACK_CHANNELS} channels, found {channels}")));
        }
        let data = r.f32s(channels * side * side)?;
        let at = r.offset();
        let trailer: Trailer = serde_json::from_slice(r.rest()).map_err(|e| Error::Format {
            what: "STK0 stack",
            offset: at as u64,
            message: format!("bad JSON trailer: {e}"),
        })?;
        Ok(Self {
            planes: Planes::from_vec(channels, side, side, data)?,
            label: trailer.label,
            attack_kind: trailer.attack_kind,
            meta: trailer.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Crops the left face, aligns the right sensor onto the left crop grid,
/// interpolates disparity maps on the same grid, resizes everything to
/// `opts.side` and normalizes.
pub fn build_stack(
    left: &SensorImage,
    right: &SensorImage,
    pair: &LandmarkPair,
    opts: &StackOptions,
) -> Result<SampleStack> {
    let win = opts.window(left.width(), left.height(), &pair.left.face_rect)?;
    let left_crop = left.planes.crop(win.x, win.y, win.w, win.h);

    let align = estimate_alignment(pair)?;
    let mut right_crop = Planes::zeros(4, win.w, win.h);
    for i in 0..win.h {
        for j in 0..win.w {
            let (xr, yr) = align.left_to_right((win.x + j) as f64, (win.y + i) as f64);
            for c in 0..4 {
                right_crop.set(c, j, i, right.planes.sample_bilinear(c, xr, yr));
            }
        }
    }

    let maps = interpolate_window(&sparse_disparity(pair), &win)?.into_planes();

    let side = opts.side;
    let mut sensors = Planes::concat(&[&left_crop, &right_crop])?.resize_bilinear(side, side);
    let inv = 1.0 / MAX_INTENSITY as f32;
    sensors.map_inplace(|v| (v * inv).clamp(0.0, 1.0));
    let mut maps = maps.resize_bilinear(side, side);
    maps.map_inplace(|v| v / DISPARITY_SCALE);

    Ok(SampleStack {
        planes: Planes::concat(&[&sensors, &maps])?,
        label: None,
        attack_kind: None,
        meta: StackMeta {
            id: String::new(),
            crop: Some(win),
            alignment: Some(align),
            extra: serde_json::Value::Null,
        },
    })
}

/// A single sensor's own face crop, resized and normalized to `[0, 1]`.
pub fn build_sensor_crop(img: &SensorImage, rect: &FaceRect, opts: &StackOptions) -> Result<Planes> {
    let win = opts.window(img.width(), img.height(), rect)?;
    let mut p = img
        .planes
        .crop(win.x, win.y, win.w, win.h)
        .resize_bilinear(opts.side, opts.side);
    let inv = 1.0 / MAX_INTENSITY as f32;
    p.map_inplace(|v| (v * inv).clamp(0.0, 1.0));
    Ok(p)
}
