//! Raw Bayer ingestion, face cropping and resizing.
//!
//! A raw frame is repacked into four half-resolution planes without any
//! demosaicing. The plane order is the BGGR cell order `[B, G1, G2, R]`
//! and is the wire order for every file this crate writes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::planes::Planes;

/// Largest intensity a 10-bit sensor photosite reports.
pub const MAX_INTENSITY: u16 = 1024;

pub const CHANNEL_NAMES: [&str; 4] = ["B", "G1", "G2", "R"];

/// `(row, col)` offset of each output channel inside the 2x2 cell.
pub const BAYER_OFFSETS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

pub const DEFAULT_EXTENSION: f64 = 0.15;

/// Face/background ratio at which the crop window is exactly the
/// extension-grown rectangle. Other ratios rescale the window about its center.
pub const DEFAULT_FACE_BG_RATIO: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorId {
    Left,
    Right,
}

impl SensorId {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorId::Left => "left",
            SensorId::Right => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBayerFrame {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl RawBayerFrame {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || width % 2 != 0 || height % 2 != 0 {
            return Err(Error::Dimension(format!(
                "Bayer frame must have even, non-zero dimensions, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} photosites for a {width}x{height} frame",
                data.len()
            )));
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, &v)| v > MAX_INTENSITY) {
            return Err(Error::IntensityRange { index, value });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        let mut w = Writer::new(w);
        w.magic(b"RAWB")?;
        w.u32(self.width as u32)?;
        w.u32(self.height as u32)?;
        w.u16s(&self.data)?;
        w.finish()?;
        Ok(())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new("RAWB frame", buf);
        r.magic(b"RAWB")?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let data = r.u16s(width * height)?;
        r.expect_end()?;
        Self::new(width, height, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Four-plane sensor image in intensity units (`0..=1024`).
#[derive(Debug, Clone, PartialEq)]
pub struct SensorImage {
    pub sensor: SensorId,
    pub planes: Planes,
}

impl SensorImage {
    pub fn new(sensor: SensorId, planes: Planes) -> Result<Self> {
        if planes.channels() != 4 {
            return Err(Error::Dimension(format!(
                "sensor image needs 4 channels, got {}",
                planes.channels()
            )));
        }
        Ok(Self { sensor, planes })
    }

    pub fn width(&self) -> usize {
        self.planes.width()
    }

    pub fn height(&self) -> usize {
        self.planes.height()
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        write_sens(w, &self.planes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    /// Reads a `SENS` file. The format carries no sensor id, so the caller supplies it.
    pub fn load(path: impl AsRef<Path>, sensor: SensorId) -> Result<Self> {
        let planes = read_sens(&std::fs::read(path)?)?;
        Self::new(sensor, planes)
    }
}

pub(crate) fn write_sens(w: impl Write, planes: &Planes) -> Result<()> {
    let mut w = Writer::new(w);
    w.magic(b"SENS")?;
    w.u32(planes.width() as u32)?;
    w.u32(planes.height() as u32)?;
    w.u32(planes.channels() as u32)?;
    w.f32s(planes.data())?;
    w.finish()?;
    Ok(())
}

pub(crate) fn read_sens(buf: &[u8]) -> Result<Planes> {
    let mut r = Reader::new("SENS image", buf);
    r.magic(b"SENS")?;
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let channels = r.u32()? as usize;
    if channels != 4 {
        return Err(r.error(format!("expected 4 channels, found {channels}")));
    }
    let data = r.f32s(channels * width * height)?;
    r.expect_end()?;
    Planes::from_vec(channels, width, height, data)
}

/// Splits each 2x2 Bayer cell into the four output channels.
pub fn repack_bayer(frame: &RawBayerFrame, sensor: SensorId) -> SensorImage {
    let (w, h) = (frame.width / 2, frame.height / 2);
    let mut planes = Planes::zeros(4, w, h);
    for (c, &(dr, dc)) in BAYER_OFFSETS.iter().enumerate() {
        let plane = planes.plane_mut(c);
        for i in 0..h {
            let src = &frame.data[(2 * i + dr) * frame.width..];
            for j in 0..w {
                plane[i * w + j] = src[2 * j + dc] as f32;
            }
        }
    }
    SensorImage { sensor, planes }
}

/// Inverse of [`repack_bayer`]; intensities are rounded back to integers.
pub fn unpack_bayer(img: &SensorImage) -> Result<RawBayerFrame> {
    let (w, h) = (img.width(), img.height());
    let mut data = vec![0u16; 4 * w * h];
    for (c, &(dr, dc)) in BAYER_OFFSETS.iter().enumerate() {
        let plane = img.planes.plane(c);
        for i in 0..h {
            for j in 0..w {
                let v = plane[i * w + j].round().clamp(0.0, MAX_INTENSITY as f32) as u16;
                data[(2 * i + dr) * 2 * w + 2 * j + dc] = v;
            }
        }
    }
    RawBayerFrame::new(2 * w, 2 * h, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl FaceRect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::Dimension(format!(
                "face rectangle needs positive finite size, got {w}x{h} at ({x}, {y})"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }
}

/// Integer crop window in full-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropWindow {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

/// Grows `rect` by `extension` of its size on every side, rescales the result
/// about its center by `DEFAULT_FACE_BG_RATIO / face_bg_ratio`, and clamps to
/// the image.
pub fn crop_window(
    image_w: usize,
    image_h: usize,
    rect: &FaceRect,
    extension: f64,
    face_bg_ratio: f64,
) -> Result<CropWindow> {
    if !(face_bg_ratio > 0.0) || !(extension >= 0.0) {
        return Err(Error::Config(format!(
            "crop needs extension >= 0 and ratio > 0, got {extension} / {face_bg_ratio}"
        )));
    }
    let k = DEFAULT_FACE_BG_RATIO / face_bg_ratio;
    let (cx, cy) = rect.center();
    let half_w = rect.w * (0.5 + extension) * k;
    let half_h = rect.h * (0.5 + extension) * k;
    let span = |c: f64, half: f64, limit: usize| -> (usize, usize) {
        let lo = (c - half).round().clamp(0.0, limit as f64) as usize;
        let hi = (c + half).round().clamp(0.0, limit as f64) as usize;
        (lo, hi)
    };
    let (x0, x1) = span(cx, half_w, image_w);
    let (y0, y1) = span(cy, half_h, image_h);
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::NoFace {
            width: image_w,
            height: image_h,
        });
    }
    Ok(CropWindow {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    })
}

pub fn crop_face(
    img: &SensorImage,
    rect: &FaceRect,
    extension: f64,
    face_bg_ratio: f64,
) -> Result<(SensorImage, CropWindow)> {
    let win = crop_window(img.width(), img.height(), rect, extension, face_bg_ratio)?;
    let planes = img.planes.crop(win.x, win.y, win.w, win.h);
    Ok((
        SensorImage {
            sensor: img.sensor,
            planes,
        },
        win,
    ))
}

pub fn resize_bilinear(img: &SensorImage, out_w: usize, out_h: usize) -> Result<SensorImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Dimension(format!("cannot resize to {out_w}x{out_h}")));
    }
    Ok(SensorImage {
        sensor: img.sensor,
        planes: img.planes.resize_bilinear(out_w, out_h),
    })
}
