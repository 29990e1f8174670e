//! Channel-major stack of equally sized `f32` planes.
//!
//! Pixel `(row i, col j)` has its center at continuous coordinate
//! `(x = j, y = i)`. Every geometric routine in the crate (landmarks,
//! interpolation, resampling) shares this convention.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Planes {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Planes {
    pub fn zeros(channels: usize, width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; channels * width * height],
        }
    }

    pub fn from_vec(channels: usize, width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * width * height {
            return Err(Error::Dimension(format!(
                "{} values cannot fill {channels}x{width}x{height} planes",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Stacks planes of identical size in order.
    pub fn concat(parts: &[&Planes]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("plane list"))?;
        let (w, h) = (first.width, first.height);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if p.width != w || p.height != h {
                return Err(Error::Dimension(format!(
                    "cannot stack {}x{} planes onto {w}x{h}",
                    p.width, p.height
                )));
            }
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Ok(Self {
            width: w,
            height: h,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Copies a subset of channels, in the given order.
    pub fn select(&self, channels: &[usize]) -> Planes {
        let mut data = Vec::with_capacity(channels.len() * self.plane_len());
        for &c in channels {
            data.extend_from_slice(self.plane(c));
        }
        Planes {
            width: self.width,
            height: self.height,
            channels: channels.len(),
            data,
        }
    }

    /// Bilinear sample with edge clamping at continuous `(x, y)`.
    pub fn sample_bilinear(&self, c: usize, x: f64, y: f64) -> f32 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let x = x.clamp(0.0, xm);
        let y = y.clamp(0.0, ym);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let p = self.plane(c);
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let top = p[row0 + x0] as f64 * (1.0 - fx) + p[row0 + x1] as f64 * fx;
        let bot = p[row1 + x0] as f64 * (1.0 - fx) + p[row1 + x1] as f64 * fx;
        (top * (1.0 - fy) + bot * fy) as f32
    }

    /// Copies the window `[x0, x0 + w) x [y0, y0 + h)`; the window must lie inside.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Planes {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop window out of bounds");
        let mut out = Planes::zeros(self.channels, w, h);
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = out.plane_mut(c);
            for row in 0..h {
                let s = (y0 + row) * self.width + x0;
                dst[row * w..(row + 1) * w].copy_from_slice(&src[s..s + w]);
            }
        }
        out
    }

    /// Channel-wise bilinear resampling using half-pixel-center alignment.
    ///
    /// Same-size resizing is an exact copy; output values stay within the
    /// per-channel range of the source.
    pub fn resize_bilinear(&self, out_w: usize, out_h: usize) -> Planes {
        assert!(out_w >= 1 && out_h >= 1, "resize target must be non-empty");
        if out_w == self.width && out_h == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let xs: Vec<f64> = (0..out_w).map(|j| (j as f64 + 0.5) * sx - 0.5).collect();
        let ys: Vec<f64> = (0..out_h).map(|i| (i as f64 + 0.5) * sy - 0.5).collect();
        let mut out = Planes::zeros(self.channels, out_w, out_h);
        for c in 0..self.channels {
            for (i, &y) in ys.iter().enumerate() {
                for (j, &x) in xs.iter().enumerate() {
                    let v = self.sample_bilinear(c, x, y);
                    out.set(c, j, i, v);
                }
            }
        }
        out
    }

    pub fn map_inplace(&mut self, f: impl Fn(f32) -> f32) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn channel_range(&self, c: usize) -> (f32, f32) {
        self.plane(c)
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_midpoint() {
        let p = Planes::from_vec(1, 2, 2, vec![0.0, 100.0, 100.0, 0.0]).unwrap();
        let r = p.resize_bilinear(3, 3);
        assert!((r.get(0, 1, 1) - 50.0).abs() < 1e-5);
    }

    #[test]
    fn same_size_resize_is_identity() {
        let p = Planes::from_vec(2, 3, 2, (0..12).map(|v| v as f32 * 1.5).collect()).unwrap();
        assert_eq!(p.resize_bilinear(3, 2), p);
    }

    #[test]
    fn constant_resize_stays_constant() {
        let p = Planes::from_vec(1, 5, 7, vec![42.0; 35]).unwrap();
        let r = p.resize_bilinear(13, 3);
        assert!(r.data().iter().all(|&v| (v - 42.0).abs() < 1e-4));
    }

    #[test]
    fn concat_rejects_size_mismatch() {
        let a = Planes::zeros(1, 2, 2);
        let b = Planes::zeros(1, 3, 2);
        assert!(Planes::concat(&[&a, &b]).is_err());
        assert_eq!(Planes::concat(&[&a, &a]).unwrap().channels(), 2);
    }
}
