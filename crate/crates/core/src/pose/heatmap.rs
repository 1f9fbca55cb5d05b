//! Gaussian joint heatmaps: encoding a pose into per-joint confidence maps,
//! decoding maps produced by an external estimator, and the mean squared
//! heatmap loss.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pose::{Pose2D, NUM_JOINTS};

pub const DEFAULT_SIGMA: f64 = 4.0;
pub const DEFAULT_SIZE: usize = 64;

/// `K` channels of `height × width` values, channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    width: usize,
    height: usize,
    channels: usize,
    sigma: f64,
    data: Vec<f64>,
}

/// Height of the normalized Gaussian kernel at its center.
pub fn peak_value(sigma: f64) -> f64 {
    1.0 / (2.0 * PI * sigma * sigma)
}

impl HeatmapStack {
    pub fn zeros(width: usize, height: usize, channels: usize, sigma: f64) -> Result<Self> {
        check_params(width, height, sigma)?;
        Ok(Self {
            width,
            height,
            channels,
            sigma,
            data: vec![0.0; width * height * channels],
        })
    }

    pub fn from_data(width: usize, height: usize, channels: usize, sigma: f64, data: Vec<f64>) -> Result<Self> {
        check_params(width, height, sigma)?;
        if data.len() != width * height * channels {
            return Err(Error::shape(format!(
                "heatmap data has {} values, expected {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            sigma,
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

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn get(&self, k: usize, x: usize, y: usize) -> f64 {
        self.channel(k)[y * self.width + x]
    }
}

fn check_params(width: usize, height: usize, sigma: f64) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!("heatmap size must be positive, got {width}x{height}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// Evaluates the joint kernel at every integer pixel, untruncated. Invisible
/// joints produce an all-zero channel.
pub fn encode_heatmaps(pose: &Pose2D, width: usize, height: usize, sigma: f64) -> Result<HeatmapStack> {
    let mut stack = HeatmapStack::zeros(width, height, pose.len(), sigma)?;
    let norm = peak_value(sigma);
    let denom = 2.0 * sigma * sigma;
    for (k, (c, &vis)) in pose.coords().iter().zip(pose.visibility()).enumerate() {
        if !vis {
            continue;
        }
        // exp factorizes into an x and a y term
        let gx: Vec<f64> = (0..width).map(|x| (-(x as f64 - c[0]).powi(2) / denom).exp()).collect();
        let gy: Vec<f64> = (0..height).map(|y| (-(y as f64 - c[1]).powi(2) / denom).exp()).collect();
        let chan = stack.channel_mut(k);
        for (y, row) in chan.chunks_exact_mut(width).enumerate() {
            let wy = norm * gy[y];
            for (v, &wx) in row.iter_mut().zip(&gx) {
                *v = wy * wx;
            }
        }
    }
    Ok(stack)
}

/// Argmax decoding. Confidence is the peak rescaled by the kernel's maximum so
/// that a clean encoded joint decodes to confidence 1. Channels whose peak is
/// not positive decode as invisible joints.
pub fn decode_heatmaps(stack: &HeatmapStack) -> Result<Pose2D> {
    if stack.channels != NUM_JOINTS {
        return Err(Error::shape(format!(
            "heatmap stack has {} channels, expected {NUM_JOINTS}",
            stack.channels
        )));
    }
    if stack.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("heatmap stack contains non-finite values"));
    }
    let scale = 1.0 / peak_value(stack.sigma);
    let mut coords = vec![[0.0; 2]; stack.channels];
    let mut vis = vec![false; stack.channels];
    let mut conf = vec![0.0; stack.channels];
    for k in 0..stack.channels {
        let (idx, peak) = stack
            .channel(k)
            .iter()
            .copied()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        if peak > 0.0 {
            coords[k] = [(idx % stack.width) as f64, (idx / stack.width) as f64];
            vis[k] = true;
            conf[k] = (peak * scale).min(1.0);
        }
    }
    Pose2D::new(coords, vis, conf)
}

/// Per-joint squared L2 distance between predicted and target maps, averaged
/// over the joints.
pub fn heatmap_loss(pred: &HeatmapStack, gt: &HeatmapStack) -> Result<f64> {
    if pred.width != gt.width || pred.height != gt.height || pred.channels != gt.channels {
        return Err(Error::shape(format!(
            "heatmap dims differ: {}x{}x{} vs {}x{}x{}",
            pred.width, pred.height, pred.channels, gt.width, gt.height, gt.channels
        )));
    }
    if pred.channels == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred.data.iter().zip(&gt.data).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / pred.channels as f64)
}
