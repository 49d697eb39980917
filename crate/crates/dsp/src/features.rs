use rand::Rng;

use crate::error::{DspError, Result};

/// Static, delta and delta-delta stacked per frame.
pub const FEATURE_DIM: usize = 120;
/// Coefficients per stream.
pub const STREAM_DIM: usize = 40;
/// Frames per training or scoring example.
pub const TARGET_FRAMES: usize = 400;

/// `frames × 120` row-major feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f32>,
    frames: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f32>, frames: usize) -> Result<Self> {
        if frames == 0 || data.len() != frames * FEATURE_DIM {
            return Err(DspError::ingest(
                "frames",
                format!("{} values for {frames} frames of {FEATURE_DIM}", data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(DspError::ingest("frames", format!("non-finite value at index {i}")));
        }
        Ok(FeatureMatrix { data, frames })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * FEATURE_DIM..(t + 1) * FEATURE_DIM]
    }

    /// Exactly `target` frames. Longer inputs are cropped at a random start
    /// when `rng` is given and centrally otherwise; shorter inputs are tiled.
    pub fn crop_or_pad<R: Rng + ?Sized>(&self, target: usize, rng: Option<&mut R>) -> FeatureMatrix {
        let start = if self.frames > target {
            match rng {
                Some(r) => r.random_range(0..=self.frames - target),
                None => (self.frames - target) / 2,
            }
        } else {
            0
        };
        let mut data = Vec::with_capacity(target * FEATURE_DIM);
        for t in 0..target {
            data.extend_from_slice(self.row((start + t) % self.frames));
        }
        FeatureMatrix { data, frames: target }
    }

    /// Zeroes bin `b` of every stream in every frame.
    pub fn mask_bin(&mut self, b: usize) {
        assert!(b < STREAM_DIM, "bin {b}");
        for row in self.data.chunks_exact_mut(FEATURE_DIM) {
            for s in 0..3 {
                row[s * STREAM_DIM + b] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(frames: usize) -> FeatureMatrix {
        let data = (0..frames * FEATURE_DIM).map(|i| (i / FEATURE_DIM) as f32).collect();
        FeatureMatrix::new(data, frames).unwrap()
    }

    #[test]
    fn exact_length_is_unchanged() {
        let f = ramp(400);
        assert_eq!(f.crop_or_pad::<rand::rngs::ThreadRng>(400, None), f);
    }

    #[test]
    fn short_input_repeats() {
        let f = ramp(100).crop_or_pad::<rand::rngs::ThreadRng>(400, None);
        assert_eq!(f.frames(), 400);
        for t in 0..400 {
            assert_eq!(f.row(t)[0], (t % 100) as f32);
        }
    }

    #[test]
    fn eval_crop_is_central() {
        let f = ramp(1000).crop_or_pad::<rand::rngs::ThreadRng>(400, None);
        assert_eq!(f.row(0)[0], 300.0);
        assert_eq!(f.row(399)[0], 699.0);
    }

    #[test]
    fn rejects_wrong_width_and_nan() {
        assert!(FeatureMatrix::new(vec![0.0; 119], 1).is_err());
        let mut v = vec![0.0; 120];
        v[7] = f32::NAN;
        assert!(FeatureMatrix::new(v, 1).is_err());
    }
}
