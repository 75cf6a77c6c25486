//! Per-image augmentation on channel-major `[C, H, W]` buffers.

use rand::Rng;

use crate::error::{Error, Result};

/// Zero-pad, random square crop, random horizontal flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropFlip {
    pub pad: usize,
    pub crop_size: usize,
    pub flip_prob: f64,
}

/// One random draw of crop offsets (in padded coordinates) and flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropFlipDraw {
    pub offset_y: usize,
    pub offset_x: usize,
    pub flip: bool,
}

fn image_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::Shape(format!("expected a [C, H, W] image, got {shape:?}"))),
    }
}

impl CropFlip {
    pub fn draw<R: Rng + ?Sized>(&self, shape: &[usize], rng: &mut R) -> Result<CropFlipDraw> {
        let (_, h, w) = image_dims(shape)?;
        let (ph, pw) = (h + 2 * self.pad, w + 2 * self.pad);
        if self.crop_size > ph || self.crop_size > pw {
            return Err(Error::invalid(format!(
                "crop {} larger than padded image {ph}x{pw}",
                self.crop_size
            )));
        }
        Ok(CropFlipDraw {
            offset_y: rng.random_range(0..=ph - self.crop_size),
            offset_x: rng.random_range(0..=pw - self.crop_size),
            flip: self.flip_prob > 0.0 && rng.random_bool(self.flip_prob.min(1.0)),
        })
    }

    /// Output is `[C, crop, crop]`.
    pub fn apply(&self, image: &[f32], shape: &[usize], draw: CropFlipDraw) -> Result<Vec<f32>> {
        let (c, h, w) = image_dims(shape)?;
        if image.len() != c * h * w {
            return Err(Error::Shape(format!("{} values for image {shape:?}", image.len())));
        }
        let s = self.crop_size;
        let mut out = vec![0.0; c * s * s];
        for ch in 0..c {
            for y in 0..s {
                let sy = (draw.offset_y + y) as isize - self.pad as isize;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for x in 0..s {
                    let sx = (draw.offset_x + x) as isize - self.pad as isize;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let dx = if draw.flip { s - 1 - x } else { x };
                    out[(ch * s + y) * s + dx] = image[(ch * h + sy as usize) * w + sx as usize];
                }
            }
        }
        Ok(out)
    }
}

pub fn augment_standard<R: Rng + ?Sized>(
    image: &[f32],
    shape: &[usize],
    pad: usize,
    crop_size: usize,
    flip_prob: f64,
    rng: &mut R,
) -> Result<Vec<f32>> {
    let op = CropFlip {
        pad,
        crop_size,
        flip_prob,
    };
    let draw = op.draw(shape, rng)?;
    op.apply(image, shape, draw)
}

/// Zeroes a `size × size` square whose center is uniform over the image, clipped at the borders.
pub fn cutout<R: Rng + ?Sized>(image: &mut [f32], shape: &[usize], size: usize, rng: &mut R) -> Result<()> {
    let (c, h, w) = image_dims(shape)?;
    let cy = rng.random_range(0..h);
    let cx = rng.random_range(0..w);
    let (y0, y1) = (cy.saturating_sub(size / 2), (cy.saturating_sub(size / 2) + size).min(h));
    let (x0, x1) = (cx.saturating_sub(size / 2), (cx.saturating_sub(size / 2) + size).min(w));
    for ch in 0..c {
        for y in y0..y1 {
            image[(ch * h + y) * w + x0..(ch * h + y) * w + x1].fill(0.0);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_pad_no_flip_is_identity() {
        let img: Vec<f32> = (0..12).map(|v| v as f32 / 12.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = augment_standard(&img, &[3, 2, 2], 0, 2, 0.0, &mut rng).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn certain_flip_reverses_columns() {
        let img = vec![0.1, 0.2, 0.3, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = augment_standard(&img, &[1, 2, 2], 0, 2, 1.0, &mut rng).unwrap();
        assert_eq!(out, vec![0.2, 0.1, 0.4, 0.3]);
    }

    #[test]
    fn padded_crop_offsets_cover_the_full_range() {
        let op = CropFlip {
            pad: 4,
            crop_size: 32,
            flip_prob: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [[false; 9]; 9];
        let img = vec![0.5f32; 3 * 32 * 32];
        for _ in 0..3000 {
            let d = op.draw(&[3, 32, 32], &mut rng).unwrap();
            assert!(d.offset_y <= 8 && d.offset_x <= 8);
            seen[d.offset_y][d.offset_x] = true;
            assert_eq!(op.apply(&img, &[3, 32, 32], d).unwrap().len(), 3 * 32 * 32);
        }
        assert!(seen.iter().flatten().all(|&s| s));
    }

    #[test]
    fn oversized_crop_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(augment_standard(&[0.0; 4], &[1, 2, 2], 0, 3, 0.0, &mut rng).is_err());
    }

    #[test]
    fn cutout_zeroes_at_most_a_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut img = vec![1.0f32; 2 * 10 * 10];
            cutout(&mut img, &[2, 10, 10], 4, &mut rng).unwrap();
            let zeros = img.iter().filter(|&&v| v == 0.0).count();
            assert!(zeros > 0 && zeros <= 2 * 16 && zeros % 2 == 0);
        }
    }
}
