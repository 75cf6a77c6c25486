//! CutMix batch mixing: one box per batch, pasted from a permuted partner.
//!
//! `λ ~ Beta(α, α)`; the box has side ratio `√(1−λ)`, a uniformly drawn
//! center, and is clipped at the image border. `λ` is then recomputed as
//! `1 − box area / image area`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct CutMixBatch {
    pub mixed_inputs: Tensor<f32>,
    /// `(own label, partner label, λ)` per sample; `λ` weights the own label.
    pub pairs: Vec<(usize, usize, f64)>,
}

/// Half-open pixel box `[y0, y1) × [x0, x1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutBox {
    pub y0: usize,
    pub y1: usize,
    pub x0: usize,
    pub x1: usize,
}

impl CutBox {
    pub fn area(&self) -> usize {
        (self.y1 - self.y0) * (self.x1 - self.x0)
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        (self.y0..self.y1).contains(&y) && (self.x0..self.x1).contains(&x)
    }
}

/// Box for mix coefficient `lambda` centered at `(cy, cx)`, clipped to `h × w`.
pub fn cut_box(h: usize, w: usize, lambda: f64, cy: usize, cx: usize) -> CutBox {
    let ratio = (1.0 - lambda.clamp(0.0, 1.0)).sqrt();
    let (ch, cw) = ((h as f64 * ratio) as usize, (w as f64 * ratio) as usize);
    let y0 = cy.saturating_sub(ch / 2);
    let x0 = cx.saturating_sub(cw / 2);
    let y1 = (cy as isize - (ch / 2) as isize + ch as isize).clamp(0, h as isize) as usize;
    let x1 = (cx as isize - (cw / 2) as isize + cw as isize).clamp(0, w as isize) as usize;
    CutBox {
        y0,
        y1: y1.max(y0),
        x0,
        x1: x1.max(x0),
    }
}

fn dims(inputs: &Tensor<f32>) -> Result<(usize, usize, usize, usize)> {
    match *inputs.shape() {
        [m, c, h, w] => Ok((m, c, h, w)),
        _ => Err(Error::Shape(format!(
            "CutMix needs [M, C, H, W] inputs, got {:?}",
            inputs.shape()
        ))),
    }
}

/// Deterministic core: pastes `box` from `partner[i]` into every sample `i`.
pub fn cutmix_with(inputs: &Tensor<f32>, labels: &[usize], partner: &[usize], cut: CutBox) -> Result<CutMixBatch> {
    let (m, c, h, w) = dims(inputs)?;
    if labels.len() != m || partner.len() != m {
        return Err(Error::invalid(format!(
            "{} labels and {} partners for a batch of {m}",
            labels.len(),
            partner.len()
        )));
    }
    if cut.y1 > h || cut.x1 > w {
        return Err(Error::invalid(format!("box {cut:?} outside {h}x{w} image")));
    }
    let per = c * h * w;
    let src = inputs.data();
    let mut mixed = inputs.clone();
    let dst = mixed.data_mut();
    for (i, &j) in partner.iter().enumerate() {
        for ch in 0..c {
            for y in cut.y0..cut.y1 {
                let row = ch * h * w + y * w;
                dst[i * per + row + cut.x0..i * per + row + cut.x1]
                    .copy_from_slice(&src[j * per + row + cut.x0..j * per + row + cut.x1]);
            }
        }
    }
    let lambda = 1.0 - cut.area() as f64 / (h * w) as f64;
    Ok(CutMixBatch {
        mixed_inputs: mixed,
        pairs: labels
            .iter()
            .zip(partner)
            .map(|(&y, &j)| (y, labels[j], lambda))
            .collect(),
    })
}

/// Draws `λ`, a partner permutation and a box center, then mixes.
pub fn cutmix_mix<R: Rng + ?Sized>(inputs: &Tensor<f32>, labels: &[usize], alpha: f64, rng: &mut R) -> Result<CutMixBatch> {
    let (m, _, h, w) = dims(inputs)?;
    if m < 2 {
        return Err(Error::invalid("CutMix needs a batch of at least 2"));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::invalid(format!("CutMix alpha {alpha}: {e}")))?;
    let lambda: f64 = beta.sample(rng);
    let mut partner: Vec<usize> = (0..m).collect();
    partner.shuffle(rng);
    let cy = rng.random_range(0..h);
    let cx = rng.random_range(0..w);
    cutmix_with(inputs, labels, &partner, cut_box(h, w, lambda, cy, cx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(m: usize, h: usize, w: usize) -> Tensor<f32> {
        let data = (0..m).flat_map(|i| std::iter::repeat_n(i as f32, 2 * h * w)).collect();
        Tensor::from_vec(&[m, 2, h, w], data).unwrap()
    }

    #[test]
    fn lambda_one_leaves_inputs_unchanged() {
        let x = batch(3, 6, 6);
        let out = cutmix_with(&x, &[0, 1, 2], &[2, 0, 1], cut_box(6, 6, 1.0, 3, 3)).unwrap();
        assert_eq!(out.mixed_inputs, x);
        assert_eq!(out.pairs, vec![(0, 2, 1.0), (1, 0, 1.0), (2, 1, 1.0)]);
    }

    #[test]
    fn lambda_zero_centered_replaces_everything() {
        for (h, w) in [(6, 6), (5, 7)] {
            let x = batch(2, h, w);
            let cut = cut_box(h, w, 0.0, h / 2, w / 2);
            let out = cutmix_with(&x, &[4, 9], &[1, 0], cut).unwrap();
            assert_eq!(out.pairs, vec![(4, 9, 0.0), (9, 4, 0.0)]);
            let per = 2 * h * w;
            assert!(out.mixed_inputs.data()[..per].iter().all(|&v| v == 1.0));
            assert!(out.mixed_inputs.data()[per..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn partner_pixel_fraction_matches_recomputed_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, h, w) = (4, 9, 11);
        let x = batch(m, h, w);
        for _ in 0..200 {
            let out = cutmix_mix(&x, &[0, 1, 2, 3], 1.0, &mut rng).unwrap();
            for (i, &(_, _, lambda)) in out.pairs.iter().enumerate() {
                let img = &out.mixed_inputs.data()[i * 2 * h * w..(i + 1) * 2 * h * w];
                // partner values differ from the own value unless the permutation fixed i
                let foreign = img.iter().filter(|&&v| v != i as f32).count();
                let expect = (1.0 - lambda) * (2 * h * w) as f64;
                if foreign > 0 {
                    assert_eq!(foreign as f64, expect.round());
                    assert!((foreign as f64 - expect).abs() < 1e-9);
                }
                assert!((0.0..=1.0).contains(&lambda));
            }
        }
    }

    #[test]
    fn needs_two_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(cutmix_mix(&batch(1, 4, 4), &[0], 1.0, &mut rng).is_err());
    }
}
