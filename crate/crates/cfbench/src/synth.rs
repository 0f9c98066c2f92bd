//! Deterministic stand-in digit corpus.
//!
//! Renders jittered 4s, 9s, and 7s (the 7s exist so class filtering has
//! something to drop) as anti-aliased stroke drawings and emits them in the
//! exact IDX layout the parser consumes. Useful when the real files are not
//! on disk; everything is a pure function of the seed.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{write_idx_images, write_idx_labels, RawImage};
use crate::Result;

/// Corpus shape: sample counts, image side, seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub train: usize,
    pub test: usize,
    pub side: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            train: 2000,
            test: 500,
            side: 28,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy)]
enum Stroke {
    /// Capsule between two points.
    Segment([f64; 2], [f64; 2]),
    /// Ring of the given radius.
    Ring([f64; 2], f64),
}

fn digit_strokes(digit: u8) -> &'static [Stroke] {
    const FOUR: [Stroke; 3] = [
        Stroke::Segment([0.52, 0.12], [0.22, 0.54]),
        Stroke::Segment([0.22, 0.54], [0.78, 0.54]),
        Stroke::Segment([0.62, 0.10], [0.62, 0.88]),
    ];
    const NINE: [Stroke; 2] = [
        Stroke::Ring([0.45, 0.33], 0.20),
        Stroke::Segment([0.64, 0.36], [0.56, 0.88]),
    ];
    const SEVEN: [Stroke; 2] = [
        Stroke::Segment([0.22, 0.14], [0.78, 0.14]),
        Stroke::Segment([0.78, 0.14], [0.40, 0.88]),
    ];
    match digit {
        4 => &FOUR,
        9 => &NINE,
        7 => &SEVEN,
        _ => unreachable!("only digits 4, 9, 7 are rendered"),
    }
}

fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    };
    let closest = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - closest[0]).powi(2) + (p[1] - closest[1]).powi(2)).sqrt()
}

struct Jitter {
    dx: f64,
    dy: f64,
    scale: f64,
    rot_sin: f64,
    rot_cos: f64,
    thickness: f64,
    brightness: f64,
}

fn render(digit: u8, side: usize, jitter: &Jitter, rng: &mut ChaCha8Rng) -> RawImage {
    let strokes = digit_strokes(digit);
    let soft = 0.035;
    let mut pixels = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            // pixel center in unit coordinates, then the inverse sample
            // transform (un-shift, un-rotate, un-scale about the box center)
            let px = (col as f64 + 0.5) / side as f64 - 0.5 - jitter.dx;
            let py = (row as f64 + 0.5) / side as f64 - 0.5 - jitter.dy;
            let rx = (px * jitter.rot_cos + py * jitter.rot_sin) / jitter.scale + 0.5;
            let ry = (-px * jitter.rot_sin + py * jitter.rot_cos) / jitter.scale + 0.5;

            let mut d = f64::INFINITY;
            for s in strokes {
                let sd = match *s {
                    Stroke::Segment(a, b) => dist_to_segment([rx, ry], a, b),
                    Stroke::Ring(c, r) => {
                        (((rx - c[0]).powi(2) + (ry - c[1]).powi(2)).sqrt() - r).abs()
                    }
                };
                d = d.min(sd);
            }
            let mut v = jitter.brightness * ((jitter.thickness + soft - d) / soft).clamp(0.0, 1.0);
            if v > 0.0 {
                v *= 1.0 + rng.gen_range(-0.15..0.15);
            }
            pixels.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    RawImage {
        rows: side,
        cols: side,
        pixels,
    }
}

fn sample(rng: &mut ChaCha8Rng, side: usize) -> (RawImage, u8) {
    // roughly 45/45/10 fours/nines/sevens
    let roll = rng.gen_range(0..20);
    let digit = match roll {
        0..=8 => 4,
        9..=17 => 9,
        _ => 7,
    };
    let rot = rng.gen_range(-0.12..0.12f64);
    let jitter = Jitter {
        dx: rng.gen_range(-0.05..0.05),
        dy: rng.gen_range(-0.05..0.05),
        scale: rng.gen_range(0.85..1.1),
        rot_sin: rot.sin(),
        rot_cos: rot.cos(),
        thickness: rng.gen_range(0.045..0.075),
        brightness: rng.gen_range(0.72..1.0),
    };
    (render(digit, side, &jitter, rng), digit)
}

/// Renders a seeded corpus: `(train_images, train_labels, test_images,
/// test_labels)` with raw labels 4/9/7.
pub fn generate(cfg: &SynthConfig) -> (Vec<RawImage>, Vec<u8>, Vec<RawImage>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |n: usize| {
        let mut images = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (img, lbl) = sample(&mut rng, cfg.side);
            images.push(img);
            labels.push(lbl);
        }
        (images, labels)
    };
    let (train_images, train_labels) = draw(cfg.train);
    let (test_images, test_labels) = draw(cfg.test);
    (train_images, train_labels, test_images, test_labels)
}

/// Writes the four standard-named IDX files into `dir`.
pub fn write_corpus(dir: &Path, cfg: &SynthConfig) -> Result<()> {
    let (train_images, train_labels, test_images, test_labels) = generate(cfg);
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("train-images-idx3-ubyte"),
        write_idx_images(&train_images)?,
    )?;
    std::fs::write(
        dir.join("train-labels-idx1-ubyte"),
        write_idx_labels(&train_labels),
    )?;
    std::fs::write(
        dir.join("t10k-images-idx3-ubyte"),
        write_idx_images(&test_images)?,
    )?;
    std::fs::write(
        dir.join("t10k-labels-idx1-ubyte"),
        write_idx_labels(&test_labels),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::filter_and_normalize;
    use crate::models::{classifier_accuracy, train_classifier, TrainConfig};

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            train: 30,
            test: 10,
            side: 28,
            seed: 7,
        };
        assert_eq!(generate(&cfg), generate(&cfg));
    }

    #[test]
    fn corpus_has_all_three_digits_and_clean_borders() {
        let cfg = SynthConfig {
            train: 200,
            test: 50,
            side: 28,
            seed: 1,
        };
        let (images, labels, _, _) = generate(&cfg);
        for d in [4u8, 9, 7] {
            assert!(labels.iter().any(|&l| l == d), "missing digit {d}");
        }
        // corners stay background
        for img in &images {
            assert_eq!(img.pixels[0], 0);
            assert_eq!(img.pixels[27], 0);
            assert_eq!(img.pixels[783], 0);
        }
    }

    #[test]
    fn synthetic_classes_are_learnable() {
        let cfg = SynthConfig {
            train: 240,
            test: 80,
            side: 28,
            seed: 3,
        };
        let (ti, tl, vi, vl) = generate(&cfg);
        let train = filter_and_normalize(&ti, &tl, 4, 9).unwrap();
        let test = filter_and_normalize(&vi, &vl, 4, 9).unwrap();
        let clf = train_classifier(
            &train,
            &TrainConfig {
                epochs: 5,
                batch_size: 32,
                lr: 0.1,
                seed: 42,
            },
        )
        .unwrap();
        assert!(classifier_accuracy(&clf, &test).unwrap() >= 0.9);
    }
}
