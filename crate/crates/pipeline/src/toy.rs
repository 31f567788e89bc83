//! Synthetic three-class dataset: a red disk, a green square or a blue
//! triangle on a noisy background, plus random weights for the bundled
//! 4-layer descriptor and a ready-to-run config.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use deepbow_core::dataset::Split;
use deepbow_core::{random_weights, ArchitectureDescriptor};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{EncoderKind, PipelineConfig, BUILTIN_TOY};

pub const SIDE: u32 = 224;
pub const CLASSES: [&str; 3] = ["disk", "square", "triangle"];
/// Images per class in each split.
pub const PER_SPLIT: [(Split, usize); 3] = [(Split::Train, 10), (Split::Val, 4), (Split::Test, 6)];
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy)]
enum Shape {
    Disk,
    Square,
    Triangle,
}

impl Shape {
    fn of_class(c: usize) -> Self {
        [Shape::Disk, Shape::Square, Shape::Triangle][c]
    }

    fn color(self) -> [f32; 3] {
        match self {
            Shape::Disk => [220.0, 40.0, 40.0],
            Shape::Square => [40.0, 200.0, 60.0],
            Shape::Triangle => [50.0, 70.0, 220.0],
        }
    }

    fn contains(self, dx: f32, dy: f32, r: f32) -> bool {
        match self {
            Shape::Disk => dx * dx + dy * dy <= r * r,
            Shape::Square => dx.abs() <= r * 0.85 && dy.abs() <= r * 0.85,
            // apex up, base at dy = r/2
            Shape::Triangle => {
                let t = (dy + r) / (1.5 * r);
                (0.0..=1.0).contains(&t) && dx.abs() <= t * r * 0.95
            }
        }
    }
}

/// Renders one image of `class`.
pub fn render(class: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let shape = Shape::of_class(class);
    let r: f32 = rng.random_range(40.0..70.0);
    let margin = r + 4.0;
    let cx: f32 = rng.random_range(margin..SIDE as f32 - margin);
    let cy: f32 = rng.random_range(margin..SIDE as f32 - margin);
    let base = shape.color();
    let jitter: [f32; 3] = std::array::from_fn(|_| rng.random_range(-20.0..20.0));
    let mut img = RgbImage::new(SIDE, SIDE);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let inside = shape.contains(x as f32 + 0.5 - cx, y as f32 + 0.5 - cy, r);
        let rgb: [u8; 3] = std::array::from_fn(|c| {
            let v = if inside {
                base[c] + jitter[c] + rng.random_range(-15.0..15.0)
            } else {
                rng.random_range(70.0..180.0)
            };
            v.clamp(0.0, 255.0) as u8
        });
        *px = Rgb(rgb);
    }
    img
}

/// Writes images, `manifest.tsv`, `weights.hfw` and `config.toml` into
/// `dir`, returning the config path.
pub fn generate(dir: &Path, seed: u64) -> Result<PathBuf> {
    let images = dir.join("images");
    fs::create_dir_all(&images).with_context(|| format!("creating {}", images.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = format!("@classes\t{}\n", CLASSES.join(","));
    for (class, name) in CLASSES.iter().enumerate() {
        let mut idx = 0;
        for (split, count) in PER_SPLIT {
            for _ in 0..count {
                let rel = format!("images/{name}_{idx:02}.png");
                render(class, &mut rng)
                    .save(dir.join(&rel))
                    .with_context(|| format!("writing {rel}"))?;
                manifest.push_str(&format!("{rel}\t{split}\t{name}\n"));
                idx += 1;
            }
        }
    }
    fs::write(dir.join("manifest.tsv"), manifest)?;
    random_weights(&ArchitectureDescriptor::toy(), seed)?.save(dir.join("weights.hfw"))?;
    let mut cfg = PipelineConfig {
        manifest: "manifest.tsv".into(),
        arch: BUILTIN_TOY.into(),
        weights: "weights.hfw".into(),
        cache_dir: "cache".into(),
        out_dir: "out".into(),
        seed,
        ..Default::default()
    };
    cfg.features.encoder = EncoderKind::Bow;
    cfg.features.size = 8;
    cfg.features.layers = "last:4".into();
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, cfg.to_toml())?;
    Ok(path)
}
