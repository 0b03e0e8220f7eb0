#![allow(dead_code)]

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rpreg::bench::synthetic;
use rpreg::image_io::{Channel, ImageGrid};
use rpreg::{seed, FeatureSet};

pub const GAUSS_1D: f64 = 1.418_938_533_204_672_7; // 0.5 * ln(2 pi e)

pub fn uniform(t: usize, d: usize, s: u64) -> FeatureSet {
    let mut rng = seed::rng(s);
    FeatureSet::from_flat((0..t * d).map(|_| rng.random::<f64>()).collect(), t, d).unwrap()
}

pub fn normal(t: usize, d: usize, s: u64) -> FeatureSet {
    let mut rng = seed::rng(s);
    FeatureSet::from_flat((0..t * d).map(|_| StandardNormal.sample(&mut rng)).collect(), t, d).unwrap()
}

/// Red and green channels of the synthetic texture, as the loader sees them.
pub fn channel_pair(size: usize, s: u64) -> (ImageGrid, ImageGrid) {
    let rgb = synthetic::textured_rgb(size, size, s);
    let chan = |c: usize| {
        ImageGrid::new(size, size, rgb.pixels().map(|p| p.0[c] as f64 / 255.0).collect()).unwrap()
    };
    (chan(0), chan(1))
}

pub fn write_rgb(dir: &std::path::Path, size: usize, s: u64) -> std::path::PathBuf {
    let p = dir.join("texture_rgb.png");
    synthetic::textured_rgb(size, size, s).save(&p).unwrap();
    p
}

pub fn load_pair(path: &std::path::Path) -> (ImageGrid, ImageGrid) {
    (
        rpreg::image_io::load_image(path, Channel::Red).unwrap(),
        rpreg::image_io::load_image(path, Channel::Green).unwrap(),
    )
}
