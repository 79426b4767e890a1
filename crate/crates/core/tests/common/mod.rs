//! Helpers shared by the integration tests: an independent, deliberately
//! naive descriptor implementation and generators for random inputs.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigrid_core::synth::{generate_scene, scene_seed, SceneParams};
use sigrid_core::{DescriptorConfig, Image, Mask, Superpixelation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| <= rel * max(|a|, |b|)`, with an absolute floor for values
/// that are zero up to rounding.
pub fn rel_close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull area by gift wrapping over every point, then the shoelace
/// formula.
pub fn gift_wrap_area(points: &[(i64, i64)]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let start = pts[0];
    let mut hull = vec![start];
    let mut current = start;
    loop {
        let mut next = if pts[0] == current { pts[1] } else { pts[0] };
        for &p in &pts {
            if p == current {
                continue;
            }
            let c = cross(current, next, p);
            let farther = {
                let d = |q: (i64, i64)| (q.0 - current.0).pow(2) + (q.1 - current.1).pow(2);
                d(p) > d(next)
            };
            if c < 0 || (c == 0 && farther) {
                next = p;
            }
        }
        if next == start {
            break;
        }
        hull.push(next);
        current = next;
    }
    let mut twice = 0i64;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        twice += a.0 * b.1 - b.0 * a.1;
    }
    twice.abs() as f64 / 2.0
}

/// Central moment `mu_pq` straight from the definition.
fn mu(pixels: &[(usize, usize)], p: i32, q: i32) -> f64 {
    let n = pixels.len() as f64;
    let xb = pixels.iter().map(|&(x, _)| x as f64).sum::<f64>() / n;
    let yb = pixels.iter().map(|&(_, y)| y as f64).sum::<f64>() / n;
    pixels
        .iter()
        .map(|&(x, y)| (x as f64 - xb).powi(p) * (y as f64 - yb).powi(q))
        .sum()
}

/// Hu's invariants in their textbook expanded form.
pub fn naive_hu(pixels: &[(usize, usize)]) -> [f64; 7] {
    let m00 = pixels.len() as f64;
    let eta = |p: i32, q: i32| mu(pixels, p, q) / m00.powf(1.0 + (p + q) as f64 / 2.0);
    let (n20, n02, n11) = (eta(2, 0), eta(0, 2), eta(1, 1));
    let (n30, n03, n21, n12) = (eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2));
    let phi1 = n20 + n02;
    let phi2 = (n20 - n02).powi(2) + 4.0 * n11.powi(2);
    let phi3 = (n30 - 3.0 * n12).powi(2) + (3.0 * n21 - n03).powi(2);
    let phi4 = (n30 + n12).powi(2) + (n21 + n03).powi(2);
    let phi5 = (n30 - 3.0 * n12) * (n30 + n12) * ((n30 + n12).powi(2) - 3.0 * (n21 + n03).powi(2))
        + (3.0 * n21 - n03) * (n21 + n03) * (3.0 * (n30 + n12).powi(2) - (n21 + n03).powi(2));
    let phi6 = (n20 - n02) * ((n30 + n12).powi(2) - (n21 + n03).powi(2))
        + 4.0 * n11 * (n30 + n12) * (n21 + n03);
    let phi7 = (3.0 * n21 - n03) * (n30 + n12) * ((n30 + n12).powi(2) - 3.0 * (n21 + n03).powi(2))
        - (n30 - 3.0 * n12) * (n21 + n03) * (3.0 * (n30 + n12).powi(2) - (n21 + n03).powi(2));
    [phi1, phi2, phi3, phi4, phi5, phi6, phi7]
}

pub fn scale_hu(v: f64) -> f64 {
    v.signum() * (1.0 + v.abs() * 1e12).log10() / 12.0
}

/// Per-region descriptors by looping over the whole image once per region.
pub fn naive_descriptors(img: &Image, sp: &Superpixelation, cfg: &DescriptorConfig) -> BTreeMap<u32, Vec<f64>> {
    let (w, h) = sp.dims();
    let mut ids: Vec<u32> = sp.ids().to_vec();
    ids.sort();
    ids.dedup();
    let mut out = BTreeMap::new();
    for id in ids {
        let mut pixels = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if sp.get(x, y) == id {
                    pixels.push((x, y));
                }
            }
        }
        let n = pixels.len() as f64;
        let mut v = Vec::new();
        if cfg.avg_color {
            for ch in 0..3 {
                let s: f64 = pixels.iter().map(|&(x, y)| img.rgb(x, y)[ch] as f64).sum();
                v.push(s / n);
            }
        }
        if cfg.area {
            v.push(n / (w * h) as f64);
        }
        if cfg.width {
            let lo = pixels.iter().map(|p| p.0).min().unwrap();
            let hi = pixels.iter().map(|p| p.0).max().unwrap();
            v.push((hi - lo + 1) as f64 / w as f64);
        }
        if cfg.height {
            let lo = pixels.iter().map(|p| p.1).min().unwrap();
            let hi = pixels.iter().map(|p| p.1).max().unwrap();
            v.push((hi - lo + 1) as f64 / h as f64);
        }
        if cfg.compactness {
            let mut per = 0usize;
            for &(x, y) in &pixels {
                let neighbors = [
                    (x as i64 - 1, y as i64),
                    (x as i64 + 1, y as i64),
                    (x as i64, y as i64 - 1),
                    (x as i64, y as i64 + 1),
                ];
                for (nx, ny) in neighbors {
                    let outside = nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64;
                    if outside || sp.get(nx as usize, ny as usize) != id {
                        per += 1;
                    }
                }
            }
            v.push((4.0 * PI * n / (per * per) as f64).min(1.0));
        }
        if cfg.solidity {
            let corners: Vec<(i64, i64)> = pixels
                .iter()
                .flat_map(|&(x, y)| {
                    let (x, y) = (x as i64, y as i64);
                    [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]
                })
                .collect();
            v.push((n / gift_wrap_area(&corners)).min(1.0));
        }
        if cfg.eccentricity {
            // Pixel-center covariance plus the 1/12 variance of a unit square.
            let a = mu(&pixels, 2, 0) / n + 1.0 / 12.0;
            let c = mu(&pixels, 0, 2) / n + 1.0 / 12.0;
            let b = mu(&pixels, 1, 1) / n;
            let tr = a + c;
            let det = a * c - b * b;
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
            v.push((1.0 - l2 / l1).max(0.0).sqrt());
        }
        if cfg.hu_moments {
            v.extend(naive_hu(&pixels).iter().map(|&p| scale_hu(p)));
        }
        out.insert(id, v);
    }
    out
}

/// Random image and superpixelation of at most 64x64 pixels and 20
/// regions: weighted Voronoi cells sprinkled with stray pixels, so regions
/// can be non-convex or disconnected.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Image, Superpixelation) {
    let w = rng.random_range(1..=64);
    let h = rng.random_range(1..=64);
    let k = rng.random_range(1..=20usize.min(w * h));
    let seeds: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(0.5..2.0),
            )
        })
        .collect();
    let mut ids = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            let best = seeds
                .iter()
                .enumerate()
                .map(|(i, &(sx, sy, wt))| (i, ((x as f64 - sx).powi(2) + (y as f64 - sy).powi(2)) * wt))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            ids[y * w + x] = best as u32 + 1;
        }
    }
    for _ in 0..(w * h / 20) {
        let i = rng.random_range(0..w * h);
        ids[i] = rng.random_range(1..=k as u32);
    }
    let data: Vec<f32> = (0..w * h * 3).map(|_| rng.random_range(0.0f32..=1.0)).collect();
    (
        Image::new(3, w, h, data).unwrap(),
        Superpixelation::new(w, h, ids).unwrap(),
    )
}

/// A filled random star-shaped blob of about `radius` pixels, placed with
/// its bounding box near the origin.
pub fn random_blob(rng: &mut ChaCha8Rng, radius: f64) -> Vec<(usize, usize)> {
    let harmonics: Vec<(f64, f64, f64)> = (2..=4)
        .map(|k| (k as f64, rng.random_range(0.0..0.25 / k as f64 * 2.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let c = radius * 1.6 + 1.0;
    let size = (2.0 * c).ceil() as usize + 1;
    let mut pixels = Vec::new();
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            let t = dy.atan2(dx);
            let r = radius * (1.0 + harmonics.iter().map(|&(k, a, p)| a * (k * t + p).cos()).sum::<f64>());
            if dx.hypot(dy) <= r {
                pixels.push((x, y));
            }
        }
    }
    pixels
}

pub const CORPUS_SEED: u64 = 2024;

/// Deterministic desk-sized corpus of `(stem, image, mask)`.
pub fn desk_corpus(count: usize) -> Vec<(String, Image, Mask)> {
    let params = SceneParams::default();
    (0..count)
        .map(|i| {
            let (img, mask) = generate_scene(&params, scene_seed(CORPUS_SEED, i)).unwrap();
            (sigrid_core::synth::scene_stem(i), img, mask)
        })
        .collect()
}
