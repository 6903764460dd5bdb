//! Generators and brute-force reference implementations shared by the
//! integration tests. Nothing here calls into the optimized metric or
//! connectivity code it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use adaptel::{FeatureGrid, GridShape, LabelMap};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise_image(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut r = rng(seed);
    RgbImage::from_fn(w, h, |_, _| Rgb(r.gen::<[u8; 3]>()))
}

/// Random axis-aligned blocks of random constant colors. Returns the image
/// and the block id of every pixel.
pub fn blocks_image(w: u32, h: u32, seed: u64) -> (RgbImage, Vec<u32>) {
    let mut r = rng(seed);
    let xs = cuts(&mut r, w);
    let ys = cuts(&mut r, h);
    let colors: Vec<[u8; 3]> = (0..xs.len() * ys.len()).map(|_| r.gen()).collect();
    let mut ids = Vec::with_capacity((w * h) as usize);
    let img = RgbImage::from_fn(w, h, |x, y| {
        let bx = xs.iter().filter(|&&c| c <= x).count() - 1;
        let by = ys.iter().filter(|&&c| c <= y).count() - 1;
        Rgb(colors[by * xs.len() + bx])
    });
    for y in 0..h {
        for x in 0..w {
            let bx = xs.iter().filter(|&&c| c <= x).count() - 1;
            let by = ys.iter().filter(|&&c| c <= y).count() - 1;
            ids.push((by * xs.len() + bx) as u32);
        }
    }
    (img, ids)
}

fn cuts(r: &mut ChaCha8Rng, len: u32) -> Vec<u32> {
    let mut c = vec![0];
    let mut pos = 0;
    loop {
        pos += r.gen_range(4..=len / 3 + 4);
        if pos >= len {
            break;
        }
        c.push(pos);
    }
    c
}

/// Two regions split by a random staircase boundary: pixel (x, y) is in
/// region 0 when `x < b(y)`, with `1 <= b(y) <= w - 1`. Both regions are
/// 4-connected through the first and last columns.
pub fn two_region_image(w: u32, h: u32, a: [u8; 3], b: [u8; 3], seed: u64) -> (RgbImage, Vec<u32>) {
    let mut r = rng(seed);
    let mut bound = r.gen_range(1..w);
    let mut rows = Vec::new();
    for _ in 0..h {
        let step: i64 = r.gen_range(-2..=2);
        bound = (bound as i64 + step).clamp(1, w as i64 - 1) as u32;
        rows.push(bound);
    }
    let img = RgbImage::from_fn(
        w,
        h,
        |x, y| if x < rows[y as usize] { Rgb(a) } else { Rgb(b) },
    );
    let ids = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y, x)))
        .map(|(y, x)| (x >= rows[y as usize]) as u32)
        .collect();
    (img, ids)
}

/// Voronoi scene: each cell has a base color, a linear shading and a
/// per-cell amount of pixel noise. Returns the image and cell ids.
pub fn scene_image(w: u32, h: u32, cells: usize, seed: u64) -> (RgbImage, Vec<u32>) {
    let mut r = rng(seed);
    let sites: Vec<(f64, f64)> = (0..cells)
        .map(|_| (r.gen_range(0.0..w as f64), r.gen_range(0.0..h as f64)))
        .collect();
    let base: Vec<[f64; 3]> = (0..cells)
        .map(|_| {
            [
                r.gen_range(20.0..235.0),
                r.gen_range(20.0..235.0),
                r.gen_range(20.0..235.0),
            ]
        })
        .collect();
    let noise: Vec<f64> = (0..cells).map(|_| r.gen_range(0.0..30.0)).collect();
    let shade: Vec<(f64, f64)> = (0..cells)
        .map(|_| (r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3)))
        .collect();
    let mut ids = vec![0u32; (w * h) as usize];
    let mut img = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let c = (0..cells)
                .min_by(|&i, &j| {
                    let di = (sites[i].0 - fx).powi(2) + (sites[i].1 - fy).powi(2);
                    let dj = (sites[j].0 - fx).powi(2) + (sites[j].1 - fy).powi(2);
                    di.total_cmp(&dj)
                })
                .unwrap();
            ids[(y * w + x) as usize] = c as u32;
            let s = shade[c].0 * (fx - sites[c].0) + shade[c].1 * (fy - sites[c].1);
            let mut px = [0u8; 3];
            for (k, v) in px.iter_mut().enumerate() {
                let n = r.gen_range(-noise[c]..=noise[c]);
                *v = (base[c][k] + s + n).round().clamp(0.0, 255.0) as u8;
            }
            img.put_pixel(x, y, Rgb(px));
        }
    }
    (img, ids)
}

pub fn lab_volume(shape: GridShape, f: impl Fn(usize, usize, usize) -> [f64; 3]) -> FeatureGrid {
    let data = (0..shape.len())
        .flat_map(|p| {
            let (x, y, t) = shape.coords(p);
            f(x, y, t)
        })
        .collect();
    FeatureGrid::from_vec(shape, 3, data).unwrap()
}

/// Random label map: a few labels, in blocks or per pixel.
pub fn random_label_map(r: &mut ChaCha8Rng, w: usize, h: usize) -> LabelMap {
    let k = r.gen_range(1..8u32);
    let block = r.gen_range(1..5usize);
    let cells: Vec<u32> = (0..w.div_ceil(block) * h.div_ceil(block))
        .map(|_| r.gen_range(0..k))
        .collect();
    let per_row = w.div_ceil(block);
    let labels = (0..w * h)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            cells[(y / block) * per_row + x / block] * 3 + 1
        })
        .collect();
    LabelMap::from_vec(GridShape::planar(w, h).unwrap(), labels).unwrap()
}

// ---- oracles -------------------------------------------------------------

/// Neighbors from coordinates, written independently of the library.
fn coord_neighbors(shape: GridShape, p: usize) -> Vec<usize> {
    let (w, h, d) = (shape.width as i64, shape.height as i64, shape.depth as i64);
    let (x, y, t) = ((p as i64) % w, (p as i64 / w) % h, p as i64 / (w * h));
    let mut out = Vec::new();
    for (dx, dy, dt) in [
        (1, 0, 0),
        (-1, 0, 0),
        (0, 1, 0),
        (0, -1, 0),
        (0, 0, 1),
        (0, 0, -1),
    ] {
        let (nx, ny, nt) = (x + dx, y + dy, t + dt);
        if nx >= 0 && nx < w && ny >= 0 && ny < h && nt >= 0 && nt < d {
            out.push((nx + w * (ny + h * nt)) as usize);
        }
    }
    out
}

/// Labels whose pixels do not form a single connected component.
pub fn disconnected_labels(labels: &LabelMap) -> Vec<u32> {
    let shape = labels.shape();
    let l = labels.as_slice();
    let mut members: HashMap<u32, Vec<usize>> = HashMap::new();
    for (p, &v) in l.iter().enumerate() {
        members.entry(v).or_default().push(p);
    }
    let mut bad = Vec::new();
    for (label, pix) in members {
        let mut seen = vec![false; l.len()];
        let mut stack = vec![pix[0]];
        seen[pix[0]] = true;
        let mut reached = 1;
        while let Some(p) = stack.pop() {
            for n in coord_neighbors(shape, p) {
                if !seen[n] && l[n] == label {
                    seen[n] = true;
                    reached += 1;
                    stack.push(n);
                }
            }
        }
        if reached != pix.len() {
            bad.push(label);
        }
    }
    bad.sort();
    bad
}

/// True when the two labelings induce the same partition.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    let mut ab: HashMap<u32, u32> = HashMap::new();
    let mut ba: HashMap<u32, u32> = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

/// `sum_k max_j |S_k ∩ G_j|` by a double loop over segment and ground-truth
/// ids.
pub fn brute_best_overlap(seg: &[u32], gt: &[u32]) -> usize {
    let s_ids: BTreeSet<u32> = seg.iter().copied().collect();
    let g_ids: BTreeSet<u32> = gt.iter().copied().collect();
    let mut total = 0;
    for &s in &s_ids {
        let mut best = 0;
        for &g in &g_ids {
            let n = seg
                .iter()
                .zip(gt)
                .filter(|(&a, &b)| a == s && b == g)
                .count();
            best = best.max(n);
        }
        total += best;
    }
    total
}

/// Boundary flags: label differs from the +x, +y or +t neighbor.
pub fn brute_boundary(labels: &LabelMap) -> Vec<bool> {
    let s = labels.shape();
    let l = labels.as_slice();
    (0..l.len())
        .map(|p| {
            let (x, y, t) = s.coords(p);
            [(x + 1, y, t), (x, y + 1, t), (x, y, t + 1)]
                .iter()
                .any(|&(a, b, c)| {
                    a < s.width && b < s.height && c < s.depth && l[s.index(a, b, c)] != l[p]
                })
        })
        .collect()
}

/// Count of set `source` pixels with a set `target` pixel in the
/// `(2 eps + 1)`-wide Chebyshev window, by exhaustive scan.
pub fn brute_matched(shape: GridShape, source: &[bool], target: &[bool], eps: usize) -> usize {
    let e = eps as i64;
    let (w, h, d) = (shape.width as i64, shape.height as i64, shape.depth as i64);
    let mut count = 0;
    for (p, _) in source.iter().enumerate().filter(|(_, &s)| s) {
        let (x, y, t) = shape.coords(p);
        let (x, y, t) = (x as i64, y as i64, t as i64);
        let mut hit = false;
        for dt in -e..=e {
            for dy in -e..=e {
                for dx in -e..=e {
                    let (nx, ny, nt) = (x + dx, y + dy, t + dt);
                    if nx >= 0 && nx < w && ny >= 0 && ny < h && nt >= 0 && nt < d {
                        hit |= target[(nx + w * (ny + h * nt)) as usize];
                    }
                }
            }
        }
        count += hit as usize;
    }
    count
}
