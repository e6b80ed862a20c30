#![allow(dead_code)]

use egm::mnist::{Image, LabelledSet, SetSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Seven-segment layout: a top, b upper right, c lower right, d bottom,
// e lower left, f upper left, g middle.
const SEGMENTS: [&str; 10] = ["abcdef", "bc", "abged", "abgcd", "fgbc", "afgcd", "afgedc", "abc", "abcdefg", "abcdfg"];

fn endpoints(seg: char) -> ([f64; 2], [f64; 2]) {
    let (l, r, t, m, b) = (9.0, 18.0, 5.0, 14.0, 23.0);
    match seg {
        'a' => ([l, t], [r, t]),
        'b' => ([r, t], [r, m]),
        'c' => ([r, m], [r, b]),
        'd' => ([l, b], [r, b]),
        'e' => ([l, m], [l, b]),
        'f' => ([l, t], [l, m]),
        _ => ([l, m], [r, m]),
    }
}

/// A seven-segment digit with jittered corners, slant and stroke weight.
pub fn digit(class: u8, rng: &mut impl Rng) -> Image {
    let mut img = Image::zeros(28, 28);
    let slant: f64 = rng.gen_range(-0.25..0.25);
    let width: f64 = rng.gen_range(0.9..1.5);
    let (sx, sy): (f64, f64) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    let mut jitter = |p: [f64; 2]| -> [f64; 2] {
        let (x, y) = (p[0] + rng.gen_range(-0.8..0.8) + sx, p[1] + rng.gen_range(-0.8..0.8) + sy);
        [x - slant * (y - 14.0), y]
    };
    let strokes: Vec<([f64; 2], [f64; 2])> = SEGMENTS[class as usize]
        .chars()
        .map(|s| {
            let (a, b) = endpoints(s);
            (jitter(a), jitter(b))
        })
        .collect();
    for y in 0..28 {
        for x in 0..28 {
            let p = [x as f64, y as f64];
            let d = strokes.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
            let v = (1.0 - (d - width).max(0.0)).clamp(0.0, 1.0);
            img.set(x, y, (v * 255.0).round() / 255.0);
        }
    }
    img
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
    ((p[0] - a[0] - t * vx).powi(2) + (p[1] - a[1] - t * vy).powi(2)).sqrt()
}

/// `per_class` digits of every class, class-major, ids counting from `first_id`.
pub fn digit_set(per_class: usize, seed: u64, first_id: usize, source: SetSource) -> LabelledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for c in 0..10u8 {
        for _ in 0..per_class {
            images.push(digit(c, &mut rng));
            labels.push(c);
        }
    }
    let n = images.len();
    let mut set = LabelledSet::new(images, labels, source).unwrap();
    set.ids = (first_id..first_id + n).collect();
    set
}
