#![allow(dead_code)]

use std::io::Write;
use std::sync::Arc;

use nehari::{Field, GridSpec, PolarGrid, State};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Prints past the test harness capture so the line shows for passing tests too.
pub fn verdict(n: usize, name: &str, passed: bool, detail: &str) {
    let mark = if passed { "PASS" } else { "FAIL" };
    let line = format!("[criterion {n:>2}] {mark} {name}: {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

pub fn grid(n_r: usize, n_theta: usize, order: usize) -> Arc<PolarGrid> {
    PolarGrid::shared(GridSpec::ball(1.0, n_r, n_theta, order)).unwrap()
}

/// Smooth random field vanishing on the outer boundary.
pub fn smooth(grid: &Arc<PolarGrid>, rng: &mut ChaCha8Rng) -> Field {
    let a: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    Field::from_fn(grid, move |r, t| {
        let s = t + phase;
        (1.0 - r * r)
            * (a[0]
                + a[1] * r * s.cos()
                + a[2] * r * s.sin()
                + a[3] * r * r * (2.0 * s).cos()
                + a[4] * r * r * (2.0 * s).sin()
                + a[5] * r.powi(3) * (3.0 * s).cos()
                + a[6] * r * r
                + a[7] * r.powi(4) * (5.0 * s).sin()
                + a[8] * (2.0 * r + s).cos())
    })
}

/// Smooth random field that is nonnegative and not identically zero.
pub fn smooth_nonnegative(grid: &Arc<PolarGrid>, rng: &mut ChaCha8Rng) -> Field {
    let f = smooth(grid, rng);
    let g = smooth(grid, rng);
    f.zip_map(&g, |a, b| a * a + 0.05 * b * b)
}

pub fn random_state(grid: &Arc<PolarGrid>, n: usize, rng: &mut ChaCha8Rng) -> State {
    State::new((0..n).map(|_| smooth(grid, rng)).collect()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
