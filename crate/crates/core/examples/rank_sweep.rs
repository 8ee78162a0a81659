//! Prints how the reconstruction error falls as atom frames are added.
//!
//! Targets are random smooth images, so no particular rate is expected; the
//! output is a curve to look at, not a guarantee.
//!
//! ```text
//! cargo run --release -p tpvm --example rank_sweep [viewers] [size]
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use tpvm::{factorize, objective, Image, SolverConfig, TargetSet};

fn smooth_image(r: &mut ChaCha8Rng, size: usize) -> Image {
    let (fx, fy, phase, bias) = (
        r.random_range(0.5..3.0),
        r.random_range(0.5..3.0),
        r.random::<f64>() * TAU,
        r.random::<f64>(),
    );
    Image::from_fn(size, size, |x, y| {
        let u = x as f64 / size as f64;
        let v = y as f64 / size as f64;
        (0.5 * bias + 0.5 * (0.5 + 0.5 * (fx * TAU * u + fy * TAU * v + phase).sin())).clamp(0.0, 1.0)
    })
    .unwrap()
}

fn main() {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("numeric argument"));
    let viewers = args.next().unwrap_or(6);
    let size = args.next().unwrap_or(32);

    let mut r = ChaCha8Rng::seed_from_u64(7);
    let targets = TargetSet::new((0..viewers).map(|_| smooth_image(&mut r, size)).collect()).unwrap();
    let norm = targets
        .images()
        .iter()
        .flat_map(|i| i.pixels())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();

    println!("{:>3}  {:>12}  {:>10}", "M", "relative err", "iterations");
    for m in 1..=viewers + 2 {
        let cfg = SolverConfig {
            max_iterations: 2000,
            restarts: 3,
            ..Default::default()
        };
        let f = factorize(&targets, m, None, &cfg).unwrap();
        let rel = objective(&targets, &f).unwrap() / norm;
        println!("{m:>3}  {rel:>12.4e}  {:>10}", f.objective_history().len() - 1);
    }
}
