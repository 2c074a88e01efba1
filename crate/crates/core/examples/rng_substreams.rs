//! Named substreams: independent of draw order and of each other.

use lmselect::rng::{derive_seed, substream, DEFAULT_SEED};
use rand::Rng;

fn main() {
    let mut a = substream(DEFAULT_SEED, "demo", 0);
    let mut b = substream(DEFAULT_SEED, "demo", 1);
    let xs: Vec<u32> = (0..4).map(|_| a.random_range(0..100)).collect();
    let ys: Vec<u32> = (0..4).map(|_| b.random_range(0..100)).collect();
    println!("demo/0 {xs:?}");
    println!("demo/1 {ys:?}");

    let mut again = substream(DEFAULT_SEED, "demo", 0);
    let replay: Vec<u32> = (0..4).map(|_| again.random_range(0..100)).collect();
    assert_eq!(xs, replay);

    println!("derived seed for demo/0: {}", derive_seed(DEFAULT_SEED, "demo", 0));
}
