//! Seeded sampling. Large sample counts are split into fixed-size chunks; chunk `c` draws from
//! its own ChaCha stream of the master seed, so the sample set is the same whatever the thread
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::par;

pub const CHUNK: usize = 256;

pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Draws `count` items, item `k` coming from the rng of chunk `k / CHUNK`.
pub fn chunked<T, F>(seed: u64, count: usize, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    let chunks = count.div_ceil(CHUNK);
    par::map_range(chunks, |c| {
        let mut rng = chunk_rng(seed, c);
        let len = CHUNK.min(count - c * CHUNK);
        (0..len).map(|_| draw(&mut rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Uniform point in the closed ball `B_radius(0)` of R^dim.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::linalg::norm(&dir);
        if n > 1e-300 {
            let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
            return dir.iter().map(|d| d * r / n).collect();
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Start points for orbit probes: the 2·dim extreme axis points `±radius·e_j` first, then
/// Halton points (with a seeded Cranley-Patterson shift) that fall inside `B_radius(0)`.
pub fn ball_starts(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton starts support dim <= {}", PRIMES.len());
    let mut out = Vec::with_capacity(count);
    'axes: for j in 0..dim {
        for sign in [1.0, -1.0] {
            if out.len() == count {
                break 'axes;
            }
            let mut p = vec![0.0; dim];
            p[j] = sign * radius;
            out.push(p);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let mut k = 1u64;
    while out.len() < count {
        let p: Vec<f64> = (0..dim)
            .map(|j| {
                let u = (radical_inverse(k, PRIMES[j]) + shift[j]).fract();
                radius * (2.0 * u - 1.0)
            })
            .collect();
        k += 1;
        if crate::linalg::norm(&p) <= radius {
            out.push(p);
        }
    }
    out
}
