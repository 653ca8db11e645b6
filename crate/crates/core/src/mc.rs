//! Monte-Carlo estimate of the waiting time until all segments of a repeater hold a pair.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MIN_TRIALS: u64 = 10_000;
const CHUNK: u64 = 8_192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Each segment retries independently and holds its pair once successful; a trial ends when all
/// 2^N segments are ready. Chunks use independent ChaCha streams so the result is seed-determined.
pub fn mc_waiting_time(nesting: u32, p: f64, trials: u64, seed: u64) -> Result<McEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::Domain {
            name: "trials",
            value: trials as f64,
            domain: "[10000, inf)",
        });
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain {
            name: "P",
            value: p,
            domain: "(0, 1]",
        });
    }
    if nesting > 20 {
        return Err(Error::Domain {
            name: "N",
            value: nesting as f64,
            domain: "[0, 20]",
        });
    }
    let geo = Geometric::new(p).map_err(|e| Error::Config(e.to_string()))?;
    let segments = 1u64 << nesting;
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = CHUNK.min(trials - chunk * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..count {
                let steps = (0..segments).map(|_| geo.sample(&mut rng) + 1).max().unwrap_or(1) as f64;
                s += steps;
                s2 += steps * steps;
            }
            (s, s2)
        })
        .collect();
    let (sum, sum_sq) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), &(s, s2)| (a + s, b + s2));
    let n = trials as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        trials,
    })
}
