use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::splat_model::GaussianSplat;

use super::{check_live, cholesky_factor, ExtractionError, PointCloud};

/// Draws per RNG stream. Each block of this many draws gets its own ChaCha stream keyed by
/// the seed and the block number, so output does not depend on the worker count.
pub const RNG_CHUNK: usize = 4096;

/// Per-splat weight for the first sampling stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleWeighting {
    /// `αᵢ`.
    #[default]
    Alpha,
    /// `αᵢ·sqrt(det Σᵢ)`, the mass of the unnormalized Gaussian term.
    AlphaSqrtDet,
}

/// Vose alias table for O(1) categorical draws.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Builds a table from non-negative weights with a positive sum.
    pub fn new(weights: &[f64]) -> Option<Self> {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        if n == 0 || !(total > 0.0) || !total.is_finite() || weights.iter().any(|w| *w < 0.0) {
            return None;
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        Some(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// `P(i) = αᵢ / Σⱼ αⱼ`.
pub fn opacity_multinomial(splats: &[GaussianSplat]) -> Result<Vec<f64>, ExtractionError> {
    let total: f64 = splats.iter().map(|s| s.opacity).sum();
    if !(total > 0.0) {
        return Err(ExtractionError::AllZeroOpacity);
    }
    Ok(splats.iter().map(|s| s.opacity / total).collect())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two-stage sampling: `n` categorical draws over splats (by opacity, or the chosen
/// weighting), then one point `μᵢ + Lᵢ·z` per draw with `Lᵢ` the Cholesky factor of `Σᵢ`
/// and `z ~ N(0, I)`.
///
/// Points are grouped by source splat in ascending order. Output is identical for a given
/// `(splats, live, n, seed, weighting)` on any number of threads.
pub fn sample_points(
    splats: &[GaussianSplat],
    live: Option<&[bool]>,
    n: usize,
    seed: u64,
    weighting: SampleWeighting,
) -> Result<PointCloud, ExtractionError> {
    check_live(live, splats.len())?;
    let weights: Vec<f64> = splats
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if live.is_some_and(|m| !m[i]) {
                return 0.0;
            }
            match weighting {
                SampleWeighting::Alpha => s.opacity,
                SampleWeighting::AlphaSqrtDet => s.opacity * s.scales.product(),
            }
        })
        .collect();
    let table = AliasTable::new(&weights).ok_or(ExtractionError::AllZeroOpacity)?;
    if n == 0 {
        return Ok(PointCloud {
            points: Vec::new(),
            source_index: Some(Vec::new()),
            colors: None,
        });
    }

    // stage 1: even streams
    let chunks = n.div_ceil(RNG_CHUNK);
    let draws: Vec<Vec<u32>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, 2 * c as u64);
            let len = RNG_CHUNK.min(n - c * RNG_CHUNK);
            (0..len).map(|_| table.sample(&mut rng) as u32).collect()
        })
        .collect();
    let mut counts = vec![0usize; splats.len()];
    for d in draws.iter().flatten() {
        counts[*d as usize] += 1;
    }
    drop(draws);

    let mut factors: Vec<Option<Matrix3<f64>>> = vec![None; splats.len()];
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            factors[i] = Some(cholesky_factor(&splats[i], i)?);
        }
    }
    let source: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
        .collect();

    // stage 2: odd streams
    let mut points = vec![Vector3::zeros(); n];
    points
        .par_chunks_mut(RNG_CHUNK)
        .zip(source.par_chunks(RNG_CHUNK))
        .enumerate()
        .for_each(|(c, (out, src))| {
            let mut rng = stream_rng(seed, 2 * c as u64 + 1);
            for (p, &i) in out.iter_mut().zip(src) {
                let z = Vector3::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                );
                let l = factors[i].as_ref().expect("factor for every drawn splat");
                *p = splats[i].mean + l * z;
            }
        });
    Ok(PointCloud {
        points,
        source_index: Some(source),
        colors: None,
    })
}
