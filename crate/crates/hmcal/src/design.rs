//! Space-filling designs: maximin Latin hypercubes for training sets, plain
//! Latin hypercubes for the large screening test sets, greedy maximin
//! subsetting and block-stratified index draws.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::rng::{rng_for, Stream};
use crate::sim::DesignPoint;

/// Role of a design set inside the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignRole {
    Initial,
    Test,
    PlausibleSubset,
}

/// A set of points in [0, 1]^d.
#[derive(Debug, Clone)]
pub struct DesignSet {
    points: Vec<DesignPoint>,
    d: usize,
    role: DesignRole,
}

impl DesignSet {
    pub fn new(points: Vec<DesignPoint>, d: usize, role: DesignRole) -> Self {
        debug_assert!(points.iter().all(|p| p.dim() == d));
        Self { points, d, role }
    }

    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<DesignPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn role(&self) -> DesignRole {
        self.role
    }

    /// Smallest pairwise Euclidean distance; +inf for fewer than 2 points.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                best = best.min(self.points[i].distance(&self.points[j]));
            }
        }
        best
    }
}

/// Within-stratum placement for Latin hypercube draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Uniform jitter inside each stratum (the default).
    Jittered,
    /// Stratum midpoints; useful for reproducible textbook cases.
    Midpoint,
}

/// One random Latin hypercube: each coordinate gets a random permutation of
/// the n strata, one point per stratum.
fn lhd_once(n: usize, d: usize, placement: Placement, rng: &mut ChaCha12Rng) -> Vec<DesignPoint> {
    let mut coords = vec![vec![0.0f64; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for k in 0..d {
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            let offset = match placement {
                Placement::Jittered => rng.random::<f64>(),
                Placement::Midpoint => 0.5,
            };
            coords[i][k] = (s as f64 + offset) / n as f64;
        }
    }
    coords
        .into_iter()
        .map(|c| DesignPoint::new(c).expect("LHD coordinates lie in [0,1]"))
        .collect()
}

/// Maximin Latin hypercube design: among `restarts` random LHDs, the one
/// with the largest minimum pairwise distance (ties broken by lowest
/// restart index). Candidates are scored in parallel; each restart draws
/// from its own derived stream so the result does not depend on scheduling.
pub fn lhd_maximin(
    n: usize,
    d: usize,
    seed: u64,
    restarts: usize,
    placement: Placement,
) -> DesignSet {
    assert!(n >= 1 && d >= 1 && restarts >= 1);
    let scored: Vec<(f64, Vec<DesignPoint>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(seed, Stream::LhdRestart, r as u64);
            let pts = lhd_once(n, d, placement, &mut rng);
            let set = DesignSet::new(pts, d, DesignRole::Initial);
            (set.min_pairwise_distance(), set.into_points())
        })
        .collect();
    let mut best = 0usize;
    for i in 1..scored.len() {
        if scored[i].0 > scored[best].0 {
            best = i;
        }
    }
    DesignSet::new(scored.into_iter().nth(best).expect("nonempty").1, d, DesignRole::Initial)
}

/// Large random screening set: a single Latin hypercube of size M.
pub fn random_test_set(m: usize, d: usize, seed: u64) -> DesignSet {
    assert!(m >= 1 && d >= 1);
    let mut rng = rng_for(seed, Stream::TestSet, 0);
    let pts = lhd_once(m, d, Placement::Jittered, &mut rng);
    DesignSet::new(pts, d, DesignRole::Test)
}

/// Greedy maximin subset: seed with the farthest pair, then repeatedly add
/// the candidate whose minimum distance to the chosen set is largest. Ties
/// break toward the lowest candidate index.
pub fn maximin_subset(candidates: &DesignSet, k: usize) -> DesignSet {
    assert!(k <= candidates.len());
    let pts = candidates.points();
    if k == pts.len() {
        return DesignSet::new(pts.to_vec(), candidates.dim(), DesignRole::PlausibleSubset);
    }
    if k == 0 {
        return DesignSet::new(Vec::new(), candidates.dim(), DesignRole::PlausibleSubset);
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    if k == 1 {
        chosen.push(0);
    } else {
        // farthest pair, lowest indices on ties
        let (mut bi, mut bj, mut bd) = (0usize, 1usize, f64::NEG_INFINITY);
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let dist = pts[i].distance(&pts[j]);
                if dist > bd {
                    (bi, bj, bd) = (i, j, dist);
                }
            }
        }
        chosen.push(bi);
        chosen.push(bj);
    }
    let mut min_dist: Vec<f64> = pts
        .iter()
        .map(|p| chosen.iter().map(|&c| p.distance(&pts[c])).fold(f64::INFINITY, f64::min))
        .collect();
    while chosen.len() < k {
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for (i, &score) in min_dist.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        chosen.push(best);
        for (i, md) in min_dist.iter_mut().enumerate() {
            *md = md.min(pts[i].distance(&pts[best]));
        }
    }
    chosen.sort_unstable();
    DesignSet::new(
        chosen.into_iter().map(|i| pts[i].clone()).collect(),
        candidates.dim(),
        DesignRole::PlausibleSubset,
    )
}

/// Draws `tk` distinct 1-based time indices, one uniformly from each of
/// `tk` equal consecutive blocks of {1, ..., l}, sorted ascending.
pub fn variable_dps(tk: usize, l: usize, seed: u64) -> Vec<usize> {
    assert!(tk >= 1 && tk <= l);
    let mut rng = rng_for(seed, Stream::Dps, 0);
    let mut out = Vec::with_capacity(tk);
    for j in 0..tk {
        let lo = (j * l) / tk + 1; // 1-based block start
        let hi = ((j + 1) * l) / tk; // 1-based block end (inclusive)
        out.push(rng.random_range(lo..=hi));
    }
    out
}
