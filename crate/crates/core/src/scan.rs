//! Exhaustive abstainer-to-support neighbor scans.
//!
//! For cosine distance the bulk of the work is an f32 GEMM used only as a
//! screen: a pair is decided from the f32 value when it is farther than `eps`
//! from every threshold that matters, and from the exact f64
//! `cosine_distance` otherwise. Results are therefore identical to a scalar
//! scan with `EmbeddingSet::distance`, whichever path is taken.

use rayon::prelude::*;

use crate::embedding::{cosine_from_parts, dot, euclidean_distance, norm, DistanceMetric, EmbeddingSet};
use crate::votes::VoteMatrix;

const QUERY_BLOCK: usize = 128;
const ROW_BLOCK: usize = 256;
const COL_TILE: usize = 4096;

pub(crate) struct Geometry<'a> {
    emb: &'a EmbeddingSet,
    norms: Vec<f64>,
    unit: Vec<f32>,
    eps: f64,
}

impl<'a> Geometry<'a> {
    pub(crate) fn new(emb: &'a EmbeddingSet) -> Self {
        let d = emb.d();
        match emb.metric() {
            DistanceMetric::Cosine => {
                let norms: Vec<f64> = (0..emb.n()).map(|i| norm(emb.row(i))).collect();
                let mut unit = Vec::with_capacity(emb.n() * d);
                for i in 0..emb.n() {
                    unit.extend(emb.row(i).iter().map(|x| (x / norms[i]) as f32));
                }
                // f32 rounding of the unit rows plus the summation error of a
                // length-d dot product is below (d + 8) * 2^-24; take twice that.
                let eps = (d as f64 + 8.0) * f32::EPSILON as f64;
                Geometry { emb, norms, unit, eps }
            }
            DistanceMetric::Euclidean => Geometry { emb, norms: Vec::new(), unit: Vec::new(), eps: 0.0 },
        }
    }

    #[inline]
    pub(crate) fn exact(&self, i: usize, j: usize) -> f64 {
        match self.emb.metric() {
            DistanceMetric::Cosine => {
                cosine_from_parts(dot(self.emb.row(i), self.emb.row(j)), self.norms[i], self.norms[j])
            }
            DistanceMetric::Euclidean => euclidean_distance(self.emb.row(i), self.emb.row(j)),
        }
    }

    fn screened(&self) -> bool {
        self.eps > 0.0
    }

    fn gather(&self, idx: &[usize]) -> Vec<f32> {
        let d = self.emb.d();
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            out.extend_from_slice(&self.unit[i * d..(i + 1) * d]);
        }
        out
    }

    /// `out[r * cols + c] = <a_r, b_c>` for contiguous f32 unit rows.
    fn approx_block(&self, a: &[f32], rows: usize, b: &[f32], cols: usize, out: &mut Vec<f32>) {
        let d = self.emb.d();
        out.clear();
        out.resize(rows * cols, 0.0);
        // SAFETY: a is rows x d row-major, b is cols x d row-major (read as its
        // transpose), out is rows x cols row-major; all lengths checked by construction.
        unsafe {
            matrixmultiply::sgemm(
                rows,
                d,
                cols,
                1.0,
                a.as_ptr(),
                d as isize,
                1,
                b.as_ptr(),
                1,
                d as isize,
                0.0,
                out.as_mut_ptr(),
                cols as isize,
                1,
            );
        }
    }
}

/// Radii of interest for one extended source, ascending and positive.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Plan {
    pub source: usize,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Strategy {
    Auto,
    PerSource,
    Symmetric,
}

/// For every (plan, abstaining point): the nearest support point within the
/// largest radius, and per-bin vote sums where bin g holds distances in
/// `(radii[g-1], radii[g]]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NeighborSummary {
    n: usize,
    plans: Vec<Plan>,
    nearest: Vec<(f64, u32)>,
    hist: Vec<i32>,
    hist_offsets: Vec<usize>,
    track_nearest: bool,
    track_sums: bool,
}

const NONE: u32 = u32::MAX;

impl NeighborSummary {
    fn empty(n: usize, plans: Vec<Plan>, track_nearest: bool, track_sums: bool) -> Self {
        let mut hist_offsets = Vec::with_capacity(plans.len() + 1);
        let mut off = 0;
        for p in &plans {
            hist_offsets.push(off);
            if track_sums {
                off += n * p.radii.len();
            }
        }
        hist_offsets.push(off);
        let nearest = vec![(f64::INFINITY, NONE); plans.len() * n];
        NeighborSummary { n, plans, nearest, hist: vec![0; off], hist_offsets, track_nearest, track_sums }
    }

    fn slot(&mut self, k: usize, p: usize) -> (&mut (f64, u32), &mut [i32]) {
        let w = if self.track_sums { self.plans[k].radii.len() } else { 0 };
        let base = self.hist_offsets[k] + p * w;
        (&mut self.nearest[k * self.n + p], &mut self.hist[base..base + w])
    }

    pub(crate) fn plans(&self) -> &[Plan] {
        &self.plans
    }

    /// Nearest support point of source `plans[k]` to `p` within the largest radius.
    pub(crate) fn nearest(&self, k: usize, p: usize) -> Option<(f64, usize)> {
        assert!(self.track_nearest);
        let (d, i) = self.nearest[k * self.n + p];
        (i != NONE).then_some((d, i as usize))
    }

    /// Sum of support votes within `radii[g]` of `p` (cumulative over bins).
    pub(crate) fn vote_sum(&self, k: usize, p: usize, g: usize) -> i32 {
        assert!(self.track_sums);
        let gl = self.plans[k].radii.len();
        self.hist[self.hist_offsets[k] + p * gl + g]
    }

    fn merge(mut self, other: &NeighborSummary) -> Self {
        for (a, b) in self.nearest.iter_mut().zip(&other.nearest) {
            if (b.0, b.1) < (a.0, a.1) {
                *a = *b;
            }
        }
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += *b;
        }
        self
    }

    fn cumulate(&mut self) {
        if !self.track_sums {
            return;
        }
        for (k, plan) in self.plans.iter().enumerate() {
            let gl = plan.radii.len();
            let base = self.hist_offsets[k];
            for p in 0..self.n {
                let h = &mut self.hist[base + p * gl..base + (p + 1) * gl];
                for g in 1..gl {
                    h[g] += h[g - 1];
                }
            }
        }
    }
}

struct Visitor<'g, 'a> {
    geo: &'g Geometry<'a>,
    votes: &'g VoteMatrix,
    plans: &'g [Plan],
    track_nearest: bool,
    track_sums: bool,
}

impl Visitor<'_, '_> {
    /// Folds support point `q` into the state of abstainer `p` for plan `k`.
    /// `approx` is within `eps` of the exact distance; `exact` caches it.
    #[inline]
    fn visit(
        &self,
        k: usize,
        p: usize,
        q: usize,
        approx: f64,
        exact: &mut f64,
        nearest: &mut (f64, u32),
        hist: &mut [i32],
    ) {
        let radii = &self.plans[k].radii;
        let eps = self.geo.eps;
        let rmax = radii[radii.len() - 1];
        if approx > rmax + eps {
            return;
        }
        let get = |e: &mut f64| {
            if e.is_nan() {
                *e = self.geo.exact(p, q);
            }
            *e
        };
        if self.track_sums {
            let g = if eps == 0.0 {
                radii.partition_point(|&r| r < approx)
            } else {
                let lo = radii.partition_point(|&r| r < approx - eps);
                let hi = radii.partition_point(|&r| r < approx + eps);
                if lo == hi {
                    lo
                } else {
                    let d = get(exact);
                    radii.partition_point(|&r| r < d)
                }
            };
            if g < radii.len() {
                hist[g] += self.votes.get(q, self.plans[k].source) as i32;
            }
        }
        if self.track_nearest && approx - eps <= nearest.0 {
            let d = get(exact);
            if d <= rmax && (d, q as u32) < (nearest.0, nearest.1) {
                *nearest = (d, q as u32);
            }
        }
    }
}

pub(crate) fn summarize(
    geo: &Geometry,
    votes: &VoteMatrix,
    plans: Vec<Plan>,
    track_nearest: bool,
    track_sums: bool,
    strategy: Strategy,
) -> NeighborSummary {
    let n = votes.n();
    for p in &plans {
        assert!(!p.radii.is_empty() && p.radii.windows(2).all(|w| w[0] < w[1]) && p.radii[0] > 0.0);
    }
    let strategy = match strategy {
        Strategy::Auto => {
            let per: f64 = plans
                .iter()
                .map(|p| {
                    let s = votes.coverage(p.source) * n as f64;
                    s * (n as f64 - s)
                })
                .sum();
            let sym = n as f64 * (n as f64 - 1.0) / 2.0;
            if plans.len() <= 64 && sym < per {
                Strategy::Symmetric
            } else {
                Strategy::PerSource
            }
        }
        s => s,
    };
    let vis = Visitor { geo, votes, plans: &plans, track_nearest, track_sums };
    let mut out = match strategy {
        Strategy::Symmetric => symmetric(&vis, n),
        _ => per_source(&vis, n),
    };
    out.cumulate();
    out
}

fn per_source(vis: &Visitor, n: usize) -> NeighborSummary {
    let mut out = NeighborSummary::empty(n, vis.plans.to_vec(), vis.track_nearest, vis.track_sums);
    for (k, plan) in vis.plans.iter().enumerate() {
        let support = vis.votes.support(plan.source);
        let queries = vis.votes.abstains(plan.source);
        if support.is_empty() || queries.is_empty() {
            continue;
        }
        let gl = plan.radii.len();
        let sup_rows = if vis.geo.screened() { vis.geo.gather(&support) } else { Vec::new() };
        let blocks: Vec<(Vec<(f64, u32)>, Vec<i32>)> = queries
            .par_chunks(QUERY_BLOCK)
            .map(|block| {
                let mut nearest = vec![(f64::INFINITY, NONE); block.len()];
                let w = if vis.track_sums { gl } else { 0 };
                let mut hist = vec![0i32; block.len() * w];
                let qrows = if vis.geo.screened() { vis.geo.gather(block) } else { Vec::new() };
                let mut buf = Vec::new();
                for (t0, tile) in support.chunks(COL_TILE).enumerate().map(|(t, c)| (t * COL_TILE, c)) {
                    if vis.geo.screened() {
                        let d = vis.geo.emb.d();
                        vis.geo.approx_block(&qrows, block.len(), &sup_rows[t0 * d..(t0 + tile.len()) * d], tile.len(), &mut buf);
                    }
                    for (r, &p) in block.iter().enumerate() {
                        let h = &mut hist[r * w..(r + 1) * w];
                        for (c, &q) in tile.iter().enumerate() {
                            let mut exact = f64::NAN;
                            let approx = if vis.geo.screened() {
                                1.0 - buf[r * tile.len() + c] as f64
                            } else {
                                exact = vis.geo.exact(p, q);
                                exact
                            };
                            vis.visit(k, p, q, approx, &mut exact, &mut nearest[r], h);
                        }
                    }
                }
                (nearest, hist)
            })
            .collect();
        for (block, (nearest, hist)) in queries.chunks(QUERY_BLOCK).zip(blocks) {
            for (r, &p) in block.iter().enumerate() {
                let w = hist.len() / block.len();
                let (nn, h) = out.slot(k, p);
                *nn = nearest[r];
                h.copy_from_slice(&hist[r * w..(r + 1) * w]);
            }
        }
    }
    out
}

fn symmetric(vis: &Visitor, n: usize) -> NeighborSummary {
    let plans = vis.plans;
    assert!(plans.len() <= 64);
    let masks: Vec<u64> = (0..n)
        .map(|i| {
            plans
                .iter()
                .enumerate()
                .filter(|(_, p)| vis.votes.get(i, p.source) != 0)
                .fold(0u64, |acc, (k, _)| acc | (1 << k))
        })
        .collect();
    let gmax = plans.iter().map(|p| *p.radii.last().unwrap()).fold(0.0, f64::max) + vis.geo.eps;
    let d = vis.geo.emb.d();
    let nblocks = n.div_ceil(ROW_BLOCK);
    let empty = || NeighborSummary::empty(n, plans.to_vec(), vis.track_nearest, vis.track_sums);
    (0..nblocks)
        .into_par_iter()
        .fold(empty, |mut acc, b| {
            let i0 = b * ROW_BLOCK;
            let i1 = (i0 + ROW_BLOCK).min(n);
            let mut buf = Vec::new();
            let mut c0 = i0;
            while c0 < n {
                let c1 = (c0 + COL_TILE).min(n);
                if vis.geo.screened() {
                    vis.geo.approx_block(&vis.geo.unit[i0 * d..i1 * d], i1 - i0, &vis.geo.unit[c0 * d..c1 * d], c1 - c0, &mut buf);
                }
                for p in i0..i1 {
                    let mp = masks[p];
                    for q in c0.max(p + 1)..c1 {
                        let mq = masks[q];
                        let need_p = mq & !mp;
                        let need_q = mp & !mq;
                        if need_p | need_q == 0 {
                            continue;
                        }
                        let mut exact = f64::NAN;
                        let approx = if vis.geo.screened() {
                            1.0 - buf[(p - i0) * (c1 - c0) + (q - c0)] as f64
                        } else {
                            exact = vis.geo.exact(p, q);
                            exact
                        };
                        if approx > gmax {
                            continue;
                        }
                        for (bits, a, s) in [(need_p, p, q), (need_q, q, p)] {
                            let mut bits = bits;
                            while bits != 0 {
                                let k = bits.trailing_zeros() as usize;
                                bits &= bits - 1;
                                let (nearest, hist) = acc.slot(k, a);
                                vis.visit(k, a, s, approx, &mut exact, nearest, hist);
                            }
                        }
                    }
                }
                c0 = c1;
            }
            acc
        })
        .reduce_with(|a, b| a.merge(&b))
        .unwrap_or_else(empty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_instance(seed: u64, n: usize, d: usize, m: usize, metric: DistanceMetric) -> (EmbeddingSet, VoteMatrix) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let emb = EmbeddingSet::new(n, d, data).unwrap().with_metric(metric);
        let votes: Vec<i8> = (0..n * m)
            .map(|_| if rng.random_bool(0.3) { if rng.random_bool(0.5) { 1 } else { -1 } } else { 0 })
            .collect();
        (emb, VoteMatrix::new(n, m, votes).unwrap())
    }

    #[test]
    fn both_paths_agree_exactly() {
        for (seed, metric) in [(1, DistanceMetric::Cosine), (2, DistanceMetric::Euclidean), (3, DistanceMetric::Cosine)] {
            let (emb, votes) = random_instance(seed, 700, 6, 4, metric);
            let geo = Geometry::new(&emb);
            let plans: Vec<Plan> = (0..4)
                .map(|j| Plan { source: j, radii: vec![0.05, 0.2, 0.4 + 0.1 * j as f64, 1.3] })
                .collect();
            let a = summarize(&geo, &votes, plans.clone(), true, true, Strategy::PerSource);
            let b = summarize(&geo, &votes, plans, true, true, Strategy::Symmetric);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn matches_scalar_scan() {
        let (emb, votes) = random_instance(7, 300, 16, 2, DistanceMetric::Cosine);
        let geo = Geometry::new(&emb);
        let radii = vec![0.5, 0.8, 1.0];
        let s = summarize(&geo, &votes, vec![Plan { source: 1, radii: radii.clone() }], true, true, Strategy::Symmetric);
        for p in votes.abstains(1) {
            let mut best: Option<(f64, usize)> = None;
            let mut sums = [0i32; 3];
            for q in votes.support(1) {
                let dd = emb.distance(p, q);
                for (g, &r) in radii.iter().enumerate() {
                    if dd <= r {
                        sums[g] += votes.get(q, 1) as i32;
                    }
                }
                if dd <= 1.0 && best.is_none_or(|b| (dd, q) < b) {
                    best = Some((dd, q));
                }
            }
            assert_eq!(s.nearest(0, p), best);
            for g in 0..3 {
                assert_eq!(s.vote_sum(0, p, g), sums[g]);
            }
        }
    }
}
