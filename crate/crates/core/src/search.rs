//! Global-then-local maximization over compact parameter sets: evaluate a
//! coarse grid, pick the best discrete local maxima, then shrink a stencil
//! around each of them for a fixed number of rounds.
//!
//! Objectives may be non-concave, so every basin selected on the coarse grid
//! is refined on its own and all near-maximizers are reported.

use std::collections::HashMap;

use crate::maxplus::{Bottom, Finite, MaxPlusValue};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    /// Number of coarse local maxima refined.
    pub top_k: usize,
    /// Refinement rounds.
    pub rounds: usize,
    /// Step shrink factor per round.
    pub shrink: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { top_k: 8, rounds: 6, shrink: 0.2 }
    }
}

/// A compact parameter set with a coarse grid and a local stencil.
pub trait Landscape {
    type Point: Clone;

    fn coarse(&self) -> &[Self::Point];
    /// Indices of grid neighbors of coarse point `i`.
    fn coarse_neighbors(&self, i: usize) -> Vec<usize>;
    /// Spacing of the coarse grid.
    fn coarse_step(&self) -> f64;
    /// Feasible points at offsets `-radius*step ..= radius*step` around `center`.
    fn stencil(&self, center: &Self::Point, step: f64, radius: i64) -> Vec<Self::Point>;
    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;
}

#[derive(Clone, Debug)]
pub struct SearchResult<P> {
    pub value: MaxPlusValue,
    pub best: Option<P>,
    /// Every evaluated point within the tolerance of `value`, deduplicated.
    pub near_max: Vec<P>,
}

fn key(v: MaxPlusValue) -> f64 {
    v.to_f64()
}

pub fn maximize<L: Landscape>(
    land: &L,
    objective: impl Fn(&L::Point) -> MaxPlusValue,
    opts: &SearchOptions,
    tol: f64,
) -> SearchResult<L::Point> {
    let coarse = land.coarse();
    let coarse_vals: Vec<MaxPlusValue> = coarse.iter().map(&objective).collect();

    let mut evaluated: Vec<(L::Point, MaxPlusValue)> = Vec::new();

    // discrete local maxima first, then the best remaining points
    let mut order: Vec<usize> = (0..coarse.len()).filter(|&i| !coarse_vals[i].is_bottom()).collect();
    order.sort_by(|&a, &b| key(coarse_vals[b]).total_cmp(&key(coarse_vals[a])).then(a.cmp(&b)));
    let is_local_max = |i: usize| {
        land.coarse_neighbors(i)
            .into_iter()
            .all(|j| coarse_vals[j] <= coarse_vals[i])
    };
    let mut centers: Vec<usize> = order.iter().copied().filter(|&i| is_local_max(i)).take(opts.top_k).collect();
    for &i in &order {
        if centers.len() >= opts.top_k {
            break;
        }
        if !centers.contains(&i) {
            centers.push(i);
        }
    }

    let radius = (1.0 / opts.shrink).ceil() as i64;
    for &c in &centers {
        let mut center = coarse[c].clone();
        let mut center_val = coarse_vals[c];
        let mut step = land.coarse_step();
        for _ in 0..opts.rounds {
            step *= opts.shrink;
            for p in land.stencil(&center, step, radius) {
                let v = objective(&p);
                if v > center_val {
                    center = p.clone();
                    center_val = v;
                }
                evaluated.push((p, v));
            }
        }
    }

    let mut value = Bottom;
    for v in coarse_vals.iter().chain(evaluated.iter().map(|(_, v)| v)) {
        if *v > value {
            value = *v;
        }
    }
    let Finite(top) = value else {
        return SearchResult { value, best: None, near_max: Vec::new() };
    };

    let mut near_max: Vec<L::Point> = Vec::new();
    let mut best: Option<(L::Point, f64)> = None;
    let candidates = coarse
        .iter()
        .zip(coarse_vals.iter())
        .chain(evaluated.iter().map(|(p, v)| (p, v)));
    for (p, v) in candidates {
        let Finite(x) = *v else { continue };
        if best.as_ref().is_none_or(|(_, b)| x > *b) {
            best = Some((p.clone(), x));
        }
        if x >= top - tol && !near_max.iter().any(|q| land.distance(p, q) < 1e-12) {
            near_max.push(p.clone());
        }
    }
    SearchResult { value, best: best.map(|(p, _)| p), near_max }
}

/// All compositions of `m` into `d` nonnegative parts, in lexicographic order.
pub(crate) fn compositions(m: u32, d: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let d = cur.len();
        if pos == d - 1 {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur[pos] = k;
            rec(pos + 1, left - k, cur, out);
        }
    }
    rec(0, m, &mut cur, &mut out);
    out
}

/// Neighbor lookup for a list of compositions: move one unit between two coordinates.
pub(crate) fn composition_neighbors(
    comps: &[Vec<u32>],
    index: &HashMap<Vec<u32>, usize>,
    i: usize,
) -> Vec<usize> {
    let c = &comps[i];
    let d = c.len();
    let mut out = Vec::new();
    for a in 0..d {
        if c[a] == 0 {
            continue;
        }
        for b in 0..d {
            if a == b {
                continue;
            }
            let mut n = c.clone();
            n[a] -= 1;
            n[b] += 1;
            if let Some(&j) = index.get(&n) {
                out.push(j);
            }
        }
    }
    out
}

/// Offsets of a cube stencil in `dims` dimensions with the given radius, or a
/// compass stencil (one axis at a time) when the cube would be too large.
pub(crate) fn stencil_offsets(dims: usize, radius: i64) -> Vec<Vec<i64>> {
    let side = (2 * radius + 1) as usize;
    if dims == 0 {
        return vec![vec![]];
    }
    if side.pow(dims as u32) <= 20_000 {
        let mut out = vec![vec![]];
        for _ in 0..dims {
            let mut next = Vec::with_capacity(out.len() * side);
            for prefix in &out {
                for t in -radius..=radius {
                    let mut v: Vec<i64> = prefix.clone();
                    v.push(t);
                    next.push(v);
                }
            }
            out = next;
        }
        out
    } else {
        let mut out = Vec::new();
        for axis in 0..dims {
            for t in -radius..=radius {
                if t == 0 {
                    continue;
                }
                let mut v = vec![0; dims];
                v[axis] = t;
                out.push(v);
            }
        }
        out
    }
}

/// Moves `center` (a probability vector) by `step * offsets` along the
/// directions `e_i - e_last`, projecting back onto the simplex by clamping.
pub(crate) fn simplex_move(center: &[f64], offsets: &[i64], step: f64) -> Vec<f64> {
    let d = center.len();
    let mut x = center.to_vec();
    let mut shift = 0.0;
    for (i, &t) in offsets.iter().enumerate() {
        let delta = step * t as f64;
        x[i] += delta;
        shift += delta;
    }
    x[d - 1] -= shift;
    if x.iter().any(|&v| v < 0.0) {
        for v in x.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let s: f64 = x.iter().sum();
        for v in x.iter_mut() {
            *v /= s;
        }
    }
    x
}
