//! Wasserstein-1 distance between cylinder measures of equal depth under `d_γ`.
//!
//! On depth-`n` words `d_γ` is an ultrametric and therefore a tree metric: a
//! word is a leaf of the prefix tree, and the edge from a length-`j` prefix to
//! a length-`(j+1)` prefix carries weight `w_j`. W1 is then
//! `Σ_edges w_j |μ(subtree) − ν(subtree)|`. A transportation simplex solver is
//! kept as an independent oracle for small instances.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::shift::{code_distance, dual_apply, CylinderMeasure, DepthKFunction, Jacobian, ShiftSpace};

/// Largest number of words the LP oracle accepts.
pub const LP_MAX_WORDS: usize = 1024;
const OPT_TOL: f64 = 1e-9;

/// Edge weights of the prefix tree that realizes `d_γ` on depth-`n` words.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixTreeMetric {
    space: ShiftSpace,
    depth: usize,
    weights: Vec<f64>,
}

impl PrefixTreeMetric {
    pub fn new(space: &ShiftSpace, depth: usize) -> Self {
        let g = space.gamma();
        let weights = (0..depth)
            .map(|j| {
                if j + 1 == depth {
                    g.powi(j as i32) / 2.0
                } else {
                    (g.powi(j as i32) - g.powi(j as i32 + 1)) / 2.0
                }
            })
            .collect();
        Self { space: *space, depth, weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Path length between two leaves whose first difference is at index `level`.
    pub fn leaf_distance(&self, level: usize) -> f64 {
        2.0 * self.weights[level..].iter().sum::<f64>()
    }

    /// The `d_γ` distance between depth-`n` words and the underlying infinite
    /// sequences can differ by at most this much.
    pub fn truncation(&self) -> f64 {
        self.space.gamma().powi(self.depth as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    TreeClosedForm,
    LpOracle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportReport {
    pub w1: f64,
    pub method: Method,
    /// A potential with `|f|_γ ≤ 1` and `0 ≤ f ≤ 1` that certifies `w1`.
    pub potential: Option<DepthKFunction>,
    /// Depth truncation bound `γ^n`.
    pub truncation: f64,
}

fn check_pair(mu: &CylinderMeasure, nu: &CylinderMeasure, space: &ShiftSpace) -> Result<()> {
    space.check_same(&mu.space())?;
    space.check_same(&nu.space())?;
    if mu.depth() != nu.depth() {
        return Err(Error::DepthMismatch(mu.depth(), nu.depth()));
    }
    Ok(())
}

/// Exact W1 of the depth-`n` quotient by the prefix-tree formula.
pub fn w1_tree(mu: &CylinderMeasure, nu: &CylinderMeasure, space: &ShiftSpace) -> Result<f64> {
    check_pair(mu, nu, space)?;
    let tree = PrefixTreeMetric::new(space, mu.depth());
    let d = space.d();
    let mut diff: Vec<f64> = mu.masses().iter().zip(nu.masses()).map(|(a, b)| a - b).collect();
    let mut total = 0.0;
    // leaves first, then aggregate one level at a time
    for j in (0..mu.depth()).rev() {
        total += tree.weights[j] * diff.iter().map(|x| x.abs()).sum::<f64>();
        diff = diff.chunks(d).map(|c| c.iter().sum()).collect();
    }
    Ok(total)
}

pub fn w1_tree_report(mu: &CylinderMeasure, nu: &CylinderMeasure, space: &ShiftSpace) -> Result<TransportReport> {
    Ok(TransportReport {
        w1: w1_tree(mu, nu, space)?,
        method: Method::TreeClosedForm,
        potential: None,
        truncation: space.gamma().powi(mu.depth() as i32),
    })
}

/// W1 by solving the transportation problem directly, with a dual certificate.
pub fn w1_lp_oracle(mu: &CylinderMeasure, nu: &CylinderMeasure, space: &ShiftSpace) -> Result<TransportReport> {
    check_pair(mu, nu, space)?;
    let n = mu.depth();
    let size = mu.masses().len();
    if size > LP_MAX_WORDS {
        return Err(Error::TooLarge(format!("{size} words > {LP_MAX_WORDS} for the LP oracle")));
    }
    let truncation = space.gamma().powi(n as i32);
    // cancel common mass word by word
    let mut rows = Vec::new();
    let mut supply = Vec::new();
    let mut cols = Vec::new();
    let mut demand = Vec::new();
    for (w, (a, b)) in mu.masses().iter().zip(nu.masses()).enumerate() {
        if a > b {
            rows.push(w);
            supply.push(a - b);
        } else if b > a {
            cols.push(w);
            demand.push(b - a);
        }
    }
    if rows.is_empty() || cols.is_empty() {
        let zero = DepthKFunction::new(space.d(), n, vec![0.0; size])?;
        return Ok(TransportReport { w1: 0.0, method: Method::LpOracle, potential: Some(zero), truncation });
    }
    let cost: Vec<Vec<f64>> =
        rows.iter().map(|&r| cols.iter().map(|&c| code_distance(r, c, n, space)).collect()).collect();
    let sol = transportation_simplex(&supply, &demand, &cost);

    // c-transform of the column potentials: f(x) = min_j [c(x, j) − v_j]
    let mut f: Vec<f64> = (0..size)
        .map(|x| {
            cols.iter()
                .zip(&sol.v)
                .map(|(&c, v)| code_distance(x, c, n, space) - v)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    for x in f.iter_mut() {
        *x -= lo;
    }
    let potential = DepthKFunction::new(space.d(), n, f)?;
    Ok(TransportReport { w1: sol.cost, method: Method::LpOracle, potential: Some(potential), truncation })
}

struct TransportSolution {
    cost: f64,
    v: Vec<f64>,
}

/// Transportation simplex: northwest-corner start, MODI potentials, Dantzig
/// pricing with lexicographic ties, switching to Bland's rule after a long run
/// of degenerate pivots.
fn transportation_simplex(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> TransportSolution {
    let m = supply.len();
    let n = demand.len();
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    // absorb rounding so totals agree exactly
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if sa > sb {
        b[n - 1] += sa - sb;
    } else {
        a[m - 1] += sb - sa;
    }

    // basis cells (i, j) with flow x
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]).max(0.0);
        basis.push((i, j, x));
        a[i] -= x;
        b[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut in_basis = vec![vec![usize::MAX; n]; m];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        in_basis[i][j] = k;
    }
    let mut degenerate_run = 0usize;
    let bland_after = 50 * (m + n);
    let max_pivots = 200 * (m + n) * (m + n);
    let (mut u, mut v) = (vec![0.0; m], vec![0.0; n]);
    for _ in 0..max_pivots {
        potentials(&basis, cost, m, n, &mut u, &mut v);
        let bland = degenerate_run > bland_after;
        let mut enter: Option<(usize, usize)> = None;
        let mut best = -OPT_TOL * 1e-3;
        'scan: for i in 0..m {
            for j in 0..n {
                if in_basis[i][j] != usize::MAX {
                    continue;
                }
                let r = cost[i][j] - u[i] - v[j];
                if r < best {
                    enter = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = enter else { break };

        // cycle: path in the basis tree from column ej back to row ei
        let path = tree_path(&basis, m, n, ei, ej);
        // path[0] is the cell adjacent to column ej and carries a minus sign
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (bi, bj, x) = basis[k];
                let better = x < theta
                    || (x == theta && leave != usize::MAX && (bi, bj) < (basis[leave].0, basis[leave].1));
                if better {
                    theta = x;
                    leave = k;
                }
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[k].2 -= theta;
            } else {
                basis[k].2 += theta;
            }
        }
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
        let (li, lj, _) = basis[leave];
        in_basis[li][lj] = usize::MAX;
        basis[leave] = (ei, ej, theta);
        in_basis[ei][ej] = leave;
    }
    potentials(&basis, cost, m, n, &mut u, &mut v);
    let total = basis.iter().map(|&(i, j, x)| x.max(0.0) * cost[i][j]).sum();
    TransportSolution { cost: total, v }
}

/// Solves `u_i + v_j = c_ij` on the basis tree with `u_0 = 0`.
fn potentials(basis: &[(usize, usize, f64)], cost: &[Vec<f64>], m: usize, n: usize, u: &mut [f64], v: &mut [f64]) {
    let adj = adjacency(basis, m, n);
    let mut seen = vec![false; m + n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = queue.pop_front() {
        for &(other, k) in &adj[node] {
            if seen[other] {
                continue;
            }
            seen[other] = true;
            let (i, j, _) = basis[k];
            if other >= m {
                v[j] = cost[i][j] - u[i];
            } else {
                u[i] = cost[i][j] - v[j];
            }
            queue.push_back(other);
        }
    }
}

/// Nodes `0..m` are rows, `m..m+n` columns; edges carry the basis index.
fn adjacency(basis: &[(usize, usize, f64)], m: usize, n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); m + n];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push((m + j, k));
        adj[m + j].push((i, k));
    }
    adj
}

/// Basis cells on the tree path from column `col` to row `row`.
fn tree_path(basis: &[(usize, usize, f64)], m: usize, n: usize, row: usize, col: usize) -> Vec<usize> {
    let adj = adjacency(basis, m, n);
    let start = m + col;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        for &(other, k) in &adj[node] {
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((node, k));
                queue.push_back(other);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = row;
    while let Some((prev, k)) = parent[node] {
        cells.push(k);
        node = prev;
    }
    // cells run from the row end to the column end; flip to start at the column
    cells.reverse();
    cells
}

/// `W1(L_J^* μ, L_J^* ν) / W1(μ, ν)`; the contraction bound says this is at most `r`.
pub fn contraction_check(j: &Jacobian, mu: &CylinderMeasure, nu: &CylinderMeasure, space: &ShiftSpace) -> Result<f64> {
    let base = w1_tree(mu, nu, space)?;
    if base == 0.0 {
        return Err(Error::IdenticalMeasures);
    }
    let img = w1_tree(&dual_apply(j, mu)?, &dual_apply(j, nu)?, space)?;
    Ok(img / base)
}

/// `(W1(L_{J1}^* μ, L_{J2}^* μ), d ‖J1 − J2‖_∞)`; the first never exceeds the second.
pub fn jacobian_perturbation_check(
    j1: &Jacobian,
    j2: &Jacobian,
    mu: &CylinderMeasure,
    space: &ShiftSpace,
) -> Result<(f64, f64)> {
    if j1.depth() != j2.depth() {
        return Err(Error::DepthMismatch(j1.depth(), j2.depth()));
    }
    let w = w1_tree(&dual_apply(j1, mu)?, &dual_apply(j2, mu)?, space)?;
    Ok((w, space.d() as f64 * j1.sup_distance(j2)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointContraction {
    /// `W1(L_{J1}^* μ1, L_{J2}^* μ2)`.
    pub lhs: f64,
    /// `r [W1(μ1, μ2) + (d/r) ‖J1 − J2‖_∞]`.
    pub rhs: f64,
}

impl JointContraction {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

pub fn joint_contraction_check(
    j1: &Jacobian,
    j2: &Jacobian,
    mu1: &CylinderMeasure,
    mu2: &CylinderMeasure,
    space: &ShiftSpace,
) -> Result<JointContraction> {
    if j1.depth() != j2.depth() {
        return Err(Error::DepthMismatch(j1.depth(), j2.depth()));
    }
    let r = space.rate();
    let lhs = w1_tree(&dual_apply(j1, mu1)?, &dual_apply(j2, mu2)?, space)?;
    let dtilde = space.d() as f64 / r * j1.sup_distance(j2)?;
    Ok(JointContraction { lhs, rhs: r * (w1_tree(mu1, mu2, space)? + dtilde) })
}
