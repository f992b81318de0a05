//! Rectangular assignment with forbidden (`+inf`) entries.
//!
//! The objective is lexicographic: first the number of finite pairs is
//! maximised, then their total cost is minimised, and among equal optima the
//! lexicographically smallest row-sorted pair list is returned.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Row-major constructor.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(alloc::format!(
                "cost matrix data has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("cost matrix rows have different lengths"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    pub total_cost: f64,
}

impl MatchResult {
    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    pub fn row_for_col(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }
}

/// Dense O(n^3) shortest-augmenting-path solver on a square matrix.
/// Returns `assign[row] = col`.
fn solve_square(n: usize, cost: &[f64]) -> Vec<usize> {
    // 1-based potentials, column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

struct Optimum {
    card: usize,
    cost: f64,
}

/// Best (max cardinality, then min cost) matching restricted to the given
/// rows and columns. Forbidden and padding entries share one sentinel that
/// outweighs any difference in finite cost.
fn solve_subset(m: &CostMatrix, rows: &[usize], cols: &[usize], big: f64) -> Optimum {
    let n = rows.len().max(cols.len());
    if rows.is_empty() || cols.is_empty() {
        return Optimum { card: 0, cost: 0.0 };
    }
    let mut cost = vec![big; n * n];
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let x = m.get(r, c);
            if x.is_finite() {
                cost[i * n + j] = x;
            }
        }
    }
    let assign = solve_square(n, &cost);
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (i, &j) in assign.iter().enumerate() {
        if i < rows.len() && j < cols.len() {
            let x = m.get(rows[i], cols[j]);
            if x.is_finite() {
                pairs.push((rows[i], cols[j]));
            }
        }
    }
    pairs.sort_unstable();
    for &(r, c) in &pairs {
        total += m.get(r, c);
    }
    Optimum { card: pairs.len(), cost: total }
}

pub fn hungarian(cost: &CostMatrix) -> Result<MatchResult> {
    let mut finite_sum = 0.0;
    for &x in &cost.data {
        if x.is_nan() || x == f64::NEG_INFINITY {
            return Err(Error::invalid("cost matrix contains NaN or -inf"));
        }
        if x.is_finite() {
            finite_sum += x.abs();
        }
    }
    let big = 2.0 * finite_sum + 1.0;
    let all_rows: Vec<usize> = (0..cost.rows).collect();
    let all_cols: Vec<usize> = (0..cost.cols).collect();
    let best = solve_subset(cost, &all_rows, &all_cols, big);
    let tol = 1e-9 * best.cost.abs().max(1.0);

    // Fix rows in order to the smallest column that still admits an optimum.
    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(best.card);
    let mut fixed_cost = 0.0;
    let mut free_cols = all_cols.clone();
    for r in 0..cost.rows {
        if fixed.len() == best.card {
            break;
        }
        let rest_rows: Vec<usize> = ((r + 1)..cost.rows).collect();
        let mut chosen = None;
        for (k, &c) in free_cols.iter().enumerate() {
            let x = cost.get(r, c);
            if !x.is_finite() {
                continue;
            }
            let mut cols_left = free_cols.clone();
            cols_left.remove(k);
            let sub = solve_subset(cost, &rest_rows, &cols_left, big);
            let card = fixed.len() + 1 + sub.card;
            let total = fixed_cost + x + sub.cost;
            if card == best.card && (total - best.cost).abs() <= tol {
                chosen = Some((k, c, x));
                break;
            }
        }
        if let Some((k, c, x)) = chosen {
            fixed.push((r, c));
            fixed_cost += x;
            free_cols.remove(k);
        }
    }
    let pairs = fixed;
    let total_cost = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
    let unmatched_rows = (0..cost.rows).filter(|r| !pairs.iter().any(|p| p.0 == *r)).collect();
    let unmatched_cols = (0..cost.cols).filter(|c| !pairs.iter().any(|p| p.1 == *c)).collect();
    Ok(MatchResult {
        pairs,
        unmatched_rows,
        unmatched_cols,
        total_cost,
    })
}
