//! Geometric multigrid V-cycle over the level hierarchy, used as a
//! preconditioner for conjugate gradients on large graphs.
//!
//! Vertex graphs coarsen through bilinear interpolation from the corners of
//! level `n - 1` cells; cell graphs coarsen by aggregating children into
//! their parent word. Coarse operators are Galerkin products `P^T A P`.

use std::collections::BTreeMap;

use crate::geometry::{carpet_cell, GraphSkeleton, LatticePoint, Mode, NodeSet};

/// Systems at most this large are factored densely.
const COARSE_SIZE: usize = 200;

/// Compressed sparse rows.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub cols_count: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn from_rows(rows: Vec<Vec<(u32, f64)>>, cols_count: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            cols_count,
            row_ptr,
            cols,
            vals,
        }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k] as usize, self.vals[k]))
    }

    fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.cols_count + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.cols_count {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0u32; self.cols.len()];
        let mut vals = vec![0.0; self.vals.len()];
        for i in 0..self.rows() {
            for (c, v) in self.row(i) {
                let k = next[c];
                cols[k] = i as u32;
                vals[k] = v;
                next[c] += 1;
            }
        }
        Csr {
            cols_count: self.rows(),
            row_ptr: counts,
            cols,
            vals,
        }
    }

    /// `P^T A P` for square `A` and prolongation `P`.
    fn galerkin(a: &Csr, p: &Csr) -> Csr {
        let pt = p.transpose();
        let m = p.cols_count;
        let mut acc = vec![0.0f64; m];
        let mut mark = vec![usize::MAX; m];
        let mut touched = Vec::new();
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for k in 0..m {
            touched.clear();
            for (i, pik) in pt.row(k) {
                for (j, aij) in a.row(i) {
                    let w = pik * aij;
                    for (l, pjl) in p.row(j) {
                        if mark[l] != k {
                            mark[l] = k;
                            acc[l] = 0.0;
                            touched.push(l);
                        }
                        acc[l] += w * pjl;
                    }
                }
            }
            touched.sort_unstable();
            for &l in &touched {
                cols.push(l as u32);
                vals.push(acc[l]);
            }
            row_ptr.push(cols.len());
        }
        Csr {
            cols_count: m,
            row_ptr,
            cols,
            vals,
        }
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }
}

/// Dense Cholesky factor of the coarsest operator.
#[derive(Debug, Clone)]
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(a: &Csr) -> Option<Self> {
        let n = a.rows();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                l[i * n + j] = v;
            }
        }
        for j in 0..n {
            let mut d = l[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Self { n, l })
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    a: Csr,
    diag: Vec<f64>,
    /// Prolongation from the next coarser level.
    p: Csr,
    pt: Csr,
}

/// Symmetric V-cycle with one Gauss-Seidel sweep before (forward) and
/// after (backward) each coarse correction.
#[derive(Debug, Clone)]
pub(crate) struct Multigrid {
    levels: Vec<Level>,
    coarse: Csr,
    chol: Cholesky,
}

/// Coarse cell indices whose closed span contains `x`.
pub(crate) fn candidates(x: u64, cell: u64, side: u64) -> Vec<u64> {
    let c = x / cell;
    let mut out = Vec::with_capacity(2);
    if c < side {
        out.push(c);
    }
    if x % cell == 0 && c > 0 {
        out.push(c - 1);
    }
    out
}

/// Bilinear weights of a level-k point on the corners of a valid level
/// `k - 1` carpet cell.
fn interpolation(p: &LatticePoint) -> Option<Vec<(LatticePoint, f64)>> {
    let level = p.level.checked_sub(1)?;
    let cell = 6u64;
    let side = 3u64.pow(level);
    for &c in &candidates(p.x, cell, side) {
        for &r in &candidates(p.y, cell, side) {
            if !carpet_cell(c, r) {
                continue;
            }
            let tx = (p.x - c * cell) as f64 / cell as f64;
            let ty = (p.y - r * cell) as f64 / cell as f64;
            let corners = [
                (0, 0, (1.0 - tx) * (1.0 - ty)),
                (1, 0, tx * (1.0 - ty)),
                (0, 1, (1.0 - tx) * ty),
                (1, 1, tx * ty),
            ];
            return Some(
                corners
                    .iter()
                    .filter(|(_, _, w)| *w > 0.0)
                    .map(|&(dx, dy, w)| (LatticePoint::new(2 * (c + dx), 2 * (r + dy), level), w))
                    .collect(),
            );
        }
    }
    None
}

/// Prolongation onto `fine` (level-k points) from the coarse points it
/// needs; returns the matrix and the sorted coarse points.
fn point_prolongation(fine: &[LatticePoint]) -> Option<(Csr, Vec<LatticePoint>)> {
    let mut rows = Vec::with_capacity(fine.len());
    let mut index: BTreeMap<LatticePoint, u32> = BTreeMap::new();
    for p in fine {
        let weights = interpolation(p)?;
        for (q, _) in &weights {
            index.entry(*q).or_insert(0);
        }
        rows.push(weights);
    }
    for (k, v) in index.values_mut().enumerate() {
        *v = k as u32;
    }
    let rows = rows
        .into_iter()
        .map(|r| r.into_iter().map(|(q, w)| (index[&q], w)).collect())
        .collect();
    let coarse: Vec<LatticePoint> = index.into_keys().collect();
    Some((Csr::from_rows(rows, coarse.len()), coarse))
}

/// Prolongation onto `fine` word indices from all words one level up.
fn word_prolongation(fine: &[usize], base: usize, coarse_count: usize) -> Csr {
    let rows = fine.iter().map(|&i| vec![((i / base) as u32, 1.0)]).collect();
    Csr::from_rows(rows, coarse_count)
}

impl Multigrid {
    /// Hierarchy for the free-node system `a` of `g`, or `None` when the
    /// graph has no level structure to coarsen.
    pub fn build(g: &GraphSkeleton, free: &[usize], a: Csr) -> Option<Self> {
        let mut prolongations = Vec::new();
        match &g.nodes {
            NodeSet::Points(points) if g.mode == Mode::Carpet && g.level >= 2 => {
                let mut current: Vec<LatticePoint> = free.iter().map(|&i| points[i]).collect();
                while current.len() > COARSE_SIZE && current[0].level >= 2 {
                    let (p, coarse) = point_prolongation(&current)?;
                    prolongations.push(p);
                    current = coarse;
                }
            }
            NodeSet::Words { mode, level } if *level >= 2 => {
                let base = mode.base();
                let mut current: Vec<usize> = free.to_vec();
                let mut l = *level;
                while current.len() > COARSE_SIZE && l >= 2 {
                    let count = mode.word_count(l - 1);
                    prolongations.push(word_prolongation(&current, base, count));
                    current = (0..count).collect();
                    l -= 1;
                }
            }
            _ => return None,
        }
        if prolongations.is_empty() {
            return None;
        }
        let mut levels = Vec::with_capacity(prolongations.len());
        let mut a = a;
        for p in prolongations {
            let coarse = Csr::galerkin(&a, &p);
            let diag = (0..a.rows())
                .map(|i| a.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v))
                .collect();
            let pt = p.transpose();
            levels.push(Level { a, diag, p, pt });
            a = coarse;
        }
        let chol = Cholesky::factor(&a)?;
        Some(Self {
            levels,
            coarse: a,
            chol,
        })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        let Some(level) = self.levels.get(k) else {
            debug_assert_eq!(b.len(), self.coarse.rows());
            self.chol.solve(b, x);
            return;
        };
        let a = &level.a;
        let n = a.rows();
        x.iter_mut().for_each(|v| *v = 0.0);
        let sweep = |x: &mut [f64], i: usize| {
            let mut s = b[i];
            for (j, v) in a.row(i) {
                if j != i {
                    s -= v * x[j];
                }
            }
            x[i] = s / level.diag[i];
        };
        for i in 0..n {
            sweep(x, i);
        }
        let mut ax = vec![0.0; n];
        a.mul(x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut rc = vec![0.0; level.p.cols_count];
        level.pt.mul(&r, &mut rc);
        let mut ec = vec![0.0; rc.len()];
        self.cycle(k + 1, &rc, &mut ec);
        let mut e = vec![0.0; n];
        level.p.mul(&ec, &mut e);
        x.iter_mut().zip(&e).for_each(|(x, e)| *x += e);
        for i in (0..n).rev() {
            sweep(x, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let fine = crate::geometry::vertex_graph(3, Mode::Carpet).unwrap();
        let points = fine.points().unwrap();
        let (p, coarse) = point_prolongation(points).unwrap();
        let v2 = crate::geometry::vertex_graph(2, Mode::Carpet).unwrap();
        assert!(coarse.iter().all(|q| v2.index_of(q).is_some() && q.x % 2 == 0 && q.y % 2 == 0));
        let lin = |q: &LatticePoint| {
            let (x, y) = q.coords();
            2.0 * x - 3.0 * y + 0.5
        };
        let uc: Vec<f64> = coarse.iter().map(lin).collect();
        let mut uf = vec![0.0; points.len()];
        p.mul(&uc, &mut uf);
        for (q, v) in points.iter().zip(&uf) {
            assert!((v - lin(q)).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_solves() {
        let a = Csr::from_rows(
            vec![vec![(0, 4.0), (1, -1.0)], vec![(0, -1.0), (1, 3.0), (2, -1.0)], vec![(1, -1.0), (2, 2.0)]],
            3,
        );
        let c = Cholesky::factor(&a).unwrap();
        let mut x = vec![0.0; 3];
        c.solve(&[1.0, 2.0, 3.0], &mut x);
        let mut y = vec![0.0; 3];
        a.mul(&x, &mut y);
        for (u, v) in y.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
