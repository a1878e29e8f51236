//! Dirichlet problems on weighted graphs.
//!
//! Edge multiplicities are conductances. A solve pins some nodes and finds
//! the energy minimizer on the rest, which is the solution of the reduced
//! Laplacian system on the free nodes. The reduced matrix is symmetric
//! positive definite as long as every free component touches a pinned node,
//! so it is solved with Jacobi-preconditioned conjugate gradients.

pub mod exact;
mod multigrid;
pub mod surgery;

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{graph_energy_f64, VertexFunction};
use crate::error::{invalid, Error, Result};
use crate::geometry::GraphSkeleton;
use crate::numeric::{det_dot, det_sum};

use multigrid::{candidates, Csr, Multigrid};

pub use exact::{exact_effective_conductance, exact_effective_resistance, exact_solve, exact_solve_capped};
pub use surgery::{cut_edges, short_nodes};

/// Prescribed values on a subset of nodes.
#[derive(Debug, Clone, Default)]
pub struct BoundarySpec {
    pub pinned: Vec<(usize, f64)>,
}

impl BoundarySpec {
    pub fn new(pinned: Vec<(usize, f64)>) -> Self {
        Self { pinned }
    }

    /// `0` on `a`, `1` on `b`.
    pub fn terminals(a: &[usize], b: &[usize]) -> Result<Self> {
        check_terminals(a, b)?;
        let pinned = a.iter().map(|&i| (i, 0.0)).chain(b.iter().map(|&i| (i, 1.0))).collect();
        Ok(Self { pinned })
    }

    fn dense(&self, n: usize) -> Result<Vec<Option<f64>>> {
        let mut values = vec![None; n];
        for &(i, v) in &self.pinned {
            if i >= n {
                return invalid(format!("boundary node {i} out of range (graph has {n} nodes)"));
            }
            if values[i].is_some() {
                return invalid(format!("boundary node {i} listed twice"));
            }
            if !v.is_finite() {
                return invalid(format!("boundary value at node {i} is not finite"));
            }
            values[i] = Some(v);
        }
        Ok(values)
    }
}

pub(crate) fn check_terminals(a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return invalid("terminal sets must be nonempty");
    }
    if a.iter().any(|i| b.contains(i)) {
        return invalid("terminal sets must be disjoint");
    }
    Ok(())
}

/// Preconditioner for the conjugate gradient iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// Multigrid on level-structured graphs with many free nodes, else Jacobi.
    #[default]
    Auto,
    Jacobi,
    Multigrid,
}

/// Free-node count from which `Auto` switches to multigrid.
pub const MULTIGRID_THRESHOLD: usize = 4000;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual in the diagonal-weighted norm.
    pub tol: f64,
    /// Defaults to `50 * sqrt(free nodes)`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iterations: None,
            preconditioner: Preconditioner::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn with_preconditioner(self, preconditioner: Preconditioner) -> Self {
        Self { preconditioner, ..self }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
    /// Largest `|(L u)_i - s_i| / deg_i` over free nodes.
    pub max_harmonic_defect: f64,
    /// Whether the solution stays within the boundary range (source-free solves).
    pub max_principle: bool,
    /// Whether the multigrid preconditioner was used.
    pub multigrid: bool,
}

impl SolveReport {
    /// Full solution dump as CSV rows `x,y,value`.
    pub fn solution_csv(&self, g: &GraphSkeleton) -> String {
        let mut out = String::from("x,y,value\n");
        match g.points() {
            Some(points) => {
                for (p, v) in points.iter().zip(&self.solution) {
                    let (x, y) = p.coords();
                    out.push_str(&format!("{x},{y},{v:e}\n"));
                }
            }
            None => {
                for (i, v) in self.solution.iter().enumerate() {
                    out.push_str(&format!("{i},,{v:e}\n"));
                }
            }
        }
        out
    }
}

/// Free-node system `A x = b` in CSR form.
struct Reduced {
    free: Vec<usize>,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
}

impl Reduced {
    fn build(adj: &[Vec<(usize, u32)>], pinned: &[Option<f64>], source: Option<&[f64]>) -> Self {
        let n = adj.len();
        let mut local = vec![u32::MAX; n];
        let free: Vec<usize> = (0..n).filter(|&i| pinned[i].is_none()).collect();
        for (k, &i) in free.iter().enumerate() {
            local[i] = k as u32;
        }
        let mut diag = Vec::with_capacity(free.len());
        let mut row_ptr = Vec::with_capacity(free.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut rhs = Vec::with_capacity(free.len());
        row_ptr.push(0);
        for &i in &free {
            let mut d = 0.0;
            let mut b = source.map_or(0.0, |s| s[i]);
            for &(j, c) in &adj[i] {
                let c = c as f64;
                d += c;
                match pinned[j] {
                    Some(v) => b += c * v,
                    None => {
                        cols.push(local[j]);
                        vals.push(c);
                    }
                }
            }
            diag.push(d);
            rhs.push(b);
            row_ptr.push(cols.len());
        }
        Self {
            free,
            diag,
            row_ptr,
            cols,
            vals,
            rhs,
        }
    }

    fn to_csr(&self) -> Csr {
        let m = self.free.len();
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut cols = Vec::with_capacity(self.cols.len() + m);
        let mut vals = Vec::with_capacity(self.cols.len() + m);
        row_ptr.push(0);
        for i in 0..m {
            let mut row: Vec<(u32, f64)> = (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|k| (self.cols[k], -self.vals[k]))
                .collect();
            row.push((i as u32, self.diag[i]));
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
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

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s -= self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = s;
        });
    }

    /// Preconditioned conjugate gradients from `x`. Returns iterations and
    /// the final relative residual.
    fn pcg(&self, x: &mut [f64], tol: f64, max_iter: usize, mg: Option<&Multigrid>) -> Result<(usize, f64)> {
        let m = self.free.len();
        if m == 0 {
            return Ok((0, 0.0));
        }
        let inv: Vec<f64> = self.diag.iter().map(|d| 1.0 / d).collect();
        let b_norm = det_sum(m, |i| self.rhs[i] * self.rhs[i] * inv[i]).sqrt();
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok((0, 0.0));
        }
        let mut ax = vec![0.0; m];
        self.apply(x, &mut ax);
        let mut r: Vec<f64> = (0..m).map(|i| self.rhs[i] - ax[i]).collect();
        let precondition = |r: &[f64], z: &mut [f64]| match mg {
            Some(mg) => mg.apply(r, z),
            None => z
                .par_iter_mut()
                .zip(r)
                .zip(&inv)
                .for_each(|((zi, ri), di)| *zi = ri * di),
        };
        let weighted = |r: &[f64]| det_sum(m, |i| r[i] * r[i] * inv[i]).sqrt();
        let mut z = vec![0.0; m];
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = det_dot(&r, &z);
        let mut rel = weighted(&r) / b_norm;
        if rel <= tol {
            return Ok((0, rel));
        }
        let mut ap = vec![0.0; m];
        for it in 1..=max_iter {
            self.apply(&p, &mut ap);
            let pap = det_dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::Singular("reduced Laplacian is not positive definite".into()));
            }
            let step = rz / pap;
            x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
            r.par_iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= step * ai);
            rel = weighted(&r) / b_norm;
            if rel <= tol {
                return Ok((it, rel));
            }
            precondition(&r, &mut z);
            let rz_next = det_dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: rel,
        })
    }
}

/// Fails when some free node cannot reach a pinned node.
fn check_anchored(adj: &[Vec<(usize, u32)>], pinned: &[Option<f64>]) -> Result<()> {
    let mut seen: Vec<bool> = pinned.iter().map(Option::is_some).collect();
    let mut queue: VecDeque<usize> = (0..adj.len()).filter(|&i| seen[i]).collect();
    if queue.is_empty() {
        return Err(Error::Singular("no pinned nodes".into()));
    }
    while let Some(v) = queue.pop_front() {
        for &(u, _) in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(Error::Singular(format!(
            "node {i} lies in a free component without boundary"
        ))),
        None => Ok(()),
    }
}

fn solve_system(
    g: &GraphSkeleton,
    bc: &BoundarySpec,
    source: Option<&[f64]>,
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if !(opts.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let n = g.node_count();
    let pinned = bc.dense(n)?;
    let adj = g.adjacency();
    check_anchored(&adj, &pinned)?;
    let red = Reduced::build(&adj, &pinned, source);

    let mut x: Vec<f64> = match guess {
        Some(gs) if gs.len() == n => red.free.iter().map(|&i| gs[i]).collect(),
        Some(gs) => {
            return Err(Error::Dimension {
                expected: n,
                actual: gs.len(),
            })
        }
        None => vec![0.0; red.free.len()],
    };
    let cap = opts
        .max_iterations
        .unwrap_or_else(|| ((50.0 * (red.free.len() as f64).sqrt()).ceil() as usize).max(50));
    let use_mg = match opts.preconditioner {
        Preconditioner::Jacobi => false,
        Preconditioner::Multigrid => true,
        Preconditioner::Auto => red.free.len() >= MULTIGRID_THRESHOLD,
    };
    let mg = if use_mg { Multigrid::build(g, &red.free, red.to_csr()) } else { None };
    let (iterations, residual) = red.pcg(&mut x, opts.tol, cap, mg.as_ref())?;

    let mut solution: Vec<f64> = pinned.iter().map(|v| v.unwrap_or(0.0)).collect();
    for (k, &i) in red.free.iter().enumerate() {
        solution[i] = x[k];
    }
    let energy = graph_energy_f64(g, &solution)?;
    let max_harmonic_defect = red
        .free
        .par_iter()
        .map(|&i| {
            let flux: f64 = adj[i].iter().map(|&(j, c)| c as f64 * (solution[i] - solution[j])).sum();
            let s = source.map_or(0.0, |s| s[i]);
            let deg: f64 = adj[i].iter().map(|&(_, c)| c as f64).sum();
            (flux - s).abs() / deg
        })
        .reduce(|| 0.0, f64::max);
    let max_principle = if source.is_some() {
        true
    } else {
        let (lo, hi) = bc
            .pinned
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
        let slack = 1e-8 * (hi - lo).abs().max(1.0);
        solution.iter().all(|&v| v >= lo - slack && v <= hi + slack)
    };
    Ok(SolveReport {
        solution,
        iterations,
        residual,
        energy,
        max_harmonic_defect,
        max_principle,
        multigrid: mg.is_some(),
    })
}

/// Minimizes the weighted energy subject to the boundary values.
pub fn solve_dirichlet(g: &GraphSkeleton, bc: &BoundarySpec, opts: &SolverOptions) -> Result<SolveReport> {
    solve_system(g, bc, None, None, opts)
}

/// As [`solve_dirichlet`], starting from `guess` (a full node vector).
pub fn solve_dirichlet_from(
    g: &GraphSkeleton,
    bc: &BoundarySpec,
    guess: &[f64],
    opts: &SolverOptions,
) -> Result<SolveReport> {
    solve_system(g, bc, None, Some(guess), opts)
}

/// Effective resistance together with the underlying solve.
#[derive(Debug, Clone)]
pub struct ResistanceSolve {
    pub resistance: f64,
    pub report: SolveReport,
}

/// `R(A, B)`: the reciprocal of the current that flows when `A` is held at
/// 0 and `B` at 1.
pub fn effective_resistance(g: &GraphSkeleton, a: &[usize], b: &[usize], opts: &SolverOptions) -> Result<f64> {
    Ok(effective_resistance_solve(g, a, b, None, opts)?.resistance)
}

pub fn effective_resistance_solve(
    g: &GraphSkeleton,
    a: &[usize],
    b: &[usize],
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<ResistanceSolve> {
    let bc = BoundarySpec::terminals(a, b)?;
    let report = solve_system(g, &bc, None, guess, opts)?;
    let adj = g.adjacency();
    let u = &report.solution;
    let current: f64 = b
        .iter()
        .map(|&i| adj[i].iter().map(|&(j, c)| c as f64 * (u[i] - u[j])).sum::<f64>())
        .sum();
    if !(current > 0.0) {
        return Err(Error::Singular("terminal sets are not connected".into()));
    }
    Ok(ResistanceSolve {
        resistance: 1.0 / current,
        report,
    })
}

/// Green function of a ball with zero boundary values, centered at `z`.
#[derive(Debug, Clone)]
pub struct GreenFunction {
    pub function: VertexFunction<f64>,
    pub center: usize,
    pub report: SolveReport,
}

impl GreenFunction {
    /// `g(z, z)`.
    pub fn center_value(&self) -> f64 {
        self.function.values()[self.center]
    }
}

/// Solves `L g = delta_z` with `g = 0` on the flagged boundary of `ball`.
pub fn green_function(
    ball: std::sync::Arc<GraphSkeleton>,
    z: usize,
    opts: &SolverOptions,
) -> Result<GreenFunction> {
    let n = ball.node_count();
    if z >= n {
        return invalid(format!("center {z} out of range"));
    }
    if ball.boundary.len() != n || !ball.boundary.iter().any(|&b| b) {
        return invalid("the ball has no flagged boundary");
    }
    if ball.boundary[z] {
        return invalid("the center lies on the boundary");
    }
    let bc = BoundarySpec::new(
        ball.boundary
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i, 0.0))
            .collect(),
    );
    let mut source = vec![0.0; n];
    source[z] = 1.0;
    let report = solve_system(&ball, &bc, Some(&source), None, opts)?;
    let function = VertexFunction::new(ball, report.solution.clone())?;
    Ok(GreenFunction {
        function,
        center: z,
        report,
    })
}

/// Interpolates a level-n solution onto level n+1 as a starting guess:
/// bilinear in the four corners of the containing level-n cell.
pub fn prolong(coarse: &VertexFunction<f64>, fine: &GraphSkeleton) -> Result<Vec<f64>> {
    let level = coarse.level();
    if fine.level != level + 1 {
        return Err(Error::Level("prolongation goes up exactly one level".into()));
    }
    let points = fine
        .points()
        .ok_or_else(|| Error::InvalidInput("prolongation target needs lattice points".into()))?;
    let cell = 2 * 3u64; // one coarse cell spans 6 units at the fine scale
    let side = 3u64.pow(level);
    points
        .iter()
        .map(|p| {
            let cols = candidates(p.x, cell, side);
            let rows = candidates(p.y, cell, side);
            for &c in &cols {
                for &r in &rows {
                    let corner = |dx: u64, dy: u64| {
                        let q = crate::geometry::LatticePoint::new(2 * (c + dx), 2 * (r + dy), level);
                        coarse.value_at(&q).copied()
                    };
                    if let (Some(a), Some(b), Some(d), Some(e)) = (corner(0, 0), corner(1, 0), corner(0, 1), corner(1, 1)) {
                        let tx = (p.x - c * cell) as f64 / cell as f64;
                        let ty = (p.y - r * cell) as f64 / cell as f64;
                        return Ok((1.0 - tx) * (1.0 - ty) * a
                            + tx * (1.0 - ty) * b
                            + (1.0 - tx) * ty * d
                            + tx * ty * e);
                    }
                }
            }
            Err(Error::Level("fine point outside every coarse cell".into()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cell_graph, vertex_graph, vinfty_ball, Edge, GraphKind, LatticePoint, Mode, NodeSet};
    use std::sync::Arc;

    pub(crate) fn path(n: usize) -> GraphSkeleton {
        GraphSkeleton {
            kind: GraphKind::Network,
            mode: Mode::Carpet,
            level: 0,
            nodes: NodeSet::Abstract(n),
            edges: (0..n - 1)
                .map(|i| Edge {
                    a: i as u32,
                    b: i as u32 + 1,
                    multiplicity: 1,
                })
                .collect(),
            boundary: vec![false; n],
            distance: Vec::new(),
        }
    }

    #[test]
    fn all_pinned_returns_boundary() {
        let g = path(3);
        let bc = BoundarySpec::new(vec![(0, 0.3), (1, -2.0), (2, 5.0)]);
        let r = solve_dirichlet(&g, &bc, &SolverOptions::default()).unwrap();
        assert_eq!(r.solution, vec![0.3, -2.0, 5.0]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn path_midpoint() {
        let g = path(3);
        let r = solve_dirichlet(&g, &BoundarySpec::terminals(&[0], &[2]).unwrap(), &SolverOptions::default())
            .unwrap();
        assert!((r.solution[1] - 0.5).abs() < 1e-14);
        assert!((effective_resistance(&g, &[0], &[2], &SolverOptions::default()).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_edge_and_ring() {
        let g = path(2);
        assert!((effective_resistance(&g, &[0], &[1], &SolverOptions::default()).unwrap() - 1.0).abs() < 1e-14);
        let ring = cell_graph(1, Mode::Carpet).unwrap();
        let r = effective_resistance(&ring, &[0], &[4], &SolverOptions::default()).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let g = path(3);
        let opts = SolverOptions::default();
        assert!(matches!(effective_resistance(&g, &[], &[1], &opts), Err(Error::InvalidInput(_))));
        assert!(matches!(effective_resistance(&g, &[0, 1], &[1], &opts), Err(Error::InvalidInput(_))));
        assert!(matches!(
            solve_dirichlet(&g, &BoundarySpec::new(vec![]), &opts),
            Err(Error::Singular(_))
        ));
        let mut split = path(4);
        split.edges.remove(2);
        assert!(matches!(
            solve_dirichlet(&split, &BoundarySpec::new(vec![(0, 1.0)]), &opts),
            Err(Error::Singular(_))
        ));
        let tight = SolverOptions {
            tol: 1e-14,
            max_iterations: Some(1),
            ..SolverOptions::default()
        };
        let g = vertex_graph(2, Mode::Carpet).unwrap();
        assert!(matches!(
            effective_resistance(&g, &[0], &[g.node_count() - 1], &tight),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn harmonic_and_maximum_principle() {
        let g = vertex_graph(3, Mode::Carpet).unwrap();
        let pts = g.points().unwrap();
        let s = pts[0].scale();
        let pinned = pts
            .iter()
            .enumerate()
            .filter(|(_, p)| p.x == 0 || p.x == s || p.y == 0)
            .map(|(i, p)| (i, (p.x as f64 * 0.37 + p.y as f64).sin()))
            .collect();
        let r = solve_dirichlet(&g, &BoundarySpec::new(pinned), &SolverOptions::with_tol(1e-12)).unwrap();
        assert!(r.max_principle);
        assert!(r.max_harmonic_defect < 1e-9);
    }

    #[test]
    fn energy_identity() {
        let g = vertex_graph(3, Mode::Carpet).unwrap();
        let opts = SolverOptions::with_tol(1e-12);
        let (a, b) = (0, g.node_count() - 1);
        let rs = effective_resistance_solve(&g, &[a], &[b], None, &opts).unwrap();
        assert!((1.0 / rs.resistance - rs.report.energy).abs() < 1e-10 * rs.report.energy);
    }

    #[test]
    fn resistance_is_a_metric() {
        let g = vertex_graph(2, Mode::Carpet).unwrap();
        let opts = SolverOptions::with_tol(1e-12);
        let n = g.node_count();
        let triples = [(0, n / 3, n - 1), (5, 17, 40), (n / 2, 3, n - 7)];
        for (x, y, z) in triples {
            let rxy = effective_resistance(&g, &[x], &[y], &opts).unwrap();
            let ryx = effective_resistance(&g, &[y], &[x], &opts).unwrap();
            let rxz = effective_resistance(&g, &[x], &[z], &opts).unwrap();
            let rzy = effective_resistance(&g, &[z], &[y], &opts).unwrap();
            assert!((rxy - ryx).abs() < 1e-9 * rxy);
            assert!(rxy <= rxz + rzy + 1e-12);
        }
    }

    #[test]
    fn green_function_star_and_identity() {
        let z = LatticePoint::new(4, 4, 0);
        let star = Arc::new(vinfty_ball(&z, 1).unwrap());
        let zi = star.index_of(&z).unwrap();
        let deg = star.adjacency()[zi].len() as f64;
        let g = green_function(star, zi, &SolverOptions::default()).unwrap();
        assert!((g.center_value() - 1.0 / deg).abs() < 1e-14);

        let ball = Arc::new(vinfty_ball(&z, 6).unwrap());
        let zi = ball.index_of(&z).unwrap();
        let opts = SolverOptions::with_tol(1e-12);
        let g = green_function(ball.clone(), zi, &opts).unwrap();
        let vals = g.function.values();
        assert!(vals.iter().all(|&v| v >= -1e-14));
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, g.center_value());
        let boundary: Vec<usize> = (0..ball.node_count()).filter(|&i| ball.boundary[i]).collect();
        let r = effective_resistance(&ball, &[zi], &boundary, &opts).unwrap();
        assert!((r - g.center_value()).abs() < 1e-9 * r);

        let edge = (0..ball.node_count()).find(|&i| ball.boundary[i]).unwrap();
        assert!(green_function(ball, edge, &opts).is_err());
    }

    #[test]
    fn multigrid_matches_jacobi() {
        let jacobi = SolverOptions::with_tol(1e-12).with_preconditioner(Preconditioner::Jacobi);
        let mg = SolverOptions::with_tol(1e-12).with_preconditioner(Preconditioner::Multigrid);
        let g = vertex_graph(4, Mode::Carpet).unwrap();
        let n = g.node_count();
        let a = effective_resistance_solve(&g, &[0], &[n - 1], None, &jacobi).unwrap();
        let b = effective_resistance_solve(&g, &[0], &[n - 1], None, &mg).unwrap();
        assert!(b.report.multigrid && !a.report.multigrid);
        assert!((a.resistance - b.resistance).abs() < 1e-9 * a.resistance);
        assert!(b.report.iterations < a.report.iterations);
        let w = cell_graph(4, Mode::Carpet).unwrap();
        let a = effective_resistance_solve(&w, &[0], &[1000], None, &jacobi).unwrap();
        let b = effective_resistance_solve(&w, &[0], &[1000], None, &mg).unwrap();
        assert!(b.report.multigrid);
        assert!((a.resistance - b.resistance).abs() < 1e-9 * a.resistance);
    }

    #[test]
    fn warm_start_gives_same_answer() {
        let opts = SolverOptions::with_tol(1e-12);
        let coarse_g = Arc::new(vertex_graph(2, Mode::Carpet).unwrap());
        let fine_g = vertex_graph(3, Mode::Carpet).unwrap();
        let sides = |g: &GraphSkeleton| {
            let pts = g.points().unwrap();
            let s = pts[0].scale();
            let a: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].x == 0).collect();
            let b: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].x == s).collect();
            (a, b)
        };
        let (a, b) = sides(&coarse_g);
        let coarse = effective_resistance_solve(&coarse_g, &a, &b, None, &opts).unwrap();
        let u = VertexFunction::new(coarse_g, coarse.report.solution).unwrap();
        let guess = prolong(&u, &fine_g).unwrap();
        let (a, b) = sides(&fine_g);
        let cold = effective_resistance_solve(&fine_g, &a, &b, None, &opts).unwrap();
        let warm = effective_resistance_solve(&fine_g, &a, &b, Some(&guess), &opts).unwrap();
        assert!((cold.resistance - warm.resistance).abs() < 1e-10 * cold.resistance);
        assert!(warm.report.iterations <= cold.report.iterations);
    }
}
