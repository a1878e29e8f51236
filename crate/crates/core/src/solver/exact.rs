//! Exact rational solves by sparse symmetric elimination.

use std::collections::{BTreeMap, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{invalid, Error, Result};
use crate::geometry::GraphSkeleton;
use crate::numeric::Scalar;

use super::check_terminals;

/// Largest graph the exact solver accepts by default.
pub const EXACT_NODE_CAP: usize = 2000;

type Row = BTreeMap<usize, BigRational>;

/// Nodes reachable from a pinned node.
fn anchored(adj: &[Vec<(usize, u32)>], pinned: &[Option<BigRational>]) -> Vec<bool> {
    let mut seen: Vec<bool> = pinned.iter().map(Option::is_some).collect();
    let mut queue: VecDeque<usize> = (0..adj.len()).filter(|&i| seen[i]).collect();
    while let Some(v) = queue.pop_front() {
        for &(u, _) in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// Solves the Dirichlet problem on the anchored part of the graph. Nodes in
/// components without pinned nodes are returned as `None`.
fn solve_partial(g: &GraphSkeleton, pinned: &[Option<BigRational>]) -> Vec<Option<BigRational>> {
    let adj = g.adjacency();
    let keep = anchored(&adj, pinned);
    let n = adj.len();
    let mut local = vec![usize::MAX; n];
    let free: Vec<usize> = (0..n).filter(|&i| keep[i] && pinned[i].is_none()).collect();
    for (k, &i) in free.iter().enumerate() {
        local[i] = k;
    }

    let mut rows: Vec<Row> = Vec::with_capacity(free.len());
    let mut rhs: Vec<BigRational> = Vec::with_capacity(free.len());
    for &i in &free {
        let mut row = Row::new();
        let mut b = BigRational::zero();
        let mut d = 0u64;
        for &(j, c) in &adj[i] {
            d += c as u64;
            let c = BigRational::from_u32(c);
            match &pinned[j] {
                Some(v) => b += &c * v,
                None => *row.entry(local[j]).or_insert_with(BigRational::zero) -= c,
            }
        }
        row.insert(local[i], BigRational::from_integer(d.into()));
        rows.push(row);
        rhs.push(b);
    }

    let m = free.len();
    let mut done = vec![false; m];
    let mut order = Vec::with_capacity(m);
    for _ in 0..m {
        let k = (0..m)
            .filter(|&k| !done[k])
            .min_by_key(|&k| rows[k].len())
            .expect("an uneliminated row remains");
        done[k] = true;
        order.push(k);
        let pivot_row = rows[k].clone();
        let pivot = pivot_row[&k].clone();
        let pivot_rhs = rhs[k].clone();
        for (&j, a_jk) in pivot_row.iter().filter(|(&j, _)| j != k && !done[j]) {
            let factor = a_jk / &pivot;
            let row = &mut rows[j];
            row.remove(&k);
            for (&l, a_kl) in pivot_row.iter().filter(|(&l, _)| l != k && !done[l]) {
                let entry = row.entry(l).or_insert_with(BigRational::zero);
                *entry -= &factor * a_kl;
                if entry.is_zero() {
                    row.remove(&l);
                }
            }
            rhs[j] -= &factor * &pivot_rhs;
        }
    }

    let mut x = vec![BigRational::zero(); m];
    for &k in order.iter().rev() {
        let mut s = rhs[k].clone();
        for (&j, a) in rows[k].iter().filter(|(&j, _)| j != k) {
            s -= a * &x[j];
        }
        x[k] = s / &rows[k][&k];
    }

    let mut out: Vec<Option<BigRational>> = pinned.to_vec();
    for (k, &i) in free.iter().enumerate() {
        out[i] = Some(std::mem::take(&mut x[k]));
    }
    out
}

fn dense(n: usize, pinned: &[(usize, BigRational)]) -> Result<Vec<Option<BigRational>>> {
    let mut values = vec![None; n];
    for (i, v) in pinned {
        if *i >= n {
            return invalid(format!("boundary node {i} out of range"));
        }
        if values[*i].replace(v.clone()).is_some() {
            return invalid(format!("boundary node {i} listed twice"));
        }
    }
    Ok(values)
}

fn check_cap(g: &GraphSkeleton, cap: usize) -> Result<()> {
    if g.node_count() > cap {
        return Err(Error::Capacity(format!(
            "exact solver is limited to {cap} nodes, graph has {}",
            g.node_count()
        )));
    }
    Ok(())
}

/// Exact harmonic extension of the pinned values.
pub fn exact_solve(g: &GraphSkeleton, pinned: &[(usize, BigRational)]) -> Result<Vec<BigRational>> {
    exact_solve_capped(g, pinned, EXACT_NODE_CAP)
}

pub fn exact_solve_capped(g: &GraphSkeleton, pinned: &[(usize, BigRational)], cap: usize) -> Result<Vec<BigRational>> {
    check_cap(g, cap)?;
    let p = dense(g.node_count(), pinned)?;
    if pinned.is_empty() {
        return Err(Error::Singular("no pinned nodes".into()));
    }
    solve_partial(g, &p)
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::Singular(format!("node {i} lies in a free component without boundary"))))
        .collect()
}

/// Effective conductance between `a` and `b`; zero when they are not
/// connected. Components touching neither set are ignored.
pub fn exact_effective_conductance(g: &GraphSkeleton, a: &[usize], b: &[usize]) -> Result<BigRational> {
    check_terminals(a, b)?;
    check_cap(g, EXACT_NODE_CAP)?;
    let pinned: Vec<(usize, BigRational)> = a
        .iter()
        .map(|&i| (i, BigRational::zero()))
        .chain(b.iter().map(|&i| (i, BigRational::one())))
        .collect();
    let u = solve_partial(g, &dense(g.node_count(), &pinned)?);
    let adj = g.adjacency();
    let mut current = BigRational::zero();
    for &i in b {
        for &(j, c) in &adj[i] {
            if let Some(uj) = &u[j] {
                current += BigRational::from_u32(c) * (BigRational::one() - uj);
            }
        }
    }
    Ok(current)
}

/// Effective resistance between `a` and `b`.
pub fn exact_effective_resistance(g: &GraphSkeleton, a: &[usize], b: &[usize]) -> Result<BigRational> {
    let c = exact_effective_conductance(g, a, b)?;
    if c.is_zero() {
        return Err(Error::Singular("terminal sets are not connected".into()));
    }
    Ok(c.recip())
}
