//! Discrete energies on the approximation graphs and the seminorms built
//! from them.
//!
//! `D_n` sums `(u(p) - u(q))^2` over perimeter pairs of every level-n cell,
//! so an edge shared by two cells is counted twice; the multiplicity stored
//! in [`GraphSkeleton`] carries that count. `𝔇_n` is the plain energy on the
//! cell graph. The measure used for cell averages is the uniform counting
//! measure on lower-left corners of the level-`n+m` cells.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    cell_graph, cell_origins, vertex_graph, CellOrigin, GraphKind, GraphSkeleton, LatticePoint, Mode,
    NodeSet, OFFSETS,
};
use crate::numeric::{det_sum, Scalar};

/// Largest level whose cells are sampled by [`cell_average`].
pub const MAX_SAMPLE_LEVEL: u32 = 9;

/// Hausdorff dimension `log 8 / log 3`.
pub fn alpha() -> f64 {
    8f64.ln() / 3f64.ln()
}

/// `3^((beta - alpha) n)`, evaluated as `(3^beta / 8)^n`.
pub fn level_weight(beta: f64, n: u32) -> f64 {
    (3f64.powf(beta) / 8.0).powi(n as i32)
}

/// Something that can be evaluated at points of the carpet.
pub trait Evaluable<T>: Sync {
    fn eval(&self, p: &LatticePoint) -> Result<T>;
}

/// Adapter for a plain function of the geometric coordinates.
pub struct Planar<F>(pub F);

impl<F> Evaluable<f64> for Planar<F>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn eval(&self, p: &LatticePoint) -> Result<f64> {
        let (x, y) = p.coords();
        Ok((self.0)(x, y))
    }
}

/// Values on the nodes of a vertex graph, in the graph's node order.
#[derive(Debug, Clone)]
pub struct VertexFunction<T> {
    graph: Arc<GraphSkeleton>,
    values: Vec<T>,
}

impl<T: Scalar> VertexFunction<T> {
    pub fn new(graph: Arc<GraphSkeleton>, values: Vec<T>) -> Result<Self> {
        if graph.points().is_none() {
            return invalid("vertex functions live on graphs with lattice-point nodes");
        }
        if values.len() != graph.node_count() {
            return Err(Error::Dimension {
                expected: graph.node_count(),
                actual: values.len(),
            });
        }
        Ok(Self { graph, values })
    }

    pub fn from_fn(graph: Arc<GraphSkeleton>, f: impl Fn(&LatticePoint) -> T) -> Result<Self> {
        let values = match &graph.nodes {
            NodeSet::Points(points) => points.iter().map(f).collect(),
            _ => return invalid("vertex functions live on graphs with lattice-point nodes"),
        };
        Self::new(graph, values)
    }

    pub fn graph(&self) -> &Arc<GraphSkeleton> {
        &self.graph
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn level(&self) -> u32 {
        self.graph.level
    }

    pub fn points(&self) -> &[LatticePoint] {
        self.graph.points().expect("vertex graph")
    }

    pub fn value_at(&self, p: &LatticePoint) -> Option<&T> {
        let q = if p.level <= self.level() {
            p.refine(self.level())
        } else {
            p.coarsen(self.level())?
        };
        self.graph.index_of(&q).map(|i| &self.values[i])
    }

    /// Restriction to a coarser vertex graph.
    pub fn restrict(&self, coarse: Arc<GraphSkeleton>) -> Result<Self> {
        if coarse.level > self.level() || coarse.mode != self.graph.mode {
            return Err(Error::Level(format!(
                "cannot restrict a level-{} function to level {}",
                self.level(),
                coarse.level
            )));
        }
        let values = coarse
            .points()
            .ok_or_else(|| Error::InvalidInput("restriction target is not a vertex graph".into()))?
            .iter()
            .map(|p| self.value_at(p).cloned().ok_or_else(|| Error::Level("missing vertex".into())))
            .collect::<Result<_>>()?;
        Self::new(coarse, values)
    }

    /// The function `u o f_i` on the vertex graph one level down.
    pub fn compose_map(&self, digit: u8, coarse: Arc<GraphSkeleton>) -> Result<Self> {
        if coarse.level + 1 != self.level() {
            return Err(Error::Level("u o f_i needs a graph exactly one level coarser".into()));
        }
        let shift = 2 * 3u64.pow(coarse.level);
        let (ox, oy) = OFFSETS[digit as usize];
        let values = coarse
            .points()
            .expect("vertex graph")
            .iter()
            .map(|p| {
                let q = LatticePoint::new(p.x + shift * ox, p.y + shift * oy, self.level());
                self.graph
                    .index_of(&q)
                    .map(|i| self.values[i].clone())
                    .ok_or_else(|| Error::Level("image point missing".into()))
            })
            .collect::<Result<_>>()?;
        Self::new(coarse, values)
    }

    /// `u` composed with a node permutation (e.g. a square symmetry).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut values = self.values.clone();
        for (i, &j) in perm.iter().enumerate() {
            values[j] = self.values[i].clone();
        }
        Self::new(self.graph.clone(), values)
    }

    pub fn to_f64(&self) -> VertexFunction<f64> {
        VertexFunction {
            graph: self.graph.clone(),
            values: self.values.iter().map(Scalar::to_f64).collect(),
        }
    }
}

impl<T: Scalar> Evaluable<T> for VertexFunction<T> {
    fn eval(&self, p: &LatticePoint) -> Result<T> {
        self.value_at(p).cloned().ok_or_else(|| {
            Error::Level(format!(
                "point ({}, {}) at level {} is not a vertex of the level-{} graph",
                p.x,
                p.y,
                p.level,
                self.level()
            ))
        })
    }
}

/// Values on the words of one level, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFunction<T> {
    pub mode: Mode,
    pub level: u32,
    pub values: Vec<T>,
}

impl<T: Scalar> CellFunction<T> {
    pub fn new(mode: Mode, level: u32, values: Vec<T>) -> Result<Self> {
        let expected = mode.word_count(level);
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { mode, level, values })
    }

    pub fn constant(mode: Mode, level: u32, c: T) -> Self {
        Self {
            mode,
            level,
            values: vec![c; mode.word_count(level)],
        }
    }
}

/// `sum multiplicity * (u_a - u_b)^2` over the edges of `g`.
pub fn graph_energy<T: Scalar>(g: &GraphSkeleton, values: &[T]) -> Result<T> {
    if values.len() != g.node_count() {
        return Err(Error::Dimension {
            expected: g.node_count(),
            actual: values.len(),
        });
    }
    Ok(g.edges.iter().fold(T::zero(), |acc, e| {
        let d = values[e.a as usize].clone() - values[e.b as usize].clone();
        acc + T::from_u32(e.multiplicity) * d.clone() * d
    }))
}

/// Floating energy with a thread-independent reduction order.
pub fn graph_energy_f64(g: &GraphSkeleton, values: &[f64]) -> Result<f64> {
    if values.len() != g.node_count() {
        return Err(Error::Dimension {
            expected: g.node_count(),
            actual: values.len(),
        });
    }
    Ok(det_sum(g.edges.len(), |k| {
        let e = g.edges[k];
        let d = values[e.a as usize] - values[e.b as usize];
        e.multiplicity as f64 * d * d
    }))
}

/// The vertex energy `D_n(u, u)`.
pub fn energy_d<T: Scalar>(u: &VertexFunction<T>) -> T {
    graph_energy(&u.graph, &u.values).expect("length checked at construction")
}

/// `a_n(u) = rho^n D_n(u)`.
pub fn energy_a<T: Scalar>(u: &VertexFunction<T>, rho: f64) -> f64 {
    rho.powi(u.level() as i32) * energy_d(u).to_f64()
}

/// The cell energy `𝔇_n(c, c)` on the matching cell graph.
pub fn energy_frak_d<T: Scalar>(g: &GraphSkeleton, c: &CellFunction<T>) -> Result<T> {
    if g.kind != GraphKind::Cell || g.level != c.level || g.mode != c.mode {
        return Err(Error::Level(format!(
            "cell function of level {} does not match the graph",
            c.level
        )));
    }
    graph_energy(g, &c.values)
}

/// `B_n(c) = rho^n 𝔇_n(c)`.
pub fn energy_big_b<T: Scalar>(g: &GraphSkeleton, c: &CellFunction<T>, rho: f64) -> Result<f64> {
    Ok(rho.powi(c.level as i32) * energy_frak_d(g, c)?.to_f64())
}

/// The mean value operator `M_{n,m}`: each level-n value is the mean of its
/// `8^m` descendants.
pub fn mean_operator<T: Scalar>(c: &CellFunction<T>, target: u32) -> Result<CellFunction<T>> {
    if target >= c.level {
        return Err(Error::Level(format!(
            "mean operator needs a coarser target than level {}, got {target}",
            c.level
        )));
    }
    let block = c.mode.word_count(c.level - target);
    let count = T::from_u32(block as u32);
    let values = c
        .values
        .chunks(block)
        .map(|chunk| chunk.iter().cloned().fold(T::zero(), |a, b| a + b) / count.clone())
        .collect();
    CellFunction::new(c.mode, target, values)
}

/// Visits the `base^depth` descendants of `origin` in lexicographic order.
fn descendants(origin: &CellOrigin, depth: u32, mode: Mode, visit: &mut impl FnMut(CellOrigin)) {
    if depth == 0 {
        visit(*origin);
        return;
    }
    for &d in mode.alphabet() {
        let (ox, oy) = OFFSETS[d as usize];
        let child = CellOrigin {
            column: 3 * origin.column + ox,
            row: 3 * origin.row + oy,
            level: origin.level + 1,
        };
        descendants(&child, depth - 1, mode, visit);
    }
}

/// Approximates `P_n u` by averaging `u` over the lower-left corners of the
/// `8^depth` subcells of each level-n cell.
pub fn cell_average<T: Scalar>(
    u: &impl Evaluable<T>,
    level: u32,
    depth: u32,
    mode: Mode,
) -> Result<CellFunction<T>> {
    if level + depth > MAX_SAMPLE_LEVEL {
        return Err(Error::Capacity(format!(
            "sampling level {} exceeds {MAX_SAMPLE_LEVEL}",
            level + depth
        )));
    }
    let count = T::from_u32(mode.word_count(depth) as u32);
    let values = cell_origins(level, mode)
        .par_iter()
        .map(|o| {
            let mut acc = T::zero();
            let mut err = None;
            descendants(o, depth, mode, &mut |leaf| {
                if err.is_some() {
                    return;
                }
                let p = LatticePoint::new(2 * leaf.column, 2 * leaf.row, leaf.level);
                match u.eval(&p) {
                    Ok(v) => acc = acc.clone() + v,
                    Err(e) => err = Some(e),
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(acc / count.clone()),
            }
        })
        .collect::<Result<Vec<T>>>()?;
    CellFunction::new(mode, level, values)
}

/// `b_n(u) = rho^n 𝔇_n(P_n u)` with `P_n` sampled at the given depth.
pub fn energy_b(u: &impl Evaluable<f64>, level: u32, rho: f64, depth: u32) -> Result<f64> {
    let c = cell_average(u, level, depth, Mode::Carpet)?;
    let g = cell_graph(level, Mode::Carpet)?;
    energy_big_b(&g, &c, rho)
}

/// `D_k(u|V_k)` for `k = 1 ..= level(u)`.
pub fn vertex_energy_profile(u: &VertexFunction<f64>) -> Result<Vec<f64>> {
    let mode = u.graph.mode;
    (1..=u.level())
        .map(|k| {
            if k == u.level() {
                return graph_energy_f64(&u.graph, &u.values);
            }
            let coarse = Arc::new(vertex_graph(k, mode)?);
            let r = u.restrict(coarse)?;
            graph_energy_f64(&r.graph, &r.values)
        })
        .collect()
}

/// `𝔇_k(P_k u)` for `k = 1 ..= levels`, with `P_k` sampled at depth `depth(k)`.
pub fn cell_energy_profile(
    u: &impl Evaluable<f64>,
    levels: u32,
    depth: impl Fn(u32) -> u32,
) -> Result<Vec<f64>> {
    (1..=levels)
        .map(|k| {
            let c = cell_average(u, k, depth(k), Mode::Carpet)?;
            let g = cell_graph(k, Mode::Carpet)?;
            energy_frak_d(&g, &c)
        })
        .collect()
}

/// Partial sums of `sum_n 3^((beta - alpha) n) x_n` for a level profile
/// `x_1, x_2, ...`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesReport {
    pub beta: f64,
    pub levels: Vec<u32>,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// `term_{n+1} / term_n`; values below one indicate a convergent tail.
    pub tail_ratios: Vec<f64>,
}

impl SeriesReport {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// The series seminorm `E_beta` (or `𝔈_beta` for a cell profile), truncated
/// at the profile length.
pub fn series_e(profile: &[f64], beta: f64) -> SeriesReport {
    let levels: Vec<u32> = (1..=profile.len() as u32).collect();
    let terms: Vec<f64> = levels
        .iter()
        .zip(profile)
        .map(|(&n, &x)| level_weight(beta, n) * x)
        .collect();
    let partial_sums = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let tail_ratios = terms
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::NAN })
        .collect();
    SeriesReport {
        beta,
        levels,
        terms,
        partial_sums,
        tail_ratios,
    }
}

/// `max_n 3^((beta - alpha) n) D_n(u)` over the profile.
pub fn sup_form(profile: &[f64], beta: f64) -> f64 {
    profile
        .iter()
        .enumerate()
        .map(|(i, &x)| level_weight(beta, i as u32 + 1) * x)
        .fold(0.0, f64::max)
}

/// Annulus integrals `∫∫_{|x-y| < 3^-n} (u(x) - u(y))^2` on the sampled measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub beta: f64,
    pub depth: u32,
    /// Raw integrals for `n = 0 ..= levels`.
    pub raw: Vec<f64>,
    /// `3^((alpha + beta) n) raw_n` for `n = 1 ..= levels`.
    pub terms: Vec<f64>,
    pub total: f64,
}

/// Raw annulus integrals for `n = 0 ..= levels` with `8^depth` sample points.
pub fn annulus_integrals(u: &impl Evaluable<f64>, levels: u32, depth: u32) -> Result<Vec<f64>> {
    if depth < levels {
        return invalid(format!("sampling depth {depth} is coarser than level {levels}"));
    }
    if depth > 7 {
        return Err(Error::Capacity(format!("quadrature depth {depth} exceeds 7")));
    }
    let origins = cell_origins(depth, Mode::Carpet);
    let values: Vec<f64> = origins
        .par_iter()
        .map(|o| u.eval(&LatticePoint::new(2 * o.column, 2 * o.row, depth)))
        .collect::<Result<_>>()?;
    let weight = 8f64.powi(-(depth as i32)).powi(2);
    (0..=levels)
        .map(|n| {
            let span = 3u64.pow(depth - n);
            let limit = (span * span) as i64;
            // bucket samples by level-n cell
            let side = 3u64.pow(n) as usize;
            let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); side * side];
            for (i, o) in origins.iter().enumerate() {
                let (bc, br) = ((o.column / span) as usize, (o.row / span) as usize);
                buckets[bc * side + br].push(i);
            }
            let sum = det_sum(origins.len(), |i| {
                let o = origins[i];
                let (bc, br) = ((o.column / span) as i64, (o.row / span) as i64);
                let mut acc = 0.0;
                for dc in -1..=1 {
                    for dr in -1..=1 {
                        let (c, r) = (bc + dc, br + dr);
                        if c < 0 || r < 0 || c >= side as i64 || r >= side as i64 {
                            continue;
                        }
                        for &j in &buckets[c as usize * side + r as usize] {
                            let q = origins[j];
                            let dx = o.column as i64 - q.column as i64;
                            let dy = o.row as i64 - q.row as i64;
                            if dx * dx + dy * dy < limit {
                                let d = values[i] - values[j];
                                acc += d * d;
                            }
                        }
                    }
                }
                acc
            });
            Ok(sum * weight)
        })
        .collect()
}

/// Weights precomputed annulus integrals into the Besov-type sum.
pub fn weight_annuli(raw: &[f64], beta: f64, depth: u32) -> QuadratureReport {
    let terms: Vec<f64> = raw
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, &v)| 3f64.powf((alpha() + beta) * n as f64) * v)
        .collect();
    QuadratureReport {
        beta,
        depth,
        raw: raw.to_vec(),
        total: terms.iter().sum(),
        terms,
    }
}

/// Double-integral quadrature cross-check of the series seminorms.
pub fn besov_quadrature(u: &impl Evaluable<f64>, beta: f64, levels: u32, depth: u32) -> Result<QuadratureReport> {
    let raw = annulus_integrals(u, levels, depth)?;
    Ok(weight_annuli(&raw, beta, depth))
}

/// One row of an [`EnergyReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyRow {
    pub level: u32,
    #[serde(rename = "D")]
    pub d: f64,
    pub a: f64,
    pub b: Option<f64>,
    pub partial_sum: f64,
    pub sup_form: f64,
}

/// Per-level energies of one function with the exponents used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub function: String,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub rows: Vec<EnergyRow>,
}

impl EnergyReport {
    /// Assembles the report from a vertex profile and an optional cell profile.
    pub fn build(function: &str, vertex: &[f64], cell: Option<&[f64]>, beta: f64, rho: f64) -> Self {
        let series = series_e(vertex, beta);
        let rows = vertex
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let level = i as u32 + 1;
                EnergyRow {
                    level,
                    d,
                    a: rho.powi(level as i32) * d,
                    b: cell.and_then(|c| c.get(i)).map(|x| rho.powi(level as i32) * x),
                    partial_sum: series.partial_sums[i],
                    sup_form: sup_form(&vertex[..=i], beta),
                }
            })
            .collect();
        Self {
            function: function.to_string(),
            alpha: alpha(),
            beta,
            rho,
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,D,a,b,partial_sum,sup_form\n");
        for r in &self.rows {
            let b = r.b.map(|v| format!("{v:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:e},{:e},{},{:e},{:e}\n",
                r.level, r.d, r.a, b, r.partial_sum, r.sup_form
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Symmetry;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(level: u32) -> Arc<GraphSkeleton> {
        Arc::new(vertex_graph(level, Mode::Carpet).unwrap())
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Energy summed cell by cell over every perimeter pair, without the
    /// multiplicity bookkeeping of the graph.
    fn brute_d(level: u32, f: impl Fn(&LatticePoint) -> BigRational) -> BigRational {
        let mut acc = BigRational::from_integer(0.into());
        for o in cell_origins(level, Mode::Carpet) {
            let v = o.vertices(Mode::Carpet);
            for &(i, j) in Mode::Carpet.perimeter_pairs() {
                let d = f(&v[i]) - f(&v[j]);
                acc += d.clone() * d;
            }
        }
        acc
    }

    #[test]
    fn constant_has_zero_energy() {
        let g = graph(2);
        let u = VertexFunction::from_fn(g, |_| 3.5).unwrap();
        assert_eq!(energy_d(&u), 0.0);
        assert_eq!(energy_a(&u, 1.5), 0.0);
    }

    #[test]
    fn linear_function_energy() {
        for level in 1..=4 {
            let x = |p: &LatticePoint| rat(p.x as i64, p.scale() as i64);
            let u = VertexFunction::from_fn(graph(level), x).unwrap();
            let expected = rat(8, 9).pow(level as i32);
            assert_eq!(energy_d(&u), expected);
            assert_eq!(brute_d(level, x), expected);
            let a = energy_a(&u, 1.5);
            assert!((a - (4.0f64 / 3.0).powi(level as i32)).abs() < 1e-12);
            assert!((energy_a(&u, 1.0) - energy_d(&u.to_f64())).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            VertexFunction::new(graph(1), vec![0.0; 3]),
            Err(Error::Dimension { expected: 40, actual: 3 })
        ));
    }

    #[test]
    fn ring_cell_energies() {
        let g = cell_graph(1, Mode::Carpet).unwrap();
        let mut ind = vec![0.0; 8];
        ind[0] = 1.0;
        let c = CellFunction::new(Mode::Carpet, 1, ind).unwrap();
        assert_eq!(energy_frak_d(&g, &c).unwrap(), 2.0);

        // brute force over the 8-cycle 0-1-...-7-0
        let pos: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let brute: f64 = (0..8).map(|i| (pos[i] - pos[(i + 1) % 8]).powi(2)).sum();
        assert_eq!(brute, 56.0);
        let c = CellFunction::new(Mode::Carpet, 1, pos).unwrap();
        assert_eq!(energy_frak_d(&g, &c).unwrap(), brute);

        let constant = CellFunction::constant(Mode::Carpet, 1, 2.0);
        assert_eq!(energy_frak_d(&g, &constant).unwrap(), 0.0);
    }

    #[test]
    fn mean_operator_examples() {
        let c = CellFunction::constant(Mode::Carpet, 3, rat(5, 3));
        let m = mean_operator(&c, 1).unwrap();
        assert!(m.values.iter().all(|v| *v == rat(5, 3)));

        let values = (0..64).map(|i| if i % 8 == 0 { rat(1, 1) } else { rat(0, 1) }).collect();
        let c = CellFunction::new(Mode::Carpet, 2, values).unwrap();
        let m = mean_operator(&c, 1).unwrap();
        assert!(m.values.iter().all(|v| *v == rat(1, 8)));
        assert!(mean_operator(&c, 2).is_err());
    }

    proptest! {
        #[test]
        fn mean_operator_is_linear(seed in 0u64..1000, scale in -5i64..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || -> Vec<BigRational> {
                (0..512).map(|_| rat(rng.gen_range(-20..20), rng.gen_range(1..7))).collect()
            };
            let (a, b) = (draw(), draw());
            let lam = rat(scale, 1);
            let combo: Vec<_> = a.iter().zip(&b).map(|(x, y)| lam.clone() * x + y).collect();
            let m = |v: Vec<BigRational>| mean_operator(&CellFunction::new(Mode::Carpet, 3, v).unwrap(), 1).unwrap().values;
            let lhs = m(combo);
            let (ma, mb) = (m(a), m(b));
            for i in 0..8 {
                prop_assert_eq!(&lhs[i], &(lam.clone() * &ma[i] + &mb[i]));
            }
        }

        #[test]
        fn energies_are_quadratic_and_nonnegative(seed in 0u64..500, lam in -4i64..4) {
            let g = graph(2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<BigRational> = (0..g.node_count()).map(|_| rat(rng.gen_range(-9..9), rng.gen_range(1..5))).collect();
            let u = VertexFunction::new(g.clone(), vals.clone()).unwrap();
            let scaled = VertexFunction::new(g, vals.iter().map(|v| v * rat(lam, 1)).collect()).unwrap();
            let e = energy_d(&u);
            prop_assert!(e >= rat(0, 1));
            prop_assert_eq!(energy_d(&scaled), e * rat(lam * lam, 1));
        }
    }

    #[test]
    fn self_similar_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3u32 {
            let fine = graph(n + 1);
            let coarse = graph(n);
            let vals = (0..fine.node_count()).map(|_| rat(rng.gen_range(-50..50), rng.gen_range(1..9))).collect();
            let u = VertexFunction::new(fine, vals).unwrap();
            let parts = (0..8u8)
                .map(|i| energy_d(&u.compose_map(i, coarse.clone()).unwrap()))
                .fold(rat(0, 1), |a, b| a + b);
            assert_eq!(energy_d(&u), parts);
        }
    }

    #[test]
    fn symmetry_invariance() {
        let g = graph(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..g.node_count()).map(|_| rng.gen()).collect();
        let u = VertexFunction::new(g.clone(), vals).unwrap();
        let e = energy_d(&u);
        for s in Symmetry::ALL {
            let perm = s.permutation(&g).unwrap();
            let v = u.permuted(&perm).unwrap();
            assert!((energy_d(&v) - e).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn cell_average_examples() {
        let one = Planar(|_: f64, _: f64| 1.0);
        let c = cell_average(&one, 2, 3, Mode::Carpet).unwrap();
        assert!(c.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        // Exact cell mean of x over K_0 is 1/6. Sampled means at lower-left
        // corners sit half a subcell to the left: 1/6 - 3^-(1+m)/2.
        let x = Planar(|x: f64, _: f64| x);
        for m in 0..=5 {
            let c = cell_average(&x, 1, m, Mode::Carpet).unwrap();
            let expected = 1.0 / 6.0 - 0.5 * 3f64.powi(-(1 + m as i32));
            assert!((c.values[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_average_commutes_with_mean() {
        let x = |p: &LatticePoint| rat(p.x as i64 * p.y as i64 + 1, p.scale() as i64);
        struct R<F>(F);
        impl<F: Fn(&LatticePoint) -> BigRational + Sync> Evaluable<BigRational> for R<F> {
            fn eval(&self, p: &LatticePoint) -> Result<BigRational> {
                Ok((self.0)(p))
            }
        }
        let u = R(x);
        let coarse = cell_average(&u, 1, 3, Mode::Carpet).unwrap();
        let fine = cell_average(&u, 2, 2, Mode::Carpet).unwrap();
        assert_eq!(mean_operator(&fine, 1).unwrap(), coarse);
    }

    #[test]
    fn energy_b_of_x() {
        // column means 1/6, 1/2, 5/6 shift equally under corner sampling;
        // four ring edges cross columns with difference 1/3.
        let x = Planar(|x: f64, _: f64| x);
        for depth in [0, 2, 4] {
            assert!((energy_b(&x, 1, 1.0, depth).unwrap() - 4.0 / 9.0).abs() < 1e-14);
            assert!((energy_b(&x, 1, 1.25, depth).unwrap() - 1.25 * 4.0 / 9.0).abs() < 1e-14);
        }
        let one = Planar(|_: f64, _: f64| 1.0);
        assert_eq!(energy_b(&one, 2, 1.2, 2).unwrap(), 0.0);
    }

    #[test]
    fn series_and_sup_form() {
        let profile: Vec<f64> = (1..=10).map(|n| (6.0f64 / 7.0).powi(n)).collect();
        let s = series_e(&profile, alpha());
        let expected: f64 = (1..=10).map(|n| (6.0f64 / 7.0).powi(n)).sum();
        assert!((s.total() - expected).abs() < 1e-12);
        assert!(s.partial_sums.windows(2).all(|w| w[1] >= w[0]));

        let threshold = (8.0f64 * 7.0 / 6.0).ln() / 3f64.ln();
        let s = series_e(&profile, threshold);
        for (i, p) in s.partial_sums.iter().enumerate() {
            assert!((p - (i + 1) as f64).abs() < 1e-9);
        }
        assert!((sup_form(&profile, threshold) - 1.0).abs() < 1e-12);

        let lin: Vec<f64> = (1..=8).map(|n| (8.0f64 / 9.0).powi(n)).collect();
        assert!((sup_form(&lin, 2.0) - 1.0).abs() < 1e-12);
        assert_eq!(sup_form(&[0.0; 5], 2.0), 0.0);
        let sups: Vec<f64> = (1..=8).map(|k| sup_form(&lin[..k], 2.2)).collect();
        assert!(sups.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn vertex_profile_matches_direct() {
        let g = graph(4);
        let u = VertexFunction::from_fn(g, |p| p.coords().0).unwrap();
        let profile = vertex_energy_profile(&u).unwrap();
        for (i, d) in profile.iter().enumerate() {
            assert!((d - (8.0f64 / 9.0).powi(i as i32 + 1)).abs() < 1e-12);
        }
    }

    /// Plain double loop over all sample pairs.
    fn brute_annuli(u: impl Fn(f64, f64) -> f64, levels: u32, depth: u32) -> Vec<f64> {
        let pts: Vec<(f64, f64)> = cell_origins(depth, Mode::Carpet)
            .iter()
            .map(|o| {
                let s = 3f64.powi(depth as i32);
                (o.column as f64 / s, o.row as f64 / s)
            })
            .collect();
        let w = 8f64.powi(-(depth as i32)).powi(2);
        (0..=levels)
            .map(|n| {
                let r = 3f64.powi(-(n as i32));
                let mut acc = 0.0;
                for p in &pts {
                    for q in &pts {
                        let d = ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
                        if d < r - 1e-12 {
                            acc += (u(p.0, p.1) - u(q.0, q.1)).powi(2);
                        }
                    }
                }
                acc * w
            })
            .collect()
    }

    #[test]
    fn annuli_match_brute_force() {
        let f = |x: f64, y: f64| x * x + 0.3 * y;
        let fast = annulus_integrals(&Planar(f), 2, 3).unwrap();
        let slow = brute_annuli(f, 2, 3);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12 * b.max(1e-300), "{a} vs {b}");
        }
        assert!(fast.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadrature_of_x() {
        // Var(x) under the self-similar measure is 3/32, so the full double
        // integral of (x - x')^2 is 3/16. Pairs at distance >= 1 sit near
        // opposite corners and carry about a tenth of it.
        let raw = annulus_integrals(&Planar(|x: f64, _: f64| x), 1, 5).unwrap();
        let all_pairs = {
            let pts: Vec<f64> = cell_origins(5, Mode::Carpet)
                .iter()
                .map(|o| o.column as f64 / 243.0)
                .collect();
            let mean = pts.iter().sum::<f64>() / pts.len() as f64;
            2.0 * pts.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / pts.len() as f64
        };
        assert!((all_pairs - 3.0 / 16.0).abs() < 0.01);
        assert!(raw[0] <= all_pairs && raw[0] > 0.85 * all_pairs);
        let zero = annulus_integrals(&Planar(|_: f64, _: f64| 2.0), 2, 3).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(annulus_integrals(&Planar(|x: f64, _: f64| x), 3, 2).is_err());
    }

    #[test]
    fn report_csv_rows() {
        let r = EnergyReport::build("x", &[0.5, 0.25], Some(&[0.1, 0.2]), 2.0, 1.25);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 3);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"D\":0.5"));
    }
}
