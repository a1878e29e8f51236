//! Resistance experiments: per-level series, scaling factor, chaining
//! bounds and Green function growth on the infinite carpet.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::VertexFunction;
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    cell_graph, vertex_graph, vinfty_ball, GraphSkeleton, LatticePoint, Mode, Word, DEFAULT_MAX_LEVEL, OFFSETS,
};
use crate::numeric::linear_fit;
use crate::solver::{effective_resistance_solve, green_function, prolong, SolverOptions};

/// Hard bounds on the resistance scaling factor.
pub const RHO_BOUNDS: (f64, f64) = (7.0 / 6.0, 1.5);
/// Window the fitted factor is compared against without failing.
pub const RHO_SOFT_WINDOW: (f64, f64) = (1.20, 1.30);
/// Published numerical value.
pub const RHO_REFERENCE: f64 = 1.25148;
/// Default top level for the corner and cell series.
pub const DEFAULT_SERIES_LEVEL: u32 = 6;

/// `log(8 rho) / log 3`.
pub fn beta_star(rho: f64) -> f64 {
    (8.0 * rho).ln() / 3f64.ln()
}

/// `log rho / log 3`.
pub fn gamma(rho: f64) -> f64 {
    rho.ln() / 3f64.ln()
}

/// One resistance quantity over consecutive levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistanceSeries {
    pub quantity: String,
    pub levels: Vec<u32>,
    pub values: Vec<f64>,
}

impl ResistanceSeries {
    pub fn new(quantity: impl Into<String>, levels: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if levels.len() != values.len() {
            return Err(Error::Dimension {
                expected: levels.len(),
                actual: values.len(),
            });
        }
        if levels.windows(2).any(|w| w[1] != w[0] + 1) {
            return invalid("levels must be contiguous");
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return invalid("resistances must be positive and finite");
        }
        Ok(Self {
            quantity: quantity.into(),
            levels,
            values,
        })
    }

    /// A series `c * rho^n` for `n` in `levels`.
    pub fn geometric(quantity: &str, c: f64, rho: f64, levels: std::ops::RangeInclusive<u32>) -> Result<Self> {
        let levels: Vec<u32> = levels.collect();
        let values = levels.iter().map(|&n| c * rho.powi(n as i32)).collect();
        Self::new(quantity, levels, values)
    }

    pub fn value(&self, level: u32) -> Option<f64> {
        self.levels.iter().position(|&l| l == level).map(|i| self.values[i])
    }

    /// `value_{n+1} / value_n`.
    pub fn ratios(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Fitted scaling factor of a series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub rho_hat: f64,
    pub beta_star_hat: f64,
    pub gamma_hat: f64,
    pub prefactor: f64,
    pub fit_levels: Vec<u32>,
    pub ratios: Vec<f64>,
    pub within_bounds: bool,
    pub within_soft_window: bool,
}

/// Least-squares fit of `log value = log c + n log rho`. Level 1 is left
/// out of the fit when at least two later levels remain.
pub fn estimate_rho(series: &ResistanceSeries) -> Result<RhoEstimate> {
    if series.levels.len() < 3 {
        return invalid(format!(
            "estimating rho needs at least 3 levels, got {}",
            series.levels.len()
        ));
    }
    let late: Vec<usize> = (0..series.levels.len()).filter(|&i| series.levels[i] >= 2).collect();
    let used: Vec<usize> = if late.len() >= 2 { late } else { (0..series.levels.len()).collect() };
    let x: Vec<f64> = used.iter().map(|&i| series.levels[i] as f64).collect();
    let y: Vec<f64> = used.iter().map(|&i| series.values[i].ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y).ok_or_else(|| Error::InvalidInput("degenerate fit".into()))?;
    let rho = slope.exp();
    Ok(RhoEstimate {
        rho_hat: rho,
        beta_star_hat: beta_star(rho),
        gamma_hat: gamma(rho),
        prefactor: intercept.exp(),
        fit_levels: used.iter().map(|&i| series.levels[i]).collect(),
        ratios: series.ratios(),
        within_bounds: (RHO_BOUNDS.0..=RHO_BOUNDS.1).contains(&rho),
        within_soft_window: (RHO_SOFT_WINDOW.0..=RHO_SOFT_WINDOW.1).contains(&rho),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplicativityReport {
    /// Worst `max(x_n x_m / x_{n+m}, x_{n+m} / (x_n x_m))`.
    pub c_hat: f64,
    /// Worst constant among pairs with `n + m = L`, indexed by `L`.
    pub by_top_level: Vec<(u32, f64)>,
    /// Running maximum of `by_top_level`.
    pub running_max: Vec<f64>,
    /// `last / first - 1` of the running maximum.
    pub drift: f64,
}

/// Empirical constant in `x_n x_m / C <= x_{n+m} <= C x_n x_m`.
pub fn multiplicativity_check(series: &ResistanceSeries) -> Result<MultiplicativityReport> {
    let mut by_top_level = Vec::new();
    for &top in &series.levels {
        let mut worst: Option<f64> = None;
        for n in 1..top {
            let m = top - n;
            if let (Some(a), Some(b), Some(c)) = (series.value(n), series.value(m), series.value(top)) {
                let r = a * b / c;
                let k = r.max(1.0 / r);
                worst = Some(worst.map_or(k, |w: f64| w.max(k)));
            }
        }
        if let Some(w) = worst {
            by_top_level.push((top, w));
        }
    }
    if by_top_level.is_empty() {
        return invalid("multiplicativity needs levels n, m and n + m in the series");
    }
    let mut running_max = Vec::with_capacity(by_top_level.len());
    let mut acc = 0.0f64;
    for &(_, w) in &by_top_level {
        acc = acc.max(w);
        running_max.push(acc);
    }
    let drift = running_max.last().unwrap() / running_max[0] - 1.0;
    Ok(MultiplicativityReport {
        c_hat: acc,
        by_top_level,
        running_max,
        drift,
    })
}

/// `p_i` as a lattice point of `V_n`.
pub fn corner_point(i: usize, level: u32) -> LatticePoint {
    let s = 3u64.pow(level);
    LatticePoint::new(OFFSETS[i].0 * s, OFFSETS[i].1 * s, level)
}

/// Indices of the left (`x = 0`) and right (`x = 1`) sides of `V_n`.
pub fn vertical_sides(g: &GraphSkeleton) -> Result<(Vec<usize>, Vec<usize>)> {
    let points = g
        .points()
        .ok_or_else(|| Error::InvalidInput("side sets need a vertex graph".into()))?;
    let scale = 2 * 3u64.pow(g.level);
    let left = (0..points.len()).filter(|&i| points[i].x == 0).collect();
    let right = (0..points.len()).filter(|&i| points[i].x == scale).collect();
    Ok((left, right))
}

fn check_level(n_max: u32) -> Result<()> {
    if n_max == 0 {
        return invalid("series start at level 1");
    }
    if n_max > DEFAULT_MAX_LEVEL {
        return Err(Error::Capacity(format!(
            "level {n_max} exceeds the cap {DEFAULT_MAX_LEVEL}"
        )));
    }
    Ok(())
}

/// Resistances on `V_n` for `n = 1..=n_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CornerBundle {
    /// Between the two vertical sides.
    pub sides: ResistanceSeries,
    pub p0_p1: ResistanceSeries,
    pub p1_p5: ResistanceSeries,
    pub p3_p7: ResistanceSeries,
    pub p0_p4: ResistanceSeries,
    pub iterations: Vec<usize>,
}

impl CornerBundle {
    pub fn all(&self) -> [&ResistanceSeries; 5] {
        [&self.sides, &self.p0_p1, &self.p1_p5, &self.p3_p7, &self.p0_p4]
    }
}

pub fn corner_resistances(n_max: u32, opts: &SolverOptions) -> Result<CornerBundle> {
    check_level(n_max)?;
    const PAIRS: [(usize, usize); 4] = [(0, 1), (1, 5), (3, 7), (0, 4)];
    let mut values = vec![Vec::new(); 5];
    let mut iterations = Vec::new();
    let mut previous: Vec<Option<VertexFunction<f64>>> = vec![None; 5];
    for n in 1..=n_max {
        let g = Arc::new(vertex_graph(n, Mode::Carpet)?);
        let mut terminals = vec![vertical_sides(&g)?];
        for (i, j) in PAIRS {
            let find = |k: usize| {
                g.index_of(&corner_point(k, n))
                    .ok_or_else(|| Error::InvalidInput(format!("p{k} missing from V_{n}")))
            };
            terminals.push((vec![find(i)?], vec![find(j)?]));
        }
        let mut iters = 0;
        for (q, (a, b)) in terminals.iter().enumerate() {
            let guess = match &previous[q] {
                Some(u) => Some(prolong(u, &g)?),
                None => None,
            };
            let rs = effective_resistance_solve(&g, a, b, guess.as_deref(), opts)?;
            iters += rs.report.iterations;
            values[q].push(rs.resistance);
            previous[q] = Some(VertexFunction::new(g.clone(), rs.report.solution)?);
        }
        iterations.push(iters);
    }
    let levels: Vec<u32> = (1..=n_max).collect();
    let mut series = values
        .into_iter()
        .zip(["R_V", "R(p0,p1)", "R(p1,p5)", "R(p3,p7)", "R(p0,p4)"])
        .map(|(v, q)| ResistanceSeries::new(q, levels.clone(), v));
    Ok(CornerBundle {
        sides: series.next().unwrap()?,
        p0_p1: series.next().unwrap()?,
        p1_p5: series.next().unwrap()?,
        p3_p7: series.next().unwrap()?,
        p0_p4: series.next().unwrap()?,
        iterations,
    })
}

/// Resistances on `W_n` between repeated-digit words.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellBundle {
    pub w0_w1: ResistanceSeries,
    pub w0_w4: ResistanceSeries,
    pub w1_w5: ResistanceSeries,
    pub w3_w7: ResistanceSeries,
}

impl CellBundle {
    pub fn all(&self) -> [&ResistanceSeries; 4] {
        [&self.w0_w1, &self.w0_w4, &self.w1_w5, &self.w3_w7]
    }
}

/// Resistance between two words of the same level on `W_n`.
pub fn cell_resistance(g: &GraphSkeleton, v: &Word, w: &Word, opts: &SolverOptions) -> Result<f64> {
    let a = g
        .index_of_word(v)
        .ok_or_else(|| Error::InvalidInput(format!("word {v} not in graph")))?;
    let b = g
        .index_of_word(w)
        .ok_or_else(|| Error::InvalidInput(format!("word {w} not in graph")))?;
    if a == b {
        return Ok(0.0);
    }
    Ok(effective_resistance_solve(g, &[a], &[b], None, opts)?.resistance)
}

pub fn cell_resistances(n_max: u32, opts: &SolverOptions) -> Result<CellBundle> {
    check_level(n_max)?;
    const PAIRS: [(u8, u8); 4] = [(0, 1), (0, 4), (1, 5), (3, 7)];
    let mut values = vec![Vec::new(); 4];
    let mut previous: Vec<Option<Vec<f64>>> = vec![None; 4];
    for n in 1..=n_max {
        let g = cell_graph(n, Mode::Carpet)?;
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            let a = Word::repeated(Mode::Carpet, i, n)?.index();
            let b = Word::repeated(Mode::Carpet, j, n)?.index();
            // a child word inherits its parent's value
            let guess: Option<Vec<f64>> = previous[q]
                .as_ref()
                .map(|p| (0..g.node_count()).map(|k| p[k / 8]).collect());
            let rs = effective_resistance_solve(&g, &[a], &[b], guess.as_deref(), opts)?;
            values[q].push(rs.resistance);
            previous[q] = Some(rs.report.solution);
        }
    }
    let levels: Vec<u32> = (1..=n_max).collect();
    let mut series = values
        .into_iter()
        .zip(["N(0,1)", "N(0,4)", "N(1,5)", "N(3,7)"])
        .map(|(v, q)| ResistanceSeries::new(q, levels.clone(), v));
    Ok(CellBundle {
        w0_w1: series.next().unwrap()?,
        w0_w4: series.next().unwrap()?,
        w1_w5: series.next().unwrap()?,
        w3_w7: series.next().unwrap()?,
    })
}

/// Words `w = w^(1), ..., w^(n+1) = 0^n` whose consecutive resistances
/// bound `N(w, 0^n)` by the triangle inequality.
pub fn chain_words(w: &Word) -> Result<Vec<Word>> {
    let n = w.level() as usize;
    let d = w.digits();
    let mut chain = Vec::with_capacity(n + 1);
    for k in 1..=n {
        let keep = n - k + 1;
        let mut digits = d[..keep].to_vec();
        digits.extend(std::iter::repeat(d[keep - 1]).take(k - 1));
        chain.push(Word::new(w.mode(), digits)?);
    }
    chain.push(Word::new(w.mode(), vec![0; n])?);
    Ok(chain)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainBound {
    pub word: String,
    pub links: Vec<f64>,
    pub bound: f64,
    pub direct: f64,
}

impl ChainBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.bound + tol * self.bound.max(1.0) >= self.direct
    }
}

/// Sum of the chain resistances and the direct `N(w, 0^n)`.
pub fn chain_bound(w: &Word, opts: &SolverOptions) -> Result<ChainBound> {
    if w.level() == 0 {
        return invalid("chain bound needs a nonempty word");
    }
    let g = cell_graph(w.level(), w.mode())?;
    let chain = chain_words(w)?;
    let links = chain
        .windows(2)
        .map(|p| cell_resistance(&g, &p[0], &p[1], opts))
        .collect::<Result<Vec<_>>>()?;
    let zero = chain.last().unwrap();
    Ok(ChainBound {
        word: w.to_string(),
        bound: links.iter().sum(),
        direct: cell_resistance(&g, w, zero, opts)?,
        links,
    })
}

/// Resistance to the boundary and Green function at the center of
/// graph-distance balls in `V_infinity`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VInftyScaling {
    pub center: (u64, u64),
    pub radii: Vec<u32>,
    pub nodes: Vec<usize>,
    pub resistance: Vec<f64>,
    pub green: Vec<f64>,
    /// Slope of `log g(z, z)` against `log r`.
    pub gamma_hat: Option<f64>,
    /// Largest graph distance over Euclidean distance, in lattice units.
    pub distortion: f64,
}

pub fn vinfty_scaling(z: &LatticePoint, radii: &[u32], opts: &SolverOptions) -> Result<VInftyScaling> {
    if radii.is_empty() || radii.contains(&0) {
        return invalid("radii must be positive");
    }
    let mut out = VInftyScaling {
        center: (z.x, z.y),
        radii: radii.to_vec(),
        nodes: Vec::new(),
        resistance: Vec::new(),
        green: Vec::new(),
        gamma_hat: None,
        distortion: 0.0,
    };
    for &r in radii {
        let ball = Arc::new(vinfty_ball(z, r)?);
        let zi = ball
            .index_of(z)
            .ok_or_else(|| Error::InvalidInput("center missing from its ball".into()))?;
        let boundary: Vec<usize> = (0..ball.node_count()).filter(|&i| ball.boundary[i]).collect();
        if boundary.is_empty() {
            return invalid(format!("ball of radius {r} has no boundary"));
        }
        let rs = effective_resistance_solve(&ball, &[zi], &boundary, None, opts)?;
        let g = green_function(ball.clone(), zi, opts)?;
        for (p, &d) in ball.points().unwrap().iter().zip(&ball.distance) {
            let dx = p.x as f64 - z.x as f64;
            let dy = p.y as f64 - z.y as f64;
            let e = (dx * dx + dy * dy).sqrt();
            if e > 0.0 {
                out.distortion = out.distortion.max(d as f64 / e);
            }
        }
        out.nodes.push(ball.node_count());
        out.resistance.push(rs.resistance);
        out.green.push(g.center_value());
    }
    if radii.len() >= 2 {
        let x: Vec<f64> = radii.iter().map(|&r| (r as f64).ln()).collect();
        let y: Vec<f64> = out.green.iter().map(|g| g.ln()).collect();
        out.gamma_hat = linear_fit(&x, &y).map(|(s, _)| s);
    }
    Ok(out)
}

/// Flat report for the command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistanceReport {
    pub quantity: String,
    pub levels: Vec<u32>,
    pub values: Vec<f64>,
    pub rho_hat: Option<f64>,
    pub beta_star_hat: Option<f64>,
    #[serde(rename = "C_hat")]
    pub c_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
}

impl ResistanceReport {
    pub fn from_series(series: &ResistanceSeries) -> Self {
        let est = estimate_rho(series).ok();
        Self {
            quantity: series.quantity.clone(),
            levels: series.levels.clone(),
            values: series.values.clone(),
            rho_hat: est.as_ref().map(|e| e.rho_hat),
            beta_star_hat: est.as_ref().map(|e| e.beta_star_hat),
            c_hat: multiplicativity_check(series).ok().map(|m| m.c_hat),
            gamma_hat: est.as_ref().map(|e| e.gamma_hat),
        }
    }

    pub fn from_vinfty(s: &VInftyScaling) -> Self {
        Self {
            quantity: format!("g_B(z,z) z=({},{})", s.center.0, s.center.1),
            levels: s.radii.clone(),
            values: s.green.clone(),
            rho_hat: None,
            beta_star_hat: None,
            c_hat: None,
            gamma_hat: s.gamma_hat,
        }
    }
}

/// CSV with one row per (quantity, level).
pub fn reports_csv(reports: &[ResistanceReport]) -> String {
    let mut out = String::from("quantity,level,value,rho_hat,beta_star_hat,C_hat,gamma_hat\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.12}")).unwrap_or_default();
    for r in reports {
        for (l, v) in r.levels.iter().zip(&r.values) {
            out.push_str(&format!(
                "{},{},{:.15e},{},{},{},{}\n",
                r.quantity,
                l,
                v,
                opt(r.rho_hat),
                opt(r.beta_star_hat),
                opt(r.c_hat),
                opt(r.gamma_hat)
            ));
        }
    }
    out
}
