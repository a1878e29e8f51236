//! Empirical checks of the inequalities and equivalences between the
//! discrete energies, plus the exact identity suite.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    alpha, annulus_integrals, cell_average, energy_big_b, energy_d, energy_frak_d, graph_energy, graph_energy_f64,
    level_weight, mean_operator, series_e, sup_form, weight_annuli, CellFunction, Evaluable, VertexFunction,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{cell_graph, vertex_graph, GraphSkeleton, LatticePoint, Mode};
use crate::numeric::{big, linear_fit, Scalar};
use crate::solver::{solve_dirichlet, BoundarySpec, SolverOptions};
use crate::special::{cantor_energy, good_energy, phi_minimize, HarmonicMinimizer, TriadicRational, RATIONAL_MAX_LEVEL};

/// Windows and sampling parameters of the empirical checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationConfig {
    /// Largest allowed `last / first - 1` of a running maximum.
    pub max_drift: f64,
    pub harnack_delta: f64,
    pub harnack_radius: f64,
    pub harnack_draws: usize,
    /// Largest allowed `max_n C_H(n) / min_n C_H(n)`.
    pub harnack_spread: f64,
    pub seed: u64,
    pub equivalence_window: (f64, f64),
    /// Largest allowed spread of one ratio across the tested exponents.
    pub equivalence_spread: f64,
    pub approx_local_window: (f64, f64),
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            max_drift: 0.2,
            harnack_delta: 0.5,
            harnack_radius: 1.0 / 6.0,
            harnack_draws: 20,
            harnack_spread: 2.0,
            seed: 1,
            equivalence_window: (1e-2, 1e2),
            equivalence_spread: 3.0,
            approx_local_window: (0.1, 10.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioInstance {
    pub label: String,
    pub level: u32,
    pub ratio: f64,
}

/// Ratios measured for one claim, with their level statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioReport {
    pub claim: String,
    pub instances: Vec<RatioInstance>,
    /// Instances dropped as `0 / 0`.
    pub excluded: usize,
    pub max: f64,
    pub min: f64,
    /// Least-squares slope of ratio against level.
    pub trend: f64,
    /// Largest ratio at each level.
    pub level_max: Vec<(u32, f64)>,
    pub running_max: Vec<f64>,
    /// `last / first - 1` of the running maximum.
    pub drift: f64,
    pub all_finite: bool,
    pub passed: bool,
}

impl RatioReport {
    pub fn new(claim: impl Into<String>, instances: Vec<RatioInstance>, excluded: usize) -> Self {
        let all_finite = instances.iter().all(|r| r.ratio.is_finite() && r.ratio >= 0.0);
        let max = instances.iter().map(|r| r.ratio).fold(f64::MIN, f64::max);
        let min = instances.iter().map(|r| r.ratio).fold(f64::MAX, f64::min);
        let x: Vec<f64> = instances.iter().map(|r| r.level as f64).collect();
        let y: Vec<f64> = instances.iter().map(|r| r.ratio).collect();
        let trend = linear_fit(&x, &y).map_or(0.0, |(s, _)| s);
        let mut levels: Vec<u32> = instances.iter().map(|r| r.level).collect();
        levels.sort_unstable();
        levels.dedup();
        let level_max: Vec<(u32, f64)> = levels
            .iter()
            .map(|&l| {
                let m = instances
                    .iter()
                    .filter(|r| r.level == l)
                    .map(|r| r.ratio)
                    .fold(f64::MIN, f64::max);
                (l, m)
            })
            .collect();
        let mut running_max = Vec::with_capacity(level_max.len());
        let mut acc = f64::MIN;
        for &(_, m) in &level_max {
            acc = acc.max(m);
            running_max.push(acc);
        }
        let drift = match (running_max.first(), running_max.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a - 1.0,
            _ => 0.0,
        };
        Self {
            claim: claim.into(),
            instances,
            excluded,
            max,
            min,
            trend,
            level_max,
            running_max,
            drift,
            all_finite,
            passed: all_finite,
        }
    }

    /// Passes when every ratio is finite and the running maximum drifts
    /// upward by less than `limit`.
    pub fn with_drift_limit(mut self, limit: f64) -> Self {
        self.passed = self.all_finite && !self.instances.is_empty() && self.drift < limit;
        self
    }

    /// `max / min` of the per-level maxima.
    pub fn spread(&self) -> f64 {
        let hi = self.level_max.iter().map(|l| l.1).fold(f64::MIN, f64::max);
        let lo = self.level_max.iter().map(|l| l.1).fold(f64::MAX, f64::min);
        hi / lo
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("claim,label,level,ratio\n");
        for r in &self.instances {
            out.push_str(&format!("{},{},{},{:.15e}\n", self.claim, r.label, r.level, r.ratio));
        }
        out
    }
}

fn ratio_or_exclude(num: f64, den: f64) -> Option<f64> {
    if num == 0.0 && den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// `a_n(u) / a_{n+m}(u)` for every member `u` of the family, over
/// `n + m <= n_max` and `m <= m_max`. Instances are indexed by `n + m`.
pub fn monotonicity_a(
    family: &[(String, VertexFunction<f64>)],
    rho: f64,
    n_max: u32,
    m_max: u32,
    cfg: &VerificationConfig,
) -> Result<RatioReport> {
    let mut instances = Vec::new();
    let mut excluded = 0;
    for (label, u) in family {
        let top = u.level().min(n_max);
        let profile = crate::energy::vertex_energy_profile(u)?;
        let a = |k: u32| rho.powi(k as i32) * profile[k as usize - 1];
        for n in 1..top {
            for m in 1..=m_max.min(top - n) {
                match ratio_or_exclude(a(n), a(n + m)) {
                    Some(ratio) => instances.push(RatioInstance {
                        label: format!("{label} n={n} m={m}"),
                        level: n + m,
                        ratio,
                    }),
                    None => excluded += 1,
                }
            }
        }
    }
    Ok(RatioReport::new("a_n <= C a_{n+m}", instances, excluded).with_drift_limit(cfg.max_drift))
}

/// `B_n(M_{n,m} c) / B_{n+m}(c)` for each cell function `c` and every
/// coarser `n` with `m <= m_max`. Instances are indexed by `n + m`.
pub fn monotonicity_b(
    cells: &[(String, CellFunction<f64>)],
    rho: f64,
    m_max: u32,
    cfg: &VerificationConfig,
) -> Result<RatioReport> {
    let mut instances = Vec::new();
    let mut excluded = 0;
    for (label, c) in cells {
        let top = c.level;
        let g = cell_graph(top, c.mode)?;
        let denom = energy_big_b(&g, c, rho)?;
        for n in top.saturating_sub(m_max).max(1)..top {
            let mc = mean_operator(c, n)?;
            let num = energy_big_b(&cell_graph(n, c.mode)?, &mc, rho)?;
            match ratio_or_exclude(num, denom) {
                Some(ratio) => instances.push(RatioInstance {
                    label: format!("{label} n={n} m={}", top - n),
                    level: top,
                    ratio,
                }),
                None => excluded += 1,
            }
        }
    }
    Ok(RatioReport::new("B_n(M c) <= C B_{n+m}(c)", instances, excluded).with_drift_limit(cfg.max_drift))
}

/// `𝔇_n(M_{n,m} 1_w) / 𝔇_{n+m}(1_w)` in exact arithmetic, for the
/// indicator of the cell with index `word` at level `n + m`.
pub fn indicator_frak_ratio(level: u32, word: usize, n: u32) -> Result<BigRational> {
    let count = Mode::Carpet.word_count(level);
    if word >= count {
        return invalid(format!("word index {word} out of range"));
    }
    let one = BigRational::from_integer(BigInt::from(1));
    let mut values = vec![BigRational::zero(); count];
    values[word] = one;
    let c = CellFunction::new(Mode::Carpet, level, values)?;
    let top = energy_frak_d(&cell_graph(level, Mode::Carpet)?, &c)?;
    let mc = mean_operator(&c, n)?;
    let low = energy_frak_d(&cell_graph(n, Mode::Carpet)?, &mc)?;
    Ok(low / top)
}

/// Independent uniform cell values on `[0, 1]`.
pub fn random_cell_function(level: u32, seed: u64) -> CellFunction<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..Mode::Carpet.word_count(level)).map(|_| rng.gen::<f64>()).collect();
    CellFunction {
        mode: Mode::Carpet,
        level,
        values,
    }
}

/// `D_k(u)` on `V_k` for `k = 1 ..= levels`, evaluating `u` at the vertices.
pub fn vertex_profile(u: &impl Evaluable<f64>, levels: u32) -> Result<Vec<f64>> {
    (1..=levels)
        .map(|k| {
            let g = vertex_graph(k, Mode::Carpet)?;
            let values = g
                .points()
                .unwrap()
                .par_iter()
                .map(|p| u.eval(p))
                .collect::<Result<Vec<_>>>()?;
            graph_energy_f64(&g, &values)
        })
        .collect()
}

/// The three level profiles behind `E_beta`, `𝔈_beta` and the double
/// integral, truncated at a common level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormProfiles {
    pub label: String,
    pub levels: u32,
    pub depth: u32,
    /// `D_n(u)`.
    pub vertex: Vec<f64>,
    /// `𝔇_n(P_n u)`, with `P_n` sampled down to level `depth`.
    pub cell: Vec<f64>,
    /// Annulus integrals for `n = 0 ..= levels`.
    pub annuli: Vec<f64>,
}

impl FormProfiles {
    pub fn compute(label: &str, u: &impl Evaluable<f64>, levels: u32, depth: u32) -> Result<Self> {
        if depth < levels {
            return invalid("sampling depth must be at least the truncation level");
        }
        let cell = (1..=levels)
            .map(|k| {
                let c = cell_average(u, k, depth - k, Mode::Carpet)?;
                energy_frak_d(&cell_graph(k, Mode::Carpet)?, &c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            label: label.to_string(),
            levels,
            depth,
            vertex: vertex_profile(u, levels)?,
            cell,
            annuli: annulus_integrals(u, levels, depth)?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub beta: f64,
    pub e: f64,
    pub frak_e: f64,
    pub quadrature: f64,
    /// `E / 𝔈`, `E / Q`, `𝔈 / Q`.
    pub ratios: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub label: String,
    pub rows: Vec<EquivalenceRow>,
    /// For each of the three ratios, `max / min` across the exponents.
    pub spreads: [f64; 3],
    pub within_window: bool,
    pub within_spread: bool,
    pub passed: bool,
}

/// Compares the truncated `E_beta`, `𝔈_beta` and quadrature sums.
pub fn equivalence_e_vs_frak_e(
    profiles: &FormProfiles,
    betas: &[f64],
    cfg: &VerificationConfig,
) -> Result<EquivalenceReport> {
    if betas.is_empty() {
        return invalid("no exponents given");
    }
    let rows: Vec<EquivalenceRow> = betas
        .iter()
        .map(|&beta| {
            let e = series_e(&profiles.vertex, beta).total();
            let frak_e = series_e(&profiles.cell, beta).total();
            let quadrature = weight_annuli(&profiles.annuli, beta, profiles.depth).total;
            EquivalenceRow {
                beta,
                e,
                frak_e,
                quadrature,
                ratios: [e / frak_e, e / quadrature, frak_e / quadrature],
            }
        })
        .collect();
    let (lo, hi) = cfg.equivalence_window;
    let within_window = rows
        .iter()
        .all(|r| r.ratios.iter().all(|&x| x.is_finite() && x >= lo && x <= hi));
    let mut spreads = [0.0; 3];
    for (k, s) in spreads.iter_mut().enumerate() {
        let max = rows.iter().map(|r| r.ratios[k]).fold(f64::MIN, f64::max);
        let min = rows.iter().map(|r| r.ratios[k]).fold(f64::MAX, f64::min);
        *s = max / min;
    }
    let within_spread = spreads.iter().all(|&s| s.is_finite() && s <= cfg.equivalence_spread);
    Ok(EquivalenceReport {
        label: profiles.label.clone(),
        rows,
        spreads,
        within_window,
        within_spread,
        passed: within_window && within_spread,
    })
}

/// Ball `V_n ∩ B(c, r)` with its exterior vertex boundary.
pub struct HarnackBall {
    pub graph: GraphSkeleton,
    /// Indices (in `graph`) of nodes outside the open ball.
    pub boundary: Vec<usize>,
    /// Indices of nodes within `delta * r` of the center.
    pub inner: Vec<usize>,
}

pub fn harnack_ball(g: &GraphSkeleton, center: (f64, f64), r: f64, delta: f64) -> Result<HarnackBall> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    let points = g
        .points()
        .ok_or_else(|| Error::InvalidInput("Harnack balls need a vertex graph".into()))?;
    let dist = |p: &LatticePoint| {
        let (x, y) = p.coords();
        ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt()
    };
    let inside: Vec<bool> = points.iter().map(|p| dist(p) < r).collect();
    let mut keep = inside.clone();
    for e in &g.edges {
        let (a, b) = (e.a as usize, e.b as usize);
        if inside[a] {
            keep[b] = true;
        }
        if inside[b] {
            keep[a] = true;
        }
    }
    let (graph, old) = g.induced(&keep)?;
    let boundary = (0..old.len()).filter(|&k| !inside[old[k]]).collect::<Vec<_>>();
    let inner = (0..old.len())
        .filter(|&k| inside[old[k]] && dist(&points[old[k]]) <= delta * r)
        .collect::<Vec<_>>();
    if inner.is_empty() || boundary.is_empty() {
        return invalid("the ball has no interior at this level");
    }
    Ok(HarnackBall { graph, boundary, inner })
}

/// `max / min` of `u` over the indices.
fn max_min_ratio(u: &[f64], idx: &[usize]) -> f64 {
    let max = idx.iter().map(|&i| u[i]).fold(f64::MIN, f64::max);
    let min = idx.iter().map(|&i| u[i]).fold(f64::MAX, f64::min);
    max / min
}

/// Harnack ratio of the harmonic extension of `data` on the ball.
pub fn harnack_ratio(ball: &HarnackBall, data: &[f64], opts: &SolverOptions) -> Result<f64> {
    if data.len() != ball.boundary.len() {
        return Err(Error::Dimension {
            expected: ball.boundary.len(),
            actual: data.len(),
        });
    }
    if data.iter().any(|&v| v < 0.0) {
        return invalid("Harnack data must be nonnegative");
    }
    let bc = BoundarySpec::new(ball.boundary.iter().copied().zip(data.iter().copied()).collect());
    let u = solve_dirichlet(&ball.graph, &bc, opts)?.solution;
    Ok(max_min_ratio(&u, &ball.inner))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarnackReport {
    pub delta: f64,
    pub radius: f64,
    pub centers: Vec<(f64, f64)>,
    /// Ratios for random boundary data.
    pub random: RatioReport,
    /// `(n, ratio)` for `u_n - 1/2` near the right side.
    pub structured: Vec<(u32, f64)>,
    /// `C_H(n)`: worst ratio of either kind at level `n`.
    pub c_h: Vec<(u32, f64)>,
    /// Constant-plus-epsilon data: `(epsilon, ratio)`.
    pub near_constant: Vec<(f64, f64)>,
    pub spread: f64,
    pub stable: bool,
}

/// Default centers: the middles of the left and bottom level-1 cells and
/// a corner of the central hole.
pub const HARNACK_CENTERS: [(f64, f64); 3] = [(1.0 / 6.0, 0.5), (0.5, 1.0 / 6.0), (1.0 / 3.0, 1.0 / 3.0)];

/// Center and radius of the ball used for `u_n - 1/2`.
pub const HARNACK_UN_BALL: ((f64, f64), f64) = ((0.75, 0.5), 0.25);

pub fn harnack_ratios(
    levels: &[u32],
    centers: &[(f64, f64)],
    minimizers: &[HarmonicMinimizer],
    cfg: &VerificationConfig,
    opts: &SolverOptions,
) -> Result<HarnackReport> {
    let (r, delta) = (cfg.harnack_radius, cfg.harnack_delta);
    let mut instances = Vec::new();
    let mut near_constant = Vec::new();
    for &n in levels {
        let g = vertex_graph(n, Mode::Carpet)?;
        for (ci, &c) in centers.iter().enumerate() {
            let ball = harnack_ball(&g, c, r, delta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((n as u64) << 32) | ci as u64);
            for d in 0..cfg.harnack_draws {
                let data: Vec<f64> = (0..ball.boundary.len()).map(|_| rng.gen::<f64>()).collect();
                instances.push(RatioInstance {
                    label: format!("center={ci} draw={d}"),
                    level: n,
                    ratio: harnack_ratio(&ball, &data, opts)?,
                });
            }
            if ci == 0 && n == levels[0] {
                for eps in [1e-1, 1e-2, 1e-3] {
                    let data: Vec<f64> = (0..ball.boundary.len()).map(|_| 1.0 + eps * rng.gen::<f64>()).collect();
                    near_constant.push((eps, harnack_ratio(&ball, &data, opts)?));
                }
            }
        }
    }
    let random = RatioReport::new("max_B(z,dr) u <= C min_B(z,dr) u", instances, 0);
    let ((cx, cy), ur) = HARNACK_UN_BALL;
    let mut structured = Vec::new();
    for h in minimizers.iter().filter(|h| levels.contains(&h.level())) {
        let u = &h.function;
        let shifted: Vec<f64> = u.values().iter().map(|v| v - 0.5).collect();
        let inner: Vec<usize> = u
            .points()
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let (x, y) = p.coords();
                ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() <= delta * ur
            })
            .map(|(i, _)| i)
            .collect();
        if inner.is_empty() {
            return invalid("u_n ball has no vertices");
        }
        structured.push((h.level(), max_min_ratio(&shifted, &inner)));
    }
    let c_h: Vec<(u32, f64)> = levels
        .iter()
        .map(|&n| {
            let random_max = random
                .level_max
                .iter()
                .find(|l| l.0 == n)
                .map_or(f64::MIN, |l| l.1);
            let s = structured.iter().find(|s| s.0 == n).map_or(f64::MIN, |s| s.1);
            (n, random_max.max(s))
        })
        .collect();
    let hi = c_h.iter().map(|c| c.1).fold(f64::MIN, f64::max);
    let lo = c_h.iter().map(|c| c.1).fold(f64::MAX, f64::min);
    let spread = hi / lo;
    Ok(HarnackReport {
        delta,
        radius: r,
        centers: centers.to_vec(),
        random,
        structured,
        c_h,
        near_constant,
        spread,
        stable: spread.is_finite() && spread < cfg.harnack_spread,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub distances: Vec<f64>,
    /// Largest `|u(x) - u(y)|` over axis-parallel pairs at each distance.
    pub oscillations: Vec<f64>,
    pub theta_hat: f64,
}

/// Fits `log osc(d)` against `log d` for pairs in `region^2` at the
/// distances `3^-k`.
pub fn holder_exponent(u: &VertexFunction<f64>, region: (f64, f64)) -> Result<HolderEstimate> {
    let level = u.level();
    let scale = 2 * 3u64.pow(level);
    let inside = |p: &LatticePoint| {
        let (x, y) = p.coords();
        x >= region.0 && x <= region.1 && y >= region.0 && y <= region.1
    };
    let mut distances = Vec::new();
    let mut oscillations = Vec::new();
    for k in 1..=level {
        let step = scale / 3u64.pow(k);
        let mut osc = 0.0f64;
        for (p, v) in u.points().iter().zip(u.values()) {
            if !inside(p) {
                continue;
            }
            for q in [
                LatticePoint::new(p.x + step, p.y, level),
                LatticePoint::new(p.x, p.y + step, level),
            ] {
                if q.x > scale || q.y > scale || !inside(&q) {
                    continue;
                }
                if let Some(w) = u.value_at(&q) {
                    osc = osc.max((w - v).abs());
                }
            }
        }
        distances.push(3f64.powi(-(k as i32)));
        oscillations.push(osc);
    }
    let used: Vec<usize> = (0..distances.len()).filter(|&i| oscillations[i] > 0.0).collect();
    if used.len() < 2 {
        return invalid("the function does not vary on the region");
    }
    let x: Vec<f64> = used.iter().map(|&i| distances[i].ln()).collect();
    let y: Vec<f64> = used.iter().map(|&i| oscillations[i].ln()).collect();
    let (theta_hat, _) = linear_fit(&x, &y).ok_or_else(|| Error::InvalidInput("degenerate fit".into()))?;
    Ok(HolderEstimate {
        distances,
        oscillations,
        theta_hat,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupReport {
    pub label: String,
    pub beta: f64,
    /// `3^((beta - alpha) n) D_n(u)`.
    pub terms: Vec<f64>,
    /// `exp` of the fitted slope of `log term` against `n`.
    pub growth_rate: f64,
    /// True for a constant function, where there is nothing to check.
    pub vacuous: bool,
    pub passed: bool,
}

/// Geometric growth of the weighted energies above the critical exponent.
pub fn besov_blowup(label: &str, profile: &[f64], beta: f64) -> Result<BlowupReport> {
    let terms: Vec<f64> = profile
        .iter()
        .enumerate()
        .map(|(i, &d)| level_weight(beta, i as u32 + 1) * d)
        .collect();
    if terms.iter().all(|&t| t == 0.0) {
        return Ok(BlowupReport {
            label: label.to_string(),
            beta,
            terms,
            growth_rate: 0.0,
            vacuous: true,
            passed: true,
        });
    }
    if terms.iter().any(|&t| t <= 0.0) {
        return invalid("a non-constant function must have positive energy at every level");
    }
    let x: Vec<f64> = (1..=terms.len()).map(|n| n as f64).collect();
    let y: Vec<f64> = terms.iter().map(|t| t.ln()).collect();
    let (slope, _) = linear_fit(&x, &y).ok_or_else(|| Error::InvalidInput("need at least two levels".into()))?;
    let growth_rate = slope.exp();
    Ok(BlowupReport {
        label: label.to_string(),
        beta,
        terms,
        growth_rate,
        vacuous: false,
        passed: growth_rate > 1.0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxLocalReport {
    pub label: String,
    pub beta_star: f64,
    /// `sup_n 3^((beta* - alpha) n) D_n(u)` over the profile.
    pub sup_form: f64,
    pub betas: Vec<f64>,
    /// `(beta* - beta) E_beta(u)`.
    pub scaled: Vec<f64>,
    /// `scaled / sup_form`.
    pub ratios: Vec<f64>,
    pub passed: bool,
}

/// Tracks `(beta* - beta) E_beta(u)` as `beta` increases to `beta*`.
pub fn approx_local(
    label: &str,
    profile: &[f64],
    betas: &[f64],
    beta_star: f64,
    cfg: &VerificationConfig,
) -> Result<ApproxLocalReport> {
    if betas.iter().any(|&b| !(b > alpha() && b < beta_star)) {
        return invalid("exponents must lie strictly between alpha and beta*");
    }
    let sup = sup_form(profile, beta_star);
    let scaled: Vec<f64> = betas
        .iter()
        .map(|&b| (beta_star - b) * series_e(profile, b).total())
        .collect();
    let ratios: Vec<f64> = scaled.iter().map(|s| s / sup).collect();
    let (lo, hi) = cfg.approx_local_window;
    Ok(ApproxLocalReport {
        label: label.to_string(),
        beta_star,
        sup_form: sup,
        betas: betas.to_vec(),
        passed: sup > 0.0 && ratios.iter().all(|&r| r >= lo && r <= hi),
        scaled,
        ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub level: Option<u32>,
    pub expected: String,
    pub actual: String,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn skipped(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Skipped)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityOptions {
    /// Highest level for the energy identities.
    pub max_level: u32,
    /// Highest `n` for `D_{n+1}(u) = sum_i D_n(u o f_i)`.
    pub decomposition_max: u32,
    pub seed: u64,
    /// Perturbs one edge weight of the decomposition graphs, so the
    /// suite must fail.
    pub corrupt: bool,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self {
            max_level: RATIONAL_MAX_LEVEL,
            decomposition_max: 4,
            seed: 1,
            corrupt: false,
        }
    }
}

fn check(name: &str, level: Option<u32>, expected: String, actual: String) -> IdentityCheck {
    let status = if expected == actual {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    IdentityCheck {
        name: name.to_string(),
        level,
        expected,
        actual,
        status,
    }
}

fn skipped(name: &str, level: u32) -> IdentityCheck {
    IdentityCheck {
        name: name.to_string(),
        level: Some(level),
        expected: String::new(),
        actual: format!("level {level} is beyond the exact capacity {RATIONAL_MAX_LEVEL}"),
        status: CheckStatus::Skipped,
    }
}

/// `D_{n+1}(u)` and `sum_i D_n(u o f_i)` for a random rational `u` on
/// `V_{n+1}`.
pub fn self_similar_sides(n: u32, seed: u64, corrupt: bool) -> Result<(Ratio<i128>, Ratio<i128>)> {
    let mut fine = vertex_graph(n + 1, Mode::Carpet)?;
    let coarse = Arc::new(vertex_graph(n, Mode::Carpet)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 40));
    let values: Vec<Ratio<i128>> = (0..fine.node_count())
        .map(|_| Ratio::new(rng.gen_range(-50..=50), rng.gen_range(1..=6)))
        .collect();
    if corrupt {
        if let Some(e) = fine
            .edges
            .iter_mut()
            .find(|e| values[e.a as usize] != values[e.b as usize])
        {
            e.multiplicity += 1;
        }
    }
    let fine = Arc::new(fine);
    let u = VertexFunction::new(fine.clone(), values)?;
    let left = graph_energy(&fine, u.values())?;
    let mut right = Ratio::zero();
    for d in 0..8u8 {
        right += energy_d(&u.compose_map(d, coarse.clone())?);
    }
    Ok((left, right))
}

/// The exact identities: good function and Cantor cross energies, the
/// minimum of `phi`, and the self-similar decomposition of `D_n`.
pub fn identity_suite(opts: &IdentityOptions) -> Result<IdentityReport> {
    let mut checks = Vec::new();
    let show = |t: TriadicRational| t.to_string();
    for n in 1..=opts.max_level {
        if n > RATIONAL_MAX_LEVEL {
            checks.push(skipped("good_energy", n));
            checks.push(skipped("cantor_energy", n));
            continue;
        }
        checks.push(check(
            "good_energy",
            Some(n),
            show(TriadicRational::power(6, 7, n)?),
            show(good_energy(n)?),
        ));
        checks.push(check(
            "cantor_energy",
            Some(n),
            show(TriadicRational::power(2, 3, n)?),
            show(cantor_energy(n)?),
        ));
    }
    let m = phi_minimize()?;
    checks.push(check(
        "phi_minimize",
        None,
        "(2/7, 5/7) -> 6/7".into(),
        format!("({}, {}) -> {}", m.x, m.y, m.value),
    ));
    for n in 1..=opts.decomposition_max {
        let (left, right) = self_similar_sides(n, opts.seed, opts.corrupt)?;
        checks.push(check(
            "self_similar_decomposition",
            Some(n),
            crate::numeric::ratio_string(&left),
            crate::numeric::ratio_string(&right),
        ));
    }
    Ok(IdentityReport { checks })
}

/// Exact `𝔇_n` ratio as a float times `rho^-m`, for reports.
pub fn indicator_b_ratio(level: u32, word: usize, n: u32, rho: f64) -> Result<f64> {
    Ok(indicator_frak_ratio(level, word, n)?.to_f64() * rho.powi(-((level - n) as i32)))
}

/// Exact rational `D_n` of a rational vertex function, for reports.
pub fn exact_energy(u: &VertexFunction<Ratio<i128>>) -> BigRational {
    let e = energy_d(u);
    big(&e)
}
