use std::fs::File;
use std::io::BufWriter;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use carpet::energy::{
    alpha, cell_energy_profile, vertex_energy_profile, EnergyReport, Evaluable, Planar, MAX_SAMPLE_LEVEL,
};
use carpet::geometry::{cell_graph, vertex_graph, vinfty_member, GraphSkeleton, LatticePoint, Mode, DEFAULT_MAX_LEVEL};
use carpet::numeric::Scalar;
use carpet::resistance::{
    beta_star, cell_resistances, corner_point, corner_resistances, estimate_rho, gamma, reports_csv,
    vertical_sides, vinfty_scaling, ResistanceReport, ResistanceSeries, RHO_BOUNDS, RHO_SOFT_WINDOW,
};
use carpet::solver::{effective_resistance, exact_effective_resistance, SolverOptions};
use carpet::special::{good_function_limit, harmonic_un, GoodFunction, HarmonicMinimizer, RATIONAL_MAX_LEVEL};
use carpet::verification::{
    approx_local, besov_blowup, equivalence_e_vs_frak_e, harnack_ratios, holder_exponent, identity_suite,
    monotonicity_a, monotonicity_b, random_cell_function, vertex_profile, CheckStatus, FormProfiles,
    IdentityOptions, VerificationConfig, HARNACK_CENTERS,
};

use crate::config::{usage, Config};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// Hard checks decide the exit status; soft ones are only reported.
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

fn hard(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        hard: true,
        passed,
        detail: detail.into(),
    }
}

fn soft(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        hard: false,
        passed,
        detail: detail.into(),
    }
}

/// What a command produced.
pub struct Outcome {
    /// Base name of the report file.
    pub name: String,
    pub result: Value,
    pub csv: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Outcome {
    fn new(name: impl Into<String>, result: Value, csv: String, checks: Vec<Check>) -> Self {
        Self {
            name: name.into(),
            result,
            csv,
            checks,
            notes: Vec::new(),
        }
    }

    pub fn hard_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.hard).all(|c| c.passed)
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Carpet,
    Cross,
}

impl ModeArg {
    fn mode(self) -> Mode {
        match self {
            ModeArg::Carpet => Mode::Carpet,
            ModeArg::Cross => Mode::Cross,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModeArg::Carpet => "carpet",
            ModeArg::Cross => "cross",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphKindArg {
    Vertex,
    Cell,
    Both,
}

pub fn graph(cfg: &mut Config, mode: ModeArg, kind: GraphKindArg) -> Result<Outcome> {
    let level = cfg.level_or(2, DEFAULT_MAX_LEVEL)?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let kinds: &[&str] = match kind {
        GraphKindArg::Vertex => &["vertex"],
        GraphKindArg::Cell => &["cell"],
        GraphKindArg::Both => &["vertex", "cell"],
    };
    let mut rows = Vec::new();
    let mut csv = String::from("kind,mode,level,nodes,edges,incidences,connected,file\n");
    for &k in kinds {
        let g: GraphSkeleton = if k == "vertex" {
            vertex_graph(level, mode.mode())?
        } else {
            cell_graph(level, mode.mode())?
        };
        let stem = format!("graph-{k}-{}-L{level}", mode.name());
        let edges_path = cfg.out.join(format!("{stem}.txt"));
        g.write_export(BufWriter::new(File::create(&edges_path)?))?;
        g.write_nodes_csv(BufWriter::new(File::create(cfg.out.join(format!("{stem}-nodes.csv")))?))?;
        let connected = g.is_connected();
        csv.push_str(&format!(
            "{k},{},{level},{},{},{},{connected},{stem}.txt\n",
            mode.name(),
            g.node_count(),
            g.edges.len(),
            g.edge_incidences()
        ));
        rows.push(json!({
            "kind": k,
            "mode": mode.name(),
            "level": level,
            "nodes": g.node_count(),
            "edges": g.edges.len(),
            "incidences": g.edge_incidences(),
            "connected": connected,
            "file": format!("{stem}.txt"),
        }));
    }
    let checks = rows
        .iter()
        .map(|r| {
            let name = format!("{} graph connected", r["kind"].as_str().unwrap());
            let connected = r["connected"] == true;
            match mode {
                ModeArg::Carpet => hard(name, connected, ""),
                ModeArg::Cross => soft(name, connected, "the cross splits into two rows"),
            }
        })
        .collect();
    Ok(Outcome::new(format!("graph-{}-L{level}", mode.name()), Value::Array(rows), csv, checks))
}

#[derive(Debug, Serialize)]
struct ExactComparison {
    quantity: String,
    level: u32,
    exact: String,
    iterative: f64,
    relative_error: f64,
}

fn exact_comparisons(n_max: u32, opts: &SolverOptions) -> Result<Vec<ExactComparison>> {
    let mut out = Vec::new();
    for n in 1..=n_max.min(2) {
        let g = vertex_graph(n, Mode::Carpet)?;
        let (left, right) = vertical_sides(&g)?;
        let p = |i| g.index_of(&corner_point(i, n)).unwrap();
        let cases = [
            ("R_V", left, right),
            ("R(p0,p1)", vec![p(0)], vec![p(1)]),
            ("R(p1,p5)", vec![p(1)], vec![p(5)]),
            ("R(p0,p4)", vec![p(0)], vec![p(4)]),
        ];
        for (q, a, b) in cases {
            let exact = exact_effective_resistance(&g, &a, &b)?;
            let iterative = effective_resistance(&g, &a, &b, opts)?;
            let e = exact.to_f64();
            out.push(ExactComparison {
                quantity: q.into(),
                level: n,
                exact: exact.to_string(),
                iterative,
                relative_error: (iterative - e).abs() / e,
            });
        }
    }
    Ok(out)
}

fn inequality_checks(lhs: &ResistanceSeries, rhs: &ResistanceSeries) -> Vec<Check> {
    lhs.levels
        .iter()
        .zip(lhs.values.iter().zip(&rhs.values))
        .map(|(n, (a, b))| {
            hard(
                format!("{} <= {} at n={n}", lhs.quantity, rhs.quantity),
                a <= b,
                format!("{a:.6} <= {b:.6}"),
            )
        })
        .collect()
}

pub fn resistance(cfg: &mut Config) -> Result<Outcome> {
    let n_max = cfg.level_or(6, DEFAULT_MAX_LEVEL)?;
    let opts = cfg.solver();
    let corners = corner_resistances(n_max, &opts)?;
    let cells = cell_resistances(n_max, &opts)?;
    let series: Vec<&ResistanceSeries> = corners.all().into_iter().chain(cells.all()).collect();
    let reports: Vec<ResistanceReport> = series.iter().map(|s| ResistanceReport::from_series(s)).collect();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let headline = estimate_rho(&corners.sides).ok();
    let cell_fit = estimate_rho(&cells.w0_w1).ok();
    match &headline {
        Some(e) => {
            checks.push(hard(
                "rho_hat in [7/6, 3/2]",
                e.within_bounds,
                format!("{:.5}", e.rho_hat),
            ));
            let (lo, hi) = (beta_star(RHO_BOUNDS.0), beta_star(RHO_BOUNDS.1));
            checks.push(hard(
                "beta*_hat in its bounds",
                e.beta_star_hat >= lo && e.beta_star_hat <= hi,
                format!("{:.5}", e.beta_star_hat),
            ));
            checks.push(soft(
                format!("rho_hat in [{}, {}]", RHO_SOFT_WINDOW.0, RHO_SOFT_WINDOW.1),
                e.within_soft_window,
                format!("{:.5}", e.rho_hat),
            ));
            if let Some(c) = &cell_fit {
                let gap = (e.beta_star_hat - c.beta_star_hat).abs() / e.beta_star_hat;
                checks.push(soft(
                    "corner and cell beta*_hat agree within 2%",
                    gap <= 0.02,
                    format!("{:.5} vs {:.5}", e.beta_star_hat, c.beta_star_hat),
                ));
            }
        }
        None => notes.push("rho estimation needs at least three levels; resistances only".into()),
    }
    checks.extend(inequality_checks(&corners.sides, &corners.p1_p5));
    checks.extend(inequality_checks(&corners.sides, &corners.p0_p4));
    checks.extend(inequality_checks(&corners.p0_p1, &cells.w0_w1));
    checks.extend(inequality_checks(&corners.p1_p5, &cells.w1_w5));
    checks.extend(inequality_checks(&corners.p0_p4, &cells.w0_w4));
    let exact = if cfg.numbers == crate::config::Numbers::Auto {
        exact_comparisons(n_max, &opts)?
    } else {
        Vec::new()
    };
    for c in &exact {
        checks.push(hard(
            format!("{} at n={} matches exact elimination", c.quantity, c.level),
            c.relative_error <= 1e-9,
            format!("{} vs {:.12}", c.exact, c.iterative),
        ));
    }
    let result = json!({
        "reports": to_value(&reports)?,
        "estimate": to_value(&headline)?,
        "cell_estimate": to_value(&cell_fit)?,
        "exact": to_value(&exact)?,
        "iterations": to_value(&corners.iterations)?,
    });
    let mut out = Outcome::new(format!("resistance-L{n_max}"), result, reports_csv(&reports), checks);
    out.notes = notes;
    Ok(out)
}

pub fn identities(cfg: &mut Config, corrupt: bool) -> Result<Outcome> {
    let max_level = cfg.level_or(RATIONAL_MAX_LEVEL, u32::MAX)?;
    let opts = IdentityOptions {
        max_level,
        seed: cfg.seed,
        corrupt,
        ..IdentityOptions::default()
    };
    let report = identity_suite(&opts)?;
    let mut notes = Vec::new();
    let skipped = report.skipped().count();
    if skipped > 0 {
        notes.push(format!(
            "warning: {skipped} checks skipped beyond the exact capacity {RATIONAL_MAX_LEVEL}"
        ));
    }
    let mut csv = String::from("name,level,expected,actual,status\n");
    let checks = report
        .checks
        .iter()
        .filter(|c| c.status != CheckStatus::Skipped)
        .map(|c| {
            let level = c.level.map(|l| format!("({l})")).unwrap_or_default();
            hard(format!("{}{level}", c.name), c.status == CheckStatus::Pass, c.actual.clone())
        })
        .collect();
    for c in &report.checks {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            c.name,
            c.level.map(|l| l.to_string()).unwrap_or_default(),
            c.expected,
            c.actual,
            serde_json::to_value(c.status)?.as_str().unwrap()
        ));
    }
    let mut out = Outcome::new("identities", to_value(&report)?, csv, checks);
    out.notes = notes;
    Ok(out)
}

/// `rho` from the configuration, else fitted to `R_V` on levels 1..=5.
fn rho_hat(cfg: &Config, opts: &SolverOptions) -> Result<f64> {
    if let Some(r) = cfg.rho {
        return Ok(r);
    }
    let values = (1..=5)
        .map(|n| {
            let g = vertex_graph(n, Mode::Carpet)?;
            let (a, b) = vertical_sides(&g)?;
            Ok(effective_resistance(&g, &a, &b, opts)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let series = ResistanceSeries::new("R_V", (1..=5).collect(), values)?;
    Ok(estimate_rho(&series)?.rho_hat)
}

fn minimizers(levels: std::ops::RangeInclusive<u32>, opts: &SolverOptions) -> Result<Vec<HarmonicMinimizer>> {
    levels.map(|n| Ok(harmonic_un(n, opts)?)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Monotonicity,
    Harnack,
    Equivalence,
    Holder,
    Blowup,
    ApproxLocal,
}

impl Suite {
    fn name(self) -> String {
        self.to_possible_value().unwrap().get_name().to_string()
    }
}

pub fn verify(cfg: &mut Config, suite: Suite) -> Result<Outcome> {
    let opts = cfg.solver();
    let vcfg = VerificationConfig {
        seed: cfg.seed,
        ..VerificationConfig::default()
    };
    let name = format!("verify-{}", suite.name());
    match suite {
        Suite::Monotonicity => {
            let n_max = cfg.level_or(4, 6)?;
            if n_max < 2 {
                return usage("monotonicity needs level at least 2");
            }
            let rho = rho_hat(cfg, &opts)?;
            let ms = minimizers(2..=n_max, &opts)?;
            let mut family: Vec<_> = ms.iter().map(|h| (format!("u_{}", h.level()), h.function.clone())).collect();
            family.push(("U".into(), GoodFunction.on_level(n_max)?.to_f64()));
            let a = monotonicity_a(&family, rho, n_max, 3, &vcfg)?;
            let mut cells = Vec::new();
            for level in 2..=n_max.min(5) {
                for s in 0..100 {
                    let seed = cfg.seed.wrapping_mul(1000).wrapping_add(s);
                    cells.push((format!("random L={level} seed={seed}"), random_cell_function(level, seed)));
                }
                let top = &ms.last().unwrap().function;
                if level < n_max {
                    cells.push((
                        format!("P u_{n_max} L={level}"),
                        carpet::energy::cell_average(top, level, n_max - level, Mode::Carpet)?,
                    ));
                }
            }
            let b = monotonicity_b(&cells, rho, 3, &vcfg)?;
            let checks = vec![
                hard("a-ratios finite", a.all_finite, format!("max {:.4}", a.max)),
                hard("B-ratios finite", b.all_finite, format!("max {:.4}", b.max)),
                soft("a running-max drift < 20%", a.passed, format!("{:.3}", a.drift)),
                soft("B running-max drift < 20%", b.passed, format!("{:.3}", b.drift)),
            ];
            let csv = format!("{}{}", a.to_csv(), b.to_csv().split_once('\n').unwrap().1);
            Ok(Outcome::new(name, json!({"rho": rho, "a": a, "b": b}), csv, checks))
        }
        Suite::Harnack => {
            let top = cfg.level_or(5, 6)?;
            if top < 3 {
                return usage("harnack needs level at least 3");
            }
            let ms = minimizers(3..=top, &opts)?;
            let levels: Vec<u32> = (3..=top).collect();
            let r = harnack_ratios(&levels, &HARNACK_CENTERS, &ms, &vcfg, &opts)?;
            let checks = vec![
                hard(
                    "ratios finite and at least 1",
                    r.random.instances.iter().all(|i| i.ratio.is_finite() && i.ratio >= 1.0 - 1e-12),
                    format!("max {:.4}", r.random.max),
                ),
                soft("C_H(n) varies by less than a factor 2", r.stable, format!("{:.3}", r.spread)),
            ];
            let csv = r.random.to_csv();
            Ok(Outcome::new(name, to_value(&r)?, csv, checks))
        }
        Suite::Equivalence => {
            let n = cfg.level_or(5, 6)?;
            let rho = rho_hat(cfg, &opts)?;
            let bstar = beta_star(rho);
            let a = alpha();
            let betas = [a + 0.05, (a + bstar) / 2.0, bstar - 0.05];
            let truncation = n.min(3);
            let u = harmonic_un(n, &opts)?;
            let depth = n.max(truncation);
            let mut reports = Vec::new();
            let good_depth = (truncation + 2).min(MAX_SAMPLE_LEVEL - 2);
            reports.push(equivalence_e_vs_frak_e(
                &FormProfiles::compute("U", &GoodFunction, truncation, good_depth)?,
                &betas,
                &vcfg,
            )?);
            reports.push(equivalence_e_vs_frak_e(
                &FormProfiles::compute(&format!("u_{n}"), &u.function, truncation, depth)?,
                &betas,
                &vcfg,
            )?);
            let mut checks = Vec::new();
            let mut csv = String::from("function,beta,E,frakE,quadrature\n");
            for r in &reports {
                checks.push(hard(
                    format!("{}: three finite positive values", r.label),
                    r.rows.iter().all(|row| row.ratios.iter().all(|x| x.is_finite() && *x > 0.0)),
                    "",
                ));
                checks.push(soft(format!("{}: ratios in window", r.label), r.within_window, ""));
                checks.push(soft(
                    format!("{}: ratios within a factor 3 across beta", r.label),
                    r.within_spread,
                    format!("{:?}", r.spreads),
                ));
                for row in &r.rows {
                    csv.push_str(&format!(
                        "{},{},{:e},{:e},{:e}\n",
                        r.label, row.beta, row.e, row.frak_e, row.quadrature
                    ));
                }
            }
            Ok(Outcome::new(name, json!({"rho": rho, "betas": betas, "reports": reports}), csv, checks))
        }
        Suite::Holder => {
            let n = cfg.level_or(5, 6)?;
            let rho = rho_hat(cfg, &opts)?;
            let u = harmonic_un(n, &opts)?;
            let h = holder_exponent(&u.function, (0.25, 0.75))?;
            let reference = (beta_star(rho) - alpha()) / 2.0;
            let checks = vec![hard(
                "Hölder exponent positive",
                h.theta_hat > 0.0,
                format!("{:.4} (reference {reference:.4})", h.theta_hat),
            )];
            let mut csv = String::from("distance,oscillation\n");
            for (d, o) in h.distances.iter().zip(&h.oscillations) {
                csv.push_str(&format!("{d:e},{o:e}\n"));
            }
            Ok(Outcome::new(
                name,
                json!({"estimate": h, "reference": reference, "level": n}),
                csv,
                checks,
            ))
        }
        Suite::Blowup => {
            let n = cfg.level_or(5, 6)?;
            let rho = rho_hat(cfg, &opts)?;
            let beta = beta_star(rho) + 0.1;
            let u = harmonic_un(n, &opts)?;
            let cases = vec![
                besov_blowup("U", &vertex_profile(&GoodFunction, n)?, beta)?,
                besov_blowup(&format!("u_{n}"), &vertex_energy_profile(&u.function)?, beta)?,
                besov_blowup("x", &vertex_profile(&Planar(|x: f64, _y: f64| x), n)?, beta)?,
            ];
            let checks = cases
                .iter()
                .map(|c| hard(format!("{}: growth rate above 1", c.label), c.passed, format!("{:.4}", c.growth_rate)))
                .collect();
            let mut csv = String::from("function,level,term\n");
            for c in &cases {
                for (k, t) in c.terms.iter().enumerate() {
                    csv.push_str(&format!("{},{},{t:e}\n", c.label, k + 1));
                }
            }
            Ok(Outcome::new(name, json!({"beta": beta, "cases": cases}), csv, checks))
        }
        Suite::ApproxLocal => {
            let n = cfg.level_or(5, 6)?;
            let rho = rho_hat(cfg, &opts)?;
            let bstar_u = beta_star(7.0 / 6.0);
            let closed: Vec<f64> = (1..=2000).map(|k| (6.0f64 / 7.0).powi(k)).collect();
            let betas_u: Vec<f64> = (0..6).map(|j| bstar_u - 0.1 / 2f64.powi(j)).collect();
            let good = approx_local("U", &closed, &betas_u, bstar_u, &vcfg)?;
            let bstar = beta_star(rho);
            let u = harmonic_un(n, &opts)?;
            let betas: Vec<f64> = (0..6).map(|j| bstar - 0.1 / 2f64.powi(j)).collect();
            let harmonic = approx_local(
                &format!("u_{n}"),
                &vertex_energy_profile(&u.function)?,
                &betas,
                bstar,
                &vcfg,
            )?;
            let checks = vec![
                soft("U: ratio trajectory in window", good.passed, format!("{:?}", good.ratios)),
                soft(
                    format!("u_{n}: ratio trajectory in window"),
                    harmonic.passed,
                    format!("{:?}", harmonic.ratios),
                ),
            ];
            let mut csv = String::from("function,beta,scaled,ratio\n");
            for r in [&good, &harmonic] {
                for ((b, s), q) in r.betas.iter().zip(&r.scaled).zip(&r.ratios) {
                    csv.push_str(&format!("{},{b},{s:e},{q:e}\n", r.label));
                }
            }
            Ok(Outcome::new(name, json!({"cases": [good, harmonic]}), csv, checks))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionArg {
    /// The coordinate function `x`.
    X,
    /// The good function `U(x, y) = f(x)`.
    Good,
    /// The harmonic minimizer `u_n` at the configured level.
    Harmonic,
}

pub fn energy(cfg: &mut Config, function: FunctionArg, beta: Option<f64>) -> Result<Outcome> {
    let n = cfg.level_or(5, 6)?;
    let opts = cfg.solver();
    let rho = rho_hat(cfg, &opts)?;
    let beta = beta.unwrap_or_else(|| (alpha() + beta_star(rho)) / 2.0);
    if !(beta > alpha()) {
        return usage("beta must exceed alpha");
    }
    let sample = (n + 2).min(MAX_SAMPLE_LEVEL);
    let (label, vertex, cell) = match function {
        FunctionArg::X => {
            let u = Planar(|x: f64, _y: f64| x);
            ("x".to_string(), vertex_profile(&u, n)?, profile_cells(&u, n, sample)?)
        }
        FunctionArg::Good => (
            "U".to_string(),
            vertex_profile(&GoodFunction, n)?,
            profile_cells(&GoodFunction, n, sample)?,
        ),
        FunctionArg::Harmonic => {
            let u = harmonic_un(n, &opts)?;
            let cell = profile_cells(&u.function, n, n)?;
            (format!("u_{n}"), vertex_energy_profile(&u.function)?, cell)
        }
    };
    let report = EnergyReport::build(&label, &vertex, Some(&cell), beta, rho);
    let checks = vec![hard(
        "energies finite and nonnegative",
        report.rows.iter().all(|r| r.d.is_finite() && r.d >= 0.0),
        "",
    )];
    Ok(Outcome::new(format!("energy-{label}-L{n}"), to_value(&report)?, report.to_csv(), checks))
}

fn profile_cells(u: &impl Evaluable<f64>, n: u32, sample: u32) -> Result<Vec<f64>> {
    Ok(cell_energy_profile(u, n, |k| sample - k)?)
}

pub fn good_function(cfg: &mut Config) -> Result<Outcome> {
    let n = cfg.level_or(5, 6)?;
    let opts = cfg.solver();
    let rho = rho_hat(cfg, &opts)?;
    let family = good_function_limit(n, rho, &opts)?;
    let mut checks = Vec::new();
    let mut csv = String::from("level,resistance,energy,reflect_x,reflect_y,midline,left_max\n");
    let mut members = Vec::new();
    for h in &family.members {
        let l = h.level();
        let sym = h.reflect_x_residual.max(h.reflect_y_residual);
        checks.push(hard(format!("u_{l} symmetric"), sym <= 1e-8, format!("{sym:.2e}")));
        checks.push(hard(
            format!("u_{l} = 1/2 on the midline"),
            h.midline_residual <= 1e-8,
            format!("{:.2e}", h.midline_residual),
        ));
        let prod = h.energy_resistance_product();
        checks.push(hard(format!("D_{l}(u_{l}) R_{l}^V = 1"), (prod - 1.0).abs() <= 1e-7, format!("{prod:.10}")));
        checks.push(hard(
            format!("u_{l} < 1/2 left of the midline"),
            h.left_max < 0.5 + 1e-8,
            format!("{:.6}", h.left_max),
        ));
        csv.push_str(&format!(
            "{l},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            h.resistance, h.energy, h.reflect_x_residual, h.reflect_y_residual, h.midline_residual, h.left_max
        ));
        members.push(json!({
            "level": l,
            "resistance": h.resistance,
            "energy": h.energy,
            "iterations": h.iterations,
            "reflect_x_residual": h.reflect_x_residual,
            "reflect_y_residual": h.reflect_y_residual,
            "midline_residual": h.midline_residual,
            "left_max": h.left_max,
        }));
    }
    let decreasing = family.sup_differences.windows(2).all(|w| w[1] <= w[0]);
    checks.push(soft(
        "sup differences decrease on [1/4, 3/4] x [0, 1]",
        decreasing,
        format!("{:?}", family.sup_differences),
    ));
    let result = json!({
        "rho": rho,
        "members": members,
        "sup_differences": family.sup_differences,
        "region": family.region,
        "a_profile": family.a_profile,
        "a_spread": family.a_spread(),
    });
    Ok(Outcome::new(format!("good-function-L{n}"), result, csv, checks))
}

pub fn green(cfg: &mut Config, radii: &[u32], center: (u64, u64)) -> Result<Outcome> {
    if radii.is_empty() || radii.contains(&0) {
        return usage("radii must be positive");
    }
    if let Some(&r) = radii.iter().max() {
        if r > 729 {
            return usage(format!("radius {r} exceeds the capacity 729"));
        }
    }
    let z = LatticePoint::new(center.0, center.1, 0);
    if !vinfty_member(&z) {
        return usage(format!("({}, {}) is not a vertex of V_infinity", center.0, center.1));
    }
    let opts = cfg.solver();
    let rho = rho_hat(cfg, &opts)?;
    let s = vinfty_scaling(&z, radii, &opts)?;
    let report = ResistanceReport::from_vinfty(&s);
    let mut checks = Vec::new();
    let agree = s
        .resistance
        .iter()
        .zip(&s.green)
        .all(|(r, g)| (r - g).abs() <= 1e-8 * r.abs().max(1.0));
    checks.push(hard("g_B(z,z) equals R(z, boundary)", agree, ""));
    checks.push(hard(
        "g_B(z,z) increases with r",
        s.green.windows(2).all(|w| w[1] > w[0]),
        format!("{:?}", s.green),
    ));
    if let Some(g) = s.gamma_hat {
        let target = gamma(rho);
        checks.push(soft(
            "gamma_hat within 20% of log rho / log 3",
            (g - target).abs() <= 0.2 * target,
            format!("{g:.4} vs {target:.4}"),
        ));
    }
    let csv = reports_csv(std::slice::from_ref(&report));
    Ok(Outcome::new(
        format!("green-{}-{}", center.0, center.1),
        json!({"rho": rho, "scaling": s, "report": report}),
        csv,
        checks,
    ))
}
