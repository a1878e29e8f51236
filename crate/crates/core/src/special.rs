//! Explicit test functions: the self-affine `f` and `U(x, y) = f(x)`, the
//! Cantor cross comparison, the quadratic `phi`, and the harmonic
//! minimizers `u_n` with their limit diagnostics.

use std::sync::Arc;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::energy::{energy_d, vertex_energy_profile, Evaluable, VertexFunction};
use crate::error::{invalid, Error, Result};
use crate::geometry::{vertex_graph, LatticePoint, Mode, Symmetry, OFFSETS};
use crate::resistance::vertical_sides;
use crate::solver::{effective_resistance_solve, SolverOptions};

/// Highest level for the exact energy identities.
pub const RATIONAL_MAX_LEVEL: u32 = 8;

/// Exact rational whose denominator has no prime factors besides 2, 3, 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriadicRational(Ratio<i128>);

impl TriadicRational {
    pub fn new(numer: i128, denom: i128) -> Result<Self> {
        if denom == 0 {
            return invalid("zero denominator");
        }
        Self::from_ratio(Ratio::new(numer, denom))
    }

    pub fn from_ratio(r: Ratio<i128>) -> Result<Self> {
        let mut d = *r.denom();
        for p in [2, 3, 7] {
            while d % p == 0 {
                d /= p;
            }
        }
        if d != 1 {
            return invalid(format!("denominator {} has a factor other than 2, 3, 7", r.denom()));
        }
        Ok(Self(r))
    }

    pub fn integer(n: i128) -> Self {
        Self(Ratio::from_integer(n))
    }

    pub fn ratio(&self) -> Ratio<i128> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// `(num / den)^n`.
    pub fn power(numer: i128, denom: i128, n: u32) -> Result<Self> {
        Self::new(numer.pow(n), denom.pow(n))
    }
}

impl std::fmt::Display for TriadicRational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

#[derive(Serialize, Deserialize)]
struct RationalRepr {
    num: String,
    den: String,
}

impl Serialize for TriadicRational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalRepr {
            num: self.0.numer().to_string(),
            den: self.0.denom().to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TriadicRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = RationalRepr::deserialize(d)?;
        let num: i128 = r.num.parse().map_err(D::Error::custom)?;
        let den: i128 = r.den.parse().map_err(D::Error::custom)?;
        TriadicRational::new(num, den).map_err(D::Error::custom)
    }
}

/// `7^n f(i / 3^n)` as an integer: descend through the base-3 digits of
/// `i`, each step taking the left, middle or right piece of lengths
/// 2/7, 3/7, 2/7 of the current image interval.
fn f_scaled(i: u64, n: u32) -> i128 {
    let side = 3u64.pow(n);
    if i == side {
        return 7i128.pow(n);
    }
    let mut left = 0i128;
    let mut len = 1i128;
    let mut rest = i;
    for k in (0..n).rev() {
        let unit = 7i128.pow(k);
        let digit = rest / 3u64.pow(k);
        rest %= 3u64.pow(k);
        let (start, width) = match digit {
            0 => (0, 2),
            1 => (2, 3),
            _ => (5, 2),
        };
        left += len * start * unit;
        len *= width;
    }
    left
}

/// `f(i / 3^n)`.
pub fn f_triadic(i: u64, n: u32) -> Result<TriadicRational> {
    if n > 40 {
        return Err(Error::Capacity(format!("level {n} overflows 128-bit rationals")));
    }
    if i > 3u64.pow(n) {
        return invalid(format!("abscissa {i}/3^{n} is outside [0, 1]"));
    }
    TriadicRational::new(f_scaled(i, n), 7i128.pow(n))
}

/// `f(k / (2 * 3^n))`. At odd `k` the value is the mean of the two
/// triadic neighbours, which is where the self-affine copy of `f` on
/// `[i/3^n, (i+1)/3^n]` takes its midpoint.
pub fn f_half_triadic(k: u64, n: u32) -> Result<TriadicRational> {
    if k > 2 * 3u64.pow(n) {
        return invalid(format!("abscissa {k}/(2*3^{n}) is outside [0, 1]"));
    }
    if k % 2 == 0 {
        return f_triadic(k / 2, n);
    }
    let a = f_triadic(k / 2, n)?.ratio();
    let b = f_triadic(k / 2 + 1, n)?.ratio();
    TriadicRational::from_ratio((a + b) / Ratio::from_integer(2))
}

/// `U(x, y) = f(x)` on lattice points of any level.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoodFunction;

impl GoodFunction {
    pub fn exact(&self, p: &LatticePoint) -> Result<TriadicRational> {
        f_half_triadic(p.x, p.level)
    }

    /// `U` on the vertices of `V_n`.
    pub fn on_level(&self, n: u32) -> Result<VertexFunction<Ratio<i128>>> {
        let g = Arc::new(vertex_graph(n, Mode::Carpet)?);
        let values = g
            .points()
            .unwrap()
            .iter()
            .map(|p| self.exact(p).map(|v| v.ratio()))
            .collect::<Result<_>>()?;
        VertexFunction::new(g, values)
    }
}

impl Evaluable<f64> for GoodFunction {
    fn eval(&self, p: &LatticePoint) -> Result<f64> {
        Ok(self.exact(p)?.to_f64())
    }
}

/// Exact `D_n` of a function of the cell-local half-lattice position,
/// summing over every level-n cell of `mode`. `value(x, y)` receives
/// coordinates at scale `2 * 3^n` and returns an integer numerator.
fn cell_energy_numerator<F>(n: u32, mode: Mode, value: F) -> i128
where
    F: Fn(u64, u64) -> i128 + Sync,
{
    let base = mode.base();
    let alphabet = mode.alphabet();
    let pairs = mode.perimeter_pairs();
    let count = mode.word_count(n);
    (0..count)
        .into_par_iter()
        .with_min_len(4096)
        .map(|index| {
            let (mut c, mut r) = (0u64, 0u64);
            let mut rest = index;
            let mut digits = [0u8; 40];
            for k in (0..n as usize).rev() {
                digits[k] = alphabet[rest % base];
                rest /= base;
            }
            for &d in &digits[..n as usize] {
                let (ox, oy) = OFFSETS[d as usize];
                c = 3 * c + ox;
                r = 3 * r + oy;
            }
            pairs
                .iter()
                .map(|&(i, j)| {
                    let (ax, ay) = OFFSETS[i];
                    let (bx, by) = OFFSETS[j];
                    let d = value(2 * c + ax, 2 * r + ay) - value(2 * c + bx, 2 * r + by);
                    d * d
                })
                .sum::<i128>()
        })
        .sum()
}

fn check_rational_level(n: u32) -> Result<()> {
    if n == 0 {
        return invalid("level must be at least 1");
    }
    if n > RATIONAL_MAX_LEVEL {
        return Err(Error::Capacity(format!(
            "exact energies are limited to level {RATIONAL_MAX_LEVEL}"
        )));
    }
    Ok(())
}

/// `D_n(U)` in exact arithmetic.
pub fn good_energy(n: u32) -> Result<TriadicRational> {
    check_rational_level(n)?;
    // values scaled by 2 * 7^n are integers at every vertex
    let table: Vec<i128> = (0..=3u64.pow(n)).map(|i| f_scaled(i, n)).collect();
    let value = |x: u64, _y: u64| {
        if x % 2 == 0 {
            2 * table[(x / 2) as usize]
        } else {
            table[(x / 2) as usize] + table[(x / 2 + 1) as usize]
        }
    };
    let num = cell_energy_numerator(n, Mode::Carpet, value);
    TriadicRational::new(num, 4 * 7i128.pow(2 * n))
}

/// `D_n` of `(x, y) -> x` on the Cantor cross, exactly.
pub fn cantor_energy(n: u32) -> Result<TriadicRational> {
    check_rational_level(n)?;
    let num = cell_energy_numerator(n, Mode::Cross, |x, _| x as i128);
    let scale = 2 * 3i128.pow(n);
    TriadicRational::new(num, scale * scale)
}

/// `phi(x, y) = 3x^2 + 2(x - y)^2 + 3(1 - y)^2`.
pub fn phi(x: Ratio<i128>, y: Ratio<i128>) -> Ratio<i128> {
    let k = |v: i128| Ratio::from_integer(v);
    let one = Ratio::one();
    k(3) * x * x + k(2) * (x - y) * (x - y) + k(3) * (one - y) * (one - y)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhiMinimum {
    pub x: TriadicRational,
    pub y: TriadicRational,
    pub value: TriadicRational,
}

/// Exact minimizer of `phi`, from its stationarity system.
pub fn phi_minimize() -> Result<PhiMinimum> {
    // phi = a x^2 + b xy + c y^2 + d x + e y + f
    let (a, b, c, d, e) = (5i128, -4i128, 5i128, 0i128, -6i128);
    let det = 4 * a * c - b * b;
    if det <= 0 || a <= 0 {
        return Err(Error::Singular("phi is not positive definite".into()));
    }
    let x = Ratio::new(-d * 2 * c + e * b, det);
    let y = Ratio::new(-e * 2 * a + d * b, det);
    let value = phi(x, y);
    Ok(PhiMinimum {
        x: TriadicRational::from_ratio(x)?,
        y: TriadicRational::from_ratio(y)?,
        value: TriadicRational::from_ratio(value)?,
    })
}

/// The energy minimizer on `V_n` with `0` on the left side and `1` on the
/// right side, with its diagnostics.
#[derive(Debug, Clone)]
pub struct HarmonicMinimizer {
    pub function: VertexFunction<f64>,
    /// Resistance between the sides, from the boundary current.
    pub resistance: f64,
    /// `D_n(u_n)`.
    pub energy: f64,
    pub iterations: usize,
    /// `max |u(x, y) - (1 - u(1 - x, y))|`.
    pub reflect_x_residual: f64,
    /// `max |u(x, y) - u(x, 1 - y)|`.
    pub reflect_y_residual: f64,
    /// `max |u - 1/2|` on `x = 1/2`.
    pub midline_residual: f64,
    /// `max u` over vertices with `x < 1/2`.
    pub left_max: f64,
}

impl HarmonicMinimizer {
    pub fn level(&self) -> u32 {
        self.function.level()
    }

    /// `D_n(u_n) R_n^V`, which is one for the true minimizer.
    pub fn energy_resistance_product(&self) -> f64 {
        self.energy * self.resistance
    }
}

pub fn harmonic_un(n: u32, opts: &SolverOptions) -> Result<HarmonicMinimizer> {
    harmonic_un_from(n, None, opts)
}

fn harmonic_un_from(n: u32, guess: Option<&[f64]>, opts: &SolverOptions) -> Result<HarmonicMinimizer> {
    let g = Arc::new(vertex_graph(n, Mode::Carpet)?);
    let (left, right) = vertical_sides(&g)?;
    let rs = effective_resistance_solve(&g, &left, &right, guess, opts)?;
    let u = VertexFunction::new(g.clone(), rs.report.solution)?;
    let values = u.values();
    let rx = Symmetry::ReflectX.permutation(&g).expect("vertex graph is symmetric");
    let ry = Symmetry::ReflectY.permutation(&g).expect("vertex graph is symmetric");
    let reflect_x_residual = (0..values.len())
        .map(|i| (values[i] - (1.0 - values[rx[i]])).abs())
        .fold(0.0, f64::max);
    let reflect_y_residual = (0..values.len())
        .map(|i| (values[i] - values[ry[i]]).abs())
        .fold(0.0, f64::max);
    let half = 3u64.pow(n);
    let points = u.points();
    let midline_residual = (0..values.len())
        .filter(|&i| points[i].x == half)
        .map(|i| (values[i] - 0.5).abs())
        .fold(0.0, f64::max);
    let left_max = (0..values.len())
        .filter(|&i| points[i].x < half)
        .map(|i| values[i])
        .fold(f64::MIN, f64::max);
    Ok(HarmonicMinimizer {
        energy: energy_d(&u),
        resistance: rs.resistance,
        iterations: rs.report.iterations,
        function: u,
        reflect_x_residual,
        reflect_y_residual,
        midline_residual,
        left_max,
    })
}

/// The minimizers `u_1 .. u_N` and their convergence diagnostics.
#[derive(Debug, Clone)]
pub struct GoodFunctionFamily {
    pub members: Vec<HarmonicMinimizer>,
    /// `max |u_{n+1} - u_n|` over common vertices in the interior region,
    /// for `n = 1 .. N - 1`.
    pub sup_differences: Vec<f64>,
    /// Interior region in `x`.
    pub region: (f64, f64),
    /// `a_k(u_N)` for `k = 1 ..= N`.
    pub a_profile: Vec<f64>,
}

impl GoodFunctionFamily {
    /// `max a_k / min a_k`.
    pub fn a_spread(&self) -> f64 {
        let max = self.a_profile.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.a_profile.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }
}

pub fn good_function_limit(n_max: u32, rho: f64, opts: &SolverOptions) -> Result<GoodFunctionFamily> {
    if n_max == 0 {
        return invalid("the family starts at level 1");
    }
    let region = (0.25, 0.75);
    let mut members: Vec<HarmonicMinimizer> = Vec::new();
    for n in 1..=n_max {
        let guess = match members.last() {
            Some(prev) => Some(crate::solver::prolong(&prev.function, &vertex_graph(n, Mode::Carpet)?)?),
            None => None,
        };
        members.push(harmonic_un_from(n, guess.as_deref(), opts)?);
    }
    let sup_differences = members
        .windows(2)
        .map(|w| {
            let (coarse, fine) = (&w[0].function, &w[1].function);
            coarse
                .points()
                .iter()
                .zip(coarse.values())
                .filter(|(p, _)| {
                    let x = p.coords().0;
                    x >= region.0 && x <= region.1
                })
                .map(|(p, v)| {
                    fine.value_at(p)
                        .map(|w| (w - v).abs())
                        .ok_or_else(|| Error::Level("coarse vertex missing from finer level".into()))
                })
                .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))
        })
        .collect::<Result<Vec<_>>>()?;
    let top = &members.last().unwrap().function;
    let a_profile = vertex_energy_profile(top)?
        .iter()
        .enumerate()
        .map(|(k, d)| rho.powi(k as i32 + 1) * d)
        .collect();
    Ok(GoodFunctionFamily {
        members,
        sup_differences,
        region,
        a_profile,
    })
}

/// `(num/den)` reduced, for reports.
pub fn reduced(num: i128, den: i128) -> (i128, i128) {
    let g = num.gcd(&den);
    if g.is_zero() {
        (num, den)
    } else {
        (num / g, den / g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy_d;

    fn tr(n: i128, d: i128) -> TriadicRational {
        TriadicRational::new(n, d).unwrap()
    }

    #[test]
    fn f_values() {
        assert_eq!(f_triadic(0, 1).unwrap(), tr(0, 1));
        assert_eq!(f_triadic(1, 1).unwrap(), tr(2, 7));
        assert_eq!(f_triadic(2, 1).unwrap(), tr(5, 7));
        assert_eq!(f_triadic(3, 1).unwrap(), tr(1, 1));
        assert_eq!(f_triadic(4, 2).unwrap(), tr(20, 49));
        assert!(f_triadic(10, 2).is_err());
        assert_eq!(f_half_triadic(1, 0).unwrap(), tr(1, 2));
    }

    #[test]
    fn f_recursion_and_symmetry() {
        for n in 0..6u32 {
            let side = 3u64.pow(n);
            for i in 0..side {
                let a = f_triadic(i, n).unwrap().ratio();
                let b = f_triadic(i + 1, n).unwrap().ratio();
                let (w5, w2) = (Ratio::new(5, 7), Ratio::new(2, 7));
                assert_eq!(f_triadic(3 * i + 1, n + 1).unwrap().ratio(), w5 * a + w2 * b);
                assert_eq!(f_triadic(3 * i + 2, n + 1).unwrap().ratio(), w2 * a + w5 * b);
                assert_eq!(f_triadic(3 * i, n + 1).unwrap().ratio(), a);
                assert!(a < b);
            }
            for i in 0..=side {
                let v = f_triadic(i, n).unwrap().ratio();
                let w = f_triadic(side - i, n).unwrap().ratio();
                assert_eq!(v + w, Ratio::one());
            }
        }
    }

    #[test]
    fn good_energy_identity() {
        for n in 1..=6 {
            assert_eq!(good_energy(n).unwrap(), TriadicRational::power(6, 7, n).unwrap());
        }
        assert!(good_energy(0).is_err());
        assert!(matches!(good_energy(9), Err(Error::Capacity(_))));
    }

    #[test]
    fn good_energy_matches_vertex_graph() {
        for n in 1..=3 {
            let u = GoodFunction.on_level(n).unwrap();
            assert_eq!(energy_d(&u), good_energy(n).unwrap().ratio());
        }
    }

    #[test]
    fn cantor_identity() {
        for n in 1..=6 {
            assert_eq!(cantor_energy(n).unwrap(), TriadicRational::power(2, 3, n).unwrap());
        }
        let g = Arc::new(vertex_graph(3, Mode::Cross).unwrap());
        let u = VertexFunction::from_fn(g, |p| Ratio::new(p.x as i128, p.scale() as i128)).unwrap();
        assert_eq!(energy_d(&u), cantor_energy(3).unwrap().ratio());
    }

    #[test]
    fn phi_minimum() {
        let m = phi_minimize().unwrap();
        assert_eq!((m.x, m.y, m.value), (tr(2, 7), tr(5, 7), tr(6, 7)));
        assert_eq!(phi(m.x.ratio(), m.y.ratio()), m.value.ratio());
        let h = Ratio::new(1, 1000);
        assert!(phi(m.x.ratio() + h, m.y.ratio()) > m.value.ratio());
        assert!(phi(m.x.ratio(), m.y.ratio() - h) > m.value.ratio());
    }

    #[test]
    fn rational_type() {
        assert!(TriadicRational::new(1, 5).is_err());
        assert!(TriadicRational::new(1, 0).is_err());
        let v = tr(20, 49);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"num":"20","den":"49"}"#);
        assert_eq!(serde_json::from_str::<TriadicRational>(&json).unwrap(), v);
        assert!(serde_json::from_str::<TriadicRational>(r#"{"num":"1","den":"5"}"#).is_err());
    }

    #[test]
    fn harmonic_minimizer_properties() {
        let opts = SolverOptions::with_tol(1e-12);
        for n in 1..=3 {
            let h = harmonic_un(n, &opts).unwrap();
            assert!(h.reflect_x_residual < 1e-8);
            assert!(h.reflect_y_residual < 1e-8);
            assert!(h.midline_residual < 1e-8);
            assert!(h.left_max < 0.5 + 1e-8);
            assert!((h.energy_resistance_product() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn family_diagnostics() {
        let fam = good_function_limit(4, 1.25, &SolverOptions::with_tol(1e-12)).unwrap();
        assert_eq!(fam.sup_differences.len(), 3);
        assert_eq!(fam.a_profile.len(), 4);
        assert!(fam.a_spread().is_finite());
        let top = &fam.members[3].function;
        for (p, v) in top.points().iter().zip(top.values()) {
            if p.x == 0 {
                assert_eq!(*v, 0.0);
            }
            if p.x == p.scale() {
                assert_eq!(*v, 1.0);
            }
        }
    }
}
