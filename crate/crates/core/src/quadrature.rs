//! Deterministic 2-D integration with error control.
//!
//! Two backends share one contract:
//!
//! * [`QuadratureMethod::AdaptiveSubdivision`]: globally adaptive bisection
//!   over rectangles with a tensor-product 7/15-point Gauss–Kronrod pair on
//!   every cell. The cell with the largest (normalized) error estimate is
//!   split first; equal priorities go to the lexicographically smallest cell.
//!   Cells are split along the axis whose embedded Gauss rule disagrees most.
//! * [`QuadratureMethod::TensorGauss`]: a global tensor Gauss–Legendre rule
//!   whose order is doubled until two successive estimates agree.
//!
//! Both are open rules, so integrands are never evaluated on the boundary.
//! Integrands may be vector-valued (`[f64; N]`); all components share one
//! subdivision and convergence requires every component to meet tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMethod {
    AdaptiveSubdivision,
    TensorGauss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: u64,
    /// Unused by the deterministic backends; seeds the Monte Carlo path of
    /// `full6d` configurations.
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadratureMethod::AdaptiveSubdivision,
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_evals: 10_000_000,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::config(
                "quadrature.rel_tol",
                format!("must lie in (0, 1), got {}", self.rel_tol),
            ));
        }
        if !(self.abs_tol >= 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::config(
                "quadrature.abs_tol",
                format!("must be finite and non-negative, got {}", self.abs_tol),
            ));
        }
        if self.max_evals < 1_000 {
            return Err(Error::config(
                "quadrature.max_evals",
                format!("must be at least 1000, got {}", self.max_evals),
            ));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::config(
                "quadrature.seed",
                "must fit in a signed 64-bit integer",
            ));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_method(mut self, method: QuadratureMethod) -> Self {
        self.method = method;
        self
    }

    fn tolerance(&self, value: f64) -> f64 {
        (self.rel_tol * value.abs()).max(self.abs_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evals: u64,
    pub converged: bool,
}

impl IntegralResult {
    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.error_estimate / self.value.abs()
        }
    }
}

/// Axis-aligned integration rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi)
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 > self.x0
            && self.y1 > self.y0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "degenerate integration rectangle {self:?}"
            )))
        }
    }

    fn split(&self, axis: Axis) -> (Rect, Rect) {
        match axis {
            Axis::X => {
                let m = 0.5 * (self.x0 + self.x1);
                (Rect { x1: m, ..*self }, Rect { x0: m, ..*self })
            }
            Axis::Y => {
                let m = 0.5 * (self.y0 + self.y1);
                (Rect { y1: m, ..*self }, Rect { y0: m, ..*self })
            }
        }
    }
}

/// Integrates a scalar function over `rect`.
///
/// Never returns an unconverged estimate flagged as converged; when
/// `spec.max_evals` runs out the best estimate is returned with
/// `converged = false`.
pub fn integrate_2d<F>(f: F, rect: Rect, spec: &QuadratureSpec) -> Result<IntegralResult>
where
    F: Fn(f64, f64) -> f64,
{
    let [r] = integrate_2d_multi(|x, y| [f(x, y)], rect, spec)?;
    Ok(r)
}

/// Integrates every component of a vector-valued function over one shared mesh.
pub fn integrate_2d_multi<const N: usize, F>(
    f: F,
    rect: Rect,
    spec: &QuadratureSpec,
) -> Result<[IntegralResult; N]>
where
    F: Fn(f64, f64) -> [f64; N],
{
    spec.validate()?;
    rect.validate()?;
    match spec.method {
        QuadratureMethod::AdaptiveSubdivision => Ok(adaptive(&f, rect, spec)),
        QuadratureMethod::TensorGauss => Ok(tensor_gauss(&f, rect, spec)),
    }
}

// 15-point Kronrod abscissae on [-1, 1] in ascending order, with the Kronrod
// weights and the 7-point Gauss weights (zero on Kronrod-only nodes).
const GK_NODES: [f64; 15] = [
    -0.991_455_371_120_812_639_206_854_697_526_329,
    -0.949_107_912_342_758_524_526_189_684_047_851,
    -0.864_864_423_359_769_072_789_712_788_640_926,
    -0.741_531_185_599_394_439_863_864_773_280_788,
    -0.586_087_235_467_691_130_294_144_845_693_013,
    -0.405_845_151_377_397_166_906_606_412_076_961,
    -0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.991_455_371_120_812_639_206_854_697_526_329,
];

const K_WEIGHTS: [f64; 15] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.022_935_322_010_529_224_963_732_008_058_970,
];

const G_WEIGHTS: [f64; 15] = [
    0.0,
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.0,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.0,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.0,
    0.417_959_183_673_469_387_755_102_040_816_327,
    0.0,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.0,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.0,
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.0,
];

const CELL_EVALS: u64 = 225;
const INITIAL_GRID: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone)]
struct Cell<const N: usize> {
    rect: Rect,
    estimate: [f64; N],
    error: [f64; N],
    priority: f64,
    split_axis: Axis,
}

impl<const N: usize> PartialEq for Cell<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<const N: usize> Eq for Cell<N> {}

impl<const N: usize> PartialOrd for Cell<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Cell<N> {
    // Max-heap on priority; among equals the lexicographically smallest
    // (x0, y0) corner must come out first, hence the reversed comparisons.
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.rect.x0.total_cmp(&self.rect.x0))
            .then_with(|| other.rect.y0.total_cmp(&self.rect.y0))
    }
}

struct CellRule<const N: usize> {
    kk: [f64; N],
    gg: [f64; N],
    gk: [f64; N],
    kg: [f64; N],
}

fn apply_rule<const N: usize, F>(f: &F, rect: &Rect) -> CellRule<N>
where
    F: Fn(f64, f64) -> [f64; N],
{
    let cx = 0.5 * (rect.x0 + rect.x1);
    let hx = 0.5 * (rect.x1 - rect.x0);
    let cy = 0.5 * (rect.y0 + rect.y1);
    let hy = 0.5 * (rect.y1 - rect.y0);
    let mut kk = [0.0; N];
    let mut gg = [0.0; N];
    let mut gk = [0.0; N];
    let mut kg = [0.0; N];
    for (i, &u) in GK_NODES.iter().enumerate() {
        let x = cx + hx * u;
        let mut row_k = [0.0; N];
        let mut row_g = [0.0; N];
        for (j, &v) in GK_NODES.iter().enumerate() {
            let values = f(x, cy + hy * v);
            for c in 0..N {
                row_k[c] += K_WEIGHTS[j] * values[c];
                row_g[c] += G_WEIGHTS[j] * values[c];
            }
        }
        for c in 0..N {
            kk[c] += K_WEIGHTS[i] * row_k[c];
            kg[c] += K_WEIGHTS[i] * row_g[c];
            gk[c] += G_WEIGHTS[i] * row_k[c];
            gg[c] += G_WEIGHTS[i] * row_g[c];
        }
    }
    let area = hx * hy;
    for c in 0..N {
        kk[c] *= area;
        gg[c] *= area;
        gk[c] *= area;
        kg[c] *= area;
    }
    CellRule { kk, gg, gk, kg }
}

fn make_cell<const N: usize>(rect: Rect, rule: &CellRule<N>, scale: &[f64; N]) -> Cell<N> {
    let mut error = [0.0; N];
    let mut priority: f64 = 0.0;
    let (mut along_x, mut along_y) = (0.0, 0.0);
    for c in 0..N {
        error[c] = (rule.kk[c] - rule.gg[c]).abs();
        priority = priority.max(error[c] / scale[c]);
        // G in x with K in y isolates the x-resolution error, and vice versa.
        along_x += (rule.kk[c] - rule.gk[c]).abs() / scale[c];
        along_y += (rule.kk[c] - rule.kg[c]).abs() / scale[c];
    }
    let split_axis = if along_y > along_x { Axis::Y } else { Axis::X };
    Cell {
        rect,
        estimate: rule.kk,
        error,
        priority,
        split_axis,
    }
}

fn adaptive<const N: usize, F>(f: &F, rect: Rect, spec: &QuadratureSpec) -> [IntegralResult; N]
where
    F: Fn(f64, f64) -> [f64; N],
{
    let n0 = INITIAL_GRID;
    let dx = (rect.x1 - rect.x0) / n0 as f64;
    let dy = (rect.y1 - rect.y0) / n0 as f64;
    let mut initial = Vec::with_capacity(n0 * n0);
    for i in 0..n0 {
        for j in 0..n0 {
            let x0 = rect.x0 + dx * i as f64;
            let y0 = rect.y0 + dy * j as f64;
            let x1 = if i + 1 == n0 { rect.x1 } else { x0 + dx };
            let y1 = if j + 1 == n0 { rect.y1 } else { y0 + dy };
            initial.push(Rect::new(x0, x1, y0, y1));
        }
    }

    // Priorities are normalized by the tolerance implied by the first-pass
    // estimate; fixed once so heap order never depends on later updates.
    let first: Vec<(Rect, CellRule<N>)> = initial.iter().map(|r| (*r, apply_rule(f, r))).collect();
    let mut evals = CELL_EVALS * first.len() as u64;
    let mut scale = [0.0; N];
    for c in 0..N {
        let total: f64 = first.iter().map(|(_, rule)| rule.kk[c]).sum();
        scale[c] = spec.tolerance(total).max(f64::MIN_POSITIVE);
    }
    let mut heap: BinaryHeap<Cell<N>> = first
        .iter()
        .map(|(rect, rule)| make_cell(*rect, rule, &scale))
        .collect();

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for cell in heap.iter() {
        for c in 0..N {
            value[c] += cell.estimate[c];
            error[c] += cell.error[c];
        }
    }

    let done =
        |value: &[f64; N], error: &[f64; N]| (0..N).all(|c| error[c] <= spec.tolerance(value[c]));

    while !done(&value, &error) && evals + 2 * CELL_EVALS <= spec.max_evals {
        let Some(worst) = heap.pop() else { break };
        let (a, b) = worst.rect.split(worst.split_axis);
        let ca = make_cell(a, &apply_rule(f, &a), &scale);
        let cb = make_cell(b, &apply_rule(f, &b), &scale);
        evals += 2 * CELL_EVALS;
        for c in 0..N {
            value[c] += ca.estimate[c] + cb.estimate[c] - worst.estimate[c];
            error[c] += ca.error[c] + cb.error[c] - worst.error[c];
        }
        heap.push(ca);
        heap.push(cb);
    }

    // Re-sum in a fixed order so the reported totals carry no drift from
    // the running updates.
    let mut cells = heap.into_vec();
    cells.sort_by(|p, q| {
        p.rect
            .x0
            .total_cmp(&q.rect.x0)
            .then_with(|| p.rect.y0.total_cmp(&q.rect.y0))
    });
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for cell in &cells {
        for c in 0..N {
            value[c] += cell.estimate[c];
            error[c] += cell.error[c];
        }
    }
    let converged = done(&value, &error);
    std::array::from_fn(|c| IntegralResult {
        value: value[c],
        error_estimate: error[c],
        evals,
        converged,
    })
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn tensor_rule<const N: usize, F>(f: &F, rect: &Rect, n: usize) -> [f64; N]
where
    F: Fn(f64, f64) -> [f64; N],
{
    let (nodes, weights) = gauss_legendre(n);
    let cx = 0.5 * (rect.x0 + rect.x1);
    let hx = 0.5 * (rect.x1 - rect.x0);
    let cy = 0.5 * (rect.y0 + rect.y1);
    let hy = 0.5 * (rect.y1 - rect.y0);
    let mut total = [0.0; N];
    for (xi, wi) in nodes.iter().zip(&weights) {
        let x = cx + hx * xi;
        let mut row = [0.0; N];
        for (yj, wj) in nodes.iter().zip(&weights) {
            let values = f(x, cy + hy * yj);
            for c in 0..N {
                row[c] += wj * values[c];
            }
        }
        for c in 0..N {
            total[c] += wi * row[c];
        }
    }
    total.map(|t| t * hx * hy)
}

fn tensor_gauss<const N: usize, F>(f: &F, rect: Rect, spec: &QuadratureSpec) -> [IntegralResult; N]
where
    F: Fn(f64, f64) -> [f64; N],
{
    let mut n = 16usize;
    let mut evals = (n * n) as u64;
    let mut previous = tensor_rule(f, &rect, n);
    loop {
        let next_n = 2 * n;
        let cost = (next_n * next_n) as u64;
        if evals + cost > spec.max_evals {
            // The last difference is not available at the final order; report
            // the most recent estimate with an unknown-quality flag.
            return previous.map(|v| IntegralResult {
                value: v,
                error_estimate: f64::INFINITY,
                evals,
                converged: false,
            });
        }
        let current = tensor_rule(f, &rect, next_n);
        evals += cost;
        n = next_n;
        let errors: [f64; N] = std::array::from_fn(|c| (current[c] - previous[c]).abs());
        let converged = (0..N).all(|c| errors[c] <= spec.tolerance(current[c]));
        if converged {
            return std::array::from_fn(|c| IntegralResult {
                value: current[c],
                error_estimate: errors[c],
                evals,
                converged: true,
            });
        }
        previous = current;
    }
}
