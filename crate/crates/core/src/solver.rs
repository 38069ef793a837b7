//! Bound-constrained limited-memory quasi-Newton minimizer.
//!
//! Projected L-BFGS: the gradient-projection active set (variables pinned at
//! the bound with outward gradient) is frozen per iteration, the two-loop
//! recursion runs on the free variables, and steps are chosen by a strong
//! Wolfe line search capped at the first bound breakpoint. Every iterate is
//! feasible and the objective is non-increasing, so the inner solve qualifies
//! as the inexact proximity operator the outer Douglas-Rachford loop needs.

use std::collections::VecDeque;

use crate::error::{CoreError, Result};
use crate::image::Image;
use crate::objective::LocalObjective;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Number of stored curvature pairs.
    pub memory: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the projected gradient norm, relative to its
    /// value at the starting point.
    pub gradient_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Per-pixel lower bound (0 for nonnegativity), or `None` for unconstrained.
    pub lower_bound: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            memory: 5,
            max_iterations: 100,
            gradient_tol: 1e-8,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            lower_bound: Some(0.0),
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(CoreError::param("solver memory must be >= 1"));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(CoreError::param("need 0 < c1 < c2 < 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    Budget,
    LineSearchStall,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: usize,
    pub final_value: f64,
    pub final_projected_gradient_norm: f64,
    pub termination: Termination,
}

/// Projected gradient: at a pinned variable whose gradient points out of the
/// feasible set the component is zero, elsewhere it is the raw gradient.
fn projected_gradient(x: &Image, g: &Image, lb: Option<f64>) -> Image {
    match lb {
        None => g.clone(),
        Some(lb) => {
            let mut pg = g.clone();
            for (p, (xv, gv)) in pg
                .as_mut_slice()
                .iter_mut()
                .zip(x.as_slice().iter().zip(g.as_slice()))
            {
                if *xv <= lb && *gv > 0.0 {
                    *p = 0.0;
                }
            }
            pg
        }
    }
}

fn clip_to_bound(x: &mut Image, lb: Option<f64>) {
    if let Some(lb) = lb {
        for v in x.as_mut_slice() {
            if *v < lb {
                *v = lb;
            }
        }
    }
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>, // (s, y, 1/<s,y>)
    capacity: usize,
}

impl Memory {
    fn new(capacity: usize) -> Self {
        Memory {
            pairs: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sn: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let yn: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        // skip nearly-singular curvature pairs
        if sy <= 1e-12 * sn * yn {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Two-loop recursion: returns `H g` with the usual `<s,y>/<y,y>` scaling
    /// of the seed matrix.
    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        if self.pairs.is_empty() {
            return q;
        }
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, inv_sy) in self.pairs.iter().rev() {
            let a = inv_sy * s.iter().zip(q.iter()).map(|(a, b)| a * b).sum::<f64>();
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let (s_last, y_last, inv_sy) = self.pairs.back().unwrap();
        let yy: f64 = y_last.iter().map(|v| v * v).sum();
        let _ = s_last;
        let gamma = 1.0 / (inv_sy * yy);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, inv_sy), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = inv_sy * y.iter().zip(q.iter()).map(|(a, b)| a * b).sum::<f64>();
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q
    }
}

struct LinePoint {
    alpha: f64,
    value: f64,
    slope: f64,
    x: Image,
    grad: Image,
}

/// Strong Wolfe line search with quadratic interpolation (exact on quadratic
/// objectives) and bisection fallback, capped at `alpha_max`.
struct LineSearch<'a> {
    eval: &'a mut dyn FnMut(&Image) -> Result<(f64, Image)>,
    x0: &'a Image,
    dir: &'a Image,
    evals: usize,
}

impl<'a> LineSearch<'a> {
    fn probe(&mut self, alpha: f64) -> Result<LinePoint> {
        let mut x = self.x0.clone();
        x.axpy(alpha, self.dir);
        let (value, grad) = (self.eval)(&x)?;
        self.evals += 1;
        let slope = grad.dot(self.dir);
        Ok(LinePoint {
            alpha,
            value,
            slope,
            x,
            grad,
        })
    }
}

fn interpolate(lo: &LinePoint, hi: &LinePoint) -> f64 {
    // minimizer of the quadratic through (lo.value, lo.slope, hi.value)
    let d = hi.alpha - lo.alpha;
    let denom = 2.0 * (hi.value - lo.value - lo.slope * d);
    let cand = if denom.abs() > 1e-300 {
        lo.alpha - lo.slope * d * d / denom
    } else {
        f64::NAN
    };
    let (a, b) = if lo.alpha < hi.alpha {
        (lo.alpha, hi.alpha)
    } else {
        (hi.alpha, lo.alpha)
    };
    let span = b - a;
    if cand.is_finite() && cand > a + 0.01 * span && cand < b - 0.01 * span {
        cand
    } else {
        0.5 * (a + b)
    }
}

fn strong_wolfe(
    ls: &mut LineSearch,
    f0: f64,
    slope0: f64,
    alpha_first: f64,
    alpha_max: f64,
    c1: f64,
    c2: f64,
) -> Result<Option<LinePoint>> {
    debug_assert!(slope0 < 0.0);
    let max_evals = 20;
    let armijo = |p: &LinePoint| p.value <= f0 + c1 * p.alpha * slope0;
    let curvature = |p: &LinePoint| p.slope.abs() <= c2 * slope0.abs();

    let mut prev: Option<LinePoint> = None;
    let mut alpha = alpha_first.min(alpha_max);
    let mut bracket: Option<(LinePoint, LinePoint)> = None;
    // stage 1: bracket a Wolfe interval or accept outright
    for _ in 0..max_evals {
        let p = ls.probe(alpha)?;
        let prev_value = prev.as_ref().map(|q| q.value).unwrap_or(f0);
        if !armijo(&p) || (prev.is_some() && p.value >= prev_value) {
            let lo = match prev {
                Some(q) => q,
                None => LinePoint {
                    alpha: 0.0,
                    value: f0,
                    slope: slope0,
                    x: ls.x0.clone(),
                    grad: Image::zeros(1, 1), // placeholder, never returned
                },
            };
            bracket = Some((lo, p));
            break;
        }
        if curvature(&p) {
            return Ok(Some(p));
        }
        if p.slope >= 0.0 {
            let lo = prev.unwrap_or(LinePoint {
                alpha: 0.0,
                value: f0,
                slope: slope0,
                x: ls.x0.clone(),
                grad: Image::zeros(1, 1),
            });
            bracket = Some((p, lo));
            break;
        }
        if (p.alpha - alpha_max).abs() <= 1e-16 * alpha_max {
            // bound breakpoint reached with sufficient decrease
            return Ok(Some(p));
        }
        alpha = (p.alpha * 2.0).min(alpha_max);
        prev = Some(p);
    }

    // stage 2: zoom
    let Some((mut lo, mut hi)) = bracket else {
        return Ok(None);
    };
    for _ in 0..max_evals {
        let alpha = interpolate(&lo, &hi);
        let p = ls.probe(alpha)?;
        if !armijo(&p) || p.value >= lo.value {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(Some(p));
            }
            if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
        if (hi.alpha - lo.alpha).abs() < 1e-14 * lo.alpha.max(1.0) {
            break;
        }
    }
    // settle for the best sufficient-decrease point found
    if lo.alpha > 0.0 && armijo(&lo) {
        return Ok(Some(lo));
    }
    Ok(None)
}

/// Minimizes a smooth objective, optionally under a per-pixel lower bound.
///
/// The returned point is feasible and its value never exceeds the starting
/// value. Line-search failure terminates gracefully with the best iterate.
pub fn minimize(
    objective: &mut dyn FnMut(&Image) -> Result<(f64, Image)>,
    x0: &Image,
    config: &SolverConfig,
) -> Result<(Image, SolverReport)> {
    config.validate()?;
    let lb = config.lower_bound;
    let mut x = x0.clone();
    clip_to_bound(&mut x, lb);
    let (mut f, mut g) = objective(&x)?;
    if !f.is_finite() {
        return Err(CoreError::NonFinite {
            what: "objective at starting point",
            row: 0,
            col: 0,
        });
    }
    let pg0 = projected_gradient(&x, &g, lb).norm_sq().sqrt();
    let tol = config.gradient_tol * pg0.max(f64::MIN_POSITIVE);
    let mut memory = Memory::new(config.memory);
    let mut iterations = 0;
    let mut termination = Termination::Budget;

    while iterations < config.max_iterations {
        let pg = projected_gradient(&x, &g, lb);
        let pg_norm = pg.norm_sq().sqrt();
        if pg_norm <= tol {
            termination = Termination::Converged;
            break;
        }

        // restrict the quasi-Newton model to the free variables
        let mut d = memory.apply(pg.as_slice());
        for v in d.iter_mut() {
            *v = -*v;
        }
        if let Some(lb) = lb {
            for (dv, xv) in d.iter_mut().zip(x.as_slice()) {
                if *xv <= lb && *dv < 0.0 {
                    *dv = 0.0;
                }
            }
        }
        let dir = Image::from_vec(x.height(), x.width(), d)?;
        let mut slope = g.dot(&dir);
        let dir = if slope >= 0.0 || !slope.is_finite() {
            // stale curvature: fall back to steepest feasible descent
            memory.clear();
            let mut sd = pg.clone();
            sd.scale_in_place(-1.0);
            slope = g.dot(&sd);
            if slope >= 0.0 {
                termination = Termination::Converged;
                break;
            }
            sd
        } else {
            dir
        };

        // first breakpoint where a free variable hits the bound
        let alpha_max = match lb {
            None => f64::INFINITY,
            Some(lb) => {
                let mut am = f64::INFINITY;
                for (xv, dv) in x.as_slice().iter().zip(dir.as_slice()) {
                    if *dv < 0.0 && *xv > lb {
                        am = am.min((lb - xv) / dv);
                    }
                }
                am
            }
        };
        if alpha_max <= 0.0 {
            termination = Termination::Converged;
            break;
        }

        let alpha_first = if memory.pairs.is_empty() {
            // gradient step scaling on the first iteration
            (1.0 / pg_norm.max(1e-12)).min(1.0)
        } else {
            1.0
        };
        let mut ls = LineSearch {
            eval: objective,
            x0: &x,
            dir: &dir,
            evals: 0,
        };
        let accepted = strong_wolfe(
            &mut ls,
            f,
            slope,
            alpha_first,
            alpha_max,
            config.wolfe_c1,
            config.wolfe_c2,
        )?;
        iterations += 1;
        let Some(mut point) = accepted else {
            termination = Termination::LineSearchStall;
            break;
        };

        // snap rounding residue onto the bound
        if let Some(lb) = lb {
            let mut snapped = false;
            for v in point.x.as_mut_slice() {
                if *v < lb {
                    *v = lb;
                    snapped = true;
                }
            }
            if snapped {
                let (fv, gv) = objective(&point.x)?;
                point.value = fv;
                point.grad = gv;
            }
        }

        let s: Vec<f64> = point
            .x
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        let ydiff: Vec<f64> = point
            .grad
            .as_slice()
            .iter()
            .zip(g.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        memory.push(s, ydiff);

        x = point.x;
        f = point.value;
        g = point.grad;
    }

    let pg_norm = projected_gradient(&x, &g, lb).norm_sq().sqrt();
    if termination == Termination::Budget && pg_norm <= tol {
        termination = Termination::Converged;
    }
    Ok((
        x,
        SolverReport {
            iterations,
            final_value: f,
            final_projected_gradient_norm: pg_norm,
            termination,
        },
    ))
}

/// The proximity step of the distributed loop: approximately minimizes
/// `f(w) + 1/2 ||w - u||^2_alpha` under the solver's bound, warm-started.
pub fn prox_local(
    objective: &mut LocalObjective,
    u: &Image,
    budget: usize,
    warm_start: &Image,
    config: &SolverConfig,
) -> Result<(Image, SolverReport)> {
    objective.set_anchor(u.clone())?;
    let cfg = SolverConfig {
        max_iterations: budget,
        ..config.clone()
    };
    minimize(&mut |x| objective.eval(x), warm_start, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blur::LocalBlurOperator;
    use crate::psf::gaussian_psf;
    use crate::rng::CounterRng;

    fn unconstrained(max_iterations: usize) -> SolverConfig {
        SolverConfig {
            max_iterations,
            lower_bound: None,
            gradient_tol: 1e-12,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn quadratic_unit_metric_in_three_iterations() {
        let c = Image::from_vec(2, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let mut eval = |x: &Image| {
            let d = x.sub(&c);
            Ok((0.5 * d.norm_sq(), d))
        };
        let x0 = Image::zeros(2, 2);
        let (x, report) = minimize(&mut eval, &x0, &unconstrained(10)).unwrap();
        assert!(report.iterations <= 3, "iterations {}", report.iterations);
        for (a, b) in x.as_slice().iter().zip(c.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn active_bound_satisfies_kkt() {
        // f(x) = 1/2 (x - 2)^2 with x >= 3: minimizer pinned at 3
        let mut eval = |x: &Image| {
            let d = x.get(0, 0) - 2.0;
            Ok((0.5 * d * d, Image::constant(1, 1, d)))
        };
        let cfg = SolverConfig {
            lower_bound: Some(3.0),
            max_iterations: 50,
            ..SolverConfig::default()
        };
        let x0 = Image::constant(1, 1, 10.0);
        let (x, report) = minimize(&mut eval, &x0, &cfg).unwrap();
        assert!((x.get(0, 0) - 3.0).abs() < 1e-12);
        assert_eq!(report.termination, Termination::Converged);
    }

    #[test]
    fn rosenbrock_converges() {
        let mut eval = |p: &Image| {
            let (x, y) = (p.get(0, 0), p.get(0, 1));
            let f = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
            let gx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
            let gy = 200.0 * (y - x * x);
            Ok((f, Image::from_vec(1, 2, vec![gx, gy]).unwrap()))
        };
        let x0 = Image::from_vec(1, 2, vec![-1.2, 1.0]).unwrap();
        let (x, report) = minimize(&mut eval, &x0, &unconstrained(200)).unwrap();
        assert!(
            (x.get(0, 0) - 1.0).abs() < 1e-6 && (x.get(0, 1) - 1.0).abs() < 1e-6,
            "got {:?} after {} iterations",
            x.as_slice(),
            report.iterations
        );
    }

    /// Dense symmetric positive definite quadratic in d variables.
    struct Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    }

    impl Quadratic {
        fn random(d: usize, seed: u64) -> Self {
            let mut rng = CounterRng::new(seed);
            let m: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..d).map(|_| rng.next_f64() - 0.5).collect())
                .collect();
            let mut a = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        a[i][j] += m[k][i] * m[k][j];
                    }
                }
                a[i][i] += 1.0; // keep it well conditioned
            }
            let b = (0..d).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            Quadratic { a, b }
        }

        fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
            let d = self.b.len();
            let mut ax = vec![0.0; d];
            for i in 0..d {
                for j in 0..d {
                    ax[i] += self.a[i][j] * x[j];
                }
            }
            let f = 0.5 * x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>()
                - self.b.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let g = ax.iter().zip(&self.b).map(|(a, b)| a - b).collect();
            (f, g)
        }

        /// Gaussian elimination solve of `A z = rhs` restricted to `free`.
        fn solve_on(&self, free: &[usize], rhs: &[f64]) -> Option<Vec<f64>> {
            let k = free.len();
            let mut m = vec![vec![0.0; k + 1]; k];
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    m[r][c] = self.a[i][j];
                }
                m[r][k] = rhs[i];
            }
            for col in 0..k {
                let pivot = (col..k).max_by(|&a, &b| {
                    m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
                })?;
                if m[pivot][col].abs() < 1e-12 {
                    return None;
                }
                m.swap(col, pivot);
                for r in 0..k {
                    if r != col {
                        let factor = m[r][col] / m[col][col];
                        for c in col..=k {
                            m[r][c] -= factor * m[col][c];
                        }
                    }
                }
            }
            Some((0..k).map(|r| m[r][k] / m[r][r]).collect())
        }

        /// Exhaustive active-set oracle for `min 1/2 x'Ax - b'x, x >= 0`.
        fn nonnegative_minimizer(&self) -> Vec<f64> {
            let d = self.b.len();
            let mut best: Option<(f64, Vec<f64>)> = None;
            for mask in 0..(1usize << d) {
                let free: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
                let mut x = vec![0.0; d];
                if !free.is_empty() {
                    match self.solve_on(&free, &self.b) {
                        Some(sol) => {
                            for (idx, &i) in free.iter().enumerate() {
                                x[i] = sol[idx];
                            }
                        }
                        None => continue,
                    }
                }
                if x.iter().any(|&v| v < -1e-12) {
                    continue;
                }
                let (f, _) = self.eval(&x);
                if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
                    best = Some((f, x));
                }
            }
            best.expect("some active set is feasible").1
        }
    }

    #[test]
    fn quadratic_exactness_within_dimension_plus_two() {
        for seed in 0..5 {
            let d = 5;
            let q = Quadratic::random(d, seed);
            let mut eval = |x: &Image| {
                let (f, g) = q.eval(x.as_slice());
                Ok((f, Image::from_vec(1, d, g).unwrap()))
            };
            // near-exact line searches recover conjugate-gradient behavior
            let cfg = SolverConfig {
                memory: d,
                max_iterations: d + 2,
                gradient_tol: 1e-14,
                wolfe_c2: 1e-3,
                lower_bound: None,
                ..SolverConfig::default()
            };
            let x0 = Image::zeros(1, d);
            let (x, _) = minimize(&mut eval, &x0, &cfg).unwrap();
            let xstar = q.solve_on(&(0..d).collect::<Vec<_>>(), &q.b).unwrap();
            for (a, b) in x.as_slice().iter().zip(&xstar) {
                assert!((a - b).abs() < 1e-10, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn nonnegative_quadratic_matches_active_set_oracle() {
        for seed in 10..16 {
            let d = 6;
            let q = Quadratic::random(d, seed);
            let expected = q.nonnegative_minimizer();
            let mut eval = |x: &Image| {
                let (f, g) = q.eval(x.as_slice());
                Ok((f, Image::from_vec(1, d, g).unwrap()))
            };
            let cfg = SolverConfig {
                memory: d,
                max_iterations: 300,
                gradient_tol: 1e-14,
                wolfe_c2: 0.1,
                lower_bound: Some(0.0),
                ..SolverConfig::default()
            };
            let x0 = Image::constant(1, d, 0.5);
            let (x, _) = minimize(&mut eval, &x0, &cfg).unwrap();
            for (a, b) in x.as_slice().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-8, "seed {seed}: got {a}, oracle {b}");
            }
        }
    }

    #[test]
    fn monotone_descent_and_feasibility_on_deblurring_block() {
        let psf = gaussian_psf(5, 2.2, 2.2).unwrap();
        let op = LocalBlurOperator::new(&psf, 16, 16).unwrap();
        let (mh, mw) = op.observed_size();
        let mut rng = CounterRng::new(40);
        let truth = Image::from_fn(16, 16, |_, _| rng.next_f64() * 100.0);
        let y = op.apply(&truth).unwrap();
        let w = Image::constant(mh, mw, 1.0 / 400.0);
        let obj = LocalObjective::new(y, op, w, 0.01, 100.0).unwrap();
        let mut values = Vec::new();
        let mut eval = |x: &Image| {
            let (f, g) = obj.eval(x)?;
            values.push(f);
            Ok((f, g))
        };
        let x0 = Image::constant(16, 16, 50.0);
        let cfg = SolverConfig {
            max_iterations: 40,
            ..SolverConfig::default()
        };
        let (x, report) = minimize(&mut eval, &x0, &cfg).unwrap();
        assert!(x.min_value() >= 0.0);
        assert!(report.final_value <= values[0]);
        // accepted iterates never increase (line-search probes may)
        assert!(values.iter().cloned().fold(f64::INFINITY, f64::min) >= report.final_value - 1e-9);
    }

    #[test]
    fn determinism_bit_identical_runs() {
        let q = Quadratic::random(8, 3);
        let run = || {
            let mut eval = |x: &Image| {
                let (f, g) = q.eval(x.as_slice());
                Ok((f, Image::from_vec(1, 8, g).unwrap()))
            };
            let cfg = SolverConfig {
                max_iterations: 60,
                lower_bound: Some(0.0),
                ..SolverConfig::default()
            };
            let x0 = Image::constant(1, 8, 0.25);
            minimize(&mut eval, &x0, &cfg).unwrap().0
        };
        let a = run();
        let b = run();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn prox_with_zero_objective_is_projection() {
        let psf = crate::psf::Psf::delta(3).unwrap();
        let op = LocalBlurOperator::new(&psf, 6, 6).unwrap();
        let y = Image::zeros(4, 4);
        let w = Image::zeros(4, 4);
        let mut obj = LocalObjective::new(y, op, w, 0.0, 100.0).unwrap();
        obj.set_proximal(Image::constant(6, 6, 1.0), Image::zeros(6, 6))
            .unwrap();
        let mut rng = CounterRng::new(9);
        let u = Image::from_fn(6, 6, |_, _| rng.next_f64() * 4.0 - 2.0);
        let cfg = SolverConfig {
            gradient_tol: 1e-12,
            ..SolverConfig::default()
        };
        let (x, _) = prox_local(&mut obj, &u, 50, &u, &cfg).unwrap();
        for (xv, uv) in x.as_slice().iter().zip(u.as_slice()) {
            assert!((xv - uv.max(0.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn prox_of_quadratic_midpoint() {
        // f(w) = 1/2 ||w - v||^2 with alpha = 1 and no bound: prox(u) = (u + v)/2
        let psf = crate::psf::Psf::delta(3).unwrap();
        let op = LocalBlurOperator::new(&psf, 6, 6).unwrap();
        let mut rng = CounterRng::new(10);
        let v = Image::from_fn(6, 6, |_, _| rng.next_f64() * 2.0 - 1.0);
        let u = Image::from_fn(6, 6, |_, _| rng.next_f64() * 2.0 - 1.0);
        // delta-psf operator is chop to the valid region; build the data term
        // so that H w = central chop and y = central chop of v, weight 1 there.
        // Instead use the proximal machinery directly on a pure anchor pair:
        // f(w) = 1/2 ||w - v||^2 realized as second anchor via data weights on
        // an identity operator is overkill; evaluate with a closure instead.
        let mut eval = |x: &Image| {
            let d1 = x.sub(&v);
            let d2 = x.sub(&u);
            let mut g = d1.clone();
            g.axpy(1.0, &d2);
            Ok((0.5 * d1.norm_sq() + 0.5 * d2.norm_sq(), g))
        };
        let cfg = unconstrained(50);
        let (x, _) = minimize(&mut eval, &u, &cfg).unwrap();
        for i in 0..x.len() {
            let want = 0.5 * (u.as_slice()[i] + v.as_slice()[i]);
            assert!((x.as_slice()[i] - want).abs() < 1e-9);
        }
        let _ = op;
    }

    #[test]
    fn rejects_bad_wolfe_constants() {
        let cfg = SolverConfig {
            wolfe_c1: 0.5,
            wolfe_c2: 0.1,
            ..SolverConfig::default()
        };
        let mut eval = |x: &Image| Ok((x.norm_sq(), x.clone()));
        assert!(minimize(&mut eval, &Image::zeros(2, 2), &cfg).is_err());
    }
}
