//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Deterministic: no randomness, fixed evaluation order. Every accepted iterate has an
//! objective no larger than the previous one.

use std::collections::VecDeque;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub max_iterations: usize,
    /// Stop once `max_i |g_i|` falls below this.
    pub gradient_tolerance: f64,
    pub memory: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { max_iterations: 500, gradient_tolerance: 1e-6, memory: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// The line search could not decrease the objective any further.
    LineSearchStalled,
}

#[derive(Clone, Debug)]
pub struct Minimum<F> {
    pub x: Vec<F>,
    pub value: F,
    pub gradient_max_norm: F,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective at the start point and at every accepted iterate.
    pub trace: Vec<F>,
}

impl<F> Minimum<F> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::GradientTolerance
    }
}

/// Smooth objective: returns `f(x)` and writes `∇f(x)` into `grad`.
pub trait Objective<F: Scalar> {
    fn evaluate(&self, x: &[F], grad: &mut [F]) -> F;
}

impl<F: Scalar, T: Fn(&[F], &mut [F]) -> F> Objective<F> for T {
    fn evaluate(&self, x: &[F], grad: &mut [F]) -> F {
        self(x, grad)
    }
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

fn max_norm<F: Scalar>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, x| acc.max(x.abs()))
}

pub fn minimize<F: Scalar, O: Objective<F> + ?Sized>(objective: &O, x0: Vec<F>, config: &LbfgsConfig) -> Minimum<F> {
    minimize_observed(objective, x0, config, |_| {})
}

/// As [`minimize`], calling `observe` on the start point and every accepted iterate.
pub fn minimize_observed<F: Scalar, O: Objective<F> + ?Sized>(
    objective: &O,
    x0: Vec<F>,
    config: &LbfgsConfig,
    mut observe: impl FnMut(&[F]),
) -> Minimum<F> {
    let n = x0.len();
    let tol = F::lit(config.gradient_tolerance);
    let c1 = F::lit(1e-4);
    let mut x = x0;
    let mut g = vec![F::zero(); n];
    let mut f = objective.evaluate(&x, &mut g);
    observe(&x);
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<F>, Vec<F>, F)> = VecDeque::with_capacity(config.memory);

    let mut x_new = vec![F::zero(); n];
    let mut g_new = vec![F::zero(); n];
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    while iterations < config.max_iterations {
        if n == 0 || max_norm(&g) < tol {
            termination = Termination::GradientTolerance;
            break;
        }

        let mut dir = two_loop(&g, &history);
        let mut slope = dot(&g, &dir);
        if !(slope < F::zero()) || !slope.is_finite() {
            history.clear();
            dir = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &dir);
        }
        // Without curvature information, start from a unit-length step.
        let mut step = if history.is_empty() { F::one().min(F::one() / max_norm(&g)) } else { F::one() };

        let mut accepted = None;
        for attempt in 0..2 {
            for _ in 0..60 {
                for i in 0..n {
                    x_new[i] = x[i] + step * dir[i];
                }
                let f_new = objective.evaluate(&x_new, &mut g_new);
                if f_new.is_finite() && f_new <= f + c1 * step * slope {
                    accepted = Some(f_new);
                    break;
                }
                step *= F::lit(0.5);
            }
            if accepted.is_some() || attempt == 1 || history.is_empty() {
                break;
            }
            // Quasi-Newton direction failed; retry along steepest descent.
            history.clear();
            dir = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &dir);
            step = F::one().min(F::one() / max_norm(&g));
        }

        let Some(f_new) = accepted else {
            termination = Termination::LineSearchStalled;
            break;
        };

        let s: Vec<F> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<F> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > F::lit(1e-12) * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > F::zero() {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, F::one() / sy));
        }

        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        iterations += 1;
        trace.push(f);
        observe(&x);
    }
    if termination == Termination::MaxIterations && max_norm(&g) < tol {
        termination = Termination::GradientTolerance;
    }

    Minimum { gradient_max_norm: max_norm(&g), x, value: f, iterations, termination, trace }
}

/// Two-loop recursion: returns `-H g` for the implicit inverse Hessian `H`.
fn two_loop<F: Scalar>(g: &[F], history: &VecDeque<(Vec<F>, Vec<F>, F)>) -> Vec<F> {
    let mut q: Vec<F> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let scale = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= scale;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|&v| -v).collect()
}

/// Central finite-difference gradient, for checking analytic gradients.
pub fn finite_difference_gradient<F: Scalar>(f: impl Fn(&[F]) -> F, x: &[F], step: F) -> Vec<F> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (F::lit(2.0) * step)
        })
        .collect()
}
