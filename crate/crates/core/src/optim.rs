//! Thin wrappers over `argmin` solvers for objectives that may fail with a
//! crate [`Error`].

use argmin::core::{CostFunction, Executor, Gradient, State, TerminationReason, TerminationStatus};
use argmin::solver::brent::BrentRoot;
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::neldermead::NelderMead;
use argmin::solver::quasinewton::BFGS;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
    pub converged: bool,
}

fn lift(e: Error) -> argmin::core::Error {
    argmin::core::Error::new(e)
}

fn lower(e: argmin::core::Error) -> Error {
    match e.downcast::<Error>() {
        Ok(inner) => inner,
        Err(other) => Error::InvalidParameter(format!("optimizer: {other}")),
    }
}

fn converged(status: &TerminationStatus) -> bool {
    matches!(
        status,
        TerminationStatus::Terminated(TerminationReason::SolverConverged | TerminationReason::TargetCostReached)
    )
}

struct Scalar<F>(F);

impl<F: Fn(f64) -> Result<f64>> CostFunction for Scalar<F> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, x: &f64) -> std::result::Result<f64, argmin::core::Error> {
        (self.0)(*x).map_err(lift)
    }
}

/// Minimiser of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_section<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("empty bracket [{lo}, {hi}]")));
    }
    let solver = GoldenSectionSearch::new(lo, hi)
        .and_then(|s| s.with_tolerance(tol))
        .map_err(lower)?;
    let res = Executor::new(Scalar(f), solver)
        .configure(|s| s.param(0.5 * (lo + hi)).max_iters(500))
        .run()
        .map_err(lower)?;
    let st = res.state();
    let x = *st.get_best_param().ok_or_else(|| Error::NonConvergence { iterations: 0 })?;
    Ok((x, st.get_best_cost()))
}

/// A root of `f` inside a sign-changing bracket by Brent's method
/// (bisection safeguarded with secant and inverse quadratic steps).
pub fn bracketed_root<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::InvalidParameter(format!("no sign change on [{lo}, {hi}]")));
    }
    let res = Executor::new(Scalar(f), BrentRoot::new(lo, hi, tol))
        .configure(|s| s.param(0.5 * (lo + hi)).max_iters(500))
        .run()
        .map_err(lower)?;
    let st = res.state();
    if !converged(st.get_termination_status()) {
        return Err(Error::NonConvergence {
            iterations: st.get_iter() as usize,
        });
    }
    st.get_best_param().copied().ok_or(Error::NonConvergence { iterations: 0 })
}

struct Multi<F>(F);

impl<F: Fn(&[f64]) -> Result<f64>> CostFunction for Multi<F> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        (self.0)(x).map_err(lift)
    }
}

impl<F: Fn(&[f64]) -> Result<f64>> Gradient for Multi<F> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, x: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let cost = |p: &Vec<f64>| (self.0)(p).map_err(lift);
        let grad = finitediff::vec::central_diff(&cost)(x);
        grad
    }
}

/// Nelder–Mead from the simplex `x0, x0 + step_j e_j`.
pub fn nelder_mead<F: Fn(&[f64]) -> Result<f64>>(f: F, x0: &[f64], step: &[f64], tol: f64, max_iters: u64) -> Result<Minimum> {
    if x0.is_empty() || step.len() != x0.len() {
        return Err(Error::InvalidParameter("simplex dimensions disagree".into()));
    }
    let mut simplex = vec![x0.to_vec()];
    for (j, s) in step.iter().enumerate() {
        let mut v = x0.to_vec();
        v[j] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(tol).map_err(lower)?;
    let res = Executor::new(Multi(f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(lower)?;
    let st = res.state();
    Ok(Minimum {
        x: st.get_best_param().cloned().ok_or(Error::NonConvergence { iterations: 0 })?,
        value: st.get_best_cost(),
        iterations: st.get_iter(),
        converged: converged(st.get_termination_status()),
    })
}

/// Quasi-Newton minimisation with central finite-difference gradients and
/// a Moré–Thuente line search.
pub fn bfgs<F: Fn(&[f64]) -> Result<f64>>(f: F, x0: &[f64], tol_grad: f64, max_iters: u64) -> Result<Minimum> {
    if x0.is_empty() {
        return Err(Error::InvalidParameter("empty starting point".into()));
    }
    let d = x0.len();
    let identity: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let solver = BFGS::new(MoreThuenteLineSearch::new())
        .with_tolerance_grad(tol_grad)
        .and_then(|s| s.with_tolerance_cost(1e-14))
        .map_err(lower)?;
    let res = Executor::new(Multi(f), solver)
        .configure(|s| s.param(x0.to_vec()).inv_hessian(identity).max_iters(max_iters))
        .run()
        .map_err(lower)?;
    let st = res.state();
    Ok(Minimum {
        x: st.get_best_param().cloned().ok_or(Error::NonConvergence { iterations: 0 })?,
        value: st.get_best_cost(),
        iterations: st.get_iter(),
        converged: converged(st.get_termination_status()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, v) = golden_section(|x| Ok((x - 1.3).powi(2) + 2.0), -5.0, 5.0, 1e-8).unwrap();
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn root_of_cubic() {
        let r = bracketed_root(|x| Ok(x * x * x - 2.0), 0.0, 3.0, 1e-12).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-9);
        assert!(bracketed_root(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn errors_pass_through() {
        let r = golden_section(|_| Err(Error::Degenerate("boom".into())), 0.0, 1.0, 1e-6);
        assert_eq!(r, Err(Error::Degenerate("boom".into())));
    }

    fn rosenbrock(x: &[f64]) -> Result<f64> {
        Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
    }

    #[test]
    fn nelder_mead_on_rosenbrock() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], 1e-12, 5000).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn bfgs_on_quadratic() {
        let f = |x: &[f64]| Ok((x[0] - 2.0).powi(2) + 3.0 * (x[1] + 1.0).powi(2) + x[0] * x[1]);
        let m = bfgs(f, &[0.0, 0.0], 1e-9, 200).unwrap();
        // Stationary point of the quadratic solved by hand: 2(x-2) + y = 0,
        // 6(y+1) + x = 0.
        let (x, y) = (30.0 / 11.0, -16.0 / 11.0);
        assert!((m.x[0] - x).abs() < 1e-5 && (m.x[1] - y).abs() < 1e-5);
        assert!(m.converged);
    }
}
