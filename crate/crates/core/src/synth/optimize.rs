//! L-BFGS fitting of template parameters.

use std::cell::{Cell, RefCell};

use argmin::core::{CostFunction, Error, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;

use super::template::Objective;

type Cached = Option<(Vec<f64>, f64, Vec<f64>)>;

struct Problem<'a, 'b> {
    obj: &'b Objective<'a>,
    last: &'b RefCell<Cached>,
    best: &'b RefCell<(f64, Vec<f64>)>,
    /// Evaluations left; the line search can stall without this.
    budget: Cell<u64>,
}

impl Problem<'_, '_> {
    fn eval(&self, p: &[f64]) -> Result<(f64, Vec<f64>), Error> {
        if let Some((lp, c, g)) = self.last.borrow().as_ref() {
            if lp.as_slice() == p {
                return Ok((*c, g.clone()));
            }
        }
        let left = self.budget.get();
        if left == 0 {
            return Err(Error::msg("evaluation budget spent"));
        }
        self.budget.set(left - 1);
        let (c, g) = self.obj.cost_and_gradient(p);
        let mut best = self.best.borrow_mut();
        if c < best.0 {
            *best = (c, p.to_vec());
        }
        *self.last.borrow_mut() = Some((p.to_vec(), c, g.clone()));
        Ok((c, g))
    }
}

impl CostFunction for Problem<'_, '_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, Error> {
        Ok(self.eval(p)?.0)
    }
}

impl Gradient for Problem<'_, '_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, p: &Self::Param) -> Result<Vec<f64>, Error> {
        Ok(self.eval(p)?.1)
    }
}

/// Iterations per L-BFGS run before progress is checked.
const CHUNK: u64 = 150;

fn run_chunk(obj: &Objective<'_>, init: Vec<f64>, iters: u64, stop_cost: f64) -> (f64, Vec<f64>) {
    let c0 = obj.cost(&init);
    let last = RefCell::new(None);
    let best = RefCell::new((c0, init.clone()));
    let problem = Problem {
        obj,
        last: &last,
        best: &best,
        budget: Cell::new(iters * 20),
    };
    let run = LBFGS::new(MoreThuenteLineSearch::new(), 8)
        .with_tolerance_grad(1e-13)
        .and_then(|s| s.with_tolerance_cost(1e-18))
        .and_then(|solver| {
            Executor::new(problem, solver)
                .configure(|s| s.param(init).max_iters(iters).target_cost(stop_cost))
                .run()
        });
    let solver_best = run.ok().and_then(|r| r.state().get_best_param().cloned());
    let mut best = best.into_inner();
    if let Some(p) = solver_best {
        let c = obj.cost(&p);
        if c < best.0 {
            best = (c, p);
        }
    }
    best
}

/// Local minimisation from `init`, returning the best parameters seen and
/// their `Δ`. Runs restart in chunks and stop once `Δ ≤ stop_delta`, once a
/// chunk improves the cost by less than 1%, or after `max_iters`.
pub fn minimize(obj: &Objective<'_>, init: Vec<f64>, max_iters: u64, stop_delta: f64) -> (Vec<f64>, f64) {
    let stop_cost = 1.0 - (1.0 - stop_delta).powi(2);
    let mut best = (obj.cost(&init), init);
    let mut spent = 0;
    while spent < max_iters {
        let before = best.0;
        let iters = CHUNK.min(max_iters - spent);
        let next = run_chunk(obj, best.1.clone(), iters, stop_cost);
        spent += iters;
        if next.0 < best.0 {
            best = next;
        }
        if best.0 <= stop_cost || best.0 > before * 0.99 {
            break;
        }
    }
    let delta = obj.delta(&best.1);
    (best.1, delta)
}
