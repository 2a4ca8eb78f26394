//! Nelder-Mead simplex minimization, an exterior-penalty wrapper for box and
//! sum constraints, and a water-filling solver for the separable convex
//! allocation problem used to cross-check it.

use crate::error::{Error, Result};

/// Reflection, expansion, contraction and shrink coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop once `f(worst) - f(best)` is at most this...
    pub f_tolerance: f64,
    /// ...and every vertex is within this of the best one in every coordinate.
    pub x_tolerance: f64,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    pub coefficients: Coefficients,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: 2000,
            f_tolerance: 1e-10,
            x_tolerance: 1e-8,
            initial_step: 0.05,
            coefficients: Coefficients::default(),
        }
    }
}

impl SimplexOptions {
    pub fn validate(&self) -> Result<()> {
        let c = &self.coefficients;
        let ok = c.reflection > 0.0
            && c.expansion > 1.0
            && c.expansion > c.reflection
            && c.contraction > 0.0
            && c.contraction < 1.0
            && c.shrink > 0.0
            && c.shrink < 1.0
            && self.f_tolerance > 0.0
            && self.x_tolerance > 0.0
            && self.initial_step != 0.0
            && self.initial_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Invariant(format!("invalid simplex options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Vertex {
    point: Vec<f64>,
    value: f64,
    /// Insertion counter; breaks ties between equal values.
    order: u64,
}

/// What one iteration did to the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Reflect,
    Expand,
    ContractOutside,
    ContractInside,
    Shrink,
}

/// Vertex set plus loop bookkeeping. Vertices stay sorted best-first.
#[derive(Debug, Clone)]
pub struct SimplexState {
    vertices: Vec<Vertex>,
    iterations: usize,
    evaluations: usize,
    best_history: Vec<f64>,
    next_order: u64,
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

impl SimplexState {
    /// Builds the axis-aligned simplex `x0, x0 + step * e_i`.
    pub fn new<F>(f: &F, x0: &[f64], step: f64) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        if x0.is_empty() {
            return Err(Error::Domain("cannot minimize over zero dimensions".into()));
        }
        let f0 = f(x0);
        if !f0.is_finite() {
            return Err(Error::NonFiniteStart);
        }
        let mut state = SimplexState {
            vertices: Vec::with_capacity(x0.len() + 1),
            iterations: 0,
            evaluations: 1,
            best_history: Vec::new(),
            next_order: 0,
        };
        state.push(x0.to_vec(), f0);
        for i in 0..x0.len() {
            let mut p = x0.to_vec();
            p[i] += step;
            let v = state.eval(f, &p);
            state.push(p, v);
        }
        state.sort();
        state.best_history.push(state.best_value());
        Ok(state)
    }

    fn eval<F: Fn(&[f64]) -> f64>(&mut self, f: &F, x: &[f64]) -> f64 {
        self.evaluations += 1;
        sanitize(f(x))
    }

    fn push(&mut self, point: Vec<f64>, value: f64) {
        self.vertices.push(Vertex {
            point,
            value,
            order: self.next_order,
        });
        self.next_order += 1;
    }

    fn sort(&mut self) {
        self.vertices
            .sort_by(|a, b| a.value.total_cmp(&b.value).then(a.order.cmp(&b.order)));
    }

    fn replace_worst(&mut self, point: Vec<f64>, value: f64) {
        self.vertices.pop();
        self.push(point, value);
        self.sort();
    }

    pub fn dimension(&self) -> usize {
        self.vertices[0].point.len()
    }

    pub fn best_point(&self) -> &[f64] {
        &self.vertices[0].point
    }

    pub fn best_value(&self) -> f64 {
        self.vertices[0].value
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Best value after construction and after each iteration.
    pub fn best_history(&self) -> &[f64] {
        &self.best_history
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.vertices.iter().map(|v| v.value)
    }

    pub fn f_spread(&self) -> f64 {
        let worst = self.vertices[self.vertices.len() - 1].value;
        worst - self.best_value()
    }

    pub fn x_spread(&self) -> f64 {
        let best = self.best_point();
        self.vertices[1..]
            .iter()
            .flat_map(|v| v.point.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn converged(&self, opts: &SimplexOptions) -> bool {
        self.f_spread() <= opts.f_tolerance && self.x_spread() <= opts.x_tolerance
    }

    /// One Nelder-Mead iteration.
    pub fn iterate<F>(&mut self, f: &F, c: &Coefficients) -> Step
    where
        F: Fn(&[f64]) -> f64,
    {
        let n = self.dimension();
        let worst = self.vertices[n].clone();
        let f_best = self.vertices[0].value;
        let f_next_worst = self.vertices[n - 1].value;

        let mut centroid = vec![0.0; n];
        for v in &self.vertices[..n] {
            for (c, x) in centroid.iter_mut().zip(&v.point) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        // centroid + t * (centroid - worst)
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.point)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(c.reflection);
        let f_reflected = self.eval(f, &reflected);

        let step = if f_reflected < f_best {
            let expanded = along(c.reflection * c.expansion);
            let f_expanded = self.eval(f, &expanded);
            if f_expanded < f_reflected {
                self.replace_worst(expanded, f_expanded);
                Step::Expand
            } else {
                self.replace_worst(reflected, f_reflected);
                Step::Reflect
            }
        } else if f_reflected < f_next_worst {
            self.replace_worst(reflected, f_reflected);
            Step::Reflect
        } else if f_reflected < worst.value {
            let contracted = along(c.reflection * c.contraction);
            let f_contracted = self.eval(f, &contracted);
            if f_contracted <= f_reflected {
                self.replace_worst(contracted, f_contracted);
                Step::ContractOutside
            } else {
                self.shrink(f, c.shrink);
                Step::Shrink
            }
        } else {
            let contracted = along(-c.contraction);
            let f_contracted = self.eval(f, &contracted);
            if f_contracted < worst.value {
                self.replace_worst(contracted, f_contracted);
                Step::ContractInside
            } else {
                self.shrink(f, c.shrink);
                Step::Shrink
            }
        };

        self.iterations += 1;
        self.best_history.push(self.best_value());
        step
    }

    fn shrink<F: Fn(&[f64]) -> f64>(&mut self, f: &F, sigma: f64) {
        let best = self.vertices[0].point.clone();
        let mut moved = Vec::with_capacity(self.vertices.len() - 1);
        for v in &self.vertices[1..] {
            let p: Vec<f64> = best
                .iter()
                .zip(&v.point)
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            moved.push(p);
        }
        self.vertices.truncate(1);
        for p in moved {
            let value = self.eval(f, &p);
            self.push(p, value);
        }
        self.sort();
    }
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite objective values met during the run
/// count as `+inf`; a non-finite value at `x0` is an error.
pub fn minimize<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    opts.validate()?;
    let mut state = SimplexState::new(&f, x0, opts.initial_step)?;
    let mut converged = state.converged(opts);
    while !converged && state.iterations() < opts.max_iterations {
        state.iterate(&f, &opts.coefficients);
        converged = state.converged(opts);
    }
    Ok(Minimum {
        point: state.best_point().to_vec(),
        value: state.best_value(),
        iterations: state.iterations(),
        evaluations: state.evaluations(),
        converged,
    })
}

/// Penalty coefficients used in successive warm-started rounds.
pub const PENALTY_SCHEDULE: [f64; 3] = [1e2, 1e4, 1e6];

/// Extra warm restarts at the last penalty coefficient while the hard
/// constraints are still violated by more than [`RESIDUAL_TOLERANCE`].
pub const MAX_FINAL_RESTARTS: usize = 5;
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

type Objective<'a> = Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>;

/// Lagrange-multiplier estimates for the hard constraints of a
/// [`PenalizedProblem`]. All zero gives the plain quadratic penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub sum: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(n: usize) -> Self {
        Multipliers {
            sum: 0.0,
            lower: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }
}

/// Shifted quadratic penalty for `g <= 0` with multiplier `nu`; reduces to
/// `mu * max(0, g)^2` when `nu == 0`.
fn inequality_term(g: f64, nu: f64, mu: f64) -> f64 {
    if nu + 2.0 * mu * g > 0.0 {
        nu * g + mu * g * g
    } else {
        -nu * nu / (4.0 * mu)
    }
}

/// A base objective with box bounds, a sum-equality target and optional
/// extra inequality terms, all handled by quadratic exterior penalties.
pub struct PenalizedProblem<'a> {
    pub base: Objective<'a>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Required value of `sum(x)`.
    pub sum_target: f64,
    pub mu: f64,
    /// Each term returns a violation `v` (zero when satisfied); adds `mu * v^2`.
    pub extra: Vec<Objective<'a>>,
    pub multipliers: Multipliers,
}

impl<'a> PenalizedProblem<'a> {
    pub fn new<F>(base: F, lower: Vec<f64>, upper: Vec<f64>, sum_target: f64) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'a,
    {
        if lower.len() != upper.len() {
            return Err(Error::Invariant("bounds have different lengths".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::Invariant(format!(
                "lower bound {} exceeds upper bound {} at coordinate {i}",
                lower[i], upper[i]
            )));
        }
        let n = lower.len();
        Ok(PenalizedProblem {
            base: Box::new(base),
            lower,
            upper,
            sum_target,
            mu: PENALTY_SCHEDULE[0],
            extra: Vec::new(),
            multipliers: Multipliers::zeros(n),
        })
    }

    pub fn with_extra<F>(mut self, term: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'a,
    {
        self.extra.push(Box::new(term));
        self
    }

    fn penalty_with(&self, mu: f64, mult: &Multipliers, x: &[f64]) -> f64 {
        let h = x.iter().sum::<f64>() - self.sum_target;
        let mut total = mult.sum * h + mu * h * h;
        for i in 0..x.len() {
            total += inequality_term(self.lower[i] - x[i], mult.lower[i], mu);
            total += inequality_term(x[i] - self.upper[i], mult.upper[i], mu);
        }
        for term in &self.extra {
            total += mu * term(x).max(0.0).powi(2);
        }
        total
    }

    /// Total penalty (without the base objective) at coefficient `mu`, using
    /// the problem's current multipliers.
    pub fn penalty(&self, mu: f64, x: &[f64]) -> f64 {
        self.penalty_with(mu, &self.multipliers, x)
    }

    pub fn objective_at(&self, mu: f64, x: &[f64]) -> f64 {
        (self.base)(x) + self.penalty(mu, x)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.objective_at(self.mu, x)
    }

    /// Largest hard-constraint violation at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst = (x.iter().sum::<f64>() - self.sum_target).abs();
        for i in 0..x.len() {
            worst = worst.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        worst
    }

    /// First-order multiplier update after minimizing at `mu`.
    fn update_multipliers(&self, mu: f64, mult: &mut Multipliers, x: &[f64]) {
        mult.sum += 2.0 * mu * (x.iter().sum::<f64>() - self.sum_target);
        for i in 0..x.len() {
            mult.lower[i] = (mult.lower[i] + 2.0 * mu * (self.lower[i] - x[i])).max(0.0);
            mult.upper[i] = (mult.upper[i] + 2.0 * mu * (x[i] - self.upper[i])).max(0.0);
        }
    }

    /// Runs [`minimize`] once per entry of `schedule`, each round starting
    /// from the previous round's minimizer, then restarts at the last
    /// coefficient (at most [`MAX_FINAL_RESTARTS`] times) until the hard
    /// constraints hold. Between rounds the hard-constraint multipliers are
    /// re-estimated from the residuals, which removes the `O(1/mu)` offset a
    /// pure penalty leaves on active constraints. Extra terms stay plain
    /// penalties.
    pub fn solve(&self, x0: &[f64], opts: &SimplexOptions, schedule: &[f64]) -> Result<Minimum> {
        if schedule.is_empty() || schedule.iter().any(|&mu| !(mu > 0.0)) {
            return Err(Error::Invariant("penalty schedule must be nonempty and positive".into()));
        }
        let mut mult = self.multipliers.clone();
        let mut start = x0.to_vec();
        let mut iterations = 0;
        let mut evaluations = 0;
        let mut last: Option<Minimum> = None;
        let final_mu = schedule[schedule.len() - 1];
        let restarts = std::iter::repeat(final_mu).take(MAX_FINAL_RESTARTS);
        for (round_no, mu) in schedule.iter().copied().chain(restarts).enumerate() {
            if round_no >= schedule.len() {
                let stalled = last.as_ref().is_some_and(|m| m.iterations == 0);
                if stalled || self.max_residual(&start) <= RESIDUAL_TOLERANCE {
                    break;
                }
            }
            let round = minimize(
                |x| (self.base)(x) + self.penalty_with(mu, &mult, x),
                &start,
                opts,
            )?;
            iterations += round.iterations;
            evaluations += round.evaluations;
            self.update_multipliers(mu, &mut mult, &round.point);
            start.clone_from(&round.point);
            last = Some(round);
        }
        let last = last.expect("nonempty schedule");
        Ok(Minimum {
            iterations,
            evaluations,
            ..last
        })
    }
}

/// The penalized objective `x -> base(x) + penalties(x)` at the problem's `mu`.
pub fn penalize<'p>(p: &'p PenalizedProblem<'_>) -> impl Fn(&[f64]) -> f64 + 'p {
    move |x| p.objective(x)
}

/// Solves `min sum(kappa_i / C_i + m_i * C_i)` subject to `sum(C) = c_max`
/// and `C >= lower` by bisecting the shared multiplier `lambda`:
/// `C_i = max(lower_i, sqrt(kappa_i / (m_i - lambda)))`.
pub fn water_fill(kappa: &[f64], m: &[f64], c_max: f64, lower: &[f64]) -> Result<Vec<f64>> {
    let n = kappa.len();
    if n == 0 || m.len() != n || lower.len() != n {
        return Err(Error::Invariant("water_fill needs equal, nonzero lengths".into()));
    }
    if kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::Domain("kappa must be positive".into()));
    }
    if m.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Domain("m must be nonnegative".into()));
    }
    let needed: f64 = lower.iter().sum();
    if !(c_max >= needed) {
        return Err(Error::InfeasiblePool {
            needed,
            available: c_max,
            deficit: needed - c_max,
        });
    }
    if c_max == needed {
        return Ok(lower.to_vec());
    }

    let shares = |lambda: f64| -> Vec<f64> {
        (0..n)
            .map(|i| lower[i].max((kappa[i] / (m[i] - lambda)).sqrt()))
            .collect()
    };
    let total = |lambda: f64| -> f64 { shares(lambda).iter().sum() };

    // total(lambda) rises from sum(lower) toward +inf as lambda -> min(m).
    let m_min = m.iter().copied().fold(f64::INFINITY, f64::min);
    let mut width = 1.0;
    let mut lo = m_min - width;
    while total(lo) > c_max {
        width *= 2.0;
        lo = m_min - width;
        if !lo.is_finite() {
            return Err(Error::Domain("water_fill multiplier search diverged".into()));
        }
    }
    let mut hi = m_min;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > c_max {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // Bisection leaves a tiny sum residual where the curve is steep; a single
    // Newton step on the free coordinates removes it.
    let mut c = shares(lo);
    let residual = c_max - c.iter().sum::<f64>();
    let slopes: Vec<f64> = (0..n)
        .map(|i| {
            if c[i] > lower[i] {
                0.5 * kappa[i].sqrt() * (m[i] - lo).powf(-1.5)
            } else {
                0.0
            }
        })
        .collect();
    let slope_sum: f64 = slopes.iter().sum();
    if slope_sum > 0.0 && slope_sum.is_finite() {
        for i in 0..n {
            c[i] += residual * slopes[i] / slope_sum;
        }
    }
    Ok(c)
}

/// `sum(kappa_i / C_i + m_i * C_i)`.
pub fn separable_objective(kappa: &[f64], m: &[f64], c: &[f64]) -> f64 {
    (0..c.len()).map(|i| kappa[i] / c[i] + m[i] * c[i]).sum()
}
