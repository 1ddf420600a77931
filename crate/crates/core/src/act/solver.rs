//! Deflection-minimizing behavior.
//!
//! With the behavior EPA `b` as the only unknown, the fundamental state holds
//! `b` in its behavior slots and so does the pre-event state. When every
//! equation term has at most one behavior factor the residual
//! `f(b) - tau'(b)` is affine, `r + K b`, and the weighted deflection is a
//! quadratic whose minimizer solves the 3x3 normal equations
//! `(K^T W K) b = -K^T W r`. Other models go through a grid-seeded damped
//! Newton iteration on the exact gradient and Hessian.

use super::deflection::{deflection, DeflectionWeights};
use super::model::ImpressionModel;
use super::ActError;
use crate::epa::{EpaVector, Role, StateVector9, EPA_LIMIT};
use crate::Scalar;

pub const MAX_NEWTON_ITERATIONS: usize = 500;
const NEWTON_STEP_TOL: f64 = 1e-8;
const SEED_GRID_POINTS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    ClosedForm,
    Iterative { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalBehavior<T> {
    pub behavior: EpaVector<T>,
    pub deflection: T,
    pub method: SolveMethod,
}

/// Deflection as a function of the behavior EPA for a fixed actor and object.
#[derive(Debug, Clone)]
pub struct BehaviorObjective<'a, T> {
    model: &'a ImpressionModel<T>,
    weights: &'a DeflectionWeights<T>,
    /// Fundamentals with zeroed behavior slots.
    fundamentals: StateVector9<T>,
    /// Pre-event identity transients with zeroed behavior slots.
    pre_state: StateVector9<T>,
}

type Mat3<T> = [[T; 3]; 3];

impl<'a, T: Scalar> BehaviorObjective<'a, T> {
    pub fn new(
        model: &'a ImpressionModel<T>,
        actor_f: EpaVector<T>,
        object_f: EpaVector<T>,
        current_transients: &StateVector9<T>,
        weights: &'a DeflectionWeights<T>,
    ) -> Self {
        let zero = EpaVector::zero();
        Self {
            model,
            weights,
            fundamentals: StateVector9::from_parts(actor_f, zero, object_f, Role::Fundamental),
            pre_state: current_transients.with_behavior(zero),
        }
    }

    pub fn fundamentals(&self, b: EpaVector<T>) -> StateVector9<T> {
        self.fundamentals.with_behavior(b)
    }

    pub fn pre_state(&self, b: EpaVector<T>) -> StateVector9<T> {
        let mut s = self.pre_state.with_behavior(b);
        s.role = Role::Transient;
        s
    }

    pub fn transients(&self, b: EpaVector<T>) -> StateVector9<T> {
        self.model.form_impression(&self.pre_state(b))
    }

    pub fn deflection(&self, b: EpaVector<T>) -> T {
        deflection(&self.fundamentals(b), &self.transients(b), self.weights)
    }

    /// `(r, K)` with `f(b) - tau'(b) = r + K b`, or `None` if the model is
    /// not affine in the behavior.
    pub fn affine_residual(&self) -> Option<([T; 9], [[T; 3]; 9])> {
        if !self.model.is_affine_in_behavior() {
            return None;
        }
        let state = &self.pre_state.values;
        let t = self.model.term_count();
        // g(b) = g0 + H b
        let mut g0 = vec![T::zero(); t];
        let mut h = vec![[T::zero(); 3]; t];
        for (k, term) in self.model.terms().iter().enumerate() {
            let mut constant = T::one();
            let mut slot = None;
            for &j in term.factors() {
                if (3..6).contains(&j) {
                    slot = Some(j - 3);
                } else {
                    constant = constant * state[j];
                }
            }
            match slot {
                Some(j) => h[k][j] = constant,
                None => g0[k] = constant,
            }
        }
        let mut r = [T::zero(); 9];
        let mut kmat = [[T::zero(); 3]; 9];
        for i in 0..9 {
            let row = self.model.row(i);
            let mut tau0 = T::zero();
            let mut mh = [T::zero(); 3];
            for k in 0..t {
                tau0 = tau0 + row[k] * g0[k];
                for j in 0..3 {
                    mh[j] = mh[j] + row[k] * h[k][j];
                }
            }
            r[i] = self.fundamentals[i] - tau0;
            for j in 0..3 {
                let e = if i == 3 + j { T::one() } else { T::zero() };
                kmat[i][j] = e - mh[j];
            }
        }
        Some((r, kmat))
    }

    /// Exact gradient and Hessian of the deflection with respect to `b`.
    pub fn gradient_hessian(&self, b: EpaVector<T>) -> ([T; 3], Mat3<T>) {
        let pre = self.pre_state(b).values;
        let f = self.fundamentals(b);
        let tau = self.model.form_impression(&self.pre_state(b));
        let w = self.weights.as_array();
        let t = self.model.term_count();

        // Derivatives of each feature w.r.t. the three behavior slots.
        let mut dg = vec![[T::zero(); 3]; t];
        let mut ddg = vec![[[T::zero(); 3]; 3]; t];
        for (k, term) in self.model.terms().iter().enumerate() {
            let factors = term.factors();
            for &j in factors.iter().filter(|j| (3..6).contains(*j)) {
                let others = factors
                    .iter()
                    .filter(|&&l| l != j)
                    .fold(T::one(), |acc, &l| acc * pre[l]);
                dg[k][j - 3] = others;
                for &m in factors.iter().filter(|&&m| m != j && (3..6).contains(&m)) {
                    let rest = factors
                        .iter()
                        .filter(|&&l| l != j && l != m)
                        .fold(T::one(), |acc, &l| acc * pre[l]);
                    ddg[k][j - 3][m - 3] = rest;
                }
            }
        }

        let two = T::lit(2.0);
        let mut grad = [T::zero(); 3];
        let mut hess = [[T::zero(); 3]; 3];
        for i in 0..9 {
            let row = self.model.row(i);
            let e = f[i] - tau[i];
            let mut de = [T::zero(); 3];
            let mut dde = [[T::zero(); 3]; 3];
            for k in 0..t {
                for j in 0..3 {
                    de[j] = de[j] - row[k] * dg[k][j];
                    for m in 0..3 {
                        dde[j][m] = dde[j][m] - row[k] * ddg[k][j][m];
                    }
                }
            }
            if (3..6).contains(&i) {
                de[i - 3] = de[i - 3] + T::one();
            }
            for j in 0..3 {
                grad[j] = grad[j] + two * w[i] * e * de[j];
                for m in 0..3 {
                    hess[j][m] = hess[j][m] + two * w[i] * (de[j] * de[m] + e * dde[j][m]);
                }
            }
        }
        (grad, hess)
    }
}

/// Cholesky solve of a symmetric 3x3 system; `None` unless clearly positive definite.
pub(crate) fn cholesky_solve3<T: Scalar>(a: &Mat3<T>, rhs: [T; 3]) -> Option<[T; 3]> {
    let scale = (0..3).map(|i| a[i][i].abs()).fold(T::zero(), T::max);
    if !(scale > T::zero()) || !scale.is_finite() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::lit(1e3);
    let mut l = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > tiny) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [T::zero(); 3];
    for i in 0..3 {
        let mut s = rhs[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [T::zero(); 3];
    for i in (0..3).rev() {
        let mut s = y[i];
        for k in i + 1..3 {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

fn closed_form<T: Scalar>(obj: &BehaviorObjective<'_, T>) -> Option<EpaVector<T>> {
    let (r, k) = obj.affine_residual()?;
    let w = obj.weights.as_array();
    let mut a = [[T::zero(); 3]; 3];
    let mut rhs = [T::zero(); 3];
    for i in 0..9 {
        for j in 0..3 {
            rhs[j] = rhs[j] - k[i][j] * w[i] * r[i];
            for m in 0..3 {
                a[j][m] = a[j][m] + k[i][j] * w[i] * k[i][m];
            }
        }
    }
    cholesky_solve3(&a, rhs).map(EpaVector::from_array)
}

fn grid_seed<T: Scalar>(obj: &BehaviorObjective<'_, T>) -> EpaVector<T> {
    let n = SEED_GRID_POINTS;
    let lo = -EPA_LIMIT;
    let step = 2.0 * EPA_LIMIT / (n - 1) as f64;
    let mut best = (T::infinity(), EpaVector::zero());
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let b = EpaVector::from_f64([
                    lo + step * i as f64,
                    lo + step * j as f64,
                    lo + step * k as f64,
                ]);
                let d = obj.deflection(b);
                if d < best.0 {
                    best = (d, b);
                }
            }
        }
    }
    best.1
}

fn damped_newton<T: Scalar>(
    obj: &BehaviorObjective<'_, T>,
    start: EpaVector<T>,
) -> Result<(EpaVector<T>, usize), ActError> {
    let mut b = start;
    let mut value = obj.deflection(b);
    let mut damping = T::lit(1e-6);
    let base_tol = T::lit(NEWTON_STEP_TOL);
    for iteration in 1..=MAX_NEWTON_ITERATIONS {
        let (grad, hess) = obj.gradient_hessian(b);
        let tol = base_tol.max(T::epsilon() * T::lit(10.0) * (T::one() + b.norm()));
        let neg_grad = grad.map(|g| -g);

        let mut step = None;
        for _ in 0..40 {
            let mut damped = hess;
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] = row[i] + damping;
            }
            if let Some(s) = cholesky_solve3(&damped, neg_grad) {
                step = Some(EpaVector::from_array(s));
                break;
            }
            damping = damping * T::lit(10.0);
        }
        let Some(step) = step else {
            return Err(ActError::Solver(format!(
                "Hessian could not be regularized at iteration {iteration}"
            )));
        };
        if step.norm() < tol {
            return Ok((b, iteration));
        }

        // Backtracking line search on the Armijo condition.
        let slope = EpaVector::from_array(grad).dot(step);
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = b + step * t;
            let v = obj.deflection(candidate);
            if v <= value + T::lit(1e-4) * t * slope {
                let moved = (step * t).norm();
                b = candidate;
                value = v;
                accepted = true;
                if moved < tol {
                    return Ok((b, iteration));
                }
                break;
            }
            t = t * T::lit(0.5);
        }
        if accepted {
            damping = (damping * T::lit(0.1)).max(T::lit(1e-12));
        } else {
            damping = damping * T::lit(10.0);
        }
    }
    Err(ActError::Solver(format!(
        "no convergence within {MAX_NEWTON_ITERATIONS} iterations"
    )))
}

/// Behavior EPA that minimizes the deflection of the event
/// `(actor, b, object)` given the identities' current transients.
///
/// The behavior slots of `current_transients` are ignored. The returned EPA is
/// the unconstrained minimizer and may fall outside the rating range.
pub fn optimal_behavior<T: Scalar>(
    model: &ImpressionModel<T>,
    actor_f: EpaVector<T>,
    object_f: EpaVector<T>,
    current_transients: &StateVector9<T>,
    weights: &DeflectionWeights<T>,
) -> Result<OptimalBehavior<T>, ActError> {
    let obj = BehaviorObjective::new(model, actor_f, object_f, current_transients, weights);
    let (behavior, method) = match closed_form(&obj) {
        Some(b) if b.is_finite() => (b, SolveMethod::ClosedForm),
        _ => {
            let (b, iterations) = damped_newton(&obj, grid_seed(&obj))?;
            (b, SolveMethod::Iterative { iterations })
        }
    };
    Ok(OptimalBehavior {
        behavior,
        deflection: obj.deflection(behavior),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::act::model::TermSpec;

    fn random_state(seed: u64) -> StateVector9<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = [0.0; 9];
        for x in &mut v {
            *x = rng.random_range(-3.0..3.0);
        }
        StateVector9::new(v, Role::Transient)
    }

    #[test]
    fn inert_behavior_rows_give_zero() {
        // Only identity slots feed identity outputs; behavior rows are zero.
        let terms: Vec<_> = (0..9).map(|i| TermSpec::new([i]).unwrap()).collect();
        let rows = (0..9)
            .map(|r| {
                (0..9)
                    .map(|c| {
                        if r == c && !(3..6).contains(&r) {
                            0.8
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let model = ImpressionModel::<f64>::new("inert", terms, rows).unwrap();
        let s = random_state(3);
        let out = optimal_behavior(
            &model,
            s.actor(),
            s.object(),
            &s,
            &DeflectionWeights::ones(),
        )
        .unwrap();
        assert_eq!(out.method, SolveMethod::ClosedForm);
        assert!(out.behavior.norm() < 1e-12);
    }

    #[test]
    fn identity_model_takes_fallback_with_zero_deflection() {
        let model = ImpressionModel::<f64>::identity();
        let s = random_state(4);
        let out = optimal_behavior(
            &model,
            s.actor(),
            s.object(),
            &s,
            &DeflectionWeights::ones(),
        )
        .unwrap();
        assert!(matches!(out.method, SolveMethod::Iterative { .. }));
        assert!(out.deflection.abs() < 1e-12);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        // Includes a non-affine term (Be*Bp) to exercise second derivatives.
        let terms = vec![
            TermSpec::intercept(),
            TermSpec::new([0]).unwrap(),
            TermSpec::new([3]).unwrap(),
            TermSpec::new([4]).unwrap(),
            TermSpec::new([5]).unwrap(),
            TermSpec::new([0, 3]).unwrap(),
            TermSpec::new([3, 4]).unwrap(),
            TermSpec::new([4, 5, 6]).unwrap(),
        ];
        let rows = (0..9)
            .map(|r| {
                (0..terms.len())
                    .map(|c| ((r * 7 + c * 3) % 11) as f64 / 11.0 - 0.5)
                    .collect()
            })
            .collect();
        let model = ImpressionModel::<f64>::new("mixed", terms, rows).unwrap();
        let s = random_state(11);
        let w = DeflectionWeights::ones();
        let obj = BehaviorObjective::new(&model, s.actor(), s.object(), &s, &w);
        let b = EpaVector::new(0.3, -0.7, 1.1);
        let (g, h) = obj.gradient_hessian(b);
        let eps = 1e-5;
        for j in 0..3 {
            let mut bp = b;
            let mut bm = b;
            bp[j] += eps;
            bm[j] -= eps;
            let fd = (obj.deflection(bp) - obj.deflection(bm)) / (2.0 * eps);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + g[j].abs()), "grad {j}");
            let (gp, _) = obj.gradient_hessian(bp);
            let (gm, _) = obj.gradient_hessian(bm);
            for m in 0..3 {
                let fdh = (gp[m] - gm[m]) / (2.0 * eps);
                assert!(
                    (fdh - h[m][j]).abs() < 1e-5 * (1.0 + h[m][j].abs()),
                    "hess {m}{j}"
                );
            }
        }
        let out = optimal_behavior(&model, s.actor(), s.object(), &s, &w).unwrap();
        assert!(matches!(out.method, SolveMethod::Iterative { .. }));
        let (g, _) = obj.gradient_hessian(out.behavior);
        assert!(g.iter().all(|x| x.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(cholesky_solve3(&a, [1.0, 1.0, 1.0]).is_none());
        let a = [[4.0, 2.0, 0.0], [2.0, 3.0, 0.5], [0.0, 0.5, 2.0]];
        let x = cholesky_solve3(&a, [1.0, 2.0, 3.0]).unwrap();
        for i in 0..3 {
            let lhs: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((lhs - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }
}
