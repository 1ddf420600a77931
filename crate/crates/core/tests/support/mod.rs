//! Test-only generators and oracles shared with the acceptance suite.
#![allow(dead_code)]

use actgen_core::{EpaVector, ImpressionModel, Role, StateVector9, TermSpec, EPA_LIMIT};
use rand::Rng;

/// Random equation set with coefficients in [-1, 1] where every term has at
/// most one behavior factor: intercept, all linear terms, and a random set of
/// two- and three-way interactions.
pub fn random_admissible_model<R: Rng>(rng: &mut R) -> ImpressionModel<f64> {
    let mut terms = vec![TermSpec::intercept()];
    terms.extend((0..9).map(|i| TermSpec::new([i]).unwrap()));
    let identity_slots = [0usize, 1, 2, 6, 7, 8];
    let extra = rng.random_range(3..9);
    while terms.len() < 10 + extra {
        let order = if rng.random_bool(0.75) { 2 } else { 3 };
        let mut factors: Vec<usize> = Vec::new();
        if rng.random_bool(0.7) {
            factors.push(rng.random_range(3..6));
        }
        while factors.len() < order {
            let f = identity_slots[rng.random_range(0..identity_slots.len())];
            if !factors.contains(&f) {
                factors.push(f);
            }
        }
        factors.sort_unstable();
        let term = TermSpec::new(factors).unwrap();
        if !terms.contains(&term) {
            terms.push(term);
        }
    }
    let rows = (0..9)
        .map(|_| {
            (0..terms.len())
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect()
        })
        .collect();
    let model = ImpressionModel::new("random", terms, rows).unwrap();
    assert!(model.is_affine_in_behavior());
    model
}

pub fn random_epa<R: Rng>(rng: &mut R, bound: f64) -> EpaVector<f64> {
    EpaVector::new(
        rng.random_range(-bound..bound),
        rng.random_range(-bound..bound),
        rng.random_range(-bound..bound),
    )
}

pub fn random_transients<R: Rng>(rng: &mut R) -> StateVector9<f64> {
    StateVector9::from_parts(
        random_epa(rng, 3.0),
        EpaVector::zero(),
        random_epa(rng, 3.0),
        Role::Transient,
    )
}

/// Minimum of `f` over the 21^3 grid on [-4.3, 4.3]^3.
pub fn grid_minimum(f: impl Fn(EpaVector<f64>) -> f64) -> (f64, EpaVector<f64>) {
    let n = 21;
    let step = 2.0 * EPA_LIMIT / (n - 1) as f64;
    let mut best = (f64::INFINITY, EpaVector::zero());
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let b = EpaVector::new(
                    -EPA_LIMIT + step * i as f64,
                    -EPA_LIMIT + step * j as f64,
                    -EPA_LIMIT + step * k as f64,
                );
                let v = f(b);
                if v < best.0 {
                    best = (v, b);
                }
            }
        }
    }
    best
}

/// Central finite-difference gradient with step `h`.
pub fn fd_gradient(f: impl Fn(EpaVector<f64>) -> f64, at: EpaVector<f64>, h: f64) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (j, gj) in g.iter_mut().enumerate() {
        let mut plus = at;
        let mut minus = at;
        plus[j] += h;
        minus[j] -= h;
        *gj = (f(plus) - f(minus)) / (2.0 * h);
    }
    g
}

/// Deflection of the event computed directly from the definitions, without
/// the solver's objective type.
pub fn event_deflection(
    model: &ImpressionModel<f64>,
    actor_f: EpaVector<f64>,
    object_f: EpaVector<f64>,
    transients: &StateVector9<f64>,
    weights: &[f64; 9],
    b: EpaVector<f64>,
) -> f64 {
    let f = StateVector9::from_parts(actor_f, b, object_f, Role::Fundamental);
    let pre = transients.with_behavior(b);
    let mut d = 0.0;
    for i in 0..9 {
        let mut tau = 0.0;
        for (t, term) in model.terms().iter().enumerate() {
            let mut g = 1.0;
            for &j in term.factors() {
                g *= pre.values[j];
            }
            tau += model.coefficient(i, t) * g;
        }
        d += weights[i] * (f.values[i] - tau).powi(2);
    }
    d
}
