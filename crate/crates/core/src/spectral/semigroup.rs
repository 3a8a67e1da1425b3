//! Deterministic evolution `∂_t u = −L u` of a discretised density.
//!
//! Four backward-Euler half steps damp the non-smooth start, then
//! Crank–Nicolson. Both use the single factorisation of `L + (2/dt) I`.

use faer::prelude::*;
use faer::{c64, Mat};
use serde::Serialize;

use super::operator::{DiscreteOperator, Matrix};
use crate::error::{Error, Result};
use crate::langevin::{RateEstimate, RateMethod};
use crate::stats;

/// Dense factorisation below this size.
const DENSE_LIMIT: usize = 1500;
const MAX_RETRIES: usize = 4;

type Solver = Box<dyn Fn(&[c64]) -> Vec<c64>>;

fn factor(op: &DiscreteOperator, sigma: f64) -> Result<Solver> {
    let n = op.nrows();
    let dense = matches!(op.matrix, Matrix::Dense(_) | Matrix::DenseComplex(_)) || n <= DENSE_LIMIT;
    if dense {
        let mut a = op.to_dense_complex();
        for i in 0..n {
            a[(i, i)] += c64::new(sigma, 0.0);
        }
        let lu = a.partial_piv_lu();
        Ok(Box::new(move |x: &[c64]| {
            let b = Mat::from_fn(n, 1, |i, _| x[i]);
            let y = lu.solve(&b);
            (0..n).map(|i| y[(i, 0)]).collect()
        }))
    } else {
        let lu = op
            .shifted_sparse(c64::new(-sigma, 0.0))?
            .sp_lu()
            .map_err(|e| Error::Solver(format!("sparse LU failed: {e:?}")))?;
        Ok(Box::new(move |x: &[c64]| {
            let b = Mat::from_fn(n, 1, |i, _| x[i]);
            let y = lu.solve(&b);
            (0..n).map(|i| y[(i, 0)]).collect()
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemigroupRun {
    pub dt: f64,
    pub times: Vec<f64>,
    /// `‖u(t) − ⟨g, u₀⟩ g‖` with `g` the unit ground state.
    pub deviations: Vec<f64>,
    /// The step was halved after a non-finite or growing solution.
    pub retried: bool,
}

fn norm(v: &[c64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn run_once(op: &DiscreteOperator, g: &[c64], u0: &[c64], dt: f64, t_end: f64, every: usize) -> Result<Option<SemigroupRun>> {
    let sigma = 2.0 / dt;
    let solve = factor(op, sigma)?;
    let c: c64 = g.iter().zip(u0).map(|(a, b)| a.conj() * b).sum();
    let dev = |u: &[c64]| -> f64 { u.iter().zip(g).map(|(x, y)| (x - c * y).norm_sqr()).sum::<f64>().sqrt() };
    let d0 = dev(u0);
    let mut u = u0.to_vec();
    let mut times = vec![0.0];
    let mut deviations = vec![d0];
    let steps = (t_end / dt).ceil() as usize;
    let mut t = 0.0;
    let ok = |d: f64| d.is_finite() && d <= 1e6 * d0.max(f64::MIN_POSITIVE);
    // Rannacher start: four half steps spanning 2 dt.
    for _ in 0..4 {
        let rhs: Vec<c64> = u.iter().map(|x| x * sigma).collect();
        u = solve(&rhs);
    }
    t += 2.0 * dt;
    for step in 2..=steps {
        if step > 2 {
            let rhs: Vec<c64> = u.iter().map(|x| x * (2.0 * sigma)).collect();
            let w = solve(&rhs);
            for (ui, wi) in u.iter_mut().zip(w) {
                *ui = wi - *ui;
            }
            t += dt;
        }
        if step % every == 0 || step == 2 {
            let d = dev(&u);
            if !ok(d) {
                return Ok(None);
            }
            times.push(t);
            deviations.push(d);
        }
    }
    Ok(Some(SemigroupRun {
        dt,
        times,
        deviations,
        retried: false,
    }))
}

/// Evolves `u₀` to `t_end`, recording the deviation from equilibrium every
/// `every` steps.
pub fn evolve(op: &DiscreteOperator, u0: &[c64], dt: f64, t_end: f64, every: usize) -> Result<SemigroupRun> {
    let g = op
        .ground_state
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("operator carries no ground-state vector".into()))?;
    if u0.len() != op.nrows() {
        return Err(Error::InvalidParams(format!(
            "initial vector has length {}, operator has {} rows",
            u0.len(),
            op.nrows()
        )));
    }
    if !(dt > 0.0) || !(t_end > 2.0 * dt) {
        return Err(Error::InvalidParams("need dt > 0 and t_end > 2 dt".into()));
    }
    let gn = norm(g);
    let g: Vec<c64> = g.iter().map(|x| x / gn).collect();
    let mut h = dt;
    for attempt in 0..=MAX_RETRIES {
        if let Some(mut run) = run_once(op, &g, u0, h, t_end, every.max(1))? {
            run.retried = attempt > 0;
            return Ok(run);
        }
        h *= 0.5;
    }
    Err(Error::Solver("semigroup blew up after repeated step halving".into()))
}

/// Decay rate of the deviation over the times where it lies between
/// `upper` and `lower` times its initial value; the interval is the spread
/// of slopes over four sub-windows.
pub fn fit_rate(run: &SemigroupRun, upper: f64, lower: f64) -> RateEstimate {
    let d0 = run.deviations[0];
    let (x, y): (Vec<f64>, Vec<f64>) = run
        .times
        .iter()
        .zip(&run.deviations)
        .filter(|(_, d)| **d <= upper * d0 && **d >= lower * d0 && **d > 0.0)
        .map(|(t, d)| (*t, d.ln()))
        .unzip();
    let window = x.len();
    let rate = if window >= 2 { -stats::linear_fit(&x, &y).0 } else { f64::NAN };
    let blocks: Vec<f64> = if window >= 8 {
        x.chunks(window / 4)
            .zip(y.chunks(window / 4))
            .filter(|(a, _)| a.len() >= 2)
            .map(|(a, b)| -stats::linear_fit(a, b).0)
            .collect()
    } else {
        Vec::new()
    };
    let (lo, hi) = if blocks.is_empty() {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let lo = blocks.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = blocks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo.min(rate), hi.max(rate))
    };
    RateEstimate {
        rate,
        ci_low: lo,
        ci_high: hi,
        method: RateMethod::SemigroupFit,
        observable: "density_deviation".into(),
        window_points: window,
        usable: window >= 3 && rate.is_finite() && rate > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::operator::{BasisDescriptor, OperatorTag};

    #[test]
    fn diagonal_decay_rate() {
        let e = [
            (0, 0, c64::new(0.0, 0.0)),
            (1, 1, c64::new(1.5, 2.0)),
            (2, 2, c64::new(4.0, 0.0)),
        ];
        let mut op =
            DiscreteOperator::from_triplets(OperatorTag::Other, BasisDescriptor::Plain { size: 3 }, 3, &e).unwrap();
        op.ground_state = Some(vec![c64::new(1.0, 0.0), c64::new(0.0, 0.0), c64::new(0.0, 0.0)]);
        let u0 = [c64::new(1.0, 0.0), c64::new(1.0, 0.0), c64::new(1.0, 0.0)];
        let run = evolve(&op, &u0, 0.01, 12.0, 5).unwrap();
        assert!(!run.retried);
        let r = fit_rate(&run, 1e-2, 1e-7);
        assert!((r.rate - 1.5).abs() < 1e-3, "{r:?}");
    }
}
