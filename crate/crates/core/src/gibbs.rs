//! Random-walk Metropolis sampler of `μ ∝ e^{−2φ}` on the configured
//! domain. Proposals outside the domain are rejected, which restricts the
//! measure exactly.

use std::io::Write;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::hamiltonian::Hamiltonian;
use crate::io::fmt_f64;
use crate::observables::Observable;
use crate::scalar::Real;
use crate::stats::{self, BatchMeans};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    /// Base step; mode `n` uses `proposal_scale / √(|n|²+1)`.
    pub proposal_scale: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub rng_seed: u64,
    pub chains: usize,
    /// Acceptance rate the burn-in adaptation steers toward.
    pub target_acceptance: f64,
    pub batches: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            proposal_scale: 0.3,
            n_steps: 200_000,
            burn_in: 20_000,
            thinning: 1,
            rng_seed: 0,
            chains: 4,
            target_acceptance: 0.4,
            batches: 40,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.proposal_scale.is_finite() && self.proposal_scale > 0.0) {
            return Err(Error::InvalidConfig("proposal_scale must be > 0".into()));
        }
        if self.thinning == 0 || self.chains == 0 {
            return Err(Error::InvalidConfig("thinning and chains must be >= 1".into()));
        }
        if !(0.3..=0.5).contains(&self.target_acceptance) {
            return Err(Error::InvalidConfig("target_acceptance must be in [0.3, 0.5]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub observable: String,
    pub mean: f64,
    pub se: f64,
    pub ess: f64,
    pub n_samples: usize,
    pub low_confidence: bool,
}

impl MomentReport {
    pub fn from_batch(observable: String, b: BatchMeans) -> Self {
        Self {
            observable,
            mean: b.mean,
            se: b.se,
            ess: b.ess,
            n_samples: b.n,
            low_confidence: b.ess < 100.0,
        }
    }

    /// `|a − b| / √(se_a² + se_b²)`.
    pub fn z_score(&self, other: &MomentReport) -> f64 {
        let se = (self.se * self.se + other.se * other.se).sqrt();
        let d = (self.mean - other.mean).abs();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

pub fn write_moments_csv<W: Write>(reports: &[MomentReport], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["observable", "mean", "se", "ess"])?;
    for r in reports {
        wr.write_record([r.observable.clone(), fmt_f64(r.mean), fmt_f64(r.se), fmt_f64(r.ess)])?;
    }
    wr.flush()?;
    Ok(())
}

/// Chain state: the field, its `φ`, and the per-mode proposal widths.
pub struct Chain<T: Real> {
    pub state: FieldState<T>,
    pub phi: T,
    pub scale: f64,
    pub accepted: usize,
    pub proposed: usize,
}

impl<T: Real> Chain<T> {
    pub fn new(ham: &Hamiltonian<T>, state: FieldState<T>, scale: f64) -> Result<Self> {
        let phi = ham.reduced_hamiltonian(&state)?;
        Ok(Self {
            state,
            phi,
            scale,
            accepted: 0,
            proposed: 0,
        })
    }
}

/// One global random-walk update. Returns whether it was accepted.
pub fn metropolis_step<T: Real, R: Rng>(ham: &Hamiltonian<T>, chain: &mut Chain<T>, rng: &mut R) -> bool {
    let prop: Vec<Complex<T>> = chain
        .state
        .coeffs
        .iter()
        .zip(ham.weights())
        .map(|(&a, &w)| {
            let s = chain.scale / w.as_f64().sqrt();
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            a + Complex::new(T::lit(x * s), T::lit(y * s))
        })
        .collect();
    // Uniform drawn before the domain test so the stream does not depend on it.
    let u: f64 = rng.random();
    chain.proposed += 1;
    let phi = ham.reduced_hamiltonian_unchecked(&prop);
    if !phi.is_finite() || !ham.in_domain_with_phi(&prop, phi).inside {
        return false;
    }
    let d = (phi - chain.phi).as_f64();
    if d <= 0.0 || u < (-2.0 * d).exp() {
        chain.state = FieldState::from_coeffs(prop);
        chain.phi = phi;
        chain.accepted += 1;
        true
    } else {
        false
    }
}

fn run_chain<T: Real>(
    ham: &Hamiltonian<T>,
    cfg: &McmcConfig,
    observables: &[Observable],
    index: u64,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(index);
    let mut chain = Chain::new(ham, ham.zero_state(), cfg.proposal_scale)?;
    let window = 200;
    for i in 0..cfg.burn_in {
        metropolis_step(ham, &mut chain, &mut rng);
        if (i + 1) % window == 0 {
            let acc = chain.accepted as f64 / chain.proposed as f64;
            chain.scale *= ((acc - cfg.target_acceptance) * 2.0).exp();
            chain.accepted = 0;
            chain.proposed = 0;
        }
    }
    chain.accepted = 0;
    chain.proposed = 0;
    let kept = cfg.n_steps / cfg.thinning;
    let mut series = vec![Vec::with_capacity(kept); observables.len()];
    for i in 0..cfg.n_steps {
        metropolis_step(ham, &mut chain, &mut rng);
        if (i + 1) % cfg.thinning == 0 {
            for (s, o) in series.iter_mut().zip(observables) {
                s.push(o.eval(ham, &chain.state.coeffs));
            }
        }
    }
    let acc = chain.accepted as f64 / chain.proposed.max(1) as f64;
    Ok((series, acc))
}

/// Expectations with batch-means errors, merged across parallel chains.
pub fn sample_expectations<T: Real>(
    ham: &Hamiltonian<T>,
    cfg: &McmcConfig,
    observables: &[Observable],
) -> Result<Vec<MomentReport>> {
    Ok(sample_expectations_with_acceptance(ham, cfg, observables)?.0)
}

/// As [`sample_expectations`], also returning the mean post-burn-in
/// acceptance rate.
pub fn sample_expectations_with_acceptance<T: Real>(
    ham: &Hamiltonian<T>,
    cfg: &McmcConfig,
    observables: &[Observable],
) -> Result<(Vec<MomentReport>, f64)> {
    cfg.validate()?;
    let chains: Vec<(Vec<Vec<f64>>, f64)> = (0..cfg.chains as u64)
        .into_par_iter()
        .map(|i| run_chain(ham, cfg, observables, i))
        .collect::<Result<_>>()?;
    let acc = chains.iter().map(|c| c.1).sum::<f64>() / chains.len() as f64;
    let reports = observables
        .iter()
        .enumerate()
        .map(|(j, o)| {
            let parts: Vec<BatchMeans> = chains
                .iter()
                .map(|(s, _)| stats::batch_means(&s[j], cfg.batches))
                .collect();
            MomentReport::from_batch(o.to_string(), stats::combine(&parts))
        })
        .collect();
    Ok((reports, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{DomainKind, ModelParams};

    #[test]
    fn downhill_inside_is_accepted_and_outside_rejected() {
        let p = ModelParams {
            domain: DomainKind::L2Ball,
            ball: 1.0,
            coupling: 0.0,
            ..ModelParams::free_field(1, 0, 1.0)
        };
        let h = Hamiltonian::<f64>::new(&p).unwrap();
        let start = FieldState::from_coeffs(vec![Complex::new(0.9, 0.0)]);
        // Huge proposals from near the edge: every accepted move must stay inside.
        let mut chain = Chain::new(&h, start.clone(), 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let before = chain.state.clone();
            let acc = metropolis_step(&h, &mut chain, &mut rng);
            assert!(h.in_domain(&chain.state).unwrap().inside);
            if !acc {
                assert_eq!(chain.state, before);
            }
        }
        // Tiny proposals that lower φ are always accepted.
        let mut chain = Chain::new(&h, start, 1e-9).unwrap();
        let mut accepted_down = 0;
        let mut downs = 0;
        for _ in 0..200 {
            let phi0 = chain.phi;
            let acc = metropolis_step(&h, &mut chain, &mut rng);
            if chain.phi < phi0 {
                downs += 1;
                accepted_down += acc as usize;
            }
        }
        assert_eq!(downs, accepted_down);
    }

    #[test]
    fn constant_observable() {
        let h = Hamiltonian::<f64>::new(&ModelParams::free_field(1, 1, 1.0)).unwrap();
        let cfg = McmcConfig {
            n_steps: 2000,
            burn_in: 200,
            chains: 2,
            ..Default::default()
        };
        let r = sample_expectations(&h, &cfg, &[Observable::One]).unwrap();
        assert_eq!(r[0].mean, 1.0);
        assert_eq!(r[0].se, 0.0);
    }

    #[test]
    fn csv_has_header() {
        let r = vec![MomentReport {
            observable: "phi".into(),
            mean: 1.0,
            se: 0.1,
            ess: 10.0,
            n_samples: 10,
            low_confidence: true,
        }];
        let mut out = Vec::new();
        write_moments_csv(&r, &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("observable,mean,se,ess\n"));
    }
}
