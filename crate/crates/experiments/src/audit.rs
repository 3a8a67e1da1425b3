//! Consistency of the simulated SDE with its Gibbs density: the
//! Fokker–Planck operator assembled from the implemented drift and noise,
//! applied by finite differences to `e^{−2φ}`, must vanish as `h → 0`,
//! and so must the normal probability flux on the domain boundary.

use anyhow::Result;
use num_complex::Complex;
use serde::Serialize;
use snls_core::langevin::{drift, SdeConfig};
use snls_core::spectral::checks::RefinementStudy;
use snls_core::spectral::grid::GridDomain;
use snls_core::spectral::potential::PotentialDescriptor;
use snls_core::{DomainKind, FieldState64, Hamiltonian64, ModelParams};

use crate::output::Assertion;

/// Spacings of the refinement study.
pub const SPACINGS: [f64; 3] = [0.1, 0.05, 0.025];
const BOUNDARY_POINTS: usize = 64;
/// Half-width of the sampling box on the whole space.
const BOX: f64 = 2.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditCase {
    pub name: String,
    /// `ρ ∝ e^{−β φ}`.
    pub beta: f64,
    pub interior: RefinementStudy,
    pub boundary: Option<RefinementStudy>,
    pub converges: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub diffusion: f64,
    pub cases: Vec<AuditCase>,
    pub pass: bool,
}

struct Generator {
    ham: Hamiltonian64,
    pot: PotentialDescriptor,
    diffusion: f64,
    beta: f64,
}

impl Generator {
    fn rho(&self, x: &[f64]) -> f64 {
        (-self.beta * self.pot.value(x)).exp()
    }

    fn drift(&self, x: &[f64]) -> [f64; 2] {
        let s = FieldState64::from_coeffs(vec![Complex::new(x[0], x[1])]);
        let f = drift(&self.ham, &s).expect("finite state");
        [f[0].re, f[0].im]
    }

    /// `−∇·(Fρ) + D Δρ` by centred differences.
    fn residual(&self, x: &[f64], h: f64) -> (f64, f64) {
        let flux = |y: [f64; 2], k: usize| self.drift(&y)[k] * self.rho(&y);
        let p = |dx: f64, dy: f64| [x[0] + dx, x[1] + dy];
        let div = (flux(p(h, 0.0), 0) - flux(p(-h, 0.0), 0) + flux(p(0.0, h), 1) - flux(p(0.0, -h), 1)) / (2.0 * h);
        let r = |y: [f64; 2]| self.rho(&y);
        let lap = (r(p(h, 0.0)) + r(p(-h, 0.0)) + r(p(0.0, h)) + r(p(0.0, -h)) - 4.0 * r(p(0.0, 0.0))) / (h * h);
        let scale = div.abs().max(self.diffusion * lap.abs());
        (-div + self.diffusion * lap, scale)
    }

    /// `(Fρ − D∇ρ)·n` with `∇ρ` by centred differences, and its scale.
    fn normal_flux(&self, x: &[f64], n: [f64; 2], h: f64) -> (f64, f64) {
        let f = self.drift(x);
        let r = self.rho(x);
        let gx = (self.rho(&[x[0] + h, x[1]]) - self.rho(&[x[0] - h, x[1]])) / (2.0 * h);
        let gy = (self.rho(&[x[0], x[1] + h]) - self.rho(&[x[0], x[1] - h])) / (2.0 * h);
        let j = [f[0] * r - self.diffusion * gx, f[1] * r - self.diffusion * gy];
        (j[0] * n[0] + j[1] * n[1], (f[0] * r).hypot(f[1] * r))
    }
}

fn case(model: &ModelParams, beta: f64, name: &str) -> Result<AuditCase> {
    let ham = Hamiltonian64::new(model)?;
    let pot = PotentialDescriptor::from_model(model)?;
    let sde = SdeConfig::default();
    let sigma = sde.noise_sigma(model.friction);
    let gen = Generator {
        ham,
        pot: pot.clone(),
        diffusion: sigma * sigma / (2.0 * sde.dt),
        beta,
    };
    let domain = match model.domain {
        DomainKind::WholeSpace => None,
        _ => Some(GridDomain::from_params(model, &pot)?),
    };
    let reach = domain.as_ref().map(|d| d.radius).unwrap_or(BOX);
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for &h in &SPACINGS {
        let m = (reach / h).ceil() as i64;
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for i in -m..=m {
            for j in -m..=m {
                let x = [i as f64 * h, j as f64 * h];
                if domain.as_ref().is_some_and(|d| !d.contains(&x)) || x[0].abs() > reach || x[1].abs() > reach {
                    continue;
                }
                let (r, s) = gen.residual(&x, h);
                worst = worst.max(r.abs());
                scale = scale.max(s);
            }
        }
        interior.push(worst / scale);
        if let Some(d) = &domain {
            let (mut worst, mut scale) = (0.0f64, 0.0f64);
            for k in 0..BOUNDARY_POINTS {
                let th = 2.0 * std::f64::consts::PI * k as f64 / BOUNDARY_POINTS as f64;
                let x = d.project([d.radius * th.cos(), d.radius * th.sin()]);
                let (_, g) = d.eval(&x);
                let gn = g[0].hypot(g[1]);
                let (f, s) = gen.normal_flux(&x, [g[0] / gn, g[1] / gn], h);
                worst = worst.max(f.abs());
                scale = scale.max(s);
            }
            boundary.push(worst / scale);
        }
    }
    let interior = RefinementStudy::new(SPACINGS.to_vec(), interior);
    let boundary = domain.map(|_| RefinementStudy::new(SPACINGS.to_vec(), boundary));
    let converges = interior.converges(1.8) && boundary.as_ref().is_none_or(|b| b.converges(1.8));
    Ok(AuditCase {
        name: name.into(),
        beta,
        interior,
        boundary,
        converges,
    })
}

/// Free field on a box and the focusing `N = 0` model on its Hamiltonian
/// ball, each with `e^{−2φ}` and the `e^{−φ}` control.
pub fn convention_audit() -> Result<AuditReport> {
    let free = ModelParams::free_field(1, 0, 1.0);
    let focusing = ModelParams::default();
    let mut cases = Vec::new();
    for (m, label) in [(&free, "free_field"), (&focusing, "focusing_hamiltonian_ball")] {
        cases.push(case(m, 2.0, label)?);
        cases.push(case(m, 1.0, &format!("{label}_wrong_beta"))?);
    }
    let sde = SdeConfig::default();
    let sigma = sde.noise_sigma(1.0);
    let pass = cases.iter().all(|c| c.converges == (c.beta == 2.0));
    Ok(AuditReport {
        diffusion: sigma * sigma / (2.0 * sde.dt),
        cases,
        pass,
    })
}

impl AuditReport {
    pub fn assertions(&self) -> Vec<Assertion> {
        self.cases
            .iter()
            .map(|c| {
                let order = c
                    .boundary
                    .as_ref()
                    .map_or(c.interior.order, |b| b.order.min(c.interior.order));
                let finest = *c.interior.errors.last().unwrap();
                if c.beta == 2.0 {
                    Assertion::at_least(format!("stationarity_order_{}", c.name), order, 1.8)
                        .with_detail(format!("finest residual {finest:.3e}"))
                } else {
                    Assertion::holds(format!("control_rejected_{}", c.name), !c.converges)
                        .with_detail(format!("order {order:.2}, finest residual {finest:.3e}"))
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gibbs_density_is_stationary_and_control_is_not() {
        let r = convention_audit().unwrap();
        for c in &r.cases {
            assert_eq!(c.converges, c.beta == 2.0, "{c:?}");
        }
        assert!((r.diffusion - 0.25).abs() < 1e-12);
    }
}
