//! Finite differences on a square grid for two real dimensions, masked to
//! a sublevel set `{c < level}` with a no-flux closure.
//!
//! The no-flux condition is on `Q = e^{φ}P`. A ghost node `g` outside the
//! domain takes the value `P_g = e^{−φ(g)} Q(m)`, where `m` is the mirror
//! image of `g` across the boundary along the normal and `Q(m)` is a
//! biquadratic interpolant over a 3×3 block of interior nodes.

use std::collections::VecDeque;
use std::sync::Arc;

use faer::c64;
use serde::{Deserialize, Serialize};

use super::operator::{BasisDescriptor, DiscreteOperator, OperatorTag};
use super::potential::PotentialDescriptor;
use crate::error::{Error, Result};
use crate::params::{DomainKind, ModelParams};

type Constraint = dyn Fn(&[f64]) -> (f64, [f64; 2]) + Send + Sync;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridBoundary {
    /// Zero flux through ghost reflection.
    Neumann,
    /// `P = 0` at ghost nodes; the wrong closure, kept as a negative control.
    Dirichlet,
}

impl GridBoundary {
    pub fn as_str(self) -> &'static str {
        match self {
            GridBoundary::Neumann => "neumann",
            GridBoundary::Dirichlet => "dirichlet",
        }
    }
}

/// `{x : c(x) < level}` with `c` and `∇c`.
#[derive(Clone)]
pub struct GridDomain {
    constraint: Arc<Constraint>,
    pub level: f64,
    /// Radius of a disk containing the domain.
    pub radius: f64,
    pub name: String,
}

impl GridDomain {
    pub fn new(
        name: impl Into<String>,
        level: f64,
        radius: f64,
        c: impl Fn(&[f64]) -> (f64, [f64; 2]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            constraint: Arc::new(c),
            level,
            radius,
            name: name.into(),
        }
    }

    /// `{x₀² + x₁² < radius_sq}`.
    pub fn disk(radius_sq: f64) -> Self {
        Self::new("disk", radius_sq, radius_sq.sqrt(), |x| {
            (x[0] * x[0] + x[1] * x[1], [2.0 * x[0], 2.0 * x[1]])
        })
    }

    /// `{φ < level}`, with `radius` bounding the component around 0.
    pub fn sublevel(pot: &PotentialDescriptor, level: f64, radius: f64) -> Self {
        let p = pot.clone();
        Self::new(format!("phi < {level}"), level, radius, move |x| {
            let g = p.grad(x);
            (p.value(x), [g[0], g[1]])
        })
    }

    /// The configured domain of a `d = 1`, `N = 0` model.
    pub fn from_params(params: &ModelParams, pot: &PotentialDescriptor) -> Result<Self> {
        if pot.dim != 2 {
            return Err(Error::InvalidParams("grid discretisation needs two real dimensions".into()));
        }
        match params.domain {
            DomainKind::L2Ball => Ok(Self::disk(params.ball)),
            DomainKind::HamiltonianBall => {
                let radius = match &pot.radial {
                    Some(r) => {
                        let s = bisect(|s| (r.f)(s) - params.ball, 0.0, 5.0 * params.ball)?;
                        s.sqrt()
                    }
                    None => (5.0 * params.ball).sqrt(),
                };
                Ok(Self::sublevel(pot, params.ball, radius))
            }
            DomainKind::WholeSpace => Err(Error::InvalidParams(
                "a grid needs a bounded domain; use the Hermite basis on the whole space".into(),
            )),
        }
    }

    pub fn eval(&self, x: &[f64]) -> (f64, [f64; 2]) {
        (self.constraint)(x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.eval(x).0 < self.level
    }

    /// Newton projection of `x` onto `{c = level}` along `∇c`.
    pub fn project(&self, x: [f64; 2]) -> [f64; 2] {
        let mut p = x;
        for _ in 0..50 {
            let (c, g) = self.eval(&p);
            let gg = g[0] * g[0] + g[1] * g[1];
            if gg == 0.0 {
                break;
            }
            let t = (c - self.level) / gg;
            p = [p[0] - t * g[0], p[1] - t * g[1]];
            if (t * gg.sqrt()).abs() < 1e-15 * (1.0 + self.radius) {
                break;
            }
        }
        p
    }
}

/// Root of a sign-changing `f` on `[a, b]`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Result<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidParams("no boundary crossing in the search interval".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < 1e-15 * (1.0 + m.abs()) {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Masked grid with `x = (i h, j h)`, `|i|, |j| ≤ half`.
pub struct FpGrid {
    pot: PotentialDescriptor,
    pub domain: GridDomain,
    pub nu: f64,
    pub h: f64,
    half: i64,
    /// Box index → unknown index.
    unknown: Vec<Option<usize>>,
    /// Unknown index → box index.
    nodes: Vec<usize>,
}

impl FpGrid {
    /// `cells` grid spacings per domain radius.
    pub fn new(pot: &PotentialDescriptor, domain: GridDomain, nu: f64, cells: usize) -> Result<Self> {
        if pot.dim != 2 {
            return Err(Error::InvalidParams("grid discretisation needs two real dimensions".into()));
        }
        if cells < 4 {
            return Err(Error::InvalidParams("grid needs at least 4 cells per radius".into()));
        }
        let h = domain.radius / cells as f64;
        let half = cells as i64 + 4;
        let side = (2 * half + 1) as usize;
        let mut g = Self {
            pot: pot.clone(),
            domain,
            nu,
            h,
            half,
            unknown: vec![None; side * side],
            nodes: Vec::new(),
        };
        for b in 0..side * side {
            if g.domain.contains(&g.coords(b)) {
                g.unknown[b] = Some(g.nodes.len());
                g.nodes.push(b);
            }
        }
        if g.nodes.is_empty() {
            return Err(Error::DisconnectedDomain("mask contains no grid nodes".into()));
        }
        for &b in &g.nodes {
            let (i, j) = g.ij(b);
            if i.abs() >= half - 1 || j.abs() >= half - 1 {
                return Err(Error::InvalidParams("domain exceeds the bounding box".into()));
            }
        }
        g.check_connected()?;
        Ok(g)
    }

    fn side(&self) -> i64 {
        2 * self.half + 1
    }

    fn ij(&self, b: usize) -> (i64, i64) {
        let s = self.side();
        (b as i64 / s - self.half, b as i64 % s - self.half)
    }

    fn box_index(&self, i: i64, j: i64) -> Option<usize> {
        if i.abs() > self.half || j.abs() > self.half {
            None
        } else {
            Some(((i + self.half) * self.side() + (j + self.half)) as usize)
        }
    }

    fn coords(&self, b: usize) -> [f64; 2] {
        let (i, j) = self.ij(b);
        [i as f64 * self.h, j as f64 * self.h]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Coordinates of unknown `k`.
    pub fn node(&self, k: usize) -> [f64; 2] {
        self.coords(self.nodes[k])
    }

    fn unknown_at(&self, i: i64, j: i64) -> Option<usize> {
        self.box_index(i, j).and_then(|b| self.unknown[b])
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            let (i, j) = self.ij(self.nodes[k]);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(n) = self.unknown_at(i + di, j + dj) {
                    if !seen[n] {
                        seen[n] = true;
                        count += 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        if count != self.nodes.len() {
            return Err(Error::DisconnectedDomain(format!(
                "{} of {} masked nodes are unreachable",
                self.nodes.len() - count,
                self.nodes.len()
            )));
        }
        Ok(())
    }

    /// Unknowns whose `(2·depth+1)²` neighbourhood lies in the domain.
    pub fn deep_interior(&self, depth: i64) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&k| {
                let (i, j) = self.ij(self.nodes[k]);
                (-depth..=depth).all(|a| (-depth..=depth).all(|b| self.unknown_at(i + a, j + b).is_some()))
            })
            .collect()
    }

    /// `P_g = Σ w_k P_k` over unknowns for a ghost at box position `(i, j)`.
    fn ghost_rule(&self, i: i64, j: i64, boundary: GridBoundary) -> Vec<(usize, f64)> {
        if boundary == GridBoundary::Dirichlet {
            return Vec::new();
        }
        let h = self.h;
        let g = [i as f64 * h, j as f64 * h];
        let xb = self.domain.project(g);
        let m = [2.0 * xb[0] - g[0], 2.0 * xb[1] - g[1]];
        let nearest = ((m[0] / h).round() as i64, (m[1] / h).round() as i64);
        // Centres within two nodes of the mirror point, closest first.
        let mut candidates: Vec<(i64, i64)> = (-2..=2)
            .flat_map(|a| (-2..=2).map(move |b| (nearest.0 + a, nearest.1 + b)))
            .collect();
        candidates.sort_by(|a, b| {
            let da = dist2([a.0 as f64 * h, a.1 as f64 * h], m);
            let db = dist2([b.0 as f64 * h, b.1 as f64 * h], m);
            da.partial_cmp(&db).unwrap()
        });
        let scale = (-self.pot.value(&g)).exp();
        for (ci, cj) in candidates {
            let block: Option<Vec<usize>> = (-1..=1)
                .flat_map(|a| (-1..=1).map(move |b| (a, b)))
                .map(|(a, b)| self.unknown_at(ci + a, cj + b))
                .collect();
            let Some(block) = block else { continue };
            let tx = m[0] / h - ci as f64;
            let ty = m[1] / h - cj as f64;
            let lag = |t: f64| [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)];
            let (lx, ly) = (lag(tx), lag(ty));
            let mut out = Vec::with_capacity(9);
            for a in 0..3 {
                for b in 0..3 {
                    let k = block[a * 3 + b];
                    let w = lx[a] * ly[b] * scale * self.pot.value(&self.node(k)).exp();
                    out.push((k, w));
                }
            }
            return out;
        }
        // No interior 3×3 block nearby: constant extrapolation from the
        // closest unknown.
        let k = (0..self.nodes.len())
            .min_by(|&a, &b| {
                let da = dist2(self.node(a), m);
                let db = dist2(self.node(b), m);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        vec![(k, scale * self.pot.value(&self.node(k)).exp())]
    }

    /// Largest error of the ghost closure on a smooth `q` with
    /// `∂_n q = 0` on the boundary: `max |Σ w_k P_k − e^{−φ(g)} q(g)|` over all
    /// ghosts, with `P = e^{−φ} q` at the unknowns. Also returns how many
    /// ghosts fell back to constant extrapolation.
    pub fn ghost_defect(&self, q: &dyn Fn(&[f64]) -> f64) -> (f64, usize) {
        let mut worst = 0.0f64;
        let mut fallbacks = 0;
        for k in 0..self.len() {
            let (i, j) = self.ij(self.nodes[k]);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if self.unknown_at(i + di, j + dj).is_some() {
                    continue;
                }
                let rule = self.ghost_rule(i + di, j + dj, GridBoundary::Neumann);
                if rule.len() == 1 {
                    fallbacks += 1;
                }
                let g = [(i + di) as f64 * self.h, (j + dj) as f64 * self.h];
                let approx: f64 = rule
                    .iter()
                    .map(|&(n, w)| {
                        let x = self.node(n);
                        w * (-self.pot.value(&x)).exp() * q(&x)
                    })
                    .sum();
                let exact = (-self.pot.value(&g)).exp() * q(&g);
                worst = worst.max((approx - exact).abs());
            }
        }
        (worst, fallbacks)
    }

    /// `L` assembled from the pointwise formula: 5-point Laplacian, the
    /// potential `|∇φ|² − Δφ`, and the skew-symmetric transport stencil
    /// `±(b_e(x_i) + b_e(x_{i±e}))/(4h)`.
    pub fn operator(&self, boundary: GridBoundary) -> Result<DiscreteOperator> {
        let h = self.h;
        let d = 0.25 * self.nu;
        let mut entries: Vec<(usize, usize, c64)> = Vec::with_capacity(self.len() * 9);
        for k in 0..self.len() {
            let x = self.node(k);
            let (i, j) = self.ij(self.nodes[k]);
            let bx = self.pot.transport(&x);
            let diag = d * (4.0 / (h * h) + self.pot.witten_potential(&x));
            entries.push((k, k, c64::new(diag, 0.0)));
            for (axis, di, dj, sign) in [(0, 1, 0, 1.0), (0, -1, 0, -1.0), (1, 0, 1, 1.0), (1, 0, -1, -1.0)] {
                let xn = [(i + di) as f64 * h, (j + dj) as f64 * h];
                let bn = self.pot.transport(&xn);
                let coef = -d / (h * h) + sign * (bx[axis] + bn[axis]) / (4.0 * h);
                match self.unknown_at(i + di, j + dj) {
                    Some(n) => entries.push((k, n, c64::new(coef, 0.0))),
                    None => {
                        for (n, w) in self.ghost_rule(i + di, j + dj, boundary) {
                            entries.push((k, n, c64::new(coef * w, 0.0)));
                        }
                    }
                }
            }
        }
        let basis = BasisDescriptor::Grid {
            spacing: h,
            half_width: self.half as f64 * h,
            nodes: self.len(),
            boundary: boundary.as_str().to_string(),
        };
        let mut op = DiscreteOperator::from_triplets(OperatorTag::L, basis, self.len(), &entries)?;
        op.friction = self.nu;
        op.params = self.pot.params.clone();
        op.potential = self.pot.name.clone();
        op.ground_state = Some(self.ground_state().into_iter().map(|v| c64::new(v, 0.0)).collect());
        Ok(op)
    }

    /// `f` at the unknowns.
    pub fn sample(&self, f: &dyn Fn(&[f64]) -> f64) -> Vec<c64> {
        (0..self.len()).map(|k| c64::new(f(&self.node(k)), 0.0)).collect()
    }

    /// `e^{−φ}` at the unknowns, unit Euclidean norm.
    pub fn ground_state(&self) -> Vec<f64> {
        let v: Vec<f64> = (0..self.len()).map(|k| (-self.pot.value(&self.node(k))).exp()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    /// `‖L_h g‖ / ‖g‖` for `g = e^{−φ}` sampled at the unknowns.
    pub fn ground_state_residual(&self, boundary: GridBoundary) -> Result<f64> {
        let op = self.operator(boundary)?;
        let g: Vec<c64> = self.ground_state().into_iter().map(|v| c64::new(v, 0.0)).collect();
        let r = op.apply(&g);
        Ok(r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
    }

    /// Direct stencil applied to a smooth `u` sampled at the neighbours
    /// themselves (no closure), at unknowns `ks`.
    pub fn apply_direct_smooth(&self, u: &dyn Fn(&[f64]) -> f64, ks: &[usize]) -> Vec<f64> {
        let h = self.h;
        let d = 0.25 * self.nu;
        ks.iter()
            .map(|&k| {
                let x = self.node(k);
                let bx = self.pot.transport(&x);
                let mut acc = d * (4.0 / (h * h) + self.pot.witten_potential(&x)) * u(&x);
                for (axis, dx, dy, sign) in [(0, h, 0.0, 1.0), (0, -h, 0.0, -1.0), (1, 0.0, h, 1.0), (1, 0.0, -h, -1.0)] {
                    let xn = [x[0] + dx, x[1] + dy];
                    let bn = self.pot.transport(&xn);
                    acc += (-d / (h * h) + sign * (bx[axis] + bn[axis]) / (4.0 * h)) * u(&xn);
                }
                acc
            })
            .collect()
    }

    /// Centred `z_j u` at `x`.
    fn z_at(&self, j: usize, u: &dyn Fn(&[f64]) -> f64, x: [f64; 2], star: bool) -> f64 {
        let h = self.h;
        let mut xp = x;
        let mut xm = x;
        xp[j] += h;
        xm[j] -= h;
        let dj = (u(&xp) - u(&xm)) / (2.0 * h);
        let gj = self.pot.grad(&x)[j];
        if star {
            -dj + gj * u(&x)
        } else {
            dj + gj * u(&x)
        }
    }

    /// `Σ_{jk} Ã_jk z_j^* z_k u` with centred differences, at unknowns `ks`.
    pub fn apply_composed_smooth(&self, u: &dyn Fn(&[f64]) -> f64, ks: &[usize]) -> Vec<f64> {
        let a = self.pot.deformation(self.nu);
        ks.iter()
            .map(|&k| {
                let x = self.node(k);
                let mut acc = 0.0;
                for j in 0..2 {
                    for kk in 0..2 {
                        let c = a[j * 2 + kk];
                        if c != 0.0 {
                            let inner = |y: &[f64]| self.z_at(kk, u, [y[0], y[1]], false);
                            acc += c * self.z_at(j, &inner, x, true);
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// `max |([z_i, z_j^*] − 2∂_i∂_jφ) u|` over unknowns `ks`.
    pub fn commutator_defect(&self, i: usize, j: usize, u: &dyn Fn(&[f64]) -> f64, ks: &[usize]) -> f64 {
        ks.iter()
            .map(|&k| {
                let x = self.node(k);
                let zsj = |y: &[f64]| self.z_at(j, u, [y[0], y[1]], true);
                let zi = |y: &[f64]| self.z_at(i, u, [y[0], y[1]], false);
                let lhs = self.z_at(i, &zsj, x, false) - self.z_at(j, &zi, x, true);
                let hess = self.pot.hess(&x)[i * 2 + j];
                (lhs - 2.0 * hess * u(&x)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |(z_0 z_1 − z_1 z_0) u|` over unknowns `ks`: `d_φ d_φ` on 0-forms.
    pub fn nilpotency_defect(&self, u: &dyn Fn(&[f64]) -> f64, ks: &[usize]) -> f64 {
        ks.iter()
            .map(|&k| {
                let x = self.node(k);
                let z1 = |y: &[f64]| self.z_at(1, u, [y[0], y[1]], false);
                let z0 = |y: &[f64]| self.z_at(0, u, [y[0], y[1]], false);
                (self.z_at(0, &z1, x, false) - self.z_at(1, &z0, x, false)).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn focusing() -> (ModelParams, PotentialDescriptor) {
        let p = ModelParams::default();
        let pot = PotentialDescriptor::from_model(&p).unwrap();
        (p, pot)
    }

    #[test]
    fn ham_ball_radius_solves_phi_equals_b() {
        let (p, pot) = focusing();
        let d = GridDomain::from_params(&p, &pot).unwrap();
        assert!((pot.value(&[d.radius, 0.0]) - 1.0).abs() < 1e-12);
        assert!((d.radius - 1.01308).abs() < 1e-4);
    }

    #[test]
    fn constant_function_gives_witten_potential() {
        let pot = PotentialDescriptor::cubic_quadratic([0.05, -0.02, 0.03, 0.01]).unwrap();
        let g = FpGrid::new(&pot, GridDomain::disk(1.0), 0.7, 12).unwrap();
        let ks = g.deep_interior(1);
        let out = g.apply_direct_smooth(&|_| 1.0, &ks);
        for (&k, v) in ks.iter().zip(out) {
            let expect = 0.25 * 0.7 * pot.witten_potential(&g.node(k));
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn disconnected_mask_is_rejected() {
        let pot = PotentialDescriptor::harmonic(0.5, 2, true).unwrap();
        let two_disks = GridDomain::new("two disks", 0.0, 2.0, |x| {
            let a = (x[0] - 1.2).powi(2) + x[1] * x[1] - 0.25;
            let b = (x[0] + 1.2).powi(2) + x[1] * x[1] - 0.25;
            if a < b {
                (a, [2.0 * (x[0] - 1.2), 2.0 * x[1]])
            } else {
                (b, [2.0 * (x[0] + 1.2), 2.0 * x[1]])
            }
        });
        assert!(matches!(FpGrid::new(&pot, two_disks, 1.0, 10), Err(Error::DisconnectedDomain(_))));
    }

    #[test]
    fn neumann_ground_state_residual_is_small_and_dirichlet_is_not() {
        let (p, pot) = focusing();
        let d = GridDomain::from_params(&p, &pot).unwrap();
        let g = FpGrid::new(&pot, d, 1.0, 16).unwrap();
        let n = g.ground_state_residual(GridBoundary::Neumann).unwrap();
        let dr = g.ground_state_residual(GridBoundary::Dirichlet).unwrap();
        assert!(n < 1e-2, "{n}");
        assert!(dr > 100.0 * n, "{dr} vs {n}");
    }
}
