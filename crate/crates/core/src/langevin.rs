//! Euler–Maruyama integration of `da = −(ν + i) ∂φ/∂ā dt + noise` with
//! reflection at the domain boundary, plus rate estimation.

use std::io::Write;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::hamiltonian::Hamiltonian;
use crate::io::{fmt_f64, to_json_line};
use crate::observables::Observable;
use crate::params::DomainKind;
use crate::scalar::Real;
use crate::stats;

pub const TRAJECTORY_SCHEMA: &str = "snls.trajectory/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionScheme {
    Specular,
    Reject,
}

/// Noise normalisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    /// Variance `(ν/2) dt` per real component; stationary law `∝ e^{−2φ}`.
    Gibbs,
    /// Variance `ν dt` per real component; stationary law `∝ e^{−φ}`.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Record every `record_stride` steps.
    pub record_stride: usize,
    pub rng_seed: u64,
    /// RNG stream; ensembles assign one per trajectory.
    pub stream: u64,
    pub reflection: ReflectionScheme,
    /// Time excluded from stationary statistics.
    pub burn_in: f64,
    pub noise: NoiseConvention,
    /// Multiplies the noise amplitude; 0 gives the deterministic flow.
    pub noise_scale: f64,
    /// Modes whose real and imaginary parts are recorded.
    pub tracked_modes: Vec<usize>,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 10.0,
            record_stride: 10,
            rng_seed: 0,
            stream: 0,
            reflection: ReflectionScheme::Specular,
            burn_in: 1.0,
            noise: NoiseConvention::Gibbs,
            noise_scale: 1.0,
            tracked_modes: Vec::new(),
        }
    }
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::InvalidConfig(format!("t_max = {} must be >= 0", self.t_max)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be >= 1".into()));
        }
        if !(self.burn_in >= 0.0 && (self.burn_in < self.t_max || self.t_max == 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "burn_in = {} must satisfy 0 <= burn_in < t_max = {}",
                self.burn_in, self.t_max
            )));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(Error::InvalidConfig("noise_scale must be >= 0".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    /// Standard deviation of each real noise component per step.
    pub fn noise_sigma(&self, friction: f64) -> f64 {
        let var = match self.noise {
            NoiseConvention::Gibbs => 0.5 * friction * self.dt,
            NoiseConvention::Literal => friction * self.dt,
        };
        self.noise_scale * var.sqrt()
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReflectOutcome {
    Reflected,
    Rejected,
    /// Specular reflection failed and the step was rejected instead.
    Fallback,
}

/// `−(ν + i) ∂φ/∂ā`.
pub fn drift<T: Real>(ham: &Hamiltonian<T>, state: &FieldState<T>) -> Result<Vec<Complex<T>>> {
    let g = ham.gradient(state)?;
    Ok(drift_from_gradient(ham, &g))
}

fn drift_from_gradient<T: Real>(ham: &Hamiltonian<T>, g: &[Complex<T>]) -> Vec<Complex<T>> {
    let f = Complex::new(T::lit(-ham.params().friction), -T::one());
    g.iter().map(|&x| x * f).collect()
}

/// Returns the state on the segment where the margin changes sign and the
/// segment parameter, by Illinois regula falsi.
fn locate_crossing<T: Real>(
    ham: &Hamiltonian<T>,
    a_in: &[Complex<T>],
    a_out: &[Complex<T>],
) -> Option<(Vec<Complex<T>>, f64)> {
    let point = |s: f64| -> Vec<Complex<T>> {
        let st = T::lit(s);
        a_in.iter()
            .zip(a_out)
            .map(|(&x, &y)| x + (y - x) * st)
            .collect()
    };
    let f = |s: f64| -> f64 { -ham.in_domain_unchecked(&point(s)).margin.as_f64() };
    let tol = 1e-10 * ham.params().ball.max(1.0);
    let (mut s0, mut s1) = (0.0, 1.0);
    let (mut f0, mut f1) = (f(s0), f(s1));
    if !(f0 < 0.0 && f1 >= 0.0) {
        return None;
    }
    let mut side = 0i32;
    for _ in 0..200 {
        let s = (s0 * f1 - s1 * f0) / (f1 - f0);
        let s = if s.is_finite() && s > s0 && s < s1 { s } else { 0.5 * (s0 + s1) };
        let fs = f(s);
        if fs.abs() <= tol || (s1 - s0) < 1e-15 {
            return Some((point(s), s));
        }
        if fs < 0.0 {
            s0 = s;
            f0 = fs;
            if side == -1 {
                f1 *= 0.5;
            }
            side = -1;
        } else {
            s1 = s;
            f1 = fs;
            if side == 1 {
                f0 *= 0.5;
            }
            side = 1;
        }
    }
    Some((point(s0), s0))
}

/// Maps an outside proposal back into the domain.
pub fn reflect_step<T: Real>(
    ham: &Hamiltonian<T>,
    state_in: &FieldState<T>,
    state_out: &FieldState<T>,
    scheme: ReflectionScheme,
) -> (FieldState<T>, ReflectOutcome) {
    if scheme == ReflectionScheme::Reject {
        return (state_in.clone(), ReflectOutcome::Rejected);
    }
    let Some((cross, _)) = locate_crossing(ham, &state_in.coeffs, &state_out.coeffs) else {
        return (state_in.clone(), ReflectOutcome::Fallback);
    };
    let Some((_, normal)) = ham.constraint_and_normal(&cross) else {
        return (state_out.clone(), ReflectOutcome::Reflected);
    };
    let nn = normal.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
    if !(nn > T::zero()) {
        return (state_in.clone(), ReflectOutcome::Fallback);
    }
    let eta: Vec<Complex<T>> = normal.iter().map(|&c| c / nn).collect();
    let rem: Vec<Complex<T>> = state_out
        .coeffs
        .iter()
        .zip(&cross)
        .map(|(&o, &c)| o - c)
        .collect();
    let dot: T = eta.iter().zip(&rem).map(|(e, r)| e.re * r.re + e.im * r.im).sum();
    let two = T::lit(2.0);
    let out: Vec<Complex<T>> = cross
        .iter()
        .zip(&rem)
        .zip(&eta)
        .map(|((&c, &r), &e)| c + r - e * (two * dot))
        .collect();
    if ham.in_domain_unchecked(&out).inside {
        (FieldState::from_coeffs(out), ReflectOutcome::Reflected)
    } else {
        (state_in.clone(), ReflectOutcome::Fallback)
    }
}

/// One step from `state`, with reflection if the proposal leaves the domain.
pub fn step_em<T: Real, R: Rng>(
    ham: &Hamiltonian<T>,
    state: &FieldState<T>,
    cfg: &SdeConfig,
    rng: &mut R,
) -> Result<(FieldState<T>, Option<ReflectOutcome>)> {
    state.check(ham.lattice())?;
    let (_, g) = ham.energy_and_gradient_unchecked(&state.coeffs);
    let mut stepper = Stepper::new(ham, cfg);
    let (next, _, _, ev) = stepper.advance(&state.coeffs, &g, rng, 0.0)?;
    Ok((FieldState::from_coeffs(next), ev))
}

struct Stepper<'a, T: Real> {
    ham: &'a Hamiltonian<T>,
    cfg: &'a SdeConfig,
    dt: T,
    sigma: T,
    lin: Complex<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(ham: &'a Hamiltonian<T>, cfg: &'a SdeConfig) -> Self {
        let nu = ham.params().friction;
        Self {
            ham,
            cfg,
            dt: T::lit(cfg.dt),
            sigma: T::lit(cfg.noise_sigma(nu)),
            lin: Complex::new(T::lit(-nu), -T::one()),
        }
    }

    /// Returns the new state with its `φ` and `∂φ/∂ā`.
    #[allow(clippy::type_complexity)]
    fn advance<R: Rng>(
        &mut self,
        a: &[Complex<T>],
        g: &[Complex<T>],
        rng: &mut R,
        t: f64,
    ) -> Result<(Vec<Complex<T>>, T, Vec<Complex<T>>, Option<ReflectOutcome>)> {
        let mut next: Vec<Complex<T>> = Vec::with_capacity(a.len());
        for (&ai, &gi) in a.iter().zip(g) {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let noise = Complex::new(T::lit(x), T::lit(y)) * self.sigma;
            next.push(ai + gi * self.lin * self.dt + noise);
        }
        if next.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::StepDiverged { t, dt: self.cfg.dt });
        }
        let (phi, g2) = self.ham.energy_and_gradient_unchecked(&next);
        if !phi.is_finite() {
            return Err(Error::StepDiverged { t, dt: self.cfg.dt });
        }
        if self.ham.params().domain == DomainKind::WholeSpace
            || self.ham.in_domain_with_phi(&next, phi).inside
        {
            return Ok((next, phi, g2, None));
        }
        let (s, ev) = reflect_step(
            self.ham,
            &FieldState::from_coeffs(a.to_vec()),
            &FieldState::from_coeffs(next),
            self.cfg.reflection,
        );
        let (phi, g3) = self.ham.energy_and_gradient_unchecked(&s.coeffs);
        Ok((s.coeffs, phi, g3, Some(ev)))
    }
}

/// Recorded observables of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord<T> {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub l2sq: Vec<f64>,
    /// `|a_n|²` per recorded time, lattice order.
    pub mode_power: Vec<Vec<f64>>,
    pub tracked_modes: Vec<usize>,
    /// `Re a_n`, `Im a_n` of the tracked modes per recorded time.
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    /// Step count with a specular reflection.
    pub reflections: usize,
    /// Step count where the proposal was rejected (scheme or fallback).
    pub rejections: usize,
    /// Fallbacks from specular to reject.
    pub fallbacks: usize,
    pub burn_in: f64,
    #[serde(skip)]
    pub final_state: FieldState<T>,
    #[serde(skip)]
    pub mode_labels: Vec<String>,
}

impl<T: Real> TrajectoryRecord<T> {
    /// Index of the first record at or after the burn-in.
    pub fn stationary_start(&self) -> usize {
        self.times.partition_point(|&t| t < self.burn_in)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Observable series over the whole record.
    pub fn series(&self, obs: &Observable) -> Result<Vec<f64>> {
        let tracked = |k: usize| {
            self.tracked_modes.iter().position(|&m| m == k).ok_or_else(|| {
                Error::InvalidConfig(format!("mode {k} was not tracked in this trajectory"))
            })
        };
        Ok(match *obs {
            Observable::One => vec![1.0; self.len()],
            Observable::Phi => self.phi.clone(),
            Observable::L2Sq => self.l2sq.clone(),
            Observable::ModePower(k) => self.mode_power.iter().map(|r| r[k]).collect(),
            Observable::ReMode(k) => {
                let j = tracked(k)?;
                self.re.iter().map(|r| r[j]).collect()
            }
        })
    }

    /// Complex series `a_k(t)` of a tracked mode.
    pub fn mode_series(&self, k: usize) -> Result<Vec<Complex<f64>>> {
        let j = self.tracked_modes.iter().position(|&m| m == k).ok_or_else(|| {
            Error::InvalidConfig(format!("mode {k} was not tracked in this trajectory"))
        })?;
        Ok(self
            .re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| Complex::new(r[j], i[j]))
            .collect())
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string(), "phi".to_string(), "l2sq".to_string()];
        h.extend(self.mode_labels.iter().map(|l| format!("pow_{l}")));
        for &k in &self.tracked_modes {
            h.push(format!("re_{}", self.mode_labels[k]));
            h.push(format!("im_{}", self.mode_labels[k]));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        for i in 0..self.len() {
            let mut row = vec![fmt_f64(self.times[i]), fmt_f64(self.phi[i]), fmt_f64(self.l2sq[i])];
            row.extend(self.mode_power[i].iter().map(|&v| fmt_f64(v)));
            for j in 0..self.tracked_modes.len() {
                row.push(fmt_f64(self.re[i][j]));
                row.push(fmt_f64(self.im[i][j]));
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// A schema header line, then one line per recorded time.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            schema: &'a str,
            modes: &'a [String],
            tracked_modes: &'a [usize],
            reflections: usize,
            rejections: usize,
            fallbacks: usize,
        }
        #[derive(Serialize)]
        struct Line<'a> {
            t: f64,
            phi: f64,
            l2sq: f64,
            mode_power: &'a [f64],
            re: &'a [f64],
            im: &'a [f64],
        }
        let h = Header {
            schema: TRAJECTORY_SCHEMA,
            modes: &self.mode_labels,
            tracked_modes: &self.tracked_modes,
            reflections: self.reflections,
            rejections: self.rejections,
            fallbacks: self.fallbacks,
        };
        writeln!(w, "{}", to_json_line(&h)?)?;
        for i in 0..self.len() {
            let l = Line {
                t: self.times[i],
                phi: self.phi[i],
                l2sq: self.l2sq[i],
                mode_power: &self.mode_power[i],
                re: &self.re[i],
                im: &self.im[i],
            };
            writeln!(w, "{}", to_json_line(&l)?)?;
        }
        Ok(())
    }
}

/// Integrates from `initial`; deterministic in `(params, cfg)`.
pub fn run_trajectory<T: Real>(
    ham: &Hamiltonian<T>,
    initial: &FieldState<T>,
    cfg: &SdeConfig,
) -> Result<TrajectoryRecord<T>> {
    cfg.validate()?;
    initial.check(ham.lattice())?;
    if !ham.in_domain_unchecked(&initial.coeffs).inside {
        return Err(Error::InvalidState("initial state is outside the domain".into()));
    }
    if let Some(&k) = cfg.tracked_modes.iter().find(|&&k| k >= ham.len()) {
        return Err(Error::InvalidConfig(format!("tracked mode {k} is off the lattice")));
    }
    let steps = cfg.steps();
    let n_rec = steps / cfg.record_stride + 1;
    let lat = ham.lattice();
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(n_rec),
        phi: Vec::with_capacity(n_rec),
        l2sq: Vec::with_capacity(n_rec),
        mode_power: Vec::with_capacity(n_rec),
        tracked_modes: cfg.tracked_modes.clone(),
        re: Vec::with_capacity(n_rec),
        im: Vec::with_capacity(n_rec),
        reflections: 0,
        rejections: 0,
        fallbacks: 0,
        burn_in: cfg.burn_in,
        final_state: initial.clone(),
        mode_labels: (0..lat.len()).map(|k| lat.label(k)).collect(),
    };
    let push = |rec: &mut TrajectoryRecord<T>, t: f64, a: &[Complex<T>], phi: T| {
        rec.times.push(t);
        rec.phi.push(phi.as_f64());
        rec.l2sq.push(a.iter().map(|c| c.norm_sqr()).sum::<T>().as_f64());
        rec.mode_power.push(a.iter().map(|c| c.norm_sqr().as_f64()).collect());
        rec.re.push(cfg.tracked_modes.iter().map(|&k| a[k].re.as_f64()).collect());
        rec.im.push(cfg.tracked_modes.iter().map(|&k| a[k].im.as_f64()).collect());
    };

    let mut rng = cfg.rng();
    let mut stepper = Stepper::new(ham, cfg);
    let mut a = initial.coeffs.clone();
    let (mut phi, mut g) = ham.energy_and_gradient_unchecked(&a);
    push(&mut rec, 0.0, &a, phi);
    for step in 1..=steps {
        let t = step as f64 * cfg.dt;
        let (na, nphi, ng, ev) = stepper.advance(&a, &g, &mut rng, t)?;
        match ev {
            Some(ReflectOutcome::Reflected) => rec.reflections += 1,
            Some(ReflectOutcome::Rejected) => rec.rejections += 1,
            Some(ReflectOutcome::Fallback) => {
                rec.rejections += 1;
                rec.fallbacks += 1;
            }
            None => {}
        }
        a = na;
        phi = nphi;
        g = ng;
        if step % cfg.record_stride == 0 {
            push(&mut rec, t, &a, phi);
        }
    }
    rec.final_state = FieldState::from_coeffs(a);
    Ok(rec)
}

/// Independent trajectories on streams `0..count` of the master seed.
pub fn run_ensemble<T: Real>(
    ham: &Hamiltonian<T>,
    initial: &FieldState<T>,
    cfg: &SdeConfig,
    count: usize,
) -> Result<Vec<TrajectoryRecord<T>>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let c = SdeConfig {
                stream: i as u64,
                ..cfg.clone()
            };
            run_trajectory(ham, initial, &c)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    /// Stationary autocorrelation, post burn-in.
    AutocorrelationFit,
    /// Ensemble-mean relaxation from a common initial state.
    RelaxationFit,
    /// Deterministic evolution of a density under the discretised operator.
    SemigroupFit,
}

/// What a rate is measured on.
#[derive(Clone, Debug, PartialEq)]
pub enum RateObservable {
    /// Complex mode `a_k`; correlations use `|E a_k(t) conj a_k(0)|`, whose
    /// decay is the real part of the mode's relaxation rate. Real
    /// projections such as `Re a_k` oscillate with the Hamiltonian rotation
    /// and share that envelope.
    Mode(usize),
    Scalar(Observable),
}

impl std::fmt::Display for RateObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateObservable::Mode(k) => write!(f, "mode_{k}"),
            RateObservable::Scalar(o) => write!(f, "{o}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: RateMethod,
    pub observable: String,
    /// Number of lags or times in the fit window.
    pub window_points: usize,
    pub usable: bool,
}

fn complex_series<T: Real>(r: &TrajectoryRecord<T>, obs: &RateObservable) -> Result<Vec<Complex<f64>>> {
    match obs {
        RateObservable::Mode(k) => r.mode_series(*k),
        RateObservable::Scalar(o) => Ok(r.series(o)?.into_iter().map(|v| Complex::new(v, 0.0)).collect()),
    }
}

/// `Σ_t x_{t+τ} conj(x_t)` for `τ < max_lag`, by zero-padded FFT.
fn raw_autocov(x: &[Complex<f64>], max_lag: usize) -> Vec<Complex<f64>> {
    let n = x.len();
    let size = crate::transform::smooth_size(2 * n);
    let mut planner = FftPlanner::new();
    let mut buf = vec![Complex::new(0.0, 0.0); size];
    buf[..n].copy_from_slice(x);
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf.truncate(max_lag.min(n));
    buf
}

/// `|C(τ)| / C(0)` pooled over segments.
fn normalised_acf(segments: &[Vec<Complex<f64>>], max_lag: usize) -> (Vec<f64>, usize) {
    let total: usize = segments.iter().map(|s| s.len()).sum();
    let all_mean = segments.iter().flatten().sum::<Complex<f64>>() / total as f64;
    let mut acc = vec![Complex::new(0.0, 0.0); max_lag];
    let mut counts = vec![0usize; max_lag];
    for s in segments {
        let centred: Vec<Complex<f64>> = s.iter().map(|&v| v - all_mean).collect();
        let c = raw_autocov(&centred, max_lag);
        for (tau, v) in c.iter().enumerate() {
            acc[tau] += v;
            counts[tau] += s.len() - tau;
        }
    }
    let c0 = acc[0].re / counts[0] as f64;
    let rho = acc
        .iter()
        .zip(&counts)
        .map(|(v, &n)| if n > 0 { (v / n as f64).norm() / c0 } else { 0.0 })
        .collect();
    (rho, total)
}

/// Lags in the fit window: from lag 1 while `ρ ≥ max(4σ_Bartlett, 0.02)`,
/// keeping those with `ρ ≤ 0.6`.
fn acf_window(rho: &[f64], n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut sum_sq = 0.0;
    for tau in 1..rho.len() {
        sum_sq += rho[tau - 1] * rho[tau - 1];
        let sigma = ((1.0 + 2.0 * (sum_sq - 1.0).max(0.0)) / n as f64).sqrt();
        let floor = (4.0 * sigma).max(0.02);
        if rho[tau] < floor {
            break;
        }
        if rho[tau] <= 0.6 {
            out.push(tau);
        }
    }
    out
}

fn fit_decay(x: &[f64], y: &[f64]) -> f64 {
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    -stats::linear_fit(x, &ly).0
}

fn finish(
    rate: f64,
    block_rates: &[f64],
    window: usize,
    method: RateMethod,
    obs: &RateObservable,
) -> RateEstimate {
    let finite: Vec<f64> = block_rates.iter().cloned().filter(|r| r.is_finite()).collect();
    let half = if finite.len() >= 2 {
        2.0 * (stats::variance(&finite) / finite.len() as f64).sqrt()
    } else {
        f64::INFINITY
    };
    let (lo, hi) = (rate - half, rate + half);
    let usable = window >= 3 && rate.is_finite() && rate > 0.0 && lo > 0.0;
    RateEstimate {
        rate: rate.max(0.0),
        ci_low: lo,
        ci_high: hi,
        method,
        observable: obs.to_string(),
        window_points: window,
        usable,
    }
}

/// Exponential rate of an observable from a set of trajectories.
pub fn estimate_rate<T: Real>(
    records: &[TrajectoryRecord<T>],
    obs: &RateObservable,
    method: RateMethod,
) -> Result<RateEstimate> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no trajectories to estimate a rate from".into()));
    }
    match method {
        RateMethod::AutocorrelationFit => {
            let mut segs = Vec::with_capacity(records.len());
            for r in records {
                let s = complex_series(r, obs)?;
                segs.push(s[r.stationary_start()..].to_vec());
            }
            let dt_rec = records[0].times.get(1).map(|t| t - records[0].times[0]).unwrap_or(1.0);
            let shortest = segs.iter().map(|s| s.len()).min().unwrap_or(0);
            if shortest < 8 {
                return Ok(finish(f64::NAN, &[], 0, method, obs));
            }
            let max_lag = (shortest / 4).max(2);
            let (rho, n) = normalised_acf(&segs, max_lag);
            let window = acf_window(&rho, n);
            if window.len() < 3 {
                return Ok(finish(f64::NAN, &[], window.len(), method, obs));
            }
            let xs: Vec<f64> = window.iter().map(|&t| t as f64 * dt_rec).collect();
            let ys: Vec<f64> = window.iter().map(|&t| rho[t]).collect();
            let rate = fit_decay(&xs, &ys);
            // Blocks of at least 20 window lengths each.
            let last = *window.last().unwrap();
            let per_block = 20 * (last + 1);
            let total: usize = segs.iter().map(|s| s.len()).sum();
            let nblocks = (total / per_block).min(32);
            let mut block_rates = Vec::new();
            if nblocks >= 4 {
                let mut blocks: Vec<Vec<Complex<f64>>> = Vec::new();
                for s in &segs {
                    for chunk in s.chunks(per_block) {
                        if chunk.len() == per_block {
                            blocks.push(chunk.to_vec());
                        }
                    }
                }
                let groups = blocks.len().min(32);
                let per_group = blocks.len() / groups.max(1);
                for g in 0..groups {
                    let grp = &blocks[g * per_group..(g + 1) * per_group];
                    let (rb, _) = normalised_acf(grp, last + 1);
                    let ok: Vec<usize> = window.iter().cloned().filter(|&t| rb[t] > 0.0).collect();
                    if ok.len() >= 2 {
                        let bx: Vec<f64> = ok.iter().map(|&t| t as f64 * dt_rec).collect();
                        let by: Vec<f64> = ok.iter().map(|&t| rb[t]).collect();
                        block_rates.push(fit_decay(&bx, &by));
                    }
                }
            }
            Ok(finish(rate, &block_rates, window.len(), method, obs))
        }
        RateMethod::RelaxationFit => {
            let series: Vec<Vec<Complex<f64>>> = records
                .iter()
                .map(|r| complex_series(r, obs))
                .collect::<Result<_>>()?;
            let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
            let times = &records[0].times;
            let reference = match obs {
                RateObservable::Mode(_) => Complex::new(0.0, 0.0),
                // Scalar observables relax toward the late-time ensemble mean.
                RateObservable::Scalar(_) => {
                    let tail = len - len / 5;
                    let v: Vec<f64> = series.iter().flat_map(|s| s[tail..len].iter().map(|c| c.re)).collect();
                    Complex::new(stats::mean(&v), 0.0)
                }
            };
            let ens_mean = |idx: &[usize], t: usize| -> Complex<f64> {
                idx.iter().map(|&i| series[i][t] - reference).sum::<Complex<f64>>() / idx.len() as f64
            };
            let all: Vec<usize> = (0..series.len()).collect();
            let m: Vec<f64> = (0..len).map(|t| ens_mean(&all, t).norm()).collect();
            let se: Vec<f64> = (0..len)
                .map(|t| {
                    let vals: Vec<Complex<f64>> = all.iter().map(|&i| series[i][t] - reference).collect();
                    let mu = vals.iter().sum::<Complex<f64>>() / vals.len() as f64;
                    let var = vals.iter().map(|v| (v - mu).norm_sqr()).sum::<f64>() / (vals.len().max(2) - 1) as f64;
                    (var / vals.len() as f64).sqrt()
                })
                .collect();
            let m0 = m[0];
            let mut window = Vec::new();
            for t in 0..len {
                if m[t] < (4.0 * se[t]).max(0.02 * m0) {
                    break;
                }
                window.push(t);
            }
            if window.len() < 3 {
                return Ok(finish(f64::NAN, &[], window.len(), method, obs));
            }
            let xs: Vec<f64> = window.iter().map(|&t| times[t]).collect();
            let ys: Vec<f64> = window.iter().map(|&t| m[t]).collect();
            let rate = fit_decay(&xs, &ys);
            let groups = (series.len() / 8).clamp(2, 16).min(series.len());
            let mut block_rates = Vec::new();
            if groups >= 2 {
                let per = series.len() / groups;
                for g in 0..groups {
                    let idx: Vec<usize> = (g * per..(g + 1) * per).collect();
                    let pts: Vec<(f64, f64)> = window
                        .iter()
                        .map(|&t| (times[t], ens_mean(&idx, t).norm()))
                        .filter(|p| p.1 > 0.0)
                        .collect();
                    if pts.len() >= 2 {
                        let bx: Vec<f64> = pts.iter().map(|p| p.0).collect();
                        let by: Vec<f64> = pts.iter().map(|p| p.1).collect();
                        block_rates.push(fit_decay(&bx, &by));
                    }
                }
            }
            Ok(finish(rate, &block_rates, window.len(), method, obs))
        }
        RateMethod::SemigroupFit => Err(Error::InvalidConfig(
            "semigroup rates come from spectral::semigroup, not from trajectories".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;

    fn free(n: usize, nu: f64) -> Hamiltonian<f64> {
        Hamiltonian::new(&ModelParams::free_field(1, n, nu)).unwrap()
    }

    #[test]
    fn drift_example() {
        let h = free(0, 0.7);
        let s = FieldState::from_coeffs(vec![Complex::new(1.0, 0.0)]);
        assert_eq!(drift(&h, &s).unwrap()[0], Complex::new(-0.7, -1.0));
    }

    #[test]
    fn zero_noise_step_is_explicit_euler() {
        let h = free(0, 0.5);
        let a0 = Complex::new(0.3, -0.2);
        let s = FieldState::from_coeffs(vec![a0]);
        let cfg = SdeConfig {
            dt: 0.01,
            noise_scale: 0.0,
            ..Default::default()
        };
        let (s1, ev) = step_em(&h, &s, &cfg, &mut cfg.rng()).unwrap();
        let expect = a0 * (Complex::new(1.0, 0.0) - Complex::new(0.5, 1.0) * 0.01);
        assert!((s1.coeffs[0] - expect).norm() < 1e-16);
        assert!(ev.is_none());
    }

    #[test]
    fn diverging_step_is_reported() {
        let p = ModelParams {
            coupling: 1.0,
            domain: DomainKind::WholeSpace,
            ..ModelParams::free_field(1, 1, 1.0)
        };
        let h = Hamiltonian::<f64>::new(&p).unwrap();
        let s = FieldState::from_coeffs(vec![Complex::new(1e80, 0.0); 3]);
        let cfg = SdeConfig { dt: 1.0, ..Default::default() };
        let err = step_em(&h, &s, &cfg, &mut cfg.rng()).unwrap_err();
        assert!(err.to_string().contains("dt too large"), "{err}");
    }

    #[test]
    fn radial_overshoot_reflects_off_sphere() {
        let p = ModelParams {
            domain: DomainKind::L2Ball,
            ball: 4.0,
            coupling: 0.0,
            ..ModelParams::free_field(1, 1, 1.0)
        };
        let h = Hamiltonian::<f64>::new(&p).unwrap();
        let dir = [Complex::new(0.6, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.8)];
        let at = |r: f64| FieldState::from_coeffs(dir.iter().map(|c| c * r).collect());
        let eps = 1e-3;
        let (out, ev) = reflect_step(&h, &at(1.9), &at(2.0 * (1.0 + eps)), ReflectionScheme::Specular);
        assert_eq!(ev, ReflectOutcome::Reflected);
        let r = out.l2_norm_sq().sqrt();
        assert!((r - 2.0 * (1.0 - eps)).abs() < 1e-8, "{r}");
    }

    #[test]
    fn tangential_component_survives_reflection() {
        let p = ModelParams {
            domain: DomainKind::L2Ball,
            ball: 1.0,
            coupling: 0.0,
            ..ModelParams::free_field(1, 0, 1.0)
        };
        let h = Hamiltonian::<f64>::new(&p).unwrap();
        let a_in = FieldState::from_coeffs(vec![Complex::new(0.999, 0.0)]);
        let a_out = FieldState::from_coeffs(vec![Complex::new(1.001, 0.01)]);
        let (out, ev) = reflect_step(&h, &a_in, &a_out, ReflectionScheme::Specular);
        assert_eq!(ev, ReflectOutcome::Reflected);
        // The crossing is at |a| = 1, where the normal is essentially the real axis.
        assert!((out.coeffs[0].im - 0.01).abs() < 2e-5);
        assert!(out.coeffs[0].re < 1.0);
        let (rej, ev) = reflect_step(&h, &a_in, &a_out, ReflectionScheme::Reject);
        assert_eq!(ev, ReflectOutcome::Rejected);
        assert_eq!(rej, a_in);
    }

    #[test]
    fn failed_bracket_falls_back_to_reject() {
        let p = ModelParams {
            domain: DomainKind::L2Ball,
            coupling: 0.0,
            ..ModelParams::free_field(1, 0, 1.0)
        };
        let h = Hamiltonian::<f64>::new(&p).unwrap();
        let a = FieldState::from_coeffs(vec![Complex::new(0.5, 0.0)]);
        let (out, ev) = reflect_step(&h, &a, &a, ReflectionScheme::Specular);
        assert_eq!(ev, ReflectOutcome::Fallback);
        assert_eq!(out, a);
    }

    #[test]
    fn records_are_deterministic_and_sized() {
        let h = free(1, 1.0);
        let cfg = SdeConfig {
            dt: 0.01,
            t_max: 1.0,
            record_stride: 5,
            burn_in: 0.5,
            rng_seed: 42,
            tracked_modes: vec![1],
            ..Default::default()
        };
        let a = run_trajectory(&h, &h.zero_state(), &cfg).unwrap();
        let b = run_trajectory(&h, &h.zero_state(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 21);
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        let empty = run_trajectory(&h, &h.zero_state(), &SdeConfig { t_max: 0.0, burn_in: 0.0, ..cfg }).unwrap();
        assert_eq!(empty.len(), 1);
        assert_eq!(empty.phi, vec![0.0]);
    }

    #[test]
    fn white_noise_is_unusable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let rec = TrajectoryRecord::<f64> {
            times: (0..n).map(|i| i as f64).collect(),
            phi: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
            l2sq: vec![0.0; n],
            mode_power: vec![vec![]; n],
            tracked_modes: vec![],
            re: vec![vec![]; n],
            im: vec![vec![]; n],
            reflections: 0,
            rejections: 0,
            fallbacks: 0,
            burn_in: 0.0,
            final_state: FieldState::zeros(0),
            mode_labels: vec![],
        };
        let est = estimate_rate(&[rec], &RateObservable::Scalar(Observable::Phi), RateMethod::AutocorrelationFit)
            .unwrap();
        assert!(!est.usable, "{est:?}");
    }
}
