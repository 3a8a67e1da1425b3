use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ModeLattice;
use crate::scalar::Real;

/// Fourier coefficients `{a_n}` in lattice order.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState<T> {
    pub coeffs: Vec<Complex<T>>,
}

/// One serialized lattice entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord<T> {
    pub n: Vec<i32>,
    pub re: T,
    pub im: T,
}

impl<T: Real> FieldState<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            coeffs: vec![Complex::new(T::zero(), T::zero()); len],
        }
    }

    pub fn from_coeffs(coeffs: Vec<Complex<T>>) -> Self {
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Checks length and finiteness.
    pub fn check(&self, lattice: &ModeLattice) -> Result<()> {
        if self.coeffs.len() != lattice.len() {
            return Err(Error::InvalidState(format!(
                "state has {} coefficients, lattice has {}",
                self.coeffs.len(),
                lattice.len()
            )));
        }
        if !self.is_finite() {
            return Err(Error::InvalidState("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// `Σ|a_n|²`.
    pub fn l2_norm_sq(&self) -> T {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Multiplies every coefficient by `e^{iθ}`.
    pub fn rotate(&self, theta: T) -> Self {
        let ph = Complex::from_polar(T::one(), theta);
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * ph).collect(),
        }
    }

    pub fn axpy(&self, alpha: T, dir: &[Complex<T>]) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(dir)
                .map(|(&a, &d)| a + d * alpha)
                .collect(),
        }
    }

    pub fn to_records(&self, lattice: &ModeLattice) -> Vec<ModeRecord<T>> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| ModeRecord {
                n: lattice.mode(k).to_vec(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }

    /// Rebuilds a state; records must cover the lattice exactly once.
    pub fn from_records(lattice: &ModeLattice, records: &[ModeRecord<T>]) -> Result<Self> {
        let mut out = Self::zeros(lattice.len());
        let mut seen = vec![false; lattice.len()];
        for r in records {
            let k = lattice.index_of(&r.n).ok_or_else(|| {
                Error::InvalidState(format!("mode {:?} not on the lattice", r.n))
            })?;
            if seen[k] {
                return Err(Error::InvalidState(format!("mode {:?} repeated", r.n)));
            }
            seen[k] = true;
            out.coeffs[k] = Complex::new(r.re, r.im);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidState("records do not cover the lattice".into()));
        }
        Ok(out)
    }

    pub fn cast<U: Real>(&self) -> FieldState<U> {
        FieldState {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| Complex::new(U::lit(c.re.as_f64()), U::lit(c.im.as_f64())))
                .collect(),
        }
    }
}

/// Pair `(w, z)`; a real direction has `z = conj(w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector<T> {
    pub w: Vec<Complex<T>>,
    pub conj_w: Vec<Complex<T>>,
}

impl<T: Real> TangentVector<T> {
    pub fn zeros(len: usize) -> Self {
        let z = vec![Complex::new(T::zero(), T::zero()); len];
        Self {
            w: z.clone(),
            conj_w: z,
        }
    }

    pub fn real_direction(w: Vec<Complex<T>>) -> Self {
        let conj_w = w.iter().map(|c| c.conj()).collect();
        Self { w, conj_w }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `⟨v, v'⟩ = ½ Re Σ (conj(w) w' + conj(z) z')`. On real directions this is
    /// the Euclidean product of `(Re w, Im w)`.
    pub fn inner(&self, other: &Self) -> T {
        let a: T = self
            .w
            .iter()
            .zip(&other.w)
            .map(|(x, y)| (x.conj() * y).re)
            .sum();
        let b: T = self
            .conj_w
            .iter()
            .zip(&other.conj_w)
            .map(|(x, y)| (x.conj() * y).re)
            .sum();
        (a + b) * T::lit(0.5)
    }

    pub fn is_real_direction(&self, tol: T) -> bool {
        self.w
            .iter()
            .zip(&self.conj_w)
            .all(|(a, b)| (a.conj() - b).norm() <= tol * (T::one() + a.norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn records_round_trip_bit_exact(
            vals in proptest::collection::vec((any::<f64>(), any::<f64>()), 9),
        ) {
            let lat = ModeLattice::new(2, 1);
            let s = FieldState::from_coeffs(
                vals.iter().map(|&(r, i)| Complex::new(r, i)).collect(),
            );
            let back = FieldState::from_records(&lat, &s.to_records(&lat)).unwrap();
            for (a, b) in s.coeffs.iter().zip(&back.coeffs) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn from_records_rejects_partial_cover() {
        let lat = ModeLattice::new(1, 1);
        let s = FieldState::<f64>::zeros(3);
        let mut rec = s.to_records(&lat);
        rec.pop();
        assert!(FieldState::from_records(&lat, &rec).is_err());
        rec.push(rec[0].clone());
        assert!(FieldState::from_records(&lat, &rec).is_err());
    }

    #[test]
    fn inner_product_is_euclidean_on_real_directions() {
        let v = TangentVector::real_direction(vec![Complex::new(1.0f64, 2.0), Complex::new(-3.0, 0.5)]);
        assert!((v.inner(&v) - (1.0 + 4.0 + 9.0 + 0.25)).abs() < 1e-15);
        assert!(v.is_real_direction(0.0));
    }

    #[test]
    fn check_flags_nan() {
        let lat = ModeLattice::new(1, 0);
        let s = FieldState::from_coeffs(vec![Complex::new(f64::NAN, 0.0)]);
        assert!(s.check(&lat).unwrap_err().to_string().contains("invalid state"));
    }
}
