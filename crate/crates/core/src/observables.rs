use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::Error;
use crate::hamiltonian::Hamiltonian;
use crate::scalar::Real;

/// Scalar functions of the field used for moments and rates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Observable {
    /// The constant 1.
    One,
    Phi,
    /// `Σ|a_n|²`.
    L2Sq,
    /// `|a_k|²` for flat index `k`.
    ModePower(usize),
    /// `Re a_k`.
    ReMode(usize),
}

impl Observable {
    pub fn eval<T: Real>(&self, ham: &Hamiltonian<T>, a: &[Complex<T>]) -> f64 {
        match *self {
            Observable::One => 1.0,
            Observable::Phi => ham.reduced_hamiltonian_unchecked(a).as_f64(),
            Observable::L2Sq => a.iter().map(|c| c.norm_sqr()).sum::<T>().as_f64(),
            Observable::ModePower(k) => a[k].norm_sqr().as_f64(),
            Observable::ReMode(k) => a[k].re.as_f64(),
        }
    }

    /// Moments every equilibrium comparison uses: `φ`, `‖a‖²` and each `|a_n|²`.
    pub fn standard_set(modes: usize) -> Vec<Observable> {
        let mut v = vec![Observable::Phi, Observable::L2Sq];
        v.extend((0..modes).map(Observable::ModePower));
        v
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::One => write!(f, "one"),
            Observable::Phi => write!(f, "phi"),
            Observable::L2Sq => write!(f, "l2sq"),
            Observable::ModePower(k) => write!(f, "mode_power_{k}"),
            Observable::ReMode(k) => write!(f, "re_mode_{k}"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let idx = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad mode index in observable '{s}'")))
        };
        match s {
            "one" => Ok(Observable::One),
            "phi" => Ok(Observable::Phi),
            "l2sq" => Ok(Observable::L2Sq),
            _ => {
                if let Some(r) = s.strip_prefix("mode_power_") {
                    Ok(Observable::ModePower(idx(r)?))
                } else if let Some(r) = s.strip_prefix("re_mode_") {
                    Ok(Observable::ReMode(idx(r)?))
                } else {
                    Err(Error::InvalidConfig(format!("unknown observable '{s}'")))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for o in [
            Observable::One,
            Observable::Phi,
            Observable::L2Sq,
            Observable::ModePower(3),
            Observable::ReMode(0),
        ] {
            assert_eq!(o.to_string().parse::<Observable>().unwrap(), o);
        }
        assert!("psi".parse::<Observable>().is_err());
    }
}
