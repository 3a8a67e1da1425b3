//! Fourier-mode lattice `{n ∈ ℤ^d : |n|∞ ≤ N}` with a lexicographic flat
//! ordering (first coordinate slowest).

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLattice {
    dim: usize,
    cutoff: usize,
    side: usize,
    len: usize,
    /// Flat `len × dim` table of mode vectors.
    modes: Vec<i32>,
}

impl ModeLattice {
    pub fn new(dim: usize, cutoff: usize) -> Self {
        assert!(dim >= 1, "lattice dimension must be positive");
        let side = 2 * cutoff + 1;
        let len = side.pow(dim as u32);
        let mut modes = Vec::with_capacity(len * dim);
        for flat in 0..len {
            let mut rem = flat;
            let mut n = vec![0i32; dim];
            for axis in (0..dim).rev() {
                n[axis] = (rem % side) as i32 - cutoff as i32;
                rem /= side;
            }
            modes.extend_from_slice(&n);
        }
        Self {
            dim,
            cutoff,
            side,
            len,
            modes,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Number of points per axis, `2N + 1`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mode(&self, k: usize) -> &[i32] {
        &self.modes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i32]> + '_ {
        self.modes.chunks_exact(self.dim)
    }

    pub fn index_of(&self, n: &[i32]) -> Option<usize> {
        if n.len() != self.dim {
            return None;
        }
        let c = self.cutoff as i32;
        let mut flat = 0usize;
        for &ni in n {
            if ni < -c || ni > c {
                return None;
            }
            flat = flat * self.side + (ni + c) as usize;
        }
        Some(flat)
    }

    /// Flat index of `-n`. The lexicographic order is symmetric, so this is
    /// the mirror index.
    pub fn negated(&self, k: usize) -> usize {
        self.len - 1 - k
    }

    pub fn zero_mode(&self) -> usize {
        self.len / 2
    }

    /// `|n|²` of mode `k`.
    pub fn norm_sq(&self, k: usize) -> i64 {
        self.mode(k).iter().map(|&x| (x as i64) * (x as i64)).sum()
    }

    /// Compact label such as `n0`, `n-3` or `n1_-2` used in column headers.
    pub fn label(&self, k: usize) -> String {
        let parts: Vec<String> = self.mode(k).iter().map(|x| x.to_string()).collect();
        format!("n{}", parts.join("_"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_map_is_a_bijection() {
        for (d, n) in [(1, 0), (1, 3), (2, 2), (3, 1), (4, 1)] {
            let lat = ModeLattice::new(d, n);
            assert_eq!(lat.len(), (2 * n + 1).pow(d as u32));
            for k in 0..lat.len() {
                assert_eq!(lat.index_of(lat.mode(k)), Some(k));
            }
        }
    }

    #[test]
    fn lattice_is_symmetric_under_negation() {
        let lat = ModeLattice::new(2, 3);
        for k in 0..lat.len() {
            let neg: Vec<i32> = lat.mode(k).iter().map(|x| -x).collect();
            assert_eq!(lat.index_of(&neg), Some(lat.negated(k)));
        }
        assert!(lat.mode(lat.zero_mode()).iter().all(|&x| x == 0));
    }

    #[test]
    fn lexicographic_order() {
        let lat = ModeLattice::new(2, 1);
        assert_eq!(lat.mode(0), &[-1, -1]);
        assert_eq!(lat.mode(1), &[-1, 0]);
        assert_eq!(lat.mode(3), &[0, -1]);
        assert_eq!(lat.index_of(&[2, 0]), None);
    }
}
