use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::params::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorTag {
    /// Fokker–Planck operator.
    L,
    /// `−Δ^{(0)}` with the deformation; equal to `L`.
    Delta0A,
    /// `−Δ^{(1)}` with the deformation.
    Delta1A,
    /// Self-adjoint Witten Laplacian on functions.
    Delta0Sa,
    /// Self-adjoint Witten Laplacian on 1-forms.
    Delta1Sa,
    DPhi,
    DPhiStar,
    DPhiStarA,
    /// Anything else (test matrices, identities).
    Other,
}

impl OperatorTag {
    pub fn is_self_adjoint(self) -> bool {
        matches!(self, OperatorTag::Delta0Sa | OperatorTag::Delta1Sa)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisDescriptor {
    /// Tensor Hermite functions, `levels[j]` per coordinate, scaled by `√(2ω_j)`.
    Hermite {
        levels: Vec<usize>,
        freqs: Vec<f64>,
        /// Copies for form-valued operators.
        components: usize,
    },
    /// Cartesian grid on `[−half_width, half_width]²` restricted to a mask.
    Grid {
        spacing: f64,
        half_width: f64,
        nodes: usize,
        boundary: String,
    },
    /// Radial cells times angular modes `|m| ≤ m_max`.
    Polar {
        cells: usize,
        radius: f64,
        m_max: usize,
    },
    Plain {
        size: usize,
    },
}

#[derive(Clone, Debug)]
pub enum Matrix {
    Dense(Mat<f64>),
    DenseComplex(Mat<c64>),
    Sparse(SparseColMat<usize, c64>),
}

/// Immutable finite matrix representation of one operator.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub tag: OperatorTag,
    pub basis: BasisDescriptor,
    pub matrix: Matrix,
    /// Contiguous diagonal blocks `(offset, size)` when block-diagonal.
    pub blocks: Option<Vec<(usize, usize)>>,
    pub friction: f64,
    pub params: Option<ModelParams>,
    pub potential: String,
    /// Discrete `e^{−φ}` in this basis, when available.
    pub ground_state: Option<Vec<c64>>,
}

impl DiscreteOperator {
    pub fn new(tag: OperatorTag, basis: BasisDescriptor, matrix: Matrix) -> Self {
        Self {
            tag,
            basis,
            matrix,
            blocks: None,
            friction: 0.0,
            params: None,
            potential: String::new(),
            ground_state: None,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(
            OperatorTag::Other,
            BasisDescriptor::Plain { size: n },
            Matrix::Dense(Mat::identity(n, n)),
        )
    }

    pub fn from_triplets(
        tag: OperatorTag,
        basis: BasisDescriptor,
        n: usize,
        entries: &[(usize, usize, c64)],
    ) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, c64>> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let m = SparseColMat::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::Solver(format!("sparse assembly failed: {e:?}")))?;
        Ok(Self::new(tag, basis, Matrix::Sparse(m)))
    }

    pub fn nrows(&self) -> usize {
        match &self.matrix {
            Matrix::Dense(m) => m.nrows(),
            Matrix::DenseComplex(m) => m.nrows(),
            Matrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match &self.matrix {
            Matrix::Dense(m) => m.ncols(),
            Matrix::DenseComplex(m) => m.ncols(),
            Matrix::Sparse(m) => m.ncols(),
        }
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        match &self.matrix {
            Matrix::Dense(m) => {
                let mut y = vec![c64::new(0.0, 0.0); m.nrows()];
                for j in 0..m.ncols() {
                    let xj = x[j];
                    if xj == c64::new(0.0, 0.0) {
                        continue;
                    }
                    let col = m.col(j);
                    for i in 0..m.nrows() {
                        y[i] += xj * col[i];
                    }
                }
                y
            }
            Matrix::DenseComplex(m) => {
                let mut y = vec![c64::new(0.0, 0.0); m.nrows()];
                for j in 0..m.ncols() {
                    let col = m.col(j);
                    for i in 0..m.nrows() {
                        y[i] += x[j] * col[i];
                    }
                }
                y
            }
            Matrix::Sparse(m) => {
                let mut y = vec![c64::new(0.0, 0.0); m.nrows()];
                let sym = m.symbolic();
                let vals = m.val();
                for j in 0..m.ncols() {
                    let xj = x[j];
                    for idx in sym.col_range(j) {
                        y[sym.row_idx()[idx]] += vals[idx] * xj;
                    }
                }
                y
            }
        }
    }

    /// Every stored entry `(row, col, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, c64)> {
        let mut out = Vec::new();
        match &self.matrix {
            Matrix::Dense(m) => {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)] != 0.0 {
                            out.push((i, j, c64::new(m[(i, j)], 0.0)));
                        }
                    }
                }
            }
            Matrix::DenseComplex(m) => {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)] != c64::new(0.0, 0.0) {
                            out.push((i, j, m[(i, j)]));
                        }
                    }
                }
            }
            Matrix::Sparse(m) => {
                let sym = m.symbolic();
                for j in 0..m.ncols() {
                    for idx in sym.col_range(j) {
                        out.push((sym.row_idx()[idx], j, m.val()[idx]));
                    }
                }
            }
        }
        out
    }

    pub fn to_dense_complex(&self) -> Mat<c64> {
        match &self.matrix {
            Matrix::Dense(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0)),
            Matrix::DenseComplex(m) => m.clone(),
            Matrix::Sparse(_) => {
                let mut d = Mat::zeros(self.nrows(), self.ncols());
                for (i, j, v) in self.entries() {
                    d[(i, j)] += v;
                }
                d
            }
        }
    }

    pub fn sub_block(&self, offset: usize, size: usize) -> Mat<c64> {
        let mut d = Mat::zeros(size, size);
        match &self.matrix {
            Matrix::Sparse(m) => {
                let sym = m.symbolic();
                for j in offset..offset + size {
                    for idx in sym.col_range(j) {
                        let i = sym.row_idx()[idx];
                        if i >= offset && i < offset + size {
                            d[(i - offset, j - offset)] += m.val()[idx];
                        }
                    }
                }
            }
            _ => {
                let full = self.to_dense_complex();
                for j in 0..size {
                    for i in 0..size {
                        d[(i, j)] = full[(offset + i, offset + j)];
                    }
                }
            }
        }
        d
    }

    pub fn is_real(&self) -> bool {
        match &self.matrix {
            Matrix::Dense(_) => true,
            _ => self.entries().iter().all(|e| e.2.im == 0.0),
        }
    }

    /// `max |A_ij − conj(A_ji)| / max |A_ij|`.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.to_dense_complex();
        let n = d.nrows();
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(d[(i, j)].norm());
                worst = worst.max((d[(i, j)] - d[(j, i)].conj()).norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Coordinate text dump: a header line, then `row col re im` per entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {} x {} {:?}", self.nrows(), self.ncols(), self.tag)?;
        for (i, j, v) in self.entries() {
            writeln!(w, "{i} {j} {} {}", fmt_f64(v.re), fmt_f64(v.im))?;
        }
        Ok(())
    }

    /// Sparse copy of `A − σ I` for factorisation.
    pub fn shifted_sparse(&self, sigma: c64) -> Result<SparseColMat<usize, c64>> {
        let n = self.nrows();
        let mut t: Vec<Triplet<usize, usize, c64>> =
            self.entries().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        for i in 0..n {
            t.push(Triplet::new(i, i, -sigma));
        }
        SparseColMat::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::Solver(format!("sparse assembly failed: {e:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_sparse_apply_agree() {
        let e = [
            (0, 0, c64::new(2.0, 0.0)),
            (0, 1, c64::new(-1.0, 0.5)),
            (1, 0, c64::new(3.0, 0.0)),
            (1, 1, c64::new(0.0, 1.0)),
        ];
        let s = DiscreteOperator::from_triplets(OperatorTag::Other, BasisDescriptor::Plain { size: 2 }, 2, &e).unwrap();
        let d = DiscreteOperator::new(OperatorTag::Other, s.basis.clone(), Matrix::DenseComplex(s.to_dense_complex()));
        let x = [c64::new(1.0, 2.0), c64::new(-0.5, 0.1)];
        let (a, b) = (s.apply(&x), d.apply(&x));
        for i in 0..2 {
            assert!((a[i] - b[i]).norm() < 1e-15);
        }
        let mut out = Vec::new();
        s.write_coo(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 5);
    }

    #[test]
    fn identity_is_hermitian() {
        assert_eq!(DiscreteOperator::identity(4).hermitian_defect(), 0.0);
    }
}
