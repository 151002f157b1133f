//! Transfer-matrix partition function of the 1D Ising chain.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spin::{Boundary, Lattice, LatticeKind};

/// 2×2 matrix with a separately tracked log scale: value = `e^{log_scale} · m`.
#[derive(Clone, Copy, Debug)]
struct Scaled<S> {
    m: [[S; 2]; 2],
    log_scale: S,
}

impl<S: Scalar> Scaled<S> {
    fn identity() -> Self {
        Self {
            m: [[S::one(), S::zero()], [S::zero(), S::one()]],
            log_scale: S::zero(),
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut m = [[S::zero(); 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * other.m[0][j] + self.m[i][1] * other.m[1][j];
            }
        }
        let norm = m.iter().flatten().fold(S::zero(), |a, &b| a.max(b.abs()));
        let mut out = Self {
            m,
            log_scale: self.log_scale + other.log_scale,
        };
        if norm > S::zero() {
            for cell in out.m.iter_mut().flatten() {
                *cell = *cell / norm;
            }
            out.log_scale += norm.ln();
        }
        out
    }

    fn pow(&self, mut e: usize) -> Self {
        let mut base = *self;
        let mut acc = Self::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }
}

/// `ln Z` of `−J Σ s_i s_{i+1}` on a ±1 chain, by powers of the 2×2
/// transfer matrix `T_{ss'} = e^{J s s'}`.
pub fn log_transfer_matrix_partition_1d<S: Scalar>(lattice: &Lattice, coupling: S) -> Result<S> {
    if lattice.kind() != LatticeKind::Chain1D {
        return Err(Error::domain("transfer-matrix partition needs a 1D chain"));
    }
    let n = lattice.num_sites();
    let (a, b) = (coupling.exp(), (-coupling).exp());
    let t = Scaled {
        m: [[a, b], [b, a]],
        log_scale: S::zero(),
    };
    match lattice.boundary() {
        Boundary::Periodic => {
            let p = t.pow(n);
            Ok(p.log_scale + (p.m[0][0] + p.m[1][1]).ln())
        }
        Boundary::Free => {
            let p = t.pow(n - 1);
            let sum = p.m.iter().flatten().fold(S::zero(), |acc, &x| acc + x);
            Ok(p.log_scale + sum.ln())
        }
    }
}

/// `Z` of the 1D chain; overflows to `+∞` for very long chains, where
/// [`log_transfer_matrix_partition_1d`] should be used instead.
pub fn transfer_matrix_partition_1d<S: Scalar>(lattice: &Lattice, coupling: S) -> Result<S> {
    Ok(log_transfer_matrix_partition_1d(lattice, coupling)?.exp())
}
