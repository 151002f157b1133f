//! Exact sums over all `2^N` spin configurations.
//!
//! Configuration `k` puts site `i` in the up state iff bit `i` of `k` is
//! set. Sums are formed in log space over fixed-size blocks which may be
//! evaluated in parallel; block results are combined by a pairwise tree in
//! block order, so results do not depend on thread scheduling.

use crate::error::{Error, Result};
use crate::scalar::{merge_tree, LogSum, Scalar};
use crate::spin::{Hamiltonian, SpinDomain};
use rayon::prelude::*;

pub const DEFAULT_ENUMERATION_LIMIT: usize = 24;

const BLOCK: u64 = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Enumerator {
    pub domain: SpinDomain,
    pub limit: usize,
}

impl Default for Enumerator {
    fn default() -> Self {
        Self {
            domain: SpinDomain::PlusMinusOne,
            limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }
}

impl Enumerator {
    pub fn new(domain: SpinDomain) -> Self {
        Self {
            domain,
            ..Self::default()
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn check(&self, what: &'static str, n: usize) -> Result<()> {
        if n > self.limit.min(63) {
            Err(Error::Capacity {
                what,
                needed: n,
                limit: self.limit.min(63),
            })
        } else {
            Ok(())
        }
    }

    /// Spin values of configuration `index` as scalars.
    pub fn spins<S: Scalar>(&self, index: u64, n: usize) -> Vec<S> {
        let (up, down) = (
            S::from_i8(self.domain.up()).unwrap(),
            S::from_i8(self.domain.down()).unwrap(),
        );
        (0..n)
            .map(|i| if index >> i & 1 == 1 { up } else { down })
            .collect()
    }

    /// `ln Σ_k e^{f(k)}` over `k < 2^n`.
    pub fn log_sum_exp<S, F>(&self, what: &'static str, n: usize, f: F) -> Result<S>
    where
        S: Scalar,
        F: Fn(u64) -> S + Sync,
    {
        self.check(what, n)?;
        Ok(log_sum_exp_range(1u64 << n, f))
    }

    /// `f(k)` for every configuration, in index order.
    pub fn tabulate<S, F>(&self, what: &'static str, n: usize, f: F) -> Result<Vec<S>>
    where
        S: Scalar,
        F: Fn(u64) -> S + Sync + Send,
    {
        self.check(what, n)?;
        Ok((0..1u64 << n).into_par_iter().map(f).collect())
    }

    /// `−H(k)` for every configuration.
    pub fn neg_energies<S: Scalar>(&self, h: &Hamiltonian<S>) -> Result<Vec<S>> {
        let masks = h.term_masks_checked(self, "Hamiltonian enumeration")?;
        self.tabulate("Hamiltonian enumeration", h.n_sites(), |k| {
            -h.energy_of_index(k, &masks, self.domain)
        })
    }

    pub fn log_partition<S: Scalar>(&self, h: &Hamiltonian<S>) -> Result<S> {
        let masks = h.term_masks_checked(self, "partition function")?;
        self.log_sum_exp("partition function", h.n_sites(), |k| {
            -h.energy_of_index(k, &masks, self.domain)
        })
    }

    /// `Z = Σ_s e^{−H(s)}`.
    pub fn partition<S: Scalar>(&self, h: &Hamiltonian<S>) -> Result<S> {
        Ok(self.log_partition(h)?.exp())
    }

    /// `F = −ln Z`.
    pub fn free_energy<S: Scalar>(&self, h: &Hamiltonian<S>) -> Result<S> {
        Ok(-self.log_partition(h)?)
    }

    /// Normalized Boltzmann probabilities `e^{−H}/Z` in index order.
    pub fn boltzmann<S: Scalar>(&self, h: &Hamiltonian<S>) -> Result<Vec<S>> {
        let neg = self.neg_energies(h)?;
        Ok(normalize_log_weights(&neg))
    }
}

impl<S: Scalar> Hamiltonian<S> {
    fn term_masks_checked(&self, en: &Enumerator, what: &'static str) -> Result<Vec<u64>> {
        en.check(what, self.n_sites())?;
        Ok(self.term_masks())
    }
}

pub(crate) fn log_sum_exp_range<S, F>(count: u64, f: F) -> S
where
    S: Scalar,
    F: Fn(u64) -> S + Sync,
{
    let blocks = count.div_ceil(BLOCK);
    let parts: Vec<LogSum<S>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let xs: Vec<S> = (b * BLOCK..((b + 1) * BLOCK).min(count)).map(&f).collect();
            LogSum::from_slice(&xs)
        })
        .collect();
    merge_tree(&parts).ln()
}

/// Turns log-weights into a normalized distribution.
pub fn normalize_log_weights<S: Scalar>(log_w: &[S]) -> Vec<S> {
    let parts: Vec<LogSum<S>> = log_w
        .chunks(BLOCK as usize)
        .map(LogSum::from_slice)
        .collect();
    let log_z = merge_tree(&parts).ln();
    log_w.iter().map(|&x| (x - log_z).exp()).collect()
}

/// Half the L1 distance between two distributions on the same space.
pub fn total_variation<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    Error::check_dim("total variation", p.len(), q.len())?;
    Ok(S::half()
        * crate::scalar::pairwise_sum(
            &p.iter()
                .zip(q)
                .map(|(&a, &b)| (a - b).abs())
                .collect::<Vec<_>>(),
        ))
}

/// `Σ p ln(p/q)`; `+∞` when `q` vanishes where `p` does not.
pub fn kl_divergence<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    Error::check_dim("KL divergence", p.len(), q.len())?;
    let mut terms = Vec::with_capacity(p.len());
    for (&a, &b) in p.iter().zip(q) {
        if a > S::zero() {
            if b <= S::zero() {
                return Ok(S::infinity());
            }
            terms.push(a * (a / b).ln());
        }
    }
    Ok(crate::scalar::pairwise_sum(&terms).max(S::zero()))
}
