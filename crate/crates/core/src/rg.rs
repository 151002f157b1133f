//! Real-space renormalization: the 1D decimation recursion, RG operators
//! `T(v, h)` and the coarse-grained Hamiltonians they induce.
//!
//! Operators are stored as `e^{T}` and indexed `(v, h)` by configuration
//! index, visible first.

use crate::enumerate::{normalize_log_weights, Enumerator};
use crate::error::{Error, Result};
use crate::mapping::BoltzmannMachine;
use crate::scalar::{ln_cosh, LogSum, Scalar};
use crate::spin::{Hamiltonian, Lattice, LatticeKind, SpinConfig, SpinDomain, Term};
use nalgebra::{DMatrix, DVector};
use std::io::Write;

/// One decimation step of the ferromagnetic chain:
/// `tanh J' = tanh² J`, evaluated as `J' = ½ ln cosh 2J`.
pub fn decimation_step_coupling<S: Scalar>(coupling: S) -> Result<S> {
    if !coupling.is_finite() || coupling < S::zero() {
        return Err(Error::domain(format!(
            "decimation needs a finite ferromagnetic coupling, got {}",
            coupling.to_f64_lossy()
        )));
    }
    Ok(S::half() * ln_cosh(S::two() * coupling))
}

/// `atanh(tanh^{2^n} J0)`, the closed form of `n` decimation steps.
pub fn closed_form_coupling<S: Scalar>(j0: S, steps: usize) -> Result<S> {
    if !j0.is_finite() || j0 < S::zero() {
        return Err(Error::domain(
            "closed-form flow needs a finite coupling J0 ≥ 0",
        ));
    }
    if steps == 0 {
        return Ok(j0);
    }
    let mut t = j0.tanh();
    for _ in 0..steps {
        t = t * t;
    }
    if t >= S::one() - S::from_f64_lossy(1e-15) {
        return Err(Error::domain("tanh^(2^n)(J0) is too close to 1 for atanh"));
    }
    Ok(S::half() * (S::two() * t / (S::one() - t)).ln_1p())
}

/// Couplings `J^(0), J^(1), …, J^(n)` under repeated decimation.
#[derive(Clone, Debug, PartialEq)]
pub struct RgFlow<S = f64> {
    pub couplings: Vec<S>,
}

impl<S: Scalar> RgFlow<S> {
    pub fn steps(&self) -> usize {
        self.couplings.len() - 1
    }

    /// `step,J` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,J\n");
        for (k, j) in self.couplings.iter().enumerate() {
            out.push_str(&format!("{k},{:e}\n", j.to_f64_lossy()));
        }
        out
    }
}

pub fn rg_flow<S: Scalar>(j0: S, steps: usize) -> Result<RgFlow<S>> {
    let mut couplings = Vec::with_capacity(steps + 1);
    couplings.push(j0);
    let mut j = decimation_step_coupling(j0).map(|_| j0)?;
    for _ in 0..steps {
        j = decimation_step_coupling(j)?;
        couplings.push(j);
    }
    Ok(RgFlow { couplings })
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorRepr<S> {
    /// Dense `e^{T}` table, row-major `v · 2^M + h`.
    Table(Vec<S>),
    /// `e^{T(v, h)} = 1` iff `h = assignment[v]`, else 0.
    Assignment(Vec<u64>),
    /// `T = −E + H_data` for a Boltzmann machine energy `E`.
    Induced {
        machine: BoltzmannMachine<S>,
        data: Hamiltonian<S>,
    },
}

/// A variational RG operator `T(v, h)` on `n_visible + n_hidden` spins.
#[derive(Clone, Debug, PartialEq)]
pub struct RgOperator<S = f64> {
    n_visible: usize,
    n_hidden: usize,
    domain: SpinDomain,
    repr: OperatorRepr<S>,
}

impl<S: Scalar> RgOperator<S> {
    pub fn from_table(
        n_visible: usize,
        n_hidden: usize,
        domain: SpinDomain,
        table: Vec<S>,
    ) -> Result<Self> {
        Enumerator::new(domain).check("RG operator table", n_visible + n_hidden)?;
        Error::check_dim(
            "RG operator table",
            1 << (n_visible + n_hidden),
            table.len(),
        )?;
        if table.iter().any(|&x| !(x >= S::zero()) || !x.is_finite()) {
            return Err(Error::validation(
                "e^T entries must be finite and non-negative",
            ));
        }
        Ok(Self {
            n_visible,
            n_hidden,
            domain,
            repr: OperatorRepr::Table(table),
        })
    }

    pub fn from_assignment(
        n_visible: usize,
        n_hidden: usize,
        domain: SpinDomain,
        assignment: Vec<u64>,
    ) -> Result<Self> {
        Enumerator::new(domain).check("RG operator assignment", n_visible + n_hidden)?;
        Error::check_dim("RG operator assignment", 1 << n_visible, assignment.len())?;
        if assignment.iter().any(|&h| h >> n_hidden != 0) {
            return Err(Error::validation(
                "assignment targets a hidden index out of range",
            ));
        }
        Ok(Self {
            n_visible,
            n_hidden,
            domain,
            repr: OperatorRepr::Assignment(assignment),
        })
    }

    /// `T(v, h) = −E(v, h) + H_data(v)`.
    pub fn induced(machine: BoltzmannMachine<S>, data: Hamiltonian<S>) -> Result<Self> {
        Error::check_dim(
            "data Hamiltonian vs visible layer",
            machine.n_visible(),
            data.n_sites(),
        )?;
        Ok(Self {
            n_visible: machine.n_visible(),
            n_hidden: machine.n_hidden(),
            domain: machine.domain(),
            repr: OperatorRepr::Induced { machine, data },
        })
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn domain(&self) -> SpinDomain {
        self.domain
    }

    pub fn repr(&self) -> &OperatorRepr<S> {
        &self.repr
    }

    fn check_capacity(&self, what: &'static str) -> Result<()> {
        Enumerator::new(self.domain).check(what, self.n_visible + self.n_hidden)
    }

    /// Calls `f(h, T(v, h))` for every `h` with `e^{T} > 0`.
    fn for_each_log_weight(&self, v: u64, mut f: impl FnMut(u64, S)) {
        let hidden = 1u64 << self.n_hidden;
        match &self.repr {
            OperatorRepr::Table(t) => {
                let row = &t[(v * hidden) as usize..((v + 1) * hidden) as usize];
                for (h, &x) in row.iter().enumerate() {
                    if x > S::zero() {
                        f(h as u64, x.ln());
                    }
                }
            }
            OperatorRepr::Assignment(a) => f(a[v as usize], S::zero()),
            OperatorRepr::Induced { machine, data } => {
                let en = Enumerator::new(self.domain);
                let vs = en.spins::<S>(v, self.n_visible);
                let hv = data.energy_of_scalars(&vs);
                for h in 0..hidden {
                    f(
                        h,
                        hv - machine.energy_unchecked(&vs, &en.spins::<S>(h, self.n_hidden)),
                    );
                }
            }
        }
    }

    /// `e^{T(v, h)}`.
    pub fn weight(&self, v: u64, h: u64) -> S {
        let mut out = S::zero();
        self.for_each_log_weight(v, |hh, lw| {
            if hh == h {
                out = lw.exp();
            }
        });
        out
    }

    /// `ln Tr_h e^{T(v, h)}`.
    pub fn log_trace_hidden(&self, v: u64) -> S {
        if let OperatorRepr::Induced { machine, data } = &self.repr {
            let vs = Enumerator::new(self.domain).spins::<S>(v, self.n_visible);
            return data.energy_of_scalars(&vs) + machine.log_trace_hidden(&vs);
        }
        let mut acc = Vec::new();
        self.for_each_log_weight(v, |_, lw| acc.push(lw));
        LogSum::from_slice(&acc).ln()
    }

    /// Dense `e^{T}` table.
    pub fn to_table(&self) -> Result<Vec<S>> {
        self.check_capacity("RG operator table")?;
        let hidden = 1usize << self.n_hidden;
        let mut table = vec![S::zero(); (1usize << self.n_visible) * hidden];
        for v in 0..1u64 << self.n_visible {
            self.for_each_log_weight(v, |h, lw| {
                table[v as usize * hidden + h as usize] = lw.exp()
            });
        }
        Ok(table)
    }

    /// Tabulated operator with every `e^{T}` entry multiplied by `factor`.
    pub fn scaled(&self, factor: S) -> Result<Self> {
        let table = self.to_table()?.into_iter().map(|x| x * factor).collect();
        Self::from_table(self.n_visible, self.n_hidden, self.domain, table)
    }

    /// Tabulated operator with entry `(v, h)` replaced by `value`.
    pub fn with_entry(&self, v: u64, h: u64, value: S) -> Result<Self> {
        let mut table = self.to_table()?;
        table[((v << self.n_hidden) + h) as usize] = value;
        Self::from_table(self.n_visible, self.n_hidden, self.domain, table)
    }

    /// Debug dump: `u32` n_visible, `u32` n_hidden, then the `e^{T}` table
    /// as little-endian `f64`, row-major.
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        let table = self.to_table()?;
        w.write_all(&(self.n_visible as u32).to_le_bytes())?;
        w.write_all(&(self.n_hidden as u32).to_le_bytes())?;
        for x in table {
            w.write_all(&x.to_f64_lossy().to_le_bytes())?;
        }
        Ok(())
    }
}

/// Decimation of an even-length chain: hidden spin `j` copies visible
/// spin `2j`, i.e. `e^{T} = Π_j (1 + h_j v_{2j}) / 2`.
pub fn decimation_operator_1d<S: Scalar>(n_visible: usize) -> Result<RgOperator<S>> {
    if n_visible == 0 || n_visible % 2 != 0 {
        return Err(Error::validation(format!(
            "decimation needs an even, nonzero site count, got {n_visible}"
        )));
    }
    let n_hidden = n_visible / 2;
    Enumerator::default().check("decimation operator", n_visible + n_hidden)?;
    let assignment = (0..1u64 << n_visible)
        .map(|v| (0..n_hidden).fold(0u64, |h, j| h | (v >> (2 * j) & 1) << j))
        .collect();
    RgOperator::from_assignment(n_visible, n_hidden, SpinDomain::PlusMinusOne, assignment)
}

fn block_grid(lattice: &Lattice) -> Result<(usize, usize)> {
    if lattice.kind() != LatticeKind::Square2D {
        return Err(Error::domain("block spins need a square lattice"));
    }
    if lattice.rows() % 2 != 0 || lattice.cols() % 2 != 0 {
        return Err(Error::validation(format!(
            "block spins need even extents, got {lattice}"
        )));
    }
    Ok((lattice.rows() / 2, lattice.cols() / 2))
}

/// Majority rule on one 2×2 block, ties resolved by the top-left spin.
fn majority(block: [bool; 4]) -> bool {
    match block.iter().filter(|&&b| b).count() {
        3 | 4 => true,
        0 | 1 => false,
        _ => block[0],
    }
}

fn block_spin_index(lattice: &Lattice, up: impl Fn(usize) -> bool) -> Result<u64> {
    let (br, bc) = block_grid(lattice)?;
    let mut h = 0u64;
    for r in 0..br {
        for c in 0..bc {
            let s = |dr, dc| up(lattice.site(2 * r + dr, 2 * c + dc));
            if majority([s(0, 0), s(0, 1), s(1, 0), s(1, 1)]) {
                h |= 1 << (r * bc + c);
            }
        }
    }
    Ok(h)
}

/// Coarse-grains a configuration with 2×2 majority blocks.
pub fn block_spin(config: &SpinConfig, lattice: &Lattice) -> Result<SpinConfig> {
    Error::check_dim("block spin", lattice.num_sites(), config.len())?;
    let (br, bc) = block_grid(lattice)?;
    let up = config.domain().up();
    let mut out = Vec::with_capacity(br * bc);
    for r in 0..br {
        for c in 0..bc {
            let s = |dr, dc| config.values()[lattice.site(2 * r + dr, 2 * c + dc)] == up;
            out.push(
                config
                    .domain()
                    .from_bit(majority([s(0, 0), s(0, 1), s(1, 0), s(1, 1)])),
            );
        }
    }
    SpinConfig::new(config.domain(), out)
}

/// Deterministic 2×2 majority-rule block-spin operator.
pub fn block_spin_operator_2d<S: Scalar>(lattice: &Lattice) -> Result<RgOperator<S>> {
    let (br, bc) = block_grid(lattice)?;
    let (n, m) = (lattice.num_sites(), br * bc);
    Enumerator::default().check("block-spin operator", n + m)?;
    let assignment = (0..1u64 << n)
        .map(|v| block_spin_index(lattice, |i| v >> i & 1 == 1))
        .collect::<Result<Vec<_>>>()?;
    RgOperator::from_assignment(n, m, SpinDomain::PlusMinusOne, assignment)
}

/// `max_v |Tr_h e^{T(v,h)} − 1|`.
pub fn exactness_residual<S: Scalar>(op: &RgOperator<S>) -> Result<S> {
    op.check_capacity("exactness residual")?;
    Ok((0..1u64 << op.n_visible)
        .map(|v| (op.log_trace_hidden(v).exp() - S::one()).abs())
        .fold(S::zero(), S::max))
}

/// `ΔF = F^h − F^v` with `F^v = −ln Tr_v e^{−H}` and
/// `F^h = −ln Tr_h e^{−H^RG}`.
pub fn free_energy_difference<S: Scalar>(op: &RgOperator<S>, h: &Hamiltonian<S>) -> Result<S> {
    op.check_capacity("free energy difference")?;
    Error::check_dim("free energy difference", op.n_visible, h.n_sites())?;
    let en = Enumerator::new(op.domain);
    let masks = h.term_masks();
    let f_v = -en.log_sum_exp("visible free energy", op.n_visible, |v| {
        -h.energy_of_index(v, &masks, op.domain)
    })?;
    let f_h = -en.log_sum_exp("hidden free energy", op.n_visible, |v| {
        -h.energy_of_index(v, &masks, op.domain) + op.log_trace_hidden(v)
    })?;
    Ok(f_h - f_v)
}

/// `e^{−H^RG(h)} = Tr_v e^{T(v,h) − H(v)}`, tabulated over hidden configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct RenormalizedHamiltonian<S = f64> {
    pub n_hidden: usize,
    pub domain: SpinDomain,
    /// `−H^RG(h)`, including its additive constant; `−∞` where `e^{−H^RG}` vanishes.
    pub log_weights: Vec<S>,
}

pub fn renormalized_hamiltonian<S: Scalar>(
    op: &RgOperator<S>,
    h: &Hamiltonian<S>,
) -> Result<RenormalizedHamiltonian<S>> {
    op.check_capacity("renormalized Hamiltonian")?;
    Error::check_dim("renormalized Hamiltonian", op.n_visible, h.n_sites())?;
    let masks = h.term_masks();
    let mut buckets: Vec<Vec<S>> = vec![Vec::new(); 1 << op.n_hidden];
    for v in 0..1u64 << op.n_visible {
        let hv = h.energy_of_index(v, &masks, op.domain);
        op.for_each_log_weight(v, |hid, lw| buckets[hid as usize].push(lw - hv));
    }
    Ok(RenormalizedHamiltonian {
        n_hidden: op.n_hidden,
        domain: op.domain,
        log_weights: buckets.iter().map(|b| LogSum::from_slice(b).ln()).collect(),
    })
}

impl<S: Scalar> RenormalizedHamiltonian<S> {
    /// `H^RG(h)`.
    pub fn hamiltonian(&self) -> Vec<S> {
        self.log_weights.iter().map(|&x| -x).collect()
    }

    /// `ln Tr_h e^{−H^RG}`, i.e. `−F^h`.
    pub fn log_partition(&self) -> S {
        LogSum::from_slice(&self.log_weights).ln()
    }

    /// Normalized hidden distribution.
    pub fn distribution(&self) -> Vec<S> {
        normalize_log_weights(&self.log_weights)
    }

    /// Least-squares fit of `−H^RG(h) = K_∅ + Σ_S K_S Π_{i∈S} h_i` over the
    /// hidden configurations with nonzero weight. The fit runs in `f64`.
    pub fn fit(&self, basis: &TermBasis) -> Result<FittedHamiltonian<S>> {
        if let Some(bad) = basis.sets.iter().flatten().find(|&&i| i >= self.n_hidden) {
            return Err(Error::domain(format!(
                "basis site {bad} out of range for {} hidden spins",
                self.n_hidden
            )));
        }
        let rows: Vec<usize> = (0..self.log_weights.len())
            .filter(|&k| self.log_weights[k].is_finite())
            .collect();
        let cols = basis.sets.len() + 1;
        if rows.len() < cols {
            return Err(Error::validation(format!(
                "{} finite hidden weights cannot fit {cols} coefficients",
                rows.len()
            )));
        }
        let en = Enumerator::new(self.domain);
        let mut a = DMatrix::<f64>::zeros(rows.len(), cols);
        let mut y = DVector::<f64>::zeros(rows.len());
        for (r, &k) in rows.iter().enumerate() {
            let spins = en.spins::<f64>(k as u64, self.n_hidden);
            a[(r, 0)] = 1.0;
            for (c, set) in basis.sets.iter().enumerate() {
                a[(r, c + 1)] = set.iter().map(|&i| spins[i]).product();
            }
            y[r] = self.log_weights[k].to_f64_lossy();
        }
        let coeffs = a
            .clone()
            .svd(true, true)
            .solve(&y, 1e-12)
            .map_err(|e| Error::validation(format!("least-squares fit failed: {e}")))?;
        let resid = &a * &coeffs - &y;
        let mut hamiltonian = Hamiltonian::new(self.n_hidden);
        for (set, &k) in basis.sets.iter().zip(coeffs.iter().skip(1)) {
            hamiltonian.add_term(set.clone(), S::from_f64_lossy(k))?;
        }
        Ok(FittedHamiltonian {
            hamiltonian,
            constant: S::from_f64_lossy(coeffs[0]),
            max_residual: S::from_f64_lossy(resid.amax()),
        })
    }
}

/// Interaction sets over which renormalized couplings are fitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermBasis {
    pub sets: Vec<Vec<usize>>,
}

impl TermBasis {
    pub fn fields(n: usize) -> Self {
        Self {
            sets: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn lattice_pairs(lattice: &Lattice) -> Self {
        Self {
            sets: lattice
                .bonds()
                .into_iter()
                .map(|(i, j)| vec![i.min(j), i.max(j)])
                .collect(),
        }
    }

    /// Every subset of `0..n` with between 1 and `max_order` elements.
    pub fn all_up_to_order(n: usize, max_order: usize) -> Self {
        let mut sets: Vec<Vec<usize>> = (1u64..1 << n)
            .filter(|s| (1..=max_order).contains(&(s.count_ones() as usize)))
            .map(|s| (0..n).filter(|&i| s >> i & 1 == 1).collect())
            .collect();
        sets.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        Self { sets }
    }

    pub fn with(mut self, other: TermBasis) -> Self {
        for s in other.sets {
            if !self.sets.contains(&s) {
                self.sets.push(s);
            }
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedHamiltonian<S = f64> {
    /// Fitted `K̃` terms (no constant term).
    pub hamiltonian: Hamiltonian<S>,
    /// `K_∅`; `−H^RG = K_∅ + Σ K̃ Π h`.
    pub constant: S,
    /// Largest absolute misfit in `−H^RG`.
    pub max_residual: S,
}

impl<S: Scalar> FittedHamiltonian<S> {
    /// Fitted coupling of the term on exactly `sites` (order-insensitive), or 0.
    pub fn coupling(&self, sites: &[usize]) -> S {
        let mut want = sites.to_vec();
        want.sort_unstable();
        self.hamiltonian
            .terms()
            .iter()
            .filter(|t: &&Term<S>| {
                let mut s = t.sites.clone();
                s.sort_unstable();
                s == want
            })
            .map(|t| t.coupling)
            .fold(S::zero(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Boundary;

    #[test]
    fn recursion_values() {
        assert_eq!(decimation_step_coupling(0.0f64).unwrap(), 0.0);
        // frozen from atanh(tanh(J)^2) in an independent double-precision evaluation
        assert!(
            (decimation_step_coupling(1.0f64).unwrap() - 0.662_501_373_678_932_1).abs() < 1e-15
        );
        assert!(
            (decimation_step_coupling(0.5f64).unwrap() - 0.216_890_415_241_513_56).abs() < 1e-15
        );
        assert!(matches!(
            decimation_step_coupling(-0.1f64),
            Err(Error::Domain(_))
        ));
        assert!(decimation_step_coupling(f64::NAN).is_err());
    }

    #[test]
    fn large_coupling_contracts_by_about_half_log_two() {
        let mut prev = 0.0;
        for &j in &[2.0f64, 5.0, 10.0, 40.0] {
            let gap = j - decimation_step_coupling(j).unwrap();
            assert!(gap > prev - 1e-12 && gap < 0.5 * 2f64.ln() + 1e-12);
            prev = gap;
        }
        assert!((prev - 0.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn flow_from_one() {
        let flow = rg_flow(1.0f64, 4).unwrap();
        assert_eq!(flow.couplings.len(), 5);
        assert!(flow.couplings.windows(2).all(|w| w[1] < w[0]));
        assert!(flow.couplings[4] < 0.02);
        for (n, &j) in flow.couplings.iter().enumerate() {
            assert!((j - closed_form_coupling(1.0, n).unwrap()).abs() < 1e-12);
        }
        assert!(rg_flow(0.0f64, 7)
            .unwrap()
            .couplings
            .iter()
            .all(|&j| j == 0.0));
        assert!(rg_flow(f64::INFINITY, 1).is_err());
        assert!(flow.to_csv().starts_with("step,J\n0,1e0\n"));
    }

    #[test]
    fn decimation_operator_is_indicator() {
        let op = decimation_operator_1d::<f64>(2).unwrap();
        // v index bit 0 is site 0 (the kept site)
        for v in 0..4 {
            for h in 0..2 {
                assert_eq!(op.weight(v, h), if h == (v & 1) { 1.0 } else { 0.0 });
            }
        }
        assert!(matches!(
            decimation_operator_1d::<f64>(5),
            Err(Error::Validation(_))
        ));
        assert_eq!(
            exactness_residual(&decimation_operator_1d::<f64>(10).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn decimated_free_chain_of_four() {
        let j = 0.7;
        let op = decimation_operator_1d::<f64>(4).unwrap();
        let h = Hamiltonian::ising(&Lattice::chain(4, Boundary::Free).unwrap(), j);
        let rh = renormalized_hamiltonian(&op, &h).unwrap();
        let fit = rh.fit(&TermBasis::all_up_to_order(2, 2)).unwrap();
        assert!((fit.coupling(&[0, 1]) - 0.382_942_822_864_013_2).abs() < 1e-12);
        assert!(fit.coupling(&[0]).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn block_spin_rules() {
        let lat = Lattice::square(2, 2, Boundary::Free).unwrap();
        let cfg = |v: &[i8]| SpinConfig::new(SpinDomain::PlusMinusOne, v.to_vec()).unwrap();
        assert_eq!(
            block_spin(&cfg(&[1, 1, 1, -1]), &lat).unwrap().values(),
            &[1]
        );
        assert_eq!(
            block_spin(&cfg(&[1, 1, -1, -1]), &lat).unwrap().values(),
            &[1]
        );
        assert_eq!(
            block_spin(&cfg(&[-1, 1, 1, -1]), &lat).unwrap().values(),
            &[-1]
        );
        let big = Lattice::square(4, 4, Boundary::Periodic).unwrap();
        let up = SpinConfig::uniform(SpinDomain::PlusMinusOne, 16, true);
        assert_eq!(
            block_spin(&up, &big).unwrap(),
            SpinConfig::uniform(SpinDomain::PlusMinusOne, 4, true)
        );
        assert!(
            block_spin_operator_2d::<f64>(&Lattice::square(3, 4, Boundary::Free).unwrap()).is_err()
        );
        assert!(matches!(
            block_spin_operator_2d::<f64>(&Lattice::chain(4, Boundary::Free).unwrap()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn block_operator_agrees_with_block_spin() {
        let lat = Lattice::square(4, 4, Boundary::Periodic).unwrap();
        let op = block_spin_operator_2d::<f64>(&lat).unwrap();
        for v in [0u64, 1, 0b1011, 0xF0F0, 0x1234, 0xFFFF] {
            let h = block_spin(
                &SpinConfig::from_index(SpinDomain::PlusMinusOne, 16, v),
                &lat,
            )
            .unwrap();
            assert_eq!(op.weight(v, h.index()), 1.0);
        }
    }

    #[test]
    fn zero_hamiltonian_gives_uniform_hidden_distribution() {
        let op = decimation_operator_1d::<f64>(6).unwrap();
        let rh = renormalized_hamiltonian(&op, &Hamiltonian::new(6)).unwrap();
        assert!(rh.distribution().iter().all(|&p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn scaled_operator_shifts_free_energy_by_log_two() {
        let op = decimation_operator_1d::<f64>(4).unwrap();
        let h = Hamiltonian::ising(&Lattice::chain(4, Boundary::Periodic).unwrap(), 0.9);
        assert!(free_energy_difference(&op, &h).unwrap().abs() < 1e-12);
        let doubled = op.scaled(2.0).unwrap();
        assert!((free_energy_difference(&doubled, &h).unwrap() + 2f64.ln()).abs() < 1e-12);
        assert!((exactness_residual(&doubled).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn table_dump_layout() {
        let op = decimation_operator_1d::<f64>(2).unwrap();
        let mut buf = Vec::new();
        op.write_table(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 * 8);
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 1.0);
    }
}
