//! The correspondence `T(v, h) = −E(v, h) + H[v]` between a Boltzmann
//! machine and a variational RG operator, checked by exact enumeration.
//!
//! Everything here is enumeration-based; no Monte Carlo enters, so every
//! residual reported is floating-point error only.

use crate::enumerate::{kl_divergence, log_sum_exp_range, total_variation, Enumerator};
use crate::error::{Error, Result};
use crate::rbm::{Marginal, RbmParams};
use crate::rg::{exactness_residual, free_energy_difference, renormalized_hamiltonian, RgOperator};
use crate::scalar::Scalar;
use crate::spin::{Hamiltonian, SpinDomain};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// An RBM energy plus an optional visible-visible interaction:
/// `E(v, h) = E_RBM(v, h) + H_vv[v]`. With `H_vv = 0` this is a plain RBM.
#[derive(Clone, Debug, PartialEq)]
pub struct BoltzmannMachine<S = f64> {
    rbm: RbmParams<S>,
    visible_coupling: Hamiltonian<S>,
}

impl<S: Scalar> From<RbmParams<S>> for BoltzmannMachine<S> {
    fn from(rbm: RbmParams<S>) -> Self {
        let n = rbm.n_visible();
        Self {
            rbm,
            visible_coupling: Hamiltonian::new(n),
        }
    }
}

impl<S: Scalar> BoltzmannMachine<S> {
    pub fn with_visible_coupling(
        rbm: RbmParams<S>,
        visible_coupling: Hamiltonian<S>,
    ) -> Result<Self> {
        Error::check_dim(
            "visible coupling",
            rbm.n_visible(),
            visible_coupling.n_sites(),
        )?;
        Ok(Self {
            rbm,
            visible_coupling,
        })
    }

    pub fn rbm(&self) -> &RbmParams<S> {
        &self.rbm
    }

    pub fn visible_coupling(&self) -> &Hamiltonian<S> {
        &self.visible_coupling
    }

    pub fn is_restricted(&self) -> bool {
        self.visible_coupling.terms().is_empty()
    }

    pub fn n_visible(&self) -> usize {
        self.rbm.n_visible()
    }

    pub fn n_hidden(&self) -> usize {
        self.rbm.n_hidden()
    }

    pub fn domain(&self) -> SpinDomain {
        self.rbm.domain
    }

    pub(crate) fn energy_unchecked(&self, v: &[S], h: &[S]) -> S {
        self.rbm.energy_unchecked(v, h) + self.visible_coupling.energy_of_scalars(v)
    }

    pub fn energy(&self, v: &[S], h: &[S]) -> Result<S> {
        Ok(self.rbm.energy(v, h)? + self.visible_coupling.energy_of_scalars(v))
    }

    /// `ln Tr_h e^{−E(v, h)}`; hidden units stay conditionally independent.
    pub fn log_trace_hidden(&self, v: &[S]) -> S {
        self.rbm.log_trace_hidden(v) - self.visible_coupling.energy_of_scalars(v)
    }

    /// `p(h_j = up | v)`.
    pub fn cond_hidden_given_visible(&self, v: &[S]) -> Result<Array1<S>> {
        self.rbm.cond_hidden_given_visible(v)
    }

    pub fn exact_visible_marginal(&self) -> Result<Marginal<S>> {
        if self.is_restricted() {
            return self.rbm.exact_visible_marginal();
        }
        let en = Enumerator::new(self.domain());
        en.check("machine marginal", self.n_visible() + self.n_hidden())?;
        let n = self.n_visible();
        let log_w = en.tabulate("machine marginal", n, |k| {
            self.log_trace_hidden(&en.spins(k, n))
        })?;
        Ok(marginal_from_log_weights(log_w))
    }

    /// Hidden marginal. For a restricted machine the visible trace is done
    /// in closed form; otherwise the joint is enumerated.
    pub fn exact_hidden_marginal(&self) -> Result<Marginal<S>> {
        if self.is_restricted() {
            return self.rbm.exact_hidden_marginal();
        }
        let en = Enumerator::new(self.domain());
        let (n, m) = (self.n_visible(), self.n_hidden());
        en.check("machine marginal", n + m)?;
        let log_w = en.tabulate("machine marginal", m, |hk| {
            let h = en.spins::<S>(hk, m);
            log_sum_exp_range(1 << n, |vk| -self.energy_unchecked(&en.spins(vk, n), &h))
        })?;
        Ok(marginal_from_log_weights(log_w))
    }

    /// `H^RBM[v] = −ln Tr_h e^{−E}` expanded into interaction terms, so it
    /// can serve as a data Hamiltonian. Its constant satisfies
    /// `Σ_v e^{−H^RBM} = 𝒵`.
    pub fn visible_hamiltonian(&self) -> Result<Hamiltonian<S>> {
        let marg = self.exact_visible_marginal()?;
        Hamiltonian::from_energy_table(self.n_visible(), self.domain(), &marg.hamiltonian)
    }
}

fn marginal_from_log_weights<S: Scalar>(log_w: Vec<S>) -> Marginal<S> {
    let log_partition = log_sum_exp_range(log_w.len() as u64, |k| log_w[k as usize]);
    Marginal {
        probs: log_w.iter().map(|&x| (x - log_partition).exp()).collect(),
        hamiltonian: log_w.iter().map(|&x| -x).collect(),
        log_partition,
    }
}

/// `T(v, h) = −E(v, h) + H_data[v]`.
pub fn rg_operator_from_rbm<S: Scalar>(
    machine: impl Into<BoltzmannMachine<S>>,
    data: &Hamiltonian<S>,
) -> Result<RgOperator<S>> {
    RgOperator::induced(machine.into(), data.clone())
}

/// Residuals of the RBM ↔ RG correspondence for one `(machine, H_data)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingReport {
    /// `max_v |Tr_h e^{T} − 1|`.
    pub exactness_residual: f64,
    /// Total variation between `e^{−H^RG}/Z` and the machine's hidden marginal.
    pub hidden_distribution_distance: f64,
    /// Largest relative misfit of `e^{T} = p(h|v) e^{H − H^RBM}`.
    pub conditional_identity_residual: f64,
    /// `F^h − F^v`.
    pub delta_f: f64,
    /// `D_KL(Boltzmann(H_data) ‖ p_λ(v))`.
    pub kl_visible: f64,
}

/// Hidden distribution computed from `Tr_v e^{T − H}` and directly from
/// the machine; returns their total-variation distance.
pub fn verify_hidden_hamiltonian_equality<S: Scalar>(
    machine: &BoltzmannMachine<S>,
    data: &Hamiltonian<S>,
) -> Result<S> {
    let op = rg_operator_from_rbm(machine.clone(), data)?;
    let via_rg = renormalized_hamiltonian(&op, data)?.distribution();
    let direct = machine.exact_hidden_marginal()?.probs;
    total_variation(&via_rg, &direct)
}

/// `max_{v,h} |e^{T} − p(h|v) e^{H[v] − H^RBM[v]}| / max(1, e^{T})`.
///
/// The left side is evaluated from the energy, the right side from the
/// factorized conditional and the closed-form hidden trace.
pub fn conditional_identity_residual<S: Scalar>(
    machine: &BoltzmannMachine<S>,
    data: &Hamiltonian<S>,
) -> Result<S> {
    Error::check_dim(
        "data Hamiltonian vs visible layer",
        machine.n_visible(),
        data.n_sites(),
    )?;
    let en = Enumerator::new(machine.domain());
    let (n, m) = (machine.n_visible(), machine.n_hidden());
    en.check("conditional identity", n + m)?;
    let h_rbm = machine.exact_visible_marginal()?.hamiltonian;
    let mut worst = S::zero();
    for vk in 0..1u64 << n {
        let v = en.spins::<S>(vk, n);
        let hv = data.energy_of_scalars(&v);
        let rbm = machine.rbm();
        let fields = rbm.hidden_field(ArrayView1::from(&v[..]));
        let scale = (hv - h_rbm[vk as usize]).exp();
        for hk in 0..1u64 << m {
            let h = en.spins::<S>(hk, m);
            let e_t = (hv - machine.energy_unchecked(&v, &h)).exp();
            let cond = (0..m)
                .map(|j| rbm.state_probability(fields[j], hk >> j & 1 == 1))
                .fold(S::one(), |a, b| a * b);
            let r = (e_t - cond * scale).abs() / e_t.max(S::one());
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Runs every check of the correspondence on one instance.
pub fn verify_mapping<S: Scalar>(
    machine: &BoltzmannMachine<S>,
    data: &Hamiltonian<S>,
) -> Result<MappingReport> {
    let op = rg_operator_from_rbm(machine.clone(), data)?;
    let p_data = Enumerator::new(machine.domain()).boltzmann(data)?;
    let p_model = machine.exact_visible_marginal()?.probs;
    Ok(MappingReport {
        exactness_residual: exactness_residual(&op)?.to_f64_lossy(),
        hidden_distribution_distance: verify_hidden_hamiltonian_equality(machine, data)?
            .to_f64_lossy(),
        conditional_identity_residual: conditional_identity_residual(machine, data)?.to_f64_lossy(),
        delta_f: free_energy_difference(&op, data)?.to_f64_lossy(),
        kl_visible: kl_divergence(&p_data, &p_model)?.to_f64_lossy(),
    })
}

/// Random instance: RBM parameters i.i.d. `N(0,1)`, a data Hamiltonian with
/// `N(0,1)` couplings on every visible pair, and optionally an extra
/// `N(0,1)` visible-visible energy term on every pair.
pub fn random_instance<S: Scalar, R: Rng + ?Sized>(
    n_visible: usize,
    n_hidden: usize,
    visible_coupling: bool,
    rng: &mut R,
) -> (BoltzmannMachine<S>, Hamiltonian<S>) {
    let mut normal = || S::from_f64_lossy(StandardNormal.sample(rng));
    let b = Array1::from_shape_fn(n_hidden, |_| normal());
    let w = Array2::from_shape_fn((n_visible, n_hidden), |_| normal());
    let c = Array1::from_shape_fn(n_visible, |_| normal());
    let rbm =
        RbmParams::new(b, w, c, SpinDomain::PlusMinusOne).expect("finite Gaussian parameters");
    let mut pairs = |h: &mut Hamiltonian<S>| {
        for i in 0..n_visible {
            for j in i + 1..n_visible {
                h.add_term(vec![i, j], normal()).expect("valid pair");
            }
        }
    };
    let mut data = Hamiltonian::new(n_visible);
    pairs(&mut data);
    let mut extra = Hamiltonian::new(n_visible);
    if visible_coupling {
        pairs(&mut extra);
    }
    let machine = BoltzmannMachine::with_visible_coupling(rbm, extra).expect("matching sizes");
    (machine, data)
}

/// Worst-case residuals over a batch of random instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub instances: usize,
    pub max_hidden_distribution_distance: f64,
    pub max_conditional_identity_residual: f64,
    /// Worst KL when the data Hamiltonian is the machine's own `H^RBM`.
    pub max_kl_when_exact: f64,
    /// Worst exactness residual when the data Hamiltonian is `H^RBM`.
    pub max_exactness_residual_when_exact: f64,
}

/// Random instances with `1..=max_visible` visible and `1..=max_hidden`
/// hidden units; each is checked against a random pair Hamiltonian and
/// again against its own extracted `H^RBM`.
pub fn verification_suite<R: Rng + ?Sized>(
    instances: usize,
    max_visible: usize,
    max_hidden: usize,
    visible_coupling: bool,
    rng: &mut R,
) -> Result<SuiteSummary> {
    let mut s = SuiteSummary {
        instances,
        max_hidden_distribution_distance: 0.0,
        max_conditional_identity_residual: 0.0,
        max_kl_when_exact: 0.0,
        max_exactness_residual_when_exact: 0.0,
    };
    for _ in 0..instances {
        let n = rng.random_range(1..=max_visible);
        let m = rng.random_range(1..=max_hidden);
        let (machine, data) = random_instance::<f64, _>(n, m, visible_coupling, rng);
        s.max_hidden_distribution_distance = s
            .max_hidden_distribution_distance
            .max(verify_hidden_hamiltonian_equality(&machine, &data)?);
        s.max_conditional_identity_residual = s
            .max_conditional_identity_residual
            .max(conditional_identity_residual(&machine, &data)?);
        let own = machine.visible_hamiltonian()?;
        let exact = verify_mapping(&machine, &own)?;
        s.max_kl_when_exact = s.max_kl_when_exact.max(exact.kl_visible);
        s.max_exactness_residual_when_exact = s
            .max_exactness_residual_when_exact
            .max(exact.exactness_residual);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rg::decimation_step_coupling;
    use crate::spin::{Boundary, Lattice};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rbm_with_zero_hamiltonian() {
        let machine: BoltzmannMachine<f64> =
            RbmParams::zeros(3, 2, SpinDomain::PlusMinusOne).into();
        let op = rg_operator_from_rbm(machine.clone(), &Hamiltonian::new(3)).unwrap();
        assert!(op.to_table().unwrap().iter().all(|&x| x == 1.0));
        assert!((op.log_trace_hidden(5).exp() - 4.0).abs() < 1e-15);
        let report = verify_mapping(&machine, &Hamiltonian::new(3)).unwrap();
        assert!((report.exactness_residual - 3.0).abs() < 1e-14);
        assert!(report.hidden_distribution_distance < 1e-15);
    }

    #[test]
    fn zero_params_give_uniform_hidden_distributions() {
        let machine: BoltzmannMachine<f64> =
            RbmParams::zeros(3, 2, SpinDomain::PlusMinusOne).into();
        let data = Hamiltonian::ising(&Lattice::chain(3, Boundary::Free).unwrap(), 1.3);
        let op = rg_operator_from_rbm(machine.clone(), &data).unwrap();
        let via_rg = renormalized_hamiltonian(&op, &data).unwrap().distribution();
        assert!(via_rg.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!(verify_hidden_hamiltonian_equality(&machine, &data).unwrap() < 1e-15);
    }

    #[test]
    fn single_spin_matching_makes_operator_exact() {
        // Data: H = −K v. For N = M = 1 with b = c = 0 the RBM visible
        // marginal is uniform, so the visible field c must carry K:
        // −ln Tr_h e^{−E} = c v − ln(2 cosh w) + const. Choose c = −K.
        let k = 0.8;
        let w = 0.6;
        let rbm = RbmParams::new(
            array![0.0],
            array![[w]],
            array![-k],
            SpinDomain::PlusMinusOne,
        )
        .unwrap();
        let machine: BoltzmannMachine<f64> = rbm.into();
        let mut data = Hamiltonian::new(1);
        data.add_term(vec![0], k).unwrap();
        // Add the constant so that H = H^RBM exactly: −ln(2 cosh w).
        data.add_term(vec![], (2.0 * w.cosh()).ln()).unwrap();
        let op = rg_operator_from_rbm(machine.clone(), &data).unwrap();
        for v in 0..2 {
            assert!((op.log_trace_hidden(v).exp() - 1.0).abs() < 1e-14);
        }
        assert!(verify_mapping(&machine, &data).unwrap().kl_visible < 1e-14);
    }

    #[test]
    fn extracted_rbm_hamiltonian_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let (machine, _) = random_instance::<f64, _>(4, 3, false, &mut rng);
            let own = machine.visible_hamiltonian().unwrap();
            let report = verify_mapping(&machine, &own).unwrap();
            assert!(report.exactness_residual <= 1e-10, "{report:?}");
            assert!(report.delta_f.abs() <= 1e-10);
            assert!(report.kl_visible <= 1e-8);
            // exact case: e^T is exactly p(h|v)
            let op = rg_operator_from_rbm(machine.clone(), &own).unwrap();
            let v = Enumerator::default().spins::<f64>(3, 4);
            let up = machine.cond_hidden_given_visible(&v).unwrap();
            let p_h0: f64 = (0..3).map(|j| 1.0 - up[j]).product();
            assert!((op.weight(3, 0) - p_h0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_instances_satisfy_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (machine, data) = random_instance::<f64, _>(4, 3, false, &mut rng);
        assert!(verify_hidden_hamiltonian_equality(&machine, &data).unwrap() <= 1e-12);
        assert!(conditional_identity_residual(&machine, &data).unwrap() <= 1e-10);
        let report = verify_mapping(&machine, &data).unwrap();
        assert!(report.exactness_residual > 0.0);
        assert!(report.kl_visible > 0.0);
    }

    #[test]
    fn decimation_as_deterministic_coupling_gives_decimated_chain() {
        let j = 0.9;
        let data = Hamiltonian::ising(&Lattice::chain(8, Boundary::Periodic).unwrap(), j);
        let op = crate::rg::decimation_operator_1d::<f64>(8).unwrap();
        let hidden = renormalized_hamiltonian(&op, &data).unwrap().distribution();
        let jp = decimation_step_coupling(j).unwrap();
        let expected = Enumerator::default()
            .boltzmann(&Hamiltonian::ising_chain(4, jp, Boundary::Periodic).unwrap())
            .unwrap();
        assert!(total_variation(&hidden, &expected).unwrap() < 1e-12);
    }

    #[test]
    fn general_boltzmann_machine_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (machine, data) = random_instance::<f64, _>(5, 3, true, &mut rng);
        assert!(!machine.is_restricted());
        assert!(verify_hidden_hamiltonian_equality(&machine, &data).unwrap() <= 1e-12);
        assert!(conditional_identity_residual(&machine, &data).unwrap() <= 1e-10);
    }
}
