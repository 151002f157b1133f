//! Restricted Boltzmann machines with the energy
//!
//! `E(v, h) = Σ_j b_j h_j + Σ_ij v_i w_ij h_j + Σ_i c_i v_i`, `p(v, h) ∝ e^{−E}`.
//!
//! Note the plus signs: a positive weight favors *anti*-aligned `v_i, h_j`.
//! [`RbmParams::to_conventional`] converts to the more common `−E` form.

use crate::enumerate::{kl_divergence, log_sum_exp_range, Enumerator};
use crate::error::{Error, Result};
use crate::scalar::{ln_cosh, sigmoid, softplus, Scalar};
use crate::spin::SpinDomain;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub struct RbmParams<S = f64> {
    /// `b`, one per hidden unit.
    pub hidden_bias: Array1<S>,
    /// `w`, `n_visible × n_hidden`.
    pub weights: Array2<S>,
    /// `c`, one per visible unit.
    pub visible_bias: Array1<S>,
    pub domain: SpinDomain,
}

/// Exact marginal over one layer, by enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginal<S> {
    /// Normalized probabilities in configuration-index order.
    pub probs: Vec<S>,
    /// `−ln Tr_other e^{−E}`: the layer's effective Hamiltonian, with its
    /// additive constant fixed so that `Σ e^{−H} = 𝒵`.
    pub hamiltonian: Vec<S>,
    /// `ln 𝒵` of the joint model.
    pub log_partition: S,
}

impl<S: Scalar> RbmParams<S> {
    pub fn new(
        hidden_bias: Array1<S>,
        weights: Array2<S>,
        visible_bias: Array1<S>,
        domain: SpinDomain,
    ) -> Result<Self> {
        Error::check_dim("RBM hidden bias", weights.ncols(), hidden_bias.len())?;
        Error::check_dim("RBM visible bias", weights.nrows(), visible_bias.len())?;
        let finite = hidden_bias
            .iter()
            .chain(weights.iter())
            .chain(visible_bias.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::validation("RBM parameters must be finite"));
        }
        Ok(Self {
            hidden_bias,
            weights,
            visible_bias,
            domain,
        })
    }

    pub fn zeros(n_visible: usize, n_hidden: usize, domain: SpinDomain) -> Self {
        Self {
            hidden_bias: Array1::zeros(n_hidden),
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            domain,
        }
    }

    /// Weights uniform in `(−0.01, 0.01)·scale`, zero biases.
    pub fn random_init<R: Rng + ?Sized>(
        n_visible: usize,
        n_hidden: usize,
        domain: SpinDomain,
        scale: S,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(n_visible, n_hidden, domain);
        let amp = S::from_f64_lossy(0.01) * scale;
        p.weights
            .mapv_inplace(|_| amp * S::from_f64_lossy(rng.random_range(-1.0..1.0)));
        p
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    /// Parameters of the same distribution under `p ∝ e^{+E}` (all signs flipped).
    pub fn to_conventional(&self) -> Self {
        Self {
            hidden_bias: self.hidden_bias.mapv(|x| -x),
            weights: self.weights.mapv(|x| -x),
            visible_bias: self.visible_bias.mapv(|x| -x),
            domain: self.domain,
        }
    }

    pub fn from_conventional(conventional: &Self) -> Self {
        conventional.to_conventional()
    }

    /// The same model with the roles of visible and hidden layers swapped.
    pub fn transposed(&self) -> Self {
        Self {
            hidden_bias: self.visible_bias.clone(),
            weights: self.weights.t().to_owned(),
            visible_bias: self.hidden_bias.clone(),
            domain: self.domain,
        }
    }

    pub fn energy(&self, v: &[S], h: &[S]) -> Result<S> {
        Error::check_dim("RBM energy (visible)", self.n_visible(), v.len())?;
        Error::check_dim("RBM energy (hidden)", self.n_hidden(), h.len())?;
        Ok(self.energy_unchecked(v, h))
    }

    pub(crate) fn energy_unchecked(&self, v: &[S], h: &[S]) -> S {
        let v = ArrayView1::from(v);
        let h = ArrayView1::from(h);
        self.hidden_bias.dot(&h) + v.dot(&self.weights.dot(&h)) + self.visible_bias.dot(&v)
    }

    /// `a_j = b_j + Σ_i v_i w_ij`.
    pub fn hidden_field(&self, v: ArrayView1<S>) -> Array1<S> {
        v.dot(&self.weights) + &self.hidden_bias
    }

    /// `a_i = c_i + Σ_j w_ij h_j`.
    pub fn visible_field(&self, h: ArrayView1<S>) -> Array1<S> {
        self.weights.dot(&h) + &self.visible_bias
    }

    fn up_probability(&self, field: S) -> S {
        match self.domain {
            SpinDomain::PlusMinusOne => sigmoid(-S::two() * field),
            SpinDomain::ZeroOne => sigmoid(-field),
        }
    }

    /// Probability of a unit with local field `field` being in the given
    /// state, without forming `1 − p` for the down state.
    pub(crate) fn state_probability(&self, field: S, up: bool) -> S {
        let f = if up { field } else { -field };
        match self.domain {
            SpinDomain::PlusMinusOne => sigmoid(-S::two() * f),
            SpinDomain::ZeroOne => sigmoid(-f),
        }
    }

    /// `p(h_j = up | v)` for every hidden unit.
    pub fn cond_hidden_given_visible(&self, v: &[S]) -> Result<Array1<S>> {
        Error::check_dim("p(h|v)", self.n_visible(), v.len())?;
        Ok(self
            .hidden_field(ArrayView1::from(v))
            .mapv(|a| self.up_probability(a)))
    }

    /// `p(v_i = up | h)` for every visible unit.
    pub fn cond_visible_given_hidden(&self, h: &[S]) -> Result<Array1<S>> {
        Error::check_dim("p(v|h)", self.n_hidden(), h.len())?;
        Ok(self
            .visible_field(ArrayView1::from(h))
            .mapv(|a| self.up_probability(a)))
    }

    /// Row-wise `p(h = up | v)` for a batch of visible rows.
    pub fn hidden_probs_batch(&self, v: ArrayView2<S>) -> Array2<S> {
        let mut a = v.dot(&self.weights);
        a += &self.hidden_bias;
        a.mapv_inplace(|x| self.up_probability(x));
        a
    }

    /// Row-wise `p(v = up | h)` for a batch of hidden rows.
    pub fn visible_probs_batch(&self, h: ArrayView2<S>) -> Array2<S> {
        let mut a = h.dot(&self.weights.t());
        a += &self.visible_bias;
        a.mapv_inplace(|x| self.up_probability(x));
        a
    }

    /// Expected spin values from up-probabilities.
    pub fn mean_states(&self, probs: &Array2<S>) -> Array2<S> {
        probs.mapv(|p| self.domain.mean_from_up_probability(p))
    }

    /// Draws spin states from up-probabilities.
    pub fn sample_states<R: Rng + ?Sized>(&self, probs: &Array2<S>, rng: &mut R) -> Array2<S> {
        let (up, down) = (
            S::from_i8(self.domain.up()).unwrap(),
            S::from_i8(self.domain.down()).unwrap(),
        );
        probs.mapv(|p| {
            if S::from_f64_lossy(rng.random::<f64>()) < p {
                up
            } else {
                down
            }
        })
    }

    fn log_trace_unit(&self, field: S) -> S {
        match self.domain {
            SpinDomain::PlusMinusOne => S::from_f64_lossy(std::f64::consts::LN_2) + ln_cosh(field),
            SpinDomain::ZeroOne => softplus(-field),
        }
    }

    /// `ln Σ_h e^{−E(v, h)}`, summing each hidden unit in closed form.
    pub fn log_trace_hidden(&self, v: &[S]) -> S {
        let vv = ArrayView1::from(v);
        -self.visible_bias.dot(&vv)
            + self
                .hidden_field(vv)
                .iter()
                .map(|&a| self.log_trace_unit(a))
                .sum::<S>()
    }

    /// `ln Σ_v e^{−E(v, h)}`.
    pub fn log_trace_visible(&self, h: &[S]) -> S {
        let hv = ArrayView1::from(h);
        -self.hidden_bias.dot(&hv)
            + self
                .visible_field(hv)
                .iter()
                .map(|&a| self.log_trace_unit(a))
                .sum::<S>()
    }

    fn enumerator(&self) -> Enumerator {
        Enumerator::new(self.domain)
    }

    /// Normalized `p(v, h)`, row-major with index `v · 2^M + h`.
    pub fn exact_joint(&self) -> Result<Vec<S>> {
        let (n, m) = (self.n_visible(), self.n_hidden());
        let en = self.enumerator();
        en.check("RBM joint", n + m)?;
        let log_w: Vec<S> = en.tabulate("RBM joint", n + m, |k| {
            let v = en.spins(k >> m, n);
            let h = en.spins(k & ((1 << m) - 1), m);
            -self.energy_unchecked(&v, &h)
        })?;
        Ok(crate::enumerate::normalize_log_weights(&log_w))
    }

    fn layer_marginal(
        &self,
        n_layer: usize,
        log_trace: impl Fn(&[S]) -> S + Sync,
    ) -> Result<Marginal<S>> {
        let en = self.enumerator();
        en.check("RBM marginal", self.n_visible() + self.n_hidden())?;
        let log_w = en.tabulate("RBM marginal", n_layer, |k| {
            log_trace(&en.spins(k, n_layer))
        })?;
        let log_partition = log_sum_exp_range(log_w.len() as u64, |k| log_w[k as usize]);
        Ok(Marginal {
            probs: log_w.iter().map(|&x| (x - log_partition).exp()).collect(),
            hamiltonian: log_w.iter().map(|&x| -x).collect(),
            log_partition,
        })
    }

    /// `p(v) = Tr_h p(v, h)` and `H^RBM[v]`.
    pub fn exact_visible_marginal(&self) -> Result<Marginal<S>> {
        self.layer_marginal(self.n_visible(), |v| self.log_trace_hidden(v))
    }

    /// `p(h) = Tr_v p(v, h)` and `H^RBM[h]`.
    pub fn exact_hidden_marginal(&self) -> Result<Marginal<S>> {
        self.layer_marginal(self.n_hidden(), |h| self.log_trace_visible(h))
    }

    /// `D_KL(P ‖ p_λ)` over visible configurations; `+∞` if `p_λ` misses
    /// part of the support of `P`.
    pub fn exact_kl(&self, p_data: &[S]) -> Result<S> {
        Error::check_dim(
            "KL data distribution",
            1usize << self.n_visible().min(63),
            p_data.len(),
        )?;
        kl_divergence(p_data, &self.exact_visible_marginal()?.probs)
    }

    /// `Σ_v P(v) ln p_λ(v)`.
    pub fn exact_log_likelihood(&self, p_data: &[S]) -> Result<S> {
        let marg = self.exact_visible_marginal()?;
        Error::check_dim(
            "log-likelihood data distribution",
            marg.probs.len(),
            p_data.len(),
        )?;
        Ok(p_data
            .iter()
            .zip(&marg.probs)
            .filter(|(&p, _)| p > S::zero())
            .map(|(&p, &q)| p * q.ln())
            .sum())
    }

    /// Exact gradient of [`RbmParams::exact_log_likelihood`] (ascent direction).
    pub fn exact_gradient(&self, p_data: &[S]) -> Result<RbmGradient<S>> {
        let marg = self.exact_visible_marginal()?;
        Error::check_dim("gradient data distribution", marg.probs.len(), p_data.len())?;
        let en = self.enumerator();
        let n = self.n_visible();
        let mut grad = RbmGradient::zeros_like(self);
        for (k, (&pd, &pm)) in p_data.iter().zip(&marg.probs).enumerate() {
            // weight of this v in ⟨·⟩_model − ⟨·⟩_data
            let coeff = pm - pd;
            if coeff == S::zero() {
                continue;
            }
            let v = Array1::from(en.spins::<S>(k as u64, n));
            let h_mean = self
                .hidden_field(v.view())
                .mapv(|a| self.domain.mean_from_up_probability(self.up_probability(a)));
            grad.hidden_bias.scaled_add(coeff, &h_mean);
            grad.visible_bias.scaled_add(coeff, &v);
            Zip::from(&mut grad.weights)
                .and(
                    &v.view()
                        .insert_axis(Axis(1))
                        .broadcast((n, self.n_hidden()))
                        .unwrap(),
                )
                .and(
                    &h_mean
                        .view()
                        .insert_axis(Axis(0))
                        .broadcast((n, self.n_hidden()))
                        .unwrap(),
                )
                .for_each(|g, &vi, &hj| *g += coeff * vi * hj);
        }
        Ok(grad)
    }

    /// CD-k estimate of the log-likelihood gradient on one minibatch.
    ///
    /// Data phase uses `E[h | v]`; the model phase uses the sampled states
    /// after `k` Gibbs steps started from the data.
    pub fn cd_gradient<R: Rng + ?Sized>(
        &self,
        batch: ArrayView2<S>,
        k: usize,
        rng: &mut R,
    ) -> Result<RbmGradient<S>> {
        Ok(self.cd_statistics(batch, k, rng)?.0)
    }

    /// Gradient estimate plus the summed squared error of the one-step
    /// mean-field reconstruction of the batch.
    fn cd_statistics<R: Rng + ?Sized>(
        &self,
        batch: ArrayView2<S>,
        k: usize,
        rng: &mut R,
    ) -> Result<(RbmGradient<S>, S)> {
        if batch.nrows() == 0 {
            return Err(Error::validation("empty minibatch"));
        }
        Error::check_dim("minibatch width", self.n_visible(), batch.ncols())?;
        if k == 0 {
            return Err(Error::validation("cd_k must be at least 1"));
        }
        let rows = S::from_usize_lossy(batch.nrows());
        let h0_probs = self.hidden_probs_batch(batch);
        let h0_mean = self.mean_states(&h0_probs);
        let mut h = self.sample_states(&h0_probs, rng);
        let mut v = batch.to_owned();
        let mut recon_err = S::zero();
        for step in 0..k {
            let v_probs = self.visible_probs_batch(h.view());
            if step == 0 {
                let v_mean = self.mean_states(&v_probs);
                recon_err = Zip::from(&v_mean)
                    .and(&batch)
                    .fold(S::zero(), |acc, &a, &b| acc + (a - b) * (a - b));
            }
            v = self.sample_states(&v_probs, rng);
            h = self.sample_states(&self.hidden_probs_batch(v.view()), rng);
        }
        let weights = (v.t().dot(&h) - batch.t().dot(&h0_mean)) / rows;
        let hidden_bias = (h.sum_axis(Axis(0)) - h0_mean.sum_axis(Axis(0))) / rows;
        let visible_bias = (v.sum_axis(Axis(0)) - batch.sum_axis(Axis(0))) / rows;
        Ok((
            RbmGradient {
                hidden_bias,
                weights,
                visible_bias,
            },
            recon_err,
        ))
    }

    /// One momentum step of CD-k followed by L1 soft-thresholding of the
    /// weights by `learning_rate · l1_strength`.
    pub fn cd_k_update<R: Rng + ?Sized>(
        &mut self,
        velocity: &mut RbmGradient<S>,
        batch: ArrayView2<S>,
        cfg: &TrainConfig<S>,
        rng: &mut R,
    ) -> Result<S> {
        let (grad, recon) = self.cd_statistics(batch, cfg.cd_k, rng)?;
        velocity.scale_add(cfg.momentum, cfg.learning_rate, &grad);
        self.hidden_bias += &velocity.hidden_bias;
        self.weights += &velocity.weights;
        self.visible_bias += &velocity.visible_bias;
        let shrink = cfg.learning_rate * cfg.l1_strength;
        if shrink > S::zero() {
            self.weights
                .mapv_inplace(|w| w.signum() * (w.abs() - shrink).max(S::zero()));
        }
        Ok(recon)
    }

    /// Full CD training schedule from these parameters.
    pub fn train(&self, data: ArrayView2<S>, cfg: &TrainConfig<S>) -> Result<TrainOutcome<S>> {
        cfg.validate()?;
        Error::check_dim("training data width", self.n_visible(), data.ncols())?;
        let (up, down) = (
            S::from_i8(self.domain.up()).unwrap(),
            S::from_i8(self.domain.down()).unwrap(),
        );
        if data.iter().any(|&x| x != up && x != down) {
            return Err(Error::domain(format!(
                "training data is not in the {} domain",
                self.domain
            )));
        }
        let mut params = self.clone();
        let mut velocity = RbmGradient::zeros_like(self);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..data.nrows()).collect();
        let mut reconstruction_error = Vec::with_capacity(cfg.epochs);
        let per_entry = S::from_usize_lossy(data.len().max(1));
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut err = S::zero();
            for chunk in order.chunks(cfg.minibatch) {
                let batch = data.select(Axis(0), chunk);
                err += params.cd_k_update(&mut velocity, batch.view(), cfg, &mut rng)?;
            }
            reconstruction_error.push(err / per_entry);
        }
        Ok(TrainOutcome {
            params,
            reconstruction_error,
        })
    }
}

/// Fresh RBM with `n_hidden` units trained on `data`; the initialization is
/// drawn from `cfg.seed` (stream 0), training noise from stream 1.
pub fn train<S: Scalar>(
    data: ArrayView2<S>,
    n_hidden: usize,
    domain: SpinDomain,
    cfg: &TrainConfig<S>,
) -> Result<TrainOutcome<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = RbmParams::random_init(data.ncols(), n_hidden, domain, cfg.init_scale, &mut rng);
    init.train(data, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<S> {
    pub params: RbmParams<S>,
    /// Mean squared one-step reconstruction error per epoch.
    pub reconstruction_error: Vec<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct TrainConfig<S = f64> {
    pub learning_rate: S,
    pub momentum: S,
    pub minibatch: usize,
    pub epochs: usize,
    pub cd_k: usize,
    pub l1_strength: S,
    pub seed: u64,
    /// Multiplier on the ±0.01 uniform weight initialization.
    #[serde(default = "unit_scale")]
    pub init_scale: S,
}

fn unit_scale<S: Scalar>() -> S {
    S::one()
}

impl<S: Scalar> Default for TrainConfig<S> {
    fn default() -> Self {
        Self {
            learning_rate: S::from_f64_lossy(0.05),
            momentum: S::from_f64_lossy(0.5),
            minibatch: 100,
            epochs: 200,
            cd_k: 1,
            l1_strength: S::from_f64_lossy(2e-4),
            seed: 0,
            init_scale: S::one(),
        }
    }
}

impl<S: Scalar> TrainConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= S::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::validation(
                "learning_rate must be finite and non-negative",
            ));
        }
        if !(self.momentum >= S::zero() && self.momentum < S::one()) {
            return Err(Error::validation("momentum must lie in [0, 1)"));
        }
        if self.minibatch == 0 {
            return Err(Error::validation("minibatch must be at least 1"));
        }
        if self.cd_k == 0 {
            return Err(Error::validation("cd_k must be at least 1"));
        }
        if !(self.l1_strength >= S::zero()) {
            return Err(Error::validation("l1_strength must be non-negative"));
        }
        Ok(())
    }
}

/// A direction in parameter space, laid out like [`RbmParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct RbmGradient<S = f64> {
    pub hidden_bias: Array1<S>,
    pub weights: Array2<S>,
    pub visible_bias: Array1<S>,
}

impl<S: Scalar> RbmGradient<S> {
    pub fn zeros_like(p: &RbmParams<S>) -> Self {
        Self {
            hidden_bias: Array1::zeros(p.n_hidden()),
            weights: Array2::zeros((p.n_visible(), p.n_hidden())),
            visible_bias: Array1::zeros(p.n_visible()),
        }
    }

    /// `self ← decay·self + step·other`.
    pub fn scale_add(&mut self, decay: S, step: S, other: &Self) {
        self.hidden_bias
            .zip_mut_with(&other.hidden_bias, |a, &b| *a = decay * *a + step * b);
        self.weights
            .zip_mut_with(&other.weights, |a, &b| *a = decay * *a + step * b);
        self.visible_bias
            .zip_mut_with(&other.visible_bias, |a, &b| *a = decay * *a + step * b);
    }

    pub fn dot(&self, other: &Self) -> S {
        self.hidden_bias.dot(&other.hidden_bias)
            + (&self.weights * &other.weights).sum()
            + self.visible_bias.dot(&other.visible_bias)
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }
}
