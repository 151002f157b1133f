//! Stacked RBMs: greedy layer-wise training, up/down passes, effective
//! receptive fields, and the exact decimation network of the 1D chain.

use crate::enumerate::{total_variation, Enumerator};
use crate::error::{Error, Result};
use crate::rbm::{self, RbmParams, TrainConfig};
use crate::rg::{decimation_operator_1d, rg_flow, OperatorRepr, RgFlow, RgOperator};
use crate::scalar::Scalar;
use crate::spin::{Boundary, Hamiltonian, Lattice, LatticeKind, SpinConfig, SpinDomain};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Ordered RBM layers; layer `l` maps `n^(l)` units onto `n^(l+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DnnStack<S = f64> {
    layers: Vec<RbmParams<S>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagationMode {
    /// Draw binary states from each conditional.
    Sample,
    /// Pass expected spin values; deterministic.
    Mean,
}

/// Activity of one hidden layer during an up-pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerActivity<S> {
    /// `p(h = up | layer below)`.
    pub probabilities: Array1<S>,
    /// Values handed to the next layer: sampled spins or expected spins.
    pub states: Array1<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction<S> {
    /// Per-site probability of the up state after the down-pass.
    pub probabilities: Array1<S>,
    /// Probabilities thresholded at 0.5.
    pub config: SpinConfig,
}

impl<S: Scalar> DnnStack<S> {
    pub fn new(layers: Vec<RbmParams<S>>) -> Result<Self> {
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].n_hidden() != pair[1].n_visible() {
                return Err(Error::validation(format!(
                    "layer {l} has {} hidden units but layer {} has {} visible units",
                    pair[0].n_hidden(),
                    l + 1,
                    pair[1].n_visible()
                )));
            }
            if pair[0].domain != pair[1].domain {
                return Err(Error::validation("all layers must share one spin domain"));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[RbmParams<S>] {
        &self.layers
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn domain(&self) -> Option<SpinDomain> {
        self.layers.first().map(|l| l.domain)
    }

    /// `n^(0), …, n^(L)`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.layers.iter().map(|l| l.n_visible()).collect();
        if let Some(last) = self.layers.last() {
            sizes.push(last.n_hidden());
        }
        sizes
    }

    /// `n^(0) / n^(L)`.
    pub fn compression_ratio(&self) -> f64 {
        let sizes = self.layer_sizes();
        match (sizes.first(), sizes.last()) {
            (Some(&a), Some(&b)) if b > 0 => a as f64 / b as f64,
            _ => 1.0,
        }
    }

    fn check_input(&self, width: usize) -> Result<&RbmParams<S>> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| Error::validation("the stack has no layers"))?;
        Error::check_dim("stack input", first.n_visible(), width)?;
        Ok(first)
    }

    /// Sequential conditional pass from the visible layer to the top.
    pub fn propagate_up<R: Rng + ?Sized>(
        &self,
        v: &[S],
        mode: PropagationMode,
        rng: &mut R,
    ) -> Result<Vec<LayerActivity<S>>> {
        self.check_input(v.len())?;
        let mut input = Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row shape");
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let probs = layer.hidden_probs_batch(input.view());
            let states = match mode {
                PropagationMode::Mean => layer.mean_states(&probs),
                PropagationMode::Sample => layer.sample_states(&probs, rng),
            };
            out.push(LayerActivity {
                probabilities: probs.row(0).to_owned(),
                states: states.row(0).to_owned(),
            });
            input = states;
        }
        Ok(out)
    }

    /// Mean-field up-pass to the top layer, then mean-field down-pass.
    /// Returns per-site up-probabilities, one row per input row.
    pub fn reconstruct_batch(&self, v: ArrayView2<S>) -> Result<Array2<S>> {
        self.check_input(v.ncols())?;
        let mut act = v.to_owned();
        for layer in &self.layers {
            act = layer.mean_states(&layer.hidden_probs_batch(act.view()));
        }
        let mut probs = act.clone();
        for layer in self.layers.iter().rev() {
            probs = layer.visible_probs_batch(act.view());
            act = layer.mean_states(&probs);
        }
        Ok(probs)
    }

    pub fn reconstruct(&self, v: &[S]) -> Result<Reconstruction<S>> {
        let first = self.check_input(v.len())?;
        let domain = first.domain;
        let row = Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row shape");
        let probabilities = self.reconstruct_batch(row.view())?.row(0).to_owned();
        let values = probabilities
            .iter()
            .map(|&p| domain.from_bit(p > S::half()))
            .collect();
        Ok(Reconstruction {
            config: SpinConfig::new(domain, values)?,
            probabilities,
        })
    }
}

/// Pearson correlation between the magnetization of each input row and
/// the expected magnetization of its reconstruction. Zero when either side
/// has no variance.
pub fn reconstruction_magnetization_correlation<S: Scalar>(
    inputs: ArrayView2<S>,
    probabilities: ArrayView2<S>,
) -> Result<f64> {
    Error::check_dim("reconstruction rows", inputs.nrows(), probabilities.nrows())?;
    Error::check_dim(
        "reconstruction width",
        inputs.ncols(),
        probabilities.ncols(),
    )?;
    if inputs.nrows() == 0 {
        return Err(Error::validation("no rows to correlate"));
    }
    // the correlation is affine invariant, so up-fractions serve for both domains
    let up = inputs.iter().copied().fold(S::neg_infinity(), S::max);
    let xs: Vec<f64> = inputs
        .rows()
        .into_iter()
        .map(|r| r.iter().filter(|&&x| x == up).count() as f64 / r.len() as f64)
        .collect();
    let ys: Vec<f64> = probabilities
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|p| p.to_f64_lossy()).sum::<f64>() / r.len() as f64)
        .collect();
    Ok(pearson(&xs, &ys))
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Sampled hidden states of `params` for every row of `input`; the inputs
/// to the next layer during greedy training of layer `layer + 1`.
pub fn layer_activities<S: Scalar>(
    params: &RbmParams<S>,
    input: ArrayView2<S>,
    seed: u64,
    layer: usize,
) -> Array2<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1000 + layer as u64);
    params.sample_states(&params.hidden_probs_batch(input), &mut rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackOutcome<S> {
    pub stack: DnnStack<S>,
    /// Per-layer reconstruction-error traces.
    pub traces: Vec<Vec<S>>,
}

/// Greedy layer-wise training. Layer `l` (0-based) is trained with seed
/// `cfg.seed + l` on the sampled hidden states of layer `l − 1`; layer 0
/// sees the data.
pub fn train_stack<S: Scalar>(
    data: ArrayView2<S>,
    layer_sizes: &[usize],
    domain: SpinDomain,
    cfg: &TrainConfig<S>,
) -> Result<StackOutcome<S>> {
    if layer_sizes.len() < 2 {
        return Err(Error::validation(
            "a stack needs at least a visible and one hidden layer size",
        ));
    }
    Error::check_dim(
        "first layer size vs data width",
        data.ncols(),
        layer_sizes[0],
    )?;
    if layer_sizes.contains(&0) {
        return Err(Error::validation("layer sizes must be positive"));
    }
    let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
    let mut traces = Vec::with_capacity(layer_sizes.len() - 1);
    let mut input = data.to_owned();
    for (l, &n_hidden) in layer_sizes[1..].iter().enumerate() {
        let layer_cfg = TrainConfig {
            seed: cfg.seed.wrapping_add(l as u64),
            ..cfg.clone()
        };
        let outcome = rbm::train(input.view(), n_hidden, domain, &layer_cfg)?;
        if l + 2 < layer_sizes.len() {
            input = layer_activities(&outcome.params, input.view(), cfg.seed, l);
        }
        layers.push(outcome.params);
        traces.push(outcome.reconstruction_error);
    }
    Ok(StackOutcome {
        stack: DnnStack::new(layers)?,
        traces,
    })
}

/// Effective receptive fields `r^(1) = W^(1)`, `r^(l) = r^(l−1) W^(l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceptiveFieldSet<S = f64> {
    /// `r^(l)` for `l = 1..=L`, each `n^(0) × n^(l)`.
    pub fields: Vec<Array2<S>>,
}

pub fn receptive_fields<S: Scalar>(stack: &DnnStack<S>) -> Result<ReceptiveFieldSet<S>> {
    let mut layers = stack.layers().iter();
    let first = layers
        .next()
        .ok_or_else(|| Error::validation("receptive fields of an empty stack"))?;
    let mut fields = vec![first.weights.clone()];
    for layer in layers {
        let next = fields.last().expect("nonempty").dot(&layer.weights);
        fields.push(next);
    }
    Ok(ReceptiveFieldSet { fields })
}

/// Characteristic receptive-field sizes of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerFieldSizes<S> {
    /// Radius of gyration of `|r|` per hidden unit, in lattice spacings.
    pub per_unit: Vec<S>,
    pub median: S,
}

fn axis_centroid(mass: &[(f64, f64)], extent: usize, periodic: bool) -> f64 {
    let total: f64 = mass.iter().map(|&(_, m)| m).sum();
    if periodic {
        let (c, s) = mass.iter().fold((0.0, 0.0), |(c, s), &(x, m)| {
            let t = TAU * x / extent as f64;
            (c + m * t.cos(), s + m * t.sin())
        });
        if c.hypot(s) > 1e-12 * total {
            return (s.atan2(c) / TAU * extent as f64).rem_euclid(extent as f64);
        }
    }
    mass.iter().map(|&(x, m)| x * m).sum::<f64>() / total
}

fn axis_offset(x: f64, centroid: f64, extent: usize, periodic: bool) -> f64 {
    let d = (x - centroid).abs();
    if periodic {
        d.min(extent as f64 - d)
    } else {
        d
    }
}

fn median<S: Scalar>(xs: &[S]) -> S {
    if xs.is_empty() {
        return S::zero();
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sizes"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) * S::half()
    }
}

/// Radius of gyration of `|r|` over lattice coordinates for every hidden
/// unit (minimum-image distances about a circular-mean centroid on
/// periodic axes), aggregated per layer by the median.
pub fn receptive_field_size<S: Scalar>(
    rf: &ReceptiveFieldSet<S>,
    lattice: &Lattice,
) -> Result<Vec<LayerFieldSizes<S>>> {
    if lattice.kind() != LatticeKind::Square2D {
        return Err(Error::domain("receptive-field sizes need a 2D lattice"));
    }
    let periodic = lattice.boundary() == Boundary::Periodic;
    let mut out = Vec::with_capacity(rf.fields.len());
    for r in &rf.fields {
        Error::check_dim(
            "receptive field rows vs lattice",
            lattice.num_sites(),
            r.nrows(),
        )?;
        let per_unit: Vec<S> = r
            .axis_iter(Axis(1))
            .map(|col| {
                let mass: Vec<(usize, f64)> = col
                    .iter()
                    .map(|x| x.abs().to_f64_lossy())
                    .enumerate()
                    .collect();
                let total: f64 = mass.iter().map(|&(_, m)| m).sum();
                if total <= 0.0 {
                    return S::zero();
                }
                let rows: Vec<(f64, f64)> = mass
                    .iter()
                    .map(|&(i, m)| (lattice.coords(i).0 as f64, m))
                    .collect();
                let cols: Vec<(f64, f64)> = mass
                    .iter()
                    .map(|&(i, m)| (lattice.coords(i).1 as f64, m))
                    .collect();
                let cr = axis_centroid(&rows, lattice.rows(), periodic);
                let cc = axis_centroid(&cols, lattice.cols(), periodic);
                let second: f64 = mass
                    .iter()
                    .map(|&(i, m)| {
                        let (y, x) = lattice.coords(i);
                        let dy = axis_offset(y as f64, cr, lattice.rows(), periodic);
                        let dx = axis_offset(x as f64, cc, lattice.cols(), periodic);
                        m * (dy * dy + dx * dx)
                    })
                    .sum();
                S::from_f64_lossy((second / total).sqrt())
            })
            .collect();
        let median = median(&per_unit);
        out.push(LayerFieldSizes { per_unit, median });
    }
    Ok(out)
}

/// Exact decimation network of a periodic Ising chain.
///
/// Moving up one layer keeps every other unit (unit `j` of layer `l + 1`
/// is unit `2j` of layer `l`), and the units of layer `l` interact as a
/// chain with coupling `J^(l)` from the RG flow. `coupling_stack` holds
/// the same construction as RBMs: layer `l` couples each decimated unit
/// `2j + 1` to hidden units `j` and `j + 1` with weight `−J^(l)`, so its
/// hidden marginal is the chain at `J^(l+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecimationDnn<S = f64> {
    pub flow: RgFlow<S>,
    pub layer_sizes: Vec<usize>,
    pub coupling_stack: DnnStack<S>,
}

pub fn build_decimation_dnn<S: Scalar>(
    j0: S,
    num_layers: usize,
    chain_length: usize,
) -> Result<DecimationDnn<S>> {
    let factor = 1usize
        .checked_shl(num_layers as u32)
        .ok_or_else(|| Error::validation("too many layers"))?;
    if chain_length < 2
        || chain_length % factor != 0
        || (num_layers > 0 && chain_length / factor < 2)
    {
        return Err(Error::validation(format!(
            "chain length {chain_length} must be divisible by 2^{num_layers} and leave at least two top units"
        )));
    }
    let flow = rg_flow(j0, num_layers)?;
    let layer_sizes: Vec<usize> = (0..=num_layers).map(|l| chain_length >> l).collect();
    let layers = (0..num_layers)
        .map(|l| {
            let (n, m) = (layer_sizes[l], layer_sizes[l + 1]);
            let mut w = Array2::zeros((n, m));
            for j in 0..m {
                w[[2 * j + 1, j]] -= flow.couplings[l];
                w[[2 * j + 1, (j + 1) % m]] -= flow.couplings[l];
            }
            RbmParams::new(
                Array1::zeros(m),
                w,
                Array1::zeros(n),
                SpinDomain::PlusMinusOne,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecimationDnn {
        flow,
        layer_sizes,
        coupling_stack: DnnStack::new(layers)?,
    })
}

impl<S: Scalar> DecimationDnn<S> {
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Chain Hamiltonian of layer `l` at coupling `J^(l)`.
    pub fn layer_hamiltonian(&self, l: usize) -> Result<Hamiltonian<S>> {
        Hamiltonian::ising_chain(
            self.layer_sizes[l],
            self.flow.couplings[l],
            Boundary::Periodic,
        )
    }

    /// Decimation operator between layer `l` and `l + 1`.
    pub fn operator(&self, l: usize) -> Result<RgOperator<S>> {
        decimation_operator_1d(self.layer_sizes[l])
    }

    /// Unit values of every layer for a chain configuration.
    pub fn propagate_up(&self, config: &SpinConfig) -> Result<Vec<SpinConfig>> {
        Error::check_dim("decimation input", self.layer_sizes[0], config.len())?;
        let mut out = vec![config.clone()];
        for _ in 0..self.num_layers() {
            let prev = out.last().expect("nonempty");
            let kept = prev.values().iter().step_by(2).copied().collect();
            out.push(SpinConfig::new(config.domain(), kept)?);
        }
        Ok(out)
    }

    /// Exact distribution of every layer when layer 0 is the chain at
    /// `J^(0)` and each layer is obtained by decimating the one below.
    pub fn layer_marginals(&self) -> Result<Vec<Vec<S>>> {
        let mut dists = vec![Enumerator::default().boltzmann(&self.layer_hamiltonian(0)?)?];
        for l in 0..self.num_layers() {
            let op = self.operator(l)?;
            let OperatorRepr::Assignment(assign) = op.repr() else {
                unreachable!("decimation is an assignment")
            };
            let mut next = vec![S::zero(); 1 << self.layer_sizes[l + 1]];
            for (v, &p) in dists[l].iter().enumerate() {
                next[assign[v] as usize] += p;
            }
            dists.push(next);
        }
        Ok(dists)
    }

    /// Largest total-variation distance between a layer marginal and the
    /// Boltzmann chain at that layer's coupling.
    pub fn max_layer_distance(&self) -> Result<S> {
        let marginals = self.layer_marginals()?;
        let mut worst = S::zero();
        for (l, dist) in marginals.iter().enumerate() {
            let target = Enumerator::default().boltzmann(&self.layer_hamiltonian(l)?)?;
            worst = worst.max(total_variation(dist, &target)?);
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_stack_mean_activities_and_reconstruction_are_half() {
        let stack = DnnStack::new(vec![
            RbmParams::<f64>::zeros(4, 3, SpinDomain::PlusMinusOne),
            RbmParams::zeros(3, 2, SpinDomain::PlusMinusOne),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let acts = stack
            .propagate_up(&[1.0, -1.0, 1.0, 1.0], PropagationMode::Mean, &mut rng)
            .unwrap();
        assert!(acts
            .iter()
            .all(|a| a.probabilities.iter().all(|&p| p == 0.5)));
        let rec = stack.reconstruct(&[1.0, -1.0, 1.0, 1.0]).unwrap();
        assert!(rec.probabilities.iter().all(|&p| p == 0.5));
        assert!(stack.reconstruct(&[1.0]).is_err());
    }

    #[test]
    fn inconsistent_layers_are_rejected() {
        let err = DnnStack::new(vec![
            RbmParams::<f64>::zeros(4, 3, SpinDomain::PlusMinusOne),
            RbmParams::zeros(2, 2, SpinDomain::PlusMinusOne),
        ]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn sample_mode_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = RbmParams::random_init(6, 4, SpinDomain::PlusMinusOne, 50.0, &mut rng);
        let stack = DnnStack::new(vec![layer]).unwrap();
        let v = [1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let a = stack
            .propagate_up(
                &v,
                PropagationMode::Sample,
                &mut ChaCha8Rng::seed_from_u64(5),
            )
            .unwrap();
        let b = stack
            .propagate_up(
                &v,
                PropagationMode::Sample,
                &mut ChaCha8Rng::seed_from_u64(5),
            )
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn copy_weights_reconstruct_better_as_they_grow() {
        let v = [1.0f64, -1.0, -1.0, 1.0, 1.0];
        let mut prev_err = f64::INFINITY;
        for &s in &[0.1, 0.5, 1.0, 2.0, 4.0] {
            let w = Array2::from_diag(&Array1::from_elem(5, -s));
            let layer = RbmParams::new(
                Array1::zeros(5),
                w,
                Array1::zeros(5),
                SpinDomain::PlusMinusOne,
            )
            .unwrap();
            let rec = DnnStack::new(vec![layer]).unwrap().reconstruct(&v).unwrap();
            let err: f64 = rec
                .probabilities
                .iter()
                .zip(&v)
                .map(|(&p, &x)| (p - (x + 1.0) / 2.0).abs())
                .sum();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 1e-2);
    }

    #[test]
    fn magnetization_correlation_cases() {
        let inputs = array![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, -1.0, -1.0]];
        let perfect = inputs.mapv(|x: f64| (x + 1.0) / 2.0);
        let c = reconstruction_magnetization_correlation(inputs.view(), perfect.view()).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        let flat = Array2::from_elem((3, 3), 0.5);
        assert_eq!(
            reconstruction_magnetization_correlation(inputs.view(), flat.view()).unwrap(),
            0.0
        );
        let reversed = perfect.mapv(|p| 1.0 - p);
        let c = reconstruction_magnetization_correlation(inputs.view(), reversed.view()).unwrap();
        assert!((c + 1.0).abs() < 1e-12);
    }

    #[test]
    fn receptive_field_recursion() {
        let w1 = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let w2 = array![[2.0], [-1.0]];
        let mk = |w: Array2<f64>| {
            RbmParams::new(
                Array1::zeros(w.ncols()),
                w.clone(),
                Array1::zeros(w.nrows()),
                SpinDomain::PlusMinusOne,
            )
            .unwrap()
        };
        let stack = DnnStack::new(vec![mk(w1.clone()), mk(w2)]).unwrap();
        let rf = receptive_fields(&stack).unwrap();
        assert_eq!(rf.fields[0], w1);
        // hand product: row i → 2·w1[i,0] − w1[i,1]
        assert_eq!(rf.fields[1], array![[0.0], [2.0], [6.0]]);
        let id = Array2::<f64>::eye(3);
        let ident = DnnStack::new(vec![mk(id.clone()), mk(id.clone())]).unwrap();
        assert_eq!(receptive_fields(&ident).unwrap().fields[1], id);
        assert!(receptive_fields(&DnnStack::<f64>::new(vec![]).unwrap()).is_err());
    }

    #[test]
    fn gyration_radius_examples() {
        let lat = Lattice::square(6, 6, Boundary::Free).unwrap();
        let mut single = Array2::<f64>::zeros((36, 1));
        single[[lat.site(2, 3), 0]] = -0.7;
        let patch = Array2::from_shape_fn((36, 1), |(i, _)| {
            let (r, c) = lat.coords(i);
            if (1..=3).contains(&r) && (2..=4).contains(&c) {
                1.0
            } else {
                0.0
            }
        });
        let rf = ReceptiveFieldSet {
            fields: vec![single, patch.clone()],
        };
        let sizes = receptive_field_size(&rf, &lat).unwrap();
        assert!(sizes[0].median.abs() < 1e-12);
        // second moment of 3×3 unit points: 2 · (2/3) per axis pair
        assert!((sizes[1].median - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);

        // same patch wrapped across a periodic boundary
        let plat = Lattice::square(6, 6, Boundary::Periodic).unwrap();
        let wrapped = Array2::from_shape_fn((36, 1), |(i, _)| {
            let (r, c) = plat.coords(i);
            if [5, 0, 1].contains(&r) && [5, 0, 1].contains(&c) {
                1.0
            } else {
                0.0
            }
        });
        let sizes = receptive_field_size(
            &ReceptiveFieldSet {
                fields: vec![wrapped],
            },
            &plat,
        )
        .unwrap();
        assert!((sizes[0].median - (4.0f64 / 3.0).sqrt()).abs() < 1e-9);
        let chain = Lattice::chain(36, Boundary::Free).unwrap();
        assert!(matches!(
            receptive_field_size(&rf, &chain),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn decimation_dnn_shapes_and_restriction() {
        let dnn = build_decimation_dnn(1.0f64, 0, 8).unwrap();
        assert!(dnn.coupling_stack.is_empty());
        assert_eq!(dnn.flow.couplings, vec![1.0]);
        assert!(build_decimation_dnn(1.0f64, 3, 12).is_err());
        assert!(build_decimation_dnn(1.0f64, 3, 8).is_err());

        let dnn = build_decimation_dnn(1.0f64, 2, 16).unwrap();
        assert_eq!(dnn.layer_sizes, vec![16, 8, 4]);
        let cfg = SpinConfig::from_index(SpinDomain::PlusMinusOne, 16, 0b1011_0010_1110_0101);
        let layers = dnn.propagate_up(&cfg).unwrap();
        for (l, layer) in layers.iter().enumerate() {
            let expected: Vec<i8> = cfg.values().iter().step_by(1 << l).copied().collect();
            assert_eq!(layer.values(), &expected[..]);
        }
    }

    #[test]
    fn decimation_dnn_layer_one_of_eight_site_chain() {
        let dnn = build_decimation_dnn(1.0f64, 2, 8).unwrap();
        let marginals = dnn.layer_marginals().unwrap();
        let target = Enumerator::default()
            .boltzmann(
                &Hamiltonian::ising_chain(4, dnn.flow.couplings[1], Boundary::Periodic).unwrap(),
            )
            .unwrap();
        assert!(total_variation(&marginals[1], &target).unwrap() < 1e-12);
        assert!(dnn.max_layer_distance().unwrap() < 1e-12);
    }

    #[test]
    fn decimation_dnn_with_zero_coupling_is_uniform() {
        let dnn = build_decimation_dnn(0.0f64, 2, 8).unwrap();
        for dist in dnn.layer_marginals().unwrap() {
            let u = 1.0 / dist.len() as f64;
            assert!(dist.iter().all(|&p| (p - u).abs() < 1e-15));
        }
    }

    #[test]
    fn coupling_rbms_have_decimated_hidden_marginals() {
        let dnn = build_decimation_dnn(1.0f64, 2, 8).unwrap();
        for (l, layer) in dnn.coupling_stack.layers().iter().enumerate() {
            let hidden = layer.exact_hidden_marginal().unwrap().probs;
            let target = Enumerator::default()
                .boltzmann(&dnn.layer_hamiltonian(l + 1).unwrap())
                .unwrap();
            assert!(
                total_variation(&hidden, &target).unwrap() < 1e-12,
                "layer {l}"
            );
        }
    }
}
