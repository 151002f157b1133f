//! Single-site Metropolis sampling of spin Hamiltonians and the binary
//! dataset format used to hand samples to RBM training.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `SamplerConfig::seed`; chain `c` uses stream `c`. Each proposal picks its
//! site uniformly at random. A fixed visiting order can lock a chain into a
//! cycle of zero-cost flips that it never leaves.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spin::{Boundary, Hamiltonian, Lattice, LatticeKind, SpinConfig, SpinDomain};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const DATASET_MAGIC: &[u8; 4] = b"RGDL";
pub const DATASET_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub burn_in_sweeps: usize,
    /// Sweeps performed before each retained sample; 0 behaves as 1.
    pub thinning_sweeps: usize,
    pub num_samples: usize,
    /// Independent chains; samples are split evenly and concatenated by
    /// chain index.
    #[serde(default = "one")]
    pub chains: usize,
}

fn one() -> usize {
    1
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            burn_in_sweeps: 1000,
            thinning_sweeps: 10,
            num_samples: 40_000,
            chains: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::validation("num_samples must be at least 1"));
        }
        if self.chains == 0 {
            return Err(Error::validation("chains must be at least 1"));
        }
        Ok(())
    }
}

/// A Markov chain over spin configurations with Metropolis acceptance
/// `min(1, e^{−ΔH})`.
pub struct MetropolisChain<'a, S: Scalar> {
    hamiltonian: &'a Hamiltonian<S>,
    site_terms: Vec<Vec<usize>>,
    domain: SpinDomain,
    spins: Vec<i8>,
    rng: ChaCha8Rng,
}

impl<'a, S: Scalar> MetropolisChain<'a, S> {
    pub fn new(
        hamiltonian: &'a Hamiltonian<S>,
        start: SpinConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        Error::check_dim("chain start", hamiltonian.n_sites(), start.len())?;
        Ok(Self {
            hamiltonian,
            site_terms: hamiltonian.site_terms(),
            domain: start.domain(),
            spins: start.values().to_vec(),
            rng,
        })
    }

    /// A chain with a uniformly random start drawn from `rng`.
    pub fn random_start(
        hamiltonian: &'a Hamiltonian<S>,
        domain: SpinDomain,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let spins = (0..hamiltonian.n_sites())
            .map(|_| domain.from_bit(rng.random::<bool>()))
            .collect();
        Self {
            hamiltonian,
            site_terms: hamiltonian.site_terms(),
            domain,
            spins,
            rng,
        }
    }

    pub fn sweep(&mut self) {
        metropolis_sweep_raw(
            &mut self.spins,
            self.hamiltonian,
            &self.site_terms,
            self.domain,
            &mut self.rng,
        );
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn config(&self) -> SpinConfig {
        SpinConfig::new(self.domain, self.spins.clone()).expect("chain keeps spins in domain")
    }
}

fn metropolis_sweep_raw<S: Scalar, R: Rng + ?Sized>(
    spins: &mut [i8],
    h: &Hamiltonian<S>,
    site_terms: &[Vec<usize>],
    domain: SpinDomain,
    rng: &mut R,
) {
    let n = spins.len();
    for _ in 0..n {
        let site = rng.random_range(0..n);
        let delta = h.flip_delta(spins, site, domain, &site_terms[site]);
        let u: f64 = rng.random();
        if delta <= S::zero() || S::from_f64_lossy(u) < (-delta).exp() {
            spins[site] = domain.from_bit(spins[site] != domain.up());
        }
    }
}

/// One sweep: `N` single-site proposals at uniformly drawn sites.
pub fn metropolis_sweep<S: Scalar, R: Rng + ?Sized>(
    config: &mut SpinConfig,
    h: &Hamiltonian<S>,
    rng: &mut R,
) -> Result<()> {
    Error::check_dim("metropolis sweep", h.n_sites(), config.len())?;
    let domain = config.domain();
    let mut spins = config.values().to_vec();
    metropolis_sweep_raw(&mut spins, h, &h.site_terms(), domain, rng);
    *config = SpinConfig::new(domain, spins)?;
    Ok(())
}

/// `num_samples × N` spin samples tagged with their lattice and domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleDataset {
    lattice: Lattice,
    domain: SpinDomain,
    num_samples: usize,
    samples: Vec<i8>,
}

impl SampleDataset {
    pub fn new(lattice: Lattice, domain: SpinDomain, samples: Vec<i8>) -> Result<Self> {
        let n = lattice.num_sites();
        if n == 0 || samples.len() % n != 0 {
            return Err(Error::validation(format!(
                "{} spins do not form rows of {n}",
                samples.len()
            )));
        }
        if samples.iter().any(|&s| !domain.contains(s)) {
            return Err(Error::domain(format!(
                "dataset contains spins outside {domain}"
            )));
        }
        Ok(Self {
            lattice,
            domain,
            num_samples: samples.len() / n,
            samples,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn domain(&self) -> SpinDomain {
        self.domain
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    pub fn row(&self, i: usize) -> &[i8] {
        let n = self.num_sites();
        &self.samples[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.samples.chunks(self.num_sites())
    }

    /// Rows `range` as a new dataset on the same lattice.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.num_samples {
            return Err(Error::validation(format!(
                "bad sample range {range:?} of {}",
                self.num_samples
            )));
        }
        let n = self.num_sites();
        Ok(Self {
            lattice: self.lattice,
            domain: self.domain,
            num_samples: range.len(),
            samples: self.samples[range.start * n..range.end * n].to_vec(),
        })
    }

    pub fn to_array<S: Scalar>(&self) -> Array2<S> {
        Array2::from_shape_fn((self.num_samples, self.num_sites()), |(r, c)| {
            S::from_i8(self.samples[r * self.num_sites() + c]).unwrap()
        })
    }

    /// Bit-packed binary form; see the crate README for the layout.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = u32::try_from(self.num_sites()).map_err(|_| Error::validation("too many sites"))?;
        let m =
            u32::try_from(self.num_samples).map_err(|_| Error::validation("too many samples"))?;
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&m.to_le_bytes())?;
        w.write_all(&[self.domain.code()])?;
        let kind = match self.lattice.kind() {
            LatticeKind::Chain1D => 0u8,
            LatticeKind::Square2D => 1u8,
        };
        let boundary = match self.lattice.boundary() {
            Boundary::Periodic => 0u8,
            Boundary::Free => 1u8,
        };
        w.write_all(&[kind, boundary])?;
        w.write_all(&(self.lattice.rows() as u32).to_le_bytes())?;
        w.write_all(&(self.lattice.cols() as u32).to_le_bytes())?;
        let mut bytes = vec![0u8; self.samples.len().div_ceil(8)];
        for (k, &s) in self.samples.iter().enumerate() {
            if s == self.domain.up() {
                bytes[k / 8] |= 1 << (k % 8);
            }
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not an RGDL dataset (bad magic)".into()));
        }
        let mut u16b = [0u8; 2];
        let mut u32b = [0u8; 4];
        let mut u8b = [0u8; 1];
        r.read_exact(&mut u16b)?;
        let version = u16::from_le_bytes(u16b);
        if version != DATASET_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset version {version}"
            )));
        }
        r.read_exact(&mut u32b)?;
        let n = u32::from_le_bytes(u32b) as usize;
        r.read_exact(&mut u32b)?;
        let m = u32::from_le_bytes(u32b) as usize;
        r.read_exact(&mut u8b)?;
        let domain = SpinDomain::from_code(u8b[0])?;
        let mut kb = [0u8; 2];
        r.read_exact(&mut kb)?;
        r.read_exact(&mut u32b)?;
        let rows = u32::from_le_bytes(u32b) as usize;
        r.read_exact(&mut u32b)?;
        let cols = u32::from_le_bytes(u32b) as usize;
        let boundary = match kb[1] {
            0 => Boundary::Periodic,
            1 => Boundary::Free,
            b => return Err(Error::Format(format!("unknown boundary code {b}"))),
        };
        let lattice = match kb[0] {
            0 => Lattice::chain(cols, boundary)?,
            1 => Lattice::square(rows, cols, boundary)?,
            k => return Err(Error::Format(format!("unknown lattice code {k}"))),
        };
        if lattice.num_sites() != n {
            return Err(Error::Format(format!(
                "header N={n} disagrees with lattice {lattice}"
            )));
        }
        let mut bytes = vec![0u8; (n * m).div_ceil(8)];
        r.read_exact(&mut bytes)?;
        let samples = (0..n * m)
            .map(|k| domain.from_bit(bytes[k / 8] >> (k % 8) & 1 == 1))
            .collect();
        Self::new(lattice, domain, samples)
    }

    /// One sample per line, spins as `±1` or `0/1` per the dataset domain.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 3);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Draws `cfg.num_samples` Metropolis samples of `h` on `lattice`.
pub fn sample_ensemble<S: Scalar>(
    h: &Hamiltonian<S>,
    lattice: &Lattice,
    domain: SpinDomain,
    cfg: &SamplerConfig,
) -> Result<SampleDataset> {
    cfg.validate()?;
    Error::check_dim("sample_ensemble", lattice.num_sites(), h.n_sites())?;
    let per_chain: Vec<usize> = (0..cfg.chains)
        .map(|c| cfg.num_samples / cfg.chains + usize::from(c < cfg.num_samples % cfg.chains))
        .collect();
    let blocks: Vec<Vec<i8>> = per_chain
        .par_iter()
        .enumerate()
        .map(|(chain, &count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chain as u64);
            let mut mc = MetropolisChain::random_start(h, domain, rng);
            for _ in 0..cfg.burn_in_sweeps {
                mc.sweep();
            }
            let mut out = Vec::with_capacity(count * h.n_sites());
            for _ in 0..count {
                for _ in 0..cfg.thinning_sweeps.max(1) {
                    mc.sweep();
                }
                out.extend_from_slice(mc.spins());
            }
            out
        })
        .collect();
    SampleDataset::new(*lattice, domain, blocks.concat())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub magnetization: Estimate,
    pub abs_magnetization: Estimate,
    pub nn_correlation: Estimate,
    pub num_samples: usize,
}

/// Sample mean with a batch-means standard error (≈√n batches).
fn batch_mean(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let batches = ((n as f64).sqrt() as usize).clamp(1, n);
    if batches < 2 {
        return Estimate {
            mean,
            stderr: f64::INFINITY,
        };
    }
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Estimate {
        mean,
        stderr: (var / batches as f64).sqrt(),
    }
}

/// Magnetization, |magnetization| and nearest-neighbor correlation, with
/// spins read as ±1 regardless of the dataset domain.
pub fn estimate_observables(ds: &SampleDataset) -> Result<Observables> {
    if ds.num_samples() == 0 {
        return Err(Error::validation(
            "cannot estimate observables of an empty dataset",
        ));
    }
    let bonds = ds.lattice().bonds();
    let up = ds.domain().up();
    let n = ds.num_sites() as f64;
    let mut m = Vec::with_capacity(ds.num_samples());
    let mut corr = Vec::with_capacity(ds.num_samples());
    for row in ds.rows() {
        let s = |i: usize| if row[i] == up { 1.0 } else { -1.0 };
        m.push((0..row.len()).map(s).sum::<f64>() / n);
        corr.push(if bonds.is_empty() {
            0.0
        } else {
            bonds.iter().map(|&(i, j)| s(i) * s(j)).sum::<f64>() / bonds.len() as f64
        });
    }
    let abs: Vec<f64> = m.iter().map(|x| x.abs()).collect();
    Ok(Observables {
        magnetization: batch_mean(&m),
        abs_magnetization: batch_mean(&abs),
        nn_correlation: batch_mean(&corr),
        num_samples: ds.num_samples(),
    })
}
