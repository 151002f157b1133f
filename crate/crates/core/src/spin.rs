//! Lattices, spin configurations and general spin Hamiltonians.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Values a single spin may take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum SpinDomain {
    #[default]
    PlusMinusOne,
    ZeroOne,
}

impl SpinDomain {
    pub fn up(self) -> i8 {
        1
    }

    pub fn down(self) -> i8 {
        match self {
            SpinDomain::PlusMinusOne => -1,
            SpinDomain::ZeroOne => 0,
        }
    }

    pub fn contains(self, s: i8) -> bool {
        s == self.up() || s == self.down()
    }

    pub fn from_bit(self, up: bool) -> i8 {
        if up {
            self.up()
        } else {
            self.down()
        }
    }

    /// Maps a spin of this domain onto `target` (`s ↦ (s+1)/2` and back).
    pub fn convert(self, s: i8, target: SpinDomain) -> i8 {
        target.from_bit(s == self.up())
    }

    /// Expected spin value given the probability of the up state.
    pub fn mean_from_up_probability<S: Scalar>(self, p: S) -> S {
        match self {
            SpinDomain::PlusMinusOne => S::two() * p - S::one(),
            SpinDomain::ZeroOne => p,
        }
    }

    /// Probability of the up state given the expected spin value.
    pub fn up_probability_from_mean<S: Scalar>(self, m: S) -> S {
        match self {
            SpinDomain::PlusMinusOne => (m + S::one()) * S::half(),
            SpinDomain::ZeroOne => m,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            SpinDomain::PlusMinusOne => 0,
            SpinDomain::ZeroOne => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SpinDomain::PlusMinusOne),
            1 => Ok(SpinDomain::ZeroOne),
            c => Err(Error::Format(format!("unknown spin domain code {c}"))),
        }
    }
}

impl fmt::Display for SpinDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpinDomain::PlusMinusOne => "pm1",
            SpinDomain::ZeroOne => "01",
        })
    }
}

impl From<SpinDomain> for String {
    fn from(d: SpinDomain) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for SpinDomain {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for SpinDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pm1" | "+-1" | "ising" => Ok(SpinDomain::PlusMinusOne),
            "01" | "binary" => Ok(SpinDomain::ZeroOne),
            other => Err(Error::validation(format!(
                "unknown spin domain '{other}' (use pm1 or 01)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    Periodic,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatticeKind {
    Chain1D,
    Square2D,
}

/// A chain or square lattice. Sites are numbered row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Lattice {
    kind: LatticeKind,
    rows: usize,
    cols: usize,
    boundary: Boundary,
}

impl Lattice {
    pub fn chain(len: usize, boundary: Boundary) -> Result<Self> {
        Self::build(LatticeKind::Chain1D, 1, len, boundary)
    }

    pub fn square(rows: usize, cols: usize, boundary: Boundary) -> Result<Self> {
        Self::build(LatticeKind::Square2D, rows, cols, boundary)
    }

    fn build(kind: LatticeKind, rows: usize, cols: usize, boundary: Boundary) -> Result<Self> {
        let extents: &[usize] = match kind {
            LatticeKind::Chain1D => &[cols],
            LatticeKind::Square2D => &[rows, cols],
        };
        for &e in extents {
            if e == 0 {
                return Err(Error::validation("lattice extents must be positive"));
            }
            // Periodic wrap on an extent of 2 would bond the same pair twice.
            if boundary == Boundary::Periodic && e < 3 {
                return Err(Error::validation(format!(
                    "periodic lattice extents must be at least 3, got {e}"
                )));
            }
        }
        Ok(Self {
            kind,
            rows,
            cols,
            boundary,
        })
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn extents(&self) -> Vec<usize> {
        match self.kind {
            LatticeKind::Chain1D => vec![self.cols],
            LatticeKind::Square2D => vec![self.rows, self.cols],
        }
    }

    pub fn num_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn site(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site / self.cols, site % self.cols)
    }

    /// Nearest-neighbor bonds, each listed once.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let periodic = self.boundary == Boundary::Periodic;
        let mut bonds = Vec::with_capacity(2 * self.num_sites());
        for r in 0..self.rows {
            for c in 0..self.cols {
                let i = self.site(r, c);
                if c + 1 < self.cols {
                    bonds.push((i, self.site(r, c + 1)));
                } else if periodic {
                    bonds.push((i, self.site(r, 0)));
                }
                if self.kind == LatticeKind::Square2D {
                    if r + 1 < self.rows {
                        bonds.push((i, self.site(r + 1, c)));
                    } else if periodic {
                        bonds.push((i, self.site(0, c)));
                    }
                }
            }
        }
        bonds
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.num_sites()];
        for (i, j) in self.bonds() {
            nbrs[i].push(j);
            nbrs[j].push(i);
        }
        for list in &mut nbrs {
            list.sort_unstable();
        }
        nbrs
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = match self.boundary {
            Boundary::Periodic => "periodic",
            Boundary::Free => "free",
        };
        match self.kind {
            LatticeKind::Chain1D => write!(f, "1d:{}:{b}", self.cols),
            LatticeKind::Square2D => write!(f, "2d:{}x{}:{b}", self.rows, self.cols),
        }
    }
}

impl FromStr for Lattice {
    type Err = Error;

    /// Parses `1d:<len>:<boundary>` or `2d:<rows>x<cols>:<boundary>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("bad lattice descriptor '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let boundary = match parts[2] {
            "periodic" | "pbc" => Boundary::Periodic,
            "free" | "open" => Boundary::Free,
            _ => return Err(bad()),
        };
        match parts[0] {
            "1d" => Lattice::chain(parts[1].parse().map_err(|_| bad())?, boundary),
            "2d" => {
                let (r, c) = parts[1].split_once('x').ok_or_else(bad)?;
                Lattice::square(
                    r.parse().map_err(|_| bad())?,
                    c.parse().map_err(|_| bad())?,
                    boundary,
                )
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Lattice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Lattice> for String {
    fn from(l: Lattice) -> String {
        l.to_string()
    }
}

/// A spin configuration: one value per site, each in `domain`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    domain: SpinDomain,
    values: Vec<i8>,
}

impl SpinConfig {
    pub fn new(domain: SpinDomain, values: Vec<i8>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|&&s| !domain.contains(s)) {
            return Err(Error::domain(format!(
                "spin value {bad} is not in domain {domain}"
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn uniform(domain: SpinDomain, n: usize, up: bool) -> Self {
        Self {
            domain,
            values: vec![domain.from_bit(up); n],
        }
    }

    /// Configuration whose site `i` is up iff bit `i` of `index` is set.
    pub fn from_index(domain: SpinDomain, n: usize, index: u64) -> Self {
        Self {
            domain,
            values: (0..n)
                .map(|i| domain.from_bit(index >> i & 1 == 1))
                .collect(),
        }
    }

    pub fn index(&self) -> u64 {
        debug_assert!(self.values.len() <= 64);
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == self.domain.up())
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    }

    pub fn domain(&self) -> SpinDomain {
        self.domain
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_domain(&self, target: SpinDomain) -> SpinConfig {
        SpinConfig {
            domain: target,
            values: self
                .values
                .iter()
                .map(|&s| self.domain.convert(s, target))
                .collect(),
        }
    }

    pub fn flipped(&self) -> SpinConfig {
        SpinConfig {
            domain: self.domain,
            values: self
                .values
                .iter()
                .map(|&s| self.domain.from_bit(s != self.domain.up()))
                .collect(),
        }
    }

    pub fn as_scalars<S: Scalar>(&self) -> Vec<S> {
        self.values
            .iter()
            .map(|&s| S::from_i8(s).unwrap())
            .collect()
    }
}

/// One interaction term `K · Π_{i ∈ sites} s_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term<S> {
    pub sites: Vec<usize>,
    pub coupling: S,
}

/// `H[s] = −Σ_terms K · Π_{i ∈ set} s_i`, at unit temperature.
///
/// A term with an empty site set is a constant energy offset.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian<S = f64> {
    n_sites: usize,
    terms: Vec<Term<S>>,
}

impl<S: Scalar> Hamiltonian<S> {
    pub fn new(n_sites: usize) -> Self {
        Self {
            n_sites,
            terms: Vec::new(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[Term<S>] {
        &self.terms
    }

    pub fn add_term(&mut self, sites: Vec<usize>, coupling: S) -> Result<&mut Self> {
        if let Some(&i) = sites.iter().find(|&&i| i >= self.n_sites) {
            return Err(Error::domain(format!(
                "site index {i} out of range for {} sites",
                self.n_sites
            )));
        }
        let mut sorted = sites.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation(format!(
                "duplicate site index in term {sites:?}"
            )));
        }
        if !coupling.is_finite() {
            return Err(Error::validation("couplings must be finite"));
        }
        self.terms.push(Term { sites, coupling });
        Ok(self)
    }

    /// Nearest-neighbor Ising model `−J Σ_⟨ij⟩ s_i s_j` on `lattice`.
    pub fn ising(lattice: &Lattice, coupling: S) -> Self {
        Self {
            n_sites: lattice.num_sites(),
            terms: lattice
                .bonds()
                .into_iter()
                .map(|(i, j)| Term {
                    sites: vec![i, j],
                    coupling,
                })
                .collect(),
        }
    }

    /// Ising chain on `n ≥ 2` sites. A periodic chain of two sites carries
    /// both of its bonds on the same pair.
    pub fn ising_chain(n: usize, coupling: S, boundary: Boundary) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation("an Ising chain needs at least two sites"));
        }
        let mut h = Self::new(n);
        let bonds = if boundary == Boundary::Periodic {
            n
        } else {
            n - 1
        };
        for i in 0..bonds {
            h.terms.push(Term {
                sites: vec![i, (i + 1) % n],
                coupling,
            });
        }
        Ok(h)
    }

    /// The same terms with every coupling multiplied by `factor`.
    pub fn scaled(&self, factor: S) -> Self {
        Self {
            n_sites: self.n_sites,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    sites: t.sites.clone(),
                    coupling: t.coupling * factor,
                })
                .collect(),
        }
    }

    /// `self ⊕ other` on `self.n_sites + other.n_sites` sites, with no
    /// terms coupling the two halves.
    pub fn disjoint_union(&self, other: &Self) -> Self {
        let offset = self.n_sites;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| Term {
            sites: t.sites.iter().map(|&i| i + offset).collect(),
            coupling: t.coupling,
        }));
        Self {
            n_sites: self.n_sites + other.n_sites,
            terms,
        }
    }

    /// Highest interaction order present (0 for constant-only).
    pub fn max_order(&self) -> usize {
        self.terms.iter().map(|t| t.sites.len()).max().unwrap_or(0)
    }

    pub fn energy(&self, config: &SpinConfig) -> Result<S> {
        if config.len() < self.n_sites {
            return Err(Error::domain(format!(
                "configuration has {} sites, Hamiltonian indexes {}",
                config.len(),
                self.n_sites
            )));
        }
        Ok(self.energy_of(config.values()))
    }

    /// Energy of raw spin values; `spins` must cover every indexed site.
    pub fn energy_of(&self, spins: &[i8]) -> S {
        self.energy_of_values(|i| S::from_i8(spins[i]).unwrap())
    }

    pub fn energy_of_scalars(&self, spins: &[S]) -> S {
        self.energy_of_values(|i| spins[i])
    }

    fn energy_of_values(&self, value: impl Fn(usize) -> S) -> S {
        let mut e = S::zero();
        for t in &self.terms {
            let prod = t.sites.iter().fold(S::one(), |p, &i| p * value(i));
            e -= t.coupling * prod;
        }
        e
    }

    /// Energy change when site `site` of `spins` is switched to its other value.
    pub fn flip_delta(
        &self,
        spins: &[i8],
        site: usize,
        domain: SpinDomain,
        site_terms: &[usize],
    ) -> S {
        let old = spins[site];
        let new = domain.from_bit(old != domain.up());
        let mut delta = S::zero();
        for &k in site_terms {
            let t = &self.terms[k];
            let rest = t
                .sites
                .iter()
                .filter(|&&i| i != site)
                .fold(S::one(), |p, &i| p * S::from_i8(spins[i]).unwrap());
            delta -= t.coupling * rest * S::from_i8(new - old).unwrap();
        }
        delta
    }

    /// For every site, the indices of the terms that touch it.
    pub fn site_terms(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_sites];
        for (k, t) in self.terms.iter().enumerate() {
            for &i in &t.sites {
                out[i].push(k);
            }
        }
        out
    }

    /// Bit masks of every term; requires `n_sites ≤ 64`.
    pub(crate) fn term_masks(&self) -> Vec<u64> {
        debug_assert!(self.n_sites <= 64);
        self.terms
            .iter()
            .map(|t| t.sites.iter().fold(0u64, |m, &i| m | 1 << i))
            .collect()
    }

    /// Energy of the configuration encoded by `index` (bit set = up).
    pub(crate) fn energy_of_index(&self, index: u64, masks: &[u64], domain: SpinDomain) -> S {
        let mut e = S::zero();
        for (t, &m) in self.terms.iter().zip(masks) {
            match domain {
                SpinDomain::PlusMinusOne => {
                    if (!index & m).count_ones() % 2 == 0 {
                        e -= t.coupling;
                    } else {
                        e += t.coupling;
                    }
                }
                SpinDomain::ZeroOne => {
                    if index & m == m {
                        e -= t.coupling;
                    }
                }
            }
        }
        e
    }

    /// Expands an arbitrary energy table over all `2^n` configurations into
    /// interaction terms of every order (including a constant term), so that
    /// `energy_of_index` reproduces `energies[index]`.
    pub fn from_energy_table(n: usize, domain: SpinDomain, energies: &[S]) -> Result<Self> {
        if n > 30 {
            return Err(Error::Capacity {
                what: "energy table expansion",
                needed: n,
                limit: 30,
            });
        }
        Error::check_dim("energy table", 1usize << n, energies.len())?;
        let mut coeffs = energies.to_vec();
        match domain {
            SpinDomain::PlusMinusOne => {
                // Walsh–Hadamard transform, then sign-correct for v = 2b − 1.
                let mut len = 1;
                while len < coeffs.len() {
                    for start in (0..coeffs.len()).step_by(2 * len) {
                        for k in start..start + len {
                            let (a, b) = (coeffs[k], coeffs[k + len]);
                            coeffs[k] = a + b;
                            coeffs[k + len] = a - b;
                        }
                    }
                    len *= 2;
                }
                let norm = S::from_usize_lossy(1usize << n);
                for (s, c) in coeffs.iter_mut().enumerate() {
                    let sign = if (s as u64).count_ones() % 2 == 0 {
                        S::one()
                    } else {
                        -S::one()
                    };
                    *c = sign * *c / norm;
                }
            }
            SpinDomain::ZeroOne => {
                // Möbius inversion over subsets.
                for bit in 0..n {
                    for s in 0..coeffs.len() {
                        if s >> bit & 1 == 1 {
                            coeffs[s] = coeffs[s] - coeffs[s ^ (1 << bit)];
                        }
                    }
                }
            }
        }
        let mut h = Self::new(n);
        for (s, c) in coeffs.into_iter().enumerate() {
            if c != S::zero() {
                let sites = (0..n).filter(|&i| s >> i & 1 == 1).collect();
                h.terms.push(Term {
                    sites,
                    coupling: -c,
                });
            }
        }
        Ok(h)
    }

    /// Line-oriented text: `K <coupling> <idx...>` per term, `#` comments.
    pub fn to_text(&self) -> String {
        let mut out = format!("# {} sites\n", self.n_sites);
        for t in &self.terms {
            out.push_str(&format!("K {:e}", t.coupling.to_f64_lossy()));
            for i in &t.sites {
                out.push_str(&format!(" {i}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`Hamiltonian::to_text`] output. When `n_sites` is `None` the
    /// site count is one past the largest index used.
    pub fn from_text(text: &str, n_sites: Option<usize>) -> Result<Self> {
        let mut parsed = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("line {}: {what}: '{raw}'", lineno + 1));
            let mut fields = line.split_whitespace();
            if fields.next() != Some("K") {
                return Err(bad("expected 'K'"));
            }
            let coupling: f64 = fields
                .next()
                .ok_or_else(|| bad("missing coupling"))?
                .parse()
                .map_err(|_| bad("bad coupling"))?;
            let sites = fields
                .map(|f| f.parse::<usize>().map_err(|_| bad("bad site index")))
                .collect::<Result<Vec<_>>>()?;
            parsed.push((sites, coupling));
        }
        let used = parsed
            .iter()
            .flat_map(|(s, _)| s.iter().map(|&i| i + 1))
            .max()
            .unwrap_or(0);
        let mut h = Self::new(n_sites.unwrap_or(used));
        for (sites, coupling) in parsed {
            h.add_term(sites, S::from_f64_lossy(coupling))?;
        }
        Ok(h)
    }
}
