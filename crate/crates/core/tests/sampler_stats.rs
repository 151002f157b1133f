use rgdl::sampler::{estimate_observables, sample_ensemble};
use rgdl::{Boundary, Hamiltonian, Lattice, SamplerConfig, SpinDomain};

/// Exact bond-averaged `⟨s_i s_j⟩` by looping over every configuration.
fn exact_nn_correlation(lat: &Lattice, j: f64) -> f64 {
    let n = lat.num_sites();
    let bonds = lat.bonds();
    let (mut z, mut acc) = (0.0, 0.0);
    for idx in 0u32..1 << n {
        let s = |i: usize| if idx >> i & 1 == 1 { 1.0 } else { -1.0 };
        let pair: f64 = bonds.iter().map(|&(a, b)| s(a) * s(b)).sum();
        let w = (j * pair).exp();
        z += w;
        acc += w * pair / bonds.len() as f64;
    }
    acc / z
}

#[test]
fn small_lattice_correlation_matches_enumeration() {
    let lat = Lattice::square(3, 3, Boundary::Periodic).unwrap();
    let h = Hamiltonian::ising(&lat, 0.3);
    let cfg = SamplerConfig { seed: 11, burn_in_sweeps: 500, thinning_sweeps: 5, num_samples: 100_000, chains: 4 };
    let obs = estimate_observables(&sample_ensemble(&h, &lat, SpinDomain::PlusMinusOne, &cfg).unwrap()).unwrap();
    let exact = exact_nn_correlation(&lat, 0.3);
    assert!(
        (obs.nn_correlation.mean - exact).abs() < 3.0 * obs.nn_correlation.stderr,
        "{} vs {exact} ± {}",
        obs.nn_correlation.mean,
        obs.nn_correlation.stderr
    );
}

#[test]
fn zero_one_domain_samples_the_same_distribution() {
    let lat = Lattice::square(3, 3, Boundary::Periodic).unwrap();
    let h = Hamiltonian::ising(&lat, 0.3);
    let cfg = SamplerConfig { seed: 12, burn_in_sweeps: 500, thinning_sweeps: 5, num_samples: 50_000, chains: 2 };
    // in {0,1} the same pair term reads J·s_i s_j with s ∈ {0,1}; compare
    // against that model's exact ±1-mapped correlation instead
    let ds = sample_ensemble(&h, &lat, SpinDomain::ZeroOne, &cfg).unwrap();
    assert!(ds.rows().flatten().all(|&s| s == 0 || s == 1));
    let n = lat.num_sites();
    let bonds = lat.bonds();
    let (mut z, mut acc) = (0.0, 0.0);
    for idx in 0u32..1 << n {
        let b = |i: usize| f64::from(idx >> i & 1);
        let w = (0.3 * bonds.iter().map(|&(a, c)| b(a) * b(c)).sum::<f64>()).exp();
        z += w;
        acc += w * bonds.iter().map(|&(a, c)| (2.0 * b(a) - 1.0) * (2.0 * b(c) - 1.0)).sum::<f64>() / bonds.len() as f64;
    }
    let obs = estimate_observables(&ds).unwrap();
    assert!((obs.nn_correlation.mean - acc / z).abs() < 4.0 * obs.nn_correlation.stderr);
}

#[test]
fn independent_chains_agree_near_criticality() {
    let lat = Lattice::square(16, 16, Boundary::Periodic).unwrap();
    let h = Hamiltonian::ising(&lat, 0.408);
    let run = |seed| {
        let cfg = SamplerConfig { seed, num_samples: 4000, ..SamplerConfig::default() };
        estimate_observables(&sample_ensemble(&h, &lat, SpinDomain::PlusMinusOne, &cfg).unwrap()).unwrap()
    };
    let (a, b) = (run(1), run(2));
    let tol = 5.0 * (a.nn_correlation.stderr.powi(2) + b.nn_correlation.stderr.powi(2)).sqrt();
    assert!((a.nn_correlation.mean - b.nn_correlation.mean).abs() < tol);
    // just above the critical temperature neighbours are strongly aligned
    assert!(a.nn_correlation.mean > 0.5);
}

#[test]
fn reruns_write_identical_files() {
    let lat = Lattice::square(8, 8, Boundary::Periodic).unwrap();
    let h = Hamiltonian::ising(&lat, 0.408);
    let cfg = SamplerConfig { seed: 7, burn_in_sweeps: 50, thinning_sweeps: 2, num_samples: 300, chains: 3 };
    let bytes = || {
        let mut out = Vec::new();
        sample_ensemble(&h, &lat, SpinDomain::PlusMinusOne, &cfg).unwrap().write_binary(&mut out).unwrap();
        out
    };
    let first = bytes();
    assert_eq!(first, bytes());
    assert_eq!(&first[..4], b"RGDL");
    assert_eq!(u32::from_le_bytes(first[6..10].try_into().unwrap()), 64);
    let other = SamplerConfig { seed: 8, ..cfg.clone() };
    let mut alt = Vec::new();
    sample_ensemble(&h, &lat, SpinDomain::PlusMinusOne, &other).unwrap().write_binary(&mut alt).unwrap();
    assert_ne!(first, alt);
}
