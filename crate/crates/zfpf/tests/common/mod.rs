//! Shared generators for the integration and acceptance suites.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use zfpf::quantum::{Hamiltonian, LocalTerm};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Random Hermitian matrix with spectral norm exactly `norm`.
pub fn random_hermitian(rng: &mut ChaCha12Rng, dim: usize, norm: f64) -> DMatrix<Complex64> {
    loop {
        let raw = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            )
        });
        let herm = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
        let spectral = herm
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &e| acc.max(e.abs()));
        if spectral > 1e-9 {
            return herm * Complex64::new(norm / spectral, 0.0);
        }
    }
}

/// Random (k=2, d=2) Hamiltonian on `n_sites` qubits with term norms at
/// most 1: a path, cycle or matching of two-site couplings, sometimes
/// with single-site terms on the leftover-degree sites.
pub fn random_22_hamiltonian(rng: &mut ChaCha12Rng, n_sites: usize) -> Hamiltonian {
    let mut order: Vec<u32> = (0..n_sites as u32).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut degree = vec![0usize; n_sites];
    let mut supports: Vec<Vec<u32>> = Vec::new();
    let style = rng.random_range(0..3u32);
    match style {
        // path over the shuffled order
        0 => {
            for w in order.windows(2) {
                supports.push(vec![w[0].min(w[1]), w[0].max(w[1])]);
            }
        }
        // cycle when possible, else path
        1 => {
            for w in order.windows(2) {
                supports.push(vec![w[0].min(w[1]), w[0].max(w[1])]);
            }
            if n_sites >= 3 {
                let (a, b) = (order[0], order[n_sites - 1]);
                supports.push(vec![a.min(b), a.max(b)]);
            }
        }
        // matching
        _ => {
            for pair in order.chunks(2) {
                if let [a, b] = pair {
                    supports.push(vec![*a.min(b), *a.max(b)]);
                }
            }
        }
    }
    for s in &supports {
        for &v in s {
            degree[v as usize] += 1;
        }
    }
    // sprinkle single-site terms where the degree budget allows
    for v in 0..n_sites as u32 {
        if degree[v as usize] < 2 && rng.random::<f64>() < 0.35 {
            supports.push(vec![v]);
            degree[v as usize] += 1;
        }
    }
    let terms = supports
        .into_iter()
        .map(|support| {
            let dim = 1 << support.len();
            let norm = 0.3 + 0.7 * rng.random::<f64>();
            let matrix = random_hermitian(rng, dim, norm);
            LocalTerm::new(support, matrix, 2).expect("generated term is valid")
        })
        .collect();
    Hamiltonian::new(2, n_sites, 2, 2, terms).expect("generated Hamiltonian is valid")
}

/// Uniform complex point in the closed disc of the given radius.
pub fn random_in_disc(rng: &mut ChaCha12Rng, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    Complex64::new(r * theta.cos(), r * theta.sin())
}
