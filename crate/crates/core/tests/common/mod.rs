#![allow(dead_code)]

use qcausal::linalg::{kron, CMatrix, Layout, Sys, C64};
use qcausal::qubit::{pauli, ChannelOperator, DensityOperator, PauliIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Haar unitary by Gram-Schmidt on Gaussian columns.
pub fn haar_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<C64> = (0..n).map(|_| gaussian(rng)).collect();
        for c in &cols {
            let overlap: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= overlap * y;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    CMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Ginibre-distributed mixed state on the given qubits.
pub fn random_state(rng: &mut ChaCha8Rng, labels: &[Sys]) -> DensityOperator {
    let n = 1 << labels.len();
    let entries: Vec<C64> = (0..n * n).map(|_| gaussian(rng)).collect();
    let g = CMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    let m = &g * &g.dagger();
    let tr = m.trace().re;
    DensityOperator::new(m.scale(1.0 / tr), Layout::qubits(labels)).unwrap()
}

pub fn pure_state(v: &[C64], labels: &[Sys]) -> DensityOperator {
    DensityOperator::pure(v, Layout::qubits(labels)).unwrap()
}

/// ρ ↦ Tr_E[U (ρ ⊗ |0><0|) U†] for a Haar U on system ⊗ environment.
pub fn random_channel(rng: &mut ChaCha8Rng) -> ChannelOperator {
    let u = haar_unitary(rng, 4);
    let kraus: Vec<CMatrix> = (0..2)
        .map(|e| CMatrix::from_fn(2, 2, |i, j| u[(2 * i + e, 2 * j)]))
        .collect();
    ChannelOperator::from_action(|rho| {
        let mut out = CMatrix::zeros(2, 2);
        for k in &kraus {
            out = &out + &(&(k * rho) * &k.dagger());
        }
        out
    })
    .unwrap()
}

/// Measure in a random basis, prepare a random state per outcome.
pub fn entanglement_breaking_channel(rng: &mut ChaCha8Rng) -> ChannelOperator {
    let basis = haar_unitary(rng, 2);
    let outputs = [
        random_state(rng, &[Sys::B]).into_matrix(),
        random_state(rng, &[Sys::B]).into_matrix(),
    ];
    ChannelOperator::from_action(|rho| {
        let mut out = CMatrix::zeros(2, 2);
        for (k, sigma) in outputs.iter().enumerate() {
            let v = [basis[(0, k)], basis[(1, k)]];
            out = &out + &sigma.scale_c(rho.expectation(&v));
        }
        out
    })
    .unwrap()
}

/// ½(|a><a| ⊗ ρ₁ + |a⊥><a⊥| ⊗ ρ₂): separable with a maximally mixed C.
pub fn separable_state(rng: &mut ChaCha8Rng) -> DensityOperator {
    let basis = haar_unitary(rng, 2);
    let mut m = CMatrix::zeros(4, 4);
    for k in 0..2 {
        let a = CMatrix::outer(&[basis[(0, k)], basis[(1, k)]]);
        let rho = random_state(rng, &[Sys::B]).into_matrix();
        m = &m + &kron(&a, &rho).scale(0.5);
    }
    DensityOperator::new(m, Layout::qubits(&[Sys::C, Sys::B])).unwrap()
}

/// (1 ⊗ W)|Φ+> for a Haar W.
pub fn maximally_entangled(rng: &mut ChaCha8Rng) -> DensityOperator {
    let w = haar_unitary(rng, 2);
    let a = 1.0 / 2f64.sqrt();
    let v: Vec<C64> = (0..4)
        .map(|idx| {
            let (c, b) = (idx / 2, idx % 2);
            w[(b, c)] * a
        })
        .collect();
    pure_state(&v, &[Sys::C, Sys::B])
}

/// ⟨σ_i ⊗ σ_j⟩ for i, j = 1..3
pub fn correlation_matrix(rho: &CMatrix) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let op = kron(
                &pauli(PauliIndex::SETTINGS[i]),
                &pauli(PauliIndex::SETTINGS[j]),
            );
            t[i][j] = rho.trace_product(&op).re;
        }
    }
    t
}

/// R_ij = ½ Tr[σ_i U σ_j U†]
pub fn bloch_rotation(u: &CMatrix) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let sj = pauli(PauliIndex::SETTINGS[j]);
            let image = &(u * &sj) * &u.dagger();
            r[i][j] = 0.5 * pauli(PauliIndex::SETTINGS[i]).trace_product(&image).re;
        }
    }
    r
}

pub fn max_diff3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((a[i][j] - b[i][j]).abs());
        }
    }
    worst
}

pub fn transpose3(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}
