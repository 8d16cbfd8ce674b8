#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlme_core::linalg::paulis;
use tlme_core::model::Generator;
use tlme_core::{ComplexMatrix, LindbladSpec, TlmeSpec, C64};

pub fn to_na(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Column-stacking superoperator: `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
///
/// Built from `K(ρ) = Gρ + ρF + Σ DρE†` with each term vectorized
/// independently of the crate's sandwich evaluation.
pub fn vectorized(g: &impl Generator) -> DMatrix<C64> {
    let form = g.sandwich();
    let n = g.dim();
    let basis = |k: usize| {
        let mut e = ComplexMatrix::zeros(n, n);
        e[(k % n, k / n)] = C64::new(1.0, 0.0);
        e
    };
    // Probe the generator column by column: column k is vec(K(E_k)).
    let mut sup = DMatrix::<C64>::zeros(n * n, n * n);
    for k in 0..n * n {
        let out = form.apply(&basis(k));
        for j in 0..n {
            for i in 0..n {
                sup[(j * n + i, k)] = out[(i, j)];
            }
        }
    }
    sup
}

/// Superoperator assembled from the operator form directly, for cross-checking
/// the probed one.
pub fn vectorized_lindblad(spec: &LindbladSpec) -> DMatrix<C64> {
    let n = spec.dim();
    let id = DMatrix::<C64>::identity(n, n);
    let h = to_na(spec.hamiltonian());
    let i = C64::new(0.0, 1.0);
    let mut sup = (id.kronecker(&h) - h.transpose().kronecker(&id)) * (-i);
    for j in spec.jumps() {
        let j = to_na(j);
        let jd = j.adjoint();
        let jdj = &jd * &j;
        sup += j.conjugate().kronecker(&j);
        sup -= (id.kronecker(&jdj) + jdj.transpose().kronecker(&id)) * C64::new(0.5, 0.0);
    }
    sup
}

pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|k| t[(k, k)]).collect()
}

/// Largest real part among the eigenvalues of the vectorized generator.
pub fn dominant_rate(g: &impl Generator) -> f64 {
    eigenvalues(&vectorized(g))
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn driven_qubit() -> LindbladSpec {
    LindbladSpec::new(paulis::sigma_x(), vec![paulis::sigma_minus()]).unwrap()
}

pub fn decay_qubit() -> LindbladSpec {
    LindbladSpec::new(ComplexMatrix::zeros(2, 2), vec![paulis::sigma_minus()]).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexMatrix {
    let data = (0..n * n)
        .map(|_| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect();
    ComplexMatrix::from_vec(n, n, data).unwrap()
}

pub fn random_state(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n, 1.0);
    let rho = a.matmul(&a.adjoint());
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr)
}

pub fn random_lindblad(rng: &mut impl Rng, n: usize, jumps: usize) -> LindbladSpec {
    let h = random_matrix(rng, n, 1.0).hermitian_part();
    let js = (0..jumps).map(|_| random_matrix(rng, n, 0.5)).collect();
    LindbladSpec::new(h, js).unwrap()
}

pub fn random_hp_tlme(rng: &mut impl Rng, n: usize) -> TlmeSpec {
    let b = random_matrix(rng, n, 1.0);
    let d = random_matrix(rng, n, 0.7);
    TlmeSpec::new(random_lindblad(rng, n, 1), b.clone(), b.adjoint(), vec![d.clone()], vec![d]).unwrap()
}

pub fn random_generic_tlme(rng: &mut impl Rng, n: usize) -> TlmeSpec {
    TlmeSpec::new(
        random_lindblad(rng, n, 1),
        random_matrix(rng, n, 1.0),
        random_matrix(rng, n, 1.0),
        vec![random_matrix(rng, n, 0.7)],
        vec![random_matrix(rng, n, 0.7)],
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
