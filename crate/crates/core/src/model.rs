//! Lindblad and time-local master equation generators.

// Provides float methods when std is absent from the build graph.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, SparseOp, C64, HERMITIAN_TOL};

/// Density matrix of either a Lindblad or a TLME evolution.
///
/// TLME states are generally unnormalized and may lose positivity, so no
/// trace or positivity invariant is attached.
pub type DensityMatrix = ComplexMatrix;

const HP_TOL: f64 = 1e-12;

/// Anything that can be written as `K(ρ) = Gρ + ρF + Σ_k D_k ρ E_k†`.
pub trait Generator {
    fn dim(&self) -> usize;

    fn sandwich(&self) -> SandwichForm;
}

/// Precomputed left/right/sandwich decomposition of a linear generator.
///
/// Every Lindblad or TLME generator is of this form. The dense factors are
/// kept for composition; application runs on their sparse copies.
#[derive(Clone, Debug)]
pub struct SandwichForm {
    left: ComplexMatrix,
    right: ComplexMatrix,
    pairs: Vec<(ComplexMatrix, ComplexMatrix)>,
    left_sp: SparseOp,
    right_sp: SparseOp,
    // (D_k, E_k†)
    pairs_sp: Vec<(SparseOp, SparseOp)>,
}

impl SandwichForm {
    /// `G`, `F` and the `(D_k, E_k)` pairs.
    pub fn new(
        left: ComplexMatrix,
        right: ComplexMatrix,
        pairs: Vec<(ComplexMatrix, ComplexMatrix)>,
    ) -> Self {
        let left_sp = SparseOp::from_dense(&left);
        let right_sp = SparseOp::from_dense(&right);
        let pairs_sp = pairs
            .iter()
            .map(|(d, e)| (SparseOp::from_dense(d), SparseOp::from_dense(&e.adjoint())))
            .collect();
        Self {
            left,
            right,
            pairs,
            left_sp,
            right_sp,
            pairs_sp,
        }
    }

    pub fn dim(&self) -> usize {
        self.left.dim()
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let n = rho.rows();
        let mut out = ComplexMatrix::zeros(n, rho.cols());
        let mut tmp = ComplexMatrix::zeros(n, rho.cols());
        self.left_sp.left_mul_acc(rho, &mut out);
        self.right_sp.right_mul_acc(rho, &mut out);
        for (d, e_adj) in &self.pairs_sp {
            e_adj.right_mul_into(rho, &mut tmp);
            d.left_mul_acc(&tmp, &mut out);
        }
        out
    }

    /// Crude operator-norm bound used for step-size warnings.
    pub fn norm_bound(&self) -> f64 {
        self.left.frobenius_norm()
            + self.right.frobenius_norm()
            + self
                .pairs
                .iter()
                .map(|(d, e)| d.frobenius_norm() * e.frobenius_norm())
                .sum::<f64>()
    }
}

impl Generator for SandwichForm {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn sandwich(&self) -> SandwichForm {
        self.clone()
    }
}

/// `dρ/dt = -i[H, ρ] + Σ_i (J_i ρ J_i† - ½{J_i†J_i, ρ})`.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladSpec {
    hamiltonian: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.rows(),
                found: hamiltonian.cols(),
            });
        }
        let deviation = hamiltonian.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let dim = hamiltonian.dim();
        check_dims(dim, &jumps)?;
        Ok(Self { hamiltonian, jumps })
    }

    /// Zero Hamiltonian and no jumps.
    pub fn trivial(dim: usize) -> Self {
        Self {
            hamiltonian: ComplexMatrix::zeros(dim, dim),
            jumps: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    /// `Σ_i J_i†J_i`.
    pub fn jump_gram(&self) -> ComplexMatrix {
        let n = self.dim();
        self.jumps
            .iter()
            .fold(ComplexMatrix::zeros(n, n), |mut acc, j| {
                acc += &j.adjoint().matmul(j);
                acc
            })
    }

    /// `H - (i/2) Σ J†J`, the no-jump evolution generator.
    pub fn effective_hamiltonian(&self) -> ComplexMatrix {
        let mut h = self.hamiltonian.clone();
        h.axpy(C64::new(0.0, -0.5), &self.jump_gram());
        h
    }

    /// Same spec with jump `index` removed.
    pub fn without_jump(&self, index: usize) -> Result<Self> {
        if index >= self.jumps.len() {
            return Err(Error::BadChannelIndex {
                index,
                count: self.jumps.len(),
            });
        }
        let mut jumps = self.jumps.clone();
        jumps.remove(index);
        Ok(Self {
            hamiltonian: self.hamiltonian.clone(),
            jumps,
        })
    }
}

impl Generator for LindbladSpec {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn sandwich(&self) -> SandwichForm {
        let half_gram = self.jump_gram().scale_real(0.5);
        let minus_i_h = self.hamiltonian.scale(C64::new(0.0, -1.0));
        let left = &minus_i_h - &half_gram;
        let right = &(-&minus_i_h) - &half_gram;
        let pairs = self.jumps.iter().map(|j| (j.clone(), j.clone())).collect();
        SandwichForm::new(left, right, pairs)
    }
}

/// `dρ/dt = L_sys(ρ) + Bρ + ρC + Σ_j D_j ρ E_j†`.
#[derive(Clone, Debug, PartialEq)]
pub struct TlmeSpec {
    lsys: LindbladSpec,
    b: ComplexMatrix,
    c: ComplexMatrix,
    d_ops: Vec<ComplexMatrix>,
    e_ops: Vec<ComplexMatrix>,
    hermiticity_preserving: bool,
}

impl TlmeSpec {
    pub fn new(
        lsys: LindbladSpec,
        b: ComplexMatrix,
        c: ComplexMatrix,
        d_ops: Vec<ComplexMatrix>,
        e_ops: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        let dim = lsys.dim();
        check_dims(dim, core::slice::from_ref(&b))?;
        check_dims(dim, core::slice::from_ref(&c))?;
        check_dims(dim, &d_ops)?;
        check_dims(dim, &e_ops)?;
        if d_ops.len() != e_ops.len() {
            return Err(Error::LengthMismatch {
                expected: d_ops.len(),
                found: e_ops.len(),
            });
        }
        let hermiticity_preserving = (&c - &b.adjoint()).max_abs() <= HP_TOL
            && d_ops
                .iter()
                .zip(&e_ops)
                .all(|(d, e)| (d - e).max_abs() <= HP_TOL);
        Ok(Self {
            lsys,
            b,
            c,
            d_ops,
            e_ops,
            hermiticity_preserving,
        })
    }

    /// TLME with `B = C = 0` and no sandwich terms.
    pub fn from_lindblad(lsys: LindbladSpec) -> Self {
        let n = lsys.dim();
        Self {
            lsys,
            b: ComplexMatrix::zeros(n, n),
            c: ComplexMatrix::zeros(n, n),
            d_ops: Vec::new(),
            e_ops: Vec::new(),
            hermiticity_preserving: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.lsys.dim()
    }

    pub fn lsys(&self) -> &LindbladSpec {
        &self.lsys
    }

    pub fn b(&self) -> &ComplexMatrix {
        &self.b
    }

    pub fn c(&self) -> &ComplexMatrix {
        &self.c
    }

    pub fn d_ops(&self) -> &[ComplexMatrix] {
        &self.d_ops
    }

    pub fn e_ops(&self) -> &[ComplexMatrix] {
        &self.e_ops
    }

    /// `C = B†` and `E_j = D_j` for all `j` (to 1e-12).
    pub fn is_hermiticity_preserving(&self) -> bool {
        self.hermiticity_preserving
    }
}

impl Generator for TlmeSpec {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn sandwich(&self) -> SandwichForm {
        let base = self.lsys.sandwich();
        let left = &base.left + &self.b;
        let right = &base.right + &self.c;
        let mut pairs = base.pairs;
        pairs.extend(
            self.d_ops
                .iter()
                .zip(&self.e_ops)
                .map(|(d, e)| (d.clone(), e.clone())),
        );
        SandwichForm::new(left, right, pairs)
    }
}

fn check_dims(dim: usize, ops: &[ComplexMatrix]) -> Result<()> {
    for op in ops {
        if op.rows() != dim || op.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: if op.rows() != dim { op.rows() } else { op.cols() },
            });
        }
    }
    Ok(())
}

fn check_state(dim: usize, rho: &ComplexMatrix) -> Result<()> {
    check_dims(dim, core::slice::from_ref(rho))
}

/// `-i[H, ρ] + Σ_i (J_i ρ J_i† - ½{J_i†J_i, ρ})`.
pub fn apply_lindblad(spec: &LindbladSpec, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_state(spec.dim(), rho)?;
    Ok(spec.sandwich().apply(rho))
}

/// `L_sys(ρ) + Bρ + ρC + Σ_j D_j ρ E_j†`.
pub fn apply_tlme(spec: &TlmeSpec, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_state(spec.dim(), rho)?;
    Ok(spec.sandwich().apply(rho))
}

/// Counting-field tilted generator
/// `W_s(ρ) = L'(ρ) + e^{-s} JρJ† - ½{J†J, ρ}` for the jump `J` at
/// `counted_channel`, where `L'` is `base` without that channel.
///
/// The anticommutator is carried by `B = C = -½J†J` and the gain term by
/// `D = E = e^{-s/2} J`, so the result is Hermiticity-preserving.
pub fn tilted_generator(base: &LindbladSpec, counted_channel: usize, s: f64) -> Result<TlmeSpec> {
    let lsys = base.without_jump(counted_channel)?;
    let j = &base.jumps()[counted_channel];
    let b = j.adjoint().matmul(j).scale_real(-0.5);
    let d = j.scale_real((-0.5 * s).exp());
    TlmeSpec::new(lsys, b.clone(), b, alloc::vec![d.clone()], alloc::vec![d])
}
