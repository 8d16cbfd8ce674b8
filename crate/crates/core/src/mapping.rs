//! System ⊗ qubit-ancilla Lindblad embeddings of time-local master equations.
//!
//! Given a TLME `K(ρ) = L_sys(ρ) + Bρ + ρC + Σ_j D_j ρ E_j†`, define
//!
//! ```text
//! H_l = B₊ + ½ Σ D_j†D_j        H_r = C₊ + ½ Σ E_j†E_j
//! α_l = λ⁺_max(H_l)             α_r = λ⁺_max(H_r)
//! S_l = α_l − H_l ≥ 0           S_r = α_r − H_r ≥ 0
//! ```
//!
//! with `X₊ = (X + X†)/2`, `X₋ = (X − X†)/2`. Two embeddings are provided:
//!
//! * [`Scheme::DiagonalAncilla`], weight `w = |0⟩⟨0|`, for
//!   Hermiticity-preserving TLMEs (`C = B†`, `E_j = D_j`):
//!   `H̃ = H_sys⊗1 + iB₋⊗1`, jumps `J_i⊗1`, `D_j⊗1`, `√(2S_l)⊗|1⟩⟨0|`.
//! * [`Scheme::OffDiagonalAncilla`], weight `w = |1⟩⟨0|`, for any TLME:
//!   `H̃ = H_sys⊗1 + i(B₋⊗p₀ − C₋⊗p₁)`, jumps `J_i⊗1`, `√(2S_l)⊗p₀`,
//!   `√(2S_r)⊗p₁`, `D_j⊗p₀ + E_j⊗p₁`.
//!
//! In both cases `ρ(t) = e^{αt} Tr_a[(1⊗w) ρ̃(t)]` with `α = α_l + α_r`.

// Provides float methods when std is absent from the build graph.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::linalg::{self, kron, paulis, ComplexMatrix, C64};
use crate::model::{DensityMatrix, LindbladSpec, TlmeSpec};

/// Residual below which a weight-algebra relation holds.
pub const ALGEBRA_TOL: f64 = 1e-9;

/// Tolerance on `V†V = 2S_l` for user-supplied dissipator roots.
pub const GAUGE_ROOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// `w = |0⟩⟨0|`; requires a Hermiticity-preserving TLME.
    DiagonalAncilla,
    /// `w = |1⟩⟨0|`; works for any TLME.
    OffDiagonalAncilla,
}

impl Scheme {
    pub fn weight(self) -> ComplexMatrix {
        match self {
            Scheme::DiagonalAncilla => paulis::p0(),
            Scheme::OffDiagonalAncilla => paulis::sigma_plus(),
        }
    }
}

/// Norm-growth decomposition of a TLME.
#[derive(Clone, Debug)]
pub struct AlphaDecomposition {
    pub alpha_l: f64,
    pub alpha_r: f64,
    pub h_l: ComplexMatrix,
    pub h_r: ComplexMatrix,
    pub s_l: ComplexMatrix,
    pub s_r: ComplexMatrix,
}

impl AlphaDecomposition {
    pub fn alpha(&self) -> f64 {
        self.alpha_l + self.alpha_r
    }

    /// `α > 0`: observables recovered from the embedding carry an
    /// exponentially growing statistical error.
    pub fn is_efficient(&self) -> bool {
        self.alpha() == 0.0
    }
}

/// Computes `α_l`, `α_r`, `S_l` and `S_r`.
pub fn compute_alpha(spec: &TlmeSpec) -> Result<AlphaDecomposition> {
    let n = spec.dim();
    let gram = |ops: &[ComplexMatrix]| {
        ops.iter().fold(ComplexMatrix::zeros(n, n), |mut acc, op| {
            acc += &op.adjoint().matmul(op);
            acc
        })
    };
    let mut h_l = spec.b().hermitian_part();
    h_l.axpy_real(0.5, &gram(spec.d_ops()));
    let mut h_r = spec.c().hermitian_part();
    h_r.axpy_real(0.5, &gram(spec.e_ops()));
    // Exact Hermitian symmetrization keeps round-off out of the eigensolver.
    let h_l = h_l.hermitian_part();
    let h_r = h_r.hermitian_part();

    let alpha_l = linalg::lambda_max_plus(&h_l)?;
    let alpha_r = linalg::lambda_max_plus(&h_r)?;
    let shift = |alpha: f64, h: &ComplexMatrix| {
        let mut s = ComplexMatrix::identity(n).scale_real(alpha);
        s -= h;
        s
    };
    Ok(AlphaDecomposition {
        s_l: shift(alpha_l, &h_l),
        s_r: shift(alpha_r, &h_r),
        alpha_l,
        alpha_r,
        h_l,
        h_r,
    })
}

/// Efficiency classifier written directly from its closed form:
/// `α = λ⁺[½(B+B†) + ½ΣD†D] + λ⁺[½(C+C†) + ½ΣE†E]`.
pub fn efficiency_alpha(spec: &TlmeSpec) -> Result<f64> {
    let side = |x: &ComplexMatrix, ops: &[ComplexMatrix]| -> Result<f64> {
        let mut m = (x + &x.adjoint()).scale_real(0.5);
        for op in ops {
            m.axpy_real(0.5, &op.adjoint().matmul(op));
        }
        linalg::lambda_max_plus(&m.hermitian_part())
    };
    Ok(side(spec.b(), spec.d_ops())? + side(spec.c(), spec.e_ops())?)
}

/// A Lindblad equation on `system ⊗ ancilla` plus the data needed to
/// recover the TLME state from it.
#[derive(Clone, Debug)]
pub struct MappedSystem {
    pub scheme: Scheme,
    pub lindblad: LindbladSpec,
    pub weight: ComplexMatrix,
    pub alpha_l: f64,
    pub alpha_r: f64,
    system_dim: usize,
}

impl MappedSystem {
    /// Assembles a mapped system from parts; used by couplings that exploit
    /// the gauge freedom of the embedding.
    pub fn from_parts(
        scheme: Scheme,
        lindblad: LindbladSpec,
        alpha_l: f64,
        alpha_r: f64,
    ) -> Result<Self> {
        if lindblad.dim() % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: lindblad.dim() + 1,
                found: lindblad.dim(),
            });
        }
        Ok(Self {
            scheme,
            weight: scheme.weight(),
            system_dim: lindblad.dim() / 2,
            lindblad,
            alpha_l,
            alpha_r,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_l + self.alpha_r
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    /// `1 ⊗ w` on the composite space.
    pub fn weight_operator(&self) -> ComplexMatrix {
        kron(&ComplexMatrix::identity(self.system_dim), &self.weight)
    }

    /// `X ⊗ w`; `⟨X⟩_TLME = e^{αt} Tr[(X⊗w) ρ̃]`.
    pub fn weighted_observable_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.system_dim || x.cols() != self.system_dim {
            return Err(Error::DimensionMismatch {
                expected: self.system_dim,
                found: x.rows(),
            });
        }
        Ok(kron(x, &self.weight))
    }
}

fn promote(op: &ComplexMatrix, ancilla: &ComplexMatrix) -> ComplexMatrix {
    kron(op, ancilla)
}

fn i_times(m: &ComplexMatrix) -> ComplexMatrix {
    m.scale(C64::new(0.0, 1.0))
}

/// Diagonal-ancilla embedding with the principal root `√(2S_l)`.
pub fn build_diagonal(spec: &TlmeSpec) -> Result<MappedSystem> {
    build_diagonal_with_root(spec, None)
}

/// Diagonal-ancilla embedding. `root`, when given, replaces `√(2S_l)` by any
/// `V` with `V†V = 2S_l`; only `V†V` enters the recovered dynamics.
pub fn build_diagonal_with_root(
    spec: &TlmeSpec,
    root: Option<&ComplexMatrix>,
) -> Result<MappedSystem> {
    if !spec.is_hermiticity_preserving() {
        return Err(Error::NotHermiticityPreserving);
    }
    let n = spec.dim();
    let alpha = compute_alpha(spec)?;
    let two_s_l = alpha.s_l.scale_real(2.0);
    let root = match root {
        Some(v) => {
            if v.rows() != n || v.cols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.rows(),
                });
            }
            let residual = (&v.adjoint().matmul(v) - &two_s_l).max_abs();
            if residual > GAUGE_ROOT_TOL {
                return Err(Error::GaugeRootMismatch { residual });
            }
            v.clone()
        }
        None => linalg::psd_sqrt(&two_s_l)?,
    };

    let one = ComplexMatrix::identity(2);
    let mut h = promote(spec.lsys().hamiltonian(), &one);
    h += &promote(&i_times(&spec.b().anti_hermitian_part()), &one);
    let h = h.hermitian_part();

    let mut jumps: Vec<ComplexMatrix> = spec
        .lsys()
        .jumps()
        .iter()
        .map(|j| promote(j, &one))
        .collect();
    jumps.extend(spec.d_ops().iter().map(|d| promote(d, &one)));
    jumps.push(promote(&root, &paulis::sigma_plus()));

    MappedSystem::from_parts(
        Scheme::DiagonalAncilla,
        LindbladSpec::new(h, jumps)?,
        alpha.alpha_l,
        alpha.alpha_r,
    )
}

/// Off-diagonal-ancilla embedding; valid for every TLME.
pub fn build_offdiagonal(spec: &TlmeSpec) -> Result<MappedSystem> {
    let alpha = compute_alpha(spec)?;
    let root_l = linalg::psd_sqrt(&alpha.s_l.scale_real(2.0))?;
    let root_r = linalg::psd_sqrt(&alpha.s_r.scale_real(2.0))?;
    let (one, p0, p1) = (ComplexMatrix::identity(2), paulis::p0(), paulis::p1());

    let mut h = promote(spec.lsys().hamiltonian(), &one);
    h += &promote(&i_times(&spec.b().anti_hermitian_part()), &p0);
    h -= &promote(&i_times(&spec.c().anti_hermitian_part()), &p1);
    let h = h.hermitian_part();

    let mut jumps: Vec<ComplexMatrix> = spec
        .lsys()
        .jumps()
        .iter()
        .map(|j| promote(j, &one))
        .collect();
    jumps.push(promote(&root_l, &p0));
    jumps.push(promote(&root_r, &p1));
    jumps.extend(
        spec.d_ops()
            .iter()
            .zip(spec.e_ops())
            .map(|(d, e)| &promote(d, &p0) + &promote(e, &p1)),
    );

    MappedSystem::from_parts(
        Scheme::OffDiagonalAncilla,
        LindbladSpec::new(h, jumps)?,
        alpha.alpha_l,
        alpha.alpha_r,
    )
}

/// `Tr_a[(1⊗w) ρ̃]` for a qubit ancilla.
pub fn weighted_partial_trace(
    weight: &ComplexMatrix,
    rho_tilde: &DensityMatrix,
    system_dim: usize,
) -> Result<DensityMatrix> {
    if rho_tilde.rows() != 2 * system_dim || rho_tilde.cols() != 2 * system_dim {
        return Err(Error::DimensionMismatch {
            expected: 2 * system_dim,
            found: rho_tilde.rows(),
        });
    }
    let mut out = ComplexMatrix::zeros(system_dim, system_dim);
    for s in 0..system_dim {
        for sp in 0..system_dim {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    let w = weight[(a, b)];
                    if w.re != 0.0 || w.im != 0.0 {
                        acc += w * rho_tilde[(2 * s + b, 2 * sp + a)];
                    }
                }
            }
            out[(s, sp)] = acc;
        }
    }
    Ok(out)
}

/// `ρ(t) = e^{αt} Tr_a[(1⊗w) ρ̃(t)]` for an autonomous embedding.
pub fn recover_state(ms: &MappedSystem, rho_tilde: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    recover_state_with_integral(ms, rho_tilde, ms.alpha() * t)
}

/// Recovery with an explicitly accumulated `∫₀ᵗ α dt'`.
pub fn recover_state_with_integral(
    ms: &MappedSystem,
    rho_tilde: &DensityMatrix,
    alpha_integral: f64,
) -> Result<DensityMatrix> {
    let block = weighted_partial_trace(&ms.weight, rho_tilde, ms.system_dim)?;
    Ok(block.scale_real(alpha_integral.exp()))
}

/// Piecewise-constant `α(t)`; `∫α` is accumulated exactly per segment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlphaSchedule {
    segments: Vec<(f64, f64)>,
}

impl AlphaSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a segment of length `duration` with rate `alpha`.
    pub fn push(&mut self, duration: f64, alpha: f64) {
        self.segments.push((duration, alpha));
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.0).sum()
    }

    /// `∫₀ᵗ α dt'`; the last segment's rate is extended beyond the schedule.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut start = 0.0;
        for &(len, alpha) in &self.segments {
            if t <= start + len {
                return acc + alpha * (t - start).max(0.0);
            }
            acc += alpha * len;
            start += len;
        }
        let tail = self.segments.last().map_or(0.0, |s| s.1);
        acc + tail * (t - start)
    }
}

/// Any `ρ̃(0)` with `Tr_a[(1⊗w) ρ̃(0)] = ρ₀`.
///
/// Diagonal scheme: `ρ₀ ⊗ |0⟩⟨0|`. Off-diagonal scheme: `ρ₀ ⊗ 2|+⟩⟨+|`, which
/// is positive for positive `ρ₀` and has trace `2 Tr ρ₀`.
pub fn initial_embedding(ms: &MappedSystem, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    if rho0.rows() != ms.system_dim || rho0.cols() != ms.system_dim {
        return Err(Error::DimensionMismatch {
            expected: ms.system_dim,
            found: rho0.rows(),
        });
    }
    let ancilla = match ms.scheme {
        Scheme::DiagonalAncilla => paulis::p0(),
        Scheme::OffDiagonalAncilla => ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0])?,
    };
    Ok(kron(rho0, &ancilla))
}

/// The embedding divided by its trace, and that trace.
///
/// Stochastic unravellings work with the unit-trace state; estimates are
/// multiplied back by `scale`.
pub fn normalized_embedding(
    ms: &MappedSystem,
    rho0: &DensityMatrix,
) -> Result<(DensityMatrix, f64)> {
    let embedded = initial_embedding(ms, rho0)?;
    let scale = embedded.trace().re;
    if scale.abs() < f64::MIN_POSITIVE {
        return Err(Error::InvalidParameter("initial state has zero trace"));
    }
    Ok((embedded.scale_real(1.0 / scale), scale))
}

/// Which relation of the quantum weight algebra a record refers to.
///
/// Indices: `j`, `i` select operators, `k` the dissipator family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `w f_j = γˡ_j w`
    LeftF { j: usize },
    /// `w f_j† = μˡ_j w`
    LeftFAdj { j: usize },
    /// `f_j w = γʳ_j w`
    RightF { j: usize },
    /// `f_j† w = μʳ_j w`
    RightFAdj { j: usize },
    /// `g_{j,k}† w g_{i,k} = κᵐ w`
    Middle { i: usize, j: usize, k: usize },
    /// `w g_{j,k}† g_{i,k} = κˡ w`
    LeftG { i: usize, j: usize, k: usize },
    /// `g_{j,k}† g_{i,k} w = κʳ w`
    RightG { i: usize, j: usize, k: usize },
    /// `μˡ_j = (γˡ_j)*`; the residual is `|μ − γ*|`.
    LeftConjugacy { j: usize },
    /// `μʳ_j = (γʳ_j)*`.
    RightConjugacy { j: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationRecord {
    pub relation: Relation,
    pub constant: C64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraReport {
    pub records: Vec<RelationRecord>,
    pub pass: bool,
}

impl AlgebraReport {
    pub fn constant(&self, relation: Relation) -> Option<C64> {
        self.records
            .iter()
            .find(|r| r.relation == relation)
            .map(|r| r.constant)
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

/// Checks the closure relations between a weight `w`, coherent couplings
/// `f_j` and dissipative coupling families `g_{i,k}` (outer index `k`).
///
/// Each constant is the Frobenius projection `⟨w, X⟩/⟨w, w⟩` of the
/// left-hand side `X`; the residual is `‖X − c·w‖_F`.
pub fn verify_weight_algebra(
    w: &ComplexMatrix,
    f_ops: &[ComplexMatrix],
    g_families: &[Vec<ComplexMatrix>],
) -> Result<AlgebraReport> {
    let norm2 = w.inner(w).re;
    if norm2 == 0.0 {
        return Err(Error::ZeroWeight);
    }
    let project = |relation: Relation, lhs: ComplexMatrix| {
        let constant = w.inner(&lhs) / norm2;
        let residual = (&lhs - &w.scale(constant)).frobenius_norm();
        RelationRecord {
            relation,
            constant,
            residual,
        }
    };

    let mut records = Vec::new();
    for (j, f) in f_ops.iter().enumerate() {
        let fa = f.adjoint();
        let left = project(Relation::LeftF { j }, w.matmul(f));
        let left_adj = project(Relation::LeftFAdj { j }, w.matmul(&fa));
        let right = project(Relation::RightF { j }, f.matmul(w));
        let right_adj = project(Relation::RightFAdj { j }, fa.matmul(w));
        let conj_l = RelationRecord {
            relation: Relation::LeftConjugacy { j },
            constant: left_adj.constant,
            residual: (left_adj.constant - left.constant.conj()).norm(),
        };
        let conj_r = RelationRecord {
            relation: Relation::RightConjugacy { j },
            constant: right_adj.constant,
            residual: (right_adj.constant - right.constant.conj()).norm(),
        };
        records.extend([left, left_adj, right, right_adj, conj_l, conj_r]);
    }
    for (k, family) in g_families.iter().enumerate() {
        for (i, gi) in family.iter().enumerate() {
            for (j, gj) in family.iter().enumerate() {
                let gj_adj = gj.adjoint();
                let gram = gj_adj.matmul(gi);
                records.push(project(
                    Relation::Middle { i, j, k },
                    gj_adj.matmul(w).matmul(gi),
                ));
                records.push(project(Relation::LeftG { i, j, k }, w.matmul(&gram)));
                records.push(project(Relation::RightG { i, j, k }, gram.matmul(w)));
            }
        }
    }
    let pass = records.iter().all(|r| r.residual <= ALGEBRA_TOL);
    Ok(AlgebraReport { records, pass })
}

/// Couplings realized by a mapped system, rewritten in the `(f, g)` form
/// checked by [`verify_weight_algebra`]: each jump `Σ_a N_a ⊗ g_a` is split
/// over the ancilla operator basis `{|a⟩⟨b|}`.
pub fn ancilla_basis() -> [ComplexMatrix; 4] {
    let unit = |a: usize, b: usize| {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(a, b)] = C64::new(1.0, 0.0);
        m
    };
    [unit(0, 0), unit(0, 1), unit(1, 0), unit(1, 1)]
}

/// Default ancilla couplings of the diagonal scheme: `f = 1` and the
/// dissipator families `{1}` and `{σ}`.
pub fn diagonal_scheme_couplings() -> (Vec<ComplexMatrix>, Vec<Vec<ComplexMatrix>>) {
    let one = ComplexMatrix::identity(2);
    (
        vec![one.clone()],
        vec![vec![one], vec![paulis::sigma_plus()]],
    )
}

/// Default ancilla couplings of the off-diagonal scheme.
pub fn offdiagonal_scheme_couplings() -> (Vec<ComplexMatrix>, Vec<Vec<ComplexMatrix>>) {
    let (p0, p1) = (paulis::p0(), paulis::p1());
    (
        vec![p0.clone(), p1.clone()],
        vec![
            vec![ComplexMatrix::identity(2)],
            vec![p0.clone()],
            vec![p1.clone()],
            vec![p0, p1],
        ],
    )
}
