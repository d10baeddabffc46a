//! Three-qubit process tomography.
//!
//! Sixty-four product inputs are prepared from `{id, X90, Y90, X180}` on
//! each qubit, every output is reconstructed from its 64 Pauli expectation
//! values, and the process matrix follows by linear inversion. The process
//! matrix `chi` is expressed in the basis `B_m = {I, X, Ỹ, Z}^⊗3` with
//! `Ỹ = -iσ_y`, so that `E(ρ) = Σ chi_mn B_m ρ B_n†` and `Tr[chi] = 1` for a
//! trace-preserving process.
//!
//! Internally the Choi form `Λ = Σ_ab |a><b| ⊗ E(|a><b|)` (input index
//! slowest) is used for inversion and projection; `chi = V† Λ V / 64` with
//! `V` the matrix of column-vectorized basis operators.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_to_qubits, Channel};
use crate::error::{Error, Result};
use crate::gates::{ideal_toffoli_unitary, rotation_single, Axis};
use crate::register::{
    c64, hermitian_eigen, kron, max_abs_diff, pauli, trace_of_product, truncate_to_qubits, CMatrix,
    DensityOperator, RegisterLayout, StateVector, C64,
};
use crate::rng::{task_rng, Domain};

/// Number of qubits characterized.
pub const QUBITS: usize = 3;
/// Hilbert-space dimension of the characterized register.
pub const DIM: usize = 8;
/// Number of basis operators, inputs and Pauli observables.
pub const BASIS_SIZE: usize = 64;

const PAULI_CHARS: [char; 4] = ['I', 'X', 'Y', 'Z'];
const CHI_CHARS: [char; 4] = ['I', 'X', 'Ỹ', 'Z'];

fn ytilde() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[c64(0.0, 0.0), c64(-1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)],
    )
}

fn product_basis(singles: &[CMatrix; 4]) -> Vec<CMatrix> {
    (0..BASIS_SIZE)
        .map(|m| {
            kron(
                &kron(&singles[m / 16], &singles[(m / 4) % 4]),
                &singles[m % 4],
            )
        })
        .collect()
}

fn label(chars: &[char; 4], m: usize) -> String {
    [chars[m / 16], chars[(m / 4) % 4], chars[m % 4]]
        .iter()
        .collect()
}

/// `{I, X, Ỹ, Z}^⊗3`, ordered `III, IIX, IIỸ, IIZ, IXI, ..., ZZZ`.
pub fn chi_basis() -> &'static [CMatrix] {
    static BASIS: OnceLock<Vec<CMatrix>> = OnceLock::new();
    BASIS.get_or_init(|| product_basis(&[pauli::identity(), pauli::x(), ytilde(), pauli::z()]))
}

pub fn chi_basis_label(m: usize) -> String {
    label(&CHI_CHARS, m)
}

/// Hermitian three-qubit Pauli observables in the same order as [`chi_basis`].
pub fn pauli_observables() -> &'static [CMatrix] {
    static OBS: OnceLock<Vec<CMatrix>> = OnceLock::new();
    OBS.get_or_init(|| product_basis(&[pauli::identity(), pauli::x(), pauli::y(), pauli::z()]))
}

pub fn pauli_label(k: usize) -> String {
    label(&PAULI_CHARS, k)
}

/// Columns are the column-major vectorizations of the chi basis, so that
/// `(1 ⊗ B)|Ω> = V e_B`.
fn basis_vectors() -> &'static CMatrix {
    static V: OnceLock<CMatrix> = OnceLock::new();
    V.get_or_init(|| {
        let basis = chi_basis();
        CMatrix::from_fn(DIM * DIM, BASIS_SIZE, |r, m| basis[m][(r % DIM, r / DIM)])
    })
}

/// Row-major vectorization.
fn vec_rows(m: &CMatrix) -> Vec<C64> {
    (0..DIM * DIM).map(|r| m[(r / DIM, r % DIM)]).collect()
}

/// Process matrix in the modified Pauli basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiMatrix {
    matrix: CMatrix,
}

impl ChiMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != BASIS_SIZE || matrix.ncols() != BASIS_SIZE {
            return Err(Error::DimensionMismatch {
                expected: BASIS_SIZE,
                found: matrix.nrows(),
            });
        }
        Ok(ChiMatrix { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Rank-one chi of a unitary: `c c†` with `c_m = Tr[B_m† U] / 8`.
    pub fn from_unitary(u: &CMatrix) -> Result<Self> {
        if u.nrows() != DIM || u.ncols() != DIM {
            return Err(Error::DimensionMismatch {
                expected: DIM,
                found: u.nrows(),
            });
        }
        let c = CMatrix::from_fn(BASIS_SIZE, 1, |m, _| {
            trace_of_product(&chi_basis()[m].adjoint(), u) / DIM as f64
        });
        Ok(ChiMatrix {
            matrix: &c * c.adjoint(),
        })
    }

    pub fn ideal_toffoli() -> Self {
        Self::from_unitary(ideal_toffoli_unitary().matrix()).expect("8x8")
    }

    /// From the unnormalized Choi form `Λ` (trace 8 for a trace-preserving map).
    pub fn from_choi_unnormalized(lambda: &CMatrix) -> Self {
        let v = basis_vectors();
        ChiMatrix {
            matrix: v.adjoint() * lambda * v / c64(BASIS_SIZE as f64, 0.0),
        }
    }

    pub fn to_choi_unnormalized(&self) -> CMatrix {
        let v = basis_vectors();
        v * &self.matrix * v.adjoint()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix).0[0]
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs_diff(&self.matrix, &self.matrix.adjoint()) < tol
    }

    /// `E(ρ) = Σ chi_mn B_m ρ B_n†`, summed term by term.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let basis = chi_basis();
        let left: Vec<CMatrix> = basis.iter().map(|b| b * rho).collect();
        let mut out = CMatrix::zeros(DIM, DIM);
        for (n, bn) in basis.iter().enumerate() {
            let bn_dag = bn.adjoint();
            let mut acc = CMatrix::zeros(DIM, DIM);
            for (m, lm) in left.iter().enumerate() {
                let w = self.matrix[(m, n)];
                if w.norm() > 0.0 {
                    acc += lm * w;
                }
            }
            out += acc * bn_dag;
        }
        out
    }

    /// `Σ chi_mn B_n† B_m`, the identity for a trace-preserving process.
    pub fn trace_preservation_operator(&self) -> CMatrix {
        let basis = chi_basis();
        let mut out = CMatrix::zeros(DIM, DIM);
        for (n, bn) in basis.iter().enumerate() {
            let bn_dag = bn.adjoint();
            for (m, bm) in basis.iter().enumerate() {
                let w = self.matrix[(m, n)];
                if w.norm() > 0.0 {
                    out += &bn_dag * bm * w;
                }
            }
        }
        out
    }

    pub fn trace_preservation_residual(&self) -> f64 {
        max_abs_diff(
            &self.trace_preservation_operator(),
            &CMatrix::identity(DIM, DIM),
        )
    }

    pub fn to_document(&self, metadata: ChiMetadata) -> ChiDocument {
        ChiDocument {
            basis: (0..BASIS_SIZE).map(chi_basis_label).collect(),
            real: (0..BASIS_SIZE)
                .map(|r| (0..BASIS_SIZE).map(|c| self.matrix[(r, c)].re).collect())
                .collect(),
            imag: (0..BASIS_SIZE)
                .map(|r| (0..BASIS_SIZE).map(|c| self.matrix[(r, c)].im).collect())
                .collect(),
            metadata,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChiMetadata {
    pub kind: String,
    pub fidelity_to_ideal: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub trace_preservation_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_interval: Option<ConfidenceInterval>,
}

impl ChiMetadata {
    pub fn describe(chi: &ChiMatrix, kind: &str, reference: &ChiMatrix) -> Self {
        ChiMetadata {
            kind: kind.to_string(),
            fidelity_to_ideal: process_fidelity(chi, reference),
            trace: chi.trace(),
            min_eigenvalue: chi.min_eigenvalue(),
            trace_preservation_residual: chi.trace_preservation_residual(),
            confidence_interval: None,
        }
    }
}

/// Export format for plotting the process matrix as a bar chart.
#[derive(Clone, Debug, Serialize)]
pub struct ChiDocument {
    pub basis: Vec<String>,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
    pub metadata: ChiMetadata,
}

/// `Tr[chi_a chi_b]`, real part.
pub fn process_fidelity(a: &ChiMatrix, b: &ChiMatrix) -> f64 {
    trace_of_product(&a.matrix, &b.matrix).re
}

/// Single-qubit preparation pulses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PrepOp {
    Id,
    X90,
    Y90,
    X180,
}

impl PrepOp {
    pub const ALL: [PrepOp; 4] = [PrepOp::Id, PrepOp::X90, PrepOp::Y90, PrepOp::X180];

    pub fn name(self) -> &'static str {
        match self {
            PrepOp::Id => "id",
            PrepOp::X90 => "x90",
            PrepOp::Y90 => "y90",
            PrepOp::X180 => "x180",
        }
    }

    fn gate(self, site: usize) -> Option<crate::gates::GateOp> {
        match self {
            PrepOp::Id => None,
            PrepOp::X90 => Some(rotation_single(site, Axis::X, PI / 2.0)),
            PrepOp::Y90 => Some(rotation_single(site, Axis::Y, PI / 2.0)),
            PrepOp::X180 => Some(rotation_single(site, Axis::X, PI)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PreparedInput {
    pub ops: [PrepOp; QUBITS],
    pub state: StateVector,
}

impl PreparedInput {
    pub fn label(&self) -> String {
        self.ops
            .iter()
            .map(|o| o.name())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// The input restricted to the qubit levels.
    pub fn qubit_density(&self) -> DensityOperator {
        truncate_to_qubits(&self.state.to_density())
            .expect("qutrit input")
            .0
    }
}

/// The 64 product inputs, index `16 i_A + 4 i_B + i_C` over
/// `[id, x90, y90, x180]`.
pub fn input_state_set() -> Vec<PreparedInput> {
    let layout = RegisterLayout::qutrits(QUBITS).expect("valid");
    (0..BASIS_SIZE)
        .map(|j| {
            let ops = [
                PrepOp::ALL[j / 16],
                PrepOp::ALL[(j / 4) % 4],
                PrepOp::ALL[j % 4],
            ];
            let mut state = StateVector::basis(&layout, &[0, 0, 0]).expect("valid");
            for (site, op) in ops.iter().enumerate() {
                if let Some(g) = op.gate(site) {
                    state = state.apply(&g.unitary).expect("valid target");
                }
            }
            PreparedInput { ops, state }
        })
        .collect()
}

/// Expectation values are exact, or estimated from `shots` repetitions per
/// observable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sampling {
    Exact,
    Shots(u64),
}

impl Sampling {
    pub fn from_shots(shots: u64) -> Self {
        if shots == 0 {
            Sampling::Exact
        } else {
            Sampling::Shots(shots)
        }
    }
}

/// Outcome counts of one observable. Shots that find a qubit outside the
/// computational subspace are counted as leaked and contribute zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ShotCounts {
    pub plus: u64,
    pub minus: u64,
    pub leaked: u64,
}

impl ShotCounts {
    pub fn total(&self) -> u64 {
        self.plus + self.minus + self.leaked
    }

    pub fn expectation(&self) -> f64 {
        (self.plus as f64 - self.minus as f64) / self.total() as f64
    }

    /// Draws `shots` outcomes with probabilities `p_plus`, `p_minus` and
    /// the remainder leaked.
    pub fn draw<R: Rng>(shots: u64, p_plus: f64, p_minus: f64, rng: &mut R) -> Self {
        let p_plus = p_plus.clamp(0.0, 1.0);
        let p_minus = p_minus.clamp(0.0, 1.0);
        let kept_p = (p_plus + p_minus).min(1.0);
        let kept = binomial(shots, kept_p, rng);
        let plus = if kept_p > 0.0 {
            binomial(kept, p_plus / (p_plus + p_minus), rng)
        } else {
            0
        };
        ShotCounts {
            plus,
            minus: kept - plus,
            leaked: shots - kept,
        }
    }
}

pub(crate) fn binomial<R: Rng>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub input: usize,
    pub input_label: String,
    pub observable: usize,
    pub observable_label: String,
    pub expectation: f64,
    /// 0 for exact expectations.
    pub shots: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<ShotCounts>,
}

/// Exact `Tr[ρ P_k]` for the 64 three-qubit Pauli observables.
pub fn pauli_expectations(rho: &CMatrix) -> Vec<f64> {
    pauli_observables()
        .iter()
        .map(|p| trace_of_product(rho, p).re)
        .collect()
}

/// `ρ = (1/8) Σ_k <P_k> P_k`.
pub fn reconstruct_state(expectations: &[f64]) -> CMatrix {
    pauli_observables()
        .iter()
        .zip(expectations)
        .fold(CMatrix::zeros(DIM, DIM), |acc, (p, &e)| {
            acc + p * c64(e / DIM as f64, 0.0)
        })
}

fn measure(
    block: &CMatrix,
    sampling: Sampling,
    mut draw: impl FnMut(usize, u64, f64, f64) -> ShotCounts,
) -> Vec<Measured> {
    let exact = pauli_expectations(block);
    match sampling {
        Sampling::Exact => exact.into_iter().map(|e| (e, None)).collect(),
        Sampling::Shots(n) => {
            let tau = block.trace().re;
            exact
                .iter()
                .enumerate()
                .map(|(k, &e)| {
                    let counts = draw(k, n, (tau + e) / 2.0, (tau - e) / 2.0);
                    (counts.expectation(), Some(counts))
                })
                .collect()
        }
    }
}

/// Expectation of one observable, with its counts in shot mode.
pub type Measured = (f64, Option<ShotCounts>);

/// Reconstructs the qubit block of an output state from Pauli
/// measurements. Qutrit states are truncated first.
pub fn state_tomography<R: Rng>(
    rho_out: &DensityOperator,
    sampling: Sampling,
    rng: &mut R,
) -> Result<(DensityOperator, Vec<Measured>)> {
    let block = if rho_out.layout().is_all(3) {
        truncate_to_qubits(rho_out)?.0
    } else {
        rho_out.clone()
    };
    if block.layout().num_sites() != QUBITS {
        return Err(Error::LayoutMismatch);
    }
    let results = measure(block.matrix(), sampling, |_, n, pp, pm| {
        ShotCounts::draw(n, pp, pm, rng)
    });
    let expectations: Vec<f64> = results.iter().map(|r| r.0).collect();
    let rho = DensityOperator::new(block.layout().clone(), reconstruct_state(&expectations))?;
    Ok((rho, results))
}

/// Inverse of the matrix whose columns are the row-major vectorized inputs.
fn input_inverse() -> Result<&'static CMatrix> {
    static INV: OnceLock<Option<CMatrix>> = OnceLock::new();
    INV.get_or_init(|| {
        let inputs = input_state_set();
        let cols: Vec<Vec<C64>> = inputs
            .iter()
            .map(|p| vec_rows(p.qubit_density().matrix()))
            .collect();
        let r = CMatrix::from_fn(DIM * DIM, BASIS_SIZE, |row, j| cols[j][row]);
        r.try_inverse()
    })
    .as_ref()
    .ok_or(Error::SingularInversion)
}

/// Linear inversion from the 64 reconstructed output blocks, in input order.
pub fn chi_from_outputs(outputs: &[CMatrix]) -> Result<ChiMatrix> {
    if outputs.len() != BASIS_SIZE {
        return Err(Error::DimensionMismatch {
            expected: BASIS_SIZE,
            found: outputs.len(),
        });
    }
    let cols: Vec<Vec<C64>> = outputs.iter().map(vec_rows).collect();
    let o = CMatrix::from_fn(DIM * DIM, BASIS_SIZE, |row, j| cols[j][row]);
    // column (a, b) of S is vec E(|a><b|)
    let s = o * input_inverse()?;
    let lambda = CMatrix::from_fn(DIM * DIM, DIM * DIM, |r, c| {
        let (a, cc) = (r / DIM, r % DIM);
        let (b, d) = (c / DIM, c % DIM);
        s[(cc * DIM + d, a * DIM + b)]
    });
    Ok(ChiMatrix::from_choi_unnormalized(&lambda))
}

/// Rebuilds the raw chi matrix from a full record set.
pub fn reconstruct_chi(records: &[MeasurementRecord]) -> Result<ChiMatrix> {
    let mut expectations = vec![[0.0f64; BASIS_SIZE]; BASIS_SIZE];
    let mut seen = vec![[false; BASIS_SIZE]; BASIS_SIZE];
    for r in records {
        if r.input >= BASIS_SIZE || r.observable >= BASIS_SIZE {
            return Err(Error::DimensionMismatch {
                expected: BASIS_SIZE,
                found: r.input.max(r.observable),
            });
        }
        expectations[r.input][r.observable] = r.expectation;
        seen[r.input][r.observable] = true;
    }
    if seen.iter().flatten().any(|s| !s) {
        return Err(Error::SingularInversion);
    }
    let outputs: Vec<CMatrix> = expectations.iter().map(|e| reconstruct_state(e)).collect();
    chi_from_outputs(&outputs)
}

#[derive(Clone, Debug)]
pub struct TomographyResult {
    pub chi: ChiMatrix,
    pub records: Vec<MeasurementRecord>,
    /// Leaked population per input.
    pub leakage: Vec<f64>,
}

impl TomographyResult {
    /// `1 - Tr[chi]` before any physicality correction.
    pub fn trace_deficit(&self) -> f64 {
        1.0 - self.chi.trace()
    }
}

/// Full process tomography of `channel`. Shot noise for input `j` and
/// observable `k` comes from stream `64 j + k` of `seed`.
pub fn process_tomography(
    channel: &dyn Channel,
    sampling: Sampling,
    seed: u64,
) -> Result<TomographyResult> {
    let inputs = input_state_set();
    let per_input = inputs
        .par_iter()
        .enumerate()
        .map(|(j, input)| {
            let (block, leak) = apply_to_qubits(channel, &input.qubit_density())?;
            let results = measure(block.matrix(), sampling, |k, n, pp, pm| {
                let mut rng = task_rng(seed, Domain::TomographyShots, (j * BASIS_SIZE + k) as u64);
                ShotCounts::draw(n, pp, pm, &mut rng)
            });
            let label = input.label();
            let records: Vec<MeasurementRecord> = results
                .into_iter()
                .enumerate()
                .map(|(k, (e, counts))| MeasurementRecord {
                    input: j,
                    input_label: label.clone(),
                    observable: k,
                    observable_label: pauli_label(k),
                    expectation: e,
                    shots: counts.map_or(0, |c| c.total()),
                    counts,
                })
                .collect();
            Ok((records, leak))
        })
        .collect::<Result<Vec<_>>>()?;
    let leakage = per_input.iter().map(|p| p.1).collect();
    let records: Vec<MeasurementRecord> = per_input.into_iter().flat_map(|p| p.0).collect();
    let chi = reconstruct_chi(&records)?;
    Ok(TomographyResult {
        chi,
        records,
        leakage,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectionOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the step size (chi Frobenius norm) and on
    /// the largest entry of the returned matrix's trace-preservation error.
    pub tolerance: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            max_iterations: 10_000,
            tolerance: 1e-10,
        }
    }
}

fn project_psd(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v.max(0.0));
    }
    let out = scaled * vectors.adjoint();
    (&out + out.adjoint()) * c64(0.5, 0.0)
}

/// Largest entry of `Tr_out Λ - 1`.
fn tp_residual(lambda: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..DIM {
        for b in 0..DIM {
            let mut m = C64::default();
            for c in 0..DIM {
                m += lambda[(a * DIM + c, b * DIM + c)];
            }
            if a == b {
                m -= c64(1.0, 0.0);
            }
            worst = worst.max(m.norm());
        }
    }
    worst
}

/// Orthogonal projection of a Choi form onto `Tr_out Λ = 1`.
fn project_tp(lambda: &CMatrix) -> CMatrix {
    let mut out = lambda.clone();
    for a in 0..DIM {
        for b in 0..DIM {
            let mut m = C64::default();
            for c in 0..DIM {
                m += lambda[(a * DIM + c, b * DIM + c)];
            }
            if a == b {
                m -= c64(1.0, 0.0);
            }
            let shift = m / DIM as f64;
            for c in 0..DIM {
                out[(a * DIM + c, b * DIM + c)] -= shift;
            }
        }
    }
    out
}

/// Nearest trace-preserving process (Frobenius norm) to `chi`, ignoring
/// positivity. Linear and idempotent.
pub fn project_trace_preserving(chi: &ChiMatrix) -> ChiMatrix {
    ChiMatrix::from_choi_unnormalized(&project_tp(&chi.to_choi_unnormalized()))
}

/// Physicality correction with default options.
pub fn ml_projection(chi: &ChiMatrix) -> Result<ChiMatrix> {
    ml_projection_with(chi, ProjectionOptions::default()).map(|(c, _)| c)
}

/// Nearest completely positive, trace-preserving chi in Frobenius norm, by
/// Dykstra's alternating projections between the positive cone and the
/// trace-preserving affine subspace. Returns the projected matrix and the
/// number of iterations used.
pub fn ml_projection_with(
    chi: &ChiMatrix,
    options: ProjectionOptions,
) -> Result<(ChiMatrix, usize)> {
    if !chi.is_hermitian(1e-8) {
        return Err(Error::NotHermitian(max_abs_diff(
            chi.matrix(),
            &chi.matrix().adjoint(),
        )));
    }
    // ||chi||_F = ||Λ||_F / 8
    let scale = 1.0 / DIM as f64;
    let mut x = chi.to_choi_unnormalized();
    let n = x.nrows();
    let mut p = CMatrix::zeros(n, n);
    let mut q = CMatrix::zeros(n, n);
    let mut last_step = f64::INFINITY;
    for iteration in 1..=options.max_iterations {
        let y = project_psd(&(&x + &p));
        p = &x + &p - &y;
        let x_next = project_tp(&(&y + &q));
        q = &y + &q - &x_next;
        let step = (&x_next - &x).norm() * scale;
        let gap = (&x_next - &y).norm() * scale;
        x = x_next;
        last_step = step.max(gap);
        if last_step < options.tolerance && tp_residual(&y) < options.tolerance {
            return Ok((ChiMatrix::from_choi_unnormalized(&y), iteration));
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
        last_step,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub confidence: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of `Tr[chi_raw chi_ref]`: every record's counts are
/// resampled from their empirical frequencies and the reconstruction is
/// re-run for each of `resamples` replicas.
pub fn bootstrap_ci(
    records: &[MeasurementRecord],
    reference: &ChiMatrix,
    confidence: f64,
    resamples: usize,
    seed: u64,
) -> Result<ConfidenceInterval> {
    if records.iter().any(|r| r.counts.is_none()) || records.is_empty() {
        return Err(Error::ExactRecords);
    }
    if !(0.0 < confidence && confidence < 1.0) || resamples < 2 {
        return Err(Error::Config(
            "bootstrap needs 0 < confidence < 1 and >= 2 resamples".into(),
        ));
    }
    let mut fidelities = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, Domain::Bootstrap, r as u64);
            let replica: Vec<MeasurementRecord> = records
                .iter()
                .map(|rec| {
                    let c = rec.counts.expect("checked");
                    let n = c.total() as f64;
                    let counts = ShotCounts::draw(
                        c.total(),
                        c.plus as f64 / n,
                        c.minus as f64 / n,
                        &mut rng,
                    );
                    MeasurementRecord {
                        expectation: counts.expectation(),
                        counts: Some(counts),
                        ..rec.clone()
                    }
                })
                .collect();
            Ok(process_fidelity(&reconstruct_chi(&replica)?, reference))
        })
        .collect::<Result<Vec<f64>>>()?;
    fidelities.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Ok(ConfidenceInterval {
        low: quantile(&fidelities, tail),
        high: quantile(&fidelities, 1.0 - tail),
        confidence,
    })
}
