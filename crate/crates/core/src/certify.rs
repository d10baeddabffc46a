//! Monte Carlo process certification.
//!
//! The target process is encoded as its Choi state `ρ_T` on three input and
//! three output qubits. Six-site Pauli strings with non-zero expectation on
//! `ρ_T` are sampled with probability `P_n² / 64`. Each sampled string is
//! measured on the actual process by preparing the eight product
//! eigenstates of its input half, running the process and measuring its
//! output half. The mean of `measured / ideal` estimates `Tr[ρ_T ρ_exp]`.
//!
//! Expectations of a string `A ⊗ B` are taken as `Tr[ρ (Aᵀ ⊗ B)]`, which is
//! what the eigenstate protocol measures. Transposition only flips the sign
//! of strings with an odd number of `σ_y` in the input half, so vanishing
//! and magnitudes are unaffected.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_to_qubits, Channel};
use crate::error::{Error, Result};
use crate::gates::ideal_toffoli_unitary;
use crate::register::{
    c64, trace_of_product, CMatrix, CVector, DensityOperator, RegisterLayout, StateVector, C64,
};
use crate::rng::{task_rng, Domain};
use crate::tomography::{pauli_observables, Sampling, ShotCounts, DIM};

/// Sites of a Choi string: three inputs then three outputs.
pub const SITES: usize = 6;
/// Number of six-site Pauli strings.
pub const STRING_COUNT: usize = 4096;
/// Smallest ideal expectation treated as non-vanishing.
pub const RELEVANCE_CUTOFF: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    fn symbol(self) -> char {
        ['I', 'X', 'Y', 'Z'][self.index()]
    }

    /// `P|b> = phase |b ^ flip>`.
    fn action(self, bit: usize) -> (usize, C64) {
        match self {
            Pauli::I => (0, c64(1.0, 0.0)),
            Pauli::X => (1, c64(1.0, 0.0)),
            Pauli::Y => (
                1,
                if bit == 0 {
                    c64(0.0, 1.0)
                } else {
                    c64(0.0, -1.0)
                },
            ),
            Pauli::Z => (
                0,
                if bit == 0 {
                    c64(1.0, 0.0)
                } else {
                    c64(-1.0, 0.0)
                },
            ),
        }
    }

    /// Eigenstates with their eigenvalues; the identity uses the
    /// computational basis with weight +1 for both.
    fn eigenstates(self) -> [(usize, f64); 2] {
        match self {
            Pauli::I => [(0, 1.0), (1, 1.0)],
            Pauli::X => [(2, 1.0), (3, -1.0)],
            Pauli::Y => [(4, 1.0), (5, -1.0)],
            Pauli::Z => [(0, 1.0), (1, -1.0)],
        }
    }
}

/// The six single-qubit Pauli eigenstates `|0>, |1>, |+>, |->, |+i>, |-i>`.
fn single_eigenstate(e: usize) -> [C64; 2] {
    let s = FRAC_1_SQRT_2;
    match e {
        0 => [c64(1.0, 0.0), c64(0.0, 0.0)],
        1 => [c64(0.0, 0.0), c64(1.0, 0.0)],
        2 => [c64(s, 0.0), c64(s, 0.0)],
        3 => [c64(s, 0.0), c64(-s, 0.0)],
        4 => [c64(s, 0.0), c64(0.0, s)],
        5 => [c64(s, 0.0), c64(0.0, -s)],
        _ => unreachable!("six eigenstates"),
    }
}

/// Which operator a string's input half stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputConvention {
    /// `Tr[ρ (Aᵀ ⊗ B)]`, matching the eigenstate protocol.
    Transposed,
    /// `Tr[ρ (A ⊗ B)]`.
    Literal,
}

/// A six-site Pauli label with its expectation on the target Choi state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PauliString {
    pub ops: [Pauli; SITES],
    pub ideal: f64,
}

/// Six Pauli factors; index `Σ 4^(5-k) ops[k]`.
pub type PauliLabel = [Pauli; SITES];

pub fn label_from_index(mut index: usize) -> PauliLabel {
    let mut ops = [Pauli::I; SITES];
    for slot in ops.iter_mut().rev() {
        *slot = Pauli::ALL[index % 4];
        index /= 4;
    }
    ops
}

pub fn label_string(ops: &PauliLabel) -> String {
    ops.iter().map(|p| p.symbol()).collect()
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&label_string(&self.ops))
    }
}

/// Normalized Choi state `(1/8) Σ_ij |i><j| ⊗ E(|i><j|)`, input first.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    matrix: CMatrix,
}

impl ChoiMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != DIM * DIM || matrix.ncols() != DIM * DIM {
            return Err(Error::DimensionMismatch {
                expected: DIM * DIM,
                found: matrix.nrows(),
            });
        }
        Ok(ChoiMatrix { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `|φ_U><φ_U|` with `|φ_U> = (1/√8) Σ_i |i> ⊗ U|i>`.
    pub fn from_unitary(u: &CMatrix) -> Result<Self> {
        if u.nrows() != DIM || u.ncols() != DIM {
            return Err(Error::DimensionMismatch {
                expected: DIM,
                found: u.nrows(),
            });
        }
        let phi = CVector::from_fn(DIM * DIM, |r, _| {
            u[(r % DIM, r / DIM)] / (DIM as f64).sqrt()
        });
        Ok(ChoiMatrix {
            matrix: &phi * phi.adjoint(),
        })
    }

    pub fn ideal_toffoli() -> Self {
        Self::from_unitary(ideal_toffoli_unitary().matrix()).expect("8x8")
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        trace_of_product(&self.matrix, &self.matrix).re
    }

    /// `Tr[ρ_a ρ_b]`.
    pub fn overlap(&self, other: &ChoiMatrix) -> f64 {
        trace_of_product(&self.matrix, &other.matrix).re
    }
}

/// Choi state of a process on three qubits. Qutrit processes are restricted
/// to the computational subspace first.
pub fn choi_of_channel(channel: &dyn Channel) -> Result<ChoiMatrix> {
    let qubits = RegisterLayout::qubits(3)?;
    let blocks = (0..DIM * DIM)
        .into_par_iter()
        .map(|ij| {
            let (i, j) = (ij / DIM, ij % DIM);
            let mut unit = CMatrix::zeros(DIM, DIM);
            unit[(i, j)] = c64(1.0, 0.0);
            let (out, _) = apply_to_qubits(channel, &DensityOperator::new(qubits.clone(), unit)?)?;
            Ok(out.into_matrix())
        })
        .collect::<Result<Vec<CMatrix>>>()?;
    let n = DIM * DIM;
    let matrix = CMatrix::from_fn(n, n, |r, c| {
        let (i, a) = (r / DIM, r % DIM);
        let (j, b) = (c / DIM, c % DIM);
        blocks[i * DIM + j][(a, b)] / DIM as f64
    });
    ChoiMatrix::new(matrix)
}

/// `Tr[ρ (A ⊗ B)]` for the literal six-site string.
fn literal_expectation(rho: &CMatrix, ops: &PauliLabel) -> f64 {
    let mut flip = 0usize;
    for (k, p) in ops.iter().enumerate() {
        flip |= p.action(0).0 << (SITES - 1 - k);
    }
    let mut acc = C64::default();
    for x in 0..(1usize << SITES) {
        let mut phase = c64(1.0, 0.0);
        for (k, p) in ops.iter().enumerate() {
            phase *= p.action((x >> (SITES - 1 - k)) & 1).1;
        }
        acc += rho[(x, x ^ flip)] * phase;
    }
    acc.re
}

fn transpose_sign(ops: &PauliLabel) -> f64 {
    if ops[..3].iter().filter(|&&p| p == Pauli::Y).count() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn expectation_with(rho: &ChoiMatrix, ops: &PauliLabel, convention: InputConvention) -> f64 {
    let literal = literal_expectation(&rho.matrix, ops);
    match convention {
        InputConvention::Literal => literal,
        InputConvention::Transposed => transpose_sign(ops) * literal,
    }
}

/// `Tr[ρ_E (Aᵀ ⊗ B)]` by direct contraction.
pub fn choi_expectation_direct(rho: &ChoiMatrix, ops: &PauliLabel) -> f64 {
    expectation_with(rho, ops, InputConvention::Transposed)
}

/// All strings whose expectation on `rho` exceeds the relevance cutoff.
pub fn enumerate_relevant_paulis(rho: &ChoiMatrix) -> Vec<PauliString> {
    enumerate_relevant_paulis_with(rho, InputConvention::Transposed)
}

pub fn enumerate_relevant_paulis_with(
    rho: &ChoiMatrix,
    convention: InputConvention,
) -> Vec<PauliString> {
    (0..STRING_COUNT)
        .filter_map(|index| {
            let ops = label_from_index(index);
            let ideal = expectation_with(rho, &ops, convention);
            (ideal.abs() > RELEVANCE_CUTOFF).then_some(PauliString { ops, ideal })
        })
        .collect()
}

fn product_state(codes: [usize; 3]) -> DensityOperator {
    let layout = RegisterLayout::qubits(3).expect("valid");
    let [a, b, c] = codes.map(single_eigenstate);
    let amps = CVector::from_fn(DIM, |x, _| a[(x >> 2) & 1] * b[(x >> 1) & 1] * c[x & 1]);
    StateVector::new(layout, amps)
        .expect("dimension 8")
        .to_density()
}

fn output_observable(ops: &PauliLabel) -> &'static CMatrix {
    &pauli_observables()[16 * ops[3].index() + 4 * ops[4].index() + ops[5].index()]
}

/// The eight product eigenstates of a string's input half, as
/// `(state codes, eigenvalue)`.
fn input_eigenstates(ops: &PauliLabel) -> Vec<([usize; 3], f64)> {
    let mut out = Vec::with_capacity(8);
    for (ea, la) in ops[0].eigenstates() {
        for (eb, lb) in ops[1].eigenstates() {
            for (ec, lc) in ops[2].eigenstates() {
                out.push(([ea, eb, ec], la * lb * lc));
            }
        }
    }
    out
}

/// `(1/8) Σ_k λ_k Tr[E(|a_k><a_k|) B]` over the eigenstates of the input half.
pub fn choi_expectation_via_eigenstates(channel: &dyn Channel, ops: &PauliLabel) -> Result<f64> {
    let observable = output_observable(ops);
    let mut acc = 0.0;
    for (codes, lambda) in input_eigenstates(ops) {
        let (out, _) = apply_to_qubits(channel, &product_state(codes))?;
        acc += lambda * trace_of_product(out.matrix(), observable).re;
    }
    Ok(acc / DIM as f64)
}

/// Process outputs for all 216 product Pauli eigenstates, computed once.
#[derive(Clone, Debug)]
pub struct EigenstateTable {
    outputs: Vec<CMatrix>,
}

impl EigenstateTable {
    pub fn build(channel: &dyn Channel) -> Result<Self> {
        let outputs = (0..216usize)
            .into_par_iter()
            .map(|code| {
                let (out, _) = apply_to_qubits(
                    channel,
                    &product_state([code / 36, (code / 6) % 6, code % 6]),
                )?;
                Ok(out.into_matrix())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EigenstateTable { outputs })
    }

    fn output(&self, codes: [usize; 3]) -> &CMatrix {
        &self.outputs[36 * codes[0] + 6 * codes[1] + codes[2]]
    }

    /// Eigenstate-protocol expectation. With shots, each of the eight
    /// output measurements is estimated from `shots` repetitions.
    pub fn expectation<R: rand::Rng>(
        &self,
        ops: &PauliLabel,
        sampling: Sampling,
        rng: &mut R,
    ) -> f64 {
        let observable = output_observable(ops);
        let mut acc = 0.0;
        for (codes, lambda) in input_eigenstates(ops) {
            let block = self.output(codes);
            let exact = trace_of_product(block, observable).re;
            let value = match sampling {
                Sampling::Exact => exact,
                Sampling::Shots(n) => {
                    let tau = block.trace().re;
                    ShotCounts::draw(n, (tau + exact) / 2.0, (tau - exact) / 2.0, rng).expectation()
                }
            };
            acc += lambda * value;
        }
        acc / DIM as f64
    }

    pub fn exact_expectation(&self, ops: &PauliLabel) -> f64 {
        let observable = output_observable(ops);
        input_eigenstates(ops)
            .into_iter()
            .map(|(codes, lambda)| lambda * trace_of_product(self.output(codes), observable).re)
            .sum::<f64>()
            / DIM as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    pub sampling: Sampling,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        McOptions {
            samples,
            seed,
            sampling: Sampling::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSummary {
    pub label: String,
    pub ideal: f64,
    /// Eigenstate-protocol value without shot noise.
    pub measured: f64,
    pub draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub per_observable: Vec<ObservableSummary>,
}

/// Importance-sampled estimate of `Tr[ρ_T ρ_exp]`. Sample `i` draws from
/// stream `i` of `options.seed`, so the result does not depend on thread
/// count.
pub fn monte_carlo_fidelity(
    channel: &dyn Channel,
    target: &ChoiMatrix,
    options: McOptions,
) -> Result<FidelityEstimate> {
    let relevant = enumerate_relevant_paulis(target);
    let table = EigenstateTable::build(channel)?;
    monte_carlo_fidelity_with(&table, &relevant, options)
}

/// Monte Carlo estimate from a prebuilt eigenstate table and relevant set.
pub fn monte_carlo_fidelity_with(
    table: &EigenstateTable,
    relevant: &[PauliString],
    options: McOptions,
) -> Result<FidelityEstimate> {
    if options.samples == 0 {
        return Err(Error::Config(
            "monte carlo certification needs at least one sample".into(),
        ));
    }
    let weights: Vec<f64> = relevant.iter().map(|p| p.ideal * p.ideal / 64.0).collect();
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::Config(format!("sampling weights: {e}")))?;

    let draws = (0..options.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(options.seed, Domain::CertifySamples, i as u64);
            let n = dist.sample(&mut rng);
            let string = &relevant[n];
            if string.ideal.abs() <= RELEVANCE_CUTOFF {
                return Err(Error::ZeroIdealExpectation(string.to_string()));
            }
            let measured = table.expectation(&string.ops, options.sampling, &mut rng);
            Ok((n, measured / string.ideal))
        })
        .collect::<Result<Vec<(usize, f64)>>>()?;

    let count = draws.len() as f64;
    let estimate = draws.iter().map(|d| d.1).sum::<f64>() / count;
    let std_error = if draws.len() > 1 {
        let var = draws.iter().map(|d| (d.1 - estimate).powi(2)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    } else {
        0.0
    };

    let mut tally = vec![0usize; relevant.len()];
    for (n, _) in &draws {
        tally[*n] += 1;
    }
    let per_observable = relevant
        .iter()
        .zip(tally)
        .map(|(p, draws)| ObservableSummary {
            label: p.to_string(),
            ideal: p.ideal,
            measured: table.exact_expectation(&p.ops),
            draws,
        })
        .collect();

    Ok(FidelityEstimate {
        estimate,
        std_error,
        samples: options.samples,
        per_observable,
    })
}

/// `Σ_n P_n M_n / 64` over every relevant string; equals `Tr[ρ_T ρ_exp]`.
pub fn exhaustive_fidelity(channel: &dyn Channel, target: &ChoiMatrix) -> Result<f64> {
    let table = EigenstateTable::build(channel)?;
    Ok(exhaustive_fidelity_with(
        &table,
        &enumerate_relevant_paulis(target),
    ))
}

pub fn exhaustive_fidelity_with(table: &EigenstateTable, relevant: &[PauliString]) -> f64 {
    relevant
        .iter()
        .map(|p| p.ideal * table.exact_expectation(&p.ops))
        .sum::<f64>()
        / 64.0
}

/// Certification output written by the runner.
#[derive(Clone, Debug, Serialize)]
pub struct CertificationReport {
    pub relevant_count: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub exhaustive: f64,
    pub seed: u64,
    pub samples: usize,
    pub shots: u64,
    pub strings: Vec<ObservableSummary>,
}
