//! Gate library for three transmon qutrits and the Toffoli pulse sequence.
//!
//! Two-site gates are rotations inside the `{|11>, |20>}` subspace of a
//! neighbouring pair, reached by tuning a qutrit to the avoided crossing
//! between those states. A π rotation on `AB` hides `|11x>` as `i|20x>`,
//! a 2π rotation on `BC` acts as a controlled phase, and a 3π rotation on
//! `AB` restores the hidden states. Together they flip the sign of `|011>`
//! only. Wrapping `C` in `R_-y(π/2) ... R_+y(π/2)` turns that into a NOT on
//! `C` controlled by `A = 0, B = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_to_qubits, Channel, UnitaryChannel};
use crate::error::{Error, Result};
use crate::register::{
    c64, computational_block, embed, is_unitary, CMatrix, DensityOperator, LocalOperator,
    RegisterLayout, StateVector, ALGEBRAIC_TOL, C64,
};
use crate::rng::{task_rng, Domain};
use crate::tomography::binomial;

pub const SITE_A: usize = 0;
pub const SITE_B: usize = 1;
pub const SITE_C: usize = 2;

/// Microwave single-qubit pulse length.
pub const SINGLE_QUBIT_PULSE_NS: f64 = 8.0;
/// Calibrated π time of the `AB` subspace rotation.
pub const AB_PI_TIME_NS: f64 = 7.0;
/// Calibrated 2π (controlled-phase) time of the `BC` subspace rotation.
pub const BC_2PI_TIME_NS: f64 = 23.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(Error::UnknownAxis(s.to_string())),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Neighbouring qutrit pairs coupled through the resonator bus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Pair {
    AB,
    BC,
}

impl Pair {
    pub fn sites(self) -> [usize; 2] {
        match self {
            Pair::AB => [SITE_A, SITE_B],
            Pair::BC => [SITE_B, SITE_C],
        }
    }

    /// Interaction time for a rotation by `theta`, scaled linearly from the
    /// calibrated times.
    pub fn duration_ns(self, theta: f64) -> f64 {
        match self {
            Pair::AB => theta.abs() * AB_PI_TIME_NS / PI,
            Pair::BC => theta.abs() * BC_2PI_TIME_NS / (2.0 * PI),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateKind {
    Rotation { axis: Axis },
    SubspaceRotation { pair: Pair },
    Idle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    pub label: String,
    pub kind: GateKind,
    pub angle: f64,
    pub unitary: LocalOperator,
    pub duration_ns: f64,
}

impl GateOp {
    pub fn targets(&self) -> &[usize] {
        self.unitary.targets()
    }
}

/// `exp(-i angle sigma_axis / 2)` on levels {0, 1} of one qutrit, identity
/// on level 2. x and y rotations take one microwave pulse; z rotations are
/// frame changes of zero duration.
pub fn rotation_single(site: usize, axis: Axis, angle: f64) -> GateOp {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let zero = C64::default();
    let m = match axis {
        Axis::X => [c64(c, 0.0), c64(0.0, -s), c64(0.0, -s), c64(c, 0.0)],
        Axis::Y => [c64(c, 0.0), c64(-s, 0.0), c64(s, 0.0), c64(c, 0.0)],
        Axis::Z => [c64(c, -s), zero, zero, c64(c, s)],
    };
    let u = CMatrix::from_row_slice(
        3,
        3,
        &[
            m[0],
            m[1],
            zero,
            m[2],
            m[3],
            zero,
            zero,
            zero,
            c64(1.0, 0.0),
        ],
    );
    let duration_ns = match axis {
        Axis::X | Axis::Y => SINGLE_QUBIT_PULSE_NS,
        Axis::Z => 0.0,
    };
    GateOp {
        label: format!(
            "R{axis}({})_{}",
            format_angle(angle),
            RegisterLayout::site_name(site)
        ),
        kind: GateKind::Rotation { axis },
        angle,
        unitary: LocalOperator::new(vec![site], u).expect("3x3 operator"),
        duration_ns,
    }
}

/// `cos(θ/2) 1 + i sin(θ/2) X` on the ordered pair `{|11>, |20>}` of two
/// neighbouring qutrits, identity elsewhere. `θ = π` maps `|11>` to `i|20>`.
pub fn subspace_rotation(pair: Pair, theta: f64) -> GateOp {
    const ELEVEN: usize = 3 + 1;
    const TWENTY: usize = 2 * 3;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut u = CMatrix::identity(9, 9);
    u[(ELEVEN, ELEVEN)] = c64(c, 0.0);
    u[(TWENTY, TWENTY)] = c64(c, 0.0);
    u[(ELEVEN, TWENTY)] = c64(0.0, s);
    u[(TWENTY, ELEVEN)] = c64(0.0, s);
    GateOp {
        label: format!("SWAP11-20({})_{pair:?}", format_angle(theta)),
        kind: GateKind::SubspaceRotation { pair },
        angle: theta,
        unitary: LocalOperator::new(pair.sites().to_vec(), u).expect("9x9 operator"),
        duration_ns: pair.duration_ns(theta),
    }
}

/// Identity on every site for `duration_ns`; used for preparation and
/// measurement windows.
pub fn idle(layout: &RegisterLayout, duration_ns: f64, label: &str) -> GateOp {
    let n = layout.total_dim();
    GateOp {
        label: label.to_string(),
        kind: GateKind::Idle,
        angle: 0.0,
        unitary: LocalOperator::new((0..layout.num_sites()).collect(), CMatrix::identity(n, n))
            .expect("square"),
        duration_ns,
    }
}

fn format_angle(angle: f64) -> String {
    let k = angle / (PI / 2.0);
    if (k - k.round()).abs() < 1e-12 {
        match k.round() as i64 {
            0 => "0".into(),
            1 => "pi/2".into(),
            -1 => "-pi/2".into(),
            2 => "pi".into(),
            -2 => "-pi".into(),
            n if n % 2 == 0 => format!("{}pi", n / 2),
            n => format!("{n}pi/2"),
        }
    } else {
        format!("{angle:.6}")
    }
}

/// An ordered gate list on a register with sequential start times.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    layout: RegisterLayout,
    ops: Vec<GateOp>,
    schedule: Vec<f64>,
}

impl Circuit {
    pub fn new(layout: RegisterLayout, ops: Vec<GateOp>) -> Result<Self> {
        for op in &ops {
            embed(&op.unitary, &layout)?;
            if op.duration_ns < 0.0 {
                return Err(Error::NegativeDuration(op.duration_ns));
            }
        }
        let mut t = 0.0;
        let schedule = ops
            .iter()
            .map(|op| {
                let start = t;
                t += op.duration_ns;
                start
            })
            .collect();
        Ok(Circuit {
            layout,
            ops,
            schedule,
        })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn schedule(&self) -> &[f64] {
        &self.schedule
    }

    pub fn total_duration_ns(&self) -> f64 {
        self.ops.iter().map(|op| op.duration_ns).sum()
    }

    /// Full-register matrices of each step, in order.
    pub fn step_unitaries(&self) -> Vec<CMatrix> {
        self.ops
            .iter()
            .map(|op| embed(&op.unitary, &self.layout).expect("validated at construction"))
            .collect()
    }

    /// Product of all steps, last step leftmost.
    pub fn unitary(&self) -> CMatrix {
        let n = self.layout.total_dim();
        self.step_unitaries()
            .into_iter()
            .fold(CMatrix::identity(n, n), |acc, u| u * acc)
    }

    /// State after each step.
    pub fn trajectory(&self, input: &StateVector) -> Result<Vec<StateVector>> {
        if input.layout() != &self.layout {
            return Err(Error::LayoutMismatch);
        }
        let mut state = input.clone();
        let mut out = Vec::with_capacity(self.ops.len());
        for u in self.step_unitaries() {
            state = state.apply_matrix(&u)?;
            out.push(state.clone());
        }
        Ok(out)
    }

    /// Same gates with every duration multiplied by `factor`.
    pub fn time_scaled(&self, factor: f64) -> Result<Self> {
        let ops = self
            .ops
            .iter()
            .cloned()
            .map(|mut op| {
                op.duration_ns *= factor;
                op
            })
            .collect();
        Circuit::new(self.layout.clone(), ops)
    }

    pub fn to_document(&self) -> CircuitDocument {
        CircuitDocument {
            dims: self.layout.dims().to_vec(),
            total_duration_ns: self.total_duration_ns(),
            ops: self
                .ops
                .iter()
                .zip(&self.schedule)
                .map(|(op, &start)| OpDocument {
                    label: op.label.clone(),
                    kind: op.kind,
                    targets: op
                        .targets()
                        .iter()
                        .map(|&s| RegisterLayout::site_name(s).to_string())
                        .collect(),
                    angle: op.angle,
                    duration_ns: op.duration_ns,
                    start_ns: start,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CircuitDocument {
    pub dims: Vec<usize>,
    pub total_duration_ns: f64,
    pub ops: Vec<OpDocument>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OpDocument {
    pub label: String,
    #[serde(flatten)]
    pub kind: GateKind,
    pub targets: Vec<String>,
    pub angle: f64,
    pub duration_ns: f64,
    pub start_ns: f64,
}

/// π-SWAP on AB, CPHASE on BC, 3π-SWAP on AB.
pub fn ccphase_ops() -> Vec<GateOp> {
    vec![
        subspace_rotation(Pair::AB, PI),
        subspace_rotation(Pair::BC, 2.0 * PI),
        subspace_rotation(Pair::AB, 3.0 * PI),
    ]
}

pub fn ccphase_circuit() -> Circuit {
    Circuit::new(RegisterLayout::qutrits(3).expect("valid"), ccphase_ops()).expect("valid sequence")
}

pub fn toffoli_circuit() -> Circuit {
    let mut ops = vec![rotation_single(SITE_C, Axis::Y, -PI / 2.0)];
    ops.extend(ccphase_ops());
    ops.push(rotation_single(SITE_C, Axis::Y, PI / 2.0));
    Circuit::new(RegisterLayout::qutrits(3).expect("valid"), ops).expect("valid sequence")
}

/// Index of `|010>` and `|011>` in the three-qubit basis.
const TOFFOLI_SWAPPED: (usize, usize) = (2, 3);

/// Basis permutation of the gate: NOT on `C` when `A = 0` and `B = 1`.
pub fn toffoli_permutation(input: usize) -> usize {
    match input {
        i if i == TOFFOLI_SWAPPED.0 => TOFFOLI_SWAPPED.1,
        i if i == TOFFOLI_SWAPPED.1 => TOFFOLI_SWAPPED.0,
        i => i,
    }
}

/// The 8x8 reference permutation matrix on three qubits.
pub fn ideal_toffoli_unitary() -> LocalOperator {
    let mut u = CMatrix::zeros(8, 8);
    for i in 0..8 {
        u[(toffoli_permutation(i), i)] = c64(1.0, 0.0);
    }
    LocalOperator::new(vec![SITE_A, SITE_B, SITE_C], u).expect("square")
}

/// Restriction of a circuit's unitary to the computational subspace.
pub fn restricted_unitary(circuit: &Circuit) -> Result<CMatrix> {
    computational_block(&circuit.unitary(), circuit.layout())
}

/// Max elementwise deviation between `u` and `reference` after removing the
/// global phase that maximizes `|Tr[u^dagger reference]|`.
pub fn phase_aligned_deviation(u: &CMatrix, reference: &CMatrix) -> f64 {
    let overlap = (u.adjoint() * reference).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c64(1.0, 0.0)
    };
    let aligned = u * phase;
    crate::register::max_abs_diff(&aligned, reference)
}

/// Ideal unitary evolution of a circuit as a channel.
pub fn ideal_channel(circuit: &Circuit) -> UnitaryChannel {
    UnitaryChannel::new(circuit.layout().clone(), circuit.unitary()).expect("circuit dimensions")
}

/// One basis component of a state, for printing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Amplitude {
    pub basis: String,
    pub re: f64,
    pub im: f64,
}

/// Non-zero components of `state`, in basis order.
pub fn sparse_amplitudes(state: &StateVector) -> Vec<Amplitude> {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > ALGEBRAIC_TOL)
        .map(|(k, a)| Amplitude {
            basis: state.layout().basis_label(k),
            re: a.re,
            im: a.im,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub gate: String,
    pub state: Vec<Amplitude>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateTrace {
    pub input: String,
    pub steps: Vec<TraceStep>,
}

/// State of every computational input after each gate of the controlled
/// phase sequence.
pub fn ccphase_trace() -> Result<Vec<StateTrace>> {
    let circuit = ccphase_circuit();
    let layout = circuit.layout().clone();
    (0..8usize)
        .map(|x| {
            let input = StateVector::basis(&layout, &[x >> 2, (x >> 1) & 1, x & 1])?;
            let states = circuit.trajectory(&input)?;
            let steps = circuit
                .ops()
                .iter()
                .zip(&states)
                .map(|(op, s)| TraceStep {
                    gate: op.label.clone(),
                    state: sparse_amplitudes(s),
                })
                .collect();
            Ok(StateTrace {
                input: format!("{:03b}", x),
                steps,
            })
        })
        .collect()
}

/// Output populations on the computational basis; entry `(j, i)` is the
/// population of `|j>` given input `|i>`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthTable {
    pub matrix: Vec<Vec<f64>>,
}

impl TruthTable {
    pub fn entry(&self, output: usize, input: usize) -> f64 {
        self.matrix[output][input]
    }

    /// Population of the ideal output for each input.
    pub fn diagonal_weights(&self) -> Vec<f64> {
        (0..8)
            .map(|i| self.entry(toffoli_permutation(i), i))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let labels: Vec<String> = (0..8).map(|i| format!("{i:03b}")).collect();
        let mut out = format!("output\\input,{}\n", labels.join(","));
        for (j, row) in self.matrix.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&format!("{},{}\n", labels[j], cells.join(",")));
        }
        out
    }

    /// Frequencies from `shots` single-shot readouts per input. Input `i`
    /// draws from stream `i` of `seed`; leaked shots land in no column.
    pub fn sampled(&self, shots: u64, seed: u64) -> TruthTable {
        let mut matrix = vec![vec![0.0; 8]; 8];
        #[allow(clippy::needless_range_loop)]
        for i in 0..8 {
            let mut rng = task_rng(seed, Domain::TruthTableShots, i as u64);
            let (mut left, mut mass) = (shots, 1.0f64);
            for j in 0..8 {
                let p = self.entry(j, i);
                let k = if mass > 0.0 {
                    binomial(left, (p / mass).min(1.0), &mut rng)
                } else {
                    0
                };
                matrix[j][i] = k as f64 / shots as f64;
                left -= k;
                mass -= p;
            }
        }
        TruthTable { matrix }
    }
}

pub fn truth_table(channel: &dyn Channel) -> Result<TruthTable> {
    let qubits = RegisterLayout::qubits(3)?;
    let columns = (0..8usize)
        .into_par_iter()
        .map(|i| {
            let input = DensityOperator::basis(&qubits, &qubits.levels_of(i))?;
            let (out, _) = apply_to_qubits(channel, &input)?;
            Ok(out
                .populations()
                .into_iter()
                .map(|p| p.clamp(0.0, 1.0))
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = (0..8)
        .map(|j| (0..8).map(|i| columns[i][j]).collect())
        .collect();
    Ok(TruthTable { matrix })
}

/// `(1/8) Tr[T U_ideal]` with `U_ideal` the reference permutation.
pub fn truth_table_fidelity(tt: &TruthTable) -> f64 {
    // Tr[T P] = sum_i T[i][p(i)] for a symmetric permutation P.
    (0..8)
        .map(|i| tt.entry(i, toffoli_permutation(i)))
        .sum::<f64>()
        / 8.0
}

/// Checks that every gate of a circuit is unitary within tolerance.
pub fn all_unitary(circuit: &Circuit) -> bool {
    circuit
        .ops()
        .iter()
        .all(|op| is_unitary(op.unitary.matrix(), ALGEBRAIC_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Depolarizing;
    use crate::register::max_abs_diff;

    fn q3() -> RegisterLayout {
        RegisterLayout::qutrits(3).unwrap()
    }

    fn ket(levels: &[usize]) -> StateVector {
        StateVector::basis(&q3(), levels).unwrap()
    }

    fn amp(s: &StateVector, levels: &[usize]) -> C64 {
        s.amplitudes()[q3().index_of(levels).unwrap()]
    }

    #[test]
    fn single_rotations() {
        let ry = rotation_single(SITE_C, Axis::Y, PI / 2.0);
        let out = ket(&[0, 0, 0]).apply(&ry.unitary).unwrap();
        let s = 0.5f64.sqrt();
        assert!((amp(&out, &[0, 0, 0]) - c64(s, 0.0)).norm() < 1e-15);
        assert!((amp(&out, &[0, 0, 1]) - c64(s, 0.0)).norm() < 1e-15);

        let r0 = rotation_single(SITE_A, Axis::X, 0.0);
        assert_eq!(r0.duration_ns, 8.0);
        assert!(max_abs_diff(r0.unitary.matrix(), &CMatrix::identity(3, 3)) < 1e-15);

        let rx = rotation_single(SITE_A, Axis::X, PI);
        assert_eq!(ket(&[2, 0, 0]).apply(&rx.unitary).unwrap(), ket(&[2, 0, 0]));
        assert_eq!(rotation_single(SITE_B, Axis::Z, 0.3).duration_ns, 0.0);
        assert!(matches!("w".parse::<Axis>(), Err(Error::UnknownAxis(_))));
        assert_eq!("Y".parse::<Axis>().unwrap(), Axis::Y);
    }

    #[test]
    fn subspace_rotation_phases() {
        let pi_ab = subspace_rotation(Pair::AB, PI);
        let out = ket(&[1, 1, 0]).apply(&pi_ab.unitary).unwrap();
        assert!((amp(&out, &[2, 0, 0]) - c64(0.0, 1.0)).norm() < 1e-15);

        let cphase = subspace_rotation(Pair::BC, 2.0 * PI);
        let out = ket(&[0, 1, 1]).apply(&cphase.unitary).unwrap();
        assert!((amp(&out, &[0, 1, 1]) + c64(1.0, 0.0)).norm() < 1e-15);

        for theta in [0.3, PI, 2.5] {
            let g = subspace_rotation(Pair::AB, theta);
            assert_eq!(ket(&[0, 0, 0]).apply(&g.unitary).unwrap(), ket(&[0, 0, 0]));
        }

        let three = subspace_rotation(Pair::AB, 3.0 * PI);
        let prod = three.unitary.matrix() * pi_ab.unitary.matrix();
        assert!(max_abs_diff(&prod, &CMatrix::identity(9, 9)) < 1e-15);
    }

    #[test]
    fn durations() {
        assert_eq!(subspace_rotation(Pair::AB, PI).duration_ns, 7.0);
        assert!((subspace_rotation(Pair::AB, 3.0 * PI).duration_ns - 21.0).abs() < 1e-12);
        assert!((subspace_rotation(Pair::BC, 2.0 * PI).duration_ns - 23.0).abs() < 1e-12);
        assert!((subspace_rotation(Pair::AB, PI / 2.0).duration_ns - 3.5).abs() < 1e-12);
        assert!((toffoli_circuit().total_duration_ns() - 67.0).abs() < 1e-12);
        let sched = toffoli_circuit().schedule().to_vec();
        let want = [0.0, 8.0, 15.0, 38.0, 59.0];
        for (a, b) in sched.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn every_gate_is_unitary() {
        assert!(all_unitary(&toffoli_circuit()));
        for theta in [0.1, 1.0, PI, 4.0] {
            assert!(subspace_rotation(Pair::BC, theta).unitary.is_unitary(1e-10));
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                assert!(rotation_single(SITE_B, axis, theta)
                    .unitary
                    .is_unitary(1e-10));
            }
        }
    }

    /// Brute-force product of the three 27x27 rotations.
    #[test]
    fn ccphase_restricted_is_sign_flip_on_011() {
        let l = q3();
        let steps: Vec<CMatrix> = ccphase_ops()
            .iter()
            .map(|g| embed(&g.unitary, &l).unwrap())
            .collect();
        let full = &steps[2] * &steps[1] * &steps[0];
        let block = computational_block(&full, &l).unwrap();
        let want = [1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        for i in 0..8 {
            for j in 0..8 {
                let w = if i == j {
                    c64(want[i], 0.0)
                } else {
                    C64::default()
                };
                assert!((block[(i, j)] - w).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn ccphase_leaves_no_leakage() {
        let c = ccphase_circuit();
        let q = RegisterLayout::qubits(3).unwrap();
        for i in 0..8 {
            let out = ket(&q.levels_of(i)).apply_matrix(&c.unitary()).unwrap();
            let inside: f64 = crate::register::computational_indices(&q3())
                .unwrap()
                .iter()
                .map(|&k| out.amplitudes()[k].norm_sqr())
                .sum();
            assert!((inside - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn toffoli_is_exact_controlled_not() {
        let u = restricted_unitary(&toffoli_circuit()).unwrap();
        let ideal = ideal_toffoli_unitary();
        assert!(phase_aligned_deviation(&u, ideal.matrix()) < 1e-10);

        let out = ket(&[0, 1, 0])
            .apply_matrix(&toffoli_circuit().unitary())
            .unwrap();
        assert!((amp(&out, &[0, 1, 1]).norm() - 1.0).abs() < 1e-12);
        let out = ket(&[1, 1, 0])
            .apply_matrix(&toffoli_circuit().unitary())
            .unwrap();
        assert!((amp(&out, &[1, 1, 0]).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_sandwich_gives_conditional_phase() {
        let mut ops = vec![rotation_single(SITE_C, Axis::Y, PI / 2.0)];
        ops.extend(ccphase_ops());
        ops.push(rotation_single(SITE_C, Axis::Y, -PI / 2.0));
        let c = Circuit::new(q3(), ops).unwrap();
        let u = restricted_unitary(&c).unwrap();
        assert!(phase_aligned_deviation(&u, ideal_toffoli_unitary().matrix()) > 0.5);
        // |01> block is -X
        assert!((u[(3, 2)] + c64(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn ideal_unitary_properties() {
        let u = ideal_toffoli_unitary();
        assert_eq!(u.matrix().trace(), c64(6.0, 0.0));
        assert_eq!(u.matrix() * u.matrix(), CMatrix::identity(8, 8));
    }

    #[test]
    fn phase_alignment_ignores_global_phase() {
        let u = ideal_toffoli_unitary().matrix() * C64::from_polar(1.0, 0.7);
        assert!(phase_aligned_deviation(&u, ideal_toffoli_unitary().matrix()) < 1e-14);
    }

    #[test]
    fn truth_tables() {
        let tt = truth_table(&ideal_channel(&toffoli_circuit())).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if j == toffoli_permutation(i) {
                    1.0
                } else {
                    0.0
                };
                assert!((tt.entry(j, i) - want).abs() < 1e-12);
            }
        }
        assert!((truth_table_fidelity(&tt) - 1.0).abs() < 1e-12);

        let dep = truth_table(&Depolarizing::new(RegisterLayout::qubits(3).unwrap())).unwrap();
        assert!(dep
            .matrix
            .iter()
            .flatten()
            .all(|v| (v - 0.125).abs() < 1e-15));
        assert!((truth_table_fidelity(&dep) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn csv_has_header_and_eight_rows() {
        let tt = truth_table(&ideal_channel(&toffoli_circuit())).unwrap();
        let csv = tt.to_csv();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("output\\input,000,001,"));
        assert!(csv
            .lines()
            .nth(3)
            .unwrap()
            .starts_with("010,0.000000,0.000000,0.000000,1.000000"));
    }

    #[test]
    fn circuit_document_lists_ops_in_order() {
        let doc = serde_json::to_value(toffoli_circuit().to_document()).unwrap();
        let ops = doc["ops"].as_array().unwrap();
        assert_eq!(ops.len(), 5);
        assert_eq!(ops[0]["targets"], serde_json::json!(["C"]));
        assert_eq!(ops[1]["kind"], "subspace_rotation");
        assert_eq!(ops[2]["targets"], serde_json::json!(["B", "C"]));
        assert_eq!(doc["total_duration_ns"], 67.0);
    }

    #[test]
    fn trace_lists_hidden_states() {
        let trace = ccphase_trace().unwrap();
        assert_eq!(trace.len(), 8);
        let row = &trace[0b110];
        assert_eq!(row.steps.len(), 3);
        let hidden = &row.steps[0].state;
        assert_eq!(hidden.len(), 1);
        assert_eq!(hidden[0].basis, "200");
        assert!((hidden[0].im - 1.0).abs() < 1e-12 && hidden[0].re.abs() < 1e-12);
        let last = &trace[0b011].steps[2].state;
        assert_eq!(last[0].basis, "011");
        assert!((last[0].re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_truth_table_converges() {
        let tt = truth_table(&ideal_channel(&toffoli_circuit())).unwrap();
        let sampled = tt.sampled(50, 1);
        assert!(
            (0..64).all(|k| (sampled.entry(k / 8, k % 8) - tt.entry(k / 8, k % 8)).abs() < 1e-12)
        );
        let mixed = TruthTable {
            matrix: vec![vec![0.1; 8]; 8],
        };
        let s = mixed.sampled(20_000, 3);
        for i in 0..8 {
            let col: f64 = (0..8).map(|j| s.entry(j, i)).sum();
            assert!((col - 0.8).abs() < 0.02);
            assert!((0..8).all(|j| (s.entry(j, i) - 0.1).abs() < 0.01));
        }
        assert_eq!(s, mixed.sampled(20_000, 3));
    }
}
