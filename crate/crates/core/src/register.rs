//! Dense linear algebra over registers of qubits and qutrits.
//!
//! Sites are ordered as written in a ket: the leftmost symbol is site `A`
//! and is the slowest-varying index of the row-major basis enumeration.
//! For a `(3, 3, 3)` layout the basis state `|ABC>` has index `9a + 3b + c`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest number of sites a layout may hold.
pub const MAX_SITES: usize = 6;

/// Tolerance for algebraic identities (hermiticity, unitarity, trace).
pub const ALGEBRAIC_TOL: f64 = 1e-10;
/// Tolerance for eigenvalue positivity.
pub const EIGENVALUE_TOL: f64 = 1e-8;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Numerical tolerances used by validation helpers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub algebraic: f64,
    pub eigenvalue: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebraic: ALGEBRAIC_TOL,
            eigenvalue: EIGENVALUE_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegisterLayout {
    dims: Vec<usize>,
}

impl RegisterLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_SITES {
            return Err(Error::InvalidLayout(format!(
                "expected 1..={MAX_SITES} sites, got {}",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d != 2 && d != 3) {
            return Err(Error::InvalidLayout(format!(
                "site dimension {d} is not 2 or 3"
            )));
        }
        Ok(RegisterLayout { dims })
    }

    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn qutrits(n: usize) -> Result<Self> {
        Self::new(vec![3; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_all(&self, d: usize) -> bool {
        self.dims.iter().all(|&x| x == d)
    }

    /// Basis index of the given per-site levels.
    pub fn index_of(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                found: levels.len(),
            });
        }
        let mut index = 0;
        for (&level, &d) in levels.iter().zip(&self.dims) {
            if level >= d {
                return Err(Error::InvalidSites(format!(
                    "level {level} out of range for dimension {d}"
                )));
            }
            index = index * d + level;
        }
        Ok(index)
    }

    /// Per-site levels of a basis index (inverse of [`index_of`](Self::index_of)).
    pub fn levels_of(&self, mut index: usize) -> Vec<usize> {
        let mut levels = vec![0; self.dims.len()];
        for (slot, &d) in levels.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        levels
    }

    /// Ket label such as `"011"` for a basis index.
    pub fn basis_label(&self, index: usize) -> String {
        self.levels_of(index)
            .iter()
            .map(|l| char::from(b'0' + *l as u8))
            .collect()
    }

    /// Site letter, `A` for site 0.
    pub fn site_name(site: usize) -> char {
        char::from(b'A' + site as u8)
    }

    fn check_sites(&self, sites: &[usize]) -> Result<()> {
        for (k, &s) in sites.iter().enumerate() {
            if s >= self.dims.len() {
                return Err(Error::InvalidSites(format!(
                    "site {s} not in layout of {} sites",
                    self.dims.len()
                )));
            }
            if sites[..k].contains(&s) {
                return Err(Error::InvalidSites(format!("site {s} listed twice")));
            }
        }
        Ok(())
    }
}

/// An operator on a subset of sites, in the product space of those sites
/// taken in the listed order.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    targets: Vec<usize>,
    matrix: CMatrix,
}

impl LocalOperator {
    pub fn new(targets: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidSites(
                "operator needs at least one target".into(),
            ));
        }
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(LocalOperator { targets, matrix })
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs_diff(&self.matrix, &self.matrix.adjoint()) < tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        is_unitary(&self.matrix, tol)
    }
}

/// Lifts a local operator to the full register, acting as identity on the
/// remaining sites. Targets may be non-adjacent and in any order.
pub fn embed(op: &LocalOperator, layout: &RegisterLayout) -> Result<CMatrix> {
    layout.check_sites(&op.targets)?;
    let local_dims: Vec<usize> = op.targets.iter().map(|&s| layout.dims[s]).collect();
    let local_dim: usize = local_dims.iter().product();
    if op.matrix.nrows() != local_dim {
        return Err(Error::DimensionMismatch {
            expected: local_dim,
            found: op.matrix.nrows(),
        });
    }

    let n = layout.total_dim();
    let levels: Vec<Vec<usize>> = (0..n).map(|i| layout.levels_of(i)).collect();
    let local_index = |lv: &[usize]| {
        op.targets
            .iter()
            .zip(&local_dims)
            .fold(0, |acc, (&s, &d)| acc * d + lv[s])
    };
    let spectators: Vec<usize> = (0..layout.num_sites())
        .filter(|s| !op.targets.contains(s))
        .collect();

    let mut full = CMatrix::zeros(n, n);
    for i in 0..n {
        let li = local_index(&levels[i]);
        for j in 0..n {
            if spectators.iter().all(|&s| levels[i][s] == levels[j][s]) {
                full[(i, j)] = op.matrix[(li, local_index(&levels[j]))];
            }
        }
    }
    Ok(full)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(layout: RegisterLayout, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: amplitudes.len(),
            });
        }
        Ok(StateVector { layout, amplitudes })
    }

    /// Computational basis state with the given per-site levels.
    pub fn basis(layout: &RegisterLayout, levels: &[usize]) -> Result<Self> {
        let mut amplitudes = CVector::zeros(layout.total_dim());
        amplitudes[layout.index_of(levels)?] = c64(1.0, 0.0);
        Ok(StateVector {
            layout: layout.clone(),
            amplitudes,
        })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Applies a full-register matrix.
    pub fn apply_matrix(&self, unitary: &CMatrix) -> Result<Self> {
        if unitary.nrows() != self.amplitudes.len() || !unitary.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.amplitudes.len(),
                found: unitary.nrows(),
            });
        }
        Ok(StateVector {
            layout: self.layout.clone(),
            amplitudes: unitary * &self.amplitudes,
        })
    }

    pub fn apply(&self, op: &LocalOperator) -> Result<Self> {
        self.apply_matrix(&embed(op, &self.layout)?)
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            layout: self.layout.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    layout: RegisterLayout,
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(layout: RegisterLayout, matrix: CMatrix) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        Ok(DensityOperator { layout, matrix })
    }

    pub fn basis(layout: &RegisterLayout, levels: &[usize]) -> Result<Self> {
        Ok(StateVector::basis(layout, levels)?.to_density())
    }

    pub fn maximally_mixed(layout: &RegisterLayout) -> Self {
        let n = layout.total_dim();
        DensityOperator {
            layout: layout.clone(),
            matrix: CMatrix::identity(n, n) / c64(n as f64, 0.0),
        }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs_diff(&self.matrix, &self.matrix.adjoint()) < tol
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Checks the density-operator invariants; `trace_one` is relaxed to
    /// `trace <= 1` for leakage-truncated operators.
    pub fn is_physical(&self, tol: Tolerances, trace_one: bool) -> bool {
        let tr = self.trace();
        let trace_ok = if trace_one {
            (tr - 1.0).abs() < tol.algebraic
        } else {
            tr <= 1.0 + tol.algebraic
        };
        self.is_hermitian(tol.algebraic) && trace_ok && self.min_eigenvalue() > -tol.eigenvalue
    }

    /// `U rho U^dagger` for a full-register matrix.
    pub fn conjugate(&self, unitary: &CMatrix) -> Result<Self> {
        if unitary.nrows() != self.matrix.nrows() || !unitary.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                found: unitary.nrows(),
            });
        }
        Ok(DensityOperator {
            layout: self.layout.clone(),
            matrix: unitary * &self.matrix * unitary.adjoint(),
        })
    }

    /// Population of each basis state.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// Zero-pads a qubit register into the same number of qutrits.
    pub fn lift_to_qutrits(&self) -> Result<Self> {
        if !self.layout.is_all(2) {
            return Err(Error::InvalidLayout(
                "lift requires an all-qubit layout".into(),
            ));
        }
        let target = RegisterLayout::qutrits(self.layout.num_sites())?;
        let map: Vec<usize> = (0..self.layout.total_dim())
            .map(|i| target.index_of(&self.layout.levels_of(i)))
            .collect::<Result<_>>()?;
        let n = target.total_dim();
        let mut matrix = CMatrix::zeros(n, n);
        for (i, &fi) in map.iter().enumerate() {
            for (j, &fj) in map.iter().enumerate() {
                matrix[(fi, fj)] = self.matrix[(i, j)];
            }
        }
        Ok(DensityOperator {
            layout: target,
            matrix,
        })
    }
}

/// Traces out every site not in `keep`. The kept sites retain their
/// original relative order.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    if keep.is_empty() {
        return Err(Error::InvalidSites(
            "partial trace must keep at least one site".into(),
        ));
    }
    let layout = rho.layout();
    layout.check_sites(keep)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    let traced: Vec<usize> = (0..layout.num_sites())
        .filter(|s| !kept.contains(s))
        .collect();

    let out_layout = RegisterLayout::new(kept.iter().map(|&s| layout.dims()[s]).collect())?;
    let n = layout.total_dim();
    let levels: Vec<Vec<usize>> = (0..n).map(|i| layout.levels_of(i)).collect();
    let reduced_index: Vec<usize> = levels
        .iter()
        .map(|lv| {
            kept.iter()
                .fold(0, |acc, &s| acc * layout.dims()[s] + lv[s])
        })
        .collect();

    let m = out_layout.total_dim();
    let mut out = CMatrix::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            if traced.iter().all(|&s| levels[i][s] == levels[j][s]) {
                out[(reduced_index[i], reduced_index[j])] += rho.matrix[(i, j)];
            }
        }
    }
    DensityOperator::new(out_layout, out)
}

/// Basis indices of the computational (levels 0 and 1) subspace of a
/// qutrit register, in qubit order.
pub fn computational_indices(layout: &RegisterLayout) -> Result<Vec<usize>> {
    if !layout.is_all(3) {
        return Err(Error::InvalidLayout(
            "computational subspace requires an all-qutrit layout".into(),
        ));
    }
    let qubits = RegisterLayout::qubits(layout.num_sites())?;
    (0..qubits.total_dim())
        .map(|i| layout.index_of(&qubits.levels_of(i)))
        .collect()
}

/// Restricts a qutrit operator to levels {0, 1} per site without
/// renormalizing. Returns the block and the leaked population
/// `1 - Tr[block]`, clamped into `[0, 1]`.
pub fn truncate_to_qubits(rho: &DensityOperator) -> Result<(DensityOperator, f64)> {
    let idx = computational_indices(rho.layout())?;
    let block = rho.matrix.select_rows(&idx).select_columns(&idx);
    let out = DensityOperator::new(RegisterLayout::qubits(rho.layout().num_sites())?, block)?;
    let leakage = (1.0 - out.trace()).clamp(0.0, 1.0);
    Ok((out, leakage))
}

/// Restricts a full-register matrix to the computational subspace.
pub fn computational_block(full: &CMatrix, layout: &RegisterLayout) -> Result<CMatrix> {
    let idx = computational_indices(layout)?;
    Ok(full.select_rows(&idx).select_columns(&idx))
}

/// `Tr[rho * obs]` for a Hermitian local observable.
pub fn expectation(rho: &DensityOperator, obs: &LocalOperator) -> Result<f64> {
    let dev = max_abs_diff(obs.matrix(), &obs.matrix().adjoint());
    if dev >= ALGEBRAIC_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let full = embed(obs, rho.layout())?;
    Ok(trace_of_product(rho.matrix(), &full).re)
}

/// `Tr[a * b]` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    m.is_square()
        && max_abs_diff(&(m.adjoint() * m), &CMatrix::identity(m.nrows(), m.nrows())) < tol
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let herm = faer::Mat::<C64>::from_fn(n, n, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5);
    let eig = herm
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("self-adjoint eigendecomposition of a finite matrix");
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let values = order.iter().map(|&k| s[k].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0[0]
}

/// Kronecker product with the left factor as the slow index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Single-qubit Pauli matrices.
pub mod pauli {
    use super::{c64, CMatrix};

    pub fn identity() -> CMatrix {
        CMatrix::identity(2, 2)
    }

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)],
        )
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)],
        )
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0)],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_density(layout: &RegisterLayout, seed: u64) -> DensityOperator {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = layout.total_dim();
        let g = CMatrix::from_fn(n, n, |_, _| {
            c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityOperator::new(layout.clone(), m / tr).unwrap()
    }

    /// Reference embedding built from the explicit basis-state action.
    fn embed_oracle(op: &CMatrix, targets: &[usize], layout: &RegisterLayout) -> CMatrix {
        let n = layout.total_dim();
        let mut full = CMatrix::zeros(n, n);
        let tdims: Vec<usize> = targets.iter().map(|&t| layout.dims()[t]).collect();
        for col in 0..n {
            let lv = layout.levels_of(col);
            let mut local_in = 0;
            for (k, &t) in targets.iter().enumerate() {
                local_in = local_in * tdims[k] + lv[t];
            }
            let local_dim: usize = tdims.iter().product();
            for local_out in 0..local_dim {
                let mut out_lv = lv.clone();
                let mut rem = local_out;
                for k in (0..targets.len()).rev() {
                    out_lv[targets[k]] = rem % tdims[k];
                    rem /= tdims[k];
                }
                let row = layout.index_of(&out_lv).unwrap();
                full[(row, col)] += op[(local_out, local_in)];
            }
        }
        full
    }

    #[test]
    fn layout_rejects_bad_dims() {
        assert!(RegisterLayout::new(vec![]).is_err());
        assert!(RegisterLayout::new(vec![2, 4]).is_err());
        assert!(RegisterLayout::new(vec![2; 7]).is_err());
        assert_eq!(RegisterLayout::new(vec![3, 2, 3]).unwrap().total_dim(), 18);
    }

    #[test]
    fn index_roundtrip_is_row_major() {
        let l = RegisterLayout::qutrits(3).unwrap();
        assert_eq!(l.index_of(&[1, 2, 0]).unwrap(), 9 + 6);
        for i in 0..27 {
            assert_eq!(l.index_of(&l.levels_of(i)).unwrap(), i);
        }
        assert_eq!(l.basis_label(l.index_of(&[2, 0, 1]).unwrap()), "201");
    }

    #[test]
    fn identity_embeds_to_identity() {
        let l = RegisterLayout::new(vec![3, 2, 3]).unwrap();
        for site in 0..3 {
            let d = l.dims()[site];
            let op = LocalOperator::new(vec![site], CMatrix::identity(d, d)).unwrap();
            assert_eq!(embed(&op, &l).unwrap(), CMatrix::identity(18, 18));
        }
    }

    #[test]
    fn x_on_c_flips_last_symbol() {
        let l = RegisterLayout::qubits(3).unwrap();
        let op = LocalOperator::new(vec![2], pauli::x()).unwrap();
        let out = StateVector::basis(&l, &[0, 0, 0])
            .unwrap()
            .apply(&op)
            .unwrap();
        assert_eq!(out, StateVector::basis(&l, &[0, 0, 1]).unwrap());
    }

    #[test]
    fn non_adjacent_embed_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let l = RegisterLayout::qutrits(3).unwrap();
        let m = CMatrix::from_fn(9, 9, |_, _| c64(rng.random(), rng.random()));
        for targets in [vec![0, 2], vec![2, 0], vec![1, 0]] {
            let op = LocalOperator::new(targets.clone(), m.clone()).unwrap();
            let got = embed(&op, &l).unwrap();
            assert!(
                max_abs_diff(&got, &embed_oracle(&m, &targets, &l)) < 1e-14,
                "targets {targets:?}"
            );
        }
    }

    #[test]
    fn embed_errors() {
        let l = RegisterLayout::qutrits(3).unwrap();
        assert!(matches!(
            embed(&LocalOperator::new(vec![0], pauli::x()).unwrap(), &l),
            Err(Error::DimensionMismatch { .. })
        ));
        let nine = CMatrix::identity(9, 9);
        assert!(embed(&LocalOperator::new(vec![1, 1], nine.clone()).unwrap(), &l).is_err());
        assert!(embed(&LocalOperator::new(vec![0, 5], nine).unwrap(), &l).is_err());
    }

    #[test]
    fn embed_is_multiplicative() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let l = RegisterLayout::new(vec![2, 3, 3]).unwrap();
        let a = CMatrix::from_fn(6, 6, |_, _| c64(rng.random(), rng.random()));
        let b = CMatrix::from_fn(6, 6, |_, _| c64(rng.random(), rng.random()));
        let e = |m: CMatrix| embed(&LocalOperator::new(vec![2, 0], m).unwrap(), &l).unwrap();
        let lhs = e(&a * &b);
        let rhs = e(a) * e(b);
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let la = RegisterLayout::qutrits(1).unwrap();
        let lb = RegisterLayout::qubits(1).unwrap();
        let ra = random_density(&la, 1);
        let rb = random_density(&lb, 2);
        let joint = DensityOperator::new(
            RegisterLayout::new(vec![3, 2]).unwrap(),
            kron(ra.matrix(), rb.matrix()),
        )
        .unwrap();
        let got = partial_trace(&joint, &[0]).unwrap();
        assert!(max_abs_diff(got.matrix(), ra.matrix()) < 1e-14);
        let got = partial_trace(&joint, &[1]).unwrap();
        assert!(max_abs_diff(got.matrix(), rb.matrix()) < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_state_is_mixed() {
        let l = RegisterLayout::qubits(2).unwrap();
        let s = 0.5f64.sqrt();
        let psi = StateVector::new(
            l,
            CVector::from_vec(vec![
                c64(s, 0.0),
                C64::default(),
                C64::default(),
                c64(s, 0.0),
            ]),
        )
        .unwrap();
        let red = partial_trace(&psi.to_density(), &[0]).unwrap();
        assert!(max_abs_diff(red.matrix(), &(CMatrix::identity(2, 2) * c64(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_summation() {
        let l = RegisterLayout::new(vec![3, 2, 3]).unwrap();
        let rho = random_density(&l, 5);
        let got = partial_trace(&rho, &[0, 1]).unwrap();
        // rho[(a b c), (a' b' c)] summed over c
        let mut want = CMatrix::zeros(6, 6);
        for a in 0..3 {
            for b in 0..2 {
                for a2 in 0..3 {
                    for b2 in 0..2 {
                        for c in 0..3 {
                            let i = l.index_of(&[a, b, c]).unwrap();
                            let j = l.index_of(&[a2, b2, c]).unwrap();
                            want[(a * 2 + b, a2 * 2 + b2)] += rho.matrix()[(i, j)];
                        }
                    }
                }
            }
        }
        assert!(max_abs_diff(got.matrix(), &want) < 1e-14);
        assert!((got.trace() - rho.trace()).abs() < 1e-12);
        assert!(partial_trace(&rho, &[]).is_err());
        let all = partial_trace(&rho, &[2, 0, 1]).unwrap();
        assert!(max_abs_diff(all.matrix(), rho.matrix()) < 1e-15);
    }

    #[test]
    fn truncation_cases() {
        let l = RegisterLayout::qutrits(3).unwrap();
        let inside = DensityOperator::basis(&l, &[0, 1, 1]).unwrap();
        let (block, leak) = truncate_to_qubits(&inside).unwrap();
        assert_eq!(leak, 0.0);
        assert_eq!(block.matrix()[(3, 3)], c64(1.0, 0.0));
        assert!((block.trace() - 1.0).abs() < 1e-15);

        let (block, leak) =
            truncate_to_qubits(&DensityOperator::basis(&l, &[2, 0, 0]).unwrap()).unwrap();
        assert_eq!(leak, 1.0);
        assert!(block.matrix().iter().all(|z| z.norm() == 0.0));

        assert!(truncate_to_qubits(
            &DensityOperator::basis(&RegisterLayout::qubits(3).unwrap(), &[0, 0, 0]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn expectation_values() {
        let q1 = RegisterLayout::qubits(1).unwrap();
        let z = LocalOperator::new(vec![0], pauli::z()).unwrap();
        assert_eq!(
            expectation(&DensityOperator::basis(&q1, &[0]).unwrap(), &z).unwrap(),
            1.0
        );

        let q3 = RegisterLayout::qubits(3).unwrap();
        let zzz = LocalOperator::new(
            vec![0, 1, 2],
            kron(&kron(&pauli::z(), &pauli::z()), &pauli::z()),
        )
        .unwrap();
        assert_eq!(
            expectation(&DensityOperator::basis(&q3, &[0, 1, 1]).unwrap(), &zzz).unwrap(),
            1.0
        );

        let s = 0.5f64.sqrt();
        let mut amps = CVector::zeros(8);
        amps[0] = c64(s, 0.0);
        amps[7] = c64(s, 0.0);
        let ghz = StateVector::new(q3, amps).unwrap().to_density();
        let xxx = LocalOperator::new(
            vec![0, 1, 2],
            kron(&kron(&pauli::x(), &pauli::x()), &pauli::x()),
        )
        .unwrap();
        assert!((expectation(&ghz, &xxx).unwrap() - 1.0).abs() < 1e-14);

        let bad = LocalOperator::new(
            vec![0],
            CMatrix::from_row_slice(
                2,
                2,
                &[
                    C64::default(),
                    c64(1.0, 0.0),
                    C64::default(),
                    C64::default(),
                ],
            ),
        )
        .unwrap();
        assert!(matches!(
            expectation(&DensityOperator::basis(&q1, &[0]).unwrap(), &bad),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn pauli_expectations_reconstruct_state() {
        let paulis = [pauli::identity(), pauli::x(), pauli::y(), pauli::z()];
        for (n, seed) in [(2usize, 21u64), (3, 22)] {
            let l = RegisterLayout::qubits(n).unwrap();
            let rho = random_density(&l, seed);
            let dim = l.total_dim();
            let mut rebuilt = CMatrix::zeros(dim, dim);
            for code in 0..4usize.pow(n as u32) {
                let mut p = CMatrix::identity(1, 1);
                for k in (0..n).rev() {
                    p = kron(&p, &paulis[(code / 4usize.pow(k as u32)) % 4]);
                }
                let op = LocalOperator::new((0..n).collect(), p.clone()).unwrap();
                rebuilt += p * c64(expectation(&rho, &op).unwrap(), 0.0);
            }
            rebuilt /= c64(dim as f64, 0.0);
            assert!(max_abs_diff(&rebuilt, rho.matrix()) < 1e-12);
        }
    }

    #[test]
    fn lift_then_truncate_is_identity() {
        let l = RegisterLayout::qubits(3).unwrap();
        let rho = random_density(&l, 9);
        let (back, leak) = truncate_to_qubits(&rho.lift_to_qutrits().unwrap()).unwrap();
        assert!(leak < 1e-12);
        assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-15);
    }

    fn check_eigen(m: &CMatrix) {
        let (values, vectors) = hermitian_eigen(m);
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let n = m.nrows();
        assert!(max_abs_diff(&(vectors.adjoint() * &vectors), &CMatrix::identity(n, n)) < 1e-10);
        let diag = CMatrix::from_fn(n, n, |r, c| {
            if r == c {
                c64(values[r], 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        assert!(max_abs_diff(&(&vectors * diag * vectors.adjoint()), m) < 1e-10);
    }

    #[test]
    fn eigen_handles_degenerate_sparse_input() {
        let v = CVector::from_fn(16, |i, _| {
            if i % 5 == 0 {
                c64(0.5, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        let mut m = &v * v.adjoint();
        m[(2, 2)] -= c64(1e-3, 0.0);
        m[(1, 1)] += c64(1e-3, 0.0);
        check_eigen(&m);
        assert!((min_eigenvalue(&m) + 1e-3).abs() < 1e-12);
        check_eigen(&CMatrix::zeros(4, 4));
    }

    proptest::proptest! {
        #[test]
        fn unitary_application_preserves_norm(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = RegisterLayout::new(vec![3, 3, 2]).unwrap();
            let g = CMatrix::from_fn(9, 9, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let u = g.qr().q();
            let amps = CVector::from_fn(18, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let norm = amps.norm();
            let psi = StateVector::new(l, amps / c64(norm, 0.0)).unwrap();
            let out = psi.apply(&LocalOperator::new(vec![1, 0], u).unwrap()).unwrap();
            proptest::prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn eigen_reconstructs_random_hermitian(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = CMatrix::from_fn(12, 12, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            check_eigen(&(&g + g.adjoint()));
        }
    }
}
