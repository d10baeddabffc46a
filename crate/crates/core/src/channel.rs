//! Process evaluators consumed by the characterization pipelines.

use crate::error::{Error, Result};
use crate::register::{c64, truncate_to_qubits, CMatrix, DensityOperator, RegisterLayout};

/// A map from density operators to density operators on a fixed register.
pub trait Channel: Sync {
    fn layout(&self) -> &RegisterLayout;

    fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator>;
}

impl<T: Channel + ?Sized> Channel for &T {
    fn layout(&self) -> &RegisterLayout {
        (**self).layout()
    }

    fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        (**self).apply(rho)
    }
}

/// Runs a qubit-register input through `channel` and returns the output on
/// the computational subspace together with the leaked population.
///
/// Qutrit channels receive the input zero-padded and have their output
/// truncated without renormalization; qubit channels are applied directly.
pub fn apply_to_qubits(
    channel: &dyn Channel,
    input: &DensityOperator,
) -> Result<(DensityOperator, f64)> {
    let layout = channel.layout();
    if input.layout().num_sites() != layout.num_sites() || !input.layout().is_all(2) {
        return Err(Error::LayoutMismatch);
    }
    if layout.is_all(3) {
        truncate_to_qubits(&channel.apply(&input.lift_to_qutrits()?)?)
    } else if layout.is_all(2) {
        let out = channel.apply(input)?;
        let leak = (input.trace() - out.trace()).clamp(0.0, 1.0);
        Ok((out, leak))
    } else {
        Err(Error::InvalidLayout(
            "mixed qubit/qutrit channels are not supported".into(),
        ))
    }
}

/// `rho -> U rho U^dagger`.
#[derive(Clone, Debug)]
pub struct UnitaryChannel {
    layout: RegisterLayout,
    unitary: CMatrix,
}

impl UnitaryChannel {
    pub fn new(layout: RegisterLayout, unitary: CMatrix) -> Result<Self> {
        if unitary.nrows() != layout.total_dim() || !unitary.is_square() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: unitary.nrows(),
            });
        }
        Ok(UnitaryChannel { layout, unitary })
    }

    pub fn identity(layout: RegisterLayout) -> Self {
        let n = layout.total_dim();
        UnitaryChannel {
            layout,
            unitary: CMatrix::identity(n, n),
        }
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }
}

impl Channel for UnitaryChannel {
    fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        rho.conjugate(&self.unitary)
    }
}

/// `rho -> Tr[rho] * 1/d`.
#[derive(Clone, Debug)]
pub struct Depolarizing {
    layout: RegisterLayout,
}

impl Depolarizing {
    pub fn new(layout: RegisterLayout) -> Self {
        Depolarizing { layout }
    }
}

impl Channel for Depolarizing {
    fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.layout() != &self.layout {
            return Err(Error::LayoutMismatch);
        }
        let mixed = DensityOperator::maximally_mixed(&self.layout);
        DensityOperator::new(
            self.layout.clone(),
            mixed.into_matrix() * c64(rho.trace(), 0.0),
        )
    }
}

/// A channel given by full-register Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausMap {
    layout: RegisterLayout,
    ops: Vec<CMatrix>,
}

impl KrausMap {
    pub fn new(layout: RegisterLayout, ops: Vec<CMatrix>) -> Result<Self> {
        let n = layout.total_dim();
        if let Some(bad) = ops.iter().find(|k| k.nrows() != n || k.ncols() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.nrows(),
            });
        }
        Ok(KrausMap { layout, ops })
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    /// `sum_k K^dagger K`; identity for a trace-preserving map.
    pub fn completeness(&self) -> CMatrix {
        let n = self.layout.total_dim();
        self.ops
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, k| acc + k.adjoint() * k)
    }

    /// A random CPTP map: Kraus operators from the column blocks of a
    /// Haar-ish isometry obtained by QR of a Gaussian-like matrix.
    pub fn random<R: rand::Rng>(layout: RegisterLayout, rank: usize, rng: &mut R) -> Self {
        let n = layout.total_dim();
        let g = CMatrix::from_fn(n * rank, n, |_, _| {
            c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let q = g.qr().q();
        let ops = (0..rank).map(|k| q.rows(k * n, n).into_owned()).collect();
        KrausMap { layout, ops }
    }
}

impl Channel for KrausMap {
    fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.layout() != &self.layout {
            return Err(Error::LayoutMismatch);
        }
        let n = self.layout.total_dim();
        let out = self.ops.iter().fold(CMatrix::zeros(n, n), |acc, k| {
            acc + k * rho.matrix() * k.adjoint()
        });
        DensityOperator::new(self.layout.clone(), out)
    }
}
