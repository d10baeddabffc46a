//! Decoherence of transmon qutrits, lumped per gate step.
//!
//! Every step of a circuit applies its ideal unitary and then, on every
//! site, amplitude damping and pure dephasing for the step duration. Both
//! channels are exact solutions of their Lindblad generators, so splitting
//! a step into pieces gives the same result as applying it whole.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::gates::Circuit;
use crate::register::{c64, hermitian_eigen, CMatrix, DensityOperator, RegisterLayout, C64};

/// Coherence times of one qubit at its operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitCoherence {
    pub t1_us: f64,
    pub t2star_us: f64,
}

/// Spectroscopy values of the device. Recorded for reference; the
/// simulation never reads them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectroscopy {
    pub resonator_ghz: f64,
    pub resonator_quality_factor: f64,
    pub qubit_max_ghz: [f64; 3],
    pub charging_energy_ghz: [f64; 3],
    pub coupling_ghz: [f64; 3],
}

impl Default for Spectroscopy {
    fn default() -> Self {
        Spectroscopy {
            resonator_ghz: 8.625,
            resonator_quality_factor: 3300.0,
            qubit_max_ghz: [6.714, 6.050, 4.999],
            charging_energy_ghz: [0.264, 0.296, 0.307],
            coupling_ghz: [0.36, 0.30, 0.34],
        }
    }
}

/// Measured device constants for qubits A, B and C.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub qubits: [QubitCoherence; 3],
    pub spectroscopy: Spectroscopy,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            qubits: [
                QubitCoherence {
                    t1_us: 0.55,
                    t2star_us: 0.45,
                },
                QubitCoherence {
                    t1_us: 0.70,
                    t2star_us: 0.6,
                },
                QubitCoherence {
                    t1_us: 1.10,
                    t2star_us: 0.65,
                },
            ],
            spectroscopy: Spectroscopy::default(),
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        for q in &self.qubits {
            if !positive(q.t1_us) || !positive(q.t2star_us) {
                return Err(Error::InvalidNoise(
                    "coherence times must be positive".into(),
                ));
            }
            if q.t2star_us > 2.0 * q.t1_us {
                return Err(Error::NonPhysicalCoherence {
                    t2star: q.t2star_us,
                    two_t1: 2.0 * q.t1_us,
                });
            }
        }
        Ok(())
    }
}

/// False for NaN.
fn positive(x: f64) -> bool {
    x > 0.0
}

/// False for NaN.
fn non_negative(x: f64) -> bool {
    x >= 0.0
}

/// Pure dephasing time from `1/T2* = 1/(2 T1) + 1/Tphi`.
pub fn tphi_from_t2star(t1_us: f64, t2star_us: f64) -> Result<f64> {
    if !positive(t1_us) || !positive(t2star_us) {
        return Err(Error::InvalidNoise(
            "coherence times must be positive".into(),
        ));
    }
    let rate = 1.0 / t2star_us - 1.0 / (2.0 * t1_us);
    if rate <= 0.0 {
        return Err(Error::NonPhysicalCoherence {
            t2star: t2star_us,
            two_t1: 2.0 * t1_us,
        });
    }
    Ok(1.0 / rate)
}

/// Idle windows before and after a circuit during which the qubits also
/// decohere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpamTiming {
    pub include: bool,
    pub prep_ns: f64,
    pub measure_ns: f64,
}

impl Default for SpamTiming {
    fn default() -> Self {
        SpamTiming {
            include: true,
            prep_ns: 8.0,
            measure_ns: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseModel {
    pub t1_us: [f64; 3],
    pub tphi_us: [f64; 3],
    /// Ratio of the 2->1 to the 1->0 relaxation rate.
    pub relaxation_scale2: f64,
    /// Ratio of the 1<->2 to the 0<->1 dephasing rate.
    pub dephasing_scale2: f64,
    /// Ratio of the 0<->2 to the 0<->1 dephasing rate; `None` means
    /// `1 + dephasing_scale2`.
    pub dephasing_02: Option<f64>,
    pub enabled: bool,
    pub spam: SpamTiming,
}

impl NoiseModel {
    pub fn from_device(device: &DeviceParams) -> Result<Self> {
        device.validate()?;
        let mut tphi = [0.0; 3];
        for (slot, q) in tphi.iter_mut().zip(&device.qubits) {
            *slot = tphi_from_t2star(q.t1_us, q.t2star_us)?;
        }
        Ok(NoiseModel {
            t1_us: device.qubits.map(|q| q.t1_us),
            tphi_us: tphi,
            relaxation_scale2: 2.0,
            dephasing_scale2: 1.0,
            dephasing_02: None,
            enabled: true,
            spam: SpamTiming::default(),
        })
    }

    /// The measured device with default level-2 scalings.
    pub fn device() -> Self {
        Self::from_device(&DeviceParams::default()).expect("device constants are physical")
    }

    /// No decoherence at all.
    pub fn disabled() -> Self {
        NoiseModel {
            enabled: false,
            ..Self::device()
        }
    }

    /// Channel applied to `site` over `duration_ns`, as a superoperator.
    pub fn site_superoperator(&self, site: usize, duration_ns: f64) -> Result<SiteSuperoperator> {
        let damp = amplitude_damping_qutrit(duration_ns, self.t1_us[site], self.relaxation_scale2)?;
        let deph = dephasing_qutrit(
            duration_ns,
            self.tphi_us[site],
            self.dephasing_scale2,
            self.dephasing_02,
        )?;
        Ok(deph.superoperator().compose(&damp.superoperator()))
    }
}

/// Kraus operators on a single three-level site.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    pub ops: Vec<CMatrix>,
    pub duration_ns: f64,
}

impl KrausChannel {
    pub fn completeness(&self) -> CMatrix {
        self.ops
            .iter()
            .fold(CMatrix::zeros(3, 3), |acc, k| acc + k.adjoint() * k)
    }

    /// `sum_k vec(K) vec(K)^dagger`, with row-major vectorization.
    pub fn choi(&self) -> CMatrix {
        let mut choi = CMatrix::zeros(9, 9);
        for k in &self.ops {
            let v = CMatrix::from_fn(9, 1, |r, _| k[(r % 3, r / 3)]);
            choi += &v * v.adjoint();
        }
        choi
    }

    pub fn superoperator(&self) -> SiteSuperoperator {
        let mut s = CMatrix::zeros(9, 9);
        for k in &self.ops {
            for a in 0..3 {
                for b in 0..3 {
                    for a2 in 0..3 {
                        for b2 in 0..3 {
                            s[(3 * a + b, 3 * a2 + b2)] += k[(a, a2)] * k[(b, b2)].conj();
                        }
                    }
                }
            }
        }
        SiteSuperoperator(s)
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.ops
            .iter()
            .fold(CMatrix::zeros(3, 3), |acc, k| acc + k * rho * k.adjoint())
    }
}

/// A single-site channel acting on `rho[a][b] -> sum S[(a,b),(a',b')] rho[a'][b']`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSuperoperator(pub CMatrix);

impl SiteSuperoperator {
    pub fn identity() -> Self {
        SiteSuperoperator(CMatrix::identity(9, 9))
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &SiteSuperoperator) -> SiteSuperoperator {
        SiteSuperoperator(&self.0 * &first.0)
    }

    /// Applies the channel to one site of a full-register density matrix.
    pub fn apply_on_site(&self, rho: &CMatrix, layout: &RegisterLayout, site: usize) -> CMatrix {
        let d = layout.dims()[site];
        assert_eq!(d, 3, "site superoperators act on qutrits");
        let stride: usize = layout.dims()[site + 1..].iter().product();
        let n = layout.total_dim();
        let bases: Vec<usize> = (0..n).filter(|i| (i / stride).is_multiple_of(3)).collect();
        let mut out = CMatrix::zeros(n, n);
        let mut block = [C64::default(); 9];
        for &i0 in &bases {
            for &j0 in &bases {
                for a in 0..3 {
                    for b in 0..3 {
                        block[3 * a + b] = rho[(i0 + a * stride, j0 + b * stride)];
                    }
                }
                for a in 0..3 {
                    for b in 0..3 {
                        let row = 3 * a + b;
                        let mut acc = C64::default();
                        for (col, v) in block.iter().enumerate() {
                            acc += self.0[(row, col)] * v;
                        }
                        out[(i0 + a * stride, j0 + b * stride)] = acc;
                    }
                }
            }
        }
        out
    }
}

fn check_duration(t_ns: f64) -> Result<()> {
    if t_ns < 0.0 || t_ns.is_nan() {
        return Err(Error::NegativeDuration(t_ns));
    }
    Ok(())
}

/// Exact cascaded relaxation `|2> -> |1> -> |0>` over `t_ns`.
///
/// The 1->0 decay probability is `1 - exp(-t/T1)`, the 2->1 probability
/// `1 - exp(-scale2 t/T1)`. Population leaving `|2>` may continue to `|0>`
/// within the same interval; there is no direct 2->0 matrix element.
pub fn amplitude_damping_qutrit(t_ns: f64, t1_us: f64, scale2: f64) -> Result<KrausChannel> {
    check_duration(t_ns)?;
    if !positive(t1_us) || !non_negative(scale2) {
        return Err(Error::InvalidNoise(format!(
            "T1 = {t1_us} us, scale2 = {scale2}"
        )));
    }
    let g1 = 1.0 / (t1_us * 1000.0);
    let g2 = scale2 * g1;
    let e1 = (-g1 * t_ns).exp();
    let e2 = (-g2 * t_ns).exp();
    // P(2 -> 1 and still in 1 at t)
    let via1 = if (g2 - g1).abs() < 1e-15 {
        g1 * t_ns * e1
    } else {
        g2 / (g2 - g1) * (e1 - e2)
    };
    let via1 = via1.clamp(0.0, 1.0 - e2);
    let cascade = (1.0 - e2 - via1).max(0.0);

    let mut k0 = CMatrix::zeros(3, 3);
    k0[(0, 0)] = c64(1.0, 0.0);
    k0[(1, 1)] = c64(e1.sqrt(), 0.0);
    k0[(2, 2)] = c64(e2.sqrt(), 0.0);
    let jump = |to: usize, from: usize, p: f64| {
        let mut k = CMatrix::zeros(3, 3);
        k[(to, from)] = c64(p.sqrt(), 0.0);
        k
    };
    let mut ops = vec![k0];
    for (to, from, p) in [(0, 1, 1.0 - e1), (1, 2, via1), (0, 2, cascade)] {
        if p > 0.0 {
            ops.push(jump(to, from, p));
        }
    }
    Ok(KrausChannel {
        ops,
        duration_ns: t_ns,
    })
}

/// Pure dephasing over `t_ns`: coherence `rho_jk` shrinks by
/// `exp(-r_jk t/Tphi)` with `r_01 = 1`, `r_12 = scale2` and
/// `r_02 = factor02.unwrap_or(1 + scale2)`. Populations are untouched.
pub fn dephasing_qutrit(
    t_ns: f64,
    tphi_us: f64,
    scale2: f64,
    factor02: Option<f64>,
) -> Result<KrausChannel> {
    check_duration(t_ns)?;
    if !positive(tphi_us) || !non_negative(scale2) {
        return Err(Error::InvalidNoise(format!(
            "Tphi = {tphi_us} us, scale2 = {scale2}"
        )));
    }
    let r01: f64 = 1.0;
    let r12 = scale2;
    let r02 = factor02.unwrap_or(1.0 + scale2);
    // exp(-t r) is positive semidefinite for all t iff sqrt(r) is a metric
    let (s01, s12, s02) = (r01.sqrt(), r12.sqrt(), r02.max(0.0).sqrt());
    if r02 < 0.0 || s02 > s01 + s12 + 1e-12 || s01 > s02 + s12 + 1e-12 || s12 > s01 + s02 + 1e-12 {
        return Err(Error::InvalidNoise(format!(
            "dephasing factors (1, {r12}, {r02}) are not completely positive"
        )));
    }
    let x = t_ns / (tphi_us * 1000.0);
    let f = |r: f64| (-r * x).exp();
    let rates = [[0.0, r01, r02], [r01, 0.0, r12], [r02, r12, 0.0]];
    let decay = CMatrix::from_fn(3, 3, |r, c| c64(f(rates[r][c]), 0.0));
    let (values, vectors) = hermitian_eigen(&decay);
    let mut ops = Vec::new();
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > 1e-15 {
            let v = vectors.column(k);
            ops.push(DMatrix::from_fn(3, 3, |r, c| {
                if r == c {
                    v[r] * lambda.sqrt()
                } else {
                    C64::default()
                }
            }));
        }
    }
    Ok(KrausChannel {
        ops,
        duration_ns: t_ns,
    })
}

/// Runs `circuit` on `rho`, decohering every site for each step's duration
/// after the step's unitary.
pub fn noisy_apply(
    circuit: &Circuit,
    rho: &DensityOperator,
    model: &NoiseModel,
) -> Result<DensityOperator> {
    if rho.layout() != circuit.layout() {
        return Err(Error::LayoutMismatch);
    }
    let mut state = rho.clone();
    for (u, op) in circuit.step_unitaries().iter().zip(circuit.ops()) {
        state = state.conjugate(u)?;
        state = decohere(&state, op.duration_ns, model)?;
    }
    Ok(state)
}

/// Decoherence of every site over an idle window.
pub fn decohere(
    rho: &DensityOperator,
    duration_ns: f64,
    model: &NoiseModel,
) -> Result<DensityOperator> {
    check_duration(duration_ns)?;
    if !model.enabled || duration_ns == 0.0 {
        return Ok(rho.clone());
    }
    let layout = rho.layout();
    if !layout.is_all(3) || layout.num_sites() != model.t1_us.len() {
        return Err(Error::LayoutMismatch);
    }
    let mut m = rho.matrix().clone();
    for site in 0..layout.num_sites() {
        m = model
            .site_superoperator(site, duration_ns)?
            .apply_on_site(&m, layout, site);
    }
    DensityOperator::new(layout.clone(), m)
}

/// A circuit under a noise model, including the preparation and
/// measurement windows when the model asks for them.
#[derive(Clone, Debug)]
pub struct NoisyCircuit {
    pub circuit: Circuit,
    pub model: NoiseModel,
}

impl NoisyCircuit {
    pub fn new(circuit: Circuit, model: NoiseModel) -> Self {
        NoisyCircuit { circuit, model }
    }
}

impl Channel for NoisyCircuit {
    fn layout(&self) -> &RegisterLayout {
        self.circuit.layout()
    }

    fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let spam = self.model.spam.include && self.model.enabled;
        let mut state = if spam {
            decohere(rho, self.model.spam.prep_ns, &self.model)?
        } else {
            rho.clone()
        };
        state = noisy_apply(&self.circuit, &state, &self.model)?;
        if spam {
            state = decohere(&state, self.model.spam.measure_ns, &self.model)?;
        }
        Ok(state)
    }
}

/// Flat key-value device description. Every key is optional and defaults to
/// the measured device.
///
/// ```text
/// t1_a_us = 0.55
/// t2star_a_us = 0.45
/// scale2 = 2.0
/// include_spam = true
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub t1_a_us: f64,
    pub t1_b_us: f64,
    pub t1_c_us: f64,
    pub t2star_a_us: f64,
    pub t2star_b_us: f64,
    pub t2star_c_us: f64,
    pub scale2: f64,
    pub dephase_scale2: f64,
    pub dephase_02: Option<f64>,
    pub include_spam: bool,
    pub prep_ns: f64,
    pub measure_ns: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let d = DeviceParams::default();
        let spam = SpamTiming::default();
        DeviceConfig {
            t1_a_us: d.qubits[0].t1_us,
            t1_b_us: d.qubits[1].t1_us,
            t1_c_us: d.qubits[2].t1_us,
            t2star_a_us: d.qubits[0].t2star_us,
            t2star_b_us: d.qubits[1].t2star_us,
            t2star_c_us: d.qubits[2].t2star_us,
            scale2: 2.0,
            dephase_scale2: 1.0,
            dephase_02: None,
            include_spam: spam.include,
            prep_ns: spam.prep_ns,
            measure_ns: spam.measure_ns,
        }
    }
}

impl DeviceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn device_params(&self) -> DeviceParams {
        DeviceParams {
            qubits: [
                QubitCoherence {
                    t1_us: self.t1_a_us,
                    t2star_us: self.t2star_a_us,
                },
                QubitCoherence {
                    t1_us: self.t1_b_us,
                    t2star_us: self.t2star_b_us,
                },
                QubitCoherence {
                    t1_us: self.t1_c_us,
                    t2star_us: self.t2star_c_us,
                },
            ],
            spectroscopy: Spectroscopy::default(),
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        if self.prep_ns < 0.0 || self.measure_ns < 0.0 {
            return Err(Error::Config("SPAM durations must be non-negative".into()));
        }
        let mut model = NoiseModel::from_device(&self.device_params())?;
        model.relaxation_scale2 = self.scale2;
        model.dephasing_scale2 = self.dephase_scale2;
        model.dephasing_02 = self.dephase_02;
        model.spam = SpamTiming {
            include: self.include_spam,
            prep_ns: self.prep_ns,
            measure_ns: self.measure_ns,
        };
        // surface bad scalings now rather than mid-simulation
        model.site_superoperator(0, 1.0)?;
        Ok(model)
    }
}
