//! Channel gains, steering vectors and the factorized beampattern
//! operators.
//!
//! The response map from stacked source samples to the field in one
//! space-frequency cell factors through the per-frequency source spectrum
//! and an M×J gain matrix, so none of the M×JN per-cell response matrices
//! is ever materialized. The same factorization yields the quadratic and
//! linear forms consumed by the solver:
//!
//! * signal update: `A = (1/(W²T)) Σ_k (e*ₖeₖᵀ) ⊗ Cₖ` with
//!   `Cₖ = W₁ᴴ Vₖ W₁`, `W₁ = diag(x)·G̃ₖ`,
//! * phase update: top-left block `Σ_k diag(uₖ)ᴴ Vₖ diag(uₖ)`,
//!
//! where `Vₖ = Σ_ℓ w_kℓ v_kℓ v_kℓᴴ` is shared by both and built once per
//! engine. Angle sums run in parallel over frequencies and are combined
//! in index order, so results do not depend on the thread schedule.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::pattern::DesiredPattern;
use crate::scene::{propagation_delay, Geometry, SamplingGrid, SceneConfig};
use crate::solver::{AuxPhases, PhaseVector, SignalBlock};

#[inline]
fn cis(phase: f64) -> Complex64 {
    Complex64::new(phase.cos(), phase.sin())
}

/// Per-path gain applied on top of the spherical-spreading kernel,
/// as a function of `(element, feeder, baseband frequency)`.
pub type FrequencyGain = Arc<dyn Fn(usize, usize, f64) -> Complex64 + Send + Sync>;

/// Channel gain matrix at baseband frequency `f`: entry `(i, j)` is
/// `e^{-2πi (f+f_c) d_ij / c} / (√(4π) d_ij)` under the default isotropic
/// element model.
pub fn channel_gain_matrix(geom: &Geometry, carrier_hz: f64, f: f64) -> DMatrix<Complex64> {
    let fc = f + carrier_hz;
    let root4pi = (4.0 * PI).sqrt();
    DMatrix::from_fn(geom.element_count(), geom.feeder_count(), |i, j| {
        let d = geom.distance(i, j);
        cis(-2.0 * PI * fc * d / crate::scene::SPEED_OF_LIGHT) / (root4pi * d)
    })
}

/// Channel gain matrix with an arbitrary per-path gain callback
/// `(i, j, f, θ, φ) → complex`, for element patterns and other extensions.
pub fn channel_gain_matrix_with(
    geom: &Geometry,
    carrier_hz: f64,
    f: f64,
    theta: f64,
    phi: f64,
    gain: &dyn Fn(usize, usize, f64, f64, f64) -> Complex64,
) -> DMatrix<Complex64> {
    let mut out = channel_gain_matrix(geom, carrier_hz, f);
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            out[(i, j)] *= gain(i, j, f, theta, phi);
        }
    }
    out
}

fn steering_into(
    elements: &[Vector3<f64>],
    carrier_hz: f64,
    f: f64,
    theta: f64,
    phi: f64,
    sign: f64,
    out: &mut [Complex64],
) {
    let factor = 2.0 * PI * (f + carrier_hz) * sign;
    for (o, p) in out.iter_mut().zip(elements.iter()) {
        *o = cis(factor * propagation_delay(p, theta, phi));
    }
}

/// Steering vector toward `(θ, φ)` at baseband frequency `f`:
/// entry `i` is `e^{2πi (f+f_c) τ_i(θ, φ)}`.
pub fn steering(
    elements: &[Vector3<f64>],
    carrier_hz: f64,
    f: f64,
    theta: f64,
    phi: f64,
) -> DVector<Complex64> {
    let mut out = DVector::zeros(elements.len());
    steering_into(elements, carrier_hz, f, theta, phi, 1.0, out.as_mut_slice());
    out
}

/// Discrete source spectrum `σ̂(f)`: entry `j` is
/// `Σ_{n=1..N} s_j(n/W)·e^{-2πi n f/W}`.
pub fn signal_spectrum(s: &SignalBlock, bandwidth_hz: f64, f: f64) -> DVector<Complex64> {
    let j = s.source_count();
    let mut out = DVector::<Complex64>::zeros(j);
    let samples = s.as_slice();
    for n in 0..s.samples_per_source() {
        let e = cis(-2.0 * PI * (n + 1) as f64 * f / bandwidth_hz);
        let block = &samples[n * j..(n + 1) * j];
        for (o, v) in out.iter_mut().zip(block.iter()) {
            *o += v * e;
        }
    }
    out
}

/// Steering-vector storage policy for the grid engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CachePolicy {
    /// Cache when the table stays under ~1 GiB, otherwise recompute.
    #[default]
    Auto,
    Always,
    Never,
}

/// Engine construction options.
#[derive(Clone, Default)]
pub struct OperatorOptions {
    pub steering_cache: CachePolicy,
    /// Optional per-path gain as a function of baseband frequency only;
    /// angle-independent by design so the factorized accumulations hold.
    pub frequency_gain: Option<FrequencyGain>,
    /// Negates every propagation delay in the production steering table.
    /// Used by the self-check command to demonstrate that the oracle
    /// cross-checks can fail; leave `false` everywhere else.
    pub delay_fault: bool,
}

impl std::fmt::Debug for OperatorOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorOptions")
            .field("steering_cache", &self.steering_cache)
            .field("frequency_gain", &self.frequency_gain.is_some())
            .field("delay_fault", &self.delay_fault)
            .finish()
    }
}

const CACHE_AUTO_LIMIT_BYTES: usize = 1 << 30;

/// Grid-bound beampattern operator set.
///
/// Owns the channel gain matrices (one per frequency), the steering
/// table and the lazily built angle-summed outer products `Vₖ`.
pub struct Operators {
    m: usize,
    j: usize,
    n: usize,
    carrier_hz: f64,
    bandwidth_hz: f64,
    duration_s: f64,
    power_w: f64,
    /// `1/(W√T)`, the response scale.
    scale: f64,
    elements: Vec<Vector3<f64>>,
    grid: SamplingGrid,
    gains: Vec<DMatrix<Complex64>>,
    identity_gains: bool,
    steering_cache: Option<Vec<Complex64>>,
    delay_sign: f64,
    vv: OnceLock<Vec<DMatrix<Complex64>>>,
    fingerprint: u64,
}

impl Operators {
    /// Engine for the RIS-fed architecture: gains from the feeder paths.
    pub fn new_ris(
        cfg: &SceneConfig,
        geom: &Geometry,
        grid: SamplingGrid,
        opts: &OperatorOptions,
    ) -> Result<Self> {
        cfg.validate()?;
        if geom.element_count() != cfg.element_count() {
            return Err(Error::Dimension {
                what: "geometry element count",
                expected: cfg.element_count(),
                got: geom.element_count(),
            });
        }
        let gains: Vec<DMatrix<Complex64>> = grid
            .freqs
            .iter()
            .map(|&f| {
                let mut g = channel_gain_matrix(geom, cfg.carrier_hz, f);
                if let Some(hook) = &opts.frequency_gain {
                    for jj in 0..g.ncols() {
                        for i in 0..g.nrows() {
                            g[(i, jj)] *= hook(i, jj, f);
                        }
                    }
                }
                g
            })
            .collect();
        Self::build(cfg, geom.elements().to_vec(), geom.feeder_count(), grid, gains, false, opts)
    }

    /// Engine for the MIMO comparison: every element radiates its own
    /// signal, so the gain matrix is the identity and `J = M`.
    pub fn new_mimo(
        cfg: &SceneConfig,
        elements: &[Vector3<f64>],
        grid: SamplingGrid,
        opts: &OperatorOptions,
    ) -> Result<Self> {
        let m = elements.len();
        if m == 0 {
            return Err(Error::InvalidScene("no elements".into()));
        }
        let gains = vec![DMatrix::<Complex64>::identity(m, m); grid.freqs.len()];
        Self::build(cfg, elements.to_vec(), m, grid, gains, true, opts)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        cfg: &SceneConfig,
        elements: Vec<Vector3<f64>>,
        j: usize,
        grid: SamplingGrid,
        gains: Vec<DMatrix<Complex64>>,
        identity_gains: bool,
        opts: &OperatorOptions,
    ) -> Result<Self> {
        grid.validate_shape(cfg.bandwidth_hz)?;
        let m = elements.len();
        let n = cfg.sample_count();
        if n < 1 {
            return Err(Error::InvalidScene("sample count is zero".into()));
        }
        let delay_sign = if opts.delay_fault { -1.0 } else { 1.0 };
        let cache_bytes = grid.point_count() * m * std::mem::size_of::<Complex64>();
        let cache = match opts.steering_cache {
            CachePolicy::Always => true,
            CachePolicy::Never => false,
            CachePolicy::Auto => cache_bytes <= CACHE_AUTO_LIMIT_BYTES,
        };
        let mut me = Self {
            m,
            j,
            n,
            carrier_hz: cfg.carrier_hz,
            bandwidth_hz: cfg.bandwidth_hz,
            duration_s: cfg.duration_s,
            power_w: cfg.power_w,
            scale: 1.0 / (cfg.bandwidth_hz * cfg.duration_s.sqrt()),
            elements,
            grid,
            gains,
            identity_gains,
            steering_cache: None,
            delay_sign,
            vv: OnceLock::new(),
            fingerprint: 0,
        };
        if cache {
            me.steering_cache = Some(me.build_steering_table());
        }
        me.fingerprint = me.compute_fingerprint();
        Ok(me)
    }

    fn build_steering_table(&self) -> Vec<Complex64> {
        let l = self.grid.angle_count();
        let m = self.m;
        let chunks: Vec<Vec<Complex64>> = (0..self.grid.freq_count())
            .into_par_iter()
            .map(|k| {
                let f = self.grid.freqs[k];
                let mut out = vec![Complex64::new(0.0, 0.0); l * m];
                for li in 0..l {
                    let (theta, phi) = self.grid.angles(li);
                    steering_into(
                        &self.elements,
                        self.carrier_hz,
                        f,
                        theta,
                        phi,
                        self.delay_sign,
                        &mut out[li * m..(li + 1) * m],
                    );
                }
                out
            })
            .collect();
        chunks.concat()
    }

    fn compute_fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        (self.m, self.j, self.n).hash(&mut h);
        for v in [self.carrier_hz, self.bandwidth_hz, self.duration_s, self.power_w] {
            v.to_bits().hash(&mut h);
        }
        for p in &self.elements {
            for c in [p.x, p.y, p.z] {
                c.to_bits().hash(&mut h);
            }
        }
        for f in self.grid.freqs.iter().chain(&self.grid.thetas).chain(&self.grid.phis) {
            f.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn element_count(&self) -> usize {
        self.m
    }

    pub fn source_count(&self) -> usize {
        self.j
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// `N·P`, the ball-constraint radius squared for the signal update.
    pub fn power_budget(&self) -> f64 {
        self.n as f64 * self.power_w
    }

    /// `1/(W√T)`.
    pub fn response_scale(&self) -> f64 {
        self.scale
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn channel_gains(&self, k: usize) -> &DMatrix<Complex64> {
        &self.gains[k]
    }

    /// Steering vector for grid point `(k, l)` (allocating accessor).
    pub fn steering_vector(&self, k: usize, l: usize) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.m);
        self.with_steering(k, l, |v| out.as_mut_slice().copy_from_slice(v));
        out
    }

    #[inline]
    fn with_steering<R>(&self, k: usize, l: usize, f: impl FnOnce(&[Complex64]) -> R) -> R {
        match &self.steering_cache {
            Some(table) => {
                let start = (k * self.grid.angle_count() + l) * self.m;
                f(&table[start..start + self.m])
            }
            None => {
                let (theta, phi) = self.grid.angles(l);
                let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
                steering_into(
                    &self.elements,
                    self.carrier_hz,
                    self.grid.freqs[k],
                    theta,
                    phi,
                    self.delay_sign,
                    &mut buf,
                );
                f(&buf)
            }
        }
    }

    /// Runs `f(l, v)` for every angle index at frequency `k`, reusing one
    /// scratch buffer when the steering table is not cached.
    fn for_each_angle<F: FnMut(usize, &[Complex64])>(&self, k: usize, mut f: F) {
        let l_count = self.grid.angle_count();
        match &self.steering_cache {
            Some(table) => {
                let base = k * l_count * self.m;
                for li in 0..l_count {
                    let start = base + li * self.m;
                    f(li, &table[start..start + self.m]);
                }
            }
            None => {
                let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
                for li in 0..l_count {
                    let (theta, phi) = self.grid.angles(li);
                    steering_into(
                        &self.elements,
                        self.carrier_hz,
                        self.grid.freqs[k],
                        theta,
                        phi,
                        self.delay_sign,
                        &mut buf,
                    );
                    f(li, &buf);
                }
            }
        }
    }

    /// Source spectra `σ̂_k` for all frequencies.
    pub fn spectra(&self, s: &SignalBlock) -> Result<Vec<DVector<Complex64>>> {
        self.check_signal(s)?;
        Ok(self
            .grid
            .freqs
            .par_iter()
            .map(|&f| signal_spectrum(s, self.bandwidth_hz, f))
            .collect())
    }

    /// Element excitation `u_k = (1/(W√T))·G̃_k σ̂_k` before the phase
    /// screen is applied.
    fn element_excitation(&self, sigma_k: &DVector<Complex64>, k: usize) -> DVector<Complex64> {
        let mut u = &self.gains[k] * sigma_k;
        u.scale_mut(self.scale);
        u
    }

    fn check_signal(&self, s: &SignalBlock) -> Result<()> {
        if s.source_count() != self.j || s.samples_per_source() != self.n {
            return Err(Error::Dimension {
                what: "signal block length",
                expected: self.j * self.n,
                got: s.source_count() * s.samples_per_source(),
            });
        }
        Ok(())
    }

    fn check_phases(&self, x: &PhaseVector) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::Dimension { what: "phase vector length", expected: self.m, got: x.len() });
        }
        Ok(())
    }

    /// Complex response `v_kℓᴴ diag(x) Q_kℓ s` of one grid point.
    pub fn response(&self, x: &PhaseVector, s: &SignalBlock, k: usize, l: usize) -> Result<Complex64> {
        self.check_phases(x)?;
        let sigma = signal_spectrum(s, self.bandwidth_hz, self.grid.freqs[k]);
        self.check_signal(s)?;
        let u = self.element_excitation(&sigma, k);
        let xs = x.as_slice();
        Ok(self.with_steering(k, l, |v| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..self.m {
                acc += v[i].conj() * xs[i] * u[i];
            }
            acc
        }))
    }

    /// Amplitude beampattern of one grid point.
    pub fn beampattern_value(&self, x: &PhaseVector, s: &SignalBlock, k: usize, l: usize) -> Result<f64> {
        Ok(self.response(x, s, k, l)?.norm())
    }

    /// Complex responses over the whole grid, index `k·L + l`.
    pub fn response_grid(&self, x: &PhaseVector, s: &SignalBlock) -> Result<Vec<Complex64>> {
        self.check_phases(x)?;
        self.check_signal(s)?;
        let xs = x.as_slice();
        let l_count = self.grid.angle_count();
        let per_k: Vec<Vec<Complex64>> = (0..self.grid.freq_count())
            .into_par_iter()
            .map(|k| {
                let sigma = signal_spectrum(s, self.bandwidth_hz, self.grid.freqs[k]);
                let u = self.element_excitation(&sigma, k);
                let mut row = vec![Complex64::new(0.0, 0.0); l_count];
                self.for_each_angle(k, |li, v| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..self.m {
                        acc += v[i].conj() * xs[i] * u[i];
                    }
                    row[li] = acc;
                });
                row
            })
            .collect();
        Ok(per_k.concat())
    }

    /// Angle-summed steering outer products `Vₖ = Σ_ℓ w_kℓ v v^H`,
    /// built once per engine and shared by both solver sub-problems.
    fn angle_gram(&self) -> &[DMatrix<Complex64>] {
        self.vv.get_or_init(|| {
            let m = self.m;
            (0..self.grid.freq_count())
                .into_par_iter()
                .map(|k| {
                    let mut c = DMatrix::<Complex64>::zeros(m, m);
                    self.for_each_angle(k, |li, v| {
                        let w = self.grid.weight(k, li);
                        if w == 0.0 {
                            return;
                        }
                        let cs = c.as_mut_slice();
                        for col in 0..m {
                            let a = Complex64::new(w, 0.0) * v[col].conj();
                            let col_slice = &mut cs[col * m..(col + 1) * m];
                            for (ci, &vi) in col_slice.iter_mut().zip(v.iter()) {
                                *ci += vi * a;
                            }
                        }
                    });
                    c
                })
                .collect()
        })
    }

    /// Matrix-free form of the signal-update quadratic; call
    /// [`SignalQuadratic::materialize`] for the dense JN×JN matrix.
    pub fn gram_operator(&self, x: &PhaseVector) -> Result<SignalQuadratic> {
        self.check_phases(x)?;
        let vv = self.angle_gram();
        let all_ones = x.as_slice().iter().all(|&c| c == Complex64::new(1.0, 0.0));
        let ck: Vec<DMatrix<Complex64>> = (0..self.grid.freq_count())
            .into_par_iter()
            .map(|k| {
                let mut c = if self.identity_gains && all_ones {
                    vv[k].clone()
                } else {
                    let mut w1 = self.gains[k].clone();
                    for jj in 0..self.j {
                        for i in 0..self.m {
                            w1[(i, jj)] *= x.as_slice()[i];
                        }
                    }
                    w1.adjoint() * &vv[k] * w1
                };
                // exact Hermitian symmetrization
                let ch = c.adjoint();
                c += ch;
                c.scale_mut(0.5);
                c
            })
            .collect();
        Ok(SignalQuadratic {
            ck,
            evecs: self.frequency_phasors(),
            scale: self.scale * self.scale,
            j: self.j,
            n: self.n,
        })
    }

    /// Dense signal-update matrix `A` (Hermitian PSD by construction).
    pub fn gram_matrix(&self, x: &PhaseVector) -> Result<DMatrix<Complex64>> {
        Ok(self.gram_operator(x)?.materialize())
    }

    /// Phasor vector `e(f_k)` with entry `n` equal to `e^{-2πi (n+1) f_k/W}`.
    fn frequency_phasors(&self) -> Vec<DVector<Complex64>> {
        self.grid
            .freqs
            .iter()
            .map(|&f| {
                DVector::from_iterator(
                    self.n,
                    (1..=self.n).map(|nn| cis(-2.0 * PI * nn as f64 * f / self.bandwidth_hz)),
                )
            })
            .collect()
    }

    /// Weighted right-hand side of the signal update:
    /// `b = (1/(W√T)) Σ_kℓ w d e^{iψ} (e*(f_k) ⊗ g_kℓ)`.
    pub fn rhs_vector(
        &self,
        x: &PhaseVector,
        psi: &AuxPhases,
        d: &DesiredPattern,
    ) -> Result<DVector<Complex64>> {
        self.check_phases(x)?;
        self.check_grid_field(psi.as_slice().len(), "aux phase grid")?;
        self.check_grid_field(d.values().len(), "desired pattern grid")?;
        let l_count = self.grid.angle_count();
        let evecs = self.frequency_phasors();
        let hk: Vec<DVector<Complex64>> = (0..self.grid.freq_count())
            .into_par_iter()
            .map(|k| {
                // t_k = Σ_ℓ w d e^{iψ} v_kℓ, then h_k = G̃ᴴ (x* ⊙ t_k)
                let mut t = DVector::<Complex64>::zeros(self.m);
                self.for_each_angle(k, |li, v| {
                    let idx = k * l_count + li;
                    let wd = self.grid.weights[idx] * d.values()[idx];
                    if wd == 0.0 {
                        return;
                    }
                    let coeff = Complex64::new(wd, 0.0) * cis(psi.as_slice()[idx]);
                    for i in 0..self.m {
                        t[i] += coeff * v[i];
                    }
                });
                for i in 0..self.m {
                    t[i] *= x.as_slice()[i].conj();
                }
                self.gains[k].adjoint() * t
            })
            .collect();
        let mut b = DVector::<Complex64>::zeros(self.j * self.n);
        for (k, h) in hk.iter().enumerate() {
            for nn in 0..self.n {
                let e = evecs[k][nn].conj() * self.scale;
                let block = &mut b.as_mut_slice()[nn * self.j..(nn + 1) * self.j];
                for (bj, hj) in block.iter_mut().zip(h.iter()) {
                    *bj += e * hj;
                }
            }
        }
        Ok(b)
    }

    /// Per-element response weights `c_kℓ` satisfying
    /// `c_kℓᴴ x = v_kℓᴴ diag(x) Q_kℓ s` for every unit-modulus `x`.
    pub fn element_response_vector(
        &self,
        s: &SignalBlock,
        k: usize,
        l: usize,
    ) -> Result<DVector<Complex64>> {
        self.check_signal(s)?;
        let sigma = signal_spectrum(s, self.bandwidth_hz, self.grid.freqs[k]);
        let u = self.element_excitation(&sigma, k);
        Ok(self.with_steering(k, l, |v| {
            DVector::from_iterator(self.m, (0..self.m).map(|i| u[i].conj() * v[i]))
        }))
    }

    /// Homogenized quadratic form of the phase update: the Hermitian
    /// (M+1)×(M+1) matrix `B` with
    /// `[xᴴ 1] B [xᵀ 1]ᵀ = Σ w |d e^{iψ} - response|²` for unit-modulus x.
    pub fn lifted_phase_matrix(
        &self,
        s: &SignalBlock,
        psi: &AuxPhases,
        d: &DesiredPattern,
    ) -> Result<DMatrix<Complex64>> {
        self.check_signal(s)?;
        self.check_grid_field(psi.as_slice().len(), "aux phase grid")?;
        self.check_grid_field(d.values().len(), "desired pattern grid")?;
        let m = self.m;
        let l_count = self.grid.angle_count();
        let vv = self.angle_gram();
        struct Part {
            tl: DMatrix<Complex64>,
            tr: DVector<Complex64>,
            br: f64,
        }
        let parts: Vec<Part> = (0..self.grid.freq_count())
            .into_par_iter()
            .map(|k| {
                let sigma = signal_spectrum(s, self.bandwidth_hz, self.grid.freqs[k]);
                let u = self.element_excitation(&sigma, k);
                // top-left: diag(u)ᴴ V_k diag(u)
                let mut tl = DMatrix::<Complex64>::zeros(m, m);
                {
                    let tls = tl.as_mut_slice();
                    let vs = vv[k].as_slice();
                    for col in 0..m {
                        let uc = u[col];
                        for row in 0..m {
                            tls[col * m + row] = u[row].conj() * vs[col * m + row] * uc;
                        }
                    }
                }
                // t_k = Σ_ℓ w d e^{iψ} v_kℓ and the d² corner
                let mut t = DVector::<Complex64>::zeros(m);
                let mut br = 0.0;
                self.for_each_angle(k, |li, v| {
                    let idx = k * l_count + li;
                    let w = self.grid.weights[idx];
                    let dv = d.values()[idx];
                    if w == 0.0 || dv == 0.0 {
                        return;
                    }
                    br += w * dv * dv;
                    let coeff = Complex64::new(w * dv, 0.0) * cis(psi.as_slice()[idx]);
                    for i in 0..m {
                        t[i] += coeff * v[i];
                    }
                });
                let tr = DVector::from_iterator(m, (0..m).map(|i| -(u[i].conj() * t[i])));
                Part { tl, tr, br }
            })
            .collect();
        let mut out = DMatrix::<Complex64>::zeros(m + 1, m + 1);
        for p in &parts {
            for col in 0..m {
                for row in 0..m {
                    out[(row, col)] += p.tl[(row, col)];
                }
            }
            for row in 0..m {
                out[(row, m)] += p.tr[row];
            }
            out[(m, m)] += Complex64::new(p.br, 0.0);
        }
        for i in 0..m {
            out[(m, i)] = out[(i, m)].conj();
        }
        let oh = out.adjoint();
        out += oh;
        out.scale_mut(0.5);
        Ok(out)
    }

    fn check_grid_field(&self, got: usize, what: &'static str) -> Result<()> {
        if got != self.grid.point_count() {
            return Err(Error::Dimension { what, expected: self.grid.point_count(), got });
        }
        Ok(())
    }
}

/// Factored signal-update quadratic `A = scale·Σ_k (e*ₖeₖᵀ) ⊗ Cₖ`.
///
/// Applies in `O(K·N·J + K·J²)` without forming the JN×JN matrix; used
/// directly by the conjugate-gradient ball solver when JN is large.
pub struct SignalQuadratic {
    ck: Vec<DMatrix<Complex64>>,
    evecs: Vec<DVector<Complex64>>,
    scale: f64,
    j: usize,
    n: usize,
}

impl SignalQuadratic {
    pub fn dim(&self) -> usize {
        self.j * self.n
    }

    /// `A·u` through the factorization.
    pub fn apply(&self, u: &DVector<Complex64>) -> DVector<Complex64> {
        let j = self.j;
        let n = self.n;
        let per_k: Vec<DVector<Complex64>> = (0..self.ck.len())
            .into_par_iter()
            .map(|k| {
                let e = &self.evecs[k];
                let mut uhat = DVector::<Complex64>::zeros(j);
                for nn in 0..n {
                    let en = e[nn];
                    let block = &u.as_slice()[nn * j..(nn + 1) * j];
                    for (a, &b) in uhat.iter_mut().zip(block.iter()) {
                        *a += en * b;
                    }
                }
                &self.ck[k] * uhat
            })
            .collect();
        let mut out = DVector::<Complex64>::zeros(j * n);
        for (k, cu) in per_k.iter().enumerate() {
            let e = &self.evecs[k];
            for nn in 0..n {
                let en = e[nn].conj() * self.scale;
                let block = &mut out.as_mut_slice()[nn * j..(nn + 1) * j];
                for (o, &c) in block.iter_mut().zip(cu.iter()) {
                    *o += en * c;
                }
            }
        }
        out
    }

    /// Dense JN×JN matrix, Hermitian-symmetrized.
    pub fn materialize(&self) -> DMatrix<Complex64> {
        let dim = self.dim();
        let j = self.j;
        let mut a = DMatrix::<Complex64>::zeros(dim, dim);
        for (k, ck) in self.ck.iter().enumerate() {
            let e = &self.evecs[k];
            for n2 in 0..self.n {
                for n1 in 0..self.n {
                    let factor = e[n1].conj() * e[n2] * self.scale;
                    for jj2 in 0..j {
                        for jj1 in 0..j {
                            a[(n1 * j + jj1, n2 * j + jj2)] += factor * ck[(jj1, jj2)];
                        }
                    }
                }
            }
        }
        let ah = a.adjoint();
        a += ah;
        a.scale_mut(0.5);
        a
    }
}
