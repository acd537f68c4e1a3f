//! Block-coordinate descent over the auxiliary phases, the source
//! samples and the RIS phases.
//!
//! The matching objective `Σ w (d - B)²` is lifted with one auxiliary
//! phase per grid point, after which each block minimization is exact:
//! the auxiliary phases align with the complex responses, the signal
//! block solves a ball-constrained convex quadratic, and the RIS phases
//! solve a unit-modulus quadratic by coordinate descent from a warm
//! start. Every block update therefore leaves the lifted objective
//! non-increasing.

pub mod ball_qp;
pub mod unit_modulus;

pub use ball_qp::{solve_ball_qp, solve_ball_qp_operator, BallQpOptions, BallQpReport, HermitianApply};
pub use unit_modulus::{best_single_coordinate_improvement, solve_unit_modulus_qp, CdOptions, CdReport};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::operators::Operators;
use crate::pattern::{build_desired, DesiredPattern, PatternBox};

/// Stacked source samples `s = [s_1ᵀ … s_Nᵀ]ᵀ`, where `s_n ∈ C^J` holds
/// the J source samples at time `n/W`; entry `(n, j)` lives at index
/// `(n-1)·J + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    samples: Vec<Complex64>,
    sources: usize,
    per_source: usize,
}

impl SignalBlock {
    pub fn new(samples: Vec<Complex64>, sources: usize, per_source: usize) -> Result<Self> {
        if samples.len() != sources * per_source {
            return Err(Error::Dimension {
                what: "signal block length",
                expected: sources * per_source,
                got: samples.len(),
            });
        }
        Ok(Self { samples, sources, per_source })
    }

    pub fn zeros(sources: usize, per_source: usize) -> Self {
        Self { samples: vec![Complex64::new(0.0, 0.0); sources * per_source], sources, per_source }
    }

    /// Constant-modulus samples with i.i.d. uniform phases, scaled so
    /// that `‖s‖² = N·P` exactly.
    pub fn random_flat(sources: usize, per_source: usize, power_w: f64, rng: &mut impl Rng) -> Self {
        let mag = (power_w / sources as f64).sqrt();
        let samples = (0..sources * per_source)
            .map(|_| {
                let p = rng.gen::<f64>() * 2.0 * PI;
                Complex64::new(mag * p.cos(), mag * p.sin())
            })
            .collect();
        Self { samples, sources, per_source }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn source_count(&self) -> usize {
        self.sources
    }

    pub fn samples_per_source(&self) -> usize {
        self.per_source
    }

    /// Sample of `source` at 0-based time index `n0` (time `(n0+1)/W`).
    #[inline]
    pub fn at(&self, source: usize, n0: usize) -> Complex64 {
        self.samples[n0 * self.sources + source]
    }

    pub fn norm_squared(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Enforces `‖s‖² ≤ budget·(1 + 1e-9)`.
    pub fn check_power(&self, budget: f64) -> Result<()> {
        let found = self.norm_squared();
        if found > budget * (1.0 + 1e-9) {
            return Err(Error::PowerBudget { found, budget });
        }
        Ok(())
    }
}

/// Unit-modulus RIS phase configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    x: Vec<Complex64>,
}

impl PhaseVector {
    pub fn all_ones(m: usize) -> Self {
        Self { x: vec![Complex64::new(1.0, 0.0); m] }
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self { x: phases.iter().map(|&p| Complex64::new(p.cos(), p.sin())).collect() }
    }

    pub fn random(m: usize, rng: &mut impl Rng) -> Self {
        Self::from_phases(&(0..m).map(|_| rng.gen::<f64>() * 2.0 * PI).collect::<Vec<_>>())
    }

    /// Validates `||x_i| - 1| ≤ 1e-12` for every entry.
    pub fn try_from_complex(x: Vec<Complex64>) -> Result<Self> {
        for (i, v) in x.iter().enumerate() {
            if (v.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::NotUnitModulus { index: i, modulus: v.norm(), tolerance: 1e-12 });
            }
        }
        Ok(Self { x })
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.x.iter().map(|v| v.arg()).collect()
    }

    pub fn max_modulus_deviation(&self) -> f64 {
        self.x.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// One auxiliary phase per grid point, stored like the grid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxPhases {
    psi: Vec<f64>,
}

impl AuxPhases {
    pub fn new(psi: Vec<f64>) -> Self {
        Self { psi }
    }

    pub fn zeros(len: usize) -> Self {
        Self { psi: vec![0.0; len] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.psi
    }
}

/// Initial RIS phase configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// All phases zero (x = 1); deterministic.
    #[default]
    Ones,
    /// Uniform random phases from the run seed.
    RandomPhases,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Cap on full BCD cycles.
    pub max_cycles: usize,
    /// Stop when a full cycle shrinks the matching objective by less
    /// than this relative amount.
    pub rel_tol: f64,
    pub cd_max_sweeps: usize,
    pub cd_tol: f64,
    pub bisection_tol: f64,
    pub rank_threshold: f64,
    /// Largest JN handled by the dense eigendecomposition; above this
    /// the signal update switches to the matrix-free CG path.
    pub direct_eig_limit: usize,
    pub seed: u64,
    pub init: InitMode,
    /// Independent restarts; the first uses `init`, later ones draw
    /// random phases. Best final objective wins.
    pub restarts: usize,
    /// Cycle cap for each height-calibration probe run.
    pub calibration_cycles: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_cycles: 150,
            rel_tol: 1e-6,
            cd_max_sweeps: 100,
            cd_tol: 1e-10,
            bisection_tol: 1e-10,
            rank_threshold: 1e-12,
            direct_eig_limit: 1024,
            seed: 1,
            init: InitMode::Ones,
            restarts: 1,
            calibration_cycles: 10,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_cycles == 0 || self.restarts == 0 {
            return Err(Error::InvalidOptions("cycle and restart counts must be positive".into()));
        }
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("cd_tol", self.cd_tol),
            ("bisection_tol", self.bisection_tol),
            ("rank_threshold", self.rank_threshold),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidOptions(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn ball_qp(&self) -> BallQpOptions {
        BallQpOptions {
            bisection_tol: self.bisection_tol,
            rank_threshold: self.rank_threshold,
            ..Default::default()
        }
    }

    fn cd(&self) -> CdOptions {
        CdOptions { max_sweeps: self.cd_max_sweeps, tol: self.cd_tol, ..Default::default() }
    }
}

/// Result of one synthesis run.
#[derive(Debug, Clone)]
pub struct BcdOutcome {
    pub signals: SignalBlock,
    pub phases: PhaseVector,
    pub aux: AuxPhases,
    /// Lifted objective recorded after every block update.
    pub objective_history: Vec<f64>,
    /// Final matching objective `Σ w (d - B)²`.
    pub matching_error: f64,
    /// `matching_error / Σ w d²`, when the pattern has energy.
    pub rse: Option<f64>,
    pub cycles: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Lifted objective `Σ w |d e^{iψ} - response|²`.
pub fn objective(
    ops: &Operators,
    s: &SignalBlock,
    x: &PhaseVector,
    psi: &AuxPhases,
    d: &DesiredPattern,
) -> Result<f64> {
    let responses = ops.response_grid(x, s)?;
    let grid = ops.grid();
    let mut acc = 0.0;
    for (idx, r) in responses.iter().enumerate() {
        let w = grid.weights[idx];
        if w == 0.0 {
            continue;
        }
        let target = Complex64::from_polar(d.values()[idx], psi.as_slice()[idx]);
        acc += w * (target - r).norm_sqr();
    }
    Ok(acc)
}

/// Matching objective `Σ w (d - |response|)²`, the ψ-eliminated form.
pub fn matching_objective(
    ops: &Operators,
    s: &SignalBlock,
    x: &PhaseVector,
    d: &DesiredPattern,
) -> Result<f64> {
    let responses = ops.response_grid(x, s)?;
    let grid = ops.grid();
    let mut acc = 0.0;
    for (idx, r) in responses.iter().enumerate() {
        let w = grid.weights[idx];
        if w == 0.0 {
            continue;
        }
        let diff = d.values()[idx] - r.norm();
        acc += w * diff * diff;
    }
    Ok(acc)
}

/// Exact minimizer over the auxiliary phases: the argument of each
/// complex response, zero where the response vanishes.
pub fn update_psi(ops: &Operators, s: &SignalBlock, x: &PhaseVector) -> Result<AuxPhases> {
    let responses = ops.response_grid(x, s)?;
    Ok(AuxPhases::new(
        responses
            .iter()
            .map(|r| if r.norm() == 0.0 { 0.0 } else { r.arg() })
            .collect(),
    ))
}

/// Exact minimizer over the source samples: a ball-constrained convex
/// quadratic assembled from the factorized operators.
pub fn update_signals(
    ops: &Operators,
    x: &PhaseVector,
    psi: &AuxPhases,
    d: &DesiredPattern,
    opts: &SolverOptions,
) -> Result<SignalBlock> {
    let b = ops.rhs_vector(x, psi, d)?;
    let budget = ops.power_budget();
    let quad = ops.gram_operator(x)?;
    let report = if quad.dim() <= opts.direct_eig_limit {
        solve_ball_qp(&quad.materialize(), &b, budget, &opts.ball_qp())?
    } else {
        solve_ball_qp_operator(&quad, &b, budget, &opts.ball_qp())?
    };
    SignalBlock::new(
        report.solution.as_slice().to_vec(),
        ops.source_count(),
        ops.sample_count(),
    )
}

/// One RIS phase update: homogenize, descend from the warm start
/// `z = [xᵀ 1]ᵀ`, then recover `x_i = z_i / z_{M+1}` renormalized to
/// exact unit modulus.
pub fn update_phases(
    ops: &Operators,
    s: &SignalBlock,
    psi: &AuxPhases,
    d: &DesiredPattern,
    x: &PhaseVector,
    opts: &SolverOptions,
) -> Result<PhaseVector> {
    let lifted = ops.lifted_phase_matrix(s, psi, d)?;
    let mut z0 = x.as_slice().to_vec();
    z0.push(Complex64::new(1.0, 0.0));
    let report = solve_unit_modulus_qp(&lifted, &z0, &opts.cd())?;
    let pivot = report.z[ops.element_count()];
    let recovered: Vec<Complex64> = report.z[..ops.element_count()]
        .iter()
        .map(|&z| {
            let v = z / pivot;
            v / v.norm()
        })
        .collect();
    PhaseVector::try_from_complex(recovered)
}

/// Full block-coordinate descent for the RIS architecture.
pub fn run_bcd(ops: &Operators, d: &DesiredPattern, opts: &SolverOptions) -> Result<BcdOutcome> {
    run_loop(ops, d, opts, false)
}

/// The MIMO comparison: identical descent with the phase screen frozen
/// at all-ones (build the engine with [`Operators::new_mimo`]).
pub fn run_mimo_baseline(
    ops: &Operators,
    d: &DesiredPattern,
    opts: &SolverOptions,
) -> Result<BcdOutcome> {
    run_loop(ops, d, opts, true)
}

fn run_loop(
    ops: &Operators,
    d: &DesiredPattern,
    opts: &SolverOptions,
    freeze_phases: bool,
) -> Result<BcdOutcome> {
    opts.validate()?;
    ops.grid().validate(ops.bandwidth_hz())?;
    if d.values().len() != ops.grid().point_count() {
        return Err(Error::Dimension {
            what: "desired pattern grid",
            expected: ops.grid().point_count(),
            got: d.values().len(),
        });
    }
    let energy = d.weighted_energy(&ops.grid().weights);
    let mut best: Option<BcdOutcome> = None;
    for restart in 0..opts.restarts {
        let seed = opts.seed.wrapping_add(restart as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = if freeze_phases {
            PhaseVector::all_ones(ops.element_count())
        } else {
            match (opts.init, restart) {
                (InitMode::Ones, 0) => PhaseVector::all_ones(ops.element_count()),
                _ => PhaseVector::random(ops.element_count(), &mut rng),
            }
        };
        let mut s = SignalBlock::random_flat(
            ops.source_count(),
            ops.sample_count(),
            ops.power_budget() / ops.sample_count() as f64,
            &mut rng,
        );
        let mut history = Vec::new();
        let mut prev_match = matching_objective(ops, &s, &x, d)?;
        let mut converged = false;
        let mut cycles = 0;
        for cycle in 1..=opts.max_cycles {
            let mut psi = update_psi(ops, &s, &x)?;
            history.push(objective(ops, &s, &x, &psi, d)?);
            s = update_signals(ops, &x, &psi, d, opts)?;
            history.push(objective(ops, &s, &x, &psi, d)?);
            psi = update_psi(ops, &s, &x)?;
            history.push(objective(ops, &s, &x, &psi, d)?);
            if !freeze_phases {
                x = update_phases(ops, &s, &psi, d, &x, opts)?;
                history.push(objective(ops, &s, &x, &psi, d)?);
            }
            cycles = cycle;
            let current = matching_objective(ops, &s, &x, d)?;
            if current == 0.0
                || prev_match - current <= opts.rel_tol * prev_match.max(f64::MIN_POSITIVE)
            {
                converged = true;
                break;
            }
            prev_match = current;
        }
        // leave the auxiliary phases aligned with the final iterate
        let psi = update_psi(ops, &s, &x)?;
        let final_obj = objective(ops, &s, &x, &psi, d)?;
        history.push(final_obj);
        let outcome = BcdOutcome {
            signals: s,
            phases: x,
            aux: psi,
            objective_history: history,
            matching_error: final_obj,
            rse: if energy > 0.0 { Some(final_obj / energy) } else { None },
            cycles,
            converged,
            seed,
        };
        let better = match &best {
            None => true,
            Some(b) => outcome.matching_error < b.matching_error,
        };
        if better {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Binds the golden-section height search to short capped BCD runs: each
/// probe rebuilds the desired pattern at the candidate height and scores
/// the resulting relative square error.
pub fn calibrate_height(
    ops: &Operators,
    boxes: &[PatternBox],
    opts: &SolverOptions,
    range: (f64, f64),
) -> Result<f64> {
    let mut probe_opts = opts.clone();
    probe_opts.max_cycles = opts.calibration_cycles.max(1);
    probe_opts.restarts = 1;
    crate::pattern::calibrate_height(range, 12, |height| {
        let d = build_desired(boxes, height, ops.grid())?;
        let outcome = run_bcd(ops, &d, &probe_opts)?;
        outcome.rse.ok_or(Error::ZeroPatternEnergy)
    })
}
