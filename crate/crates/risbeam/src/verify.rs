//! Cross-check harness: runs the production operators and sub-solvers
//! against the slow-path oracles on seeded random small scenes. Used by
//! the `verify` command and by the acceptance suite.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::Result;
use crate::operators::{OperatorOptions, Operators};
use crate::oracle;
use crate::pattern::DesiredPattern;
use crate::scene::{FeederLayout, Geometry, SamplingGrid, SceneConfig};
use crate::solver::{
    best_single_coordinate_improvement, solve_ball_qp, solve_ball_qp_operator,
    solve_unit_modulus_qp, AuxPhases, BallQpOptions, CdOptions, PhaseVector, SignalBlock,
};

/// Result of one cross-check family.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub trials: usize,
    /// Headline metric, comparable against `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn vacuous(name: &'static str, tolerance: f64) -> Self {
        Self { name, trials: 0, worst: 0.0, tolerance, passed: true, detail: "no trials".into() }
    }
}

/// Random scene within the small-envelope used by all cross-checks:
/// M ≤ 6, J ≤ 3, N ≤ 4 and at most 16 grid points.
pub fn random_small_scene(rng: &mut ChaCha8Rng) -> (SceneConfig, Geometry, SamplingGrid) {
    let rows = 1 + rng.gen_range(0..3usize);
    let cols = 1 + rng.gen_range(0..2usize);
    let feeder_count = 1 + rng.gen_range(0..3usize);
    let feeders: Vec<Vector3<f64>> = (0..feeder_count)
        .map(|_| {
            Vector3::new(
                -(0.2 + 0.6 * rng.gen::<f64>()),
                0.6 * (rng.gen::<f64>() - 0.5),
                0.6 * (rng.gen::<f64>() - 0.5),
            )
        })
        .collect();
    let bandwidth = 2.0e7 + 1.3e8 * rng.gen::<f64>();
    let n = 1 + rng.gen_range(0..4usize);
    let cfg = SceneConfig {
        ris_rows: rows,
        ris_cols: cols,
        element_spacing_m: 0.03 + 0.05 * rng.gen::<f64>(),
        carrier_hz: 1.0e9 + 3.0e9 * rng.gen::<f64>(),
        bandwidth_hz: bandwidth,
        duration_s: (n as f64 + 0.4) / bandwidth,
        power_w: 0.5 + 3.5 * rng.gen::<f64>(),
        feeder_layout: FeederLayout::Explicit(feeders),
        feeder_standoff_m: 0.5,
        freq_points: 1 + rng.gen_range(0..4usize),
        theta_points: 1 + rng.gen_range(0..2usize),
        phi_points: 1 + rng.gen_range(0..2usize),
    };
    let geom = Geometry::build(&cfg).unwrap();
    let mut grid = crate::scene::build_sampling_grid(&cfg);
    for w in grid.weights.iter_mut() {
        *w = 0.1 + 1.9 * rng.gen::<f64>();
    }
    (cfg, geom, grid)
}

fn random_state(
    ops: &Operators,
    rng: &mut ChaCha8Rng,
) -> (PhaseVector, SignalBlock, AuxPhases, DesiredPattern) {
    let x = PhaseVector::from_phases(
        &(0..ops.element_count()).map(|_| rng.gen::<f64>() * 2.0 * PI).collect::<Vec<_>>(),
    );
    let s = SignalBlock::new(
        (0..ops.source_count() * ops.sample_count())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect(),
        ops.source_count(),
        ops.sample_count(),
    )
    .unwrap();
    let points = ops.grid().point_count();
    let psi = AuxPhases::new((0..points).map(|_| rng.gen::<f64>() * 2.0 * PI).collect());
    let d = DesiredPattern::from_values(
        (0..points).map(|_| rng.gen::<f64>()).collect(),
        ops.grid().freq_count(),
        ops.grid().thetas.len(),
        ops.grid().phis.len(),
    )
    .unwrap();
    (x, s, psi, d)
}

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Factorized beampattern, quadratic and linear forms against their
/// literal-definition counterparts.
pub fn check_operator_equivalence(trials: usize, seed: u64, fault: bool) -> Result<CheckOutcome> {
    let tolerance = 1e-10;
    if trials == 0 {
        return Ok(CheckOutcome::vacuous("operator-equivalence", tolerance));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (cfg, geom, grid) = random_small_scene(&mut rng);
        let opts = OperatorOptions { delay_fault: fault, ..Default::default() };
        let ops = Operators::new_ris(&cfg, &geom, grid.clone(), &opts)?;
        let (x, s, psi, d) = random_state(&ops, &mut rng);

        // beampattern values over the whole grid
        for k in 0..grid.freq_count() {
            for l in 0..grid.angle_count() {
                let fast = ops.beampattern_value(&x, &s, k, l)?;
                let (theta, phi) = grid.angles(l);
                let slow = oracle::direct_beampattern(&s, &x, &cfg, &geom, grid.freqs[k], theta, phi);
                worst = worst.max(rel_dev(fast, slow));
            }
        }

        // quadratic form against the literal accumulation
        let fast_a = ops.gram_matrix(&x)?;
        let dim = ops.source_count() * ops.sample_count();
        let mut slow_a = DMatrix::<Complex64>::zeros(dim, dim);
        let mut slow_b = DVector::<Complex64>::zeros(dim);
        for k in 0..grid.freq_count() {
            let q = oracle::literal_q_matrix(&cfg, &geom, grid.freqs[k]);
            for l in 0..grid.angle_count() {
                let idx = k * grid.angle_count() + l;
                let (theta, phi) = grid.angles(l);
                let v = oracle::literal_steering(&cfg, &geom, grid.freqs[k], theta, phi);
                let xv = DVector::from_iterator(
                    v.len(),
                    v.iter().zip(x.as_slice()).map(|(vi, xi)| xi.conj() * vi),
                );
                let qhv = q.adjoint() * xv;
                slow_a.gerc(Complex64::new(grid.weights[idx], 0.0), &qhv, &qhv, Complex64::new(1.0, 0.0));
                let coeff = Complex64::from_polar(
                    grid.weights[idx] * d.values()[idx],
                    psi.as_slice()[idx],
                );
                slow_b += qhv * coeff;
            }
        }
        worst = worst.max((&fast_a - &slow_a).norm() / slow_a.norm().max(1e-300));
        let fast_b = ops.rhs_vector(&x, &psi, &d)?;
        worst = worst.max((&fast_b - &slow_b).norm() / slow_b.norm().max(1e-300));
    }
    Ok(CheckOutcome {
        name: "operator-equivalence",
        trials,
        worst,
        tolerance,
        passed: worst <= tolerance,
        detail: format!("max relative deviation {worst:.3e}"),
    })
}

/// Range-scaled far-field spectra at two ranges against the production
/// beampattern value at the same space-frequency point.
pub fn check_range_invariance(trials: usize, seed: u64, fault: bool) -> Result<CheckOutcome> {
    let tolerance = 1e-10;
    if trials == 0 {
        return Ok(CheckOutcome::vacuous("range-invariance", tolerance));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (mut cfg, geom, _) = random_small_scene(&mut rng);
        let f = (rng.gen::<f64>() - 0.5) * cfg.bandwidth_hz;
        let theta = (rng.gen::<f64>() - 0.5) * PI;
        let phi = (rng.gen::<f64>() - 0.5) * PI;
        cfg.freq_points = 1;
        cfg.theta_points = 1;
        cfg.phi_points = 1;
        let point_grid =
            SamplingGrid { freqs: vec![f], thetas: vec![theta], phis: vec![phi], weights: vec![1.0] };
        let opts = OperatorOptions { delay_fault: fault, ..Default::default() };
        let ops = Operators::new_ris(&cfg, &geom, point_grid, &opts)?;
        let (x, s, _, _) = random_state(&ops, &mut rng);
        let produced = ops.beampattern_value(&x, &s, 0, 0)?;
        let mut scaled = [0.0f64; 2];
        for (slot, r) in scaled.iter_mut().zip([1.0e3, 1.0e6]) {
            let y = oracle::observed_spectrum(&s, &x, &cfg, &geom, f, r, theta, phi)?;
            *slot = (4.0 * PI * r * r / cfg.duration_s).sqrt() * y.norm();
        }
        worst = worst.max(rel_dev(scaled[0], scaled[1]));
        worst = worst.max(rel_dev(scaled[0], produced));
        worst = worst.max(rel_dev(scaled[1], produced));
    }
    Ok(CheckOutcome {
        name: "range-invariance",
        trials,
        worst,
        tolerance,
        passed: worst <= tolerance,
        detail: format!("max relative deviation {worst:.3e}"),
    })
}

/// Ball-constrained QP against the multiplier-scan oracle, including
/// rank-deficient matrices and right-hand sides with and without
/// null-space components; also cross-checks the matrix-free CG path.
pub fn check_ball_qp(trials: usize, seed: u64) -> Result<CheckOutcome> {
    let tolerance = 1e-6;
    if trials == 0 {
        return Ok(CheckOutcome::vacuous("ball-qp", tolerance));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xba11));
    let mut worst_gap = 0.0f64;
    let mut worst_kkt = 0.0f64;
    let mut worst_slack = 0.0f64;
    let opts = BallQpOptions::default();
    let objective = |a: &DMatrix<Complex64>, b: &DVector<Complex64>, s: &DVector<Complex64>| {
        s.dotc(&(a * s)).re - 2.0 * s.dotc(b).re
    };
    for trial in 0..trials {
        let dim = 1 + trial % 4;
        let rank = rng.gen_range(0..=dim);
        let a = if rank == 0 {
            DMatrix::<Complex64>::zeros(dim, dim)
        } else {
            let f = DMatrix::<Complex64>::from_fn(rank, dim, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            f.adjoint() * f
        };
        let free = DVector::<Complex64>::from_fn(dim, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        // half the time, restrict b to the range of A (no null component)
        let b = if rng.gen::<bool>() && rank > 0 { &a * &free } else { free };
        let radius_sq = 0.25 + 3.75 * rng.gen::<f64>();
        let report = solve_ball_qp(&a, &b, radius_sq, &opts)?;
        let brute = oracle::brute_ball_qp(&a, &b, radius_sq)?;
        let gap = objective(&a, &b, &report.solution) - objective(&a, &b, &brute);
        worst_gap = worst_gap.max(gap);
        if b.norm() > 0.0 {
            worst_kkt = worst_kkt.max(report.kkt_residual / b.norm());
        }
        let slack = report.multiplier * (report.solution.norm_squared() - radius_sq).abs();
        worst_slack = worst_slack.max(slack / (radius_sq * report.multiplier.max(1e-300)));
        // matrix-free path must land on the same objective
        let cg = solve_ball_qp_operator(&a, &b, radius_sq, &opts)?;
        let cg_gap = objective(&a, &b, &cg.solution) - objective(&a, &b, &brute);
        worst_gap = worst_gap.max(cg_gap);
    }
    let passed = worst_gap <= tolerance && worst_kkt <= 1e-8 && worst_slack <= 1e-6;
    Ok(CheckOutcome {
        name: "ball-qp",
        trials,
        worst: worst_gap,
        tolerance,
        passed,
        detail: format!(
            "max objective gap {worst_gap:.3e}, kkt/‖b‖ {worst_kkt:.3e}, relative slackness {worst_slack:.3e}"
        ),
    })
}

/// Unit-modulus coordinate descent: monotone steps, grid stationarity at
/// exit, and agreement with the exhaustive oracle whenever descent lands
/// in the global basin.
pub fn check_unit_modulus(trials: usize, seed: u64) -> Result<CheckOutcome> {
    let tolerance = 1e-6;
    if trials == 0 {
        return Ok(CheckOutcome::vacuous("unit-modulus-qp", tolerance));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x0d));
    let mut worst_stationarity = 0.0f64;
    let mut monotone = true;
    let mut global_matches = 0usize;
    let opts = CdOptions::default();
    for trial in 0..trials {
        let dim = 2 + trial % 2;
        let r = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let b = &r + r.adjoint();
        let z0: Vec<Complex64> =
            (0..dim).map(|_| Complex64::from_polar(1.0, rng.gen::<f64>() * 2.0 * PI)).collect();
        let start_obj = {
            let zv = DVector::from_column_slice(&z0);
            zv.dotc(&(&b * &zv)).re
        };
        let rep = solve_unit_modulus_qp(&b, &z0, &opts)?;
        let mut prev = start_obj;
        for &o in &rep.step_objectives {
            if o > prev + 1e-10 * (1.0 + prev.abs()) {
                monotone = false;
            }
            prev = o;
        }
        let improvement = best_single_coordinate_improvement(&b, &rep.z, 360);
        worst_stationarity = worst_stationarity.max(improvement / (rep.objective.abs() + 1.0));
        let (_, brute_obj) = oracle::brute_unit_modulus(&b, 360)?;
        if rep.objective <= brute_obj + 1e-3 {
            global_matches += 1;
        }
    }
    let passed = monotone && worst_stationarity <= tolerance && global_matches >= 1;
    Ok(CheckOutcome {
        name: "unit-modulus-qp",
        trials,
        worst: worst_stationarity,
        tolerance,
        passed,
        detail: format!(
            "max stationarity gap {worst_stationarity:.3e}, monotone {monotone}, global basin {global_matches}/{trials}"
        ),
    })
}

/// Runs the whole family. `fault` injects the delay sign flip into the
/// production side of the two scene checks.
pub fn run_all(trials: usize, seed: u64, fault: bool) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_operator_equivalence(trials, seed, fault)?,
        check_range_invariance(trials, seed, fault)?,
        check_ball_qp(trials, seed)?,
        check_unit_modulus(trials, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_without_fault() {
        for c in run_all(5, 11, false).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn fault_injection_trips_the_scene_checks() {
        let outcomes = run_all(5, 11, true).unwrap();
        assert!(!outcomes[0].passed, "operator equivalence must fail under the fault");
        assert!(!outcomes[1].passed, "range invariance must fail under the fault");
        assert!(outcomes[2].passed);
        assert!(outcomes[3].passed);
    }

    #[test]
    fn zero_trials_is_a_vacuous_pass() {
        for c in run_all(0, 1, false).unwrap() {
            assert!(c.passed);
            assert_eq!(c.trials, 0);
        }
    }
}
