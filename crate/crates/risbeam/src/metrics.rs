//! Evaluation quantities: beampattern grids, the normalized power
//! beampattern (NPB) and the relative square error (RSE).

use crate::error::{Error, Result};
use crate::operators::Operators;
use crate::pattern::DesiredPattern;
use crate::solver::{PhaseVector, SignalBlock};

/// Amplitude beampattern sampled on the full grid, `values[k·L + l]`.
#[derive(Debug, Clone)]
pub struct BeampatternGrid {
    pub values: Vec<f64>,
    pub freq_count: usize,
    pub theta_count: usize,
    pub phi_count: usize,
    /// Hash of the scene and grid that produced this evaluation.
    pub scene_fingerprint: u64,
}

impl BeampatternGrid {
    pub fn angle_count(&self) -> usize {
        self.theta_count * self.phi_count
    }

    pub fn point_count(&self) -> usize {
        self.freq_count * self.angle_count()
    }

    #[inline]
    pub fn value(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.angle_count() + l]
    }
}

/// Evaluates the amplitude beampattern at every grid point.
pub fn evaluate_grid(ops: &Operators, x: &PhaseVector, s: &SignalBlock) -> Result<BeampatternGrid> {
    let responses = ops.response_grid(x, s)?;
    Ok(BeampatternGrid {
        values: responses.iter().map(|r| r.norm()).collect(),
        freq_count: ops.grid().freq_count(),
        theta_count: ops.grid().thetas.len(),
        phi_count: ops.grid().phis.len(),
        scene_fingerprint: ops.fingerprint(),
    })
}

/// Power beampattern normalized by its global maximum; values in [0, 1]
/// with the maximum exactly 1.
#[derive(Debug, Clone)]
pub struct NpbGrid {
    pub values: Vec<f64>,
    pub freq_count: usize,
    pub theta_count: usize,
    pub phi_count: usize,
    /// Flattened index of the grid maximum.
    pub argmax: usize,
}

/// Plot floor applied by [`NpbGrid::to_db`].
pub const DB_FLOOR: f64 = -60.0;

impl NpbGrid {
    pub fn angle_count(&self) -> usize {
        self.theta_count * self.phi_count
    }

    #[inline]
    pub fn value(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.angle_count() + l]
    }

    /// `10·log₁₀(NPB)` clamped at the -60 dB plot floor.
    pub fn to_db(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| if v <= 0.0 { DB_FLOOR } else { (10.0 * v.log10()).max(DB_FLOOR) })
            .collect()
    }
}

/// Normalizes the squared beampattern by its global maximum.
pub fn npb(grid: &BeampatternGrid) -> Result<NpbGrid> {
    let mut max = 0.0f64;
    let mut argmax = 0usize;
    for (i, &v) in grid.values.iter().enumerate() {
        if v > max {
            max = v;
            argmax = i;
        }
    }
    if max <= 0.0 {
        return Err(Error::ZeroGrid);
    }
    let max_sq = max * max;
    Ok(NpbGrid {
        values: grid.values.iter().map(|&v| (v * v) / max_sq).collect(),
        freq_count: grid.freq_count,
        theta_count: grid.theta_count,
        phi_count: grid.phi_count,
        argmax,
    })
}

/// Relative square error `Σ w (d - B)² / Σ w d²`.
pub fn rse(grid: &BeampatternGrid, d: &DesiredPattern, weights: &[f64]) -> Result<f64> {
    if grid.values.len() != d.values().len() || grid.values.len() != weights.len() {
        return Err(Error::Dimension {
            what: "metric grids",
            expected: grid.values.len(),
            got: d.values().len().min(weights.len()),
        });
    }
    let denom = d.weighted_energy(weights);
    if !(denom > 0.0) {
        return Err(Error::ZeroPatternEnergy);
    }
    let num: f64 = grid
        .values
        .iter()
        .zip(d.values())
        .zip(weights)
        .map(|((&b, &dv), &w)| w * (dv - b) * (dv - b))
        .sum();
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorOptions;
    use crate::pattern::{build_desired, PatternBox};
    use crate::scene::{build_sampling_grid, FeederLayout, Geometry, SceneConfig};
    use nalgebra::Vector3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn small_ops() -> (SceneConfig, Geometry, Operators) {
        let cfg = SceneConfig {
            ris_rows: 2,
            ris_cols: 2,
            element_spacing_m: 0.05,
            carrier_hz: 3.0e9,
            bandwidth_hz: 100.0e6,
            duration_s: 3.0e-8,
            power_w: 2.0,
            feeder_layout: FeederLayout::Explicit(vec![Vector3::new(-0.4, 0.02, -0.03)]),
            feeder_standoff_m: 0.4,
            freq_points: 3,
            theta_points: 2,
            phi_points: 2,
        };
        let geom = Geometry::build(&cfg).unwrap();
        let grid = build_sampling_grid(&cfg);
        let ops = Operators::new_ris(&cfg, &geom, grid, &OperatorOptions::default()).unwrap();
        (cfg, geom, ops)
    }

    fn random_state(ops: &Operators, seed: u64) -> (PhaseVector, SignalBlock) {
        let mut rng = StdRng::seed_from_u64(seed);
        let x = PhaseVector::from_phases(
            &(0..ops.element_count())
                .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
                .collect::<Vec<_>>(),
        );
        let s = SignalBlock::new(
            (0..ops.source_count() * ops.sample_count())
                .map(|_| num_complex::Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect(),
            ops.source_count(),
            ops.sample_count(),
        )
        .unwrap();
        (x, s)
    }

    #[test]
    fn grid_matches_pointwise_oracle() {
        let (cfg, geom, ops) = small_ops();
        let (x, s) = random_state(&ops, 3);
        let grid = evaluate_grid(&ops, &x, &s).unwrap();
        for k in 0..ops.grid().freq_count() {
            for l in 0..ops.grid().angle_count() {
                let (theta, phi) = ops.grid().angles(l);
                let slow = crate::oracle::direct_beampattern(
                    &s, &x, &cfg, &geom, ops.grid().freqs[k], theta, phi,
                );
                assert!((grid.value(k, l) - slow).abs() <= 1e-10 * slow.max(1e-300));
            }
        }
    }

    #[test]
    fn zero_signal_grid_is_zero_and_npb_rejects_it() {
        let (_, _, ops) = small_ops();
        let x = PhaseVector::all_ones(ops.element_count());
        let s = SignalBlock::zeros(ops.source_count(), ops.sample_count());
        let grid = evaluate_grid(&ops, &x, &s).unwrap();
        assert!(grid.values.iter().all(|&v| v == 0.0));
        assert!(matches!(npb(&grid), Err(Error::ZeroGrid)));
    }

    #[test]
    fn grid_homogeneity_in_signal_scale() {
        let (_, _, ops) = small_ops();
        let (x, s) = random_state(&ops, 7);
        let alpha = 3.5;
        let scaled = SignalBlock::new(
            s.as_slice().iter().map(|&v| v * alpha).collect(),
            s.source_count(),
            s.samples_per_source(),
        )
        .unwrap();
        let g1 = evaluate_grid(&ops, &x, &s).unwrap();
        let g2 = evaluate_grid(&ops, &x, &scaled).unwrap();
        for (a, b) in g1.values.iter().zip(g2.values.iter()) {
            assert!((b - alpha * a).abs() <= 1e-12 * b.max(1.0));
        }
        // NPB is invariant to the same rescaling
        let n1 = npb(&g1).unwrap();
        let n2 = npb(&g2).unwrap();
        for (a, b) in n1.values.iter().zip(n2.values.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn npb_of_constant_grid_is_all_ones() {
        let grid = BeampatternGrid {
            values: vec![0.7; 12],
            freq_count: 3,
            theta_count: 2,
            phi_count: 2,
            scene_fingerprint: 0,
        };
        let n = npb(&grid).unwrap();
        assert!(n.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn npb_argmax_matches_brute_scan_and_peak_is_one() {
        let (_, _, ops) = small_ops();
        let (x, s) = random_state(&ops, 11);
        let grid = evaluate_grid(&ops, &x, &s).unwrap();
        let n = npb(&grid).unwrap();
        let mut best = 0usize;
        for i in 0..grid.values.len() {
            if grid.values[i] > grid.values[best] {
                best = i;
            }
        }
        assert_eq!(n.argmax, best);
        assert_eq!(n.values[best], 1.0);
        assert!(n.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn db_export_applies_floor() {
        let grid = BeampatternGrid {
            values: vec![1.0, 1e-6, 0.0],
            freq_count: 3,
            theta_count: 1,
            phi_count: 1,
            scene_fingerprint: 0,
        };
        let n = npb(&grid).unwrap();
        let db = n.to_db();
        assert_eq!(db[0], 0.0);
        assert_eq!(db[1], DB_FLOOR); // 1e-12 in power, below the floor
        assert_eq!(db[2], DB_FLOOR);
    }

    #[test]
    fn rse_trivial_values() {
        let (_, _, ops) = small_ops();
        let boxes = [PatternBox { theta: [-1.0, 1.0], phi: [-1.0, 1.0], freq: [-5e7, 5e7], level: 1.0 }];
        let d = build_desired(&boxes, 0.4, ops.grid()).unwrap();
        let weights = ops.grid().weights.clone();
        // B = d gives zero error
        let grid = BeampatternGrid {
            values: d.values().to_vec(),
            freq_count: ops.grid().freq_count(),
            theta_count: ops.grid().thetas.len(),
            phi_count: ops.grid().phis.len(),
            scene_fingerprint: 0,
        };
        assert!(rse(&grid, &d, &weights).unwrap() < 1e-15);
        // B = 0 gives exactly one
        let zero = BeampatternGrid { values: vec![0.0; d.values().len()], ..grid.clone() };
        assert!((rse(&zero, &d, &weights).unwrap() - 1.0).abs() < 1e-15);
        // zero desired energy rejected
        let d0 = build_desired(&[], 1.0, ops.grid()).unwrap();
        assert!(matches!(rse(&zero, &d0, &weights), Err(Error::ZeroPatternEnergy)));
    }

    #[test]
    fn rse_invariant_to_weight_rescaling() {
        let (_, _, ops) = small_ops();
        let (x, s) = random_state(&ops, 13);
        let boxes = [PatternBox { theta: [-0.8, 0.8], phi: [-0.8, 0.8], freq: [-4e7, 4e7], level: 1.0 }];
        let d = build_desired(&boxes, 0.2, ops.grid()).unwrap();
        let grid = evaluate_grid(&ops, &x, &s).unwrap();
        let w1 = ops.grid().weights.clone();
        let w2: Vec<f64> = w1.iter().map(|w| w * 7.25).collect();
        let r1 = rse(&grid, &d, &w1).unwrap();
        let r2 = rse(&grid, &d, &w2).unwrap();
        assert!((r1 - r2).abs() <= 1e-14 * r1.max(1.0));
    }
}
