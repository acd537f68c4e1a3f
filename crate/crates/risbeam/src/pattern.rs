//! Desired beampattern specification over the sampling grid.
//!
//! A pattern is a union of axis-aligned boxes in (elevation, azimuth,
//! frequency); each box carries a relative level and the whole pattern is
//! scaled by a single height. Overlapping boxes take the maximum level;
//! membership uses closed intervals, so grid points on a box edge count
//! as inside.

use crate::error::{Error, Result};
use crate::scene::SamplingGrid;

/// One rectangular target region. Angles in radians, frequencies in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternBox {
    pub theta: [f64; 2],
    pub phi: [f64; 2],
    pub freq: [f64; 2],
    /// Relative amplitude of this box; the pattern height multiplies it.
    pub level: f64,
}

impl PatternBox {
    pub fn validate(&self) -> Result<()> {
        for (name, range) in [("theta", &self.theta), ("phi", &self.phi), ("freq", &self.freq)] {
            if !(range[0] <= range[1]) {
                return Err(Error::InvalidPattern(format!(
                    "{name} bounds out of order: [{}, {}]",
                    range[0], range[1]
                )));
            }
        }
        if !(self.level >= 0.0) {
            return Err(Error::InvalidPattern(format!("negative level {}", self.level)));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, f: f64, theta: f64, phi: f64) -> bool {
        f >= self.freq[0]
            && f <= self.freq[1]
            && theta >= self.theta[0]
            && theta <= self.theta[1]
            && phi >= self.phi[0]
            && phi <= self.phi[1]
    }
}

/// Desired amplitude at an arbitrary point: `height` times the maximum
/// level over the boxes containing it, zero outside all boxes.
pub fn desired_value_at(boxes: &[PatternBox], height: f64, f: f64, theta: f64, phi: f64) -> f64 {
    let mut level: f64 = 0.0;
    for b in boxes {
        if b.contains(f, theta, phi) {
            level = level.max(b.level);
        }
    }
    height * level
}

/// Desired amplitudes sampled on a grid, stored as `values[k·L + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredPattern {
    values: Vec<f64>,
    freq_count: usize,
    theta_count: usize,
    phi_count: usize,
}

impl DesiredPattern {
    pub fn from_values(
        values: Vec<f64>,
        freq_count: usize,
        theta_count: usize,
        phi_count: usize,
    ) -> Result<Self> {
        if values.len() != freq_count * theta_count * phi_count {
            return Err(Error::Dimension {
                what: "desired pattern values",
                expected: freq_count * theta_count * phi_count,
                got: values.len(),
            });
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidPattern("negative or NaN amplitude".into()));
        }
        Ok(Self { values, freq_count, theta_count, phi_count })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.theta_count * self.phi_count + l]
    }

    pub fn freq_count(&self) -> usize {
        self.freq_count
    }

    pub fn angle_count(&self) -> usize {
        self.theta_count * self.phi_count
    }

    /// Count of strictly positive grid amplitudes.
    pub fn support_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Weighted pattern energy `Σ w d²`.
    pub fn weighted_energy(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights.iter()).map(|(&d, &w)| w * d * d).sum()
    }
}

/// Samples the box pattern on a grid.
pub fn build_desired(
    boxes: &[PatternBox],
    height: f64,
    grid: &SamplingGrid,
) -> Result<DesiredPattern> {
    if !(height >= 0.0) {
        return Err(Error::InvalidPattern(format!("negative height {height}")));
    }
    for b in boxes {
        b.validate()?;
    }
    let l_count = grid.angle_count();
    let mut values = Vec::with_capacity(grid.point_count());
    for &f in &grid.freqs {
        for l in 0..l_count {
            let (theta, phi) = grid.angles(l);
            values.push(desired_value_at(boxes, height, f, theta, phi));
        }
    }
    DesiredPattern::from_values(values, grid.freq_count(), grid.thetas.len(), grid.phis.len())
}

/// Golden-section search for the pattern height with the smallest score,
/// using at most `max_evals` calls of `score_at` (12 matches a coarse
/// calibration run). Returns the best evaluated height.
///
/// A collapsed range returns its single point without any evaluation.
pub fn calibrate_height(
    range: (f64, f64),
    max_evals: usize,
    mut score_at: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let (lo, hi) = range;
    if !(lo > 0.0) || !hi.is_finite() || hi < lo {
        return Err(Error::InvalidPattern(format!(
            "calibration range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok(lo);
    }
    if max_evals < 2 {
        return Err(Error::InvalidOptions("calibration needs at least 2 evaluations".into()));
    }
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = score_at(c)?;
    let mut fd = score_at(d)?;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 2..max_evals {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = score_at(c)?;
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = score_at(d)?;
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_sampling_grid, FeederLayout, SceneConfig};
    use proptest::prelude::*;

    fn paper_boxes() -> Vec<PatternBox> {
        let d = |v: f64| v.to_radians();
        vec![
            PatternBox {
                theta: [d(-45.0), d(0.0)],
                phi: [d(-45.0), d(0.0)],
                freq: [-50.0e6, 0.0],
                level: 1.0,
            },
            PatternBox {
                theta: [d(22.5), d(45.0)],
                phi: [d(22.5), d(45.0)],
                freq: [-50.0e6, 50.0e6],
                level: 1.0,
            },
        ]
    }

    fn paper_grid() -> SamplingGrid {
        let cfg = SceneConfig {
            ris_rows: 10,
            ris_cols: 10,
            element_spacing_m: 0.05,
            carrier_hz: 3.0e9,
            bandwidth_hz: 100.0e6,
            duration_s: 0.64e-6,
            power_w: 10.0,
            feeder_layout: FeederLayout::Quadrants,
            feeder_standoff_m: 0.6,
            freq_points: 64,
            theta_points: 36,
            phi_points: 36,
        };
        build_sampling_grid(&cfg)
    }

    #[test]
    fn no_boxes_means_zero_everywhere() {
        let grid = paper_grid();
        let d = build_desired(&[], 1.0, &grid).unwrap();
        assert_eq!(d.support_count(), 0);
    }

    #[test]
    fn two_beam_membership_points() {
        let boxes = paper_boxes();
        let h = 0.37;
        let deg = |v: f64| v.to_radians();
        // broad beam only lives at negative frequencies
        assert_eq!(desired_value_at(&boxes, h, -25.0e6, deg(-22.5), deg(-22.5)), h);
        assert_eq!(desired_value_at(&boxes, h, 25.0e6, deg(-22.5), deg(-22.5)), 0.0);
        // narrow beam covers all frequencies
        assert_eq!(desired_value_at(&boxes, h, -25.0e6, deg(33.75), deg(33.75)), h);
        assert_eq!(desired_value_at(&boxes, h, 25.0e6, deg(33.75), deg(33.75)), h);
    }

    #[test]
    fn support_count_matches_brute_force_membership() {
        let boxes = paper_boxes();
        let grid = paper_grid();
        let d = build_desired(&boxes, 1.0, &grid).unwrap();
        // independent membership count written directly against the grid
        let mut brute = 0usize;
        for &f in &grid.freqs {
            for &theta in &grid.thetas {
                for &phi in &grid.phis {
                    let t = theta.to_degrees();
                    let p = phi.to_degrees();
                    let in_broad = f <= 0.0
                        && (-45.0..=0.0).contains(&t)
                        && (-45.0..=0.0).contains(&p)
                        && f >= -50.0e6;
                    let in_narrow = (22.5..=45.0).contains(&t) && (22.5..=45.0).contains(&p);
                    if in_broad || in_narrow {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(d.support_count(), brute);
        // frozen from the counting oracle: 81 cells × 32 negative
        // frequencies + 25 cells × 64 frequencies
        assert_eq!(brute, 81 * 32 + 25 * 64);
    }

    #[test]
    fn connected_angular_regions_per_frequency_sign() {
        let boxes = paper_boxes();
        let grid = paper_grid();
        let d = build_desired(&boxes, 1.0, &grid).unwrap();
        let nt = grid.thetas.len();
        let np = grid.phis.len();
        let components = |k: usize| -> usize {
            let mut seen = vec![false; nt * np];
            let mut count = 0;
            for start in 0..nt * np {
                if seen[start] || d.value(k, start) == 0.0 {
                    continue;
                }
                count += 1;
                let mut stack = vec![start];
                seen[start] = true;
                while let Some(l) = stack.pop() {
                    let (t, p) = (l / np, l % np);
                    let mut push = |tt: isize, pp: isize| {
                        if tt >= 0 && tt < nt as isize && pp >= 0 && pp < np as isize {
                            let idx = tt as usize * np + pp as usize;
                            if !seen[idx] && d.value(k, idx) > 0.0 {
                                seen[idx] = true;
                                stack.push(idx);
                            }
                        }
                    };
                    push(t as isize - 1, p as isize);
                    push(t as isize + 1, p as isize);
                    push(t as isize, p as isize - 1);
                    push(t as isize, p as isize + 1);
                }
            }
            count
        };
        assert_eq!(components(0), 2, "negative frequencies carry both beams");
        assert_eq!(components(grid.freq_count() - 1), 1, "positive frequencies carry one");
    }

    #[test]
    fn overlapping_boxes_take_max_level() {
        let boxes = vec![
            PatternBox { theta: [-0.5, 0.5], phi: [-0.5, 0.5], freq: [-1e6, 1e6], level: 0.4 },
            PatternBox { theta: [-0.2, 0.2], phi: [-0.2, 0.2], freq: [-1e6, 1e6], level: 0.9 },
        ];
        assert_eq!(desired_value_at(&boxes, 2.0, 0.0, 0.0, 0.0), 1.8);
        assert_eq!(desired_value_at(&boxes, 2.0, 0.0, 0.4, 0.4), 0.8);
    }

    #[test]
    fn malformed_boxes_rejected() {
        let grid = paper_grid();
        let bad = PatternBox { theta: [0.5, -0.5], phi: [0.0, 0.1], freq: [0.0, 1.0], level: 1.0 };
        assert!(build_desired(&[bad], 1.0, &grid).is_err());
        let bad = PatternBox { theta: [0.0, 0.1], phi: [0.0, 0.1], freq: [0.0, 1.0], level: -1.0 };
        assert!(build_desired(&[bad], 1.0, &grid).is_err());
        assert!(build_desired(&[], -1.0, &grid).is_err());
    }

    #[test]
    fn calibration_returns_collapsed_range_point() {
        let h = calibrate_height((0.7, 0.7), 12, |_| panic!("no evaluation expected")).unwrap();
        assert_eq!(h, 0.7);
    }

    #[test]
    fn calibration_rejects_degenerate_ranges() {
        assert!(calibrate_height((0.0, 1.0), 12, |_| Ok(0.0)).is_err());
        assert!(calibrate_height((2.0, 1.0), 12, |_| Ok(0.0)).is_err());
        assert!(calibrate_height((-1.0, 1.0), 12, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn calibration_stays_in_range_and_finds_minimum() {
        let mut evals = 0;
        let h = calibrate_height((0.1, 10.0), 12, |h| {
            evals += 1;
            Ok((h - 3.0).powi(2))
        })
        .unwrap();
        assert!(evals <= 12);
        assert!((0.1..=10.0).contains(&h));
        assert!((h - 3.0).abs() < 0.5, "found {h}");
    }

    proptest! {
        #[test]
        fn adding_a_box_never_decreases_any_value(
            t0 in -1.5f64..1.5, dt in 0.0f64..0.8,
            p0 in -1.5f64..1.5, dp in 0.0f64..0.8,
            f0 in -5.0e7f64..5.0e7, df in 0.0f64..3.0e7,
            level in 0.0f64..2.0,
        ) {
            let mut cfg_boxes = vec![PatternBox {
                theta: [-0.6, 0.2], phi: [-0.3, 0.3], freq: [-2.0e7, 2.0e7], level: 1.0,
            }];
            let grid = SamplingGrid {
                freqs: vec![-3.0e7, -1.0e7, 2.5e7],
                thetas: vec![-0.5, 0.0, 0.5],
                phis: vec![-0.25, 0.25],
                weights: vec![1.0; 18],
            };
            let before = build_desired(&cfg_boxes, 1.3, &grid).unwrap();
            cfg_boxes.push(PatternBox {
                theta: [t0, t0 + dt], phi: [p0, p0 + dp], freq: [f0, f0 + df], level,
            });
            let after = build_desired(&cfg_boxes, 1.3, &grid).unwrap();
            for (b, a) in before.values().iter().zip(after.values().iter()) {
                prop_assert!(a >= b);
            }
        }
    }
}
