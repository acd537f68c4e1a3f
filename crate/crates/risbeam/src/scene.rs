//! Physical scene description: RIS element layout, feeder placement,
//! propagation delays and the space-frequency sampling grid.
//!
//! Conventions: the RIS lies in the `x = 0` plane and radiates into the
//! half-space `x > 0`; feeders sit behind the surface (`x < 0`). The
//! direction unit vector for elevation `θ` and azimuth `φ` is
//! `u(θ, φ) = (cosθ cosφ, cosθ sinφ, sinθ)`, so the angular region
//! `[-π/2, π/2]²` covers the forward half-space. All quantities are SI.

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Where the feeders sit relative to the surface.
#[derive(Debug, Clone, PartialEq)]
pub enum FeederLayout {
    /// One feeder on the surface normal through the array center.
    OnAxis,
    /// Four feeders, one behind the element centroid of each quadrant.
    Quadrants,
    /// Arbitrary positions; every `x` coordinate must be negative.
    Explicit(Vec<Vector3<f64>>),
}

impl FeederLayout {
    pub fn feeder_count(&self) -> usize {
        match self {
            FeederLayout::OnAxis => 1,
            FeederLayout::Quadrants => 4,
            FeederLayout::Explicit(p) => p.len(),
        }
    }
}

/// Scalar parameters of a synthesis scene.
///
/// The sample count is derived, not stored: `N = ⌊W·T⌋`.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub ris_rows: usize,
    pub ris_cols: usize,
    /// Inter-element spacing in meters.
    pub element_spacing_m: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub duration_s: f64,
    /// Available power `P` in watts; the signal budget is `‖s‖² ≤ N·P`.
    pub power_w: f64,
    pub feeder_layout: FeederLayout,
    /// Distance from the surface plane to the feeders, meters.
    pub feeder_standoff_m: f64,
    /// Number of frequency sampling points `K`.
    pub freq_points: usize,
    /// Number of elevation sampling points.
    pub theta_points: usize,
    /// Number of azimuth sampling points.
    pub phi_points: usize,
}

impl SceneConfig {
    pub fn element_count(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    pub fn feeder_count(&self) -> usize {
        self.feeder_layout.feeder_count()
    }

    /// `N = ⌊W·T⌋`. The product carries a one-part-in-10¹² allowance so
    /// that an integer time-bandwidth product is not floored away by
    /// floating-point rounding.
    pub fn sample_count(&self) -> usize {
        let wt = self.bandwidth_hz * self.duration_s;
        (wt * (1.0 + 1e-12)).floor() as usize
    }

    /// Total signal energy budget `N·P`.
    pub fn power_budget(&self) -> f64 {
        self.sample_count() as f64 * self.power_w
    }

    /// Half-wavelength at the carrier, the usual element spacing.
    pub fn half_wavelength(&self) -> f64 {
        0.5 * SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.ris_rows < 1 || self.ris_cols < 1 {
            return Err(Error::InvalidScene("RIS must have at least one element".into()));
        }
        if self.element_spacing_m <= 0.0 {
            return Err(Error::InvalidScene("element spacing must be positive".into()));
        }
        if self.bandwidth_hz <= 0.0 || self.duration_s <= 0.0 {
            return Err(Error::InvalidScene("bandwidth and duration must be positive".into()));
        }
        if self.sample_count() < 1 {
            return Err(Error::InvalidScene(
                "W·T must be at least 1 so that one sample exists".into(),
            ));
        }
        if self.power_w <= 0.0 {
            return Err(Error::InvalidScene("power must be positive".into()));
        }
        if self.feeder_count() < 1 {
            return Err(Error::InvalidScene("at least one feeder is required".into()));
        }
        match &self.feeder_layout {
            FeederLayout::Explicit(_) => {}
            _ if self.feeder_standoff_m <= 0.0 => {
                return Err(Error::InvalidScene("feeder standoff must be positive".into()));
            }
            _ => {}
        }
        if self.freq_points < 1 || self.theta_points < 1 || self.phi_points < 1 {
            return Err(Error::InvalidGrid("grid needs at least one point per axis".into()));
        }
        Ok(())
    }
}

/// Element and feeder positions with the pairwise distance table.
#[derive(Debug, Clone)]
pub struct Geometry {
    elements: Vec<Vector3<f64>>,
    feeders: Vec<Vector3<f64>>,
    /// `distances[(i, j)]` is the element-`i` to feeder-`j` range, M×J.
    distances: DMatrix<f64>,
}

impl Geometry {
    /// Validates the layout invariants: elements in the `x = 0` plane,
    /// feeders strictly behind it, all ranges positive.
    pub fn new(elements: Vec<Vector3<f64>>, feeders: Vec<Vector3<f64>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidScene("no RIS elements".into()));
        }
        if feeders.is_empty() {
            return Err(Error::InvalidScene("no feeders".into()));
        }
        for (i, p) in elements.iter().enumerate() {
            if p.x != 0.0 {
                return Err(Error::InvalidScene(format!(
                    "element {i} is off the surface plane (x = {})",
                    p.x
                )));
            }
        }
        for (j, q) in feeders.iter().enumerate() {
            if !(q.x < 0.0) {
                return Err(Error::InvalidScene(format!(
                    "feeder {j} must be behind the surface (x < 0), got x = {}",
                    q.x
                )));
            }
        }
        let m = elements.len();
        let j = feeders.len();
        let distances = DMatrix::from_fn(m, j, |i, jj| (elements[i] - feeders[jj]).norm());
        if distances.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidScene("a feeder coincides with an element".into()));
        }
        Ok(Self { elements, feeders, distances })
    }

    /// Builds the geometry described by a [`SceneConfig`].
    pub fn build(cfg: &SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let elements = planar_element_grid(cfg.ris_rows, cfg.ris_cols, cfg.element_spacing_m)?;
        let feeders = place_feeders(&elements, &cfg.feeder_layout, cfg.feeder_standoff_m)?;
        Self::new(elements, feeders)
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn feeder_count(&self) -> usize {
        self.feeders.len()
    }

    pub fn elements(&self) -> &[Vector3<f64>] {
        &self.elements
    }

    pub fn feeders(&self) -> &[Vector3<f64>] {
        &self.feeders
    }

    pub fn distance(&self, element: usize, feeder: usize) -> f64 {
        self.distances[(element, feeder)]
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }
}

/// Centered rows×cols element grid in the `x = 0` plane, row-major.
///
/// Element `(row b, col a)` sits at
/// `(0, (a - (cols-1)/2)·spacing, (b - (rows-1)/2)·spacing)`.
pub fn planar_element_grid(rows: usize, cols: usize, spacing: f64) -> Result<Vec<Vector3<f64>>> {
    if rows < 1 || cols < 1 {
        return Err(Error::InvalidScene("grid dimensions must be at least 1".into()));
    }
    if spacing <= 0.0 {
        return Err(Error::InvalidScene(format!("spacing must be positive, got {spacing}")));
    }
    let y0 = (cols as f64 - 1.0) / 2.0;
    let z0 = (rows as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(rows * cols);
    for b in 0..rows {
        for a in 0..cols {
            out.push(Vector3::new(
                0.0,
                (a as f64 - y0) * spacing,
                (b as f64 - z0) * spacing,
            ));
        }
    }
    Ok(out)
}

/// Feeder positions for the given layout, `standoff` meters behind the plane.
///
/// `Quadrants` puts each feeder behind the centroid of the elements in one
/// (strict) quadrant of the surface; fails if a quadrant holds no element.
/// `Explicit` positions pass through after validation.
pub fn place_feeders(
    elements: &[Vector3<f64>],
    layout: &FeederLayout,
    standoff: f64,
) -> Result<Vec<Vector3<f64>>> {
    match layout {
        FeederLayout::Explicit(positions) => {
            for (j, q) in positions.iter().enumerate() {
                if !(q.x < 0.0) {
                    return Err(Error::InvalidScene(format!(
                        "explicit feeder {j} must have x < 0, got {}",
                        q.x
                    )));
                }
            }
            Ok(positions.clone())
        }
        FeederLayout::OnAxis => {
            if standoff <= 0.0 {
                return Err(Error::InvalidScene("standoff must be positive".into()));
            }
            Ok(vec![Vector3::new(-standoff, 0.0, 0.0)])
        }
        FeederLayout::Quadrants => {
            if standoff <= 0.0 {
                return Err(Error::InvalidScene("standoff must be positive".into()));
            }
            let mut out = Vec::with_capacity(4);
            for (sy, sz) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                let quad: Vec<&Vector3<f64>> = elements
                    .iter()
                    .filter(|p| p.y * sy > 0.0 && p.z * sz > 0.0)
                    .collect();
                if quad.is_empty() {
                    return Err(Error::InvalidScene(
                        "quadrant feeder layout needs elements in every quadrant".into(),
                    ));
                }
                let n = quad.len() as f64;
                let yc = quad.iter().map(|p| p.y).sum::<f64>() / n;
                let zc = quad.iter().map(|p| p.z).sum::<f64>() / n;
                out.push(Vector3::new(-standoff, yc, zc));
            }
            Ok(out)
        }
    }
}

/// Plane-wave propagation delay of an element at `p` toward `(θ, φ)`:
/// `τ = -(p·u(θ, φ))/c` with `u = (cosθ cosφ, cosθ sinφ, sinθ)`.
#[inline]
pub fn propagation_delay(p: &Vector3<f64>, theta: f64, phi: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    -(p.x * ct * cp + p.y * ct * sp + p.z * st) / SPEED_OF_LIGHT
}

/// Space-frequency sampling grid with per-point weights.
///
/// The flattened angle index is `l = t·phi_count + p`; weights are stored
/// as `weights[k·L + l]`.
#[derive(Debug, Clone)]
pub struct SamplingGrid {
    pub freqs: Vec<f64>,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SamplingGrid {
    pub fn freq_count(&self) -> usize {
        self.freqs.len()
    }

    pub fn angle_count(&self) -> usize {
        self.thetas.len() * self.phis.len()
    }

    pub fn point_count(&self) -> usize {
        self.freq_count() * self.angle_count()
    }

    /// `(θ, φ)` for the flattened angle index.
    #[inline]
    pub fn angles(&self, l: usize) -> (f64, f64) {
        let np = self.phis.len();
        (self.thetas[l / np], self.phis[l % np])
    }

    #[inline]
    pub fn weight(&self, k: usize, l: usize) -> f64 {
        self.weights[k * self.angle_count() + l]
    }

    /// Shape and range checks only; weight positivity is left to
    /// [`SamplingGrid::validate`] so pure operator evaluations can run
    /// on all-zero weights.
    pub fn validate_shape(&self, bandwidth_hz: f64) -> Result<()> {
        if self.freqs.is_empty() || self.thetas.is_empty() || self.phis.is_empty() {
            return Err(Error::InvalidGrid("empty grid axis".into()));
        }
        let half = bandwidth_hz / 2.0;
        if self.freqs.iter().any(|f| f.abs() > half * (1.0 + 1e-12)) {
            return Err(Error::InvalidGrid("frequency outside [-W/2, W/2]".into()));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        if self
            .thetas
            .iter()
            .chain(self.phis.iter())
            .any(|a| a.abs() > half_pi * (1.0 + 1e-12))
        {
            return Err(Error::InvalidGrid("angle outside [-π/2, π/2]".into()));
        }
        if self.weights.len() != self.point_count() {
            return Err(Error::Dimension {
                what: "grid weights",
                expected: self.point_count(),
                got: self.weights.len(),
            });
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidGrid("negative weight".into()));
        }
        Ok(())
    }

    /// Full matching-problem invariant: shape checks plus at least one
    /// strictly positive weight.
    pub fn validate(&self, bandwidth_hz: f64) -> Result<()> {
        self.validate_shape(bandwidth_hz)?;
        if !self.weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidGrid("all weights are zero".into()));
        }
        Ok(())
    }
}

/// Cell-centered uniform grids over `[-W/2, W/2]` and `[-π/2, π/2]²`,
/// all weights one.
pub fn build_sampling_grid(cfg: &SceneConfig) -> SamplingGrid {
    let w = cfg.bandwidth_hz;
    let k = cfg.freq_points;
    let freqs: Vec<f64> = (1..=k)
        .map(|i| -w / 2.0 + (i as f64 - 0.5) * w / k as f64)
        .collect();
    let thetas = centered_angle_axis(cfg.theta_points);
    let phis = centered_angle_axis(cfg.phi_points);
    let weights = vec![1.0; k * thetas.len() * phis.len()];
    SamplingGrid { freqs, thetas, phis, weights }
}

fn centered_angle_axis(points: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (1..=points)
        .map(|i| -PI / 2.0 + (i as f64 - 0.5) * PI / points as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_scene() -> SceneConfig {
        SceneConfig {
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
        }
    }

    #[test]
    fn singleton_grid_is_at_origin() {
        let g = planar_element_grid(1, 1, 0.05).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0], Vector3::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn two_by_two_grid_is_symmetric() {
        let g = planar_element_grid(2, 2, 0.05).unwrap();
        assert_eq!(g.len(), 4);
        for p in &g {
            assert_eq!(p.x, 0.0);
            assert!((p.y.abs() - 0.025).abs() < 1e-15);
            assert!((p.z.abs() - 0.025).abs() < 1e-15);
        }
        // all four sign combinations present
        let mut signs: Vec<(bool, bool)> = g.iter().map(|p| (p.y > 0.0, p.z > 0.0)).collect();
        signs.sort();
        signs.dedup();
        assert_eq!(signs.len(), 4);
    }

    #[test]
    fn ten_by_ten_grid_centroid_and_extent() {
        let g = planar_element_grid(10, 10, 0.05).unwrap();
        assert_eq!(g.len(), 100);
        let centroid = g.iter().fold(Vector3::zeros(), |acc, p| acc + p) / 100.0;
        assert!(centroid.norm() < 1e-15);
        // independent brute-force max over pairs
        let mut max_d = 0.0f64;
        for a in &g {
            for b in &g {
                max_d = max_d.max((a - b).norm());
            }
        }
        let expected = 0.45 * 2.0f64.sqrt();
        assert!((max_d - expected).abs() < 1e-12, "max pair distance {max_d}");
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(planar_element_grid(2, 2, 0.0).is_err());
        assert!(planar_element_grid(2, 2, -1.0).is_err());
    }

    #[test]
    fn quadrant_feeders_for_paper_scene() {
        let cfg = paper_scene();
        let elements = planar_element_grid(10, 10, cfg.element_spacing_m).unwrap();
        let feeders = place_feeders(&elements, &FeederLayout::Quadrants, 0.6).unwrap();
        assert_eq!(feeders.len(), 4);
        for q in &feeders {
            assert!((q.x + 0.6).abs() < 1e-15);
            assert!((q.y.abs() - 0.125).abs() < 1e-12);
            assert!((q.z.abs() - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn on_axis_feeder() {
        let elements = planar_element_grid(3, 3, 0.1).unwrap();
        let feeders = place_feeders(&elements, &FeederLayout::OnAxis, 0.6).unwrap();
        assert_eq!(feeders, vec![Vector3::new(-0.6, 0.0, 0.0)]);
    }

    #[test]
    fn explicit_feeders_pass_through() {
        let elements = planar_element_grid(2, 2, 0.1).unwrap();
        let given = vec![Vector3::new(-0.3, 0.1, -0.2), Vector3::new(-0.9, 0.0, 0.0)];
        let feeders =
            place_feeders(&elements, &FeederLayout::Explicit(given.clone()), 0.6).unwrap();
        assert_eq!(feeders, given);
        // x >= 0 rejected
        let bad = vec![Vector3::new(0.0, 0.0, 0.0)];
        assert!(place_feeders(&elements, &FeederLayout::Explicit(bad), 0.6).is_err());
    }

    #[test]
    fn standoff_must_be_positive() {
        let elements = planar_element_grid(2, 2, 0.1).unwrap();
        assert!(place_feeders(&elements, &FeederLayout::OnAxis, 0.0).is_err());
        assert!(place_feeders(&elements, &FeederLayout::Quadrants, -0.5).is_err());
    }

    #[test]
    fn delay_at_origin_is_zero() {
        let p = Vector3::zeros();
        assert_eq!(propagation_delay(&p, 0.3, -0.7), 0.0);
    }

    #[test]
    fn delay_picks_z_component_at_zenith() {
        let p = Vector3::new(0.0, 0.0, 1.0);
        let tau = propagation_delay(&p, std::f64::consts::FRAC_PI_2, 0.0);
        assert!((tau - (-1.0 / SPEED_OF_LIGHT)).abs() < 1e-24);
        assert!((tau + 3.3356409519815204e-9).abs() < 1e-18);
    }

    #[test]
    fn delay_matches_dot_product_oracle() {
        let p = Vector3::new(0.3, -0.2, 0.1);
        let theta = 30.0f64.to_radians();
        let phi = 45.0f64.to_radians();
        let u = [
            theta.cos() * phi.cos(),
            theta.cos() * phi.sin(),
            theta.sin(),
        ];
        let expected = -(u[0] * p.x + u[1] * p.y + u[2] * p.z) / SPEED_OF_LIGHT;
        assert!((propagation_delay(&p, theta, phi) - expected).abs() < 1e-24);
    }

    #[test]
    fn delay_is_linear_in_position() {
        let a = Vector3::new(0.1, -0.4, 0.2);
        let b = Vector3::new(-0.3, 0.5, 0.9);
        let theta = 0.4;
        let phi = -1.1;
        let combo: Vector3<f64> = 2.0 * a + 3.0 * b;
        let lhs = propagation_delay(&combo, theta, phi);
        let rhs = 2.0 * propagation_delay(&a, theta, phi) + 3.0 * propagation_delay(&b, theta, phi);
        assert!((lhs - rhs).abs() < 1e-22);
    }

    #[test]
    fn two_point_frequency_grid() {
        let mut cfg = paper_scene();
        cfg.freq_points = 2;
        let grid = build_sampling_grid(&cfg);
        assert_eq!(grid.freqs.len(), 2);
        assert!((grid.freqs[0] + 25.0e6).abs() < 1e-6);
        assert!((grid.freqs[1] - 25.0e6).abs() < 1e-6);
    }

    #[test]
    fn angle_axis_cell_centers() {
        let cfg = paper_scene();
        let grid = build_sampling_grid(&cfg);
        assert_eq!(grid.thetas.len(), 36);
        assert!((grid.thetas[0].to_degrees() + 87.5).abs() < 1e-12);
        let step = grid.thetas[1] - grid.thetas[0];
        assert!((step.to_degrees() - 5.0).abs() < 1e-12);
        grid.validate(cfg.bandwidth_hz).unwrap();
    }

    #[test]
    fn frequency_grid_is_symmetric() {
        let cfg = paper_scene();
        let grid = build_sampling_grid(&cfg);
        let k = grid.freqs.len();
        for i in 0..k {
            assert!((grid.freqs[i] + grid.freqs[k - 1 - i]).abs() < 1e-6);
        }
    }

    #[test]
    fn sample_count_is_floor_of_time_bandwidth() {
        let cfg = paper_scene();
        assert_eq!(cfg.sample_count(), 64);
        assert!((cfg.power_budget() - 640.0).abs() < 1e-12);
        let mut c2 = cfg.clone();
        c2.duration_s = 0.6399e-6;
        assert_eq!(c2.sample_count(), 63);
    }

    #[test]
    fn geometry_distances_and_standoff_floor() {
        let cfg = paper_scene();
        let geom = Geometry::build(&cfg).unwrap();
        assert_eq!(geom.element_count(), 100);
        assert_eq!(geom.feeder_count(), 4);
        let min_d = geom.distances().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_d >= cfg.feeder_standoff_m);
        // spot-check one entry against a hand computation
        let p = geom.elements()[0];
        let q = geom.feeders()[0];
        let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
        assert!((geom.distance(0, 0) - d).abs() < 1e-15);
    }

    #[test]
    fn reflection_leaves_distance_multiset_invariant() {
        let cfg = paper_scene();
        let geom = Geometry::build(&cfg).unwrap();
        let refl_elem: Vec<Vector3<f64>> =
            geom.elements().iter().map(|p| Vector3::new(p.x, -p.y, -p.z)).collect();
        let refl_feed: Vec<Vector3<f64>> =
            geom.feeders().iter().map(|q| Vector3::new(q.x, -q.y, -q.z)).collect();
        let refl = Geometry::new(refl_elem, refl_feed).unwrap();
        let mut a: Vec<f64> = geom.distances().iter().cloned().collect();
        let mut b: Vec<f64> = refl.distances().iter().cloned().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_rejects_degenerate_scenes() {
        let mut cfg = paper_scene();
        cfg.power_w = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = paper_scene();
        cfg.bandwidth_hz = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = paper_scene();
        cfg.duration_s = 1e-12; // W*T < 1
        assert!(cfg.validate().is_err());
    }
}
