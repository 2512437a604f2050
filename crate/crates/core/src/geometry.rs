//! Array geometry, cell layout and UE placement.
//!
//! The base station is a uniform rectangular array (URA) on the y-z plane
//! with `m_y * m_z` elements spaced `d_m` apart, split into `b` subarrays of
//! contiguous element columns along y. UEs live on the ground plane (z = 0)
//! inside a square cell in front of the array. Placement rejects positions
//! closer to any array element than the subarray Rayleigh distance, so the
//! per-subarray far-field assumption holds by construction; when that region
//! is empty inside the cell the placement falls back to unconstrained uniform
//! sampling and flags the scenario.

use rand::Rng;

use crate::error::CoreError;

/// Fraunhofer (Rayleigh) distance `2 D^2 / lambda` for an aperture `D`.
///
/// Positions farther than this from every element see the (sub)array in its
/// far field. Zero aperture yields zero distance; a degenerate but valid
/// point-source limit.
pub fn rayleigh_distance(aperture: f64, lambda: f64) -> Result<f64, CoreError> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(CoreError::config(format!(
            "carrier wavelength must be positive and finite, got {lambda}"
        )));
    }
    if aperture < 0.0 || !aperture.is_finite() {
        return Err(CoreError::domain(format!(
            "aperture must be non-negative and finite, got {aperture}"
        )));
    }
    Ok(2.0 * aperture * aperture / lambda)
}

/// Uniform rectangular array split into subarrays along the y axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    m_y: usize,
    m_z: usize,
    d_m: f64,
    b: usize,
    lambda_c: f64,
}

impl ArrayGeometry {
    /// Validates and builds an array geometry.
    ///
    /// Requirements: positive element counts, spacing and wavelength;
    /// `m_y` divisible by `b` (subarrays are contiguous column blocks);
    /// at least 50 antennas per subarray so subarray-level processing stays
    /// in the regime the channel model assumes.
    pub fn new(
        m_y: usize,
        m_z: usize,
        d_m: f64,
        b: usize,
        lambda_c: f64,
    ) -> Result<Self, CoreError> {
        if m_y == 0 || m_z == 0 {
            return Err(CoreError::config("element counts m_y and m_z must be >= 1"));
        }
        if d_m <= 0.0 || !d_m.is_finite() {
            return Err(CoreError::config(format!(
                "element spacing d_m must be positive and finite, got {d_m}"
            )));
        }
        if lambda_c <= 0.0 || !lambda_c.is_finite() {
            return Err(CoreError::config(format!(
                "carrier wavelength must be positive and finite, got {lambda_c}"
            )));
        }
        if b == 0 {
            return Err(CoreError::config("subarray count B must be >= 1"));
        }
        let m_total = m_y * m_z;
        if !m_total.is_multiple_of(b) {
            return Err(CoreError::config(format!(
                "M mod B != 0: M = {m_total} antennas cannot split into B = {b} subarrays"
            )));
        }
        if !m_y.is_multiple_of(b) {
            return Err(CoreError::config(format!(
                "m_y mod B != 0: subarrays are contiguous column blocks along y, \
                 so B = {b} must divide m_y = {m_y}"
            )));
        }
        let m_b = m_total / b;
        if m_b < 50 {
            return Err(CoreError::config(format!(
                "antennas per subarray M_b = {m_b} is below the minimum of 50"
            )));
        }
        Ok(ArrayGeometry {
            m_y,
            m_z,
            d_m,
            b,
            lambda_c,
        })
    }

    /// Element columns along y.
    pub fn m_y(&self) -> usize {
        self.m_y
    }

    /// Element rows along z.
    pub fn m_z(&self) -> usize {
        self.m_z
    }

    /// Element spacing in meters.
    pub fn d_m(&self) -> f64 {
        self.d_m
    }

    /// Number of subarrays.
    pub fn b(&self) -> usize {
        self.b
    }

    /// Carrier wavelength in meters.
    pub fn lambda_c(&self) -> f64 {
        self.lambda_c
    }

    /// Total antenna count `M = m_y * m_z`.
    pub fn m_total(&self) -> usize {
        self.m_y * self.m_z
    }

    /// Antennas per subarray `M_b = M / B`.
    pub fn m_b(&self) -> usize {
        self.m_total() / self.b
    }

    /// Full-array aperture `D = m_y * d_m` (the long, y-axis extent).
    pub fn aperture(&self) -> f64 {
        self.m_y as f64 * self.d_m
    }

    /// Per-subarray aperture `D / B`.
    pub fn sa_aperture(&self) -> f64 {
        self.aperture() / self.b as f64
    }

    /// Rayleigh distance of the full aperture.
    pub fn rayleigh_distance_full(&self) -> f64 {
        // Geometry was validated, so the wavelength is positive.
        rayleigh_distance(self.aperture(), self.lambda_c).expect("validated geometry")
    }

    /// Rayleigh distance of one subarray; the far-field threshold the
    /// placement enforces. Scales as the full-array value divided by B^2.
    pub fn rayleigh_distance_sa(&self) -> f64 {
        rayleigh_distance(self.sa_aperture(), self.lambda_c).expect("validated geometry")
    }

    /// Number of element columns owned by each subarray.
    pub fn cols_per_sa(&self) -> usize {
        self.m_y / self.b
    }

    /// Position of element `(iy, iz)`: the array sits on the y-z plane.
    pub fn element_position(&self, iy: usize, iz: usize) -> [f64; 3] {
        debug_assert!(iy < self.m_y && iz < self.m_z);
        [0.0, iy as f64 * self.d_m, iz as f64 * self.d_m]
    }

    /// y-coordinate of the array midpoint (center of the element span).
    pub fn y_center(&self) -> f64 {
        (self.m_y as f64 - 1.0) * self.d_m / 2.0
    }

    /// Iterator over `(iy, iz)` element indices of subarray `sa`.
    pub fn sa_element_indices(&self, sa: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        debug_assert!(sa < self.b);
        let cols = self.cols_per_sa();
        let first = sa * cols;
        (first..first + cols).flat_map(move |iy| (0..self.m_z).map(move |iz| (iy, iz)))
    }

    /// Squared distance from `pos` to the nearest array element.
    ///
    /// The grid is separable, so the nearest element is found by clamping the
    /// rounded y index and taking the bottom z row (UEs sit at z = 0).
    pub fn min_element_dist_sq(&self, pos: UePosition) -> f64 {
        let iy = (pos.y / self.d_m).round().clamp(0.0, (self.m_y - 1) as f64);
        let dy = pos.y - iy * self.d_m;
        // Nearest z row is iz = 0; its offset from the ground plane is pos.z.
        pos.x * pos.x + dy * dy + pos.z * pos.z
    }
}

/// A UE location; z is kept for generality but placement always uses z = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UePosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UePosition {
    /// Euclidean distance to an element position.
    pub fn distance_to(&self, element: [f64; 3]) -> f64 {
        let dx = self.x - element[0];
        let dy = self.y - element[1];
        let dz = self.z - element[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// How far the near edge of the cell sits from the array plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandoffPolicy {
    /// Near edge at the subarray Rayleigh distance, so every cell point is in
    /// the far field of every subarray by construction.
    Auto,
    /// Explicit standoff in meters. May leave the far-field region empty
    /// inside the cell, which triggers the unconstrained fallback.
    Fixed(f64),
}

/// Resolved square-cell footprint on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLayout {
    /// x of the cell edge nearest the array.
    pub x0: f64,
    /// Side length in meters.
    pub side: f64,
    /// y of the cell center (aligned with the array midpoint).
    pub y_center: f64,
}

impl CellLayout {
    /// Builds the cell footprint for a geometry, side length and standoff.
    pub fn new(
        geometry: &ArrayGeometry,
        side: f64,
        standoff: StandoffPolicy,
    ) -> Result<Self, CoreError> {
        if side <= 0.0 || !side.is_finite() {
            return Err(CoreError::config(format!(
                "cell side must be positive and finite, got {side}"
            )));
        }
        let x0 = match standoff {
            StandoffPolicy::Auto => geometry.rayleigh_distance_sa(),
            StandoffPolicy::Fixed(s) => {
                if s < 0.0 || !s.is_finite() {
                    return Err(CoreError::config(format!(
                        "cell standoff must be non-negative and finite, got {s}"
                    )));
                }
                s
            }
        };
        Ok(CellLayout {
            x0,
            side,
            y_center: geometry.y_center(),
        })
    }

    /// True when the far-field region (min element distance strictly above
    /// the subarray Rayleigh distance) is non-empty inside the cell.
    ///
    /// The minimum element distance grows with x and, along y, is maximized
    /// at the cell corners, so checking the two far corners is sufficient
    /// (up to the sub-centimeter element-grid granularity, which is
    /// negligible against cell-scale distances).
    pub fn far_field_feasible(&self, geometry: &ArrayGeometry) -> bool {
        let d2 = {
            let d = geometry.rayleigh_distance_sa();
            d * d
        };
        let x_far = self.x0 + self.side;
        for y in [
            self.y_center - self.side / 2.0,
            self.y_center + self.side / 2.0,
        ] {
            let corner = UePosition {
                x: x_far,
                y,
                z: 0.0,
            };
            if geometry.min_element_dist_sq(corner) > d2 {
                return true;
            }
        }
        false
    }

    fn sample_unconstrained(&self, rng: &mut impl Rng) -> UePosition {
        let x = self.x0 + rng.gen::<f64>() * self.side;
        let y = self.y_center - self.side / 2.0 + rng.gen::<f64>() * self.side;
        UePosition { x, y, z: 0.0 }
    }
}

/// Attempt budget for one UE's rejection sampling; the feasibility pre-check
/// makes exhaustion effectively impossible, this is a safety net.
const MAX_REJECTION_ATTEMPTS: u32 = 100_000;

/// Samples one far-field UE position inside the cell.
///
/// Call only when `cell.far_field_feasible(geometry)` holds; exhausting the
/// attempt budget is reported as a domain error.
pub fn place_one_far_field(
    geometry: &ArrayGeometry,
    cell: &CellLayout,
    rng: &mut impl Rng,
) -> Result<UePosition, CoreError> {
    let d_rayl = geometry.rayleigh_distance_sa();
    let d2 = d_rayl * d_rayl;
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let pos = cell.sample_unconstrained(rng);
        if geometry.min_element_dist_sq(pos) > d2 {
            return Ok(pos);
        }
    }
    Err(CoreError::domain(format!(
        "rejection sampling exhausted {MAX_REJECTION_ATTEMPTS} attempts; far-field \
         region inside the cell is degenerate (d_rayl = {d_rayl} m)"
    )))
}

/// Samples one UE position, falling back to unconstrained sampling when the
/// far-field region is empty (`feasible = false`).
pub fn place_one(
    geometry: &ArrayGeometry,
    cell: &CellLayout,
    feasible: bool,
    rng: &mut impl Rng,
) -> Result<UePosition, CoreError> {
    if feasible {
        place_one_far_field(geometry, cell, rng)
    } else {
        Ok(cell.sample_unconstrained(rng))
    }
}

/// Places `count` UEs uniformly in the cell's far-field region.
///
/// Returns the positions together with a flag that is true when the
/// far-field constraint had to be dropped because no cell point satisfies
/// it (the flag is a property of geometry and cell, not of the draw).
pub fn place_ues(
    count: usize,
    geometry: &ArrayGeometry,
    cell: &CellLayout,
    rng: &mut impl Rng,
) -> Result<(Vec<UePosition>, bool), CoreError> {
    let feasible = cell.far_field_feasible(geometry);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(place_one(geometry, cell, feasible, rng)?);
    }
    Ok((out, !feasible))
}
