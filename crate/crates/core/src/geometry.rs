//! Planar array placement and exact source-to-element distances.
//!
//! The array stands on the YZ plane with the reference element at the origin.
//! Rows (microstrips) are stacked along +z and the elements of a row run along
//! +y. Element `(row, col)` sits at `(0, col * col_spacing, row * row_spacing)`
//! and is stored at flat index `row * n_cols + col`, so each microstrip occupies
//! a contiguous block of the element vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polar placement of one element relative to the reference element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementPolar {
    /// Distance from the reference element in meters.
    pub r: f64,
    /// Angle from the +z axis toward +y, in radians.
    pub phi: f64,
}

/// Rectangular `n_rows x n_cols` element grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    n_rows: usize,
    n_cols: usize,
    wavelength: f64,
    row_spacing: f64,
    col_spacing: f64,
    polar: Vec<ElementPolar>,
}

impl ArrayLayout {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.polar.is_empty()
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn row_spacing(&self) -> f64 {
        self.row_spacing
    }

    pub fn col_spacing(&self) -> f64 {
        self.col_spacing
    }

    /// Flat index of element `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        row * self.n_cols + col
    }

    pub fn polar(&self, index: usize) -> ElementPolar {
        self.polar[index]
    }

    pub fn elements(&self) -> &[ElementPolar] {
        &self.polar
    }

    /// Cartesian `(x, y, z)` of an element.
    pub fn cartesian(&self, index: usize) -> [f64; 3] {
        let row = index / self.n_cols;
        let col = index % self.n_cols;
        [
            0.0,
            col as f64 * self.col_spacing,
            row as f64 * self.row_spacing,
        ]
    }

    /// Side lengths `(along y, along z)` of the aperture, counting one spacing
    /// cell per element.
    pub fn aperture_sides(&self) -> (f64, f64) {
        (
            self.n_cols as f64 * self.col_spacing,
            self.n_rows as f64 * self.row_spacing,
        )
    }

    /// Aperture diagonal `D`. A square aperture of side `L` gives `sqrt(2) L`.
    pub fn aperture(&self) -> f64 {
        let (ly, lz) = self.aperture_sides();
        ly.hypot(lz)
    }

    /// Fraunhofer distance `2 D^2 / lambda` of this layout.
    pub fn fraunhofer_distance(&self) -> f64 {
        fraunhofer_distance(self.aperture(), self.wavelength)
    }

    /// Distance between element `index` and a source.
    pub fn distance_to(&self, index: usize, p: &SourcePosition) -> f64 {
        source_element_distance(self.polar[index], p)
    }
}

/// Places an `n_rows x n_cols` grid on the YZ plane.
pub fn build_layout(
    n_rows: usize,
    n_cols: usize,
    wavelength: f64,
    row_spacing: f64,
    col_spacing: f64,
) -> Result<ArrayLayout> {
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::InvalidGeometry(format!(
            "array needs at least one row and column, got {n_rows}x{n_cols}"
        )));
    }
    for (name, v) in [
        ("wavelength", wavelength),
        ("row spacing", row_spacing),
        ("column spacing", col_spacing),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidGeometry(format!("{name} must be positive, got {v}")));
        }
    }

    let mut polar = Vec::with_capacity(n_rows * n_cols);
    for row in 0..n_rows {
        for col in 0..n_cols {
            let y = col as f64 * col_spacing;
            let z = row as f64 * row_spacing;
            let r = y.hypot(z);
            // Reference element: phi is irrelevant since r = 0.
            let phi = if r == 0.0 { 0.0 } else { y.atan2(z) };
            polar.push(ElementPolar { r, phi });
        }
    }

    Ok(ArrayLayout {
        n_rows,
        n_cols,
        wavelength,
        row_spacing,
        col_spacing,
        polar,
    })
}

/// Source location in polar form relative to the reference element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePosition {
    pub distance: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl SourcePosition {
    pub fn new(distance: f64, azimuth: f64, elevation: f64) -> Self {
        Self {
            distance,
            azimuth,
            elevation,
        }
    }

    /// Source in the XY plane (elevation pi/2).
    pub fn planar(distance: f64, azimuth: f64) -> Self {
        Self::new(distance, azimuth, std::f64::consts::FRAC_PI_2)
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (sg, cg) = self.elevation.sin_cos();
        let (st, ct) = self.azimuth.sin_cos();
        [
            self.distance * sg * ct,
            self.distance * sg * st,
            self.distance * cg,
        ]
    }

    /// Inverse of [`to_cartesian`](Self::to_cartesian); the origin maps to zero angles.
    pub fn from_cartesian(x: f64, y: f64, z: f64) -> Self {
        let distance = (x * x + y * y + z * z).sqrt();
        if distance == 0.0 {
            return Self::new(0.0, 0.0, 0.0);
        }
        Self::new(distance, y.atan2(x), (z / distance).clamp(-1.0, 1.0).acos())
    }

    /// `(x, y)` projection in meters.
    pub fn xy(&self) -> (f64, f64) {
        let [x, y, _] = self.to_cartesian();
        (x, y)
    }
}

/// Geometric term `sin(phi) sin(theta) sin(gamma) + cos(phi) cos(gamma)`.
pub fn geometric_term(element: ElementPolar, p: &SourcePosition) -> f64 {
    let (sp, cp) = element.phi.sin_cos();
    sp * p.azimuth.sin() * p.elevation.sin() + cp * p.elevation.cos()
}

/// Law-of-cosines distance between an element and a source.
pub fn source_element_distance(element: ElementPolar, p: &SourcePosition) -> f64 {
    let r = element.r;
    let d = p.distance;
    let sq = r * r + d * d - 2.0 * r * d * geometric_term(element, p);
    // Round-off can push a collinear configuration a hair below zero.
    sq.max(0.0).sqrt()
}

/// `2 D^2 / lambda`.
pub fn fraunhofer_distance(aperture: f64, wavelength: f64) -> f64 {
    2.0 * aperture * aperture / wavelength
}
