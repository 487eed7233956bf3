//! Target height-map construction.
//!
//! A [`HeightMap`] is the desired remnant resist height per cell. The main
//! generator is [`arc_bridge_height_map`]: a free-standing bridge whose
//! longitudinal profile is a circular arc chosen to pass through the two
//! feet and the apex. Maps composite by pointwise minimum — removing resist
//! anywhere removes it in the combination — which is how a bridge target is
//! stamped into a larger layout.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Desired remnant height per cell, µm. Values lie in `[0, T0]` for the
/// resist thickness the map was built against.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightMap {
    grid: Grid,
}

impl HeightMap {
    /// Wraps a grid of heights, checking every value against
    /// `[0, full_height]`.
    pub fn new(grid: Grid, full_height: f64) -> Result<HeightMap> {
        if !(full_height > 0.0) || !full_height.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "full height must be positive, got {full_height} um"
            )));
        }
        let max = grid.max_value();
        if max > full_height {
            return Err(Error::TargetExceedsResist {
                max_target: max,
                full_height,
            });
        }
        if grid.min_value() < 0.0 {
            return Err(Error::InvalidParameter(
                "height map values must be non-negative".into(),
            ));
        }
        Ok(HeightMap { grid })
    }

    pub(crate) fn from_grid_unchecked(grid: Grid) -> HeightMap {
        HeightMap { grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    pub fn max_height(&self) -> f64 {
        self.grid.max_value()
    }
}

/// Geometry of a free-standing arc bridge.
///
/// The bridge spans `span` µm along x between its feet, rises to
/// `apex_height` µm at the center, and extrudes `deck_width` µm along y.
/// A `clearance` border around the deck is fully cleared (height 0) so the
/// feet and the surrounding development region release; everything beyond
/// the clearance keeps the full resist height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BridgeSpec {
    pub span: f64,
    pub apex_height: f64,
    pub deck_width: f64,
    pub clearance: f64,
}

impl Default for BridgeSpec {
    /// Demo geometry: 28 µm span, 3 µm apex, 8 µm deck, 4 µm clearance.
    fn default() -> Self {
        BridgeSpec {
            span: 28.0,
            apex_height: 3.0,
            deck_width: 8.0,
            clearance: 4.0,
        }
    }
}

impl BridgeSpec {
    /// Validates the geometry against a resist of thickness `full_height`.
    pub fn validate(&self, full_height: f64) -> Result<()> {
        if !(self.span > 0.0)
            || !(self.apex_height > 0.0)
            || !(self.deck_width > 0.0)
            || !(self.clearance >= 0.0)
            || !self.span.is_finite()
            || !self.clearance.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "bridge needs span > 0, apex > 0, deck width > 0, clearance >= 0; got {self:?}"
            )));
        }
        if self.apex_height > full_height {
            return Err(Error::TargetExceedsResist {
                max_target: self.apex_height,
                full_height,
            });
        }
        // A circular arc through both feet cannot rise above half the chord.
        if self.apex_height > self.span / 2.0 {
            return Err(Error::InvalidGeometry(format!(
                "arc apex {} um exceeds half the span ({} um); no circular arc fits",
                self.apex_height,
                self.span / 2.0
            )));
        }
        Ok(())
    }

    /// Radius of the circular arc through the feet `(+-span/2, 0)` and the
    /// apex `(0, apex_height)`:
    ///
    /// ```text
    /// R = span^2 / (8 apex) + apex / 2
    /// ```
    pub fn arc_radius(&self) -> f64 {
        self.span * self.span / (8.0 * self.apex_height) + self.apex_height / 2.0
    }

    /// Arc height at longitudinal offset `x` µm from the bridge center,
    /// clamped to 0 at and beyond the feet.
    pub fn arc_height(&self, x: f64) -> f64 {
        if x.abs() > self.span / 2.0 {
            return 0.0;
        }
        let r = self.arc_radius();
        let h = self.apex_height - r + (r * r - x * x).sqrt();
        h.max(0.0)
    }
}

/// Builds the bridge target on an automatically sized field: the deck plus
/// clearance plus a small unexposed border.
pub fn arc_bridge_height_map(spec: &BridgeSpec, full_height: f64, pitch: f64) -> Result<HeightMap> {
    let border = (4.0 * pitch).max(2.0);
    let ncols = ((spec.span + 2.0 * spec.clearance + 2.0 * border) / pitch).ceil() as usize;
    let nrows = ((spec.deck_width + 2.0 * spec.clearance + 2.0 * border) / pitch).ceil() as usize;
    arc_bridge_height_map_in_field(spec, full_height, pitch, ncols, nrows)
}

/// Builds the bridge target centered on an `ncols x nrows` field.
///
/// Preconditions: `pitch <= span / 16` (the arc must be resolved) and the
/// field must contain the deck plus clearance.
pub fn arc_bridge_height_map_in_field(
    spec: &BridgeSpec,
    full_height: f64,
    pitch: f64,
    ncols: usize,
    nrows: usize,
) -> Result<HeightMap> {
    spec.validate(full_height)?;
    if !(pitch > 0.0) || !pitch.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pitch must be positive, got {pitch} um"
        )));
    }
    if pitch > spec.span / 16.0 {
        return Err(Error::InvalidParameter(format!(
            "pitch {} um too coarse for a {} um span; need pitch <= span/16 = {} um",
            pitch,
            spec.span,
            spec.span / 16.0
        )));
    }
    let (need_x, need_y) = (
        spec.span + 2.0 * spec.clearance,
        spec.deck_width + 2.0 * spec.clearance,
    );
    if (ncols as f64) * pitch < need_x || (nrows as f64) * pitch < need_y {
        return Err(Error::InvalidGeometry(format!(
            "field {}x{} cells at {} um pitch cannot hold the {} x {} um bridge footprint",
            ncols, nrows, pitch, need_x, need_y
        )));
    }

    let mut grid = Grid::new(ncols, nrows, pitch, (0.0, 0.0))?;
    let half_span = spec.span / 2.0;
    let half_deck = spec.deck_width / 2.0;
    for row in 0..nrows {
        // Offsets from the field center, computed so mirrored cells get
        // bit-identical magnitudes.
        let dy = (2 * row as i64 + 1 - nrows as i64) as f64 * 0.5 * pitch;
        for col in 0..ncols {
            let dx = (2 * col as i64 + 1 - ncols as i64) as f64 * 0.5 * pitch;
            let v = if dx.abs() <= half_span && dy.abs() <= half_deck {
                spec.arc_height(dx)
            } else if dx.abs() <= half_span + spec.clearance
                && dy.abs() <= half_deck + spec.clearance
            {
                0.0
            } else {
                full_height
            };
            grid.set(col, row, v);
        }
    }
    Ok(HeightMap { grid })
}

/// Pointwise-minimum composition: `patch` is placed with its cell (0, 0) at
/// the base cell nearest to `(dx_um, dy_um)` from the base origin; the
/// offsets must be whole multiples of the pitch.
pub fn compose(base: &HeightMap, patch: &HeightMap, dx_um: f64, dy_um: f64) -> Result<HeightMap> {
    let bg = &base.grid;
    let pg = &patch.grid;
    let rel = (bg.pitch() - pg.pitch()).abs() / bg.pitch();
    if rel > 1e-9 {
        return Err(Error::IncompatibleGrid(format!(
            "pitch mismatch: base {} um, patch {} um",
            bg.pitch(),
            pg.pitch()
        )));
    }
    let fx = dx_um / bg.pitch();
    let fy = dy_um / bg.pitch();
    if (fx - fx.round()).abs() > 1e-6 || (fy - fy.round()).abs() > 1e-6 {
        return Err(Error::IncompatibleGrid(format!(
            "offset ({dx_um}, {dy_um}) um is not aligned to the {} um pitch",
            bg.pitch()
        )));
    }
    let (cx, cy) = (fx.round() as i64, fy.round() as i64);
    if cx < 0
        || cy < 0
        || cx as usize + pg.ncols() > bg.ncols()
        || cy as usize + pg.nrows() > bg.nrows()
    {
        return Err(Error::InvalidGeometry(format!(
            "patch of {}x{} cells at offset ({cx}, {cy}) does not fit in a {}x{} base",
            pg.ncols(),
            pg.nrows(),
            bg.ncols(),
            bg.nrows()
        )));
    }
    let (cx, cy) = (cx as usize, cy as usize);
    let mut out = bg.clone();
    for row in 0..pg.nrows() {
        for col in 0..pg.ncols() {
            let b = out.get(cx + col, cy + row);
            let p = pg.get(col, row);
            out.set(cx + col, cy + row, b.min(p));
        }
    }
    Ok(HeightMap { grid: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_radius_matches_chord_sagitta_formula() {
        let spec = BridgeSpec::default();
        let r = spec.arc_radius();
        let expect = 28.0 * 28.0 / (8.0 * 3.0) + 1.5;
        assert!((r - expect).abs() < 1e-12);
        assert!((r - 34.1666666667).abs() < 1e-9);
    }

    #[test]
    fn arc_height_hits_apex_and_feet() {
        let spec = BridgeSpec::default();
        assert!((spec.arc_height(0.0) - 3.0).abs() < 1e-12);
        assert!(spec.arc_height(14.0).abs() < 1e-9);
        assert_eq!(spec.arc_height(14.1), 0.0);
        // Independent form of the same circle at x = 7 um.
        let r = spec.arc_radius();
        let expect = 3.0 - r + (r * r - 49.0).sqrt();
        assert!((spec.arc_height(7.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn semicircular_limit_is_allowed() {
        // apex = span/2 makes the arc a half circle: h(x) = sqrt(R^2 - x^2).
        let spec = BridgeSpec {
            span: 8.0,
            apex_height: 4.0,
            deck_width: 2.0,
            clearance: 1.0,
        };
        spec.validate(5.0).unwrap();
        assert!((spec.arc_radius() - 4.0).abs() < 1e-12);
        assert!((spec.arc_height(2.0) - (16.0f64 - 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_geometry_is_rejected() {
        let spec = BridgeSpec {
            span: 8.0,
            apex_height: 4.1,
            deck_width: 2.0,
            clearance: 1.0,
        };
        assert!(matches!(
            spec.validate(5.0),
            Err(Error::InvalidGeometry(_))
        ));
        let tall = BridgeSpec {
            apex_height: 3.5,
            ..BridgeSpec::default()
        };
        assert!(matches!(
            tall.validate(3.0),
            Err(Error::TargetExceedsResist { .. })
        ));
        assert!(BridgeSpec {
            span: -1.0,
            ..BridgeSpec::default()
        }
        .validate(3.0)
        .is_err());
    }

    #[test]
    fn map_regions_are_laid_out_correctly() {
        let spec = BridgeSpec::default();
        let map = arc_bridge_height_map_in_field(&spec, 3.0, 0.5, 96, 64).unwrap();
        let g = map.grid();

        // Unexposed corner keeps full height.
        assert_eq!(g.get(0, 0), 3.0);
        // Clearance cell just beyond the deck along y: x at center.
        let center_col = 48; // dx = 0.25 um
        let row_in_clearance = 32 + 10; // dy = 5.25 um: beyond deck half-width 4, within 8
        assert_eq!(g.get(center_col, row_in_clearance), 0.0);
        // Apex region follows the arc.
        let apex = g.get(center_col, 32); // (0.25, 0.25) um from center
        let expect = spec.arc_height(0.25);
        assert!((apex - expect).abs() < 1e-12);
        // All values within [0, T0].
        assert!(g.min_value() >= 0.0 && g.max_value() <= 3.0);
    }

    #[test]
    fn map_is_mirror_symmetric() {
        let map =
            arc_bridge_height_map_in_field(&BridgeSpec::default(), 3.0, 0.5, 90, 51).unwrap();
        let g = map.grid();
        for row in 0..g.nrows() {
            for col in 0..g.ncols() {
                let v = g.get(col, row);
                assert_eq!(v, g.get(g.ncols() - 1 - col, row));
                assert_eq!(v, g.get(col, g.nrows() - 1 - row));
            }
        }
    }

    #[test]
    fn arc_values_match_the_formula_at_cell_centers() {
        let spec = BridgeSpec::default();
        let map = arc_bridge_height_map_in_field(&spec, 3.0, 0.4, 100, 60).unwrap();
        let g = map.grid();
        // Column 67 sits at dx = (2*67 + 1 - 100) * 0.2 = 7.0 um.
        let dx = (2.0 * 67.0 + 1.0 - 100.0) * 0.5 * 0.4;
        assert!((dx - 7.0).abs() < 1e-12);
        let v = g.get(67, 30);
        assert!((v - spec.arc_height(dx)).abs() < 1e-12);
    }

    #[test]
    fn coarse_pitch_is_rejected() {
        let spec = BridgeSpec::default();
        assert!(matches!(
            arc_bridge_height_map(&spec, 3.0, 2.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn field_too_small_is_rejected() {
        let spec = BridgeSpec::default();
        assert!(matches!(
            arc_bridge_height_map_in_field(&spec, 3.0, 0.5, 40, 40),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn compose_takes_pointwise_minimum() {
        let base = HeightMap::new(Grid::filled(6, 6, 1.0, (0.0, 0.0), 3.0).unwrap(), 3.0).unwrap();
        let patch =
            HeightMap::new(Grid::filled(2, 2, 1.0, (0.0, 0.0), 1.0).unwrap(), 3.0).unwrap();
        let out = compose(&base, &patch, 2.0, 3.0).unwrap();
        assert_eq!(out.grid().get(2, 3), 1.0);
        assert_eq!(out.grid().get(3, 4), 1.0);
        assert_eq!(out.grid().get(1, 3), 3.0);
        assert_eq!(out.grid().get(2, 2), 3.0);
    }

    #[test]
    fn compose_rejects_mismatch_misalignment_and_overflow() {
        let base = HeightMap::new(Grid::filled(6, 6, 1.0, (0.0, 0.0), 3.0).unwrap(), 3.0).unwrap();
        let other_pitch =
            HeightMap::new(Grid::filled(2, 2, 0.5, (0.0, 0.0), 1.0).unwrap(), 3.0).unwrap();
        assert!(matches!(
            compose(&base, &other_pitch, 0.0, 0.0),
            Err(Error::IncompatibleGrid(_))
        ));
        let patch =
            HeightMap::new(Grid::filled(2, 2, 1.0, (0.0, 0.0), 1.0).unwrap(), 3.0).unwrap();
        assert!(matches!(
            compose(&base, &patch, 0.5, 0.0),
            Err(Error::IncompatibleGrid(_))
        ));
        assert!(matches!(
            compose(&base, &patch, 5.0, 0.0),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn height_map_validates_range() {
        let g = Grid::filled(2, 2, 1.0, (0.0, 0.0), 3.5).unwrap();
        assert!(matches!(
            HeightMap::new(g, 3.0),
            Err(Error::TargetExceedsResist { .. })
        ));
    }
}
