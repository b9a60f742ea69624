//! Spherical distances between intersections.
//!
//! Both metrics share the haversine term `hav = sin²(Δφ/2) + cos φ₁ cos φ₂ sin²(Δλ/2)`,
//! which is `sin²(Δσ/2)` for central angle `Δσ`. The chord is then `2R·√hav` and the
//! arc `2R·atan2(√hav, √(1−hav))`.

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::Validation(format!(
                "non-finite coordinate ({lat}, {lon})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Validation(format!(
                "coordinate out of range ({lat}, {lon})"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }
}

fn haversine_term(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let s_phi = (dphi / 2.0).sin();
    let s_lambda = (dlambda / 2.0).sin();
    let hav = s_phi * s_phi + phi1.cos() * phi2.cos() * s_lambda * s_lambda;
    hav.clamp(0.0, 1.0)
}

/// Straight-line distance through the sphere, in meters.
pub fn euclidean_chord(a: GeoPoint, b: GeoPoint) -> f64 {
    2.0 * EARTH_RADIUS_M * haversine_term(a, b).sqrt()
}

/// Arc length along the sphere's surface, in meters.
pub fn great_circle(a: GeoPoint, b: GeoPoint) -> f64 {
    let hav = haversine_term(a, b);
    let arc = 2.0 * EARTH_RADIUS_M * hav.sqrt().atan2((1.0 - hav).sqrt());
    // θ ≥ sin θ; rounding must not put the arc below the chord
    arc.max(2.0 * EARTH_RADIUS_M * hav.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    // 3D embedding of the sphere; independent of the haversine route.
    fn cartesian_chord(a: GeoPoint, b: GeoPoint) -> f64 {
        let xyz = |g: GeoPoint| {
            let (phi, lam) = (g.lat.to_radians(), g.lon.to_radians());
            [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
        };
        let (u, v) = (xyz(a), xyz(b));
        let d2: f64 = u.iter().zip(v.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        EARTH_RADIUS_M * d2.sqrt()
    }

    #[test]
    fn coincident_points_are_zero() {
        let a = p(44.23, -76.49);
        assert_eq!(euclidean_chord(a, a), 0.0);
        assert_eq!(great_circle(a, a), 0.0);
    }

    #[test]
    fn antipodes() {
        let half = std::f64::consts::PI * EARTH_RADIUS_M;
        let (a, b) = (p(0.0, 0.0), p(0.0, 180.0));
        assert!((euclidean_chord(a, b) - 12_742_000.0).abs() < 1e-6);
        assert!((great_circle(a, b) - half).abs() < 1e-6);
        // the haversine form loses ~7 digits next to the antipode
        let (a, b) = (p(10.0, 20.0), p(-10.0, -160.0));
        assert!((euclidean_chord(a, b) - 12_742_000.0).abs() < 1e-6);
        assert!((great_circle(a, b) - half).abs() < 1.0);
    }

    #[test]
    fn kingston_pair_matches_oracle() {
        let a = p(44.23, -76.49);
        let b = p(44.26, -76.50);
        let chord = euclidean_chord(a, b);
        // Frozen from cartesian_chord and from an mpmath 50-digit arc computation.
        assert!((chord - cartesian_chord(a, b)).abs() < 1e-6);
        assert!((chord - 3_429.633_602_078_945).abs() < 1e-6, "{chord}");
        let arc = great_circle(a, b);
        assert!((arc - 3_429.633_643_490_043).abs() < 1e-6, "{arc}");
        assert!(arc >= chord);
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }
}
