use crate::model::GeoPoint;
use crate::Scalar;

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

/// Haversine distance in statute miles.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    haversine_miles(a.lat, a.lon, b.lat, b.lon)
}

/// Haversine distance between `(lat, lon)` pairs given in degrees.
pub fn haversine_miles<T: Scalar>(lat1: T, lon1: T, lat2: T, lon2: T) -> T {
    let half = T::lit(0.5);
    let p1 = lat1.to_radians();
    let p2 = lat2.to_radians();
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let h = (dp * half).sin().powi(2) + p1.cos() * p2.cos() * (dl * half).sin().powi(2);
    let h = h.min(T::one()).max(T::zero());
    T::lit(2.0 * EARTH_RADIUS_MILES) * h.sqrt().asin()
}
