//! Seeded synthetic scenarios.
//!
//! `GeorgiaLike` mimics a southeastern state: physicians concentrate in a
//! handful of metro areas and small towns, a share of rural tracts lies out
//! of reach of any physician, and Medicaid acceptance varies by county.
//! `Uniform` drops everything into one small box so every tract reaches
//! every physician.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{
    CensusTract, GeoPoint, ModelError, PracticeSetting, Physician, ScenarioInstance, SystemParameters,
};
use crate::rng::substream;
use crate::spatial::{
    diversity_ratio, hospital_distance, kde_density_geo, silverman_bandwidth, two_group_composition, Hospital,
    DIVERSITY_LOCAL_MILES, DIVERSITY_REGIONAL_MILES, HOSPITAL_RADIUS_MILES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Uniform,
    GeorgiaLike,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(Profile::Uniform),
            "georgia_like" | "georgia" => Ok(Profile::GeorgiaLike),
            other => Err(format!("unknown profile `{other}` (expected uniform or georgia-like)")),
        }
    }
}

/// A scenario together with the hospitals used for its covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub scenario: ScenarioInstance,
    pub hospitals: Vec<Hospital>,
}

struct Bbox {
    lat: (f64, f64),
    lon: (f64, f64),
}

const GEORGIA: Bbox = Bbox {
    lat: (30.36, 35.0),
    lon: (-85.6, -80.84),
};

const UNIFORM_BOX: Bbox = Bbox {
    lat: (33.0, 33.25),
    lon: (-84.5, -84.25),
};

/// (lat, lon, weight, spread in miles)
const CITIES: [(f64, f64, f64, f64); 9] = [
    (33.749, -84.388, 0.45, 18.0), // Atlanta
    (33.471, -81.975, 0.08, 7.0),  // Augusta
    (32.461, -84.988, 0.07, 6.0),  // Columbus
    (32.841, -83.632, 0.07, 6.0),  // Macon
    (32.081, -81.091, 0.09, 7.0),  // Savannah
    (33.961, -83.378, 0.07, 5.0),  // Athens
    (31.579, -84.156, 0.06, 5.0),  // Albany
    (30.833, -83.278, 0.05, 4.0),  // Valdosta
    (34.257, -85.165, 0.06, 5.0),  // Rome
];

/// Small towns with a few physicians each: (lat, lon).
const TOWNS: [(f64, f64); 4] = [
    (31.213, -82.354), // Waycross
    (34.770, -84.970), // Dalton
    (31.450, -83.508), // Tifton
    (32.449, -81.783), // Statesboro
];

const TOWN_REACH_MILES: f64 = 4.0;
const RURAL_SHARE: f64 = 0.28;
const REMOTE_SHARE: f64 = 0.14;
const TOWN_PHYSICIAN_SHARE: f64 = 0.06;
const PAM_GRID: usize = 12;

fn miles_to_deg(lat: f64, dlat_mi: f64, dlon_mi: f64) -> (f64, f64) {
    (dlat_mi / 69.0, dlon_mi / (69.17 * lat.to_radians().cos()))
}

fn clamp_to(b: &Bbox, p: GeoPoint) -> GeoPoint {
    GeoPoint::new(p.lat.clamp(b.lat.0, b.lat.1), p.lon.clamp(b.lon.0, b.lon.1))
}

fn uniform_in(rng: &mut ChaCha8Rng, b: &Bbox) -> GeoPoint {
    GeoPoint::new(rng.random_range(b.lat.0..=b.lat.1), rng.random_range(b.lon.0..=b.lon.1))
}

fn pick_city(rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = CITIES.iter().map(|c| c.2).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, c) in CITIES.iter().enumerate() {
        if u < c.2 {
            return k;
        }
        u -= c.2;
    }
    CITIES.len() - 1
}

/// Gaussian offset around a center, truncated at `cut` standard deviations.
fn scatter(rng: &mut ChaCha8Rng, lat: f64, lon: f64, sd_miles: f64, cut: f64) -> GeoPoint {
    let n = Normal::new(0.0, 1.0).unwrap();
    loop {
        let (a, b): (f64, f64) = (n.sample(rng), n.sample(rng));
        if a * a + b * b <= cut * cut {
            let (dlat, dlon) = miles_to_deg(lat, a * sd_miles, b * sd_miles);
            return GeoPoint::new(lat + dlat, lon + dlon);
        }
    }
}

/// Greatest distance a physician can sit from each anchor.
fn anchors() -> Vec<(GeoPoint, f64)> {
    CITIES
        .iter()
        .map(|c| (GeoPoint::new(c.0, c.1), c.3))
        .chain(TOWNS.iter().map(|t| (GeoPoint::new(t.0, t.1), TOWN_REACH_MILES)))
        .collect()
}

fn remote_point(rng: &mut ChaCha8Rng, mi_max: f64) -> GeoPoint {
    let anchors = anchors();
    for _ in 0..10_000 {
        let p = uniform_in(rng, &GEORGIA);
        if anchors.iter().all(|(a, reach)| p.miles_to(a) > reach + mi_max + 1.0) {
            return p;
        }
    }
    uniform_in(rng, &GEORGIA)
}

fn tract_locations(rng: &mut ChaCha8Rng, n: usize, profile: Profile, mi_max: f64) -> (Vec<GeoPoint>, Vec<bool>) {
    match profile {
        Profile::Uniform => ((0..n).map(|_| uniform_in(rng, &UNIFORM_BOX)).collect(), vec![false; n]),
        Profile::GeorgiaLike => {
            let n_remote = ((n as f64) * REMOTE_SHARE).ceil() as usize;
            let n_rural = (((n as f64) * RURAL_SHARE).round() as usize).max(n_remote).min(n);
            let n_remote = n_remote.min(n_rural);
            let mut pts = Vec::with_capacity(n);
            let mut rural = Vec::with_capacity(n);
            for k in 0..n {
                let p = if k < n_remote {
                    remote_point(rng, mi_max)
                } else if k < n_rural {
                    uniform_in(rng, &GEORGIA)
                } else {
                    let c = CITIES[pick_city(rng)];
                    clamp_to(&GEORGIA, scatter(rng, c.0, c.1, c.3 * 0.8, 3.0))
                };
                pts.push(p);
                rural.push(k < n_rural);
            }
            (pts, rural)
        }
    }
}

fn physician_locations(rng: &mut ChaCha8Rng, n: usize, profile: Profile) -> Vec<GeoPoint> {
    match profile {
        Profile::Uniform => (0..n).map(|_| uniform_in(rng, &UNIFORM_BOX)).collect(),
        Profile::GeorgiaLike => {
            let n_town = ((n as f64) * TOWN_PHYSICIAN_SHARE).round() as usize;
            (0..n)
                .map(|k| {
                    if k < n_town {
                        let t = TOWNS[k % TOWNS.len()];
                        scatter(rng, t.0, t.1, TOWN_REACH_MILES / 2.0, 2.0)
                    } else {
                        let c = CITIES[pick_city(rng)];
                        scatter(rng, c.0, c.1, c.3 / 1.5, 1.5)
                    }
                })
                .collect()
        }
    }
}

fn nearest(points: &[GeoPoint], p: GeoPoint) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, q) in points.iter().enumerate() {
        let d = p.miles_to(q);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

fn hospitals_for(rng: &mut ChaCha8Rng, profile: Profile) -> Vec<Hospital> {
    let mut out = Vec::new();
    let mut id = 1;
    match profile {
        Profile::Uniform => {
            for _ in 0..2 {
                out.push(Hospital {
                    id,
                    location: uniform_in(rng, &UNIFORM_BOX),
                    beds: rng.random_range(100.0..500.0f64).round(),
                });
                id += 1;
            }
        }
        Profile::GeorgiaLike => {
            for c in CITIES {
                let count = 1 + (c.2 * 20.0) as usize;
                for _ in 0..count {
                    out.push(Hospital {
                        id,
                        location: scatter(rng, c.0, c.1, c.3 / 2.0, 2.0),
                        beds: rng.random_range(150.0..900.0f64).round(),
                    });
                    id += 1;
                }
            }
            for t in TOWNS {
                out.push(Hospital {
                    id,
                    location: GeoPoint::new(t.0, t.1),
                    beds: rng.random_range(40.0..150.0f64).round(),
                });
                id += 1;
            }
        }
    }
    out
}

/// Builds a synthetic scenario plus hospitals. Deterministic in all arguments.
pub fn generate_synthetic_world(
    seed: u64,
    n_tracts: usize,
    n_physicians: usize,
    profile: Profile,
) -> Result<SyntheticWorld, ModelError> {
    if n_tracts == 0 || n_physicians == 0 {
        return Err(ModelError::InvalidScenario("synthetic counts must be at least 1".into()));
    }
    let params = SystemParameters::default();
    let mut rng_t = substream(seed, "synth/tracts");
    let mut rng_p = substream(seed, "synth/physicians");
    let mut rng_h = substream(seed, "synth/hospitals");
    let mut rng_c = substream(seed, "synth/county-pam");

    let (centroids, rural) = tract_locations(&mut rng_t, n_tracts, profile, params.mi_max);
    let size = LogNormal::new(1400f64.ln(), 0.35).unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();

    let mut tracts = Vec::with_capacity(n_tracts);
    for (i, (&c, &is_rural)) in centroids.iter().zip(&rural).enumerate() {
        let kids = size.sample(&mut rng_t).round().clamp(50.0, 6000.0);
        let medicaid_frac = if is_rural {
            rng_t.random_range(0.40..0.70)
        } else {
            rng_t.random_range(0.20..0.60)
        };
        let pop_medicaid = (kids * medicaid_frac).round();
        let pop_other = kids - pop_medicaid;
        let mob_other = rng_t.random_range(0.88..0.99);
        let mob_medicaid = if is_rural {
            rng_t.random_range(0.50..0.80)
        } else {
            rng_t.random_range(0.60..0.90)
        };
        let income = (75.0 - 70.0 * (medicaid_frac - 0.3) - if is_rural { 8.0 } else { 0.0 }
            + 8.0 * noise.sample(&mut rng_t))
        .max(12.0);
        let edu = (0.12 + 0.35 * (income - 20.0) / 80.0 + 0.05 * noise.sample(&mut rng_t)).clamp(0.02, 0.85);
        let unemp = (0.03 + 0.07 * medicaid_frac + 0.01 * noise.sample(&mut rng_t)).clamp(0.01, 0.25);
        let nonwhite = (0.15 + 0.6 * (medicaid_frac - 0.2) + 0.12 * noise.sample(&mut rng_t)).clamp(0.0, 1.0);
        let covariates: BTreeMap<String, f64> = [
            ("income", income),
            ("edu", edu),
            ("unemp", unemp),
            ("nonwhite", nonwhite),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        tracts.push(CensusTract {
            index: i,
            external_id: (i + 1) as i64,
            centroid: c,
            pop_medicaid,
            pop_other,
            mob_medicaid,
            mob_other,
            local_physicians: Vec::new(),
            covariates,
        });
    }

    // County-level participation rates on a coarse grid.
    let pam_grid: Vec<f64> = (0..PAM_GRID * PAM_GRID).map(|_| rng_c.random_range(0.40..0.95)).collect();
    let bbox = match profile {
        Profile::Uniform => &UNIFORM_BOX,
        Profile::GeorgiaLike => &GEORGIA,
    };
    let cell = |p: GeoPoint| -> usize {
        let fy = ((p.lat - bbox.lat.0) / (bbox.lat.1 - bbox.lat.0)).clamp(0.0, 0.999_999);
        let fx = ((p.lon - bbox.lon.0) / (bbox.lon.1 - bbox.lon.0)).clamp(0.0, 0.999_999);
        (fy * PAM_GRID as f64) as usize * PAM_GRID + (fx * PAM_GRID as f64) as usize
    };

    let locations = physician_locations(&mut rng_p, n_physicians, profile);
    let physicians: Vec<Physician> = locations
        .iter()
        .enumerate()
        .map(|(j, &loc)| {
            let u: f64 = rng_p.random();
            let setting = if u < 0.08 {
                PracticeSetting::PublicHospital
            } else if u < 0.20 {
                PracticeSetting::CommunityClinic
            } else {
                PracticeSetting::Other
            };
            Physician {
                index: j,
                external_id: (j + 1) as i64,
                location: loc,
                tract: nearest(&centroids, loc),
                pam: pam_grid[cell(loc)],
                mc: setting.default_mc(),
                setting,
            }
        })
        .collect();

    let hospitals = hospitals_for(&mut rng_h, profile);

    // Computed covariates.
    let weights: Vec<f64> = tracts.iter().map(|t| t.population()).collect();
    let pts: Vec<(f64, f64)> = centroids.iter().map(|p| (p.lat, p.lon)).collect();
    let bw = silverman_bandwidth(&pts, &weights).unwrap_or(1.0);
    let density = kde_density_geo(&centroids, &weights, &centroids, bw)
        .map_err(|e| ModelError::InvalidScenario(format!("density covariate: {e}")))?;
    let comps: Vec<Vec<f64>> = tracts
        .iter()
        .map(|t| two_group_composition(t.population(), t.covariates["nonwhite"]))
        .collect();
    let div = diversity_ratio(&centroids, &comps, DIVERSITY_LOCAL_MILES, DIVERSITY_REGIONAL_MILES)
        .map_err(|e| ModelError::InvalidScenario(format!("diversity covariate: {e}")))?;
    for (i, t) in tracts.iter_mut().enumerate() {
        t.covariates.insert("density".into(), density[i]);
        t.covariates
            .insert("hospdist".into(), hospital_distance(t.centroid, &hospitals, HOSPITAL_RADIUS_MILES));
        t.covariates.insert("divratio".into(), div.values[i]);
    }

    let scenario = ScenarioInstance::with_great_circle_distances(tracts, physicians, params)?;
    Ok(SyntheticWorld { scenario, hospitals })
}

/// [`generate_synthetic_world`] without the hospitals.
pub fn generate_synthetic_state(
    seed: u64,
    n_tracts: usize,
    n_physicians: usize,
    profile: Profile,
) -> Result<ScenarioInstance, ModelError> {
    generate_synthetic_world(seed, n_tracts, n_physicians, profile).map(|w| w.scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::COVARIATE_NAMES;

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_synthetic_world(7, 60, 80, Profile::GeorgiaLike).unwrap();
        let b = generate_synthetic_world(7, 60, 80, Profile::GeorgiaLike).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_world(8, 60, 80, Profile::GeorgiaLike).unwrap();
        assert_ne!(a.scenario, c.scenario);
    }

    #[test]
    fn georgia_like_has_rural_tracts_without_arcs() {
        let s = generate_synthetic_state(7, 200, 250, Profile::GeorgiaLike).unwrap();
        let zero = s.zero_arc_tracts().len();
        assert!(zero * 10 >= 200, "{zero} zero-arc tracts");
        assert!(s.distances.arcs().iter().all(|a| a.miles <= s.params.mi_max));
    }

    #[test]
    fn uniform_minimal_instance_has_one_arc() {
        let s = generate_synthetic_state(1, 1, 1, Profile::Uniform).unwrap();
        assert_eq!(s.distances.len(), 1);
        assert_eq!(s.tracts[0].local_physicians, vec![0]);
    }

    #[test]
    fn uniform_is_complete_bipartite() {
        let s = generate_synthetic_state(3, 12, 9, Profile::Uniform).unwrap();
        assert_eq!(s.distances.len(), 12 * 9);
    }

    #[test]
    fn all_seven_covariates_present_and_finite() {
        let s = generate_synthetic_state(11, 40, 50, Profile::GeorgiaLike).unwrap();
        for t in &s.tracts {
            for name in COVARIATE_NAMES {
                assert!(t.covariates[name].is_finite(), "{name}");
            }
        }
    }

    #[test]
    fn settings_carry_default_caseload_limits() {
        let s = generate_synthetic_state(5, 30, 200, Profile::GeorgiaLike).unwrap();
        assert!(s.physicians.iter().all(|p| p.mc == p.setting.default_mc()));
        assert!(s.physicians.iter().all(|p| (0.4..=0.95).contains(&p.pam)));
    }

    #[test]
    fn profile_parses_cli_spelling() {
        assert_eq!("georgia-like".parse::<Profile>().unwrap(), Profile::GeorgiaLike);
        assert!("mars".parse::<Profile>().is_err());
    }
}
