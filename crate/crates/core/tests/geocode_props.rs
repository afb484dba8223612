use nightpulse_core::geocode::*;
use proptest::prelude::*;

type FeatureDef<'a> = (&'a str, &'a str, Vec<Vec<[f64; 2]>>);

fn collection(features: &[FeatureDef]) -> String {
    let fs: Vec<serde_json::Value> = features
        .iter()
        .map(|(name, level, rings)| {
            serde_json::json!({
                "type": "Feature",
                "properties": {"name": name, "admin_level": level},
                "geometry": {"type": "Polygon", "coordinates": rings},
            })
        })
        .collect();
    serde_json::json!({"type": "FeatureCollection", "features": fs}).to_string()
}

fn closed(mut ring: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    ring.push(ring[0]);
    ring
}

fn rotate(ring: &[[f64; 2]], k: usize) -> Vec<[f64; 2]> {
    let open = &ring[..ring.len() - 1];
    let k = k % open.len();
    closed(open[k..].iter().chain(&open[..k]).copied().collect())
}

fn star() -> Vec<[f64; 2]> {
    closed(vec![[0.0, 0.0], [4.0, 1.0], [8.0, 0.0], [6.0, 4.0], [8.0, 8.0], [4.0, 6.0], [0.0, 8.0], [2.0, 4.0]])
}

fn hole() -> Vec<[f64; 2]> {
    closed(vec![[3.0, 3.0], [5.0, 3.0], [5.0, 5.0], [3.0, 5.0]])
}

fn nested() -> Geocoder {
    let text = collection(&[
        ("Nation", "country", vec![closed(vec![[0.0, 0.0], [20.0, 0.0], [20.0, 20.0], [0.0, 20.0]])]),
        ("North", "state", vec![closed(vec![[0.0, 10.0], [20.0, 10.0], [20.0, 20.0], [0.0, 20.0]])]),
        ("South", "state", vec![closed(vec![[0.0, 0.0], [20.0, 0.0], [20.0, 10.0], [0.0, 10.0]])]),
        ("Harbor", "city", vec![closed(vec![[2.0, 2.0], [6.0, 2.0], [6.0, 6.0], [2.0, 6.0]])]),
        ("Hill", "city", vec![closed(vec![[12.0, 14.0], [16.0, 14.0], [14.0, 18.0]])]),
    ]);
    Geocoder::from_geojson(&text, ZoomLevelMap::default()).unwrap()
}

proptest! {
    #[test]
    fn rotation_does_not_change_answers(k in 0usize..8, j in 0usize..4, x in -1.0f64..9.0, y in -1.0f64..9.0) {
        let base = collection(&[("Star", "country", vec![star(), hole()])]);
        let rotated = collection(&[("Star", "country", vec![rotate(&star(), k), rotate(&hole(), j)])]);
        let a = Geocoder::from_geojson(&base, ZoomLevelMap::default()).unwrap();
        let b = Geocoder::from_geojson(&rotated, ZoomLevelMap::default()).unwrap();
        prop_assert_eq!(a.reverse_geocode(x, y, 0).ok(), b.reverse_geocode(x, y, 0).ok());
    }

    #[test]
    fn reversed_winding_is_normalized(x in -1.0f64..9.0, y in -1.0f64..9.0) {
        let mut cw = star();
        cw.reverse();
        let a = Geocoder::from_geojson(&collection(&[("Star", "country", vec![star()])]), ZoomLevelMap::default()).unwrap();
        let b = Geocoder::from_geojson(&collection(&[("Star", "country", vec![cw])]), ZoomLevelMap::default()).unwrap();
        prop_assert_eq!(a.reverse_geocode(x, y, 0).ok(), b.reverse_geocode(x, y, 0).ok());
    }

    #[test]
    fn city_hits_nest_upward(x in 0.0f64..20.0, y in 0.0f64..20.0) {
        let g = nested();
        if let Ok(city) = g.reverse_geocode(x, y, 12) {
            let state = g.reverse_geocode(x, y, 6).unwrap();
            let country = g.reverse_geocode(x, y, 2).unwrap();
            let expected_state = if city.name == "Harbor" { "South" } else { "North" };
            prop_assert_eq!(state.name.as_str(), expected_state);
            prop_assert_eq!(country.name.as_str(), "Nation");
        }
    }
}

#[test]
fn star_vertices_and_hole_edges() {
    let g = Geocoder::from_geojson(&collection(&[("Star", "country", vec![star(), hole()])]), ZoomLevelMap::default())
        .unwrap();
    for v in &star() {
        assert_eq!(g.reverse_geocode(v[0], v[1], 0).unwrap().name, "Star");
    }
    assert_eq!(g.reverse_geocode(3.0, 4.0, 0).unwrap().name, "Star");
    assert!(matches!(g.reverse_geocode(4.0, 4.0, 0), Err(nightpulse_core::Error::NotFound(_))));
    assert!(matches!(g.reverse_geocode(1.0, 4.0, 0), Err(nightpulse_core::Error::NotFound(_))));
}

#[test]
fn bundled_cities_resolve() {
    let g = Geocoder::bundled(ZoomLevelMap::default());
    assert_eq!(g.reverse_geocode(-122.33, 47.61, 10).unwrap().name, "Seattle");
    assert_eq!(g.reverse_geocode(-122.33, 47.61, 7).unwrap().name, "Washington");
    assert_eq!(g.reverse_geocode(-73.98, 40.75, 11).unwrap().name, "New York City");
    assert_eq!(g.reverse_geocode(-73.98, 40.75, 6).unwrap().name, "New York");
    assert_eq!(g.reverse_geocode(-73.98, 40.75, 3).unwrap().name, "United States");
}
