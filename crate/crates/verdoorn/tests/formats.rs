use proptest::prelude::*;
use verdoorn::io::{format_weights, parse_coords, parse_panel, parse_weights, PanelSchema};
use verdoorn_core::ingest::Sector;
use verdoorn_core::weights::{Coordinate, SpatialWeights};

fn band_weights(pts: &[(f64, f64)], threshold: f64) -> SpatialWeights {
    let ids: Vec<String> = (0..pts.len()).map(|i| i.to_string()).collect();
    let coords: Vec<Coordinate> = pts.iter().map(|&(x, y)| Coordinate::PlanarKm { x, y }).collect();
    SpatialWeights::build(&ids, &coords, threshold).unwrap()
}

proptest! {
    #[test]
    fn weights_text_round_trips(
        pts in prop::collection::vec((0.0..300.0f64, 0.0..300.0f64), 3..25),
        threshold in 20.0..200.0f64,
    ) {
        let w = band_weights(&pts, threshold);
        let back = parse_weights(&format_weights(&w), None).unwrap();
        prop_assert_eq!(back.n(), w.n());
        prop_assert_eq!(back.islands(), w.islands());
        let a: Vec<_> = w.triplets().collect();
        let b: Vec<_> = back.triplets().collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(format_weights(&back), format_weights(&w));
    }

    #[test]
    fn panel_levels_survive_csv(
        levels in prop::collection::vec((1e-3..1e6f64, 1e-3..1e4f64), 9),
        tab in any::<bool>(),
    ) {
        let sep = if tab { "\t" } else { "," };
        let mut text = ["region", "sector", "year", "output", "employment"].join(sep) + "\n";
        for (k, (out, emp)) in levels.iter().enumerate() {
            let (r, y) = (k / 3, 2000 + (k % 3) as i32);
            text += &format!("r{r}{sep}services{sep}{y}{sep}{out}{sep}{emp}\n");
        }
        let panel = parse_panel(&text, &PanelSchema::default()).unwrap();
        prop_assert_eq!(panel.n(), 3);
        for (k, (out, emp)) in levels.iter().enumerate() {
            let l = panel.level(k / 3, Sector::Services, 2000 + (k % 3) as i32).unwrap();
            prop_assert_eq!((l.output, l.employment), (*out, *emp));
        }
    }

    #[test]
    fn coords_keep_axis_order(lat in -60.0..60.0f64, lon in -170.0..170.0f64) {
        let parsed = parse_coords(&format!("region,x,y,metric\na,{lon},{lat},latlon_deg\n")).unwrap();
        prop_assert_eq!(parsed[0].1, Coordinate::LatlonDeg { lat, lon });
    }
}
