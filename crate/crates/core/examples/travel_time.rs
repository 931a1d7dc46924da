//! Great-circle distances and drive-time estimates between the default
//! urban locations.

use judge_bench::generator::Vocabulary;
use judge_bench::travel::{haversine_km, TravelTimeEstimator, DEFAULT_SPEED_KMH};

fn main() {
    let vocab = Vocabulary::default();
    let travel = TravelTimeEstimator::haversine(DEFAULT_SPEED_KMH);
    let origin = &vocab.locations[0];
    println!("from {} at {DEFAULT_SPEED_KMH} km/h:", origin.district_label);
    for place in &vocab.locations[1..] {
        let km = haversine_km(origin, place);
        let minutes = travel.estimate(origin, place).unwrap();
        let verdict = if minutes > 15.0 { "too far" } else { "ok" };
        println!("  {:<32} {km:>7.1} km {minutes:>7.1} min  {verdict}", place.district_label);
    }
}
