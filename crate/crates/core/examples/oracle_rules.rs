//! The rule oracle on a late Monday request: one aligned venue, then one
//! single-dimension mistake per rule.

use chrono::NaiveDate;
use judge_bench::model::{
    CostCategory, GeoPoint, Interval, OpeningHours, RatingExpression, RatingKind, SystemBlock, UserBlock,
};
use judge_bench::oracle::judge_pair;
use judge_bench::travel::{destination_point, TravelTimeEstimator};

fn main() {
    let user = UserBlock {
        id: "demo".into(),
        utterance: "Find me a fancy French place with a rating of at least 4.5, please.".into(),
        location: GeoPoint::new(52.5389, 13.4244, "Prenzlauer Berg, Berlin"),
        date: NaiveDate::from_ymd_opt(2024, 3, 4).unwrap(), // a Monday
        time: 20 * 60 + 35,
        cuisine: "french".into(),
        cuisine_lexical: "French".into(),
        cost: CostCategory::High,
        cost_paraphrase: "fancy".into(),
        rating: RatingExpression::new(RatingKind::AtLeast, 4.5),
    };
    let aligned = SystemBlock {
        venue_name: "Maison Lumière".into(),
        location: GeoPoint::new(52.5402, 13.4190, "Prenzlauer Berg, Berlin"),
        cuisine: "french".into(),
        cost: CostCategory::High,
        rating: 4.6,
        opening_hours: OpeningHours::uniform(vec![Interval::new(720, 1440)]),
    };
    let travel = TravelTimeEstimator::default();

    let mut variants = vec![("aligned", aligned.clone())];
    let mut closed = aligned.clone();
    closed.opening_hours.mon = vec![Interval::new(720, 1200)];
    variants.push(("closes Monday 20:00", closed));
    let (lat, lon) = destination_point(&user.location, 90.0, 8.0);
    let mut far = aligned.clone();
    far.location = GeoPoint::new(lat, lon, "Lichtenberg, Berlin");
    variants.push(("8 km east", far));
    let mut cheap = aligned.clone();
    cheap.cost = CostCategory::Low;
    variants.push(("low cost", cheap));
    let mut thai = aligned.clone();
    thai.cuisine = "thai".into();
    variants.push(("thai", thai));
    let mut weak = aligned;
    weak.rating = 4.4;
    variants.push(("rated 4.4", weak));

    for (name, venue) in variants {
        let minutes = travel.estimate(&user.location, &venue.location).unwrap();
        let verdict = judge_pair(&user, &venue, &travel).unwrap();
        let label = verdict.as_label().map_or("several errors", |l| l.slug());
        println!("{name:<20} {minutes:>5.1} min  → {label}");
    }
}
