use std::path::Path;

use mortsim_core::data_io::Sex;
use mortsim_core::microsim::{pension_date, spa_at, SpaScheme, YearMonth};

#[derive(Debug, serde::Deserialize)]
struct Row {
    scheme: String,
    sex: String,
    birth: String,
    spa_years: u32,
    spa_months: u32,
    pension_date: String,
}

#[test]
fn every_scheme_matches_the_enumerated_timetable() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/spa_timetable.csv");
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let mut n = 0;
    for row in rdr.deserialize() {
        let row: Row = row.unwrap();
        let sex: Sex = row.sex.parse().unwrap();
        let birth: YearMonth = row.birth.parse().unwrap();
        let scheme: SpaScheme = row.scheme.parse().unwrap();
        let spa = spa_at(scheme, sex, birth);
        assert_eq!(
            (spa.whole_years(), spa.extra_months()),
            (row.spa_years, row.spa_months),
            "{scheme} {sex} born {birth}"
        );
        assert_eq!(
            pension_date(scheme, sex, birth).to_string(),
            row.pension_date
        );
        n += 1;
    }
    assert_eq!(n, 4 * 2 * 80 * 12);
}
