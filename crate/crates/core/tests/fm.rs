use seqmod::harness::fm::{round_trip_suite, sat_suite};

#[test]
fn elimination_round_trip_has_no_failures() {
    let r = round_trip_suite(1000, 11);
    assert!(r.passed(), "{:#?}", &r.failures[..r.failures.len().min(5)]);
    assert!(
        r.satisfiable > 100,
        "too few satisfiable cases: {}",
        r.satisfiable
    );
}

#[test]
fn satisfiability_matches_point_tests() {
    let r = sat_suite(500, 12);
    assert!(r.passed(), "{:#?}", &r.failures[..r.failures.len().min(5)]);
    assert!(
        r.satisfiable > 50 && r.satisfiable < 450,
        "unbalanced sample: {}",
        r.satisfiable
    );
}
