#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(log) = combom::campaign::parse_log(text) {
        if !log.is_empty() {
            // Parsed observations carry in-range finite objectives, so the
            // downstream geometry must hold up on any accepted log.
            let front = combom::core::pareto_front(&log).expect("non-empty log has a front");
            let ref_point = combom::mobo::RefPoint::default();
            let hv = combom::mobo::hypervolume_2d(&front.max_pairs(), &ref_point)
                .expect("front values are finite");
            assert!(hv.is_finite() && hv >= 0.0);
            let evolution = combom::campaign::hypervolume_evolution(&log, &ref_point)
                .expect("non-empty log evolves");
            for pair in evolution.windows(2) {
                assert!(pair[1].1 >= pair[0].1 - 1e-12, "evolution must be non-decreasing");
            }
        }
    }
});
