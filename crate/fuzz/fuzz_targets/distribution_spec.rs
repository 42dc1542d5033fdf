#![no_main]

use libfuzzer_sys::fuzz_target;
use tfm_lab_core::files::load_distribution;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(d) = load_distribution(text) {
            let (lo, hi) = d.support();
            assert!(lo <= hi);
            let _ = d.prob_at_least((lo + hi) / 2.0);
        }
    }
});
