#![no_main]

use libfuzzer_sys::fuzz_target;
use tfm_lab_core::files::parse_levels;
use tfm_lab_core::mechanism::BidGrid;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(levels) = parse_levels(text) {
            let _ = BidGrid::new(levels);
        }
    }
});
