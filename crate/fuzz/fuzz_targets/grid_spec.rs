#![no_main]

use libfuzzer_sys::fuzz_target;
use tfm_lab_core::files::parse_grid_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = parse_grid_spec(text) {
            assert!(g.len() >= 2);
        }
    }
});
