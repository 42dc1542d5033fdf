#![no_main]

use libfuzzer_sys::fuzz_target;
use tfm_lab_core::files::load_mechanism;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = load_mechanism(text) {
            assert_eq!(m.table().len(), m.profile_count());
        }
    }
});
