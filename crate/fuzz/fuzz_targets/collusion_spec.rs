#![no_main]

use libfuzzer_sys::fuzz_target;
use tfm_lab_core::files::{load_collusion, load_mechanism};

// Collusions are parsed against a one-slot and a two-slot mechanism.
const MECHANISMS: [&str; 2] = [
    r#"{"kind":"builtin","name":"posted_price","params":{"price":3,"burn":1},"grid":[0,1,2,3,5,10,20],"n_max":1}"#,
    r#"{"kind":"builtin","name":"second_price","grid":[0,1,2,3,4],"n_max":3}"#,
];

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for spec in MECHANISMS {
            let m = load_mechanism(spec).unwrap();
            if let Ok(col) = load_collusion(text, &m) {
                assert!(col.budget_imbalance() <= 1e-12);
            }
        }
    }
});
