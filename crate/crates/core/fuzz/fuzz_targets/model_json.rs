// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]
use libfuzzer_sys::fuzz_target;
use statetrace::forecaster::{model_from_json, model_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = model_from_json(text) {
        let again = model_from_json(&model_to_json(&model).unwrap()).unwrap();
        assert_eq!(model, again);
    }
});
