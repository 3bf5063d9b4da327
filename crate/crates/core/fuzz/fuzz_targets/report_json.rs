// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]
use libfuzzer_sys::fuzz_target;
use statetrace::detector::ChangePointReport;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = ChangePointReport::from_json(text) {
            let _ = r.scan_len();
        }
    }
});
