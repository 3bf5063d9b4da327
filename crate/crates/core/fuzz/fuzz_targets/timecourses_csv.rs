// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]
use libfuzzer_sys::fuzz_target;
use statetrace::numerics::TimeCourses;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(u) = TimeCourses::from_csv_str("fuzz", text) {
        // Anything accepted must survive a write/read cycle unchanged.
        let again = TimeCourses::from_csv_str("fuzz", &u.to_csv_string()).unwrap();
        assert_eq!(u, again);
    }
});
