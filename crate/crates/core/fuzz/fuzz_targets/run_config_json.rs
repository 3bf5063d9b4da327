// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]
use libfuzzer_sys::fuzz_target;
use statetrace::cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(mut cfg) = RunConfig::from_json(text) {
        cfg.apply_master_seed();
        let _ = cfg.detection.resolve();
        let _ = cfg.train.shape();
    }
});
