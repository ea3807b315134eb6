#![no_main]

use grainflow::cli_io::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = s.parse::<RunConfig>() {
            assert!(cfg.validate().is_ok());
        }
    }
});
