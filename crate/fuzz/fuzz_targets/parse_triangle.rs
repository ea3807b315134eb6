#![no_main]

use grainflow::AnchorTriangle;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(t) = s.parse::<AnchorTriangle>() {
            let back: AnchorTriangle = t.to_string().parse().expect("triangle must reparse");
            assert_eq!(back, t);
        }
    }
});
