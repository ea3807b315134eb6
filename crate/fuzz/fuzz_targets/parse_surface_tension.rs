#![no_main]

use grainflow::SurfaceTensionModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = s.parse::<SurfaceTensionModel>() {
            let back: SurfaceTensionModel = m.label().parse().expect("label must reparse");
            assert_eq!(back.sin_squared_params(), m.sin_squared_params());
        }
    }
});
