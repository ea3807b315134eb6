#![no_main]

use grainflow::cli_io::Table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(t) = Table::parse(s) {
            assert!(t.rows.iter().all(|r| r.len() == t.columns.len()));
        }
    }
});
