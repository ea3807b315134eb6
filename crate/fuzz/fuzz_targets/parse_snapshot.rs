#![no_main]

use grainflow::network_sim::GrainNetwork;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(net) = s.parse::<GrainNetwork>() {
            let _ = net.validate();
            let again: GrainNetwork = net.to_snapshot().parse().expect("snapshot must reparse");
            assert_eq!(again, net);
        }
    }
});
