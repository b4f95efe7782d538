#![no_main]

use libfuzzer_sys::fuzz_target;
use spacegauge::perception::PerceptionRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = PerceptionRecord::from_json(data) {
        let once = rec.to_canonical_json();
        let again = PerceptionRecord::from_json(once.as_bytes()).expect("canonical output parses");
        assert_eq!(again.to_canonical_json(), once);
    }
});
