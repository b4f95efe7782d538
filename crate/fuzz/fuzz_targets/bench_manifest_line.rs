#![no_main]

use libfuzzer_sys::fuzz_target;
use spacegauge::bench::{read_manifest, BenchmarkSample};

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        let _ = BenchmarkSample::from_json_line(line);
    }
    let _ = read_manifest(data);
});
