#![no_main]

use libfuzzer_sys::fuzz_target;
use spacegauge::runner::read_results;
use spacegauge::scoring::SampleResult;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        let _ = SampleResult::from_json_line(line);
    }
    let _ = read_results(data);
});
