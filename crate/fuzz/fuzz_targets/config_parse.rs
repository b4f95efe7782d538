#![no_main]

use libfuzzer_sys::fuzz_target;
use spacegauge::config::{Overrides, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(o) = Overrides::parse(text) {
        if let Ok(cfg) = RunConfig::resolve(Overrides::default(), Some(o)) {
            let back = Overrides::parse(&cfg.dump()).expect("dump parses");
            assert_eq!(RunConfig::resolve(Overrides::default(), Some(back)).unwrap().dump(), cfg.dump());
        }
    }
});
