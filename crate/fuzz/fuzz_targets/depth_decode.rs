#![no_main]

use libfuzzer_sys::fuzz_target;
use spacegauge::perception::DepthMap;

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let (w, h) = (data[0] as u32, data[1] as u32);
    if let Ok(depth) = DepthMap::from_le_bytes(w, h, &data[2..]) {
        assert_eq!(depth.values.len(), (w * h) as usize);
        assert_eq!(depth.to_le_bytes(), &data[2..]);
    }
});
