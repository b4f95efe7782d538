#![no_main]

use libfuzzer_sys::fuzz_target;
use spacegauge::perception::RleMask;

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let (w, h) = (data[0] as u32, data[1] as u32);
    let counts: Vec<u32> = data[2..].chunks(2).map(|c| c.iter().fold(0u32, |a, &b| a << 8 | b as u32)).collect();
    if let Ok(mask) = RleMask::new(w, h, counts) {
        let fg = mask.decode();
        assert_eq!(fg.len() as u64, mask.area());
        assert!(fg.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(RleMask::encode(w, h, &mask.to_bitmap()), mask);
    }
});
