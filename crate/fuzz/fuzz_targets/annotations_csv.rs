#![no_main]

use libfuzzer_sys::fuzz_target;
use spacegauge::alignment::{read_labels, write_labels};

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = read_labels(data) {
        let mut buf = Vec::new();
        write_labels(&labels, &mut buf).unwrap();
        assert_eq!(read_labels(buf.as_slice()).unwrap(), labels);
    }
});
