#![no_main]

use lattice_ym::record::{parse_record, to_line};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rec) = parse_record(line) {
        let text = to_line(&rec).expect("parsed records serialise");
        assert_eq!(parse_record(&text).expect("serialised records parse"), rec);
    }
});
