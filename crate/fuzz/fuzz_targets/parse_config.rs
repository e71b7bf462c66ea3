#![no_main]

use lattice_ym::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        // anything accepted must survive its own canonical form
        let again = parse_config(&cfg.to_toml()).expect("canonical TOML parses");
        assert_eq!(again, cfg);
    }
});
