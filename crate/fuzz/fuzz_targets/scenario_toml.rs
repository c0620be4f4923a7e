#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(sc) = dcmg::parse_scenario(text) {
            // whatever parses must also survive a write/read cycle
            let again = dcmg::parse_scenario(&dcmg::to_toml(&sc)).expect("written scenario parses");
            assert_eq!(again, sc);
        }
    }
});
