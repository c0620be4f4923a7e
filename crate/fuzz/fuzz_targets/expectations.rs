#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = dcmg::ExpectationTable::parse(text) {
            let _ = table.resolve(3);
            let _ = table.windows();
        }
    }
});
