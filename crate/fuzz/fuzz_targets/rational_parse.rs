#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Some(v) = selcert::rational::parse(text) {
            assert_eq!(selcert::rational::parse(&selcert::rational::fmt(&v)), Some(v));
        }
    }
});
