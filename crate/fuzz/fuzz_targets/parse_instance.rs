#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(inst) = selcert::format::parse_instance(text) {
            let again = selcert::format::parse_instance(&selcert::format::write_instance(&inst)).unwrap();
            assert_eq!(again, inst);
        }
    }
});
