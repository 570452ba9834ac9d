#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = selcert::format::parse_cover(text) {
            let again =
                selcert::format::parse_cover(&selcert::format::write_cover(&file.threshold, &file.cover)).unwrap();
            assert_eq!(again, file);
        }
    }
});
