#![no_main]
use libfuzzer_sys::fuzz_target;
use selcert::certificate::DeltaSmallCertificate;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cert) = DeltaSmallCertificate::from_text(text) {
            assert_eq!(DeltaSmallCertificate::from_text(&cert.to_text()).unwrap(), cert);
        }
    }
});
