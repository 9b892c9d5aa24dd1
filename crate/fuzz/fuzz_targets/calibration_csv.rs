#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(measurements) = zplkit::io::parse_calibration_measurements_csv(&text) {
        // building a map from arbitrary accepted measurements must not panic
        let _ = zplkit::polarfit::build_calibration(&measurements);
    }
});
