#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(records) = zplkit::io::parse_defect_records_jsonl(&text) {
        let emitted = zplkit::io::format_defect_records_jsonl(&records);
        let back = zplkit::io::parse_defect_records_jsonl(&emitted).expect("round trip");
        assert_eq!(records, back);
        if !records.is_empty() {
            let _ = zplkit::classify::survey_stats(&records, 5.0, 5.0);
        }
    }
});
