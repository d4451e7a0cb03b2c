#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Malformed JSONL datasets must error cleanly, never panic.
    if let Ok(instances) = combom::llm::parse_instances(text) {
        for inst in &instances {
            // Parsed records always satisfy their own validation.
            inst.validate().expect("parsed instance re-validates");
        }
    }
});
