#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Total over arbitrary completion text: never panics, always returns a
    // label.
    let text = String::from_utf8_lossy(data);
    let _ = combom::llm::extract_answer(&text);
});
