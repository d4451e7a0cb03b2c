#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entry) = serde_json::from_str::<combom::llm::CacheEntry>(text) {
        // A parsed entry's key fields always digest.
        let _ = entry.key_fields.digest();
    }
});
