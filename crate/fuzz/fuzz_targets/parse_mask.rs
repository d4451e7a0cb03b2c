#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mask) = combom::core::SubsetMask::from_bitstring(text) {
        assert_eq!(mask.to_bitstring(), text, "bitstring round trip");
        assert!(mask.dim() >= 1);
    }
});
