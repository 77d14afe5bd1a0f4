#![no_main]

use bandlab::dump::{decode_dump, encode_dump};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = decode_dump(data) {
        let bytes = encode_dump(&d).unwrap();
        let again = encode_dump(&decode_dump(&bytes).unwrap()).unwrap();
        assert_eq!(bytes, again);
    }
});
