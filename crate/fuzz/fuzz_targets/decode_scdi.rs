#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::CategoryDictionary;

fuzz_target!(|data: &[u8]| {
    if let Ok(dict) = CategoryDictionary::from_bytes(data) {
        assert_eq!(
            CategoryDictionary::from_bytes(&dict.to_bytes()).expect("re-decode"),
            dict
        );
    }
});
