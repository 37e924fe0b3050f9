#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::EmbeddingStore;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = EmbeddingStore::from_bytes(data) {
        assert_eq!(EmbeddingStore::from_bytes(&store.to_bytes()).expect("re-decode"), store);
    }
});
