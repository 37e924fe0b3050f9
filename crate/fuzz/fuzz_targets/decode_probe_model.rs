#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::probe::ProbeModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = ProbeModel::from_bytes(data) {
        let bytes = model.to_bytes();
        assert_eq!(ProbeModel::from_bytes(&bytes).expect("re-decode").to_bytes(), bytes);
    }
});
