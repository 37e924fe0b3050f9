#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::table::read_delimited;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_delimited(data) {
        for row in &table.rows {
            assert_eq!(row.len(), table.header.len());
        }
    }
});
