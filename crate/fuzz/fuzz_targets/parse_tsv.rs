#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::lexicon::parse_category_tsv;

fuzz_target!(|data: &[u8]| {
    if let Ok(lex) = parse_category_tsv(data) {
        let again = parse_category_tsv(lex.to_tsv().as_bytes()).expect("re-parse of serialized lexicon");
        assert_eq!(again.to_tsv(), lex.to_tsv());
    }
});
