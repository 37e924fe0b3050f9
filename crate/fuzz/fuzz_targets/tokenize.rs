#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::lexicon::tokenize;

fuzz_target!(|text: &str| {
    let tokens = tokenize(text);
    // normalizing is idempotent
    let again = tokenize(&tokens.tokens().join(" "));
    assert_eq!(again.tokens(), tokens.tokens());
    assert!(tokens.tokens().iter().all(|t| !t.is_empty()));
});
