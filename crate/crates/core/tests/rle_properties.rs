mod common;

use common::SHORTHAND_EXAMPLE;
use proptest::prelude::*;
use shmm_core::model::SymbolAlphabet;
use shmm_core::rle::{decode, efrd, encode, error_probability, parse_run_length_text, RleError};

/// Per-position count on the decoded string.
fn naive_efrd(s: &str) -> Option<Vec<f64>> {
    let b = s.as_bytes();
    let mut gaps = Vec::new();
    for t in 0..b.len().saturating_sub(1) {
        if b[t] == b'1' {
            gaps.push(b[t + 1..].iter().take_while(|&&c| c == b'0').count());
        }
    }
    if gaps.is_empty() {
        return None;
    }
    let m_max = *gaps.iter().max().unwrap();
    Some((0..=m_max).map(|m| gaps.iter().filter(|&&g| g >= m).count() as f64 / gaps.len() as f64).collect())
}

fn bursty_binary() -> impl Strategy<Value = String> {
    prop::collection::vec((any::<bool>(), 1usize..40), 1..200)
        .prop_map(|runs| runs.into_iter().map(|(e, n)| if e { "1" } else { "0" }.repeat(n)).collect())
}

proptest! {
    #[test]
    fn round_trip(s in "[01]{1,2000}") {
        let runs = encode(&s, &SymbolAlphabet::binary()).unwrap();
        prop_assert_eq!(decode(&runs), s.clone());
        prop_assert_eq!(runs.total_length(), s.len());
        for w in runs.runs().windows(2) {
            prop_assert_ne!(w[0].symbol, w[1].symbol);
        }
    }

    #[test]
    fn round_trip_ternary(s in "[abc]{1,500}") {
        let alphabet = SymbolAlphabet::new(vec!['a', 'b', 'c']).unwrap();
        let runs = encode(&s, &alphabet).unwrap();
        prop_assert_eq!(decode(&runs), s);
    }

    #[test]
    fn efrd_matches_naive_count(s in bursty_binary()) {
        let runs = encode(&s, &SymbolAlphabet::binary()).unwrap();
        match (efrd(&runs), naive_efrd(&s)) {
            (Ok(table), Some(expected)) => {
                prop_assert_eq!(&table.values, &expected);
                prop_assert_eq!(table.values[0], 1.0);
                for w in table.values.windows(2) {
                    prop_assert!(w[1] <= w[0]);
                }
                prop_assert!(table.values.iter().all(|v| (0.0..=1.0).contains(v)));
            }
            (Err(RleError::NoConditioningEvents), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn error_probability_survives_round_trip(s in bursty_binary()) {
        let runs = encode(&s, &SymbolAlphabet::binary()).unwrap();
        let again = encode(&decode(&runs), &SymbolAlphabet::binary()).unwrap();
        prop_assert_eq!(error_probability(&runs).unwrap(), error_probability(&again).unwrap());
        let ones = s.bytes().filter(|&c| c == b'1').count();
        prop_assert_eq!(error_probability(&runs).unwrap(), ones as f64 / s.len() as f64);
    }

    #[test]
    fn text_form_round_trip(s in bursty_binary()) {
        let runs = encode(&s, &SymbolAlphabet::binary()).unwrap();
        let parsed = parse_run_length_text(&runs.to_string(), &SymbolAlphabet::binary()).unwrap();
        prop_assert_eq!(parsed, runs);
    }
}

#[test]
fn shorthand_example() {
    let runs = encode(SHORTHAND_EXAMPLE, &SymbolAlphabet::binary()).unwrap();
    assert_eq!(runs.to_string(), "0^3 1^2 0^6 1^5 0^1 1^2 0^2 1^1 0^5 1^2 0^2 1^1 0^3");
    assert_eq!(decode(&runs), SHORTHAND_EXAMPLE);
    assert_eq!(naive_efrd(SHORTHAND_EXAMPLE).unwrap(), efrd(&runs).unwrap().values);
}

#[test]
fn unknown_symbol_position() {
    assert!(matches!(
        encode("0102", &SymbolAlphabet::binary()),
        Err(RleError::UnknownSymbol { position: 3, found: '2' })
    ));
}
