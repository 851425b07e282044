use mudp_cli::expr::{parse_init, ExprError};
use proptest::prelude::*;

fn token() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec![
        "x", "pi", "sin", "cos", "(", ")", "+", "-", "*", "2", "0.5", "1e-3", " ", "2*pi*x", "sin(", "cos(", "e", ".",
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,64}") {
        if let Err(e) = parse_init(&s) {
            prop_assert!(e.position() <= s.chars().count());
        }
    }

    #[test]
    fn token_soup_never_panics(parts in prop::collection::vec(token(), 0..40)) {
        let s = parts.concat();
        match parse_init(&s) {
            Ok(e) => {
                // accepted expressions are 1-periodic
                for x in [0.0, 0.123, 0.5, 0.77] {
                    let (a, b) = (e.tree.eval(x), e.tree.eval(x + 1.0));
                    prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{s}: {a} vs {b}");
                }
            }
            Err(e) => prop_assert!(e.position() <= s.chars().count()),
        }
    }

    #[test]
    fn integer_frequencies_are_accepted(k in -20i32..20, a in -2.0f64..2.0, phase in -3.0f64..3.0) {
        let s = format!("{a}*cos(2*pi*{k}*x + {phase})");
        prop_assert!(parse_init(&s).is_ok(), "{s}");
    }

    #[test]
    fn half_integer_frequencies_are_rejected(k in -20i32..20) {
        let s = format!("sin({}*pi*x)", 2 * k + 1);
        let rejected = matches!(parse_init(&s), Err(ExprError::NonPeriodic { .. }));
        prop_assert!(rejected, "{}", s);
    }
}
