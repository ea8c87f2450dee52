//! CodeBLEU properties over the corpus programs with random weights.

use std::path::PathBuf;
use std::sync::OnceLock;

use proptest::prelude::*;
use sage_core::dsl::AbmProgram;
use sage_core::eval::{codebleu, load_corpus, CodeBleuWeights};

fn programs() -> &'static [AbmProgram] {
    static PROGRAMS: OnceLock<Vec<AbmProgram>> = OnceLock::new();
    PROGRAMS.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
        load_corpus(&dir).unwrap().into_iter().map(|s| s.reference).collect()
    })
}

fn weights() -> impl Strategy<Value = [f64; 4]> {
    proptest::array::uniform4(0.01f64..1.0).prop_map(|w| {
        let sum: f64 = w.iter().sum();
        w.map(|x| x / sum)
    })
}

fn make(w: [f64; 4]) -> CodeBleuWeights {
    // Renormalizing can leave the sum a few ulps away from one.
    let last = 1.0 - w[0] - w[1] - w[2];
    CodeBleuWeights::new(w[0], w[1], w[2], last).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn self_score_is_one_for_any_weights(w in weights(), i in 0usize..6) {
        let p = &programs()[i];
        let s = codebleu(p, p, make(w)).unwrap();
        prop_assert!((s.total - 1.0).abs() <= 1e-12, "{}", s.total);
    }

    #[test]
    fn raising_the_largest_component_never_lowers_total(w in weights(), a in 0usize..6, b in 0usize..6, delta in 0.01f64..2.0) {
        let ps = programs();
        let base = codebleu(&ps[a], &ps[b], make(w)).unwrap();
        let components = [base.ngram, base.weighted_ngram, base.ast_match, base.dataflow_match];
        let top = (0..4).max_by(|&x, &y| components[x].total_cmp(&components[y])).unwrap();
        let mut raised = w;
        raised[top] += delta;
        let sum: f64 = raised.iter().sum();
        let raised = raised.map(|x| x / sum);
        let after = codebleu(&ps[a], &ps[b], make(raised)).unwrap();
        prop_assert!(after.total >= base.total - 1e-12, "{} -> {}", base.total, after.total);
    }
}
