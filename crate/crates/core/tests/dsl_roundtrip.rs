//! Canonical-form round trip over a corpus of 50 programs: parse, print,
//! reparse, and require the printed form to be a fixed point.

use glf_calculus::dsl::{parse, print_program};

fn corpus() -> Vec<String> {
    let header = "irrational sqrt2 = quadratic(2);\nirrational sqrt3 = quadratic(3);\n";
    let exprs = [
        "floor(sqrt2*x)",
        "frac(sqrt3*x + 1/3)",
        "floor(sqrt2*x + 1/3) + 2*x",
        "frac(2*frac(sqrt2*x))",
        "3/2*frac(sqrt2*x) - frac(sqrt3*x)",
        "floor(sqrt2*floor(sqrt3*x))",
        "frac(sqrt2*frac(sqrt3*x + 1/5) + x)",
        "x + 7",
        "frac(x + 0*x) + floor(sqrt2*x)*0 + frac(sqrt2*x)",
        "floor(3*x + 1/2)",
    ];
    let mut out = Vec::new();
    // expression bindings
    for (i, e) in exprs.iter().enumerate() {
        out.push(format!("{header}let e{i} = {e};\n"));
    }
    // decompose / rep / limit / density / gowers experiments
    for (i, e) in exprs.iter().enumerate() {
        out.push(format!(
            "{header}experiment d{i} {{\n  decompose {e};\n}}\n"
        ));
        out.push(format!(
            "{header}experiment l{i} {{\n  limit beta = 1/2 of {e};\n  n = 1000;\n}}\n"
        ));
        out.push(format!(
            "{header}experiment g{i} {{\n  gowers k = 2 N = 8 of {e};\n}}\n"
        ));
    }
    // systems with check-joint and prime-avg commands
    for i in 0..8 {
        out.push(format!(
            "{header}system s{i} {{\n  torus dim 1;\n  T: alpha = sqrt2;\n  U: alpha = sqrt3;\n}}\n\
             experiment jc{i} {{\n  check-joint s{i} (T^(x), U^({}*x));\n  n = 100;\n  chars = [(1 | 1), (2 | -1)];\n}}\n",
            i + 1
        ));
    }
    out.push(format!(
        "{header}system cy {{\n  cyclic mod 2;\n  F: shift = 1;\n}}\n\
         experiment pa {{\n  prime-avg cy (F^(x), F^(floor(sqrt2*x)));\n  n = 500;\n}}\n"
    ));
    out.push(format!(
        "{header}system cat {{\n  automorphism dim 2;\n  A: matrix = [2, 1; 1, 1];\n}}\n\
         experiment jc_cat {{\n  check-joint cat (A^(floor(sqrt2*x)), A^(floor(sqrt3*x)));\n  n = 200;\n}}\n"
    ));
    out.push(format!(
        "{header}experiment dens {{\n  density of frac(sqrt2*x) in [0, 1/2);\n  n = 1000;\n}}\nexperiment fin {{\n  report;\n}}\n"
    ));
    out.push("irrational xi = custom;\nirrational eta = custom;\nrule xi*eta = 2 + 1/3;\nlet e = frac(xi*x + eta);\n".to_string())
    ;
    out
}

#[test]
fn canonical_print_round_trips() {
    let corpus = corpus();
    assert!(corpus.len() >= 50, "corpus has {} programs", corpus.len());
    for (i, src) in corpus.iter().enumerate() {
        let p = parse(src).unwrap_or_else(|e| panic!("program {i} failed to parse: {e}\n{src}"));
        let printed = print_program(&p);
        let p2 = parse(&printed)
            .unwrap_or_else(|e| panic!("program {i} reprint failed to parse: {e}\n{printed}"));
        let printed2 = print_program(&p2);
        assert_eq!(
            printed, printed2,
            "program {i}: canonical printing is not a fixed point"
        );
        // structural spot checks survive the round trip
        assert_eq!(p.bindings.len(), p2.bindings.len());
        assert_eq!(p.systems.len(), p2.systems.len());
        assert_eq!(p.experiments.len(), p2.experiments.len());
    }
}
