use super::*;

#[test]
fn clean_build_passes_every_check() {
    for dtype in [DType::F64, DType::F32] {
        let results = run_all(&VerifyOptions {
            dtype,
            break_masking: false,
        })
        .unwrap();
        assert!(results.len() >= 10);
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
    }
}

#[test]
fn broken_masking_is_caught_by_the_causality_check() {
    let results = run_all(&VerifyOptions {
        dtype: DType::F64,
        break_masking: true,
    })
    .unwrap();
    let causality = results
        .iter()
        .find(|r| r.name.contains("masked class attention"))
        .unwrap();
    assert!(
        !causality.passed,
        "the fault hook must trip the causality check"
    );
    // the fault is injected into that one check only
    let others_fine = results
        .iter()
        .filter(|r| !r.name.contains("masked class attention"))
        .all(|r| r.passed);
    assert!(others_fine);
}
