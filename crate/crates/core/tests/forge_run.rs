use std::collections::BTreeSet;

use hindman_core::extract::{extract_basis, verify_basis, BasisCheck, ExtractOptions};
use hindman_core::forge::{
    check_contracts, verify_claim_pair, verify_transcript, write_transcript, ClaimOutcome, Forge, ForgeConfig,
    OracleMode, TranscriptHeader, TypeOracle,
};
use hindman_core::formula::{formulas_up_to_size, Formula, Term, Var};
use hindman_core::spec::StructureSpec;
use hindman_core::Element;

fn x_atom(i: usize) -> Formula {
    Formula::atom(i, Term::var(Var::X))
}

/// Long enough for ψ rejections, so B and condition (4) are nontrivial.
#[test]
fn forty_stages_with_rejections() {
    let spec = StructureSpec::residue_family(4);
    let ctx = spec.build().unwrap();
    let forge = Forge::new(ctx.clone(), x_atom(0), ForgeConfig::default()).unwrap();
    let mut state = forge.init().unwrap();
    for _ in 0..40 {
        state = forge.advance(&state).unwrap();
        let rec = state.records.last().unwrap();
        let inv = rec.invariants.as_ref().unwrap();
        assert!(inv.all_pass(), "stage {}: {:?}", rec.stage, inv.failed());
        let Some(ClaimOutcome::Pair { u, v }) = rec.claim else { panic!("stage {}: no claim pair", rec.stage) };
        let a: Vec<Formula> = state.a_formulas().cloned().collect();
        assert!(verify_claim_pair(&ctx, &a, &state.b, u, v).unwrap());
    }
    assert!(state.j.len() >= 3, "J = {:?}", state.j);
    assert_eq!(state.b.len(), state.j.len());

    // every rejected ψ_j(u, ·) misses X's idempotent class for all u in a window
    for &j in &state.j {
        let psi = forge.psi(j);
        for u in 0..16u64 {
            let all = (0..64u64).step_by(4).all(|y| ctx.eval(&psi, Some(Element(u)), Some(Element(y))).unwrap());
            assert!(!all, "ψ_{j}({u}, ·) holds on the whole class");
        }
    }

    let header = TranscriptHeader::new(spec, &ctx, &x_atom(0), forge.config(), 40);
    let text = write_transcript(&header, &ctx, &state.records).unwrap();
    let (_, replayed, report) = verify_transcript(&text).unwrap();
    assert!(report.ok, "{:?}", report.failures);
    assert_eq!(replayed.j, state.j);
}

#[test]
fn completion_contracts_and_extraction() {
    let ctx = StructureSpec::residue_family(3).build().unwrap();
    let forge = Forge::new(ctx.clone(), x_atom(0), ForgeConfig { skip_identity: true, ..Default::default() }).unwrap();
    let state = forge.run(30).unwrap();
    let completion = forge.completion(&state).unwrap();
    let fs = formulas_up_to_size(3, 3, 9);
    let report = check_contracts(&ctx, &completion, &fs).unwrap();
    assert!(report.ok(), "{:?}", &report.violations[..report.violations.len().min(5)]);

    let r = extract_basis(&ctx, &completion, &x_atom(0), None, 6, ExtractOptions { distinct: true }).unwrap();
    assert!(r.verified);
    assert_eq!(r.basis, [3, 6, 9, 12, 15, 18].map(Element));
    assert_eq!(verify_basis(&ctx, &r.basis, &x_atom(0)).unwrap(), BasisCheck::Ok);
}

#[test]
fn bounded_forge_agrees_with_exact_on_positive_decisions() {
    let ctx = StructureSpec::residue_family(3).build().unwrap();
    let exact = Forge::new(ctx.clone(), x_atom(0), ForgeConfig::default()).unwrap().run(10).unwrap();
    let cfg = ForgeConfig { mode: OracleMode::Bounded { k: 3, n: 30 }, ..Default::default() };
    let bounded = Forge::new(ctx.clone(), x_atom(0), cfg).unwrap().run(10).unwrap();
    let a_exact: BTreeSet<_> = exact.a_formulas().collect();
    let a_bounded: BTreeSet<_> = bounded.a_formulas().collect();
    // residue classes mod 3 are decided the same way at these bounds
    assert_eq!(a_exact, a_bounded);
    for rec in &bounded.records {
        assert!(rec.invariants.as_ref().unwrap().all_pass());
    }
}

#[test]
fn forge_oracle_answers_match_completion() {
    let ctx = StructureSpec::residue_family(4).build().unwrap();
    let forge = Forge::new(ctx.clone(), x_atom(0), ForgeConfig::default()).unwrap();
    let state = forge.run(24).unwrap();
    let oracle = forge.oracle(&state);
    let completion = forge.completion(&state).unwrap();
    let mut decided = 0;
    for f in formulas_up_to_size(4, 4, 8) {
        if let Some(v) = oracle.decide(&f).unwrap() {
            decided += 1;
            assert_eq!(completion.query(&f).unwrap(), v, "{}", ctx.render(&f));
        }
    }
    assert!(decided > 100);
}
