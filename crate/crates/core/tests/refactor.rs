use fortstream::eval::{run_program, EvalConfig};
use fortstream::frontend::{link, parse_free_source, parse_source, Decl, Intent, LinkError, ProgramAst, StmtKind};
use fortstream::refactor::{emit_f95, normalize_loops, refactor, RefactorReport};
use fortstream::sw::corpus;

fn program(src: &str) -> ProgramAst {
    link(parse_source(src, "t.f").unwrap()).unwrap()
}

fn small() -> EvalConfig {
    EvalConfig::with_params(&[("nx", 16), ("ny", 16), ("nt", 20)])
}

fn refactored_corpus() -> (ProgramAst, RefactorReport) {
    refactor(&corpus::program()).unwrap()
}

#[test]
fn corpus_loses_every_common_statement() {
    let (p, _) = refactored_corpus();
    for u in &p.units {
        assert!(!u.has_common(), "{}", u.name);
        assert!(u.implicit_none(), "{}", u.name);
    }
    for (_, text) in emit_f95(&p) {
        assert!(!text.contains("common"));
        assert!(text.contains("implicit none"));
    }
}

#[test]
fn every_dummy_carries_an_intent() {
    let (p, report) = refactored_corpus();
    for u in &p.units {
        for a in &u.args {
            let has = u.decls.iter().any(|d| matches!(d, Decl::Var(v) if &v.name == a && v.intent.is_some()));
            assert!(has, "{}::{a}", u.name);
            assert!(report.intents_inferred[&u.name].contains_key(a));
        }
    }
}

#[test]
fn corpus_intents() {
    let (_, r) = refactored_corpus();
    let dyn_ = &r.intents_inferred["dyn"];
    assert_eq!(dyn_["eta"], Intent::In);
    assert_eq!(dyn_["un"], Intent::Out);
    assert_eq!(dyn_["vn"], Intent::Out);
    assert_eq!(dyn_["etan"], Intent::Out);
    let sh = &r.intents_inferred["shapiro"];
    assert_eq!(sh["etan"], Intent::In);
    assert_eq!(sh["eta"], Intent::Out);
    let up = &r.intents_inferred["update"];
    assert_eq!(up["h0"], Intent::In);
    assert_eq!(up["wet"], Intent::Out);
}

#[test]
fn refactoring_preserves_outputs_bit_exactly() {
    let orig = corpus::program();
    let (p, _) = refactor(&orig).unwrap();
    let a = run_program(&orig, &small()).unwrap();
    let b = run_program(&p, &small()).unwrap();
    for name in ["eta", "u", "v", "h", "wet", "etasum"] {
        assert_eq!(a.vars[name], b.vars[name], "{name}");
    }
}

#[test]
fn intents_are_sound_under_tracing() {
    let (p, r) = refactored_corpus();
    let cfg = EvalConfig { trace_args: true, ..small() };
    let out = run_program(&p, &cfg).unwrap();
    assert!(!out.arg_traces.is_empty());
    for t in &out.arg_traces {
        match r.intents_inferred[&t.unit][&t.arg] {
            Intent::In => assert!(!t.written, "{}::{} written", t.unit, t.arg),
            Intent::Out => assert!(!t.read_before_write, "{}::{} read first", t.unit, t.arg),
            Intent::InOut => {}
        }
    }
}

#[test]
fn pipeline_is_idempotent() {
    let (once, _) = refactored_corpus();
    let (twice, _) = refactor(&once).unwrap();
    assert_eq!(once.units, twice.units);
}

#[test]
fn output_is_deterministic_and_reparses() {
    let (p, _) = refactored_corpus();
    let a = emit_f95(&p);
    let b = emit_f95(&refactored_corpus().0);
    assert_eq!(a, b);
    for (path, text) in &a {
        let units = parse_free_source(text, path).unwrap();
        for u in units {
            let mut orig = p.unit(&u.name).unwrap().clone();
            orig.path = path.clone();
            assert_eq!(u, orig);
        }
    }
}

#[test]
fn common_used_two_levels_down_threads_through() {
    let src = "
      program p
      common /blk/ a, b
      a = 1.0
      call mid
      end
      subroutine mid
      call leaf
      end
      subroutine leaf
      common /blk/ x, y
      y = 2.0
      end
";
    let (p, r) = refactor(&program(src)).unwrap();
    assert_eq!(p.unit("mid").unwrap().args, ["b"]);
    assert_eq!(p.unit("leaf").unwrap().args, ["y"]);
    assert_eq!(r.common_vars_promoted["blk"]["mid"], ["b"]);
    // `x` is never touched by leaf
    assert!(r.common_vars_dropped.iter().any(|d| d.unit == "leaf" && d.name == "x"));
    let StmtKind::Call { args, .. } = &p.unit("p").unwrap().body[1].kind else { panic!() };
    assert_eq!(args.len(), 1);
    let before = run_program(&program(src), &EvalConfig::default()).unwrap();
    let after = run_program(&p, &EvalConfig::default()).unwrap();
    assert_eq!(before.vars["b"], after.vars["b"]);
}

#[test]
fn promoted_name_clash_is_renamed() {
    let src = "
      program p
      common /c/ t
      t = 1.0
      call mid
      end
      subroutine mid
      t = 5.0
      call leaf
      end
      subroutine leaf
      common /c/ t
      t = t + 1.0
      end
";
    let (p, r) = refactor(&program(src)).unwrap();
    assert_eq!(p.unit("mid").unwrap().args, ["t_cmn_c"]);
    assert_eq!(r.renamed.len(), 1);
    let before = run_program(&program(src), &EvalConfig::default()).unwrap();
    let after = run_program(&p, &EvalConfig::default()).unwrap();
    assert_eq!(before.vars["t"], after.vars["t"]);
}

#[test]
fn implicit_types_follow_the_first_letter_rule() {
    let src = "
      program p
      do 10 j = 1, 3
        eta = j
   10 continue
      end
";
    let (p, r) = refactor(&program(src)).unwrap();
    let find = |n: &str| r.implicit_decls.iter().find(|d| d.name == n).unwrap().ty;
    assert_eq!(find("j"), fortstream::frontend::BaseType::Integer);
    assert_eq!(find("eta"), fortstream::frontend::BaseType::Real);
    assert_eq!(r.implicit_decls_added, r.implicit_decls.len());
    assert!(p.main().implicit_none());
}

#[test]
fn undeclared_name_under_implicit_none_is_rejected() {
    let src = "      program p\n      implicit none\n      k = 1\n      end\n";
    let err = link(parse_source(src, "t.f").unwrap()).unwrap_err();
    assert!(matches!(err, LinkError::Undeclared { ref name, .. } if name == "k"));
}

#[test]
fn loops_become_structured_and_keep_their_step() {
    let src = "
      program p
      real a(5, 5)
      do 20 k = 5, 1, -1
      do 20 j = 1, 5
        a(j, k) = 1.0
   20 continue
      end
";
    let (p, n) = normalize_loops(&program(src));
    assert_eq!(n, 2);
    let StmtKind::Do(outer) = &p.main().body[0].kind else { panic!() };
    assert!(outer.term_label.is_none());
    assert!(outer.step.is_some());
    let StmtKind::Do(inner) = &outer.body[0].kind else { panic!() };
    assert_eq!(inner.body.len(), 1);
}

#[test]
fn branch_read_and_write_gives_inout() {
    let src = "
      program p
      real a
      logical f
      call s(a, f)
      end
      subroutine s(x, flag)
      real x
      logical flag
      if (flag) then
        x = 1.0
      else
        y = x
      end if
      end
";
    let (_, r) = refactor(&program(src)).unwrap();
    assert_eq!(r.intents_inferred["s"]["x"], Intent::InOut);
    assert_eq!(r.intents_inferred["s"]["flag"], Intent::In);
}

#[test]
fn unreferenced_unit_gets_a_module_but_no_use() {
    let src = "
      program p
      x = 1.0
      end
      subroutine lonely
      end
";
    let (p, r) = refactor(&program(src)).unwrap();
    assert_eq!(r.modules, ["module_lonely"]);
    assert!(p.main().uses.is_empty());
}
