use std::collections::BTreeSet;

use fortstream::analysis::*;
use fortstream::eval::{run_program, EvalConfig};
use fortstream::frontend::{link, parse_free_source, Expr, ProgramAst, StmtKind};
use fortstream::refactor::refactor;
use proptest::prelude::*;
use fortstream::sw::corpus;

fn free(src: &str) -> ProgramAst {
    link(parse_free_source(src, "t.f90").unwrap()).unwrap()
}

fn corpus_ir() -> FunctionalIr {
    let (p, _) = refactor(&corpus::program()).unwrap();
    build_ir(&p).unwrap()
}

fn five_point() -> Vec<Vec<i32>> {
    vec![vec![-1, 0], vec![0, -1], vec![0, 0], vec![0, 1], vec![1, 0]]
}

#[test]
fn corpus_step_is_three_maps_in_a_chain() {
    let ir = corpus_ir();
    let names: Vec<&str> = ir.nodes.iter().map(|n| n.name.as_str()).collect();
    assert_eq!(names, ["dyn", "shapiro", "update"]);
    assert!(ir.nodes.iter().all(|n| n.kind_name() == "map"));
    let has = |f: &str, t: &str, a: &str| {
        ir.edges.iter().any(|e| ir.nodes[e.from].name == f && ir.nodes[e.to].name == t && e.array == a)
    };
    assert!(has("dyn", "shapiro", "etan"));
    assert!(has("shapiro", "update", "eta"));
    let dyn_ = ir.node("dyn").unwrap();
    let eta = dyn_.inputs().iter().find(|s| s.array == "eta").unwrap();
    assert_eq!(eta.offsets, five_point());
    let sh = ir.node("shapiro").unwrap();
    assert!(sh.inputs().iter().all(|s| s.offsets == five_point()));
    let up = ir.node("update").unwrap();
    assert!(up.inputs().iter().all(|s| !s.is_stenciled()));
    assert!(ir.host.reads_after.contains("eta"));
}

#[test]
fn default_rules_leave_the_corpus_alone() {
    let ir = corpus_ir();
    let (out, log) = rewrite_ir(&ir, &RewriteRules::default());
    assert_eq!(out.nodes.len(), 3);
    assert!(log.fused.is_empty());
}

#[test]
fn corpus_ir_matches_golden_dump() {
    let text = serde_json::to_string_pretty(&ir_to_json(&corpus_ir())).unwrap() + "\n";
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/sw2d_ir.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(path, &text).unwrap();
    }
    let want = std::fs::read_to_string(path).expect("golden file; rerun with UPDATE_GOLDEN=1");
    assert_eq!(text, want);
}

#[test]
fn ir_evaluation_matches_the_interpreter() {
    let cfg = EvalConfig::with_params(&[("nx", 12), ("ny", 9), ("nt", 7)]);
    for p in [corpus::program(), refactor(&corpus::program()).unwrap().0] {
        let ir = build_ir(&p).unwrap();
        let a = run_program(&p, &cfg).unwrap();
        let b = run_ir(&p, &ir, &cfg).unwrap();
        for (k, v) in &a.vars {
            assert_eq!(Some(v), b.vars.get(k), "{k}");
        }
    }
}

fn nest_of(src: &str) -> Nest {
    let p = free(src);
    let stmt = p.main().body.iter().find(|s| matches!(s.kind, StmtKind::Do(_))).unwrap();
    extract_nest(stmt).unwrap()
}

fn classify(src: &str) -> LoopClass {
    let p = free(src);
    let arrays: BTreeSet<String> =
        p.symbols_of("t").symbols.iter().filter(|s| s.is_array()).map(|s| s.name.clone()).collect();
    classify_loop_nest(&nest_of(src), &arrays).class
}

#[test]
fn five_point_update_is_a_map() {
    let src = "program t
  real :: eta(0:9,0:9), etan(0:9,0:9), u(0:9,0:9), v(0:9,0:9)
  do j = 1, 8
    do k = 1, 8
      etan(j,k) = eta(j-1,k) + eta(j+1,k) + eta(j,k-1) + eta(j,k+1) + u(j,k) * v(j,k)
    end do
  end do
end program t
";
    assert_eq!(classify(src), LoopClass::Map);
    let p = free(src);
    let arrays = ["eta", "etan", "u", "v"].iter().map(|s| s.to_string()).collect();
    let c = classify_loop_nest(&nest_of(src), &arrays);
    let eta: Vec<_> = c.accesses.iter().filter(|a| a.array == "eta").map(|a| a.offsets.clone()).collect();
    assert_eq!(eta, vec![vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]);
    drop(p);
}

#[test]
fn running_sum_is_a_fold() {
    let src = "program t
  real :: eta(0:9,0:9)
  s = 0.0
  do j = 1, 8
    do k = 1, 8
      s = s + eta(j,k)
    end do
  end do
end program t
";
    assert_eq!(classify(src), LoopClass::Fold { acc: "s".into(), op: FoldOp::Add });
}

#[test]
fn recurrence_is_sequential() {
    let src = "program t
  real :: a(10)
  do j = 2, 10
    a(j) = a(j-1) + 1
  end do
end program t
";
    assert_eq!(classify(src), LoopClass::Sequential("a carried at offset -1".into()));
}

#[test]
fn classification_is_deterministic() {
    let src = "program t
  real :: a(10), b(10)
  do j = 2, 9
    t1 = a(j+1)
    b(j) = t1 * a(j-1)
  end do
end program t
";
    let first = classify(src);
    for _ in 0..5 {
        assert_eq!(classify(src), first);
    }
    assert_eq!(first, LoopClass::Map);
}

#[test]
fn empty_program_gives_an_empty_graph() {
    let ir = build_ir(&free("program t\nend program t\n")).unwrap();
    assert!(ir.nodes.is_empty());
    assert!(ir.edges.is_empty());
}

#[test]
fn sequential_nest_keeps_its_place_between_maps() {
    let src = "program t
  real :: a(10), b(10), c(10)
  do j = 1, 10
    a(j) = j
  end do
  do j = 2, 10
    a(j) = a(j-1) + a(j)
  end do
  do j = 1, 10
    c(j) = a(j) * 2.0
  end do
end program t
";
    let ir = build_ir(&free(src)).unwrap();
    let kinds: Vec<&str> = ir.nodes.iter().map(|n| n.kind_name()).collect();
    assert_eq!(kinds, ["map", "seq", "map"]);
    assert!(ir.edges.iter().any(|e| e.from == 0 && e.to == 1));
    assert!(ir.edges.iter().any(|e| e.from == 1 && e.to == 2));
}

#[test]
fn private_scalar_read_after_the_nest_forces_seq() {
    let src = "program t
  real :: a(10), b(10)
  do j = 1, 10
    x = a(j)
    b(j) = x
  end do
  y = x
end program t
";
    let ir = build_ir(&free(src)).unwrap();
    assert_eq!(ir.nodes[0].kind_name(), "seq");
}

#[test]
fn mismatched_argument_type_is_rejected() {
    let src = "program t
  integer :: a(4)
  do n = 1, 2
    call s(a)
  end do
end program t
subroutine s(x)
  real :: x(4)
  do j = 1, 4
    x(j) = 1.0
  end do
end subroutine s
";
    let err = build_ir(&free(src)).unwrap_err();
    assert!(matches!(err, AnalysisError::IrTypeMismatch { ref array, .. } if array == "a"));
}

/// Every map nest of the corpus gives the same result with its
/// iterations run backwards.
#[test]
fn corpus_maps_are_order_independent() {
    let p = corpus::program();
    let ir = build_ir(&p).unwrap();
    assert!(ir.nodes.iter().all(|n| n.kind_name() == "map"));
    let mut rev = p.clone();
    let arrays: BTreeSet<String> = ir.arrays.keys().cloned().collect();
    let mut reversed = 0;
    for u in rev.units.iter_mut().filter(|u| u.name != p.program) {
        for s in u.body.iter_mut() {
            if !matches!(s.kind, StmtKind::Do(_)) {
                continue;
            }
            let nest = extract_nest(s).unwrap();
            if classify_loop_nest(&nest, &arrays).class != LoopClass::Map {
                continue;
            }
            s.visit_mut(&mut |st| {
                if let StmtKind::Do(d) = &mut st.kind {
                    std::mem::swap(&mut d.start, &mut d.end);
                    d.step = Some(Expr::Int(-1));
                }
            });
            reversed += 1;
        }
    }
    assert_eq!(reversed, 3);
    let cfg = EvalConfig::with_params(&[("nx", 16), ("ny", 16), ("nt", 5)]);
    let a = run_program(&p, &cfg).unwrap();
    let b = run_program(&rev, &cfg).unwrap();
    for name in ["eta", "u", "v", "h", "wet"] {
        assert_eq!(a.array(name), b.array(name), "{name}");
    }
}

#[test]
fn fold_in_the_step_matches_sequential_accumulation() {
    let src = "program t
  real :: a(0:5,0:7)
  do j = 0, 5
    do k = 0, 7
      a(j,k) = (k * 3 + j * 7) * 0.1
    end do
  end do
  s = 0.0
  do n = 1, 3
    call acc(a, s)
  end do
end program t
subroutine acc(x, total)
  real :: x(0:5,0:7)
  do j = 0, 5
    do k = 0, 7
      total = total + x(j,k) * 1.7
    end do
  end do
end subroutine acc
";
    let p = free(src);
    let ir = build_ir(&p).unwrap();
    assert_eq!(ir.nodes[0].kind_name(), "fold");
    let cfg = EvalConfig::default();
    let a = run_program(&p, &cfg).unwrap();
    let b = run_ir(&p, &ir, &cfg).unwrap();
    assert_eq!(a.scalar("s"), b.scalar("s"));
}

fn shifted(var: &str, d: i32) -> String {
    match d {
        0 => var.to_string(),
        d if d > 0 => format!("{var}+{d}"),
        d => format!("{var}{d}"),
    }
}

fn stencil_program(target: &str, offsets: &[(i32, i32)]) -> String {
    let terms: Vec<String> =
        offsets.iter().map(|&(dj, dk)| format!("a({},{})", shifted("j", dj), shifted("k", dk))).collect();
    format!(
        "program t
  real :: a(0:9,0:9), b(0:9,0:9)
  do j = 3, 6
    do k = 3, 6
      {target}(j,k) = {}
    end do
  end do
end program t
",
        terms.join(" + ")
    )
}

proptest! {
    #[test]
    fn stencil_reads_are_recovered_exactly(offsets in prop::collection::btree_set((-2i32..=2, -2i32..=2), 1..8)) {
        let offsets: Vec<(i32, i32)> = offsets.into_iter().collect();
        let src = stencil_program("b", &offsets);
        let arrays = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let c = classify_loop_nest(&nest_of(&src), &arrays);
        prop_assert_eq!(&c.class, &LoopClass::Map);
        let got: BTreeSet<Vec<i32>> = c.accesses.iter().filter(|a| a.array == "a").map(|a| a.offsets.clone()).collect();
        let want: BTreeSet<Vec<i32>> = offsets.iter().map(|&(j, k)| vec![j, k]).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn in_place_update_with_a_shifted_read_is_never_a_map(offsets in prop::collection::btree_set((-2i32..=2, -2i32..=2), 1..8)) {
        prop_assume!(offsets.iter().any(|&o| o != (0, 0)));
        let offsets: Vec<(i32, i32)> = offsets.into_iter().collect();
        prop_assert_ne!(classify(&stencil_program("a", &offsets)), LoopClass::Map);
    }
}
