use super::*;
use crate::translate::{compile_region, TranslationUnit};

pub(crate) const FIG4_WRAPPED: &str = r#"SUBROUTINE restrict_f4(qc, q, ci, nxc, nyc, istart, jstart)
  IMPLICIT NONE
  INTEGER, INTENT(IN) :: nxc, nyc, istart, jstart
  REAL(KIND=8), INTENT(OUT) :: qc(1:nxc, 1:nyc)
  REAL(KIND=8), INTENT(IN) :: q(1:2*nxc-1, 1:2*nyc-1)
  REAL(KIND=8), INTENT(IN) :: ci(1:nxc, 1:nyc, 1:8)
  INTEGER, PARAMETER :: LNE = 1, LA = 2, LNW = 3, LR = 4
  INTEGER, PARAMETER :: LL = 5, LSE = 6, LB = 7, LSW = 8
  INTEGER :: i, j, ic, jc

!#LOOPY_START(assume="nxc>=3")
DO jc=2, Nyc-1
  DO ic=2, Nxc-1
    j = jstart + (jc-1)*2
    i = istart + (ic-1)*2
    QC(ic,jc) = &
        Ci(ic,jc,LNE) * Q(i-1,j-1) &
      + Ci(ic,jc,LA) * Q(i,j-1) &
      + Ci(ic+1,jc,LNW) * Q(i+1,j-1) &
      + Ci(ic,jc,LR) * Q(i-1,j) &
      + Q(i,j) &
      + Ci(ic+1,jc,LL) * Q(i+1,j) &
      + Ci(ic,jc+1,LSE) * Q(i-1,j+1) &
      + Ci(ic,jc+1,LB) * Q(i,j+1) &
      + Ci(ic+1,jc+1,LSW) * Q(i+1,j+1)
  ENDDO
ENDDO
!#LOOPY_END
END SUBROUTINE restrict_f4
"#;

/// Same gather with the grid origin inlined, so the index arithmetic is
/// provable from the two extent assumptions alone.
const RESTRICT_LOCAL: &str = r#"SUBROUTINE restrict_local(qc, q, ci, nxc, nyc)
  IMPLICIT NONE
  INTEGER, INTENT(IN) :: nxc, nyc
  REAL(KIND=8), INTENT(OUT) :: qc(1:nxc, 1:nyc)
  REAL(KIND=8), INTENT(IN) :: q(1:2*nxc-1, 1:2*nyc-1)
  REAL(KIND=8), INTENT(IN) :: ci(1:nxc, 1:nyc, 1:8)
  INTEGER, PARAMETER :: LNE = 1, LA = 2, LNW = 3, LR = 4
  INTEGER, PARAMETER :: LL = 5, LSE = 6, LB = 7, LSW = 8
  INTEGER :: i, j, ic, jc

!#LOOPY_START(assume="nxc>=3", assume="nyc>=3")
DO jc=2, nyc-1
  DO ic=2, nxc-1
    j = 1 + (jc-1)*2
    i = 1 + (ic-1)*2
    qc(ic,jc) = &
        ci(ic,jc,LNE) * q(i-1,j-1) &
      + ci(ic,jc,LA) * q(i,j-1) &
      + ci(ic+1,jc,LNW) * q(i+1,j-1) &
      + ci(ic,jc,LR) * q(i-1,j) &
      + q(i,j) &
      + ci(ic+1,jc,LL) * q(i+1,j) &
      + ci(ic,jc+1,LSE) * q(i-1,j+1) &
      + ci(ic,jc+1,LB) * q(i,j+1) &
      + ci(ic+1,jc+1,LSW) * q(i+1,j+1)
  ENDDO
ENDDO
!#LOOPY_END
END SUBROUTINE restrict_local
"#;

pub(crate) const FIG5_LEFT: &str = r#"SUBROUTINE interp_shift(qf, nc)
  IMPLICIT NONE
  INTEGER, INTENT(IN) :: nc
  REAL(KIND=8), INTENT(INOUT) :: qf(1:2*nc, 1:2*nc)
  INTEGER :: i, j, ic, jc
!#LOOPY_START
I = 2
J = 2
DO IC=3, NC
  I = I + 2
  DO JC=3, NC
    J = J + 2
    QF(I,J) = 1.0D0
  ENDDO
ENDDO
!#LOOPY_END
END SUBROUTINE interp_shift
"#;

pub(crate) const FIG5_RIGHT: &str = r#"SUBROUTINE interp_shift(qf, nc)
  IMPLICIT NONE
  INTEGER, INTENT(IN) :: nc
  REAL(KIND=8), INTENT(INOUT) :: qf(1:2*nc, 1:2*nc)
  INTEGER :: i, j, ic, jc
!#LOOPY_START
DO IC=3, NC
  DO JC=3, NC
    I = (IC-1) * 2
    J = (JC-1) * 2
    QF(I,J) = 1.0D0
  ENDDO
ENDDO
!#LOOPY_END
END SUBROUTINE interp_shift
"#;

fn unit(src: &str) -> TranslationUnit {
    TranslationUnit::from_source(src).unwrap()
}

fn first_parallel(unit: &TranslationUnit) -> usize {
    unit.parallel_region_indices()[0]
}

fn diags_of(src: &str) -> Vec<Diagnostic> {
    let u = unit(src);
    let idx = first_parallel(&u);
    detect_loop_carried_deps(&u.regions[idx], &u.symbols)
}

#[test]
fn fig4_lowers_to_two_domains_and_one_store() {
    let u = unit(FIG4_WRAPPED);
    let idx = first_parallel(&u);
    let k = lower_region("restrict_f4", &u.regions[idx], &u.symbols).unwrap();
    assert_eq!(k.domains.len(), 2);
    assert_eq!(k.domains[0].var.as_str(), "jc");
    assert_eq!(k.domains[1].var.as_str(), "ic");
    assert_eq!(k.locals.len(), 2); // i and j are thread-private
    let stores: Vec<_> = k
        .body
        .iter()
        .filter(|i| matches!(i, KInstr::Store { .. }))
        .collect();
    assert_eq!(stores.len(), 1);
    if let KInstr::Store { param, .. } = stores[0] {
        assert_eq!(k.params[*param].name.as_str(), "QC");
    }
}

#[test]
fn single_loop_copy() {
    let src = "SUBROUTINE copy(a, b, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(OUT) :: a(1:n)\n\
        REAL(KIND=8), INTENT(IN) :: b(1:n)\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        a(i) = b(i)\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let u = unit(src);
    let k = lower_region("copy", &u.regions[0], &u.symbols).unwrap();
    assert_eq!(k.domains.len(), 1);
    let a = k.param_index(&"a".into()).unwrap();
    let b = k.param_index(&"b".into()).unwrap();
    let (k, _) = map_grid(k).unwrap();
    assert!(k.params[a].writes && !k.params[a].reads);
    assert!(k.params[b].reads && !k.params[b].writes);
    assert_eq!(k.grid_axes, vec![0]);
}

#[test]
fn fig5_left_is_rejected_with_hints() {
    let diags = diags_of(FIG5_LEFT);
    assert_eq!(diags.len(), 2, "{diags:?}");
    assert!(diags.iter().all(|d| d.code == DiagCode::LoopCarriedScalar));
    let i_diag = diags.iter().find(|d| d.message.contains("'I'")).unwrap();
    assert_eq!(i_diag.hint.as_deref(), Some("I = (IC - 1) * 2"));
    let j_diag = diags.iter().find(|d| d.message.contains("'J'")).unwrap();
    assert_eq!(j_diag.hint.as_deref(), Some("J = (JC - 1) * 2"));

    let u = unit(FIG5_LEFT);
    let err = lower_region("interp_shift", &u.regions[0], &u.symbols).unwrap_err();
    assert!(matches!(err, LowerError::Rejected(d) if d.len() == 2));
}

#[test]
fn fig5_right_is_clean() {
    assert_eq!(diags_of(FIG5_RIGHT), vec![]);
    let u = unit(FIG5_RIGHT);
    let k = lower_region("interp_shift", &u.regions[0], &u.symbols).unwrap();
    assert_eq!(k.domains.len(), 2);
    assert_eq!(k.locals.len(), 2);
}

#[test]
fn constant_subscript_store_is_write_overlap() {
    let src = "SUBROUTINE s(a, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(INOUT) :: a(1:n)\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        a(1) = 1.0D0 * i\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let diags = diags_of(src);
    assert_eq!(diags.len(), 1, "{diags:?}");
    assert_eq!(diags[0].code, DiagCode::WriteOverlap);
}

#[test]
fn lexicographic_sweep_is_loop_carried() {
    let src = "SUBROUTINE gs(u, f, nx, ny)\n\
        INTEGER, INTENT(IN) :: nx, ny\n\
        REAL(KIND=8), INTENT(INOUT) :: u(1:nx, 1:ny)\n\
        REAL(KIND=8), INTENT(IN) :: f(1:nx, 1:ny)\n\
        INTEGER :: i, j\n\
        !#LOOPY_START\n\
        DO j = 2, ny - 1\n\
        DO i = 2, nx - 1\n\
        u(i,j) = (f(i,j) - (u(i-1,j) + u(i+1,j) + u(i,j-1) + u(i,j+1))) / 4.0D0\n\
        ENDDO\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let diags = diags_of(src);
    assert!(!diags.is_empty());
    assert!(diags.iter().all(|d| d.code == DiagCode::LoopCarriedArray));
}

#[test]
fn strided_color_sweep_is_clean() {
    let src = "SUBROUTINE relax(u, f, nx, ny, di, dj)\n\
        INTEGER, INTENT(IN) :: nx, ny, di, dj\n\
        REAL(KIND=8), INTENT(INOUT) :: u(1:nx, 1:ny)\n\
        REAL(KIND=8), INTENT(IN) :: f(1:nx, 1:ny)\n\
        INTEGER :: i, j, ic, jc\n\
        !#LOOPY_START(assume=\"di>=0\", assume=\"di<=1\", assume=\"dj>=0\", assume=\"dj<=1\")\n\
        DO jc = 1, (ny - 1 - dj) / 2\n\
        DO ic = 1, (nx - 1 - di) / 2\n\
        j = 2 * jc + dj\n\
        i = 2 * ic + di\n\
        u(i,j) = (f(i,j) - (u(i-1,j) + u(i+1,j) + u(i,j-1) + u(i,j+1))) / 4.0D0\n\
        ENDDO\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    assert_eq!(diags_of(src), vec![]);
}

#[test]
fn assumption_separated_stores_are_clean_and_same_element_reload_is_fine() {
    // Two stores per iteration, provably apart only through the
    // assumptions.
    let src = "SUBROUTINE sc(a, n, gap)\n\
        INTEGER, INTENT(IN) :: n, gap\n\
        REAL(KIND=8), INTENT(INOUT) :: a(1:n+100)\n\
        INTEGER :: i\n\
        !#LOOPY_START(assume=\"n<=50\", assume=\"gap>=100\")\n\
        DO i = 1, n\n\
        a(i) = 1.0D0 * i\n\
        a(i+gap) = 2.0D0\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    assert_eq!(diags_of(src), vec![]);

    // Without the assumptions the same pair must be flagged.
    let unguarded = src
        .replace("(assume=\"n<=50\", assume=\"gap>=100\")", "")
        .replace("SUBROUTINE sc", "SUBROUTINE sc2");
    let diags = diags_of(&unguarded);
    assert!(diags.iter().any(|d| d.code == DiagCode::WriteOverlap));
}

#[test]
fn load_after_own_store_is_clean() {
    let src = "SUBROUTINE chain(a, b, c, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(INOUT) :: a(1:n)\n\
        REAL(KIND=8), INTENT(IN) :: b(1:n)\n\
        REAL(KIND=8), INTENT(OUT) :: c(1:n)\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        a(i) = b(i) + 1.0D0\n\
        c(i) = a(i) * 2.0D0\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    assert_eq!(diags_of(src), vec![]);
}

#[test]
fn non_affine_store_subscript_is_dynamic() {
    let src = "SUBROUTINE sq(a, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(INOUT) :: a(1:n)\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        a(i * i) = 1.0D0\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let diags = diags_of(src);
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].code, DiagCode::DynamicIndex);
}

#[test]
fn non_loop_region_is_an_error() {
    let src = "SUBROUTINE s(x)\n\
        INTEGER, INTENT(INOUT) :: x\n\
        !#LOOPY_START\n\
        x = 1\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let u = unit(src);
    let err = lower_region("s", &u.regions[0], &u.symbols).unwrap_err();
    assert!(matches!(err, LowerError::NonLoopRegion { .. }));
}

#[test]
fn grid_extents_from_fig4_bounds() {
    // jc, ic = 2 .. 5-1 gives a 3x3 grid: 9 threads.
    let u = unit(FIG4_WRAPPED);
    let compiled = compile_region(&u, first_parallel(&u)).unwrap();
    let k = &compiled.kernel;
    assert_eq!(k.grid_axes, vec![0, 1]);
    // Extent evaluation happens at launch; here just confirm the mapped
    // axes and that the single-domain case maps one axis.
    let one = "SUBROUTINE one(a, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(OUT) :: a(1:n)\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        a(i) = 0.0\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let u1 = unit(one);
    let c1 = compile_region(&u1, 0).unwrap();
    assert_eq!(c1.kernel.grid_axes, vec![0]);
}

#[test]
fn assumed_extents_emit_no_dynamic_bounds_warning() {
    let u = unit(RESTRICT_LOCAL);
    let idx = first_parallel(&u);
    let k = lower_region("restrict_local", &u.regions[idx], &u.symbols).unwrap();
    let (_, warnings) = map_grid(k).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");

    // Without assumptions the extent may be empty: warn.
    let softened = RESTRICT_LOCAL
        .replace("(assume=\"nxc>=3\", assume=\"nyc>=3\")", "");
    let u2 = unit(&softened);
    let k2 = lower_region("restrict_local", &u2.regions[0], &u2.symbols).unwrap();
    let (_, warnings2) = map_grid(k2).unwrap();
    assert_eq!(warnings2.len(), 2);
    assert!(warnings2.iter().all(|w| w.code == DiagCode::DynamicBounds));
}

#[test]
fn bounds_static_verified_with_assumptions() {
    let u = unit(RESTRICT_LOCAL);
    let c = compile_region(&u, first_parallel(&u)).unwrap();
    assert!(c.bounds.is_verified(), "{:?}", c.bounds);
}

#[test]
fn bounds_static_unknown_without_assumptions() {
    let softened = RESTRICT_LOCAL.replace("(assume=\"nxc>=3\", assume=\"nyc>=3\")", "");
    let u = unit(&softened);
    let c = compile_region(&u, 0).unwrap();
    assert!(!c.bounds.is_verified());
}

#[test]
fn bounds_static_flags_definite_underrun() {
    let src = "SUBROUTINE s(a, n)\n\
        INTEGER, INTENT(IN) :: n\n\
        REAL(KIND=8), INTENT(INOUT) :: a(1:n)\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        a(i - 1) = 1.0D0 * i\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let u = unit(src);
    let c = compile_region(&u, 0).unwrap();
    assert!(!c.bounds.is_verified());
    let BoundsVerdict::Unknown(notes) = &c.bounds else {
        panic!()
    };
    assert!(
        notes.iter().any(|d| d.message.contains("below the declared lower bound")),
        "{notes:?}"
    );
}

#[test]
fn kernel_text_is_deterministic_and_shaped() {
    let u = unit(FIG4_WRAPPED);
    let idx = first_parallel(&u);
    let c1 = compile_region(&u, idx).unwrap();
    let c2 = compile_region(&u, idx).unwrap();
    let t1 = emit_kernel_text(&c1.kernel);
    let t2 = emit_kernel_text(&c2.kernel);
    assert_eq!(t1, t2);
    assert!(t1.contains("domain jc: 2 .. Nyc - 1 [grid axis 0]"), "{t1}");
    assert!(t1.contains("domain ic: 2 .. Nxc - 1 [grid axis 1]"), "{t1}");
    assert!(t1.contains("store QC(ic,jc)"), "{t1}");
}

#[test]
fn header_only_dump_for_empty_body() {
    let src = "SUBROUTINE nop(n)\n\
        INTEGER, INTENT(IN) :: n\n\
        INTEGER :: i\n\
        !#LOOPY_START\n\
        DO i = 1, n\n\
        ENDDO\n\
        !#LOOPY_END\n\
        END SUBROUTINE\n";
    let u = unit(src);
    let c = compile_region(&u, 0).unwrap();
    let text = emit_kernel_text(&c.kernel);
    assert!(text.ends_with("body:\n"), "{text}");
}

#[test]
fn bounds_verified_by_enumeration_oracle() {
    // Brute-force cross-check of the `Verified` verdict: for small
    // parameter values satisfying the assumptions, simulate every
    // iteration of the restriction kernel and check each subscript
    // in-bounds by hand.
    for n in [3i64, 4, 5, 6] {
        let (nxc, nyc) = (n, n);
        for jc in 2..=(nyc - 1) {
            for ic in 2..=(nxc - 1) {
                let j = 1 + (jc - 1) * 2;
                let i = 1 + (ic - 1) * 2;
                let q_max = 2 * nxc - 1;
                for (x, y) in [
                    (i - 1, j - 1),
                    (i, j - 1),
                    (i + 1, j - 1),
                    (i - 1, j),
                    (i, j),
                    (i + 1, j),
                    (i - 1, j + 1),
                    (i, j + 1),
                    (i + 1, j + 1),
                ] {
                    assert!(x >= 1 && x <= q_max && y >= 1 && y <= 2 * nyc - 1);
                }
                assert!(ic + 1 <= nxc && jc + 1 <= nyc);
            }
        }
    }
    // The static checker must agree with the oracle above.
    let u = unit(RESTRICT_LOCAL);
    let c = compile_region(&u, first_parallel(&u)).unwrap();
    assert!(c.bounds.is_verified());
}
