//! The legacy kernel sources, embedded so the solver binary is
//! self-contained. The same files live under `corpus/` at the
//! repository root and double as translator fixtures.

pub const RESIDUAL: &str = include_str!("../../../../corpus/residual.f90");
pub const RELAX_COLOR: &str = include_str!("../../../../corpus/relax_color.f90");
pub const SWEEP_RB: &str = include_str!("../../../../corpus/sweep_rb.f90");
pub const RESTRICT: &str = include_str!("../../../../corpus/restrict.f90");
pub const INTERP_ADD: &str = include_str!("../../../../corpus/interp_add.f90");
pub const FILLZ: &str = include_str!("../../../../corpus/fillz.f90");
pub const PACK_INTERIOR: &str = include_str!("../../../../corpus/pack_interior.f90");
pub const UNPACK_INTERIOR: &str = include_str!("../../../../corpus/unpack_interior.f90");

pub const ALL: [(&str, &str); 8] = [
    ("residual", RESIDUAL),
    ("relax_color", RELAX_COLOR),
    ("sweep_rb", SWEEP_RB),
    ("restrict", RESTRICT),
    ("interp_add", INTERP_ADD),
    ("fillz", FILLZ),
    ("pack_interior", PACK_INTERIOR),
    ("unpack_interior", UNPACK_INTERIOR),
];

/// Load every corpus subroutine into a runtime.
pub fn load_corpus(rt: &mut crate::hostexec::Runtime) -> crate::hostexec::Result<()> {
    for (_, src) in ALL {
        rt.load_source(src)?;
    }
    Ok(())
}
