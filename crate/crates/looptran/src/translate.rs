//! Pipeline glue: source text to a translation unit, and kernel naming.

use crate::frontend::{parse_unit, tokenize, FrontendError, Subroutine, SymbolTable};
use crate::loopir::{
    check_bounds_static, lower_region, map_grid, BoundsVerdict, Diagnostic, LoopKernel,
    LowerError,
};
use crate::regions::{extract_regions, RegionError, RegionKind, TaggedRegion};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error("'{0}' has no parallel region with that name")]
    NoSuchKernel(String),
}

pub type Result<T> = std::result::Result<T, TranslateError>;

/// One parsed subroutine with its region split.
#[derive(Debug, Clone)]
pub struct TranslationUnit {
    pub subroutine: Subroutine,
    pub symbols: SymbolTable,
    pub regions: Vec<TaggedRegion>,
}

impl TranslationUnit {
    pub fn from_source(source: &str) -> Result<TranslationUnit> {
        let tokens = tokenize(source)?;
        let (subroutine, symbols) = parse_unit(&tokens)?;
        let regions = extract_regions(&subroutine, &symbols)?;
        Ok(TranslationUnit {
            subroutine,
            symbols,
            regions,
        })
    }

    pub fn name(&self) -> &crate::frontend::Name {
        &self.subroutine.name
    }

    /// Kernel name for the parallel region at `region_idx`: the bare
    /// subroutine name when it is the first parallel region, suffixed
    /// with the ordinal otherwise.
    pub fn kernel_name(&self, region_idx: usize) -> String {
        let nth = self.regions[..region_idx]
            .iter()
            .filter(|r| r.kind == RegionKind::Parallel)
            .count();
        if nth == 0 {
            self.subroutine.name.key()
        } else {
            format!("{}.{}", self.subroutine.name.key(), nth)
        }
    }

    pub fn parallel_region_indices(&self) -> Vec<usize> {
        self.regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.kind == RegionKind::Parallel)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A fully lowered, grid-mapped kernel ready to launch.
#[derive(Debug, Clone)]
pub struct CompiledKernel {
    pub kernel: Arc<LoopKernel>,
    pub bounds: BoundsVerdict,
    pub warnings: Vec<Diagnostic>,
}

/// Lower, grid-map and bounds-check one parallel region.
pub fn compile_region(unit: &TranslationUnit, region_idx: usize) -> Result<CompiledKernel> {
    let region = &unit.regions[region_idx];
    let kernel = lower_region(&unit.kernel_name(region_idx), region, &unit.symbols)?;
    let (kernel, mut warnings) = map_grid(kernel)?;
    let bounds = check_bounds_static(&kernel);
    if let BoundsVerdict::Unknown(notes) = &bounds {
        warnings.extend(notes.iter().cloned());
    }
    Ok(CompiledKernel {
        kernel: Arc::new(kernel),
        bounds,
        warnings,
    })
}
