//! Front end shared by the driver and the tests: parse, build the type
//! table, infer variable types and check modes.

use thiserror::Error;

use crate::dataflow::DataflowError;
use crate::ir::{
    check_well_modedness, infer_types, parse_module, ModeError, Module, ParseError, ProcDecl, TypeDef, TypeError,
    TypeTable, TypeTableError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("{file}: {source}")]
    Parse { file: String, source: ParseError },
    #[error("module `{module}`: {source}")]
    Types { module: String, source: TypeTableError },
    #[error("module `{module}`: {source}")]
    Type { module: String, source: TypeError },
    #[error("module `{module}`: {source}")]
    Mode { module: String, source: ModeError },
    #[error("module `{module}`: {source}")]
    Dataflow { module: String, source: DataflowError },
    #[error("module `{module}` imports `{import}`, which is neither given nor has an interface")]
    MissingImport { module: String, import: String },
    #[error("{0}")]
    Other(String),
}

/// A parsed, typed and mode-checked module with the type table it was
/// checked against.
#[derive(Clone, Debug)]
pub struct Checked {
    pub module: Module,
    pub table: TypeTable,
    /// Declarations visible from other modules.
    pub imported: Vec<ProcDecl>,
}

/// Checks an already parsed module against the given imported types and
/// declarations.
pub fn check_module(
    mut module: Module,
    imported_types: &[TypeDef],
    imported: &[ProcDecl],
) -> Result<Checked, CompileError> {
    let name = module.name.clone();
    let mut table = TypeTable::with_prelude();
    for def in imported_types.iter().chain(&module.types) {
        table.add(def.clone()).map_err(|source| CompileError::Types { module: name.clone(), source })?;
    }
    for def in &module.types {
        for alt in &def.alternatives {
            for a in &alt.args {
                table
                    .check_type(a, &def.params)
                    .map_err(|source| CompileError::Types { module: name.clone(), source })?;
            }
        }
    }
    infer_types(&mut module, &table, imported).map_err(|source| CompileError::Type { module: name.clone(), source })?;
    let mut visible = module.decls.clone();
    visible.extend(imported.iter().cloned());
    for p in &module.procs {
        check_well_modedness(p, &visible).map_err(|source| CompileError::Mode { module: name.clone(), source })?;
    }
    Ok(Checked { module, table, imported: imported.to_vec() })
}

/// Parses and checks a module that imports nothing.
pub fn frontend(src: &str) -> Result<Checked, CompileError> {
    let module = parse_module(src).map_err(|source| CompileError::Parse { file: "<input>".into(), source })?;
    check_module(module, &[], &[])
}
