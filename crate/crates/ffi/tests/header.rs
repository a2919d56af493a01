//! The generated header declares every exported function and type.

use std::path::PathBuf;

fn crate_file(rel: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn header_declares_every_export() {
    let header = crate_file("include/blossom.h");
    let source = crate_file("src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 20, "found only {} exports", exports.len());
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "header lacks {name}");
    }
    for ty in [
        "typedef struct BlossomOptions BlossomOptions;",
        "typedef struct BlossomResult BlossomResult;",
        "typedef struct BlossomStep",
        "typedef enum BlossomStatus",
        "typedef enum BlossomTermination",
        "typedef enum BlossomPhase",
        "BLOSSOM_STATUS_OK = 0",
        "BLOSSOM_TERMINATION_LOCAL_CONVERGED",
    ] {
        assert!(header.contains(ty), "header lacks `{ty}`");
    }
}

#[test]
fn header_has_include_guard() {
    let header = crate_file("include/blossom.h");
    assert!(header.contains("#ifndef BLOSSOM_H"));
    assert!(header.trim_end().ends_with("#endif  /* BLOSSOM_H */"));
}
