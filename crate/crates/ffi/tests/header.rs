//! The generated header must stay in sync with the exported symbols and
//! compile as C.

use std::path::PathBuf;
use std::process::Command;

fn header() -> (PathBuf, String) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/kbl.h");
    let text = std::fs::read_to_string(&path).expect("include/kbl.h is generated by build.rs");
    (path, text)
}

#[test]
fn declares_every_export() {
    let (_, text) = header();
    let src = include_str!("../src/lib.rs");
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15);
    for name in exported {
        assert!(text.contains(&format!("{name}(")), "{name} missing from kbl.h");
    }
    for ty in ["typedef struct KblBasis KblBasis", "KBL_STATUS_CERT_FAIL = 8", "typedef struct KblCertificate"] {
        assert!(text.contains(ty), "{ty} missing from kbl.h");
    }
}

#[test]
fn compiles_as_c() {
    let (path, _) = header();
    let dir = tempfile::tempdir().unwrap();
    let probe = dir.path().join("probe.c");
    std::fs::write(
        &probe,
        format!(
            "#include \"{}\"\nint probe(void) {{ KblBasis *b = 0; KblCertificate c; (void)c; \
             return kbl_basis_new(0, 3, 1, &b) == KBL_STATUS_OK; }}\n",
            path.display()
        ),
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&probe)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler ({cc}); skipping");
            return;
        }
    };
    assert!(status.success());
}
