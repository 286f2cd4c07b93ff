//! Builds a small C program against `include/rsos.h` and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "rsos.h"

int main(void) {
    RsosEventSet *set = NULL;
    if (rsos_event_set_generate(1, 10, 3.0, 1.0, false, 5, &set) != RSOS_STATUS_OK) return 10;
    RsosModel model = { RSOS_MODEL_KIND_RSOS, 0 };
    RsosInit init = { RSOS_INIT_KIND_ZERO, NULL, 0 };
    RsosField *field = NULL;
    if (rsos_evolve(set, model, init, 3.0, &field) != RSOS_STATUS_OK) return 11;
    int32_t origin[1] = { 0 };
    int64_t h = -1, v = -1;
    bool exact = false;
    if (rsos_field_height_at(field, origin, 1, &h) != RSOS_STATUS_OK) return 12;
    if (rsos_min_weight(set, 3.0, origin, 1, init, 0.0, model, &v, &exact) != RSOS_STATUS_OK) return 13;
    if (h != v || !exact) return 14;
    if (rsos_event_set_generate(1, 10, 3.0, 1.0, false, 5, NULL) != RSOS_STATUS_NULL_POINTER) return 15;
    if (rsos_last_error() == NULL) return 16;
    printf("%s %lld\n", rsos_version(), (long long)h);
    rsos_field_free(field);
    rsos_event_set_free(set);
    return 0;
}
"#;

fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = profile_dir().join("librsos_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("rsos_smoke.c");
    let bin = tmp.join("rsos_smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap_or_else(|e| panic!("running {cc}: {e}"));
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with(env!("CARGO_PKG_VERSION")), "{stdout}");
}

#[test]
fn header_declares_every_exported_symbol() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rsos.h")).unwrap();
    let source = include_str!("../src/lib.rs");
    let exported: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 20, "{exported:?}");
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("#ifndef RSOS_H"));
    assert!(header.contains("typedef struct RsosEventSet RsosEventSet;"));
}
