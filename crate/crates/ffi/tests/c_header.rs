use std::path::{Path, PathBuf};
use std::process::Command;

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pricedisp.h")).unwrap();
    for name in [
        "pt_last_error",
        "pt_structure_binomial",
        "pt_structure_independent",
        "pt_structure_parse",
        "pt_structure_from_json",
        "pt_structure_free",
        "pt_solve",
        "pt_profile_free",
        "pt_profile_quantile",
        "pt_profile_cdf",
        "pt_profile_profit",
        "pt_profile_to_json",
        "pt_string_free",
        "pt_phi",
        "pt_phi_c",
        "pt_passthrough_summary",
        "pt_verify",
        "typedef struct PtProfile PtProfile",
        "PT_STATUS_VERIFICATION_FAILED = 6",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libpricedisp_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let exe = target_dir().join("pricedisp_ffi_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success(), "compiling the C smoke test failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke test exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("tau_trans "));
}
