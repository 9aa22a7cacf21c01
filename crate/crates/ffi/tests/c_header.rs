use std::path::{Path, PathBuf};
use std::process::Command;

fn library_dir() -> Option<PathBuf> {
    // target/<profile>/deps/<test binary>
    let dir = std::env::current_exe().ok()?.parent()?.parent()?.to_path_buf();
    let name = format!("{}fpp_ffi{}", std::env::consts::DLL_PREFIX, std::env::consts::DLL_SUFFIX);
    dir.join(name).exists().then_some(dir)
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipped: no C compiler ({cc})");
        return;
    }
    let Some(lib) = library_dir() else {
        eprintln!("skipped: shared library not built");
        return;
    };
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new(&cc)
        .args(["-std=c11", "-Wall", "-Wextra", "-Werror", "-o"])
        .arg(&exe)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib)
        .arg(format!("-Wl,-rpath,{}", lib.display()))
        .args(["-lfpp_ffi", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
