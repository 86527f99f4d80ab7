use std::path::Path;
use std::process::Command;

#[test]
fn header_is_current_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/flowforge.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build script");
    for symbol in [
        "ff_last_error",
        "ff_table_read_csv",
        "ff_table_free",
        "ff_model_load",
        "ff_model_predict",
        "ff_model_free",
        "ff_chi_square",
        "ff_run_experiment",
        "ff_string_free",
        "typedef struct FfTable FfTable",
        "FF_STATUS_OK = 0",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }

    let Ok(_) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"flowforge.h\"\n\
         int main(void) {\n\
           FfTable *t = NULL;\n\
           FfStatus s = ff_table_read_csv(\"x.csv\", NULL, &t);\n\
           if (s != FF_STATUS_OK) { const char *m = ff_last_error(); (void)m; }\n\
           ff_table_free(t);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
