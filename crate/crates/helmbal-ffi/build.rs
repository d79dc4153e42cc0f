use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let header = crate_dir.join("include").join("helmbal.h");

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_language(cbindgen::Language::C)
        .with_cpp_compat(true)
        .with_include_guard("HELMBAL_H")
        .with_documentation(true)
        .with_autogen_warning(
            "/* Generated by cbindgen from the helmbal-ffi crate; do not edit by hand. */",
        )
        .generate()
        .expect("failed to generate the C header")
        .write_to_file(header);

    println!("cargo:rerun-if-changed=src/lib.rs");
}
