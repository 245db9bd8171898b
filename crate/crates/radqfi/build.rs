fn main() {
    // system OpenBLAS bundles BLAS, CBLAS, and LAPACK symbols
    println!("cargo:rustc-link-lib=dylib=openblas");
}
